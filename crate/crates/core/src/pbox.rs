//! Discrete probability boxes.

use serde::{Deserialize, Serialize};

use crate::distributions::StepCdf;
use crate::error::{Error, Result};

/// Slack allowed on the `upper >= lower` ordering to absorb rounding.
pub const ORDER_SLACK: f64 = 1e-12;

/// A pair of CDF bounds. `upper` dominates `lower` pointwise.
///
/// Serialized as `{"lower": .., "upper": .., "support": [min, max]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPBox", into = "RawPBox")]
pub struct PBox {
    lower: StepCdf,
    upper: StepCdf,
    support_min: f64,
    support_max: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPBox {
    lower: StepCdf,
    upper: StepCdf,
    support: [f64; 2],
}

impl TryFrom<RawPBox> for PBox {
    type Error = Error;

    fn try_from(raw: RawPBox) -> Result<Self> {
        let pbox = PBox::new(raw.lower, raw.upper)?;
        if pbox.support() != (raw.support[0], raw.support[1]) {
            return Err(Error::format("support does not match the bounds' knot range"));
        }
        Ok(pbox)
    }
}

impl From<PBox> for RawPBox {
    fn from(p: PBox) -> Self {
        RawPBox {
            support: [p.support_min, p.support_max],
            lower: p.lower,
            upper: p.upper,
        }
    }
}

impl PBox {
    /// Builds a p-box, checking `upper >= lower` on the merged knot grid.
    /// The support is the union of both bounds' knot ranges.
    pub fn new(lower: StepCdf, upper: StepCdf) -> Result<Self> {
        for x in merged_grid(&[&lower, &upper]) {
            if upper.eval(x) + ORDER_SLACK < lower.eval(x) {
                return Err(Error::domain(format!("upper bound below lower bound at {x}")));
            }
        }
        let support_min = lower.first_knot().min(upper.first_knot());
        let support_max = lower.last_knot().max(upper.last_knot());
        Ok(PBox {
            lower,
            upper,
            support_min,
            support_max,
        })
    }

    /// The p-box whose bounds coincide with `cdf`.
    pub fn degenerate(cdf: StepCdf) -> Self {
        PBox {
            support_min: cdf.first_knot(),
            support_max: cdf.last_knot(),
            lower: cdf.clone(),
            upper: cdf,
        }
    }

    pub fn lower(&self) -> &StepCdf {
        &self.lower
    }

    pub fn upper(&self) -> &StepCdf {
        &self.upper
    }

    pub fn support(&self) -> (f64, f64) {
        (self.support_min, self.support_max)
    }

    pub fn support_width(&self) -> f64 {
        self.support_max - self.support_min
    }

    /// Exact integral of `upper - lower` over the support.
    pub fn raw_area(&self) -> f64 {
        let grid = merged_grid(&[&self.lower, &self.upper]);
        grid.windows(2)
            .map(|w| {
                let gap = (self.upper.eval(w[0]) - self.lower.eval(w[0])).max(0.0);
                gap * (w[1] - w[0])
            })
            .sum()
    }

    /// Degree of uncertainty. Normalized mode divides by the support width
    /// (0 for a degenerate support).
    pub fn area(&self, normalize: bool) -> f64 {
        let raw = self.raw_area();
        if !normalize {
            return raw;
        }
        let width = self.support_width();
        if width <= 0.0 {
            0.0
        } else {
            (raw / width).min(1.0)
        }
    }

    /// True iff `lower <= cdf <= upper` everywhere.
    pub fn contains(&self, cdf: &StepCdf) -> bool {
        merged_grid(&[&self.lower, &self.upper, cdf])
            .into_iter()
            .all(|x| {
                let f = cdf.eval(x);
                self.lower.eval(x) <= f + ORDER_SLACK && f <= self.upper.eval(x) + ORDER_SLACK
            })
    }
}

/// Sorted union of the knots of `cdfs`.
pub(crate) fn merged_grid(cdfs: &[&StepCdf]) -> Vec<f64> {
    let mut grid: Vec<f64> = cdfs.iter().flat_map(|c| c.knots().iter().copied()).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Pointwise min/max envelope of a CDF family.
pub fn envelope(cdfs: &[StepCdf]) -> Result<PBox> {
    if cdfs.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let refs: Vec<&StepCdf> = cdfs.iter().collect();
    let grid = merged_grid(&refs);
    let mut lo = Vec::with_capacity(grid.len());
    let mut hi = Vec::with_capacity(grid.len());
    for &x in &grid {
        let (mn, mx) = cdfs
            .iter()
            .map(|c| c.eval(x))
            .fold((1.0f64, 0.0f64), |(mn, mx), v| (mn.min(v), mx.max(v)));
        lo.push(mn);
        hi.push(mx);
    }
    PBox::new(StepCdf::from_grid(&grid, &lo)?, StepCdf::from_grid(&grid, &hi)?)
}

pub fn area(pbox: &PBox, normalize: bool) -> f64 {
    pbox.area(normalize)
}

pub fn contains(pbox: &PBox, cdf: &StepCdf) -> bool {
    pbox.contains(cdf)
}
