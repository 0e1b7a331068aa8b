//! Empirical distribution primitives.
//!
//! [`StepCdf`] is the one distribution representation used throughout the
//! crate: a right-continuous step function over a strictly increasing knot
//! set. Probability boxes and contamination bands are pairs of these.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite real-valued observations (seconds, possibly negative).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SampleSet(Vec<f64>);

impl SampleSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite sample {bad}")));
        }
        Ok(SampleSet(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> Option<f64> {
        self.0.iter().copied().reduce(f64::min)
    }

    pub fn max(&self) -> Option<f64> {
        self.0.iter().copied().reduce(f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<SampleSet> {
        SampleSet::new(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for SampleSet {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        SampleSet::new(values)
    }
}

impl From<SampleSet> for Vec<f64> {
    fn from(s: SampleSet) -> Self {
        s.0
    }
}

/// Right-continuous step CDF: `F(x) = cum_probs[i]` for the largest
/// `knots[i] <= x`, and 0 below the first knot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStepCdf")]
pub struct StepCdf {
    knots: Vec<f64>,
    cum_probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawStepCdf {
    knots: Vec<f64>,
    cum_probs: Vec<f64>,
}

impl TryFrom<RawStepCdf> for StepCdf {
    type Error = Error;

    fn try_from(raw: RawStepCdf) -> Result<Self> {
        StepCdf::new(raw.knots, raw.cum_probs)
    }
}

impl StepCdf {
    /// Validating constructor.
    pub fn new(knots: Vec<f64>, cum_probs: Vec<f64>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::domain("step cdf needs at least one knot"));
        }
        if knots.len() != cum_probs.len() {
            return Err(Error::domain("knots and cum_probs differ in length"));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::domain("knots must be finite"));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("knots must be strictly increasing"));
        }
        if cum_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::domain("cumulative probabilities must lie in [0, 1]"));
        }
        if cum_probs.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::domain("cumulative probabilities must be non-decreasing"));
        }
        if cum_probs[cum_probs.len() - 1] != 1.0 {
            return Err(Error::domain("last cumulative probability must be exactly 1"));
        }
        Ok(StepCdf { knots, cum_probs })
    }

    /// Point mass at `x`.
    pub fn point_mass(x: f64) -> Result<Self> {
        StepCdf::new(vec![x], vec![1.0])
    }

    /// Builds the canonical step function taking `values[i]` on
    /// `[grid[i], grid[i + 1])`.
    ///
    /// Knots that do not change the value are dropped, so two step functions
    /// that evaluate identically have identical representations. Values are
    /// clamped into `[0, 1]`; the final value must be within 1e-9 of 1 and is
    /// pinned to exactly 1.
    pub(crate) fn from_grid(grid: &[f64], values: &[f64]) -> Result<Self> {
        debug_assert_eq!(grid.len(), values.len());
        let last = *values.last().ok_or(Error::EmptyFamily)?;
        if (last - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("step function ends at {last}, not 1")));
        }
        let mut knots = Vec::with_capacity(grid.len());
        let mut probs = Vec::with_capacity(grid.len());
        let mut prev = 0.0;
        for (i, (&x, &v)) in grid.iter().zip(values).enumerate() {
            let v = if i + 1 == grid.len() {
                1.0
            } else {
                v.clamp(0.0, 1.0)
            };
            // Keep monotone under rounding noise.
            let v = v.max(prev);
            if v != prev {
                knots.push(x);
                probs.push(v);
                prev = v;
            }
        }
        StepCdf::new(knots, probs)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn cum_probs(&self) -> &[f64] {
        &self.cum_probs
    }

    pub fn first_knot(&self) -> f64 {
        self.knots[0]
    }

    pub fn last_knot(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// `F(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.knots.partition_point(|&k| k <= x);
        if idx == 0 {
            0.0
        } else {
            self.cum_probs[idx - 1]
        }
    }

    /// Generalized inverse `inf { x : F(x) >= p }` for `p` in `(0, 1]`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::domain(format!("quantile level {p} outside (0, 1]")));
        }
        let idx = self.cum_probs.partition_point(|&c| c < p);
        // The last cumulative probability is exactly 1, so idx is in range.
        Ok(self.knots[idx])
    }

    /// Probability mass at each knot.
    pub fn masses(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mut prev = 0.0;
        self.knots.iter().zip(&self.cum_probs).map(move |(&k, &c)| {
            let m = c - prev;
            prev = c;
            (k, m)
        })
    }
}

/// Empirical CDF `(count of samples <= x) / n` with duplicates collapsed.
pub fn ecdf(samples: &SampleSet) -> Result<StepCdf> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = samples.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut knots: Vec<f64> = Vec::new();
    let mut probs = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let count = (i + 1) as f64 / n;
        match knots.last() {
            Some(&last) if last == v => *probs.last_mut().unwrap() = count,
            _ => {
                knots.push(v);
                probs.push(count);
            }
        }
    }
    StepCdf::new(knots, probs)
}

pub fn eval_cdf(cdf: &StepCdf, x: f64) -> f64 {
    cdf.eval(x)
}

pub fn quantile(cdf: &StepCdf, p: f64) -> Result<f64> {
    cdf.quantile(p)
}

/// Histogram mass function over equal-width bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassFunction {
    pub bin_edges: Vec<f64>,
    pub masses: Vec<f64>,
}

impl MassFunction {
    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }
}

/// Equal-width histogram over `[min, max]`, normalized to unit mass.
///
/// Zero-width support yields a single bin holding all the mass regardless of
/// `bin_count`.
pub fn histogram(samples: &SampleSet, bin_count: usize) -> Result<MassFunction> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if bin_count == 0 {
        return Err(Error::domain("bin_count must be at least 1"));
    }
    let lo = samples.min().unwrap();
    let hi = samples.max().unwrap();
    if hi == lo {
        return Ok(MassFunction {
            bin_edges: vec![lo, hi],
            masses: vec![1.0],
        });
    }
    let width = (hi - lo) / bin_count as f64;
    let mut counts = vec![0usize; bin_count];
    for &v in samples.values() {
        let idx = (((v - lo) / width).floor() as usize).min(bin_count - 1);
        counts[idx] += 1;
    }
    let n = samples.len() as f64;
    let mut bin_edges: Vec<f64> = (0..bin_count).map(|i| lo + width * i as f64).collect();
    bin_edges.push(hi);
    Ok(MassFunction {
        bin_edges,
        masses: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}
