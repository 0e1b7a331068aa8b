//! Epsilon-contamination neighbourhoods `(1 - eps) P + eps Q`.
//!
//! Applied to indicator gambles `1{X <= x}` this yields a CDF band around the
//! base distribution `P`; applied to an arbitrary gamble it yields lower and
//! upper previsions.

use serde::{Deserialize, Serialize};

use crate::distributions::{ecdf, SampleSet, StepCdf};
use crate::error::{Error, Result};
use crate::pbox::{merged_grid, PBox};

/// The contaminating model `Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Contaminant {
    /// Every distribution on `[support_min, support_max]`.
    Vacuous { support_min: f64, support_max: f64 },
    /// A CDF band.
    Explicit { lower: StepCdf, upper: StepCdf },
}

impl Contaminant {
    pub fn vacuous(support_min: f64, support_max: f64) -> Result<Self> {
        if !(support_min.is_finite() && support_max.is_finite()) || support_min > support_max {
            return Err(Error::domain(format!(
                "invalid vacuous support [{support_min}, {support_max}]"
            )));
        }
        Ok(Contaminant::Vacuous {
            support_min,
            support_max,
        })
    }

    pub fn explicit(lower: StepCdf, upper: StepCdf) -> Result<Self> {
        // Validates the ordering.
        PBox::new(lower.clone(), upper.clone())?;
        Ok(Contaminant::Explicit { lower, upper })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    pub epsilon: f64,
    pub base: StepCdf,
    pub contaminant: Contaminant,
}

impl ContaminationSpec {
    pub fn new(epsilon: f64, base: StepCdf, contaminant: Contaminant) -> Result<Self> {
        let spec = ContaminationSpec {
            epsilon,
            base,
            contaminant,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::domain(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        if let Contaminant::Vacuous {
            support_min,
            support_max,
        } = self.contaminant
        {
            Contaminant::vacuous(support_min, support_max)?;
        }
        Ok(())
    }
}

/// The CDF band of the contamination class.
///
/// For a vacuous contaminant over `[a, b]` the lower bound puts the
/// contaminating mass at `b` and the upper bound at `a`, so the band has
/// height exactly `epsilon` on `[a, b)`.
pub fn contaminate(spec: &ContaminationSpec) -> Result<PBox> {
    spec.validate()?;
    let eps = spec.epsilon;
    let keep = 1.0 - eps;
    if eps == 0.0 {
        return Ok(PBox::degenerate(spec.base.clone()));
    }
    let (grid, g_lo, g_hi): (Vec<f64>, Vec<f64>, Vec<f64>) = match &spec.contaminant {
        Contaminant::Vacuous {
            support_min,
            support_max,
        } => {
            let mut grid = spec.base.knots().to_vec();
            grid.extend([*support_min, *support_max]);
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            let lo = grid
                .iter()
                .map(|&x| if x >= *support_max { 1.0 } else { 0.0 })
                .collect();
            let hi = grid
                .iter()
                .map(|&x| if x >= *support_min { 1.0 } else { 0.0 })
                .collect();
            (grid, lo, hi)
        }
        Contaminant::Explicit { lower, upper } => {
            let grid = merged_grid(&[&spec.base, lower, upper]);
            let lo = grid.iter().map(|&x| lower.eval(x)).collect();
            let hi = grid.iter().map(|&x| upper.eval(x)).collect();
            (grid, lo, hi)
        }
    };
    let base: Vec<f64> = grid.iter().map(|&x| spec.base.eval(x)).collect();
    let lower: Vec<f64> = base.iter().zip(&g_lo).map(|(f, g)| keep * f + eps * g).collect();
    let upper: Vec<f64> = base.iter().zip(&g_hi).map(|(f, g)| keep * f + eps * g).collect();
    PBox::new(
        StepCdf::from_grid(&grid, &lower)?,
        StepCdf::from_grid(&grid, &upper)?,
    )
}

/// Expectation of the gamble under the mass function implied by `cdf`.
fn expectation(gamble: &[(f64, f64)], cdf: &StepCdf) -> Result<f64> {
    let mut sorted = gamble.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted.windows(2).any(|w| w[0].0 == w[1].0 && w[0].1 != w[1].1) {
        return Err(Error::domain("gamble assigns two values to one point"));
    }
    cdf.masses().try_fold(0.0, |acc, (k, m)| {
        let idx = sorted.partition_point(|(p, _)| *p < k);
        match sorted.get(idx) {
            Some(&(p, v)) if p == k => Ok(acc + m * v),
            _ => Err(Error::domain(format!("gamble undefined at support point {k}"))),
        }
    })
}

fn check_gamble(gamble: &[(f64, f64)]) -> Result<()> {
    if gamble.is_empty() {
        return Err(Error::domain("gamble is empty"));
    }
    if gamble.iter().any(|(p, v)| !p.is_finite() || !v.is_finite()) {
        return Err(Error::domain("gamble must be finite"));
    }
    Ok(())
}

/// Lower and upper previsions of the contaminant alone.
fn contaminant_bounds(gamble: &[(f64, f64)], contaminant: &Contaminant) -> Result<(f64, f64)> {
    match contaminant {
        Contaminant::Vacuous { .. } => {
            let values = gamble.iter().map(|&(_, v)| v);
            let lo = values.clone().fold(f64::INFINITY, f64::min);
            let hi = values.fold(f64::NEG_INFINITY, f64::max);
            Ok((lo, hi))
        }
        Contaminant::Explicit { lower, upper } => {
            let a = expectation(gamble, lower)?;
            let b = expectation(gamble, upper)?;
            Ok((a.min(b), a.max(b)))
        }
    }
}

/// `(1 - eps) E_P[f] + eps * lower_Q(f)`.
pub fn lower_prevision(gamble: &[(f64, f64)], spec: &ContaminationSpec) -> Result<f64> {
    spec.validate()?;
    check_gamble(gamble)?;
    let base = expectation(gamble, &spec.base)?;
    if spec.epsilon == 0.0 {
        return Ok(base);
    }
    let (q_lo, _) = contaminant_bounds(gamble, &spec.contaminant)?;
    Ok((1.0 - spec.epsilon) * base + spec.epsilon * q_lo)
}

/// `(1 - eps) E_P[f] + eps * upper_Q(f)`.
pub fn upper_prevision(gamble: &[(f64, f64)], spec: &ContaminationSpec) -> Result<f64> {
    spec.validate()?;
    check_gamble(gamble)?;
    let base = expectation(gamble, &spec.base)?;
    if spec.epsilon == 0.0 {
        return Ok(base);
    }
    let (_, q_hi) = contaminant_bounds(gamble, &spec.contaminant)?;
    Ok((1.0 - spec.epsilon) * base + spec.epsilon * q_hi)
}

/// ECDF of all groups' samples pooled together.
pub fn pooled_base(groups: &[SampleSet]) -> Result<StepCdf> {
    let all: Vec<f64> = groups.iter().flat_map(|g| g.values().iter().copied()).collect();
    ecdf(&SampleSet::new(all)?)
}
