//! Rational-quadratic Gaussian-process regression of duration error on the
//! nominal (predicted) duration, and the corrected estimate built from it.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{group_error_samples, GroupKey, SequenceKey, Snapshot};

/// Jitter retries after the unjittered factorization fails.
const MAX_JITTER_DOUBLINGS: u32 = 8;

const LENGTH_FACTORS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
const SIGNAL_FACTORS: [f64; 3] = [0.25, 1.0, 4.0];
const ALPHAS: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct RqKernelParams {
    signal_var: f64,
    length_scale: f64,
    alpha: f64,
    noise_std: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    signal_var: f64,
    length_scale: f64,
    alpha: f64,
    noise_std: f64,
}

impl TryFrom<RawParams> for RqKernelParams {
    type Error = Error;

    fn try_from(r: RawParams) -> Result<Self> {
        RqKernelParams::new(r.signal_var, r.length_scale, r.alpha, r.noise_std)
    }
}

impl From<RqKernelParams> for RawParams {
    fn from(p: RqKernelParams) -> Self {
        RawParams {
            signal_var: p.signal_var,
            length_scale: p.length_scale,
            alpha: p.alpha,
            noise_std: p.noise_std,
        }
    }
}

impl RqKernelParams {
    pub fn new(signal_var: f64, length_scale: f64, alpha: f64, noise_std: f64) -> Result<Self> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(signal_var) && positive(length_scale) && positive(alpha)) {
            return Err(Error::domain(
                "signal_var, length_scale and alpha must be finite and positive",
            ));
        }
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(Error::domain("noise_std must be finite and non-negative"));
        }
        Ok(RqKernelParams {
            signal_var,
            length_scale,
            alpha,
            noise_std,
        })
    }

    pub fn signal_var(&self) -> f64 {
        self.signal_var
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_std * self.noise_std
    }
}

/// `s2 * (1 + d^2 / (2 alpha l^2))^(-alpha)`.
pub fn rq_kernel(x1: f64, x2: f64, params: &RqKernelParams) -> f64 {
    let d = x1 - x2;
    let r2 = d * d / (2.0 * params.alpha * params.length_scale * params.length_scale);
    params.signal_var * (-params.alpha * r2.ln_1p()).exp()
}

#[derive(Clone, Debug)]
struct Solve {
    chol: Cholesky<f64, Dyn>,
    /// `(K + a^2 I)^-1 y`
    weights: DVector<f64>,
}

/// A fitted GP. Only the training data and parameters are serialized; the
/// factorization is rebuilt on load.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct GprModel {
    train_x: Vec<f64>,
    train_y: Vec<f64>,
    params: RqKernelParams,
    solve: Solve,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    train_x: Vec<f64>,
    train_y: Vec<f64>,
    params: RqKernelParams,
}

impl TryFrom<RawModel> for GprModel {
    type Error = Error;

    fn try_from(r: RawModel) -> Result<Self> {
        GprModel::with_params(r.train_x, r.train_y, r.params)
    }
}

impl From<GprModel> for RawModel {
    fn from(m: GprModel) -> Self {
        RawModel {
            train_x: m.train_x,
            train_y: m.train_y,
            params: m.params,
        }
    }
}

impl PartialEq for GprModel {
    fn eq(&self, other: &Self) -> bool {
        self.train_x == other.train_x && self.train_y == other.train_y && self.params == other.params
    }
}

/// Posterior predictive of the error at one nominal duration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub std: f64,
}

fn factorize(xs: &[f64], params: &RqKernelParams) -> Result<Cholesky<f64, Dyn>> {
    let n = xs.len();
    let mut k = DMatrix::from_fn(n, n, |i, j| rq_kernel(xs[i], xs[j], params));
    for i in 0..n {
        k[(i, i)] += params.noise_var();
    }
    if let Some(chol) = k.clone().cholesky() {
        return Ok(chol);
    }
    let mut jitter = 1e-10 * k.trace() / n as f64;
    for _ in 0..=MAX_JITTER_DOUBLINGS {
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += jitter;
        }
        if let Some(chol) = kj.cholesky() {
            return Ok(chol);
        }
        jitter *= 2.0;
    }
    Err(Error::SingularKernel {
        attempts: MAX_JITTER_DOUBLINGS + 1,
    })
}

fn check_training(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    if xs.len() != ys.len() {
        return Err(Error::domain("inputs and targets differ in length"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::domain("training data must be finite"));
    }
    Ok(())
}

impl GprModel {
    /// Fits with fixed hyperparameters.
    pub fn with_params(xs: Vec<f64>, ys: Vec<f64>, params: RqKernelParams) -> Result<Self> {
        check_training(&xs, &ys)?;
        let chol = factorize(&xs, &params)?;
        let weights = chol.solve(&DVector::from_column_slice(&ys));
        Ok(GprModel {
            train_x: xs,
            train_y: ys,
            params,
            solve: Solve { chol, weights },
        })
    }

    pub fn train_x(&self) -> &[f64] {
        &self.train_x
    }

    pub fn train_y(&self) -> &[f64] {
        &self.train_y
    }

    pub fn params(&self) -> &RqKernelParams {
        &self.params
    }

    fn cross(&self, x: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.train_x.len(),
            self.train_x.iter().map(|&xi| rq_kernel(x, xi, &self.params)),
        )
    }

    pub fn predict(&self, x: f64) -> Prediction {
        let ks = self.cross(x);
        let mean = ks.dot(&self.solve.weights);
        let v = self
            .solve
            .chol
            .l_dirty()
            .solve_lower_triangular(&ks)
            .expect("cholesky factor has a positive diagonal");
        let var = rq_kernel(x, x, &self.params) + self.params.noise_var() - v.dot(&v);
        Prediction {
            mean,
            std: var.max(0.0).sqrt(),
        }
    }

    /// Exact Gaussian log marginal likelihood of the training targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let y = DVector::from_column_slice(&self.train_y);
        let n = self.train_y.len() as f64;
        let log_det: f64 = self.solve.chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        -0.5 * y.dot(&self.solve.weights) - 0.5 * log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

fn population_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// Fits a model. With `optimize_hyper`, the signal variance, length scale and
/// shape are chosen by exact log marginal likelihood over a fixed grid built
/// from the data scales; `params.noise_std` is never optimized. The first
/// maximum in grid order wins.
pub fn fit(xs: &[f64], ys: &[f64], params: RqKernelParams, optimize_hyper: bool) -> Result<GprModel> {
    check_training(xs, ys)?;
    if !optimize_hyper {
        return GprModel::with_params(xs.to_vec(), ys.to_vec(), params);
    }
    let x_scale = match population_std(xs) {
        s if s > 0.0 => s,
        _ => params.length_scale,
    };
    // Zero prior mean: the signal variance has to cover the mean offset too.
    let y_scale = match ys.iter().map(|y| y * y).sum::<f64>() / ys.len() as f64 {
        m if m > 0.0 => m,
        _ => params.signal_var,
    };
    let mut best: Option<(f64, GprModel)> = None;
    let mut last_err = None;
    for lf in LENGTH_FACTORS {
        for sf in SIGNAL_FACTORS {
            for alpha in ALPHAS {
                let cand = RqKernelParams::new(y_scale * sf, x_scale * lf, alpha, params.noise_std)?;
                match GprModel::with_params(xs.to_vec(), ys.to_vec(), cand) {
                    Ok(model) => {
                        let lml = model.log_marginal_likelihood();
                        if lml.is_finite() && best.as_ref().is_none_or(|(b, _)| lml > *b) {
                            best = Some((lml, model));
                        }
                    }
                    Err(e) => last_err = Some(e),
                }
            }
        }
    }
    match best {
        Some((_, model)) => Ok(model),
        None => Err(last_err.unwrap_or(Error::SingularKernel { attempts: 0 })),
    }
}

pub fn predict(model: &GprModel, x: f64) -> Prediction {
    model.predict(x)
}

pub fn log_marginal_likelihood(model: &GprModel) -> f64 {
    model.log_marginal_likelihood()
}

/// Nominal duration plus learned mean error, clamped at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectedEstimate {
    pub estimate_s: f64,
    pub mean_error_s: f64,
    pub std_s: f64,
    pub clamped: bool,
}

pub fn corrected_estimate(model: &GprModel, nominal: f64) -> Result<CorrectedEstimate> {
    if !(nominal.is_finite() && nominal > 0.0) {
        return Err(Error::domain(format!(
            "nominal estimate {nominal} must be positive"
        )));
    }
    let p = model.predict(nominal);
    let raw = nominal + p.mean;
    Ok(CorrectedEstimate {
        estimate_s: raw.max(0.0),
        mean_error_s: p.mean,
        std_s: p.std,
        clamped: raw < 0.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    pub noise_std: f64,
    pub length_scale: f64,
    pub alpha: f64,
    /// Used when not optimizing; defaults to the mean squared target.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signal_var: Option<f64>,
    pub optimize: bool,
    /// Smallest group that gets its own model.
    pub min_train_size: usize,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            noise_std: 4430.0,
            length_scale: 7734.0,
            alpha: 1.0,
            signal_var: None,
            optimize: true,
            min_train_size: 5,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        RqKernelParams::new(
            self.signal_var.unwrap_or(1.0),
            self.length_scale,
            self.alpha,
            self.noise_std,
        )?;
        if self.min_train_size == 0 {
            return Err(Error::domain("min_train_size must be at least 1"));
        }
        Ok(())
    }

    fn fit(&self, xs: &[f64], ys: &[f64]) -> Result<GprModel> {
        let signal = self.signal_var.unwrap_or_else(|| {
            let m = ys.iter().map(|y| y * y).sum::<f64>() / ys.len() as f64;
            if m > 0.0 {
                m
            } else {
                1.0
            }
        });
        let params = RqKernelParams::new(signal, self.length_scale, self.alpha, self.noise_std)?;
        fit(xs, ys, params, self.optimize)
    }
}

/// Which model produced a correction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    Group,
    Pooled,
    None,
}

/// A correction with its provenance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub nominal_s: f64,
    pub estimate: CorrectedEstimate,
    pub source: ModelSource,
}

/// Fitted models for a snapshot: one per group with enough data, plus one
/// pooled model per (sequence, season) as a fallback.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPredictorSet", into = "RawPredictorSet")]
pub struct PredictorSet {
    config: PredictorConfig,
    per_group: BTreeMap<GroupKey, GprModel>,
    pooled: BTreeMap<SequenceKey, GprModel>,
}

#[derive(Serialize, Deserialize)]
struct RawPredictorSet {
    config: PredictorConfig,
    models: Vec<ModelEntry>,
}

#[derive(Serialize, Deserialize)]
struct ModelEntry {
    sequence_id: String,
    season: crate::ingest::Season,
    /// Absent for the pooled sequence-level model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    operator_id: Option<String>,
    model: GprModel,
}

impl TryFrom<RawPredictorSet> for PredictorSet {
    type Error = Error;

    fn try_from(raw: RawPredictorSet) -> Result<Self> {
        raw.config.validate()?;
        let mut set = PredictorSet {
            config: raw.config,
            ..Default::default()
        };
        for e in raw.models {
            match e.operator_id {
                Some(op) => {
                    set.per_group
                        .insert(GroupKey::new(e.sequence_id, op, e.season), e.model);
                }
                None => {
                    set.pooled
                        .insert(SequenceKey::new(e.sequence_id, e.season), e.model);
                }
            }
        }
        Ok(set)
    }
}

impl From<PredictorSet> for RawPredictorSet {
    fn from(set: PredictorSet) -> Self {
        let pooled = set.pooled.into_iter().map(|(k, model)| ModelEntry {
            sequence_id: k.sequence_id,
            season: k.season,
            operator_id: None,
            model,
        });
        let groups = set.per_group.into_iter().map(|(k, model)| ModelEntry {
            sequence_id: k.sequence_id,
            season: k.season,
            operator_id: Some(k.operator_id),
            model,
        });
        RawPredictorSet {
            config: set.config,
            models: pooled.chain(groups).collect(),
        }
    }
}

impl PredictorSet {
    /// No models: every correction is the identity.
    pub fn untrained(config: PredictorConfig) -> Self {
        PredictorSet {
            config,
            ..Default::default()
        }
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    pub fn group_models(&self) -> &BTreeMap<GroupKey, GprModel> {
        &self.per_group
    }

    pub fn pooled_models(&self) -> &BTreeMap<SequenceKey, GprModel> {
        &self.pooled
    }

    /// Group model, else the pooled model of its (sequence, season), else none.
    pub fn lookup(&self, key: &GroupKey) -> (Option<&GprModel>, ModelSource) {
        if let Some(m) = self.per_group.get(key) {
            return (Some(m), ModelSource::Group);
        }
        match self.pooled.get(&key.sequence_key()) {
            Some(m) => (Some(m), ModelSource::Pooled),
            None => (None, ModelSource::None),
        }
    }

    pub fn correct(&self, key: &GroupKey, nominal: f64) -> Result<Correction> {
        let (model, source) = self.lookup(key);
        let estimate = match model {
            Some(m) => corrected_estimate(m, nominal)?,
            None => {
                if !(nominal.is_finite() && nominal > 0.0) {
                    return Err(Error::domain(format!(
                        "nominal estimate {nominal} must be positive"
                    )));
                }
                CorrectedEstimate {
                    estimate_s: nominal,
                    mean_error_s: 0.0,
                    std_s: 0.0,
                    clamped: false,
                }
            }
        };
        Ok(Correction {
            nominal_s: nominal,
            estimate,
            source,
        })
    }
}

/// Group key (`None` for a pooled model), its sequence, and the training data.
type FitJob = (Option<GroupKey>, SequenceKey, Vec<f64>, Vec<f64>);

/// Fits group and pooled models for every group in the snapshot.
pub fn train_predictors(snapshot: &Snapshot, config: &PredictorConfig) -> Result<PredictorSet> {
    config.validate()?;
    let groups = group_error_samples(snapshot);
    let mut pooled_data: BTreeMap<SequenceKey, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut jobs: Vec<FitJob> = Vec::new();
    for (key, samples) in &groups {
        let xs: Vec<f64> = samples.iter().map(|s| s.nominal_s).collect();
        let ys: Vec<f64> = samples.iter().map(|s| s.error_s).collect();
        let entry = pooled_data.entry(key.sequence_key()).or_default();
        entry.0.extend(&xs);
        entry.1.extend(&ys);
        if samples.len() >= config.min_train_size {
            jobs.push((Some(key.clone()), key.sequence_key(), xs, ys));
        }
    }
    for (seq, (xs, ys)) in pooled_data {
        if xs.len() >= config.min_train_size {
            jobs.push((None, seq, xs, ys));
        }
    }
    let fitted: Vec<_> = jobs
        .into_par_iter()
        .map(|(group, seq, xs, ys)| config.fit(&xs, &ys).map(|m| (group, seq, m)))
        .collect::<Result<_>>()?;
    let mut set = PredictorSet::untrained(config.clone());
    for (group, seq, model) in fitted {
        match group {
            Some(k) => {
                set.per_group.insert(k, model);
            }
            None => {
                set.pooled.insert(seq, model);
            }
        }
    }
    Ok(set)
}
