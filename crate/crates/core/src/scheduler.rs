//! Per-group uncertainty quantification, operator ranking and the
//! before/after training comparison.
//!
//! Groups with at least `sample_threshold` error samples get a p-box built
//! from chronological blocks of their own errors. Sparser groups get an
//! epsilon-contamination band around the pooled errors of their sequence and
//! season. The degree of uncertainty is the (normalized) area between the
//! band's bounds.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contamination::{contaminate, Contaminant, ContaminationSpec};
use crate::distributions::{ecdf, SampleSet};
use crate::error::{Error, Result};
use crate::ingest::{group_error_samples, ErrorSample, GroupKey, Season, SequenceKey, Snapshot};
use crate::pbox::{envelope, PBox};
use crate::predictor::{ModelSource, PredictorConfig, PredictorSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Groups with at least this many samples get a p-box.
    pub sample_threshold: usize,
    /// Target chronological block size for p-box subsets.
    pub subset_target_size: usize,
    /// Trust in the pooled data; the contamination weight is `1 - trust`.
    pub trust: f64,
    /// Contamination weight used verbatim, overriding `trust`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_raw: Option<f64>,
    pub normalize_area: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            sample_threshold: 25,
            subset_target_size: 12,
            trust: 0.8,
            epsilon_raw: None,
            normalize_area: true,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_threshold < 2 {
            return Err(Error::domain("sample_threshold must be at least 2"));
        }
        if self.subset_target_size < 2 {
            return Err(Error::domain("subset_target_size must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.trust) {
            return Err(Error::domain("trust must lie in [0, 1]"));
        }
        if let Some(eps) = self.epsilon_raw {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::domain("epsilon must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon_raw.unwrap_or(1.0 - self.trust)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Pbox,
    Contamination,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Pbox => "pbox",
            ModelKind::Contamination => "contamination",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyModel {
    pub group: GroupKey,
    pub kind: ModelKind,
    pub band: PBox,
    pub sample_count: usize,
    pub degree: f64,
}

/// Splits `values` into `k` contiguous blocks whose sizes differ by at most 1.
fn chronological_blocks(values: &[f64], k: usize) -> Vec<&[f64]> {
    let n = values.len();
    (0..k).map(|i| &values[i * n / k..(i + 1) * n / k]).collect()
}

fn band_for(errors: &SampleSet, pooled: &SampleSet, config: &AnalysisConfig) -> Result<(ModelKind, PBox)> {
    let n = errors.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if n >= config.sample_threshold {
        let k = (n / config.subset_target_size).max(2);
        let cdfs = chronological_blocks(errors.values(), k)
            .into_iter()
            .map(|b| ecdf(&SampleSet::new(b.to_vec())?))
            .collect::<Result<Vec<_>>>()?;
        Ok((ModelKind::Pbox, envelope(&cdfs)?))
    } else {
        let base = ecdf(pooled)?;
        let q = Contaminant::vacuous(base.first_knot(), base.last_knot())?;
        let spec = ContaminationSpec::new(config.epsilon(), base, q)?;
        Ok((ModelKind::Contamination, contaminate(&spec)?))
    }
}

/// Quantifies one group. `errors` must be in chronological order; `pooled`
/// holds the errors of every operator on the same sequence and season.
pub fn quantify_group(
    group: GroupKey,
    errors: &SampleSet,
    pooled: &SampleSet,
    config: &AnalysisConfig,
) -> Result<UncertaintyModel> {
    config.validate()?;
    let (kind, band) = band_for(errors, pooled, config)?;
    Ok(UncertaintyModel {
        group,
        kind,
        degree: band.area(config.normalize_area),
        band,
        sample_count: errors.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub operator_id: String,
    pub degree: f64,
    pub corrected_estimate_s: f64,
    pub sample_count: usize,
    pub kind: ModelKind,
    pub model_source: ModelSource,
}

/// Orders operators by degree of uncertainty, then corrected estimate, then
/// operator id.
pub fn rank_operators<F>(models: &[&UncertaintyModel], mut corrected: F) -> Result<Vec<RankingEntry>>
where
    F: FnMut(&GroupKey) -> Result<(f64, ModelSource)>,
{
    let first = models.first().ok_or(Error::EmptyFamily)?;
    let seq = first.group.sequence_key();
    let mut entries = Vec::with_capacity(models.len());
    for m in models {
        if m.group.sequence_key() != seq {
            return Err(Error::domain(format!(
                "cannot rank {} together with {seq}",
                m.group
            )));
        }
        let (estimate, source) = corrected(&m.group)?;
        entries.push(RankingEntry {
            operator_id: m.group.operator_id.clone(),
            degree: m.degree,
            corrected_estimate_s: estimate,
            sample_count: m.sample_count,
            kind: m.kind,
            model_source: source,
        });
    }
    entries.sort_by(|a, b| {
        a.degree
            .total_cmp(&b.degree)
            .then(a.corrected_estimate_s.total_cmp(&b.corrected_estimate_s))
            .then_with(|| a.operator_id.cmp(&b.operator_id))
    });
    Ok(entries)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceSummary {
    pub sequence_id: String,
    pub season: Season,
    pub operators: Vec<String>,
    pub record_count: usize,
    /// Mean nominal duration; operators are compared at this value.
    pub reference_nominal_s: f64,
}

/// All uncertainty models of a snapshot under one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub config: AnalysisConfig,
    pub models: Vec<UncertaintyModel>,
    pub sequences: Vec<SequenceSummary>,
}

fn pooled_by_sequence(groups: &BTreeMap<GroupKey, Vec<f64>>) -> Result<BTreeMap<SequenceKey, SampleSet>> {
    let mut pooled: BTreeMap<SequenceKey, Vec<f64>> = BTreeMap::new();
    for (k, v) in groups {
        pooled.entry(k.sequence_key()).or_default().extend(v);
    }
    pooled
        .into_iter()
        .map(|(k, v)| Ok((k, SampleSet::new(v)?)))
        .collect()
}

fn error_values(groups: &BTreeMap<GroupKey, Vec<ErrorSample>>) -> BTreeMap<GroupKey, Vec<f64>> {
    groups
        .iter()
        .map(|(k, v)| (k.clone(), v.iter().map(|s| s.error_s).collect()))
        .collect()
}

pub fn analyze(snapshot: &Snapshot, config: &AnalysisConfig) -> Result<Analysis> {
    config.validate()?;
    let samples = group_error_samples(snapshot);
    let errors = error_values(&samples);
    let pooled = pooled_by_sequence(&errors)?;
    let models = errors
        .par_iter()
        .map(|(key, v)| {
            let set = SampleSet::new(v.clone())?;
            quantify_group(key.clone(), &set, &pooled[&key.sequence_key()], config)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sequences: BTreeMap<SequenceKey, SequenceSummary> = BTreeMap::new();
    for (key, s) in &samples {
        let seq = key.sequence_key();
        let entry = sequences.entry(seq.clone()).or_insert_with(|| SequenceSummary {
            sequence_id: seq.sequence_id.clone(),
            season: seq.season,
            operators: Vec::new(),
            record_count: 0,
            reference_nominal_s: 0.0,
        });
        entry.operators.push(key.operator_id.clone());
        entry.record_count += s.len();
        entry.reference_nominal_s += s.iter().map(|e| e.nominal_s).sum::<f64>();
    }
    let sequences = sequences
        .into_values()
        .map(|mut s| {
            s.reference_nominal_s /= s.record_count as f64;
            s
        })
        .collect();
    Ok(Analysis {
        config: config.clone(),
        models,
        sequences,
    })
}

/// Outcome of a what-if query for one group at a nominal duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    pub corrected_estimate_s: f64,
    pub std_s: f64,
    pub band_q05_s: f64,
    pub band_q95_s: f64,
    pub model_kind: ModelKind,
    pub sample_count: usize,
}

impl Analysis {
    pub fn model(&self, key: &GroupKey) -> Option<&UncertaintyModel> {
        self.models
            .binary_search_by(|m| m.group.cmp(key))
            .ok()
            .map(|i| &self.models[i])
    }

    pub fn sequence(&self, sequence_id: &str, season: Season) -> Option<&SequenceSummary> {
        self.sequences
            .iter()
            .find(|s| s.sequence_id == sequence_id && s.season == season)
    }

    pub fn models_for(&self, sequence_id: &str, season: Season) -> Vec<&UncertaintyModel> {
        self.models
            .iter()
            .filter(|m| m.group.sequence_id == sequence_id && m.group.season == season)
            .collect()
    }

    /// Ranking for one sequence and season, comparing operators at the
    /// sequence's reference nominal duration.
    pub fn ranking(
        &self,
        sequence_id: &str,
        season: Season,
        predictors: &PredictorSet,
    ) -> Result<Vec<RankingEntry>> {
        let summary = self
            .sequence(sequence_id, season)
            .ok_or_else(|| Error::NotFound(format!("sequence {sequence_id} in {season}")))?;
        let models = self.models_for(sequence_id, season);
        rank_operators(&models, |key| {
            let c = predictors.correct(key, summary.reference_nominal_s)?;
            Ok((c.estimate.estimate_s, c.source))
        })
    }

    /// Top-ranked operator.
    pub fn suggest(
        &self,
        sequence_id: &str,
        season: Season,
        predictors: &PredictorSet,
    ) -> Result<RankingEntry> {
        Ok(self.ranking(sequence_id, season, predictors)?.remove(0))
    }

    /// Corrected estimate plus a duration band from the group's error band:
    /// the low quantile is read off the upper CDF bound and the high one off
    /// the lower bound, both shifted by the nominal.
    pub fn what_if(
        &self,
        key: &GroupKey,
        nominal: f64,
        predictors: &PredictorSet,
        (q_lo, q_hi): (f64, f64),
    ) -> Result<WhatIf> {
        if !(q_lo > 0.0 && q_lo < q_hi && q_hi <= 1.0) {
            return Err(Error::domain(format!(
                "quantile levels ({q_lo}, {q_hi}) must satisfy 0 < lo < hi <= 1"
            )));
        }
        let model = self
            .model(key)
            .ok_or_else(|| Error::NotFound(format!("group {key}")))?;
        let c = predictors.correct(key, nominal)?;
        Ok(WhatIf {
            corrected_estimate_s: c.estimate.estimate_s,
            std_s: c.estimate.std_s,
            band_q05_s: nominal + model.band.upper().quantile(q_lo)?,
            band_q95_s: nominal + model.band.lower().quantile(q_hi)?,
            model_kind: model.kind,
            sample_count: model.sample_count,
        })
    }

    pub fn export(&self, predictors: &PredictorSet) -> Result<AnalysisExport> {
        let rankings = self
            .sequences
            .iter()
            .map(|s| {
                Ok(SequenceRanking {
                    sequence_id: s.sequence_id.clone(),
                    season: s.season,
                    entries: self.ranking(&s.sequence_id, s.season, predictors)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(AnalysisExport {
            schema_version: crate::ingest::SCHEMA_VERSION,
            config: self.config.clone(),
            models: self.models.clone(),
            rankings,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceRanking {
    pub sequence_id: String,
    pub season: Season,
    pub entries: Vec<RankingEntry>,
}

/// Serialized form of an analysis run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisExport {
    pub schema_version: u64,
    pub config: AnalysisConfig,
    pub models: Vec<UncertaintyModel>,
    pub rankings: Vec<SequenceRanking>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub group: GroupKey,
    pub kind: ModelKind,
    pub degree_before: f64,
    pub degree_after: f64,
}

/// Re-quantifies every group on residuals `observed - corrected` and compares
/// with the raw errors.
///
/// Both bands use the same configuration and the same chronological blocks.
/// In normalized mode both areas are divided by the support width of the
/// raw-error band so the two degrees share one scale (capped at 1); with an
/// identity correction the two degrees are equal.
pub fn compare_before_after(
    snapshot: &Snapshot,
    predictors: &PredictorSet,
    config: &AnalysisConfig,
) -> Result<Vec<GroupComparison>> {
    config.validate()?;
    let samples = group_error_samples(snapshot);
    let before = error_values(&samples);
    let mut after: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
    for (key, s) in &samples {
        let residuals = s
            .iter()
            .map(|e| {
                let observed = e.nominal_s + e.error_s;
                Ok(observed - predictors.correct(key, e.nominal_s)?.estimate.estimate_s)
            })
            .collect::<Result<Vec<_>>>()?;
        after.insert(key.clone(), residuals);
    }
    let pooled_before = pooled_by_sequence(&before)?;
    let pooled_after = pooled_by_sequence(&after)?;

    before
        .par_iter()
        .map(|(key, raw)| {
            let seq = key.sequence_key();
            let (kind, band_before) = band_for(&SampleSet::new(raw.clone())?, &pooled_before[&seq], config)?;
            let (_, band_after) =
                band_for(&SampleSet::new(after[key].clone())?, &pooled_after[&seq], config)?;
            let (degree_before, degree_after) = if config.normalize_area {
                let width = band_before.support_width();
                if width > 0.0 {
                    (band_before.area(true), (band_after.raw_area() / width).min(1.0))
                } else {
                    (0.0, band_after.area(true))
                }
            } else {
                (band_before.area(false), band_after.area(false))
            };
            Ok(GroupComparison {
                group: key.clone(),
                kind,
                degree_before,
                degree_after,
            })
        })
        .collect()
}

/// Fitted predictors together with the before/after comparison they produce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub predictors: PredictorSet,
    pub comparison: Vec<GroupComparison>,
}

pub fn train(
    snapshot: &Snapshot,
    analysis: &AnalysisConfig,
    predictor: &PredictorConfig,
) -> Result<TrainOutcome> {
    let predictors = crate::predictor::train_predictors(snapshot, predictor)?;
    let comparison = compare_before_after(snapshot, &predictors, analysis)?;
    Ok(TrainOutcome {
        predictors,
        comparison,
    })
}
