use std::collections::HashMap;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Query, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use uqsched_core::{
    list_sequences, train, GroupComparison, GroupKey, RankingEntry, Season, SequenceListing,
    UncertaintyModel, WhatIf,
};

use crate::error::ApiError;
use crate::state::{AppState, ServiceState};

/// Quantile levels of the what-if duration band unless `qlo`/`qhi` are given.
pub const DEFAULT_QUANTILES: (f64, f64) = (0.05, 0.95);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    pub sequence_id: String,
    pub operator_id: String,
    pub season: Season,
    pub nominal_estimate_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub groups: Vec<GroupComparison>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/v1/sequences", get(sequences))
        .route("/api/v1/uncertainty", get(uncertainty))
        .route("/api/v1/ranking", get(ranking))
        .route("/api/v1/whatif", post(whatif))
        .route("/api/v1/train", post(train_handler))
        .with_state(state)
}

type Params = Query<HashMap<String, String>>;

fn required<'a>(params: &'a HashMap<String, String>, name: &str) -> Result<&'a str, ApiError> {
    match params.get(name).map(|s| s.trim()) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(ApiError::bad_request(format!("missing query parameter `{name}`"))),
    }
}

fn season(params: &HashMap<String, String>) -> Result<Season, ApiError> {
    required(params, "season")?
        .parse()
        .map_err(|e: uqsched_core::Error| ApiError::bad_request(e.to_string()))
}

fn level(params: &HashMap<String, String>, name: &str, default: f64) -> Result<f64, ApiError> {
    match params.get(name) {
        None => Ok(default),
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| ApiError::bad_request(format!("`{name}` is not a number: {v:?}"))),
    }
}

async fn sequences(State(app): State<AppState>) -> Json<Vec<SequenceListing>> {
    Json(list_sequences(&app.current().snapshot))
}

async fn uncertainty(
    State(app): State<AppState>,
    Query(p): Params,
) -> Result<Json<UncertaintyModel>, ApiError> {
    let key = GroupKey::new(required(&p, "sequence")?, required(&p, "operator")?, season(&p)?);
    let state = app.current();
    state
        .analysis
        .model(&key)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::group_not_found(format!("no data for group {key}")))
}

async fn ranking(State(app): State<AppState>, Query(p): Params) -> Result<Json<Vec<RankingEntry>>, ApiError> {
    let sequence = required(&p, "sequence")?;
    let season = season(&p)?;
    let state = app.current();
    Ok(Json(state.analysis.ranking(
        sequence,
        season,
        &state.predictors,
    )?))
}

async fn whatif(
    State(app): State<AppState>,
    Query(p): Params,
    body: Result<Json<WhatIfRequest>, JsonRejection>,
) -> Result<Json<WhatIf>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let (lo, hi) = DEFAULT_QUANTILES;
    let levels = (level(&p, "qlo", lo)?, level(&p, "qhi", hi)?);
    if req.sequence_id.is_empty() || req.operator_id.is_empty() {
        return Err(ApiError::bad_request(
            "sequence_id and operator_id must be non-empty",
        ));
    }
    if !(req.nominal_estimate_s.is_finite() && req.nominal_estimate_s > 0.0) {
        return Err(ApiError::bad_request(format!(
            "nominal_estimate_s must be positive, got {}",
            req.nominal_estimate_s
        )));
    }
    let key = GroupKey::new(req.sequence_id, req.operator_id, req.season);
    let state = app.current();
    Ok(Json(state.analysis.what_if(
        &key,
        req.nominal_estimate_s,
        &state.predictors,
        levels,
    )?))
}

async fn train_handler(State(app): State<AppState>) -> Result<Json<TrainReport>, ApiError> {
    let guard = app.try_begin_training().ok_or_else(ApiError::train_in_progress)?;
    let base = app.current();
    let job = base.clone();
    let outcome = tokio::task::spawn_blocking(move || {
        train(&job.snapshot, &job.analysis.config, &job.predictor_config)
    })
    .await
    .map_err(|e| ApiError::internal(format!("training task failed: {e}")))??;
    let next = ServiceState {
        snapshot: base.snapshot.clone(),
        analysis: base.analysis.clone(),
        predictors: outcome.predictors,
        predictor_config: base.predictor_config.clone(),
        comparison: Some(outcome.comparison.clone()),
    };
    app.swap(next);
    drop(guard);
    Ok(Json(TrainReport {
        groups: outcome.comparison,
    }))
}
