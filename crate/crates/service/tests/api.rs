use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;
use uqsched_core::synth::{biased_fixture, tight_wide_fixture, zero_error_fixture};
use uqsched_core::*;
use uqsched_service::{router, AppState, ServiceState, TrainReport};

fn noise_12() -> PredictorConfig {
    PredictorConfig {
        noise_std: 12.0,
        ..Default::default()
    }
}

fn state_for(records: Vec<TaskRecord>, predictor_config: PredictorConfig) -> AppState {
    let snapshot = Snapshot::new(records).unwrap();
    let predictors = PredictorSet::untrained(predictor_config.clone());
    AppState::new(
        ServiceState::new(snapshot, &AnalysisConfig::default(), predictors, predictor_config).unwrap(),
    )
}

fn ten_record_state() -> AppState {
    let snap = parse_csv(include_str!("../../core/tests/fixtures/ten.csv").as_bytes()).unwrap();
    AppState::new(
        ServiceState::new(
            snap,
            &AnalysisConfig::default(),
            PredictorSet::untrained(Default::default()),
            Default::default(),
        )
        .unwrap(),
    )
}

async fn call(app: &AppState, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = router(app.clone())
        .oneshot(req.body(body).unwrap())
        .await
        .unwrap();
    let status = resp.status();
    (
        status,
        resp.into_body().collect().await.unwrap().to_bytes().to_vec(),
    )
}

fn error_code(bytes: &[u8]) -> String {
    let v: Value = serde_json::from_slice(bytes).unwrap();
    assert!(v["message"].is_string());
    v["code"].as_str().unwrap().to_string()
}

fn whatif_body(seq: &str, op: &str, season: &str, nominal: f64) -> Value {
    serde_json::json!({
        "sequence_id": seq, "operator_id": op, "season": season, "nominal_estimate_s": nominal
    })
}

#[tokio::test]
async fn sequences_empty_snapshot() {
    let app = state_for(vec![], Default::default());
    let (status, body) = call(&app, "GET", "/api/v1/sequences", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"[]");
}

#[tokio::test]
async fn sequences_match_hand_counts() {
    let app = ten_record_state();
    let (status, body) = call(&app, "GET", "/api/v1/sequences", None).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    let expected = serde_json::json!([
        {"sequence_id": "786", "seasons": ["spring", "summer"],
         "operators": ["alice", "bob", "carol"], "record_count": 8},
        {"sequence_id": "787", "seasons": ["spring"], "operators": ["bob", "carol"], "record_count": 2},
    ]);
    assert_eq!(v, expected);
    assert_eq!(
        body,
        serde_json::to_vec(&list_sequences(&app.current().snapshot)).unwrap()
    );
}

#[tokio::test]
async fn uncertainty_is_bit_identical_to_library() {
    let app = state_for(biased_fixture(1), Default::default());
    let snap = app.current().snapshot.clone();
    let analysis = analyze(&snap, &AnalysisConfig::default()).unwrap();
    for model in &analysis.models {
        let g = &model.group;
        let uri = format!(
            "/api/v1/uncertainty?sequence={}&operator={}&season={}",
            g.sequence_id, g.operator_id, g.season
        );
        let (status, body) = call(&app, "GET", &uri, None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body, serde_json::to_vec(model).unwrap());
    }
}

#[tokio::test]
async fn uncertainty_errors() {
    let app = ten_record_state();
    let (status, body) = call(
        &app,
        "GET",
        "/api/v1/uncertainty?sequence=999&operator=alice&season=spring",
        None,
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(error_code(&body), "group_not_found");

    let (status, body) = call(
        &app,
        "GET",
        "/api/v1/uncertainty?sequence=786&season=spring",
        None,
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&body), "bad_request");

    let (status, body) = call(
        &app,
        "GET",
        "/api/v1/uncertainty?sequence=786&operator=&season=spring",
        None,
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&body), "bad_request");

    let (status, body) = call(
        &app,
        "GET",
        "/api/v1/uncertainty?sequence=786&operator=alice&season=monsoon",
        None,
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&body), "bad_request");
}

#[tokio::test]
async fn ranking_matches_library_and_puts_tight_first() {
    let app = state_for(tight_wide_fixture(), Default::default());
    let state = app.current();
    let (status, body) = call(&app, "GET", "/api/v1/ranking?sequence=786&season=summer", None).await;
    assert_eq!(status, StatusCode::OK);
    let expected = state
        .analysis
        .ranking("786", Season::Summer, &state.predictors)
        .unwrap();
    assert_eq!(body, serde_json::to_vec(&expected).unwrap());
    assert_eq!(expected[0].operator_id, "tight");
}

#[tokio::test]
async fn ranking_single_operator_and_unknown_season() {
    let app = ten_record_state();
    let (status, body) = call(&app, "GET", "/api/v1/ranking?sequence=786&season=summer", None).await;
    assert_eq!(status, StatusCode::OK);
    let v: Vec<RankingEntry> = serde_json::from_slice(&body).unwrap();
    assert_eq!(v.len(), 2);

    let (status, body) = call(&app, "GET", "/api/v1/ranking?sequence=787&season=winter", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(error_code(&body), "group_not_found");

    let (status, body) = call(&app, "GET", "/api/v1/ranking?season=winter", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&body), "bad_request");
}

#[tokio::test]
async fn whatif_on_zero_error_data_is_identity() {
    let app = state_for(zero_error_fixture(5), Default::default());
    let (status, _) = call(&app, "POST", "/api/v1/train", None).await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = call(
        &app,
        "POST",
        "/api/v1/whatif",
        Some(whatif_body("786", "op-a", "summer", 100.0)),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let w: WhatIf = serde_json::from_slice(&body).unwrap();
    assert_eq!(w.corrected_estimate_s, 100.0);
    assert_eq!(w.band_q05_s, 100.0);
    assert_eq!(w.band_q95_s, 100.0);
    let state = app.current();
    let key = GroupKey::new("786", "op-a", Season::Summer);
    let lib = state
        .analysis
        .what_if(&key, 100.0, &state.predictors, (0.05, 0.95))
        .unwrap();
    assert_eq!(body, serde_json::to_vec(&lib).unwrap());
}

#[tokio::test]
async fn whatif_validation() {
    let app = ten_record_state();
    for nominal in [0.0, -5.0] {
        let (status, body) = call(
            &app,
            "POST",
            "/api/v1/whatif",
            Some(whatif_body("786", "alice", "spring", nominal)),
        )
        .await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        assert_eq!(error_code(&body), "bad_request");
    }
    let (status, body) = call(
        &app,
        "POST",
        "/api/v1/whatif",
        Some(whatif_body("786", "zed", "spring", 100.0)),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(error_code(&body), "group_not_found");

    let (status, body) = call(
        &app,
        "POST",
        "/api/v1/whatif",
        Some(serde_json::json!({"sequence_id": "786"})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&body), "bad_request");

    let (status, body) = call(
        &app,
        "POST",
        "/api/v1/whatif?qlo=0.9&qhi=0.1",
        Some(whatif_body("786", "alice", "spring", 100.0)),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&body), "bad_request");
}

#[tokio::test]
async fn whatif_custom_quantiles_match_library() {
    let app = ten_record_state();
    let (status, body) = call(
        &app,
        "POST",
        "/api/v1/whatif?qlo=0.25&qhi=0.75",
        Some(whatif_body("786", "alice", "spring", 300.0)),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let state = app.current();
    let key = GroupKey::new("786", "alice", Season::Spring);
    let lib = state
        .analysis
        .what_if(&key, 300.0, &state.predictors, (0.25, 0.75))
        .unwrap();
    assert_eq!(body, serde_json::to_vec(&lib).unwrap());
}

#[tokio::test]
async fn train_on_identity_data_leaves_degrees_unchanged() {
    let app = state_for(zero_error_fixture(2), Default::default());
    let (status, body) = call(&app, "POST", "/api/v1/train", None).await;
    assert_eq!(status, StatusCode::OK);
    let report: TrainReport = serde_json::from_slice(&body).unwrap();
    assert_eq!(report.groups.len(), 3);
    for g in &report.groups {
        assert_eq!(g.degree_before, g.degree_after);
    }
}

#[tokio::test]
async fn train_matches_library_and_swaps_predictors() {
    let app = state_for(biased_fixture(0), noise_12());
    let before = app.current();
    let (status, body) = call(&app, "POST", "/api/v1/train", None).await;
    assert_eq!(status, StatusCode::OK);

    let lib = train(&before.snapshot, &AnalysisConfig::default(), &noise_12()).unwrap();
    let expected = TrainReport {
        groups: lib.comparison.clone(),
    };
    assert_eq!(body, serde_json::to_vec(&expected).unwrap());
    for g in &lib.comparison {
        assert!(g.degree_after <= 0.5 * g.degree_before, "{g:?}");
    }

    let after = app.current();
    assert_eq!(after.predictors, lib.predictors);
    assert_eq!(after.analysis, before.analysis);
    assert_eq!(after.comparison.as_ref(), Some(&lib.comparison));

    let (status, body) = call(
        &app,
        "POST",
        "/api/v1/whatif",
        Some(whatif_body("786", "op-a", "summer", 100.0)),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let w: WhatIf = serde_json::from_slice(&body).unwrap();
    assert!((w.corrected_estimate_s - 120.0).abs() <= 0.05 * 120.0, "{w:?}");

    let (_, body) = call(&app, "GET", "/api/v1/ranking?sequence=787&season=summer", None).await;
    let expected = after
        .analysis
        .ranking("787", Season::Summer, &lib.predictors)
        .unwrap();
    assert_eq!(body, serde_json::to_vec(&expected).unwrap());
}

#[tokio::test]
async fn concurrent_train_is_rejected() {
    let app = ten_record_state();
    let guard = app.try_begin_training().unwrap();
    let (status, body) = call(&app, "POST", "/api/v1/train", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(error_code(&body), "train_in_progress");
    drop(guard);
    let (status, _) = call(&app, "POST", "/api/v1/train", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(!app.is_training());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn readers_see_old_or_new_state_during_training() {
    let app = state_for(biased_fixture(4), noise_12());
    let old = app.current();
    let key = GroupKey::new("786", "op-b", Season::Summer);
    let old_payload = serde_json::to_vec(
        &old.analysis
            .what_if(&key, 400.0, &old.predictors, (0.05, 0.95))
            .unwrap(),
    )
    .unwrap();

    let trainer = {
        let app = app.clone();
        tokio::spawn(async move { call(&app, "POST", "/api/v1/train", None).await })
    };
    let mut seen = Vec::new();
    while !trainer.is_finished() {
        let (status, body) = call(
            &app,
            "POST",
            "/api/v1/whatif",
            Some(whatif_body("786", "op-b", "summer", 400.0)),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        seen.push(body);
        tokio::task::yield_now().await;
    }
    assert_eq!(trainer.await.unwrap().0, StatusCode::OK);
    let new = app.current();
    let new_payload = serde_json::to_vec(
        &new.analysis
            .what_if(&key, 400.0, &new.predictors, (0.05, 0.95))
            .unwrap(),
    )
    .unwrap();
    assert_ne!(old_payload, new_payload);
    for body in seen {
        assert!(body == old_payload || body == new_payload);
    }
}

#[tokio::test]
async fn cors_header_for_configured_origin() {
    use uqsched_service::{app, CorsPolicy};
    let policy = CorsPolicy::Origins(vec!["http://localhost:5173".into()]);
    let router = app(ten_record_state(), &policy).unwrap();
    let req = Request::get("/api/v1/sequences")
        .header("origin", "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let resp = router.oneshot(req).await.unwrap();
    assert_eq!(
        resp.headers()["access-control-allow-origin"],
        "http://localhost:5173"
    );
    let plain = app(ten_record_state(), &CorsPolicy::Disabled).unwrap();
    let req = Request::get("/api/v1/sequences")
        .header("origin", "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let resp = plain.oneshot(req).await.unwrap();
    assert!(!resp.headers().contains_key("access-control-allow-origin"));
    assert!(app(
        ten_record_state(),
        &CorsPolicy::Origins(vec!["bad\norigin".into()])
    )
    .is_err());
}
