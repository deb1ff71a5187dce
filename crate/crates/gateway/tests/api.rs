use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use drs_core::metrics::{fit_bucket_thresholds, Metric};
use drs_core::predict::Predictor;
use drs_core::scoring::{BaselineModel, RemoteClient, Scorer, FEATURE_COUNT};
use drs_gateway::hosting::{GitHubClient, HostedCommit, HostingClient, HostingError};
use drs_gateway::wire::{BatchSlot, HealthResponse, PredictResponse};
use drs_gateway::{router, AppState, GatewayConfig};
use serde_json::{json, Value};

const SAMPLE: &str = include_str!("../../../fixtures/gateway/sample-2kb.diff");
const SHA: &str = "0123456789abcdef0123456789abcdef01234567";

async fn spawn(app: Router) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

struct StubHosting;

#[async_trait]
impl HostingClient for StubHosting {
    async fn fetch_commit(&self, _owner: &str, _repo: &str, sha: &str) -> Result<HostedCommit, HostingError> {
        match sha {
            s if SHA.starts_with(s) => Ok(HostedCommit {
                sha: SHA.into(),
                message: "Discard fetch data for unassigned partitions".into(),
                diff: SAMPLE.into(),
            }),
            "ffffffff" => Err(HostingError::RateLimited { retry_after: Some(42) }),
            "eeeeeeee" => Err(HostingError::Upstream("status 500".into())),
            _ => Err(HostingError::NotFound),
        }
    }
}

fn builtin_state() -> AppState {
    let predictor = Predictor::new(Scorer::Builtin(BaselineModel::untrained()), 0.5);
    AppState::new(predictor, Some(Arc::new(StubHosting)), None, false, 64)
}

async fn gateway(state: AppState) -> String {
    spawn(router(state)).await
}

async fn post_json(url: &str, body: Value) -> (StatusCode, HeaderMap, String) {
    let resp = reqwest::Client::new().post(url).json(&body).send().await.unwrap();
    let status = StatusCode::from_u16(resp.status().as_u16()).unwrap();
    let headers = resp.headers().clone();
    (status, headers, resp.text().await.unwrap())
}

fn code(body: &str) -> String {
    serde_json::from_str::<Value>(body).unwrap()["error"]
        .as_str()
        .unwrap()
        .to_string()
}

#[tokio::test]
async fn health_reports_builtin_backend() {
    let url = gateway(builtin_state()).await;
    for _ in 0..2 {
        let h: HealthResponse = reqwest::get(format!("{url}/health"))
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        assert_eq!(h.status, "ok");
        assert_eq!(h.backend, "builtin-logreg");
        assert_eq!(h.version, env!("CARGO_PKG_VERSION"));
        assert!(!h.explain_enabled);
    }
}

#[tokio::test]
async fn health_stays_up_when_backend_is_down() {
    let dead = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let dead_url = format!("http://{}", dead.local_addr().unwrap());
    drop(dead);
    let client = RemoteClient::new(&dead_url, 300, 1 << 20).unwrap();
    let state = AppState::new(Predictor::new(Scorer::Remote(client), 0.5), None, None, false, 64);
    let url = gateway(state).await;
    let resp = reqwest::get(format!("{url}/health")).await.unwrap();
    assert_eq!(resp.status().as_u16(), 200);
    let h: HealthResponse = resp.json().await.unwrap();
    assert_eq!(h.backend, "unavailable");
}

#[tokio::test]
async fn predict_returns_frozen_schema() {
    let url = gateway(builtin_state()).await;
    let (status, _, body) = post_json(
        &format!("{url}/seq-cls/predict"),
        json!({"diff": SAMPLE, "commit_message": "Discard fetch data"}),
    )
    .await;
    assert_eq!(status, 200);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(
        v,
        json!({"probability": 0.5, "label": "risky", "confidence": 0.5, "threshold": 0.5,
               "scorer_id": "builtin-logreg", "truncated": false})
    );
    let (_, _, alias) = post_json(
        &format!("{url}/api/v1/drs/predict"),
        json!({"diff": SAMPLE, "commit_message": "Discard fetch data"}),
    )
    .await;
    assert_eq!(alias, body);
}

#[tokio::test]
async fn identical_requests_get_identical_responses() {
    let mut w = vec![0.0; FEATURE_COUNT];
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = (i as f64 * 0.37).sin();
    }
    let model = BaselineModel::from_weights(w).unwrap();
    let samples: [Vec<f64>; 12] = std::array::from_fn(|m| (0..50).map(|i| (i * (m + 1)) as f64).collect());
    let mut predictor = Predictor::new(Scorer::Builtin(model), 0.4);
    predictor.calibration = Some(fit_bucket_thresholds(&samples).unwrap());
    let url = gateway(AppState::new(predictor, None, None, false, 64)).await;
    let req = json!({"diff": SAMPLE, "commit_message": "m", "metrics": {"ndev": 7, "author_experience": 30}});
    let (s1, _, a) = post_json(&format!("{url}/seq-cls/predict"), req.clone()).await;
    let (s2, _, b) = post_json(&format!("{url}/seq-cls/predict"), req).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(a, b);
    let r: PredictResponse = serde_json::from_str(&a).unwrap();
    assert_ne!(r.probability, 0.5);
}

#[tokio::test]
async fn predict_rejects_bad_payloads() {
    let url = gateway(builtin_state()).await;
    let endpoint = format!("{url}/seq-cls/predict");
    let empty = reqwest::Client::new().post(&endpoint).send().await.unwrap();
    assert_eq!(empty.status().as_u16(), 400);

    for body in [
        json!({"diff": "", "commit_message": ""}),
        json!({"diff": "x"}),
        json!({"diff": "not a diff", "commit_message": "m"}),
        json!({"diff": SAMPLE, "commit_message": "m", "metrics": {"bogus": 1}}),
        json!({"diff": SAMPLE, "commit_message": "m", "metrics": {"ent": 2.0}}),
        json!([1, 2]),
    ] {
        let (status, _, resp) = post_json(&endpoint, body.clone()).await;
        assert_eq!(status, 400, "{body}");
        assert_eq!(code(&resp), "InvalidPayload");
    }
}

#[tokio::test]
async fn oversize_diff_is_413() {
    let mut predictor = Predictor::new(Scorer::Builtin(BaselineModel::untrained()), 0.5);
    predictor.max_diff_bytes = 1000;
    let url = gateway(AppState::new(predictor, None, None, false, 64)).await;
    let (status, _, body) = post_json(
        &format!("{url}/seq-cls/predict"),
        json!({"diff": SAMPLE, "commit_message": "m"}),
    )
    .await;
    assert_eq!(status, 413);
    assert_eq!(code(&body), "DiffTooLarge");
}

#[tokio::test]
async fn small_budget_truncates_or_rejects() {
    let mut predictor = Predictor::new(Scorer::Builtin(BaselineModel::untrained()), 0.5);
    predictor.budget = 60;
    let url = gateway(AppState::new(predictor, None, None, false, 64)).await;
    let (status, _, body) = post_json(
        &format!("{url}/seq-cls/predict"),
        json!({"diff": SAMPLE, "commit_message": "m"}),
    )
    .await;
    assert_eq!(status, 200);
    assert!(serde_json::from_str::<PredictResponse>(&body).unwrap().truncated);
    let (status, _, body) = post_json(
        &format!("{url}/seq-cls/predict"),
        json!({"diff": SAMPLE, "commit_message": "word ".repeat(100)}),
    )
    .await;
    assert_eq!(status, 413);
    assert_eq!(code(&body), "BudgetTooSmall");
}

#[tokio::test]
async fn batch_keeps_order_and_slot_errors() {
    let url = gateway(builtin_state()).await;
    let (status, _, body) = post_json(
        &format!("{url}/seq-cls/predict_batch"),
        json!([
            {"diff": SAMPLE, "commit_message": "first"},
            {"diff": 17, "commit_message": "wrong type"},
            {"diff": "", "commit_message": "message only"}
        ]),
    )
    .await;
    assert_eq!(status, 200);
    let slots: Vec<BatchSlot> = serde_json::from_str(&body).unwrap();
    assert_eq!(slots.len(), 3);
    assert!(matches!(slots[0], BatchSlot::Ok(_)));
    assert!(matches!(&slots[1], BatchSlot::Err(e) if e.error == "InvalidPayload"));
    assert!(matches!(slots[2], BatchSlot::Ok(_)));
}

#[tokio::test]
async fn batch_shape_errors() {
    let mut state_cap2 = Predictor::new(Scorer::Builtin(BaselineModel::untrained()), 0.5);
    state_cap2.max_diff_bytes = 1 << 16;
    let url = gateway(AppState::new(state_cap2, None, None, false, 2)).await;
    let endpoint = format!("{url}/seq-cls/predict_batch");
    let item = json!({"diff": "", "commit_message": "m"});
    assert_eq!(post_json(&endpoint, json!({"diff": ""})).await.0, 400);
    assert_eq!(post_json(&endpoint, json!([])).await.0, 400);
    let (status, _, body) = post_json(&endpoint, json!([item, item, item])).await;
    assert_eq!(status, 413);
    assert_eq!(code(&body), "BatchTooLarge");
}

#[tokio::test]
async fn lookup_by_sha() {
    let url = gateway(builtin_state()).await;
    let endpoint = format!("{url}/seq-cls/predict_by_sha");
    let (status, _, body) = post_json(
        &endpoint,
        json!({"owner_repo": "apache/kafka", "commit_sha": &SHA[..12]}),
    )
    .await;
    assert_eq!(status, 200);
    let r: PredictResponse = serde_json::from_str(&body).unwrap();
    assert_eq!(r.sha.as_deref(), Some(SHA));

    let (status, _, body) = post_json(
        &endpoint,
        json!({"owner_repo": "apache/kafka", "commit_sha": "abcabcab"}),
    )
    .await;
    assert_eq!(status, 404);
    assert_eq!(code(&body), "CommitNotFound");

    let (status, headers, body) = post_json(
        &endpoint,
        json!({"owner_repo": "apache/kafka", "commit_sha": "ffffffff"}),
    )
    .await;
    assert_eq!(status, 502);
    assert_eq!(headers["retry-after"], "42");
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["retry_after"], 42);

    let (status, _, _) = post_json(
        &endpoint,
        json!({"owner_repo": "apache/kafka", "commit_sha": "eeeeeeee"}),
    )
    .await;
    assert_eq!(status, 502);

    let (status, _, _) = post_json(&endpoint, json!({"owner_repo": "kafka", "commit_sha": "abcabcab"})).await;
    assert_eq!(status, 400);
}

#[tokio::test]
async fn lookup_without_credentials_is_401() {
    let state = AppState::new(
        Predictor::new(Scorer::Builtin(BaselineModel::untrained()), 0.5),
        None,
        None,
        false,
        64,
    );
    let url = gateway(state).await;
    let (status, _, body) = post_json(
        &format!("{url}/seq-cls/predict_by_sha"),
        json!({"owner_repo": "apache/kafka", "commit_sha": SHA}),
    )
    .await;
    assert_eq!(status, 401);
    assert_eq!(code(&body), "MissingCredentials");
}

fn clm_stub() -> Router {
    Router::new()
        .route(
            "/clm/predict",
            post(|Json(v): Json<Value>| async move {
                if v["commit_message"] == "slow" {
                    tokio::time::sleep(Duration::from_millis(800)).await;
                }
                "touches error handling"
            }),
        )
        .route("/health", get(|| async { "ok" }))
}

#[tokio::test]
async fn clm_endpoints() {
    let backend = spawn(clm_stub()).await;
    let client = RemoteClient::new(&backend, 200, 1 << 20).unwrap();
    let predictor = || Predictor::new(Scorer::Builtin(BaselineModel::untrained()), 0.5);

    let off = gateway(AppState::new(predictor(), None, Some(client.clone()), false, 64)).await;
    let (status, _, body) = post_json(
        &format!("{off}/clm/predict"),
        json!({"diff": "", "commit_message": "m"}),
    )
    .await;
    assert_eq!(status, 403);
    assert_eq!(code(&body), "FeatureDisabled");
    let (status, _, _) = post_json(&format!("{off}/clm/predict_by_sha"), json!({})).await;
    assert_eq!(status, 403);

    let on = gateway(AppState::new(
        predictor(),
        Some(Arc::new(StubHosting)),
        Some(client),
        true,
        64,
    ))
    .await;
    let resp = reqwest::Client::new()
        .post(format!("{on}/clm/predict"))
        .json(&json!({"diff": "", "commit_message": "m"}))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status().as_u16(), 200);
    assert!(resp.headers()["content-type"]
        .to_str()
        .unwrap()
        .starts_with("text/plain"));
    assert_eq!(resp.text().await.unwrap(), "touches error handling");

    let (status, _, body) = post_json(
        &format!("{on}/clm/predict_by_sha"),
        json!({"owner_repo": "apache/kafka", "commit_sha": SHA}),
    )
    .await;
    assert_eq!((status, body.as_str()), (StatusCode::OK, "touches error handling"));

    let (status, _, body) = post_json(
        &format!("{on}/clm/predict"),
        json!({"diff": "", "commit_message": "slow"}),
    )
    .await;
    assert_eq!(status, 504);
    assert_eq!(code(&body), "BackendTimeout");

    let h: HealthResponse = reqwest::get(format!("{on}/health"))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert!(h.explain_enabled);
}

#[tokio::test]
async fn remote_backend_failures_map_to_gateway_errors() {
    let backend = spawn(
        Router::new()
            .route(
                "/seq-cls/predict",
                post(|Json(v): Json<Value>| async move {
                    match v["commit_message"].as_str().unwrap() {
                        "slow" => {
                            tokio::time::sleep(Duration::from_millis(800)).await;
                            (StatusCode::OK, Json(json!({"probability": 0.5})))
                        }
                        "broken" => (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({}))),
                        _ => (StatusCode::OK, Json(json!({"probability": 0.91}))),
                    }
                }),
            )
            .route("/health", get(|| async { "ok" })),
    )
    .await;
    let client = RemoteClient::new(&backend, 200, 1 << 20).unwrap();
    let url = gateway(AppState::new(
        Predictor::new(Scorer::Remote(client), 0.5),
        None,
        None,
        false,
        64,
    ))
    .await;
    let endpoint = format!("{url}/seq-cls/predict");

    let (status, _, body) = post_json(&endpoint, json!({"diff": SAMPLE, "commit_message": "ok"})).await;
    assert_eq!(status, 200);
    let r: PredictResponse = serde_json::from_str(&body).unwrap();
    assert_eq!((r.probability, r.confidence), (0.91, 0.91));
    assert!(r.scorer_id.starts_with("remote-seq-cls@"));

    assert_eq!(
        post_json(&endpoint, json!({"diff": "", "commit_message": "broken"}))
            .await
            .0,
        502
    );
    assert_eq!(
        post_json(&endpoint, json!({"diff": "", "commit_message": "slow"}))
            .await
            .0,
        504
    );

    let h: HealthResponse = reqwest::get(format!("{url}/health"))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert!(h.backend.starts_with("remote-seq-cls@"));
}

#[tokio::test]
async fn github_client_against_stub_api() {
    async fn commit(headers: HeaderMap) -> axum::response::Response {
        use axum::response::IntoResponse;
        assert_eq!(headers["authorization"], "Bearer t0ken");
        if headers["accept"] == "application/vnd.github.diff" {
            SAMPLE.into_response()
        } else {
            Json(json!({"sha": SHA, "commit": {"message": "Fix fetcher"}})).into_response()
        }
    }
    async fn limited() -> axum::response::Response {
        use axum::response::IntoResponse;
        (
            StatusCode::FORBIDDEN,
            [("x-ratelimit-remaining", "0"), ("retry-after", "7")],
            "slow down",
        )
            .into_response()
    }
    let api = spawn(
        Router::new()
            .route(&format!("/repos/apache/kafka/commits/{SHA}"), get(commit))
            .route("/repos/apache/kafka/commits/ffffffff", get(limited)),
    )
    .await;
    let gh = GitHubClient::new(&api, "t0ken", 2000).unwrap();
    let c = gh.fetch_commit("apache", "kafka", SHA).await.unwrap();
    assert_eq!(c.message, "Fix fetcher");
    assert_eq!(c.diff, SAMPLE);
    assert_eq!(
        gh.fetch_commit("apache", "kafka", "abcdef12").await,
        Err(HostingError::NotFound)
    );
    assert_eq!(
        gh.fetch_commit("apache", "kafka", "ffffffff").await,
        Err(HostingError::RateLimited { retry_after: Some(7) })
    );
}

#[tokio::test]
async fn state_from_config_files() {
    let dir = tempfile::tempdir().unwrap();
    let samples: [Vec<f64>; 12] = std::array::from_fn(|_| (1..=100).map(f64::from).collect());
    let cal = dir.path().join("cal.txt");
    std::fs::write(&cal, fit_bucket_thresholds(&samples).unwrap().to_calibration_string()).unwrap();
    let model = dir.path().join("model.json");
    let mut w = vec![0.0; FEATURE_COUNT];
    w[FEATURE_COUNT - 1] = 2.0;
    std::fs::write(
        &model,
        serde_json::to_string(&BaselineModel::from_weights(w).unwrap()).unwrap(),
    )
    .unwrap();

    let vars: HashMap<String, String> = [
        ("DRS_CALIBRATION_PATH", cal.to_str().unwrap()),
        ("DRS_BASELINE_MODEL_PATH", model.to_str().unwrap()),
        ("DRS_THRESHOLD", "0.9"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    let cfg = GatewayConfig::from_map(&vars).unwrap();
    let state = AppState::from_config(&cfg).unwrap();
    assert!(state.predictor().calibration.is_some());
    let prepared = state
        .predictor()
        .prepare("m", SAMPLE, &drs_core::metrics::ChangeMetrics::unknown())
        .unwrap();
    assert_eq!(prepared.buckets.get(Metric::La).as_str(), "LOW");
    let url = gateway(state).await;
    let (_, _, body) = post_json(
        &format!("{url}/seq-cls/predict"),
        json!({"diff": SAMPLE, "commit_message": "m"}),
    )
    .await;
    let r: PredictResponse = serde_json::from_str(&body).unwrap();
    assert!((r.probability - 0.880_797_077_977_882_3).abs() < 1e-12);
    assert_eq!(r.label.as_str(), "safe");

    std::fs::write(&model, r#"{"weights":[1.0],"trained":true}"#).unwrap();
    assert!(AppState::from_config(&cfg).is_err());
}

#[tokio::test]
async fn p95_latency_under_one_second() {
    let url = gateway(builtin_state()).await;
    let client = reqwest::Client::new();
    let body = json!({"diff": SAMPLE, "commit_message": "Discard fetch data"});
    let mut latencies = Vec::with_capacity(100);
    for _ in 0..100 {
        let start = std::time::Instant::now();
        let resp = client
            .post(format!("{url}/seq-cls/predict"))
            .json(&body)
            .send()
            .await
            .unwrap();
        assert_eq!(resp.status().as_u16(), 200);
        resp.bytes().await.unwrap();
        latencies.push(start.elapsed());
    }
    latencies.sort();
    assert!(latencies[94] < Duration::from_secs(1), "p95 {:?}", latencies[94]);
}
