use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use drs_core::diff::{parse_unified_diff, structure_commit, Commit, CountingRule};
use drs_core::metrics::{compute_diff_metrics, BucketedMetrics};
use drs_core::scoring::{
    BackendConfig, BaselineModel, RemoteClient, RemotePayload, ScoreError, Scorer, ScorerConfig, ScoringInput,
};

async fn serve(app: Router) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

fn payload(diff: &str) -> RemotePayload {
    RemotePayload {
        diff: diff.into(),
        commit_message: "msg".into(),
        metrics: None,
    }
}

#[tokio::test]
async fn probability_passes_through() {
    let url = serve(Router::new().route(
        "/seq-cls/predict",
        post(|| async { Json(json!({"probability": 0.25})) }),
    ))
    .await;
    let c = RemoteClient::new(&url, 1000, 1 << 20).unwrap();
    assert_eq!(c.predict(&payload("d")).await, Ok(0.25));
}

#[tokio::test]
async fn non_json_body_is_malformed() {
    let url = serve(Router::new().route("/seq-cls/predict", post(|| async { "<html>oops</html>" }))).await;
    let c = RemoteClient::new(&url, 1000, 1 << 20).unwrap();
    assert!(matches!(
        c.predict(&payload("d")).await,
        Err(ScoreError::MalformedBackendResponse(_))
    ));
}

#[tokio::test]
async fn out_of_range_probability_is_malformed() {
    let url =
        serve(Router::new().route("/seq-cls/predict", post(|| async { Json(json!({"probability": 1.5})) }))).await;
    let c = RemoteClient::new(&url, 1000, 1 << 20).unwrap();
    assert!(matches!(
        c.predict(&payload("d")).await,
        Err(ScoreError::MalformedBackendResponse(_))
    ));
}

#[tokio::test]
async fn batch_results_follow_request_order() {
    // Probability encodes the request's diff length, so misordering shows.
    let app = Router::new().route(
        "/seq-cls/predict_batch",
        post(|Json(items): Json<Vec<Value>>| async move {
            Json(
                items
                    .iter()
                    .map(|v| json!({"probability": v["diff"].as_str().unwrap().len() as f64 / 10.0}))
                    .collect::<Vec<_>>(),
            )
        }),
    );
    let url = serve(app).await;
    let c = RemoteClient::new(&url, 1000, 1 << 20).unwrap();
    let got = c
        .predict_batch(&[payload("aaa"), payload("a"), payload("aaaaaaa")])
        .await
        .unwrap();
    assert_eq!(got, vec![0.3, 0.1, 0.7]);
}

#[tokio::test]
async fn short_batch_response_is_malformed() {
    let app = Router::new().route(
        "/seq-cls/predict_batch",
        post(|| async { Json(json!([{"probability": 0.5}])) }),
    );
    let url = serve(app).await;
    let c = RemoteClient::new(&url, 1000, 1 << 20).unwrap();
    assert!(matches!(
        c.predict_batch(&[payload("a"), payload("b")]).await,
        Err(ScoreError::MalformedBackendResponse(_))
    ));
}

#[tokio::test]
async fn one_retry_after_server_error() {
    let calls = Arc::new(AtomicUsize::new(0));
    let app = Router::new()
        .route(
            "/seq-cls/predict",
            post(|State(calls): State<Arc<AtomicUsize>>| async move {
                if calls.fetch_add(1, Ordering::SeqCst) == 0 {
                    Err(StatusCode::SERVICE_UNAVAILABLE)
                } else {
                    Ok(Json(json!({"probability": 0.6})))
                }
            }),
        )
        .with_state(calls.clone());
    let url = serve(app).await;
    let c = RemoteClient::new(&url, 1000, 1 << 20).unwrap();
    assert_eq!(c.predict(&payload("d")).await, Ok(0.6));
    assert_eq!(calls.load(Ordering::SeqCst), 2);
}

#[tokio::test]
async fn persistent_failure_surfaces_after_two_attempts() {
    let calls = Arc::new(AtomicUsize::new(0));
    let app = Router::new()
        .route(
            "/seq-cls/predict",
            post(|State(calls): State<Arc<AtomicUsize>>| async move {
                calls.fetch_add(1, Ordering::SeqCst);
                StatusCode::INTERNAL_SERVER_ERROR
            }),
        )
        .with_state(calls.clone());
    let url = serve(app).await;
    let c = RemoteClient::new(&url, 1000, 1 << 20).unwrap();
    assert!(matches!(
        c.predict(&payload("d")).await,
        Err(ScoreError::BackendUnavailable(_))
    ));
    assert_eq!(calls.load(Ordering::SeqCst), 2);
}

#[tokio::test]
async fn client_errors_are_not_retried() {
    let calls = Arc::new(AtomicUsize::new(0));
    let app = Router::new()
        .route(
            "/seq-cls/predict",
            post(|State(calls): State<Arc<AtomicUsize>>| async move {
                calls.fetch_add(1, Ordering::SeqCst);
                StatusCode::BAD_REQUEST
            }),
        )
        .with_state(calls.clone());
    let url = serve(app).await;
    let c = RemoteClient::new(&url, 1000, 1 << 20).unwrap();
    assert!(c.predict(&payload("d")).await.is_err());
    assert_eq!(calls.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn slow_backend_times_out() {
    let app = Router::new().route(
        "/seq-cls/predict",
        post(|| async {
            tokio::time::sleep(Duration::from_millis(500)).await;
            Json(json!({"probability": 0.5}))
        }),
    );
    let url = serve(app).await;
    let c = RemoteClient::new(&url, 50, 1 << 20).unwrap();
    assert_eq!(c.predict(&payload("d")).await, Err(ScoreError::BackendTimeout(50)));
}

#[tokio::test]
async fn unreachable_backend_is_unavailable() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let c = RemoteClient::new(&url, 500, 1 << 20).unwrap();
    assert!(matches!(
        c.predict(&payload("d")).await,
        Err(ScoreError::BackendUnavailable(_))
    ));
    assert!(!c.is_healthy().await);
}

#[tokio::test]
async fn clm_backend_maps_first_token() {
    let app = Router::new().route(
        "/clm/predict",
        post(|Json(v): Json<Value>| async move {
            match v["diff"].as_str().unwrap() {
                "risky" => "1 because the lock is released early",
                "safe" => " 0",
                _ => "maybe",
            }
        }),
    );
    let url = serve(app).await;
    let cfg = ScorerConfig {
        backend: BackendConfig::Clm {
            base_url: url,
            timeout_ms: 1000,
            max_diff_bytes: 1 << 20,
        },
        threshold: 0.5,
    };
    let scorer = Scorer::from_config(&cfg, BaselineModel::untrained()).unwrap();
    let doc = parse_unified_diff("").unwrap();
    let st = structure_commit(&Commit::manual("m", ""), None, &doc, CountingRule::Words);
    let metrics = compute_diff_metrics(&doc);
    let buckets = BucketedMetrics::all_unknown();
    let input = |raw: &'static str| ScoringInput {
        structured: &st,
        buckets: &buckets,
        raw_diff: raw,
        commit_message: "m",
        metrics: &metrics,
    };
    assert_eq!(scorer.probability(&input("risky")).await, Ok(1.0));
    assert_eq!(scorer.probability(&input("safe")).await, Ok(0.0));
    assert!(matches!(
        scorer.probability(&input("other")).await,
        Err(ScoreError::MalformedBackendResponse(_))
    ));
}
