use std::future::Future;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use crate::event::{parse_event, verify_signature};
use crate::{Action, Bot, BotError, CommentTarget};

#[derive(Clone)]
struct AppState {
    bot: Arc<Bot>,
    secret: Arc<Vec<u8>>,
}

pub fn router(bot: Arc<Bot>, secret: &str) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/webhook", post(webhook))
        .with_state(AppState {
            bot,
            secret: Arc::new(secret.as_bytes().to_vec()),
        })
}

pub async fn serve(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

fn header<'a>(headers: &'a HeaderMap, name: &str) -> Option<&'a str> {
    headers.get(name).and_then(|v| v.to_str().ok())
}

fn error(status: StatusCode, message: String) -> Response {
    (status, Json(json!({ "error": message }))).into_response()
}

async fn webhook(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> Response {
    if verify_signature(&state.secret, &body, header(&headers, "x-hub-signature-256")).is_err() {
        tracing::warn!("rejected webhook with bad signature");
        return error(StatusCode::UNAUTHORIZED, BotError::SignatureMismatch.to_string());
    }
    let Some(kind) = header(&headers, "x-github-event") else {
        return error(StatusCode::BAD_REQUEST, "X-GitHub-Event header missing".into());
    };
    let Some(delivery) = header(&headers, "x-github-delivery") else {
        return error(StatusCode::BAD_REQUEST, "X-GitHub-Delivery header missing".into());
    };
    let event = match parse_event(kind, delivery, &body) {
        Ok(Some(ev)) => ev,
        Ok(None) => return Json(json!({ "action": "ignored", "reason": "unsupported_event" })).into_response(),
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    match state.bot.handle(&event).await {
        Ok(Action::Ignore(reason)) => {
            tracing::debug!(delivery, ?reason, "ignored webhook");
            Json(json!({ "action": "ignored", "reason": format!("{reason:?}") })).into_response()
        }
        Ok(Action::PostComment { target, .. }) => Json(match target {
            CommentTarget::PullRequest {
                pr,
                comment_id,
                updated,
            } => json!({
                "action": if updated { "updated" } else { "created" },
                "pr": pr,
                "comment_id": comment_id,
            }),
            CommentTarget::Commit { sha, comment_id } => json!({
                "action": "created",
                "sha": sha,
                "comment_id": comment_id,
            }),
        })
        .into_response(),
        Err(BotError::BadPayload(m)) => error(StatusCode::BAD_REQUEST, m),
        Err(e) => {
            tracing::error!(delivery, error = %e, "webhook handling failed");
            error(StatusCode::BAD_GATEWAY, e.to_string())
        }
    }
}
