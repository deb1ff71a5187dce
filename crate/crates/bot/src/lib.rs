//! Pull-request bot: receives webhooks, scores commits through the gateway
//! and keeps one summary card per pull request up to date.

mod bot;
pub mod card;
pub mod config;
pub mod event;
pub mod forge;
mod server;

pub use bot::{Action, Bot, BotSettings, CommentTarget, DeliveryCache, IgnoreReason, KeyedLocks};
pub use config::BotConfig;
pub use server::{router, serve};

use drs_gateway::hosting::HostingError;

#[derive(Debug, thiserror::Error)]
pub enum BotError {
    #[error("webhook signature does not match")]
    SignatureMismatch,
    #[error("bad webhook payload: {0}")]
    BadPayload(String),
    #[error("hosting service: {0}")]
    Hosting(#[from] HostingError),
}
