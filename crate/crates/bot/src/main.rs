use std::process::ExitCode;
use std::sync::Arc;

use drs_bot::forge::HttpGateway;
use drs_bot::{router, serve, Bot, BotConfig};
use drs_gateway::hosting::GitHubClient;
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();

    let cfg = match BotConfig::from_env() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    let forge = match GitHubClient::new(&cfg.github_api_url, &cfg.github_token, cfg.gateway_timeout_ms) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("hosting client: {e}");
            return ExitCode::from(2);
        }
    };
    let gateway = match HttpGateway::new(&cfg.gateway_url, cfg.gateway_timeout_ms) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("gateway client: {e}");
            return ExitCode::from(2);
        }
    };
    let bot = Arc::new(Bot::new(Arc::new(forge), Arc::new(gateway), cfg.settings.clone()));
    let listener = match tokio::net::TcpListener::bind(cfg.bind).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("cannot bind {}: {e}", cfg.bind);
            return ExitCode::from(2);
        }
    };
    tracing::info!(addr = %cfg.bind, gateway = %cfg.gateway_url, "bot listening");
    let shutdown = async {
        tokio::signal::ctrl_c().await.ok();
    };
    if let Err(e) = serve(listener, router(bot, &cfg.webhook_secret), shutdown).await {
        eprintln!("server error: {e}");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
