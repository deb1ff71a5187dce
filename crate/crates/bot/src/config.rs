use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use crate::BotSettings;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{name} is required")]
    Missing { name: &'static str },
    #[error("invalid {name}: {reason}")]
    Invalid { name: &'static str, reason: String },
}

#[derive(Debug, Clone)]
pub struct BotConfig {
    pub bind: SocketAddr,
    pub webhook_secret: String,
    pub gateway_url: String,
    pub gateway_timeout_ms: u64,
    pub github_token: String,
    pub github_api_url: String,
    pub settings: BotSettings,
}

fn get<T: std::str::FromStr>(vars: &HashMap<String, String>, name: &'static str) -> Result<Option<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    match vars.get(name).map(|v| v.trim()).filter(|v| !v.is_empty()) {
        None => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|e: T::Err| ConfigError::Invalid {
            name,
            reason: e.to_string(),
        }),
    }
}

impl BotConfig {
    /// Process environment, after loading `DRS_ENV_FILE` or `.env`.
    pub fn from_env() -> Result<Self, ConfigError> {
        match std::env::var_os("DRS_ENV_FILE") {
            Some(path) => {
                dotenvy::from_path(&path).map_err(|e| ConfigError::Invalid {
                    name: "DRS_ENV_FILE",
                    reason: e.to_string(),
                })?;
            }
            None => {
                dotenvy::dotenv().ok();
            }
        }
        Self::from_map(&std::env::vars().collect())
    }

    pub fn from_map(vars: &HashMap<String, String>) -> Result<Self, ConfigError> {
        if vars.contains_key("DRS_GITHUB_APP_ID") {
            return Err(ConfigError::Invalid {
                name: "DRS_GITHUB_APP_ID",
                reason: "app installation tokens are not supported; set GITHUB_TOKEN or GITHUB_TOKEN_FILE".into(),
            });
        }
        let webhook_secret: String = get(vars, "DRS_WEBHOOK_SECRET")?.ok_or(ConfigError::Missing {
            name: "DRS_WEBHOOK_SECRET",
        })?;
        let gateway_url: String = get(vars, "DRS_GATEWAY_URL")?.ok_or(ConfigError::Missing {
            name: "DRS_GATEWAY_URL",
        })?;
        let github_token = match get::<String>(vars, "GITHUB_TOKEN")? {
            Some(t) => t,
            None => {
                let path: PathBuf =
                    get(vars, "GITHUB_TOKEN_FILE")?.ok_or(ConfigError::Missing { name: "GITHUB_TOKEN" })?;
                let token = std::fs::read_to_string(&path).map_err(|e| ConfigError::Invalid {
                    name: "GITHUB_TOKEN_FILE",
                    reason: format!("{}: {e}", path.display()),
                })?;
                let token = token.trim().to_string();
                if token.is_empty() {
                    return Err(ConfigError::Invalid {
                        name: "GITHUB_TOKEN_FILE",
                        reason: "file is empty".into(),
                    });
                }
                token
            }
        };
        let mut settings = BotSettings::default();
        if let Some(v) = get(vars, "DRS_BOT_PR_ONLY")? {
            settings.pr_only = v;
        }
        if let Some(secs) = get::<u64>(vars, "DRS_DEDUP_TTL_SECS")? {
            settings.dedup_ttl = Duration::from_secs(secs);
        }
        if let Some(cap) = get::<usize>(vars, "DRS_BATCH_CAP")? {
            if cap == 0 {
                return Err(ConfigError::Invalid {
                    name: "DRS_BATCH_CAP",
                    reason: "must be positive".into(),
                });
            }
            settings.batch_cap = cap;
        }
        Ok(Self {
            bind: get(vars, "DRS_BOT_BIND")?.unwrap_or_else(|| SocketAddr::from(([0, 0, 0, 0], 8090))),
            webhook_secret,
            gateway_url: gateway_url.trim_end_matches('/').to_string(),
            gateway_timeout_ms: get(vars, "DRS_TIMEOUT_MS")?.unwrap_or(30_000),
            github_token,
            github_api_url: get::<String>(vars, "DRS_GITHUB_API_URL")?
                .map(|u| u.trim_end_matches('/').to_string())
                .unwrap_or_else(|| "https://api.github.com".into()),
            settings,
        })
    }
}
