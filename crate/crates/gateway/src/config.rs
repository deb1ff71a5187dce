use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::str::FromStr;

use drs_core::diff::{CountingRule, DEFAULT_BUDGET};
use drs_core::predict::DEFAULT_MAX_DIFF_BYTES;
use drs_core::scoring::{BackendConfig, ScorerConfig};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{name}: {reason}")]
    Invalid { name: &'static str, reason: String },
    #[error("{name} is required when {when}")]
    Missing { name: &'static str, when: &'static str },
}

pub const DEFAULT_BATCH_CAP: usize = 64;
pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;
pub const DEFAULT_GITHUB_API: &str = "https://api.github.com";

/// Gateway settings, normally read from the process environment and an
/// optional env file.
#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    pub bind: SocketAddr,
    pub scorer: ScorerConfig,
    pub max_diff_bytes: usize,
    pub timeout_ms: u64,
    pub max_seq_units: usize,
    pub counting_rule: CountingRule,
    pub calibration_path: Option<PathBuf>,
    pub baseline_model_path: Option<PathBuf>,
    pub explain_enabled: bool,
    /// Causal LM service used by `/clm/*`.
    pub clm_url: Option<String>,
    pub batch_cap: usize,
    pub github_token: Option<String>,
    pub github_api_url: String,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([0, 0, 0, 0], 8080)),
            scorer: ScorerConfig::builtin(0.5),
            max_diff_bytes: DEFAULT_MAX_DIFF_BYTES,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            max_seq_units: DEFAULT_BUDGET,
            counting_rule: CountingRule::Words,
            calibration_path: None,
            baseline_model_path: None,
            explain_enabled: false,
            clm_url: None,
            batch_cap: DEFAULT_BATCH_CAP,
            github_token: None,
            github_api_url: DEFAULT_GITHUB_API.to_string(),
        }
    }
}

fn parse<T: FromStr>(vars: &HashMap<String, String>, name: &'static str) -> Result<Option<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    match vars.get(name).map(|v| v.trim()).filter(|v| !v.is_empty()) {
        None => Ok(None),
        Some(raw) => raw.parse().map(Some).map_err(|e: T::Err| ConfigError::Invalid {
            name,
            reason: format!("{raw:?}: {e}"),
        }),
    }
}

fn parse_bool(vars: &HashMap<String, String>, name: &'static str) -> Result<Option<bool>, ConfigError> {
    match vars.get(name).map(|v| v.trim().to_ascii_lowercase()) {
        None => Ok(None),
        Some(v) => match v.as_str() {
            "" => Ok(None),
            "1" | "true" | "yes" | "on" => Ok(Some(true)),
            "0" | "false" | "no" | "off" => Ok(Some(false)),
            _ => Err(ConfigError::Invalid {
                name,
                reason: format!("{v:?} is not a boolean"),
            }),
        },
    }
}

impl GatewayConfig {
    /// Read the process environment after loading `DRS_ENV_FILE` (or `.env`
    /// when present). Variables already set take precedence over the file.
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
        let mut cfg = Self::default();
        if let Some(bind) = parse(vars, "DRS_BIND")? {
            cfg.bind = bind;
        }
        if let Some(v) = parse(vars, "DRS_MAX_DIFF_BYTES")? {
            cfg.max_diff_bytes = v;
        }
        if let Some(v) = parse(vars, "DRS_TIMEOUT_MS")? {
            cfg.timeout_ms = v;
        }
        if let Some(v) = parse(vars, "DRS_MAX_SEQ_UNITS")? {
            cfg.max_seq_units = v;
        }
        if let Some(v) = parse(vars, "DRS_COUNTING_RULE")? {
            cfg.counting_rule = v;
        }
        if let Some(v) = parse(vars, "DRS_BATCH_CAP")? {
            cfg.batch_cap = v;
        }
        if let Some(v) = parse_bool(vars, "DRS_EXPLAIN_ENABLED")? {
            cfg.explain_enabled = v;
        }
        cfg.calibration_path = parse(vars, "DRS_CALIBRATION_PATH")?;
        cfg.baseline_model_path = parse(vars, "DRS_BASELINE_MODEL_PATH")?;
        cfg.github_token = parse(vars, "GITHUB_TOKEN")?;
        if cfg.github_token.is_none() {
            if let Some(path) = parse::<PathBuf>(vars, "GITHUB_TOKEN_FILE")? {
                let token = std::fs::read_to_string(&path).map_err(|e| ConfigError::Invalid {
                    name: "GITHUB_TOKEN_FILE",
                    reason: format!("{}: {e}", path.display()),
                })?;
                cfg.github_token = Some(token.trim().to_string()).filter(|t| !t.is_empty());
            }
        }
        if let Some(url) = parse::<String>(vars, "DRS_GITHUB_API_URL")? {
            cfg.github_api_url = url.trim_end_matches('/').to_string();
        }

        let threshold = parse(vars, "DRS_THRESHOLD")?.unwrap_or(0.5);
        let backend_url: Option<String> = parse(vars, "DRS_BACKEND_URL")?;
        let kind: String = parse(vars, "DRS_BACKEND_KIND")?.unwrap_or_else(|| "builtin".to_string());
        let remote = |url: Option<String>| -> Result<(String, u64, usize), ConfigError> {
            let url = url.ok_or(ConfigError::Missing {
                name: "DRS_BACKEND_URL",
                when: "DRS_BACKEND_KIND is remote or clm",
            })?;
            Ok((url, cfg.timeout_ms, cfg.max_diff_bytes))
        };
        let backend = match kind.to_ascii_lowercase().as_str() {
            "builtin" => BackendConfig::Builtin,
            "remote" => {
                let (base_url, timeout_ms, max_diff_bytes) = remote(backend_url.clone())?;
                BackendConfig::Remote {
                    base_url,
                    timeout_ms,
                    max_diff_bytes,
                }
            }
            "clm" => {
                let (base_url, timeout_ms, max_diff_bytes) = remote(backend_url.clone())?;
                BackendConfig::Clm {
                    base_url,
                    timeout_ms,
                    max_diff_bytes,
                }
            }
            other => {
                return Err(ConfigError::Invalid {
                    name: "DRS_BACKEND_KIND",
                    reason: format!("{other:?} (expected builtin, remote or clm)"),
                })
            }
        };
        cfg.scorer = ScorerConfig { backend, threshold };
        cfg.scorer.validate().map_err(|e| ConfigError::Invalid {
            name: "DRS_THRESHOLD",
            reason: e.to_string(),
        })?;

        let backend_clm_url = match &cfg.scorer.backend {
            BackendConfig::Builtin => None,
            _ => backend_url,
        };
        cfg.clm_url = parse(vars, "DRS_CLM_URL")?.or(backend_clm_url);
        if cfg.batch_cap == 0 || cfg.max_diff_bytes == 0 || cfg.timeout_ms == 0 || cfg.max_seq_units == 0 {
            return Err(ConfigError::Invalid {
                name: "DRS_BATCH_CAP",
                reason: "batch cap, size, timeout and budget limits must be positive".into(),
            });
        }
        Ok(cfg)
    }
}
