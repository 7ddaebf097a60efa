use std::net::SocketAddr;
use std::path::PathBuf;

use larf_core::llm::{LlmConfig, LlmError};

pub const ENV_LISTEN_ADDR: &str = "LARF_LISTEN_ADDR";
pub const ENV_JOB_LOG: &str = "LARF_JOB_LOG";
pub const ENV_UI_ORIGIN: &str = "LARF_UI_ORIGIN";

pub const DEFAULT_LISTEN_ADDR: &str = "127.0.0.1:8765";
pub const DEFAULT_JOB_LOG: &str = "./larf-jobs.jsonl";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen_addr: SocketAddr,
    pub job_log: PathBuf,
    /// Origin allowed to make cross-origin requests, e.g. the web UI.
    pub ui_origin: Option<String>,
    pub llm: LlmConfig,
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self, LlmError> {
        Self::from_lookup(|key| std::env::var(key).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, LlmError> {
        let listen = lookup(ENV_LISTEN_ADDR).unwrap_or_else(|| DEFAULT_LISTEN_ADDR.to_string());
        let listen_addr = listen
            .parse()
            .map_err(|_| LlmError::Config(format!("{ENV_LISTEN_ADDR} is not a socket address: {listen:?}")))?;
        Ok(Self {
            listen_addr,
            job_log: lookup(ENV_JOB_LOG).map_or_else(|| PathBuf::from(DEFAULT_JOB_LOG), PathBuf::from),
            ui_origin: lookup(ENV_UI_ORIGIN).filter(|s| !s.is_empty()),
            llm: LlmConfig::from_lookup(&lookup)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ServiceConfig::from_lookup(|_| None).unwrap();
        assert_eq!(c.listen_addr.to_string(), DEFAULT_LISTEN_ADDR);
        assert_eq!(c.job_log, PathBuf::from(DEFAULT_JOB_LOG));
        assert!(c.ui_origin.is_none());
    }

    #[test]
    fn overrides_and_errors() {
        let c = ServiceConfig::from_lookup(|k| match k {
            ENV_LISTEN_ADDR => Some("0.0.0.0:9000".into()),
            ENV_JOB_LOG => Some("/tmp/j.jsonl".into()),
            ENV_UI_ORIGIN => Some("http://localhost:5173".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(c.listen_addr.port(), 9000);
        assert_eq!(c.ui_origin.as_deref(), Some("http://localhost:5173"));
        assert!(ServiceConfig::from_lookup(|k| (k == ENV_LISTEN_ADDR).then(|| "nope".into())).is_err());
    }
}
