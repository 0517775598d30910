use std::net::SocketAddr;
use std::path::PathBuf;

use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub addr: SocketAddr,
    /// Directory of knowledge-base documents; each `<id>.json` is served as `<id>`.
    pub kb_dir: PathBuf,
    /// Where sessions are persisted. Sessions live in memory only when unset.
    pub data_dir: Option<PathBuf>,
    /// Origins allowed by CORS; `"*"` allows any.
    pub cors_origins: Vec<String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            kb_dir: PathBuf::from("fixtures"),
            data_dir: None,
            cors_origins: vec!["http://localhost:5173".into()],
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config file: {0}")]
    File(#[from] toml::de::Error),
    #[error("{var}: {message}")]
    Env { var: &'static str, message: String },
}

impl Config {
    /// Defaults, then the TOML document if any, then `QUARK_ADDR`,
    /// `QUARK_KB_DIR` and `QUARK_DATA_DIR` from `env`.
    pub fn resolve(file: Option<&str>, env: impl Fn(&str) -> Option<String>) -> Result<Config, ConfigError> {
        let mut config = match file {
            Some(text) => toml::from_str(text)?,
            None => Config::default(),
        };
        if let Some(addr) = env("QUARK_ADDR") {
            config.addr = addr
                .parse()
                .map_err(|e: std::net::AddrParseError| ConfigError::Env { var: "QUARK_ADDR", message: e.to_string() })?;
        }
        if let Some(dir) = env("QUARK_KB_DIR") {
            config.kb_dir = dir.into();
        }
        if let Some(dir) = env("QUARK_DATA_DIR") {
            config.data_dir = (!dir.is_empty()).then(|| dir.into());
        }
        Ok(config)
    }
}
