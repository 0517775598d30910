//! HTTP API over quark sessions.

pub mod config;
mod error;
mod routes;
mod state;

pub use config::{Config, ConfigError};
pub use error::ApiError;
pub use routes::{app, cors, router};
pub use state::{load_kb_dir, AppState, Entry};
