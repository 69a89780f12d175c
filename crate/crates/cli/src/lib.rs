//! Command-line and HTTP front ends for the router.

pub mod config;
pub mod request;
pub mod server;

pub use config::{AppConfig, ConfigError, FileConfig, Overrides};
pub use request::{build_input, RequestError};
pub use server::{app, AppState};
