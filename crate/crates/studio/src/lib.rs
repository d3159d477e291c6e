//! HTTP gateway for the Diaolou heritage studio.

// ApiError carries both languages and the guardrail detail; handlers return it by value.
#![allow(clippy::result_large_err)]

pub mod content;
pub mod create;
pub mod error;
pub mod manifest;
pub mod ratelimit;
pub mod server;
pub mod sessions;
pub mod state;

pub use error::{ApiError, ErrorCode};
pub use manifest::{ManifestEntry, OfflineManifest};
pub use server::{build_state, router, serve, serve_state, Backends, ServeError, ServerConfig, ServiceHandle};
pub use state::{AppState, Settings, Shared};
