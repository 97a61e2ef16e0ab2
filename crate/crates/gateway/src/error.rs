use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Serialize, Deserialize)]
pub enum GatewayError {
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("rate limited after {retries} retries")]
    RateLimited { retries: u32 },
    #[error("server error {status} after {retries} retries")]
    ServerError { status: u16, retries: u32 },
    #[error("request failed with status {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
    #[error("cache entry {path:?} is corrupt: {reason}")]
    CacheCorrupt { path: PathBuf, reason: String },
    #[error("no cached response for request {0}")]
    CacheMiss(String),
    #[error("cache i/o: {0}")]
    CacheIo(String),
    #[error("{0}")]
    Provider(String),
}
