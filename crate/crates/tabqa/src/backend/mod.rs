//! Completion backends: a live HTTP client, a recording wrapper, a replay
//! store, and in-process scripted sources for tests and fixtures.

pub mod cache;
pub mod http;
pub mod scripted;

pub use cache::{request_hash, CacheError, CacheRecord, RecordingBackend, ReplayBackend};
pub use http::{ApiStyle, HttpBackend, RetryPolicy};
pub use scripted::{FnBackend, ScriptedBackend};
