//! Completion providers for formulation runs: an HTTP client for
//! chat-completions APIs, a mock, a content-addressed replay cache, and a
//! bounded-parallel batch runner.

mod cache;
mod error;
mod http;
mod mock;
mod request;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub use cache::{CachedProvider, ReplayCache, ReplayOnly};
pub use error::GatewayError;
pub use http::{backoff_delay, wire_body, HttpProvider};
pub use mock::MockProvider;
pub use request::{CompletionRequest, CompletionResponse, ProviderConfig, DEFAULT_MAX_TOKENS};

/// Anything that turns a request into a completion. Implementations must be
/// callable from several threads at once.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError>;
}

impl<P: Provider + ?Sized> Provider for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        (**self).complete(request)
    }
}

impl<P: Provider + ?Sized> Provider for &P {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        (**self).complete(request)
    }
}

pub type BatchResult = (String, Result<CompletionResponse, GatewayError>);

/// Runs every `(id, request)` pair through `provider` with at most
/// `max_in_flight` calls outstanding. Results come back in input order and
/// failures are returned per item.
pub fn run_batch<P: Provider + ?Sized>(
    requests: &[(String, CompletionRequest)],
    provider: &P,
    max_in_flight: usize,
) -> Vec<BatchResult> {
    let workers = max_in_flight.max(1).min(requests.len());
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<CompletionResponse, GatewayError>>>> =
        Mutex::new((0..requests.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((_, request)) = requests.get(i) else {
                    break;
                };
                let result = provider.complete(request);
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(result);
            });
        }
    });
    let slots = slots.into_inner().unwrap_or_else(|e| e.into_inner());
    requests
        .iter()
        .zip(slots)
        .map(|((id, _), r)| {
            (
                id.clone(),
                r.unwrap_or_else(|| Err(GatewayError::Provider("worker did not finish".into()))),
            )
        })
        .collect()
}
