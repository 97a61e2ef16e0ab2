use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use crate::error::GatewayError;
use crate::request::{CompletionRequest, CompletionResponse};
use crate::Provider;

type Responder = Box<dyn Fn(&CompletionRequest) -> Result<String, GatewayError> + Send + Sync>;
type Delay = Box<dyn Fn(&CompletionRequest) -> Duration + Send + Sync>;

/// Offline provider for tests and oracle runs. Counts calls and records the
/// highest number of calls that were in progress at once.
pub struct MockProvider {
    respond: Responder,
    delay: Option<Delay>,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
}

impl std::fmt::Debug for MockProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MockProvider")
            .field("calls", &self.calls())
            .finish_non_exhaustive()
    }
}

impl MockProvider {
    pub fn from_fn(f: impl Fn(&CompletionRequest) -> Result<String, GatewayError> + Send + Sync + 'static) -> Self {
        Self {
            respond: Box::new(f),
            delay: None,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
        }
    }

    /// Returns the prompt unchanged.
    pub fn echo() -> Self {
        Self::from_fn(|r| Ok(r.prompt.clone()))
    }

    /// Looks the prompt up in `responses`; unknown prompts are an error.
    pub fn from_map(responses: HashMap<String, String>) -> Self {
        Self::from_fn(move |r| {
            responses
                .get(&r.prompt)
                .cloned()
                .ok_or_else(|| GatewayError::Provider("mock has no response for this prompt".into()))
        })
    }

    pub fn with_delay(mut self, delay: impl Fn(&CompletionRequest) -> Duration + Send + Sync + 'static) -> Self {
        self.delay = Some(Box::new(delay));
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }
}

struct InFlight<'a>(&'a AtomicUsize);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

fn words(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

impl Provider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        let _guard = InFlight(&self.in_flight);
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        request.check()?;
        if let Some(delay) = &self.delay {
            std::thread::sleep(delay(request));
        }
        let text = (self.respond)(request)?;
        Ok(CompletionResponse {
            prompt_tokens: words(&request.prompt),
            completion_tokens: words(&text),
            text,
            latency_ms: 0,
            provider: "mock".into(),
            retries: 0,
        })
    }
}
