//! Text-generation backend contract.
//!
//! [`Generate`] performs one attempt for one rendered prompt. [`Backend`]
//! runs a batch of requests and always answers in request order; retries
//! with exponential backoff are driven by [`run_with_retries`].
//! [`Sequential`] is the single-threaded backend, the `dived` crate adds a
//! bounded-concurrency one.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::template::{TemplateError, TemplateId, TemplateSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Decoding {
    /// 0.7 for the curation steps, 1.0 for paraphrase expansion.
    pub fn for_template(id: TemplateId) -> Self {
        let temperature = match id {
            TemplateId::DefinitionCuration | TemplateId::SampleCuration => 0.7,
            TemplateId::DefinitionExpansion => 1.0,
        };
        Decoding {
            temperature,
            max_tokens: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenRequest {
    pub template_id: TemplateId,
    pub variables: BTreeMap<String, String>,
    pub decoding: Decoding,
}

impl GenRequest {
    pub fn new(template_id: TemplateId, variables: BTreeMap<String, String>) -> Self {
        GenRequest {
            template_id,
            variables,
            decoding: Decoding::for_template(template_id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenResponse {
    pub text: String,
    pub backend: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FailureKind {
    #[error("network error: {0}")]
    Network(String),
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("prompt rendering failed: {0}")]
    Render(TemplateError),
}

/// Error of a single attempt; `transient` errors are retried.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttemptError {
    pub kind: FailureKind,
    pub transient: bool,
}

impl AttemptError {
    pub fn transient(kind: FailureKind) -> Self {
        AttemptError {
            kind,
            transient: true,
        }
    }

    pub fn permanent(kind: FailureKind) -> Self {
        AttemptError {
            kind,
            transient: false,
        }
    }
}

/// Per-request failure record; the rest of the batch is unaffected.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind} after {attempts} attempt(s){}", if *.retries_exhausted { " (retries exhausted)" } else { "" })]
pub struct GenFailure {
    pub kind: FailureKind,
    pub attempts: u32,
    pub retries_exhausted: bool,
}

pub trait Generate {
    fn backend_name(&self) -> &str;

    fn generate(&self, request: &GenRequest, prompt: &str) -> Result<String, AttemptError>;
}

pub trait Backend {
    /// One result per request, in request order.
    fn complete_batch(&self, requests: &[GenRequest]) -> Vec<Result<GenResponse, GenFailure>>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn complete_batch(&self, requests: &[GenRequest]) -> Vec<Result<GenResponse, GenFailure>> {
        (**self).complete_batch(requests)
    }
}

/// `max_retries` retries after the first attempt, so at most
/// `max_retries + 1` attempts per request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_delay_ms: u64,
    pub max_delay_ms: u64,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            initial_delay_ms: 500,
            max_delay_ms: 30_000,
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    pub fn max_attempts(&self) -> u32 {
        self.max_retries.saturating_add(1)
    }

    /// Delay before retry number `retry` (1-based).
    pub fn delay_ms(&self, retry: u32) -> u64 {
        let mut delay = self.initial_delay_ms as f64;
        for _ in 1..retry {
            delay *= self.multiplier;
            if delay >= self.max_delay_ms as f64 {
                return self.max_delay_ms;
            }
        }
        (delay as u64).min(self.max_delay_ms)
    }
}

/// Renders `request` and calls `generator` until success, a permanent
/// error, or the retry budget runs out. `sleep` receives backoff delays in
/// milliseconds.
pub fn run_with_retries<G, S>(
    generator: &G,
    templates: &TemplateSet,
    request: &GenRequest,
    policy: &RetryPolicy,
    mut sleep: S,
) -> Result<GenResponse, GenFailure>
where
    G: Generate + ?Sized,
    S: FnMut(u64),
{
    let prompt = templates
        .render(request.template_id, &request.variables)
        .map_err(|e| GenFailure {
            kind: FailureKind::Render(e),
            attempts: 0,
            retries_exhausted: false,
        })?;
    let mut attempts = 0;
    loop {
        attempts += 1;
        match generator.generate(request, &prompt) {
            Ok(text) => {
                return Ok(GenResponse {
                    text,
                    backend: generator.backend_name().into(),
                    attempts,
                })
            }
            Err(e) if e.transient && attempts < policy.max_attempts() => {
                sleep(policy.delay_ms(attempts));
            }
            Err(e) => {
                return Err(GenFailure {
                    retries_exhausted: e.transient,
                    kind: e.kind,
                    attempts,
                })
            }
        }
    }
}

/// Runs requests one after another without sleeping between retries.
#[derive(Debug, Clone)]
pub struct Sequential<G> {
    pub generator: G,
    pub templates: TemplateSet,
    pub retry: RetryPolicy,
}

impl<G: Generate> Sequential<G> {
    pub fn new(generator: G) -> Self {
        Sequential {
            generator,
            templates: TemplateSet::default(),
            retry: RetryPolicy::default(),
        }
    }
}

impl<G: Generate> Backend for Sequential<G> {
    fn complete_batch(&self, requests: &[GenRequest]) -> Vec<Result<GenResponse, GenFailure>> {
        requests
            .iter()
            .map(|r| run_with_retries(&self.generator, &self.templates, r, &self.retry, |_| {}))
            .collect()
    }
}
