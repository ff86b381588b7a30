//! Generation backends: a bounded-concurrency batch runner and an HTTP
//! chat-completion generator.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use dived_core::generate::{run_with_retries, AttemptError, FailureKind};
use dived_core::{
    Backend, GenFailure, GenRequest, GenResponse, Generate, RetryPolicy, TemplateId, TemplateSet,
};
use serde_json::{json, Value};

pub const API_KEY_ENV: &str = "DIVED_API_KEY";

/// Runs up to `max_in_flight` requests at once on worker threads. Results
/// come back in request order whatever order they finish in.
#[derive(Debug)]
pub struct BatchClient<G> {
    pub generator: G,
    pub templates: TemplateSet,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
}

impl<G: Generate + Sync> BatchClient<G> {
    pub fn new(generator: G, max_in_flight: usize) -> Self {
        BatchClient {
            generator,
            templates: TemplateSet::default(),
            retry: RetryPolicy::default(),
            max_in_flight: max_in_flight.max(1),
        }
    }
}

impl<G: Generate + Sync> Backend for BatchClient<G> {
    fn complete_batch(&self, requests: &[GenRequest]) -> Vec<Result<GenResponse, GenFailure>> {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<GenResponse, GenFailure>>>> =
            requests.iter().map(|_| Mutex::new(None)).collect();
        let workers = self.max_in_flight.min(requests.len());
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(request) = requests.get(i) else {
                        break;
                    };
                    let result =
                        run_with_retries(&self.generator, &self.templates, request, &self.retry, |ms| {
                            std::thread::sleep(Duration::from_millis(ms))
                        });
                    *slots[i].lock().expect("slot lock") = Some(result);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().expect("slot lock").expect("every request ran"))
            .collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("environment variable {API_KEY_ENV} is not set")]
    MissingKey,
    #[error("{path}: {source}")]
    Template { path: String, source: std::io::Error },
}

/// POSTs `{"model", "messages", "temperature", "max_tokens"}` and reads
/// `choices[0].message.content` from the reply.
#[derive(Debug, Clone)]
pub struct HttpGenerator {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: String,
}

impl HttpGenerator {
    pub fn new(endpoint: &str, model: &str, api_key: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpGenerator {
            agent,
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key: api_key.to_string(),
        }
    }

    /// Reads the credential from `DIVED_API_KEY`.
    pub fn from_env(endpoint: &str, model: &str, timeout: Duration) -> Result<Self, ClientError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or(ClientError::MissingKey)?;
        Ok(Self::new(endpoint, model, &key, timeout))
    }
}

fn is_transient_status(status: u16) -> bool {
    status == 408 || status == 429 || (500..600).contains(&status)
}

impl Generate for HttpGenerator {
    fn backend_name(&self) -> &str {
        "http"
    }

    fn generate(&self, request: &GenRequest, prompt: &str) -> Result<String, AttemptError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": request.decoding.temperature,
            "max_tokens": request.decoding.max_tokens,
        });
        let mut response = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| AttemptError::transient(FailureKind::Network(e.to_string())))?;
        let status = response.status().as_u16();
        if status != 200 {
            let kind = FailureKind::Status(status);
            return Err(if is_transient_status(status) {
                AttemptError::transient(kind)
            } else {
                AttemptError::permanent(kind)
            });
        }
        let value: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| AttemptError::permanent(FailureKind::Malformed(e.to_string())))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                AttemptError::permanent(FailureKind::Malformed("no choices[0].message.content".into()))
            })
    }
}

/// Template and in-context example overrides read from `dir`:
/// `<template_id>.txt` and `<template_id>.example.txt`, plus `instance.txt`
/// for rendering training instances. Missing files keep the defaults.
#[derive(Debug, Clone, Default)]
pub struct TemplateOverrides {
    pub templates: TemplateSet,
    pub examples: Vec<(TemplateId, String)>,
    pub instance: Option<String>,
}

fn read_optional(path: &Path) -> Result<Option<String>, ClientError> {
    match std::fs::read_to_string(path) {
        Ok(text) => Ok(Some(text)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(ClientError::Template {
            path: path.display().to_string(),
            source,
        }),
    }
}

pub fn load_templates(dir: &Path) -> Result<TemplateOverrides, ClientError> {
    let mut out = TemplateOverrides::default();
    for &id in TemplateId::ALL.iter() {
        if let Some(text) = read_optional(&dir.join(format!("{}.txt", id.as_str())))? {
            out.templates.set(id, text);
        }
        if let Some(text) = read_optional(&dir.join(format!("{}.example.txt", id.as_str())))? {
            out.examples.push((id, text.trim_end().to_string()));
        }
    }
    out.instance = read_optional(&dir.join("instance.txt"))?;
    Ok(out)
}
