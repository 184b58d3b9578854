//! Remote reasoner client: prompt templating plus a minimal JSON-over-HTTP
//! protocol.
//!
//! One POST per prediction with body `{"prompt": <text>}`; the endpoint
//! replies `{"answer": <text>}`. Transport-level failures (connect, send,
//! receive, deadline) are retried up to `max_retries`; protocol-level
//! failures (non-2xx status, unusable reply) are not. The remote model
//! exposes no parameters, so this reasoner cannot be evolved — it exists
//! for scoring and baseline comparison.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use crate::genotype::Genotype;
use crate::reasoner::{PredictFailure, Reasoner};
use crate::task::{serialize_grid, ArcTask, Grid};

/// Default prompt wording; both placeholders are required in any override.
pub const DEFAULT_PROMPT_TEMPLATE: &str = "\
You are solving a grid transformation puzzle. Grids are written as rows of \
digits 0-9 separated by '|'.

Study the transformation in these examples:
{train_pairs}

Apply the same transformation to the input below. Reply with the output \
grid only, in the same digits-and-'|' format, and nothing else.

Input: {test_input}
Output:";

/// Connection settings and prompt template of a remote endpoint.
#[derive(Clone, Debug)]
pub struct RemoteReasonerSpec {
    pub endpoint: String,
    pub timeout: Duration,
    pub prompt_template: String,
    pub max_retries: u32,
}

impl RemoteReasonerSpec {
    /// Panics on a zero timeout; a remote call must have a deadline.
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> RemoteReasonerSpec {
        assert!(!timeout.is_zero(), "remote timeout must be positive");
        RemoteReasonerSpec {
            endpoint: endpoint.into(),
            timeout,
            prompt_template: DEFAULT_PROMPT_TEMPLATE.to_string(),
            max_retries: 0,
        }
    }

    pub fn with_max_retries(mut self, max_retries: u32) -> RemoteReasonerSpec {
        self.max_retries = max_retries;
        self
    }

    pub fn with_template(mut self, template: impl Into<String>) -> RemoteReasonerSpec {
        self.prompt_template = template.into();
        self
    }
}

/// Fill the template's `{train_pairs}` and `{test_input}` placeholders with
/// serialized grids.
pub fn render_prompt(template: &str, task: &ArcTask, input: &Grid) -> String {
    let train_pairs = task
        .train
        .iter()
        .map(|pair| {
            format!(
                "input: {}\noutput: {}",
                serialize_grid(&pair.input),
                serialize_grid(&pair.output)
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n");
    template
        .replace("{train_pairs}", &train_pairs)
        .replace("{test_input}", &serialize_grid(input))
}

/// A remote call that gave no usable answer, with how many attempts were
/// spent (1 plus the retries actually taken).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemoteError {
    pub kind: PredictFailure,
    pub attempts: u32,
}

impl std::fmt::Display for RemoteError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} after {} attempt(s)", self.kind, self.attempts)
    }
}

impl std::error::Error for RemoteError {}

fn classify_transport(error: reqwest::Error) -> PredictFailure {
    if error.is_timeout() {
        PredictFailure::Timeout
    } else {
        PredictFailure::Transport(error.without_url().to_string())
    }
}

fn retriable(kind: &PredictFailure) -> bool {
    matches!(kind, PredictFailure::Transport(_) | PredictFailure::Timeout)
}

/// Render the prompt, POST it, and return the endpoint's answer trimmed of
/// surrounding whitespace.
pub fn remote_predict(
    spec: &RemoteReasonerSpec,
    task: &ArcTask,
    input: &Grid,
) -> Result<String, RemoteError> {
    let prompt = render_prompt(&spec.prompt_template, task, input);
    let client = reqwest::blocking::Client::builder()
        .timeout(spec.timeout)
        .connect_timeout(spec.timeout)
        .build()
        .map_err(|e| RemoteError { kind: PredictFailure::Transport(e.to_string()), attempts: 0 })?;
    let body = serde_json::json!({ "prompt": prompt });

    let mut attempts = 0;
    loop {
        attempts += 1;
        let kind = match attempt(&client, &spec.endpoint, &body) {
            Ok(answer) => return Ok(answer),
            Err(kind) => kind,
        };
        if !retriable(&kind) || attempts > spec.max_retries {
            return Err(RemoteError { kind, attempts });
        }
    }
}

fn attempt(
    client: &reqwest::blocking::Client,
    endpoint: &str,
    body: &serde_json::Value,
) -> Result<String, PredictFailure> {
    let response = client
        .post(endpoint)
        .json(body)
        .send()
        .map_err(classify_transport)?;
    let status = response.status();
    if !status.is_success() {
        return Err(PredictFailure::HttpStatus(status.as_u16()));
    }
    let text = response.text().map_err(classify_transport)?;
    let reply: serde_json::Value =
        serde_json::from_str(&text).map_err(|_| PredictFailure::MissingAnswerField)?;
    match reply.get("answer").and_then(|a| a.as_str()) {
        Some(answer) => Ok(answer.trim().to_string()),
        None => Err(PredictFailure::MissingAnswerField),
    }
}

/// The remote endpoint as a [`Reasoner`]. Concurrent predictions are capped
/// by a connection limit; each call's state is otherwise isolated.
pub struct RemoteReasoner {
    spec: RemoteReasonerSpec,
    limiter: ConnectionLimiter,
}

impl RemoteReasoner {
    pub fn new(spec: RemoteReasonerSpec) -> RemoteReasoner {
        RemoteReasoner::with_connection_cap(spec, 4)
    }

    pub fn with_connection_cap(spec: RemoteReasonerSpec, cap: usize) -> RemoteReasoner {
        assert!(cap >= 1, "connection cap must be at least 1");
        RemoteReasoner { spec, limiter: ConnectionLimiter::new(cap) }
    }

    pub fn spec(&self) -> &RemoteReasonerSpec {
        &self.spec
    }
}

impl Reasoner for RemoteReasoner {
    fn predict(
        &self,
        _genotype: &Genotype,
        task: &ArcTask,
        input: &Grid,
    ) -> Result<String, PredictFailure> {
        let _slot = self.limiter.acquire();
        remote_predict(&self.spec, task, input).map_err(|e| e.kind)
    }
}

/// Counting guard bounding in-flight requests.
struct ConnectionLimiter {
    cap: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

struct ConnectionSlot<'a>(&'a ConnectionLimiter);

impl ConnectionLimiter {
    fn new(cap: usize) -> ConnectionLimiter {
        ConnectionLimiter { cap, in_flight: Mutex::new(0), freed: Condvar::new() }
    }

    fn acquire(&self) -> ConnectionSlot<'_> {
        let mut count = self.in_flight.lock().unwrap();
        while *count >= self.cap {
            count = self.freed.wait(count).unwrap();
        }
        *count += 1;
        ConnectionSlot(self)
    }
}

impl Drop for ConnectionSlot<'_> {
    fn drop(&mut self) {
        let mut count = self.0.in_flight.lock().unwrap();
        *count -= 1;
        self.0.freed.notify_one();
    }
}
