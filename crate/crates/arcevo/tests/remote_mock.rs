//! Remote-client contract tests against a local mock endpoint.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use arcevo::genotype::{Genotype, LayerPartition};
use arcevo::reasoner::PredictFailure;
use arcevo::remote::{remote_predict, RemoteReasoner, RemoteReasonerSpec};
use arcevo::score::evaluate_detailed;
use arcevo::task::{parse_task, ArcTask};
use arcevo::Reasoner;

/// What the mock does with one incoming connection.
#[derive(Clone)]
enum Reply {
    /// 200 with `{"answer": <text>}`.
    Answer(String),
    /// 200 with a verbatim JSON body.
    RawJson(String),
    /// Given status with an empty JSON body.
    Status(u16),
    /// Accept, then drop the socket without answering.
    Hangup,
    /// Sleep before answering; pairs with a short client timeout.
    Delayed(Duration, String),
}

struct MockEndpoint {
    addr: SocketAddr,
    connections: Arc<AtomicUsize>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl MockEndpoint {
    /// Serve exactly one connection per scripted reply, then stop listening.
    fn spawn(replies: Vec<Reply>) -> MockEndpoint {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let connections = Arc::new(AtomicUsize::new(0));
        let counter = Arc::clone(&connections);
        let handle = std::thread::spawn(move || {
            for reply in replies {
                let (stream, _) = match listener.accept() {
                    Ok(conn) => conn,
                    Err(_) => return,
                };
                counter.fetch_add(1, Ordering::SeqCst);
                handle_connection(stream, reply);
            }
        });
        MockEndpoint { addr, connections, handle: Some(handle) }
    }

    fn url(&self) -> String {
        format!("http://{}/predict", self.addr)
    }

    fn connections(&self) -> usize {
        self.connections.load(Ordering::SeqCst)
    }
}

impl Drop for MockEndpoint {
    fn drop(&mut self) {
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_connection(mut stream: TcpStream, reply: Reply) {
    if matches!(reply, Reply::Hangup) {
        return; // dropped without reading: transport failure on the client
    }
    let body = read_request_body(&mut stream);
    assert!(body.contains("\"prompt\""), "request body must carry a prompt: {body}");
    let (status, payload) = match reply {
        Reply::Answer(text) => (200, serde_json::json!({ "answer": text }).to_string()),
        Reply::RawJson(json) => (200, json),
        Reply::Status(code) => (code, "{}".to_string()),
        Reply::Delayed(pause, text) => {
            std::thread::sleep(pause);
            (200, serde_json::json!({ "answer": text }).to_string())
        }
        Reply::Hangup => unreachable!(),
    };
    let response = format!(
        "HTTP/1.1 {status} MOCK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{payload}",
        payload.len(),
    );
    let _ = stream.write_all(response.as_bytes());
}

fn read_request_body(stream: &mut TcpStream) -> String {
    let mut reader = BufReader::new(stream);
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap() == 0 {
            return String::new();
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some(value) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            content_length = value.trim().parse().unwrap();
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body).unwrap();
    String::from_utf8(body).unwrap()
}

fn identity_task() -> ArcTask {
    parse_task(
        r#"{"train":[{"input":[[1,2],[3,0]],"output":[[1,2],[3,0]]}],
            "test":[{"input":[[1,2],[3,0]],"output":[[1,2],[3,0]]}]}"#,
        "identity",
    )
    .unwrap()
}

fn unused_genotype() -> Genotype {
    Genotype::zeros(Arc::new(LayerPartition::single("unused", 1).unwrap()))
}

fn spec_for(endpoint: &MockEndpoint) -> RemoteReasonerSpec {
    RemoteReasonerSpec::new(endpoint.url(), Duration::from_secs(5))
}

#[test]
fn echoing_endpoint_scores_one() {
    let task = identity_task();
    // The mock replies with the serialized truth of the only test pair.
    let endpoint = MockEndpoint::spawn(vec![Reply::Answer("12|30".into())]);
    let reasoner = RemoteReasoner::new(spec_for(&endpoint));
    let eval = evaluate_detailed(&reasoner, &unused_genotype(), &task);
    assert_eq!(eval.score.value(), 1.0);
    assert_eq!(eval.failures, 0);
}

#[test]
fn answers_are_whitespace_trimmed() {
    let task = identity_task();
    let endpoint = MockEndpoint::spawn(vec![Reply::Answer("  12|30 \n".into())]);
    let answer = remote_predict(&spec_for(&endpoint), &task, &task.test[0].input).unwrap();
    assert_eq!(answer, "12|30");
}

#[test]
fn missing_answer_field_fails_without_retry() {
    let task = identity_task();
    let endpoint = MockEndpoint::spawn(vec![Reply::RawJson("{}".into())]);
    let spec = spec_for(&endpoint).with_max_retries(3);
    let err = remote_predict(&spec, &task, &task.test[0].input).unwrap_err();
    assert_eq!(err.kind, PredictFailure::MissingAnswerField);
    assert_eq!(err.attempts, 1);
    assert_eq!(endpoint.connections(), 1);
}

#[test]
fn missing_answer_field_scores_zero_with_failure_counted() {
    let task = identity_task();
    let endpoint = MockEndpoint::spawn(vec![Reply::RawJson("{}".into())]);
    let reasoner = RemoteReasoner::new(spec_for(&endpoint));
    let eval = evaluate_detailed(&reasoner, &unused_genotype(), &task);
    assert_eq!(eval.score.value(), 0.0);
    assert_eq!(eval.failures, 1);
}

#[test]
fn non_success_status_fails_without_retry() {
    let task = identity_task();
    let endpoint = MockEndpoint::spawn(vec![Reply::Status(503)]);
    let spec = spec_for(&endpoint).with_max_retries(2);
    let err = remote_predict(&spec, &task, &task.test[0].input).unwrap_err();
    assert_eq!(err.kind, PredictFailure::HttpStatus(503));
    assert_eq!(err.attempts, 1);
    assert_eq!(endpoint.connections(), 1);
}

#[test]
fn unreachable_endpoint_spends_one_plus_max_retries_attempts() {
    // Bind then drop immediately so the port refuses connections.
    let port = {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        listener.local_addr().unwrap().port()
    };
    let task = identity_task();
    let spec = RemoteReasonerSpec::new(
        format!("http://127.0.0.1:{port}/predict"),
        Duration::from_secs(2),
    )
    .with_max_retries(2);
    let err = remote_predict(&spec, &task, &task.test[0].input).unwrap_err();
    assert!(matches!(err.kind, PredictFailure::Transport(_)), "got {:?}", err.kind);
    assert_eq!(err.attempts, 3);
}

#[test]
fn transport_failures_are_retried_until_success() {
    let task = identity_task();
    let endpoint =
        MockEndpoint::spawn(vec![Reply::Hangup, Reply::Hangup, Reply::Answer("12|30".into())]);
    let spec = spec_for(&endpoint).with_max_retries(2);
    let answer = remote_predict(&spec, &task, &task.test[0].input).unwrap();
    assert_eq!(answer, "12|30");
    assert_eq!(endpoint.connections(), 3);
}

#[test]
fn slow_endpoint_times_out() {
    let task = identity_task();
    let endpoint = MockEndpoint::spawn(vec![Reply::Delayed(
        Duration::from_millis(1500),
        "12|30".into(),
    )]);
    let spec = RemoteReasonerSpec::new(endpoint.url(), Duration::from_millis(100));
    let err = remote_predict(&spec, &task, &task.test[0].input).unwrap_err();
    assert_eq!(err.kind, PredictFailure::Timeout);
    assert_eq!(err.attempts, 1);
}

#[test]
fn remote_reasoner_maps_failures_into_the_policy() {
    let task = identity_task();
    let endpoint = MockEndpoint::spawn(vec![Reply::Status(500)]);
    let reasoner = RemoteReasoner::new(spec_for(&endpoint));
    let err = reasoner.predict(&unused_genotype(), &task, &task.test[0].input).unwrap_err();
    assert_eq!(err, PredictFailure::HttpStatus(500));
}
