//! HTTP scoring backend against an in-process fake server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use entail_core::zeroshot::{
    classify, score_pairs, BackendError, ClassificationRequest, HttpBackend, Pair, ScoringBackend,
};
use entail_core::Error;
use serde_json::{json, Value};

#[derive(Clone, Copy)]
enum Behavior {
    /// entailment logit = numeric suffix of the premise, not_entailment = batch size
    Echo,
    DropLast,
    Status500,
    Garbage,
    Hang,
}

struct FakeServer {
    url: String,
    requests: Arc<AtomicUsize>,
}

fn read_request(stream: &mut TcpStream) -> Option<(String, Vec<u8>)> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line).ok()?;
    let mut content_length = 0;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).ok()?;
        if line == "\r\n" || line.is_empty() {
            break;
        }
        let lower = line.to_ascii_lowercase();
        if let Some(v) = lower.strip_prefix("content-length:") {
            content_length = v.trim().parse().ok()?;
        }
    }
    let mut body = vec![0; content_length];
    reader.read_exact(&mut body).ok()?;
    Some((request_line, body))
}

fn respond(stream: &mut TcpStream, status: &str, body: &str) {
    let _ = write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
}

fn spawn(behavior: Behavior) -> FakeServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let requests = Arc::new(AtomicUsize::new(0));
    let counter = requests.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let Some((line, body)) = read_request(&mut stream) else {
                continue;
            };
            counter.fetch_add(1, Ordering::SeqCst);
            if line.starts_with("GET /health") {
                respond(&mut stream, "200 OK", r#"{"status":"ok","model":"fake-nli"}"#);
                continue;
            }
            let request: Value = serde_json::from_slice(&body).unwrap();
            let pairs = request["pairs"].as_array().unwrap();
            let mut scores: Vec<Value> = pairs
                .iter()
                .map(|p| {
                    let premise = p["premise"].as_str().unwrap();
                    let idx: f64 = premise.trim_start_matches('p').parse().unwrap_or(-1.0);
                    json!({"entailment": idx, "not_entailment": pairs.len() as f64})
                })
                .collect();
            match behavior {
                Behavior::Echo => respond(&mut stream, "200 OK", &json!({ "scores": scores }).to_string()),
                Behavior::DropLast => {
                    scores.pop();
                    respond(&mut stream, "200 OK", &json!({ "scores": scores }).to_string())
                }
                Behavior::Status500 => respond(&mut stream, "500 Internal Server Error", "{\"error\":\"boom\"}"),
                Behavior::Garbage => respond(&mut stream, "200 OK", "{\"scores\": [oops"),
                Behavior::Hang => thread::sleep(Duration::from_millis(1500)),
            }
        }
    });
    FakeServer { url, requests }
}

fn pairs(n: usize) -> Vec<Pair> {
    (0..n).map(|i| Pair::new(format!("p{i}"), "h")).collect()
}

#[test]
fn batches_preserve_order() {
    let server = spawn(Behavior::Echo);
    let backend = HttpBackend::new(&server.url, 4, Duration::from_secs(5));
    let scores = backend.score(&pairs(10)).unwrap();
    assert_eq!(server.requests.load(Ordering::SeqCst), 3);
    let logits: Vec<f64> = scores.iter().map(|s| s.entailment_logit).collect();
    assert_eq!(logits, (0..10).map(|i| i as f64).collect::<Vec<_>>());
    // batch sizes 4, 4, 2
    let sizes: Vec<f64> = scores.iter().map(|s| s.not_entailment_logit).collect();
    assert_eq!(sizes, vec![4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 2.0, 2.0]);
}

#[test]
fn engine_batches_through_http() {
    let server = spawn(Behavior::Echo);
    let backend = HttpBackend::new(&server.url, 4, Duration::from_secs(5));
    let scores = score_pairs(&backend, &pairs(10)).unwrap();
    assert_eq!(scores.len(), 10);
    assert_eq!(server.requests.load(Ordering::SeqCst), 3);

    let req = ClassificationRequest::new(vec!["p1".into(), "p7".into()], vec!["a".into(), "b".into()]);
    let preds = classify(&req, &backend).unwrap();
    assert_eq!(preds.len(), 2);
    assert!(preds
        .iter()
        .all(|p| (p.class_probs.iter().sum::<f64>() - 1.0).abs() < 1e-12));
}

#[test]
fn short_response_is_a_length_mismatch() {
    let server = spawn(Behavior::DropLast);
    let backend = HttpBackend::new(&server.url, 16, Duration::from_secs(5));
    match backend.score(&pairs(10)) {
        Err(BackendError::LengthMismatch { expected, got }) => assert_eq!((expected, got), (10, 9)),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn http_error_is_not_retried() {
    let server = spawn(Behavior::Status500);
    let backend = HttpBackend::new(&server.url, 16, Duration::from_secs(5));
    match backend.score(&pairs(2)) {
        Err(BackendError::Status { status, .. }) => assert_eq!(status, 500),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(server.requests.load(Ordering::SeqCst), 1);
}

#[test]
fn malformed_body_is_reported() {
    let server = spawn(Behavior::Garbage);
    let backend = HttpBackend::new(&server.url, 16, Duration::from_secs(5));
    assert!(matches!(backend.score(&pairs(2)), Err(BackendError::Malformed(_))));
}

#[test]
fn timeout_is_retried_twice() {
    let server = spawn(Behavior::Hang);
    let backend = HttpBackend::new(&server.url, 16, Duration::from_millis(300));
    match backend.score(&pairs(1)) {
        Err(e @ BackendError::Transport { attempts: 3, .. }) => assert!(e.is_retriable()),
        other => panic!("unexpected {other:?}"),
    }
    let err = score_pairs(&backend, &pairs(1)).unwrap_err();
    assert!(matches!(err, Error::Backend(BackendError::Transport { .. })));
}

#[test]
fn health_endpoint() {
    let server = spawn(Behavior::Echo);
    let backend = HttpBackend::new(&server.url, 1, Duration::from_secs(5));
    let health = backend.health().unwrap();
    assert_eq!((health.status.as_str(), health.model.as_str()), ("ok", "fake-nli"));
}

#[test]
fn unreachable_server_is_transport_error() {
    let backend = HttpBackend::new("http://127.0.0.1:9", 1, Duration::from_secs(1));
    assert!(matches!(
        backend.score(&pairs(1)),
        Err(BackendError::Transport { attempts: 3, .. })
    ));
}
