//! Test support: a scripted mock HTTP server for the inference client and
//! fixture-path helpers.

#![allow(dead_code)]

pub mod oracle;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[derive(Debug, Clone)]
pub struct ReceivedRequest {
    pub method: String,
    pub path: String,
    pub body: String,
    /// Zero-based arrival order.
    pub index: usize,
}

impl ReceivedRequest {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.body).expect("request body is JSON")
    }

    pub fn prompt(&self) -> String {
        self.json()["prompt"]
            .as_str()
            .unwrap_or_default()
            .to_string()
    }
}

pub struct MockResponse {
    pub status: u16,
    pub body: String,
    /// Handler-side delay before responding, for concurrency tests.
    pub delay: Option<Duration>,
}

impl MockResponse {
    pub fn json(value: serde_json::Value) -> Self {
        Self {
            status: 200,
            body: value.to_string(),
            delay: None,
        }
    }

    pub fn status(status: u16, body: &str) -> Self {
        Self {
            status,
            body: body.to_string(),
            delay: None,
        }
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }
}

type Handler = dyn Fn(&ReceivedRequest) -> MockResponse + Send + Sync;

#[derive(Default)]
pub struct MockState {
    pub requests: Mutex<Vec<ReceivedRequest>>,
    counter: AtomicUsize,
    current: AtomicUsize,
    max_concurrent: AtomicUsize,
}

impl MockState {
    pub fn request_count(&self) -> usize {
        self.counter.load(Ordering::SeqCst)
    }

    pub fn max_concurrent(&self) -> usize {
        self.max_concurrent.load(Ordering::SeqCst)
    }

    pub fn bodies(&self) -> Vec<String> {
        self.requests
            .lock()
            .unwrap()
            .iter()
            .map(|r| r.body.clone())
            .collect()
    }
}

pub struct MockServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    accept_handle: Option<JoinHandle<()>>,
    pub state: Arc<MockState>,
}

impl MockServer {
    pub fn start<H>(handler: H) -> Self
    where
        H: Fn(&ReceivedRequest) -> MockResponse + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
        let addr = listener.local_addr().expect("local addr");
        let shutdown = Arc::new(AtomicBool::new(false));
        let state = Arc::new(MockState::default());
        let handler: Arc<Handler> = Arc::new(handler);

        let accept_shutdown = Arc::clone(&shutdown);
        let accept_state = Arc::clone(&state);
        let accept_handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if accept_shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let handler = Arc::clone(&handler);
                let state = Arc::clone(&accept_state);
                std::thread::spawn(move || handle_connection(stream, &handler, &state));
            }
        });

        Self {
            addr,
            shutdown,
            accept_handle: Some(accept_handle),
            state,
        }
    }

    /// Completions endpoint that always answers `text` with finish "stop".
    pub fn completions(text: &str) -> Self {
        let text = text.to_string();
        Self::start(move |_req| completion_response(&text, "stop"))
    }

    /// Echo-mode scorer: whitespace-attached tokenization of the received
    /// prompt, each token scored by `logprob_of(token)`.
    pub fn scorer<F>(logprob_of: F) -> Self
    where
        F: Fn(&str) -> f64 + Send + Sync + 'static,
    {
        Self::start(move |req| scoring_response(&req.prompt(), &logprob_of))
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.accept_handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_connection(stream: TcpStream, handler: &Arc<Handler>, state: &Arc<MockState>) {
    let Some(request) = read_request(&stream, state) else {
        return;
    };
    let current = state.current.fetch_add(1, Ordering::SeqCst) + 1;
    state.max_concurrent.fetch_max(current, Ordering::SeqCst);
    let response = handler(&request);
    if let Some(delay) = response.delay {
        std::thread::sleep(delay);
    }
    state.current.fetch_sub(1, Ordering::SeqCst);
    write_response(stream, &response);
}

fn read_request(stream: &TcpStream, state: &Arc<MockState>) -> Option<ReceivedRequest> {
    let mut reader = BufReader::new(stream);
    let mut request_line = String::new();
    reader.read_line(&mut request_line).ok()?;
    let mut parts = request_line.split_whitespace();
    let method = parts.next()?.to_string();
    let path = parts.next()?.to_string();

    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).ok()?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body).ok()?;
    let request = ReceivedRequest {
        method,
        path,
        body: String::from_utf8_lossy(&body).into_owned(),
        index: state.counter.fetch_add(1, Ordering::SeqCst),
    };
    state.requests.lock().unwrap().push(request.clone());
    Some(request)
}

fn write_response(mut stream: TcpStream, response: &MockResponse) {
    let reason = match response.status {
        200 => "OK",
        404 => "Not Found",
        400 => "Bad Request",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Mock",
    };
    let payload = format!(
        "HTTP/1.1 {} {}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
        response.status,
        reason,
        response.body.len(),
        response.body
    );
    let _ = stream.write_all(payload.as_bytes());
    let _ = stream.flush();
}

pub fn completion_response(text: &str, finish_reason: &str) -> MockResponse {
    MockResponse::json(serde_json::json!({
        "choices": [{"text": text, "finish_reason": finish_reason}],
        "usage": {"prompt_tokens": 7, "completion_tokens": 11},
    }))
}

/// Splits text into whitespace-attached tokens whose concatenation
/// reproduces the text ("a b" -> ["a", " b"]).
pub fn split_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split(' ') {
        if tokens.is_empty() {
            tokens.push(word.to_string());
        } else {
            tokens.push(format!(" {word}"));
        }
    }
    tokens
}

pub fn scoring_response<F: Fn(&str) -> f64>(prompt: &str, logprob_of: &F) -> MockResponse {
    let tokens = split_tokens(prompt);
    let logprobs: Vec<f64> = tokens.iter().map(|t| logprob_of(t)).collect();
    MockResponse::json(serde_json::json!({
        "choices": [{
            "text": prompt,
            "finish_reason": "stop",
            "logprobs": {"tokens": tokens, "token_logprobs": logprobs},
        }],
        "usage": {"prompt_tokens": 1, "completion_tokens": 0},
    }))
}

pub fn embedding_response(vector: &[f64]) -> MockResponse {
    MockResponse::json(serde_json::json!({"data": [{"embedding": vector}]}))
}
