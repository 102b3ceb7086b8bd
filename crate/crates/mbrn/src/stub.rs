//! Instrumented stand-in for the generation and metric services.
//!
//! Serves the same wire contract as the real endpoints (`POST /generate`,
//! `POST /score`) over a plain `TcpListener`, one thread per connection, and
//! counts everything: requests per route, concurrent requests in flight, the
//! exact bodies received. Tests use the counters to verify batching, retry,
//! and concurrency behaviour; the `mbrn-stub` binary exposes the same server
//! for trying the CLI end to end.
//!
//! Generation is deterministic: the output depends only on the prompt and
//! the request seed. Sampled "translations" are small word-level edits of
//! the source text pulled from the prompt; the deterministic mode returns
//! the source text unchanged.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use mbrn_core::metrics::{chrf, ChrfParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    /// Character-overlap score scaled to [0, 1].
    Chrf,
    /// Parse the hypothesis as a number and return it; lets tests pick exact
    /// scores per pair.
    EchoHypothesis,
}

pub struct StubState {
    pub score_requests: AtomicUsize,
    pub generate_requests: AtomicUsize,
    in_flight: AtomicUsize,
    pub max_in_flight_seen: AtomicUsize,
    pub score_bodies: Mutex<Vec<Value>>,
    pub generate_bodies: Mutex<Vec<Value>>,
    /// Authorization header of every request, in arrival order.
    pub auth_headers: Mutex<Vec<Option<String>>>,
    /// Answer HTTP 500 to this many requests before behaving.
    pub fail_first: AtomicUsize,
    /// Hold every response this long; used to force request overlap.
    pub delay_ms: AtomicU64,
    /// Return this many samples fewer than requested.
    pub shortfall: AtomicUsize,
    /// Drop the last score from every response.
    pub truncate_scores: AtomicBool,
    /// Replace the first score of every response with NaN.
    pub non_finite_scores: AtomicBool,
    score_mode: Mutex<ScoreMode>,
}

impl StubState {
    fn new() -> Self {
        StubState {
            score_requests: AtomicUsize::new(0),
            generate_requests: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight_seen: AtomicUsize::new(0),
            score_bodies: Mutex::new(Vec::new()),
            generate_bodies: Mutex::new(Vec::new()),
            auth_headers: Mutex::new(Vec::new()),
            fail_first: AtomicUsize::new(0),
            delay_ms: AtomicU64::new(0),
            shortfall: AtomicUsize::new(0),
            truncate_scores: AtomicBool::new(false),
            non_finite_scores: AtomicBool::new(false),
            score_mode: Mutex::new(ScoreMode::Chrf),
        }
    }

    pub fn set_score_mode(&self, mode: ScoreMode) {
        *self.score_mode.lock().unwrap() = mode;
    }

    fn enter(&self) {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight_seen.fetch_max(now, Ordering::SeqCst);
    }

    fn leave(&self) {
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
    }

    fn take_failure(&self) -> bool {
        self.fail_first
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok()
    }
}

pub struct StubServer {
    addr: SocketAddr,
    state: Arc<StubState>,
    shutdown: Arc<AtomicBool>,
    accept_thread: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start() -> std::io::Result<StubServer> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let state = Arc::new(StubState::new());
        let shutdown = Arc::new(AtomicBool::new(false));
        let accept_state = Arc::clone(&state);
        let accept_shutdown = Arc::clone(&shutdown);
        let accept_thread = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if accept_shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let state = Arc::clone(&accept_state);
                std::thread::spawn(move || {
                    let _ = handle_connection(stream, &state);
                });
            }
        });
        Ok(StubServer {
            addr,
            state,
            shutdown,
            accept_thread: Some(accept_thread),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn state(&self) -> &StubState {
        &self.state
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Unblock the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.accept_thread.take() {
            let _ = handle.join();
        }
    }
}

fn handle_connection(mut stream: TcpStream, state: &StubState) -> std::io::Result<()> {
    let (path, body, auth) = read_request(&mut stream)?;
    state.auth_headers.lock().unwrap().push(auth);
    match path.as_str() {
        "/generate" => state.generate_requests.fetch_add(1, Ordering::SeqCst),
        "/score" => state.score_requests.fetch_add(1, Ordering::SeqCst),
        _ => 0,
    };
    state.enter();
    let delay = state.delay_ms.load(Ordering::SeqCst);
    if delay > 0 {
        std::thread::sleep(Duration::from_millis(delay));
    }
    let response = respond(&path, &body, state);
    state.leave();
    let (code, reason, payload) = response;
    let body_text = payload.to_string();
    let head = format!(
        "HTTP/1.1 {code} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body_text.len()
    );
    stream.write_all(head.as_bytes())?;
    stream.write_all(body_text.as_bytes())?;
    stream.flush()
}

fn read_request(stream: &mut TcpStream) -> std::io::Result<(String, Vec<u8>, Option<String>)> {
    let mut head = Vec::new();
    let mut byte = [0u8; 1];
    while !head.ends_with(b"\r\n\r\n") {
        let n = stream.read(&mut byte)?;
        if n == 0 {
            break;
        }
        head.push(byte[0]);
    }
    let head_text = String::from_utf8_lossy(&head);
    let mut lines = head_text.lines();
    let request_line = lines.next().unwrap_or("");
    let path = request_line
        .split_whitespace()
        .nth(1)
        .unwrap_or("/")
        .to_string();
    let mut content_length = 0usize;
    let mut auth = None;
    for line in lines {
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            } else if name.eq_ignore_ascii_case("authorization") {
                auth = Some(value.trim().to_string());
            }
        }
    }
    let mut body = vec![0u8; content_length];
    stream.read_exact(&mut body)?;
    Ok((path, body, auth))
}

fn respond(path: &str, body: &[u8], state: &StubState) -> (u16, &'static str, Value) {
    let parsed: Value = match serde_json::from_slice(body) {
        Ok(v) => v,
        Err(e) => return (400, "Bad Request", json!({ "error": e.to_string() })),
    };
    match path {
        "/generate" => {
            state.generate_bodies.lock().unwrap().push(parsed.clone());
            if state.take_failure() {
                return (500, "Internal Server Error", json!({ "error": "induced" }));
            }
            (200, "OK", generate(&parsed, state))
        }
        "/score" => {
            state.score_bodies.lock().unwrap().push(parsed.clone());
            if state.take_failure() {
                return (500, "Internal Server Error", json!({ "error": "induced" }));
            }
            (200, "OK", score(&parsed, state))
        }
        _ => (404, "Not Found", json!({ "error": "unknown route" })),
    }
}

fn fnv1a64(text: &str) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Source text as embedded in the prompt: between the first ": " and the
/// newline.
fn source_from_prompt(prompt: &str) -> &str {
    let after = prompt.split_once(": ").map_or(prompt, |(_, rest)| rest);
    after.split(['\n', '\r']).next().unwrap_or(after).trim()
}

fn generate(request: &Value, state: &StubState) -> Value {
    let prompt = request["prompt"].as_str().unwrap_or("");
    let num_samples = request["num_samples"].as_u64().unwrap_or(1) as usize;
    let seed = request["seed"].as_u64().unwrap_or(0);
    let epsilon = request.get("epsilon").and_then(Value::as_f64);
    let temperature = request.get("temperature").and_then(Value::as_f64);
    let pristine = source_from_prompt(prompt);

    let deterministic = temperature == Some(0.0) || epsilon.is_none();
    if deterministic {
        let samples: Vec<Value> = (0..num_samples)
            .map(|_| json!({ "text": pristine, "logprob": -0.5 }))
            .collect();
        return json!({ "samples": samples, "mode": "greedy" });
    }

    let shortfall = state.shortfall.load(Ordering::SeqCst);
    let produced = num_samples.saturating_sub(shortfall);
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(prompt) ^ seed);
    let samples: Vec<Value> = (0..produced)
        .map(|i| {
            let mut words: Vec<String> =
                pristine.split_whitespace().map(String::from).collect();
            let edits = rng.random_range(0..=2usize);
            for _ in 0..edits {
                if words.len() < 2 {
                    break;
                }
                match rng.random_range(0..3u8) {
                    0 => {
                        let a = rng.random_range(0..words.len() - 1);
                        words.swap(a, a + 1);
                    }
                    1 => {
                        let a = rng.random_range(0..words.len());
                        words.remove(a);
                    }
                    _ => {
                        let a = rng.random_range(0..words.len());
                        let w = words[a].clone();
                        words.insert(a, w);
                    }
                }
            }
            let text = words.join(" ");
            json!({ "text": text, "logprob": -(edits as f64) - (i as f64) * 1e-6 })
        })
        .collect();
    json!({ "samples": samples, "mode": "epsilon" })
}

fn score(request: &Value, state: &StubState) -> Value {
    let mode = *state.score_mode.lock().unwrap();
    let empty = Vec::new();
    let pairs = request["pairs"].as_array().unwrap_or(&empty);
    let mut scores: Vec<f64> = pairs
        .iter()
        .map(|pair| {
            let hyp = pair["hypothesis"].as_str().unwrap_or("");
            let reference = pair["reference"].as_str().unwrap_or("");
            match mode {
                ScoreMode::Chrf => chrf(hyp, reference, &ChrfParams::default()) / 100.0,
                ScoreMode::EchoHypothesis => hyp.trim().parse::<f64>().unwrap_or(0.0),
            }
        })
        .collect();
    if state.truncate_scores.load(Ordering::SeqCst) {
        scores.pop();
    }
    if state.non_finite_scores.load(Ordering::SeqCst) && !scores.is_empty() {
        scores[0] = f64::NAN;
    }
    json!({ "scores": scores })
}
