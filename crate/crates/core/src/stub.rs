//! Minimal in-process HTTP servers speaking the scorer and extractor wire
//! protocols, with configurable misbehaviour for tests.

use std::io;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use serde_json::{json, Value};

use crate::fullranker::tokenize;

#[derive(Debug, Clone, PartialEq)]
pub enum ScorerBehavior {
    Zeros,
    /// Score = passage length in characters.
    PassageLength,
    /// Score = number of query tokens present in the passage.
    TermOverlap,
    /// One score fewer than candidates.
    ShortByOne,
    NonNumeric,
    Delay(Duration),
    Status(u16),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExtractorBehavior {
    WholeContext,
    Fixed { begin: usize, end: usize },
    BeginAfterEnd,
    PastEnd,
    Delay(Duration),
    Status(u16),
}

#[derive(Debug, Clone)]
pub struct StubConfig {
    pub scorer: ScorerBehavior,
    pub extractor: ExtractorBehavior,
    /// Stop serving (and close the listener) after this many requests.
    pub kill_after: Option<usize>,
}

impl Default for StubConfig {
    fn default() -> Self {
        Self {
            scorer: ScorerBehavior::TermOverlap,
            extractor: ExtractorBehavior::WholeContext,
            kill_after: None,
        }
    }
}

pub struct StubServer {
    url: String,
    server: Arc<tiny_http::Server>,
    handle: Option<JoinHandle<()>>,
    requests: Arc<AtomicUsize>,
}

impl StubServer {
    pub fn start(config: StubConfig) -> io::Result<Self> {
        let server = tiny_http::Server::http("127.0.0.1:0").map_err(io::Error::other)?;
        let port = server
            .server_addr()
            .to_ip()
            .map(|a| a.port())
            .ok_or_else(|| io::Error::other("stub not bound to an IP socket"))?;
        let server = Arc::new(server);
        let requests = Arc::new(AtomicUsize::new(0));
        let handle = {
            let server = Arc::clone(&server);
            let requests = Arc::clone(&requests);
            std::thread::spawn(move || serve(&server, &config, &requests))
        };
        Ok(Self { url: format!("http://127.0.0.1:{port}"), server, handle: Some(handle), requests })
    }

    pub fn scorer(behavior: ScorerBehavior) -> io::Result<Self> {
        Self::start(StubConfig { scorer: behavior, ..Default::default() })
    }

    pub fn extractor(behavior: ExtractorBehavior) -> io::Result<Self> {
        Self::start(StubConfig { extractor: behavior, ..Default::default() })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn serve(server: &tiny_http::Server, config: &StubConfig, requests: &AtomicUsize) {
    let mut workers = Vec::new();
    for mut req in server.incoming_requests() {
        let served = requests.fetch_add(1, Ordering::SeqCst) + 1;
        let cfg = config.clone();
        workers.push(std::thread::spawn(move || {
            let mut body = String::new();
            let (status, payload) = match req.as_reader().read_to_string(&mut body) {
                Ok(_) => respond(&cfg, req.url(), &body),
                Err(_) => (400, json!({"error": "unreadable body"}).to_string()),
            };
            let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
            let resp = tiny_http::Response::from_string(payload)
                .with_status_code(status)
                .with_header(header);
            let _ = req.respond(resp);
        }));
        if config.kill_after.is_some_and(|k| served >= k) {
            break;
        }
    }
    for w in workers {
        let _ = w.join();
    }
}

fn respond(config: &StubConfig, url: &str, body: &str) -> (u16, String) {
    let Ok(req) = serde_json::from_str::<Value>(body) else {
        return (400, json!({"error": "bad json"}).to_string());
    };
    match url {
        "/v1/score" => score(&config.scorer, &req),
        "/v1/extract" => extract(&config.extractor, &req),
        _ => (404, json!({"error": "not found"}).to_string()),
    }
}

fn score(behavior: &ScorerBehavior, req: &Value) -> (u16, String) {
    let query = req["query"].as_str().unwrap_or_default();
    let texts: Vec<&str> = req["candidates"]
        .as_array()
        .map(|c| c.iter().map(|x| x["text"].as_str().unwrap_or_default()).collect())
        .unwrap_or_default();
    let q = tokenize(query);
    let scores: Vec<Value> = match behavior {
        ScorerBehavior::Zeros | ScorerBehavior::Delay(_) => {
            if let ScorerBehavior::Delay(d) = behavior {
                std::thread::sleep(*d);
            }
            texts.iter().map(|_| json!(0.0)).collect()
        }
        ScorerBehavior::PassageLength => texts.iter().map(|t| json!(t.chars().count() as f64)).collect(),
        ScorerBehavior::TermOverlap => texts
            .iter()
            .map(|t| {
                let toks = tokenize(t);
                json!(q.iter().filter(|w| toks.contains(w)).count() as f64)
            })
            .collect(),
        ScorerBehavior::ShortByOne => texts.iter().skip(1).map(|_| json!(1.0)).collect(),
        ScorerBehavior::NonNumeric => texts.iter().map(|_| json!("high")).collect(),
        ScorerBehavior::Status(code) => return (*code, json!({"error": "stub"}).to_string()),
    };
    (200, json!({ "scores": scores }).to_string())
}

fn extract(behavior: &ExtractorBehavior, req: &Value) -> (u16, String) {
    let len = req["context"].as_str().unwrap_or_default().chars().count();
    let (b, e) = match behavior {
        ExtractorBehavior::WholeContext => (0, len),
        ExtractorBehavior::Fixed { begin, end } => (*begin, *end),
        ExtractorBehavior::BeginAfterEnd => (len.max(1), 0),
        ExtractorBehavior::PastEnd => (0, len + 5),
        ExtractorBehavior::Delay(d) => {
            std::thread::sleep(*d);
            (0, len)
        }
        ExtractorBehavior::Status(code) => return (*code, json!({"error": "stub"}).to_string()),
    };
    (200, json!({"begin": b, "end": e, "score": 1.0}).to_string())
}
