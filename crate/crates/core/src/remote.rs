//! Blocking JSON-over-HTTP client shared by the remote scorer and remote
//! extractor, with a cap on concurrent in-flight requests.

use std::net::{TcpStream, ToSocketAddrs};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RemoteError {
    #[error("request timed out")]
    Timeout,
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("transport error: {0}")]
    Transport(String),
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug)]
pub struct JsonClient {
    base: String,
    client: reqwest::blocking::Client,
    slots: Slots,
    timeout: Duration,
}

impl JsonClient {
    pub fn new(endpoint: &str, timeout: Duration, max_in_flight: usize) -> Result<Self, RemoteError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| RemoteError::Transport(e.to_string()))?;
        Ok(Self {
            base: endpoint.trim_end_matches('/').to_string(),
            client,
            slots: Slots::new(max_in_flight),
            timeout,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.base
    }

    /// POSTs `body` to `{endpoint}{path}` and returns the parsed JSON body.
    /// Anything but HTTP 200 is a transport error.
    pub fn post(&self, path: &str, body: &impl Serialize) -> Result<serde_json::Value, RemoteError> {
        let _slot = self.slots.acquire();
        let url = format!("{}{path}", self.base);
        let resp = self.client.post(&url).json(body).send().map_err(classify)?;
        let status = resp.status();
        if status != reqwest::StatusCode::OK {
            return Err(RemoteError::Transport(format!("{url} returned status {}", status.as_u16())));
        }
        let bytes = resp.bytes().map_err(classify)?;
        serde_json::from_slice(&bytes).map_err(|e| RemoteError::Protocol(format!("invalid JSON: {e}")))
    }

    /// Opens and drops a TCP connection to the endpoint's host.
    pub fn probe(&self) -> Result<(), RemoteError> {
        probe_endpoint(&self.base, self.timeout)
    }
}

fn classify(e: reqwest::Error) -> RemoteError {
    if e.is_timeout() {
        RemoteError::Timeout
    } else {
        RemoteError::Transport(e.to_string())
    }
}

/// Checks that something accepts TCP connections at the endpoint's
/// host and port.
pub fn probe_endpoint(endpoint: &str, timeout: Duration) -> Result<(), RemoteError> {
    let url = reqwest::Url::parse(endpoint).map_err(|e| RemoteError::Transport(e.to_string()))?;
    let host = url.host_str().ok_or_else(|| RemoteError::Transport("endpoint has no host".into()))?;
    let port = url
        .port_or_known_default()
        .ok_or_else(|| RemoteError::Transport("endpoint has no port".into()))?;
    let addrs = (host, port)
        .to_socket_addrs()
        .map_err(|e| RemoteError::Transport(e.to_string()))?;
    let mut last = RemoteError::Transport(format!("no address for {host}"));
    for addr in addrs {
        match TcpStream::connect_timeout(&addr, timeout) {
            Ok(_) => return Ok(()),
            Err(e) => last = RemoteError::Transport(format!("{addr}: {e}")),
        }
    }
    Err(last)
}
