use std::time::Duration;

use serde::Serialize;

use super::{Extraction, Extractor, ExtractorError};
use crate::remote::{JsonClient, RemoteError};

#[derive(Serialize)]
struct ExtractRequest<'a> {
    query: &'a str,
    context: &'a str,
}

/// Client for an external extractive QA service:
/// `POST {endpoint}/v1/extract` with `{"query", "context"}`, answered with
/// `{"begin", "end", "score"}` in character offsets.
#[derive(Debug)]
pub struct RemoteExtractor {
    client: JsonClient,
}

impl RemoteExtractor {
    pub fn new(endpoint: &str, timeout: Duration, max_in_flight: usize) -> Result<Self, RemoteError> {
        Ok(Self { client: JsonClient::new(endpoint, timeout, max_in_flight)? })
    }

    pub fn probe(&self) -> Result<(), RemoteError> {
        self.client.probe()
    }
}

impl Extractor for RemoteExtractor {
    fn extract(&self, query: &str, context: &str) -> Result<Extraction, ExtractorError> {
        let body = self.client.post("/v1/extract", &ExtractRequest { query, context })?;
        let field = |k: &str| body.get(k).ok_or_else(|| RemoteError::Protocol(format!("missing `{k}`")));
        let offset = |k: &str| -> Result<usize, RemoteError> {
            field(k)?
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| RemoteError::Protocol(format!("`{k}` is not a non-negative integer")))
        };
        let begin = offset("begin")?;
        let end = offset("end")?;
        let score = field("score")?
            .as_f64()
            .ok_or_else(|| RemoteError::Protocol("`score` is not a number".into()))?;
        let len = context.chars().count();
        if begin > end || end > len {
            return Err(RemoteError::Protocol(format!(
                "span [{begin}, {end}) invalid for context of length {len}"
            ))
            .into());
        }
        Ok(Extraction { begin, end, confidence: score })
    }
}
