//! HTTP client for external pairwise metric services.
//!
//! The service contract: `POST {url}/score` with `{"pairs": [{"hypothesis",
//! "reference"}, ...]}` answers `{"scores": [...]}`, one finite score per
//! pair, in order. Pairs are sent in batches; up to `max_in_flight` batches
//! run concurrently. Transport failures (connect errors, timeouts, 5xx) are
//! retried with a short backoff; a malformed response is a protocol error and
//! is never retried.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use ureq::Agent;

use mbrn_core::MetricId;

use crate::scorer::{PairScorer, ScoreError};

#[derive(Debug, Clone)]
pub struct RemoteMetricConfig {
    pub endpoint_url: String,
    pub metric_name: String,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub timeout_ms: u64,
    pub retries: u32,
    pub bearer_token: Option<String>,
}

impl RemoteMetricConfig {
    pub fn new(endpoint_url: &str, metric_name: &str) -> Self {
        RemoteMetricConfig {
            endpoint_url: endpoint_url.to_string(),
            metric_name: metric_name.to_string(),
            batch_size: 64,
            max_in_flight: 4,
            timeout_ms: 30_000,
            retries: 1,
            bearer_token: None,
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.endpoint_url.trim().is_empty() {
            return Err("empty endpoint url".into());
        }
        if self.metric_name.trim().is_empty() {
            return Err("empty metric name".into());
        }
        if self.batch_size == 0 {
            return Err("batch_size must be at least 1".into());
        }
        if self.max_in_flight == 0 {
            return Err("max_in_flight must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct PairBody<'a> {
    hypothesis: &'a str,
    reference: &'a str,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    pairs: Vec<PairBody<'a>>,
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
}

pub struct RemoteMetric {
    config: RemoteMetricConfig,
    score_url: String,
    agent: Agent,
}

impl RemoteMetric {
    pub fn new(config: RemoteMetricConfig) -> Result<Self, ScoreError> {
        config.validate().map_err(|message| ScoreError::Protocol {
            message,
            first_pair: None,
        })?;
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .build()
            .into();
        let score_url = format!("{}/score", config.endpoint_url.trim_end_matches('/'));
        Ok(RemoteMetric {
            config,
            score_url,
            agent,
        })
    }

    pub fn config(&self) -> &RemoteMetricConfig {
        &self.config
    }

    /// One request for one batch, including the retry loop. `first_pair` is
    /// the global index of the batch's first pair, used in error reports.
    fn score_batch(
        &self,
        batch: &[(&str, &str)],
        first_pair: usize,
    ) -> Result<Vec<f32>, ScoreError> {
        let body = ScoreRequest {
            pairs: batch
                .iter()
                .map(|(h, r)| PairBody {
                    hypothesis: h,
                    reference: r,
                })
                .collect(),
        };
        let mut attempt = 0u32;
        loop {
            match self.send_once(&body) {
                Ok(scores) => {
                    if scores.len() != batch.len() {
                        return Err(ScoreError::Protocol {
                            message: format!(
                                "service returned {} scores for {} pairs",
                                scores.len(),
                                batch.len()
                            ),
                            first_pair: Some(first_pair),
                        });
                    }
                    let mut out = Vec::with_capacity(scores.len());
                    for (i, s) in scores.iter().enumerate() {
                        if !s.is_finite() {
                            return Err(ScoreError::Protocol {
                                message: format!("non-finite score {s} at pair {}", first_pair + i),
                                first_pair: Some(first_pair + i),
                            });
                        }
                        out.push(*s as f32);
                    }
                    return Ok(out);
                }
                Err(Failure::Protocol(message)) => {
                    return Err(ScoreError::Protocol {
                        message,
                        first_pair: Some(first_pair),
                    });
                }
                Err(Failure::Transport { message, retryable }) => {
                    if retryable && attempt < self.config.retries {
                        attempt += 1;
                        std::thread::sleep(Duration::from_millis(50 * u64::from(attempt)));
                        continue;
                    }
                    return Err(ScoreError::Transport {
                        message,
                        first_pair: Some(first_pair),
                    });
                }
            }
        }
    }

    fn send_once(&self, body: &ScoreRequest<'_>) -> Result<Vec<f64>, Failure> {
        let mut request = self.agent.post(&self.score_url);
        if let Some(token) = &self.config.bearer_token {
            request = request.header("authorization", &format!("Bearer {token}"));
        }
        match request.send_json(body) {
            Ok(mut response) => response
                .body_mut()
                .read_json::<ScoreResponse>()
                .map(|r| r.scores)
                .map_err(|e| Failure::Protocol(format!("bad score response: {e}"))),
            Err(e) => Err(classify(e)),
        }
    }
}

pub(crate) enum Failure {
    Transport { message: String, retryable: bool },
    Protocol(String),
}

/// Map an HTTP-level error onto the transport/protocol split. Server-side
/// failures (5xx) and connection problems are worth retrying; client errors
/// (4xx) will not improve on retry.
pub(crate) fn classify(error: ureq::Error) -> Failure {
    match error {
        ureq::Error::StatusCode(code) => Failure::Transport {
            message: format!("service answered HTTP {code}"),
            retryable: code >= 500,
        },
        ureq::Error::Json(e) => Failure::Protocol(format!("bad response body: {e}")),
        other => Failure::Transport {
            message: other.to_string(),
            retryable: true,
        },
    }
}

impl PairScorer for RemoteMetric {
    fn metric_id(&self) -> MetricId {
        MetricId::Remote(self.config.metric_name.clone())
    }

    fn score_pairs(&self, pairs: &[(&str, &str)]) -> Result<Vec<f32>, ScoreError> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let batches: Vec<&[(&str, &str)]> = pairs.chunks(self.config.batch_size).collect();
        let slots: Vec<Mutex<Option<Vec<f32>>>> =
            (0..batches.len()).map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);
        // Worst failing batch, kept as (batch_index, error) so the earliest
        // failure in pair order wins when several workers fail at once.
        let failure: Mutex<Option<(usize, ScoreError)>> = Mutex::new(None);
        let workers = self.config.max_in_flight.min(batches.len());

        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if abort.load(Ordering::Acquire) {
                        break;
                    }
                    let b = next.fetch_add(1, Ordering::Relaxed);
                    if b >= batches.len() {
                        break;
                    }
                    match self.score_batch(batches[b], b * self.config.batch_size) {
                        Ok(scores) => *slots[b].lock().unwrap() = Some(scores),
                        Err(e) => {
                            let mut guard = failure.lock().unwrap();
                            if guard.as_ref().is_none_or(|(prev, _)| b < *prev) {
                                *guard = Some((b, e));
                            }
                            abort.store(true, Ordering::Release);
                            break;
                        }
                    }
                });
            }
        });

        if let Some((_, error)) = failure.into_inner().unwrap() {
            return Err(error);
        }
        let mut out = Vec::with_capacity(pairs.len());
        for slot in slots {
            out.extend(slot.into_inner().unwrap().expect("batch left unscored"));
        }
        Ok(out)
    }

    fn prefers_sequential_pools(&self) -> bool {
        true
    }
}
