//! Client for the text-generation service that produces candidate pools.
//!
//! `POST {url}/generate` with `{"prompt", "num_samples", "epsilon",
//! "max_tokens", "seed"}` answers `{"samples": [{"text", "logprob"}]}`.
//! Epsilon sampling happens server-side; this client only transmits ε.
//! The deterministic mode used for the beam-style baseline sends
//! `num_samples = 1`, no ε, and `temperature = 0`.

use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use ureq::Agent;

use mbrn_core::prompt::build_prompt;
use mbrn_core::types::{Candidate, CandidateOrigin, CandidatePool, SamplingParams, SourceSegment};

use crate::formats::{self, FormatError, PoolRecord};
use crate::remote::{classify, Failure};

#[derive(Debug, Clone)]
pub struct TeacherConfig {
    pub endpoint_url: String,
    pub teacher_id: String,
    pub num_candidates: usize,
    pub epsilon: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
    pub max_in_flight: usize,
    pub timeout_ms: u64,
    pub retries: u32,
}

impl TeacherConfig {
    pub fn new(endpoint_url: &str, teacher_id: &str, max_tokens: u32) -> Self {
        TeacherConfig {
            endpoint_url: endpoint_url.to_string(),
            teacher_id: teacher_id.to_string(),
            num_candidates: 256,
            epsilon: 0.02,
            max_tokens,
            seed: None,
            max_in_flight: 4,
            timeout_ms: 60_000,
            retries: 1,
        }
    }

    fn validate(&self) -> Result<(), TeacherError> {
        let fail = |m: &str| Err(TeacherError::InvalidConfig(m.to_string()));
        if self.endpoint_url.trim().is_empty() {
            return fail("empty endpoint url");
        }
        if self.teacher_id.trim().is_empty() {
            return fail("empty teacher id");
        }
        if self.num_candidates == 0 {
            return fail("num_candidates must be at least 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return fail("epsilon must lie in (0, 1)");
        }
        if self.max_in_flight == 0 {
            return fail("max_in_flight must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TeacherError {
    #[error("invalid teacher config: {0}")]
    InvalidConfig(String),
    #[error("{source_id}: {message}")]
    Transport { source_id: String, message: String },
    #[error("{source_id}: {message}")]
    Protocol { source_id: String, message: String },
    #[error("{source_id}: service returned {received} of {requested} requested samples")]
    Shortfall {
        source_id: String,
        requested: usize,
        received: usize,
    },
    #[error("{source_id}: {message}")]
    Invalid { source_id: String, message: String },
}

impl TeacherError {
    pub fn is_transport(&self) -> bool {
        matches!(self, TeacherError::Transport { .. })
    }
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
    num_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
}

#[derive(Deserialize)]
struct SampleBody {
    text: String,
    #[serde(default)]
    logprob: Option<f64>,
}

#[derive(Deserialize)]
struct GenerateResponse {
    samples: Vec<SampleBody>,
    #[serde(default)]
    mode: Option<String>,
}

/// Deterministic single output plus the decode mode the service reported.
#[derive(Debug, Clone)]
pub struct GreedyOutput {
    pub candidate: Candidate,
    pub mode: String,
}

pub struct TeacherClient {
    config: TeacherConfig,
    generate_url: String,
    agent: Agent,
}

impl TeacherClient {
    pub fn new(config: TeacherConfig) -> Result<Self, TeacherError> {
        config.validate()?;
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .build()
            .into();
        let generate_url = format!("{}/generate", config.endpoint_url.trim_end_matches('/'));
        Ok(TeacherClient {
            config,
            generate_url,
            agent,
        })
    }

    pub fn config(&self) -> &TeacherConfig {
        &self.config
    }

    fn generate(
        &self,
        source_id: &str,
        request: &GenerateRequest<'_>,
    ) -> Result<GenerateResponse, TeacherError> {
        let mut attempt = 0u32;
        loop {
            let sent = self.agent.post(&self.generate_url).send_json(request);
            match sent {
                Ok(mut response) => {
                    return response
                        .body_mut()
                        .read_json::<GenerateResponse>()
                        .map_err(|e| TeacherError::Protocol {
                            source_id: source_id.to_string(),
                            message: format!("bad generate response: {e}"),
                        });
                }
                Err(e) => match classify(e) {
                    Failure::Protocol(message) => {
                        return Err(TeacherError::Protocol {
                            source_id: source_id.to_string(),
                            message,
                        });
                    }
                    Failure::Transport { message, retryable } => {
                        if retryable && attempt < self.config.retries {
                            attempt += 1;
                            std::thread::sleep(Duration::from_millis(50 * u64::from(attempt)));
                            continue;
                        }
                        return Err(TeacherError::Transport {
                            source_id: source_id.to_string(),
                            message,
                        });
                    }
                },
            }
        }
    }

    /// The completion is cut at the first newline and trimmed; empty results
    /// are retained (the pool keeps the service's count and order) but logged.
    fn extract_text(completion: &str) -> String {
        let first_line = completion.split(['\n', '\r']).next().unwrap_or("");
        mbrn_core::text::normalize(first_line)
    }

    pub fn sample_pool(&self, segment: &SourceSegment) -> Result<CandidatePool, TeacherError> {
        let prompt = build_prompt(segment).map_err(|e| TeacherError::Invalid {
            source_id: segment.id.clone(),
            message: e.to_string(),
        })?;
        let request = GenerateRequest {
            prompt: &prompt,
            num_samples: self.config.num_candidates,
            epsilon: Some(self.config.epsilon),
            max_tokens: self.config.max_tokens,
            seed: self.config.seed,
            temperature: None,
        };
        let response = self.generate(&segment.id, &request)?;
        if response.samples.len() < self.config.num_candidates {
            return Err(TeacherError::Shortfall {
                source_id: segment.id.clone(),
                requested: self.config.num_candidates,
                received: response.samples.len(),
            });
        }
        if response.samples.len() > self.config.num_candidates {
            return Err(TeacherError::Protocol {
                source_id: segment.id.clone(),
                message: format!(
                    "service returned {} samples for {} requested",
                    response.samples.len(),
                    self.config.num_candidates
                ),
            });
        }
        let mut empty = 0usize;
        let candidates: Vec<Candidate> = response
            .samples
            .into_iter()
            .enumerate()
            .map(|(index, sample)| {
                let text = Self::extract_text(&sample.text);
                if text.is_empty() {
                    empty += 1;
                }
                Candidate {
                    index,
                    text,
                    origin: CandidateOrigin::Sampled,
                    logprob: sample.logprob,
                }
            })
            .collect();
        if empty > 0 {
            log::warn!("{}: {empty} empty candidate(s) in sampled pool", segment.id);
        }
        CandidatePool::from_candidates(
            segment.clone(),
            candidates,
            &self.config.teacher_id,
            SamplingParams {
                epsilon: self.config.epsilon,
                seed: self.config.seed,
                max_tokens: self.config.max_tokens,
            },
        )
        .map_err(|e| TeacherError::Invalid {
            source_id: segment.id.clone(),
            message: e.to_string(),
        })
    }

    /// Sample pools for many segments with at most `max_in_flight` requests
    /// running at once. Output order matches input order; the first failure
    /// (in input order) aborts the run.
    pub fn sample_pools(
        &self,
        segments: &[SourceSegment],
    ) -> Result<Vec<CandidatePool>, TeacherError> {
        if segments.is_empty() {
            return Ok(Vec::new());
        }
        let slots: Vec<Mutex<Option<CandidatePool>>> =
            (0..segments.len()).map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);
        let failure: Mutex<Option<(usize, TeacherError)>> = Mutex::new(None);
        let workers = self.config.max_in_flight.min(segments.len());

        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if abort.load(Ordering::Acquire) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= segments.len() {
                        break;
                    }
                    match self.sample_pool(&segments[i]) {
                        Ok(pool) => *slots[i].lock().unwrap() = Some(pool),
                        Err(e) => {
                            let mut guard = failure.lock().unwrap();
                            if guard.as_ref().is_none_or(|(prev, _)| i < *prev) {
                                *guard = Some((i, e));
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
        Ok(slots
            .into_iter()
            .map(|slot| slot.into_inner().unwrap().expect("pool left unsampled"))
            .collect())
    }

    pub fn greedy_decode(&self, segment: &SourceSegment) -> Result<GreedyOutput, TeacherError> {
        let prompt = build_prompt(segment).map_err(|e| TeacherError::Invalid {
            source_id: segment.id.clone(),
            message: e.to_string(),
        })?;
        let request = GenerateRequest {
            prompt: &prompt,
            num_samples: 1,
            epsilon: None,
            max_tokens: self.config.max_tokens,
            seed: self.config.seed,
            temperature: Some(0.0),
        };
        let response = self.generate(&segment.id, &request)?;
        if response.samples.len() != 1 {
            return Err(TeacherError::Protocol {
                source_id: segment.id.clone(),
                message: format!(
                    "deterministic mode returned {} samples",
                    response.samples.len()
                ),
            });
        }
        let sample = response.samples.into_iter().next().unwrap();
        let text = Self::extract_text(&sample.text);
        if text.is_empty() {
            log::warn!("{}: empty deterministic output", segment.id);
        }
        Ok(GreedyOutput {
            candidate: Candidate {
                index: 0,
                text,
                origin: CandidateOrigin::Beam,
                logprob: sample.logprob,
            },
            mode: response.mode.unwrap_or_else(|| "greedy".to_string()),
        })
    }
}

pub fn ingest_pools(path: &Path) -> Result<Vec<CandidatePool>, FormatError> {
    let pools = formats::read_jsonl_with(path, PoolRecord::into_pool)?;
    if pools.is_empty() {
        log::warn!("{}: no pools found", path.display());
    }
    Ok(pools)
}
