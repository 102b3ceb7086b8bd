//! TOML config file + environment fallbacks for service endpoints.
//!
//! Precedence everywhere: command-line flag, then config file, then
//! environment variable, then built-in default.

use std::path::Path;

use serde::Deserialize;

use crate::remote::RemoteMetricConfig;
use crate::teacher::TeacherConfig;

pub const ENV_TEACHER_URL: &str = "MBRN_TEACHER_URL";
pub const ENV_METRIC_URL: &str = "MBRN_METRIC_URL";
pub const ENV_METRIC_TOKEN: &str = "MBRN_METRIC_TOKEN";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub teacher: TeacherSection,
    #[serde(default)]
    pub metric: MetricSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherSection {
    pub url: Option<String>,
    pub id: Option<String>,
    pub num_candidates: Option<usize>,
    pub epsilon: Option<f64>,
    pub max_tokens: Option<u32>,
    pub seed: Option<u64>,
    pub max_in_flight: Option<usize>,
    pub timeout_ms: Option<u64>,
    pub retries: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSection {
    pub url: Option<String>,
    pub name: Option<String>,
    pub batch_size: Option<usize>,
    pub max_in_flight: Option<usize>,
    pub timeout_ms: Option<u64>,
    pub retries: Option<u32>,
    pub token: Option<String>,
}

pub fn load(path: Option<&Path>) -> anyhow::Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let content = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    toml::from_str(&content).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

fn env_var(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.trim().is_empty())
}

/// Flags the sample command forwards; every field optional so the config
/// file and environment can fill the gaps.
#[derive(Debug, Default, Clone)]
pub struct TeacherOverrides {
    pub url: Option<String>,
    pub id: Option<String>,
    pub num_candidates: Option<usize>,
    pub epsilon: Option<f64>,
    pub max_tokens: Option<u32>,
    pub seed: Option<u64>,
    pub max_in_flight: Option<usize>,
    pub timeout_ms: Option<u64>,
    pub retries: Option<u32>,
}

pub fn resolve_teacher(
    overrides: &TeacherOverrides,
    file: &FileConfig,
) -> anyhow::Result<TeacherConfig> {
    let url = overrides
        .url
        .clone()
        .or_else(|| file.teacher.url.clone())
        .or_else(|| env_var(ENV_TEACHER_URL))
        .ok_or_else(|| {
            anyhow::anyhow!("no teacher endpoint: pass --teacher-url, set [teacher].url in the config file, or export {ENV_TEACHER_URL}")
        })?;
    let id = overrides
        .id
        .clone()
        .or_else(|| file.teacher.id.clone())
        .ok_or_else(|| anyhow::anyhow!("no teacher id: pass --teacher-id or set [teacher].id"))?;
    let max_tokens = overrides
        .max_tokens
        .or(file.teacher.max_tokens)
        .unwrap_or(128);
    let mut config = TeacherConfig::new(&url, &id, max_tokens);
    if let Some(v) = overrides.num_candidates.or(file.teacher.num_candidates) {
        config.num_candidates = v;
    }
    if let Some(v) = overrides.epsilon.or(file.teacher.epsilon) {
        config.epsilon = v;
    }
    if let Some(v) = overrides.seed.or(file.teacher.seed) {
        config.seed = Some(v);
    }
    if let Some(v) = overrides.max_in_flight.or(file.teacher.max_in_flight) {
        config.max_in_flight = v;
    }
    if let Some(v) = overrides.timeout_ms.or(file.teacher.timeout_ms) {
        config.timeout_ms = v;
    }
    if let Some(v) = overrides.retries.or(file.teacher.retries) {
        config.retries = v;
    }
    Ok(config)
}

#[derive(Debug, Default, Clone)]
pub struct MetricOverrides {
    pub url: Option<String>,
    pub name: Option<String>,
    pub batch_size: Option<usize>,
    pub max_in_flight: Option<usize>,
    pub timeout_ms: Option<u64>,
    pub retries: Option<u32>,
    pub token: Option<String>,
}

pub fn resolve_metric(
    overrides: &MetricOverrides,
    file: &FileConfig,
) -> anyhow::Result<RemoteMetricConfig> {
    let url = overrides
        .url
        .clone()
        .or_else(|| file.metric.url.clone())
        .or_else(|| env_var(ENV_METRIC_URL))
        .ok_or_else(|| {
            anyhow::anyhow!("no metric endpoint: pass --metric-url, set [metric].url in the config file, or export {ENV_METRIC_URL}")
        })?;
    let name = overrides
        .name
        .clone()
        .or_else(|| file.metric.name.clone())
        .ok_or_else(|| anyhow::anyhow!("no metric name: pass --metric-name or set [metric].name"))?;
    let mut config = RemoteMetricConfig::new(&url, &name);
    if let Some(v) = overrides.batch_size.or(file.metric.batch_size) {
        config.batch_size = v;
    }
    if let Some(v) = overrides.max_in_flight.or(file.metric.max_in_flight) {
        config.max_in_flight = v;
    }
    if let Some(v) = overrides.timeout_ms.or(file.metric.timeout_ms) {
        config.timeout_ms = v;
    }
    if let Some(v) = overrides.retries.or(file.metric.retries) {
        config.retries = v;
    }
    config.bearer_token = overrides
        .token
        .clone()
        .or_else(|| file.metric.token.clone())
        .or_else(|| env_var(ENV_METRIC_TOKEN));
    Ok(config)
}
