//! Upright priors from a chat-completion-style JSON-over-HTTP service.
//!
//! The request carries a fixed system prompt and a user message
//! `{"labels": [...]}`; the reply's message content must be a JSON object
//! mapping every requested label (and nothing else) to a number. Any
//! transport failure or schema violation that survives the retries falls back
//! to the keyword table.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::table::{fallback_priors, PriorSource, SemanticPriorTable};
use crate::error::{Error, Result};

pub const SYSTEM_PROMPT: &str = "You return BIM alignment priors. For each label, output: upright bias \u{2208} [0,1] \
(fraction of tilt corrected per ICP iteration). Only include labels given. No extra text. Take gravity into account, \
how likely is this to not be upright? If it is not likely we need a smaller value. JSON that matches the provided \
schema strictly.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PriorServiceConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// seconds
    pub timeout: f64,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub retries: u32,
    /// Skip the service entirely and use the keyword table.
    #[serde(default)]
    pub offline: bool,
    #[serde(default)]
    pub cache_path: Option<PathBuf>,
}

impl Default for PriorServiceConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o-mini".into(),
            timeout: 30.0,
            api_key_env: "OPENAI_API_KEY".into(),
            retries: 2,
            offline: false,
            cache_path: None,
        }
    }
}

impl PriorServiceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(Error::invalid("timeout must be positive"));
        }
        Ok(())
    }
}

/// Outcome of [`fetch_priors`]: the table plus anything worth reporting
/// (clamped values, the reason for falling back).
#[derive(Debug, Clone, PartialEq)]
pub struct PriorFetch {
    pub table: SemanticPriorTable,
    pub diagnostics: Vec<String>,
}

pub fn request_body(labels: &[String], model: &str) -> Value {
    let properties: serde_json::Map<String, Value> = labels
        .iter()
        .map(|l| (l.clone(), json!({"type": "number", "minimum": 0, "maximum": 1})))
        .collect();
    json!({
        "model": model,
        "temperature": 0,
        "messages": [
            {"role": "system", "content": SYSTEM_PROMPT},
            {"role": "user", "content": json!({"labels": labels}).to_string()},
        ],
        "response_format": {
            "type": "json_schema",
            "json_schema": {
                "name": "bim_alignment_priors",
                "strict": true,
                "schema": {
                    "type": "object",
                    "properties": properties,
                    "required": labels,
                    "additionalProperties": false,
                },
            },
        },
    })
}

#[derive(Debug)]
enum Failure {
    Transport(String),
    Schema(String),
}

/// Parses a chat-completion reply into label values, enforcing completeness.
/// Out-of-range numbers are clamped; each clamp adds a diagnostic.
pub fn parse_response(body: &str, labels: &[String]) -> Result<(BTreeMap<String, f64>, Vec<String>)> {
    let reply: Value = serde_json::from_str(body).map_err(|e| Error::parse(format!("reply is not JSON: {e}")))?;
    let content = reply
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::parse("reply lacks choices[0].message.content"))?;
    let obj: serde_json::Map<String, Value> =
        serde_json::from_str(content.trim()).map_err(|e| Error::parse(format!("content is not a JSON object: {e}")))?;

    let missing: Vec<&str> = labels.iter().filter(|l| !obj.contains_key(*l)).map(String::as_str).collect();
    if !missing.is_empty() {
        return Err(Error::parse(format!("response missing labels: {}", missing.join(", "))));
    }
    let extra: Vec<&str> = obj.keys().filter(|k| !labels.contains(k)).map(String::as_str).collect();
    if !extra.is_empty() {
        return Err(Error::parse(format!("response has unrequested labels: {}", extra.join(", "))));
    }
    let mut out = BTreeMap::new();
    let mut notes = Vec::new();
    for label in labels {
        let v = obj[label]
            .as_f64()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::parse(format!("value for '{label}' is not a number")))?;
        let c = v.clamp(0.0, 1.0);
        if c != v {
            log::warn!("prior for '{label}' was {v}, clamped to {c}");
            notes.push(format!("clamped '{label}' from {v} to {c}"));
        }
        out.insert(label.clone(), c);
    }
    Ok((out, notes))
}

fn call_service(config: &PriorServiceConfig, labels: &[String]) -> std::result::Result<(BTreeMap<String, f64>, Vec<String>), Failure> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs_f64(config.timeout)))
        .http_status_as_error(false)
        .build()
        .into();
    let mut req = agent.post(&config.endpoint).header("Content-Type", "application/json");
    if let Ok(key) = std::env::var(&config.api_key_env) {
        req = req.header("Authorization", format!("Bearer {key}"));
    }
    let mut resp = req
        .send(request_body(labels, &config.model).to_string())
        .map_err(|e| Failure::Transport(e.to_string()))?;
    let status = resp.status();
    let body = resp.body_mut().read_to_string().map_err(|e| Failure::Transport(e.to_string()))?;
    if !status.is_success() {
        return Err(Failure::Transport(format!("HTTP {status}")));
    }
    parse_response(&body, labels).map_err(|e| Failure::Schema(e.to_string()))
}

/// Resolves upright priors for `labels`, consulting the cache first.
pub fn fetch_priors(labels: &[String], config: &PriorServiceConfig) -> Result<PriorFetch> {
    if labels.is_empty() {
        return Err(Error::invalid("at least one label is required"));
    }
    config.validate()?;
    if config.offline {
        return Ok(PriorFetch { table: fallback_priors(labels), diagnostics: vec!["offline: keyword fallback".into()] });
    }
    let cache = config.cache_path.as_deref().map(PriorCache::new);
    if let Some(cache) = &cache {
        if let Some(hit) = cache.lookup(&config.model, labels)? {
            return Ok(PriorFetch { table: SemanticPriorTable::new(hit, PriorSource::Llm)?, diagnostics: vec![] });
        }
    }

    let mut diagnostics = Vec::new();
    for attempt in 0..=config.retries {
        match call_service(config, labels) {
            Ok((values, notes)) => {
                diagnostics.extend(notes);
                if let Some(cache) = &cache {
                    cache.store(&config.model, &values)?;
                }
                return Ok(PriorFetch { table: SemanticPriorTable::new(values, PriorSource::Llm)?, diagnostics });
            }
            Err(Failure::Transport(e)) => diagnostics.push(format!("attempt {}: transport error: {e}", attempt + 1)),
            Err(Failure::Schema(e)) => diagnostics.push(format!("attempt {}: schema violation: {e}", attempt + 1)),
        }
    }
    log::warn!("prior service unavailable, using keyword fallback");
    diagnostics.push("falling back to keyword priors".into());
    Ok(PriorFetch { table: fallback_priors(labels), diagnostics })
}

/// JSON file `{ model: { label: value } }`, replaced atomically on write.
#[derive(Debug, Clone)]
pub struct PriorCache {
    path: PathBuf,
}

type CacheMap = BTreeMap<String, BTreeMap<String, f64>>;

impl PriorCache {
    pub fn new(path: &Path) -> Self {
        Self { path: path.to_path_buf() }
    }

    fn load(&self) -> Result<CacheMap> {
        match std::fs::read_to_string(&self.path) {
            Ok(s) => Ok(serde_json::from_str(&s)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(CacheMap::new()),
            Err(e) => Err(e.into()),
        }
    }

    /// All requested labels, or `None` if any is absent.
    pub fn lookup(&self, model: &str, labels: &[String]) -> Result<Option<BTreeMap<String, f64>>> {
        let map = self.load()?;
        let Some(entries) = map.get(model) else { return Ok(None) };
        Ok(labels
            .iter()
            .map(|l| entries.get(l).map(|v| (l.clone(), v.clamp(0.0, 1.0))))
            .collect())
    }

    pub fn store(&self, model: &str, values: &BTreeMap<String, f64>) -> Result<()> {
        let mut map = self.load()?;
        map.entry(model.to_string()).or_default().extend(values.iter().map(|(k, v)| (k.clone(), *v)));
        let dir = self.path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(serde_json::to_string_pretty(&map)?.as_bytes())?;
        tmp.persist(&self.path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }
}
