//! Chat-completion decision-maker: prompt rendering, transport with retries,
//! and reply parsing. A mock backend stands in for the network.

use std::sync::{Arc, Condvar, Mutex, OnceLock};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{check_option, DecisionMaker};
use crate::domain::{DecisionOutput, Mask, MetaValue};
use crate::error::{DissError, ExpertError, Result};

pub const DEFAULT_OUTPUT_FORMAT: &str = "Reply using exactly these three numbered items:\n\
1. Prediction: \"Positive\" or \"Negative\", then your certainty [Low, Moderate, High]\n\
2. Confidence: the probability of your prediction being right, a number from 0 to 1\n\
3. Explanation: a brief reason for the prediction";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptStyle {
    pub name: String,
    pub preamble: String,
    #[serde(default = "default_output_format")]
    pub output_format: String,
}

fn default_output_format() -> String {
    DEFAULT_OUTPUT_FORMAT.to_owned()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmExpertConfig {
    pub endpoint_url: String,
    pub model_name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    pub prompt_styles: Vec<PromptStyle>,
    /// Optional per-feature clause templates; `{name}` and `{value}` are
    /// substituted. Empty or missing entries render as "name is value".
    #[serde(default)]
    pub feature_descriptions: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Fixed reply served instead of calling the endpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_reply: Option<String>,
}

fn default_temperature() -> f64 {
    0.7
}
fn default_timeout() -> u64 {
    60
}
fn default_retries() -> usize {
    3
}
fn default_in_flight() -> usize {
    4
}

impl LlmExpertConfig {
    pub fn validate(&self) -> Result<()> {
        if self.prompt_styles.is_empty() {
            return Err(DissError::config("llm.prompt_styles", "at least one prompt style is required"));
        }
        if self.max_in_flight == 0 {
            return Err(DissError::config("llm.max_in_flight", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Chat-completion request body as sent on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

pub trait ChatBackend: Send + Sync {
    /// Returns the first choice's message content.
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, String>;
}

pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(url: impl Into<String>, timeout: Duration, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        HttpBackend { agent, url: url.into(), api_key }
    }
}

#[derive(Deserialize)]
struct CompletionReply {
    choices: Vec<CompletionChoice>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    message: ChatMessage,
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, String> {
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(request).map_err(|e| e.to_string())?;
        let reply: CompletionReply = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        reply.choices.into_iter().next().map(|c| c.message.content).ok_or_else(|| "reply has no choices".to_owned())
    }
}

type ReplyFn = dyn Fn(&ChatRequest) -> std::result::Result<String, String> + Send + Sync;

/// Deterministic offline backend.
#[derive(Clone)]
pub struct MockBackend {
    reply: Arc<ReplyFn>,
}

impl MockBackend {
    pub fn fixed(reply: impl Into<String>) -> Self {
        let reply = reply.into();
        MockBackend { reply: Arc::new(move |_| Ok(reply.clone())) }
    }

    pub fn from_fn(f: impl Fn(&ChatRequest) -> std::result::Result<String, String> + Send + Sync + 'static) -> Self {
        MockBackend { reply: Arc::new(f) }
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, String> {
        (self.reply)(request)
    }
}

/// Formats with at most six significant digits.
pub fn format_value(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:?}");
    }
    let digits = 6 - 1 - v.abs().log10().floor() as i32;
    let rounded = if digits >= 0 {
        let s = 10f64.powi(digits);
        (v * s).round() / s
    } else {
        let s = 10f64.powi(-digits);
        (v / s).round() * s
    };
    format!("{rounded:?}")
}

/// Renders preamble, output format and the shown features as clauses.
pub fn render_prompt(style: &PromptStyle, feature_names: &[String], descriptions: &[String], x: &[f64], mask: &Mask) -> String {
    let clauses: Vec<String> = mask
        .selected()
        .map(|j| {
            let value = format_value(x[j]);
            match descriptions.get(j).filter(|t| !t.is_empty()) {
                Some(t) => t.replace("{name}", &feature_names[j]).replace("{value}", &value),
                None => format!("{} is {}", feature_names[j], value),
            }
        })
        .collect();
    let listed = match clauses.len() {
        0 => "no features available".to_owned(),
        1 => clauses[0].clone(),
        n => format!("{}, and {}", clauses[..n - 1].join(", "), clauses[n - 1]),
    };
    format!("{}\n{}\nFeatures: <{}>", style.preamble.trim_end(), style.output_format.trim_end(), listed)
}

fn prediction_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)prediction[^a-z0-9]*(positive|negative)").unwrap())
}

fn confidence_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)confidence[^0-9.]*([0-9]*\.?[0-9]+)").unwrap())
}

/// η = confidence for a Positive prediction, 1 − confidence for Negative.
pub fn parse_reply(raw: &str) -> std::result::Result<f64, ExpertError> {
    let err = |reason: &str| ExpertError::Parse { reason: reason.to_owned(), raw: raw.to_owned() };
    let positive = prediction_re()
        .captures(raw)
        .map(|c| c[1].eq_ignore_ascii_case("positive"))
        .ok_or_else(|| err("missing Prediction: Positive/Negative"))?;
    let conf: f64 = confidence_re()
        .captures(raw)
        .and_then(|c| c[1].parse().ok())
        .ok_or_else(|| err("missing Confidence: <number>"))?;
    if !(0.0..=1.0).contains(&conf) {
        return Err(err("confidence outside [0, 1]"));
    }
    Ok(if positive { conf } else { 1.0 - conf })
}

struct Gate {
    slots: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn acquire(&self) -> GateGuard<'_> {
        let mut free = self.slots.lock().unwrap();
        while *free == 0 {
            free = self.freed.wait(free).unwrap();
        }
        *free -= 1;
        GateGuard { gate: self }
    }
}

struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.gate.slots.lock().unwrap() += 1;
        self.gate.freed.notify_one();
    }
}

pub struct LlmExpert {
    cfg: LlmExpertConfig,
    feature_names: Vec<String>,
    backend: Box<dyn ChatBackend>,
    gate: Gate,
}

impl LlmExpert {
    pub fn new(cfg: LlmExpertConfig, feature_names: Vec<String>, backend: Box<dyn ChatBackend>) -> Result<Self> {
        cfg.validate()?;
        let gate = Gate { slots: Mutex::new(cfg.max_in_flight), freed: Condvar::new() };
        Ok(LlmExpert { cfg, feature_names, backend, gate })
    }

    pub fn prompt(&self, x_masked: &[f64], mask: &Mask, style: usize) -> String {
        render_prompt(&self.cfg.prompt_styles[style], &self.feature_names, &self.cfg.feature_descriptions, x_masked, mask)
    }

    pub fn request(&self, prompt: String) -> ChatRequest {
        ChatRequest {
            model: self.cfg.model_name.clone(),
            temperature: self.cfg.temperature,
            messages: vec![ChatMessage { role: "user".into(), content: prompt }],
        }
    }
}

impl DecisionMaker for LlmExpert {
    fn dim(&self) -> usize {
        self.feature_names.len()
    }

    fn n_options(&self) -> usize {
        self.cfg.prompt_styles.len()
    }

    fn decide(&self, x_masked: &[f64], mask: &Mask, option: usize) -> std::result::Result<DecisionOutput, ExpertError> {
        check_option(option, self.cfg.prompt_styles.len())?;
        let request = self.request(self.prompt(x_masked, mask, option));
        let attempts = self.cfg.max_retries + 1;
        let mut last_err = String::new();
        for _ in 0..attempts {
            let reply = {
                let _slot = self.gate.acquire();
                self.backend.complete(&request)
            };
            match reply {
                Ok(raw) => {
                    let eta = parse_reply(&raw)?;
                    return Ok(DecisionOutput::new(eta).with_meta("raw_reply", MetaValue::Text(raw)));
                }
                Err(e) => last_err = e,
            }
        }
        Err(ExpertError::Transport { attempts, message: last_err })
    }
}
