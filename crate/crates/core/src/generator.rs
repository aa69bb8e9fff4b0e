//! Test-script generation: a deterministic rule catalog derived from the
//! observed response, and an LLM path built on few-shot exemplars with
//! validation, repair, and deterministic fallback.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dsl::{self, Assertion, DslError, JsonPath, JsonScalar, TestScript};
use crate::probe::{summarize_capture, ResponseCapture};

/// Default bound asserted by the response-time rule, in milliseconds.
pub const DEFAULT_RESPONSE_TIME_MS: u64 = 200;
/// At most this many scalar-equality assertions are derived per capture.
pub const MAX_EQUALITY_ASSERTIONS: usize = 5;
/// Exemplars included in each prompt.
pub const EXEMPLARS_PER_PROMPT: usize = 3;
/// Hard cap on prompt length; the capture summary is truncated first.
pub const PROMPT_CHAR_CAP: usize = 16_000;
const SUMMARY_CHAR_CAP: usize = 2_000;

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("only {available} assertions derivable from this response")]
    CatalogExhausted { available: usize },
    #[error("exemplar script does not parse: {0}")]
    ExemplarInvalid(DslError),
    #[error("provider returned HTTP {0}")]
    ProviderHttpError(u16),
    #[error("provider request timed out")]
    ProviderTimeout,
    #[error("provider reply is not a chat completion: {0}")]
    ProviderMalformedReply(String),
    #[error("completion does not parse: {0}")]
    CompletionUnparseable(DslError),
    #[error("completion has {got} test blocks, expected {want}")]
    CompletionCountMismatch { got: usize, want: usize },
    #[error("corpus I/O failed: {0}")]
    CorpusIo(String),
}

// ---------------------------------------------------------------------------
// Deterministic catalog
// ---------------------------------------------------------------------------

/// Per-job knobs for the deterministic catalog.
#[derive(Debug, Clone)]
pub struct CatalogOptions {
    pub response_time_ms: u64,
}

impl Default for CatalogOptions {
    fn default() -> Self {
        CatalogOptions { response_time_ms: DEFAULT_RESPONSE_TIME_MS }
    }
}

/// Enumerate every assertion derivable from the capture, in priority order.
/// Each entry holds only claims that are true of the capture itself, so the
/// generated tests pass against the probe that produced them.
pub fn derive_catalog(capture: &ResponseCapture, opts: &CatalogOptions) -> Vec<TestScript> {
    let mut out = Vec::new();
    out.push(TestScript::new(
        format!("Response status code is {}", capture.status),
        vec![Assertion::StatusEquals(capture.status)],
    ));
    if !capture.body_bytes.is_empty() {
        out.push(TestScript::new("Response body is not empty", vec![Assertion::BodyNotEmpty]));
    }
    if capture.header("content-type").is_some() {
        out.push(TestScript::new(
            "Response headers contain content-type",
            vec![Assertion::HeaderPresent("content-type".into())],
        ));
    }
    if capture.latency_ms < opts.response_time_ms {
        out.push(TestScript::new(
            format!("Response time is less than {}ms", opts.response_time_ms),
            vec![Assertion::ResponseTimeBelow(opts.response_time_ms)],
        ));
    }
    if let Some(Value::Object(fields)) = &capture.json_body {
        let array_fields: Vec<(&String, &Vec<Value>)> = fields
            .iter()
            .filter_map(|(name, v)| match v {
                Value::Array(items) if !items.is_empty() && is_identifier(name) => {
                    Some((name, items))
                }
                _ => None,
            })
            .collect();
        for (name, _) in &array_fields {
            out.push(TestScript::new(
                format!("Response includes {name} data"),
                vec![Assertion::JsonPathIsNonEmptyArray(JsonPath::root().field(name))],
            ));
        }
        if let Some((name, items)) = array_fields.first() {
            if let Some(Value::Object(first)) = items.first() {
                let mut emitted = 0;
                for (sub, v) in first {
                    if emitted >= MAX_EQUALITY_ASSERTIONS {
                        break;
                    }
                    if !is_identifier(sub) {
                        continue;
                    }
                    let Some(lit) = scalar_of(v) else { continue };
                    out.push(TestScript::new(
                        format!("Response has correct {sub} parameter"),
                        vec![Assertion::JsonPathEquals(
                            JsonPath::root().field(name).index(0).field(sub),
                            lit,
                        )],
                    ));
                    emitted += 1;
                }
            }
        }
    }
    out
}

fn scalar_of(v: &Value) -> Option<JsonScalar> {
    match v {
        Value::Null => Some(JsonScalar::Null),
        Value::Bool(b) => Some(JsonScalar::Bool(*b)),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Some(JsonScalar::Int(i))
            } else {
                n.as_f64().filter(|x| x.is_finite()).map(JsonScalar::Float)
            }
        }
        Value::String(s) => Some(JsonScalar::Str(s.clone())),
        _ => None,
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// First `count` entries of the priority catalog.
pub fn generate_deterministic(
    capture: &ResponseCapture,
    count: usize,
    opts: &CatalogOptions,
) -> Result<Vec<TestScript>, GeneratorError> {
    let catalog = derive_catalog(capture, opts);
    if count > catalog.len() {
        return Err(GeneratorError::CatalogExhausted { available: catalog.len() });
    }
    Ok(catalog.into_iter().take(count).collect())
}

// ---------------------------------------------------------------------------
// Exemplar corpus
// ---------------------------------------------------------------------------

/// One manually collected test script kept as a few-shot example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarRecord {
    pub id: String,
    pub description: String,
    pub script_text: String,
    pub tags: Vec<String>,
}

/// Canonicalize and store a script as an exemplar. The id is a content hash,
/// so ingesting identical content twice yields the same record.
pub fn ingest_exemplar(
    description: &str,
    script_text: &str,
    tags: &[String],
) -> Result<ExemplarRecord, GeneratorError> {
    let canonical = dsl::canonicalize(script_text).map_err(GeneratorError::ExemplarInvalid)?;
    let mut hasher = Sha256::new();
    hasher.update(description.as_bytes());
    hasher.update([0]);
    hasher.update(canonical.as_bytes());
    for tag in tags {
        hasher.update([0]);
        hasher.update(tag.as_bytes());
    }
    let digest = hasher.finalize();
    let id: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    Ok(ExemplarRecord {
        id,
        description: description.to_string(),
        script_text: canonical,
        tags: tags.to_vec(),
    })
}

/// Load a JSON-lines corpus file; one record per line. A missing file is an
/// empty corpus.
pub fn load_corpus(path: &Path) -> Result<Vec<ExemplarRecord>, GeneratorError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(|e| GeneratorError::CorpusIo(e.to_string()))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: ExemplarRecord = serde_json::from_str(line)
            .map_err(|e| GeneratorError::CorpusIo(format!("line {}: {e}", i + 1)))?;
        dsl::parse_script(&record.script_text).map_err(GeneratorError::ExemplarInvalid)?;
        records.push(record);
    }
    Ok(records)
}

pub fn save_corpus(path: &Path, records: &[ExemplarRecord]) -> Result<(), GeneratorError> {
    let mut out = Vec::new();
    for record in records {
        serde_json::to_writer(&mut out, record).map_err(|e| GeneratorError::CorpusIo(e.to_string()))?;
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| GeneratorError::CorpusIo(e.to_string()))?;
    file.write_all(&out).map_err(|e| GeneratorError::CorpusIo(e.to_string()))
}

fn tokens_of(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
        .collect()
}

/// Top-k exemplars by token overlap between description+tags and the capture
/// summary; ties broken by ascending id. Deterministic.
pub fn select_exemplars<'a>(
    corpus: &'a [ExemplarRecord],
    capture_summary: &str,
    k: usize,
) -> Vec<&'a ExemplarRecord> {
    let summary_tokens: std::collections::BTreeSet<String> =
        tokens_of(capture_summary).into_iter().collect();
    let mut scored: Vec<(usize, &ExemplarRecord)> = corpus
        .iter()
        .map(|record| {
            let mut own = tokens_of(&record.description);
            for tag in &record.tags {
                own.extend(tokens_of(tag));
            }
            let own: std::collections::BTreeSet<String> = own.into_iter().collect();
            (own.intersection(&summary_tokens).count(), record)
        })
        .collect();
    scored.sort_by(|(sa, ra), (sb, rb)| sb.cmp(sa).then_with(|| ra.id.cmp(&rb.id)));
    scored.into_iter().take(k).map(|(_, r)| r).collect()
}

// ---------------------------------------------------------------------------
// Prompting
// ---------------------------------------------------------------------------

const STATEMENT_FORMS: &str = "\
- pm.response.to.have.status(<code>);
- pm.expect(pm.response.text()).not.equal('');
- pm.response.to.have.header(\"<name>\");
- pm.expect(pm.response.responseTime).to.be.below(<ms>);
- pm.expect(pm.response.json()<path>).to.be.an('array').that.is.not.empty;
- pm.expect(pm.response.json()<path>).to.equal(<literal>);";

/// Deterministic prompt: instruction header, exemplar blocks, then the
/// capture summary. Total length is capped with the summary truncated first.
pub fn build_prompt(summary: &str, count: usize, exemplars: &[&ExemplarRecord]) -> String {
    let mut head = String::new();
    head.push_str(&format!(
        "Write exactly {count} Postman test blocks for the HTTP response described below.\n\
         Reply with only pm.test blocks, no prose and no code fences.\n\
         Each block must use only these statement forms:\n{STATEMENT_FORMS}\n"
    ));
    for (i, ex) in exemplars.iter().enumerate() {
        head.push_str(&format!("\nExample {} ({}):\n{}", i + 1, ex.description, ex.script_text));
    }
    head.push_str("\nResponse to test:\n");
    let budget = PROMPT_CHAR_CAP.saturating_sub(head.chars().count());
    let mut out = head;
    out.extend(summary.chars().take(budget));
    out
}

// ---------------------------------------------------------------------------
// Provider
// ---------------------------------------------------------------------------

/// Connection settings for an OpenAI-compatible chat-completions provider.
/// The API key is held in a wrapper that redacts it from Debug output and is
/// never serialized.
#[derive(Debug, Clone)]
pub struct ProviderConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: ApiKey,
    pub temperature: f64,
    pub max_attempts: u32,
}

#[derive(Clone)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        ApiKey(key.into())
    }

    fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(<redacted>)")
    }
}

impl ProviderConfig {
    /// Read LLM_BASE_URL, LLM_MODEL, LLM_API_KEY from the environment.
    pub fn from_env() -> Option<Self> {
        let base_url = std::env::var("LLM_BASE_URL").ok()?;
        let model = std::env::var("LLM_MODEL").ok()?;
        let api_key = std::env::var("LLM_API_KEY").unwrap_or_default();
        Some(ProviderConfig {
            base_url,
            model,
            api_key: ApiKey::new(api_key),
            temperature: 0.2,
            max_attempts: 2,
        })
    }
}

/// Call the provider once and return the first choice's message content.
pub async fn complete(provider: &ProviderConfig, prompt: &str) -> Result<String, GeneratorError> {
    let endpoint = format!("{}/chat/completions", provider.base_url.trim_end_matches('/'));
    tracing::debug!(endpoint = %endpoint, model = %provider.model, "requesting completion");
    let body = serde_json::json!({
        "model": provider.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": provider.temperature,
    });
    let client = reqwest::Client::new();
    let resp = client
        .post(&endpoint)
        .bearer_auth(provider.api_key.expose())
        .json(&body)
        .send()
        .await
        .map_err(|e| {
            if e.is_timeout() {
                GeneratorError::ProviderTimeout
            } else {
                GeneratorError::ProviderHttpError(0)
            }
        })?;
    let status = resp.status();
    if !status.is_success() {
        return Err(GeneratorError::ProviderHttpError(status.as_u16()));
    }
    let reply: Value = resp
        .json()
        .await
        .map_err(|_| GeneratorError::ProviderMalformedReply("body is not JSON".into()))?;
    let content = reply
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| {
            GeneratorError::ProviderMalformedReply("no choices[0].message.content".into())
        })?;
    tracing::debug!(chars = content.len(), "completion received");
    Ok(content.to_string())
}

/// Check a completion against the grammar and the requested count. Extra
/// blocks are truncated with a diagnostic; too few or unparseable is an
/// error.
pub fn validate_completion(
    text: &str,
    count: usize,
) -> Result<(Vec<TestScript>, Vec<String>), GeneratorError> {
    let (scripts, _) = dsl::parse_script(text).map_err(GeneratorError::CompletionUnparseable)?;
    if scripts.is_empty() || scripts.len() < count {
        return Err(GeneratorError::CompletionCountMismatch { got: scripts.len(), want: count });
    }
    let mut diagnostics = Vec::new();
    let kept = if scripts.len() > count {
        diagnostics.push(format!(
            "completion had {} test blocks; truncated to {count}",
            scripts.len()
        ));
        scripts.into_iter().take(count).collect()
    } else {
        scripts
    };
    Ok((kept, diagnostics))
}

/// Full LLM generation: summarize, select exemplars, prompt, validate, and
/// repair; falls back to the deterministic catalog after `max_attempts`
/// failures. Only `CatalogExhausted` can escape.
pub async fn generate_llm(
    capture: &ResponseCapture,
    count: usize,
    provider: &ProviderConfig,
    corpus: &[ExemplarRecord],
    opts: &CatalogOptions,
) -> Result<(Vec<TestScript>, Vec<String>), GeneratorError> {
    let summary = summarize_capture(capture, SUMMARY_CHAR_CAP);
    let exemplars = select_exemplars(corpus, &summary, EXEMPLARS_PER_PROMPT);
    let base_prompt = build_prompt(&summary, count, &exemplars);

    let mut diagnostics = Vec::new();
    let mut prompt = base_prompt.clone();
    for attempt in 1..=provider.max_attempts.max(1) {
        let outcome = match complete(provider, &prompt).await {
            Ok(text) => validate_completion(&text, count),
            Err(e) => Err(e),
        };
        match outcome {
            Ok((scripts, extra)) => {
                diagnostics.extend(extra);
                return Ok((scripts, diagnostics));
            }
            Err(e) => {
                diagnostics.push(format!("attempt {attempt} failed: {e}"));
                prompt = format!(
                    "{base_prompt}\n\nYour previous answer failed validation: {e}\n\
                     Resend only the pm.test blocks."
                );
            }
        }
    }

    let scripts = generate_deterministic(capture, count, opts)?;
    diagnostics.push("provider attempts exhausted; fell back to deterministic generation".into());
    Ok((scripts, diagnostics))
}
