//! One generation job end to end: probe the target, generate scripts in the
//! requested mode, and package them as a collection. The HTTP service and
//! the CLI both run jobs through here, so identical inputs yield identical
//! script text.

use thiserror::Error;
use url::Url;

use crate::collection::{self, CollectionError, PostmanCollection, HTTP_METHODS};
use crate::dsl::{self, TestScript};
use crate::generator::{
    self, CatalogOptions, ExemplarRecord, GeneratorError, ProviderConfig,
};
use crate::probe::{self, ProbeConfig, ProbeError};

pub const MAX_COUNT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Deterministic,
    Llm,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "deterministic" => Some(Mode::Deterministic),
            "llm" => Some(Mode::Llm),
            _ => None,
        }
    }
}

/// User request plus everything needed to run it.
pub struct GenerationJob {
    pub target_url: String,
    pub method: String,
    pub count: usize,
    pub mode: Mode,
    pub provider: Option<ProviderConfig>,
    pub corpus: Vec<ExemplarRecord>,
    pub catalog: CatalogOptions,
    pub timeout_ms: u64,
    /// Pins the collection UUID when set; fresh v4 otherwise.
    pub uuid_seed: Option<u64>,
}

impl GenerationJob {
    pub fn new(target_url: impl Into<String>, count: usize, mode: Mode) -> Self {
        GenerationJob {
            target_url: target_url.into(),
            method: "GET".to_string(),
            count,
            mode,
            provider: None,
            corpus: Vec::new(),
            catalog: CatalogOptions::default(),
            timeout_ms: probe::DEFAULT_TIMEOUT_MS,
            uuid_seed: None,
        }
    }
}

pub struct JobOutcome {
    pub scripts: Vec<TestScript>,
    pub script_text: String,
    pub collection: PostmanCollection,
    pub collection_bytes: Vec<u8>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Error)]
pub enum JobError {
    #[error("invalid request: {0}")]
    Validation(String),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Collection(#[from] CollectionError),
}

fn validate(job: &GenerationJob) -> Result<Url, JobError> {
    if job.count < 1 || job.count > MAX_COUNT {
        return Err(JobError::Validation(format!(
            "count must be between 1 and {MAX_COUNT}, got {}",
            job.count
        )));
    }
    if !HTTP_METHODS.contains(&job.method.as_str()) {
        return Err(JobError::Validation(format!("unknown HTTP method {:?}", job.method)));
    }
    let url = Url::parse(&job.target_url)
        .map_err(|_| JobError::Validation(format!("{:?} is not an absolute URL", job.target_url)))?;
    if url.scheme() != "http" && url.scheme() != "https" {
        return Err(JobError::Validation(format!("unsupported scheme {:?}", url.scheme())));
    }
    if job.mode == Mode::Llm && job.provider.is_none() {
        return Err(JobError::Validation("llm mode requires a configured provider".into()));
    }
    Ok(url)
}

/// Collection name derived from the target URL: last path segment, else host.
fn collection_name(url: &Url) -> String {
    url.path_segments()
        .and_then(|mut segs| segs.next_back().filter(|s| !s.is_empty()).map(str::to_string))
        .or_else(|| url.host_str().map(str::to_string))
        .unwrap_or_else(|| "generated-tests".to_string())
}

pub async fn execute(job: &GenerationJob) -> Result<JobOutcome, JobError> {
    let url = validate(job)?;
    let config = ProbeConfig {
        timeout_ms: job.timeout_ms,
        ..ProbeConfig::get(job.target_url.clone()).with_method(&job.method)
    };
    let capture = probe::probe(&config).await?;

    let (scripts, diagnostics) = match job.mode {
        Mode::Deterministic => {
            (generator::generate_deterministic(&capture, job.count, &job.catalog)?, Vec::new())
        }
        Mode::Llm => {
            let provider = job.provider.as_ref().expect("validated");
            generator::generate_llm(&capture, job.count, provider, &job.corpus, &job.catalog)
                .await?
        }
    };

    let script_text = dsl::render_script(&scripts);
    let collection = collection::build_collection_seeded(
        &collection_name(&url),
        &job.target_url,
        &job.method,
        &scripts,
        job.uuid_seed,
    )?;
    let collection_bytes = collection::serialize_collection(&collection);
    Ok(JobOutcome { scripts, script_text, collection, collection_bytes, diagnostics })
}
