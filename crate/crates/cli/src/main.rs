//! `postgen` command line: generate Postman test cases for a REST API,
//! run exported collections, probe endpoints, manage the exemplar corpus,
//! and serve the HTTP API.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use postgen_core::collection::parse_collection;
use postgen_core::generator::{self, CatalogOptions, ProviderConfig};
use postgen_core::job::{GenerationJob, Mode};
use postgen_core::probe::{self, ProbeConfig};
use postgen_core::runner;

#[derive(Parser)]
#[command(name = "postgen", about = "Generate, export, and run Postman test cases for REST APIs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probe an API and generate test scripts plus a collection file
    Generate(GenerateArgs),
    /// Execute a collection's test scripts against a live endpoint
    Run(RunArgs),
    /// Probe an endpoint and print the captured response summary
    Probe(ProbeArgs),
    /// Manage the exemplar corpus used for LLM few-shot prompts
    Corpus(CorpusArgs),
    /// Start the HTTP service
    Serve(ServeArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Target API URL
    #[arg(long)]
    url: String,
    /// Number of test cases to generate (1-50)
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=50))]
    count: u32,
    /// deterministic | llm; defaults to llm when a provider is configured
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, default_value = "GET")]
    method: String,
    /// Write the collection JSON here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exemplar corpus file (JSON lines)
    #[arg(long)]
    corpus_file: Option<PathBuf>,
    /// Bound asserted by the response-time test, in ms
    #[arg(long, default_value_t = generator::DEFAULT_RESPONSE_TIME_MS)]
    response_time_ms: u64,
    /// Route the job through a running postgen service instead of in-process
    #[arg(long)]
    server: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    /// Collection JSON file to execute
    #[arg(long)]
    collection: PathBuf,
    /// Override the request URL of every item
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value_t = probe::DEFAULT_TIMEOUT_MS)]
    timeout_ms: u64,
    /// Emit the report as JSON instead of text
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    url: String,
    #[arg(long, default_value = "GET")]
    method: String,
    #[arg(long, default_value_t = probe::DEFAULT_TIMEOUT_MS)]
    timeout_ms: u64,
}

#[derive(Args)]
struct CorpusArgs {
    #[command(subcommand)]
    command: CorpusCommand,
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Validate, canonicalize, and store a script as an exemplar
    Add {
        #[arg(long, default_value = "corpus.jsonl")]
        corpus_file: PathBuf,
        #[arg(long)]
        description: String,
        /// Comma-separated tags
        #[arg(long, default_value = "")]
        tags: String,
        /// Script file; `-` reads stdin
        #[arg(long)]
        script: PathBuf,
    },
    /// List stored exemplars
    List {
        #[arg(long, default_value = "corpus.jsonl")]
        corpus_file: PathBuf,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "PORT", default_value_t = postgen_service::DEFAULT_PORT)]
    port: u16,
    #[arg(long)]
    corpus_file: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args).await,
        Command::Run(args) => cmd_run(args).await,
        Command::Probe(args) => cmd_probe(args).await,
        Command::Corpus(args) => cmd_corpus(args),
        Command::Serve(args) => cmd_serve(args).await,
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn load_corpus_arg(path: &Option<PathBuf>) -> Result<Vec<generator::ExemplarRecord>, String> {
    match path {
        Some(p) => generator::load_corpus(p).map_err(|e| e.to_string()),
        None => Ok(Vec::new()),
    }
}

fn uuid_seed_from_env() -> Option<u64> {
    std::env::var("POSTGEN_UUID_SEED").ok().and_then(|s| s.parse().ok())
}

async fn cmd_generate(args: GenerateArgs) -> Result<ExitCode, String> {
    if let Some(server) = &args.server {
        return generate_via_service(server, &args).await;
    }

    let provider = ProviderConfig::from_env();
    let mode = match args.mode.as_deref() {
        Some(s) => Mode::parse(s).ok_or_else(|| format!("unknown mode {s:?}"))?,
        None => {
            if provider.is_some() {
                Mode::Llm
            } else {
                Mode::Deterministic
            }
        }
    };

    let mut job = GenerationJob::new(args.url.clone(), args.count as usize, mode);
    job.method = args.method.to_uppercase();
    job.provider = provider;
    job.corpus = load_corpus_arg(&args.corpus_file)?;
    job.catalog = CatalogOptions { response_time_ms: args.response_time_ms };
    job.uuid_seed = uuid_seed_from_env();

    let outcome = postgen_core::job::execute(&job).await.map_err(|e| e.to_string())?;
    if let Some(out) = &args.out {
        std::fs::write(out, &outcome.collection_bytes)
            .map_err(|e| format!("cannot write {}: {e}", out.display()))?;
    }
    for diagnostic in &outcome.diagnostics {
        eprintln!("note: {diagnostic}");
    }
    print!("{}", outcome.script_text);
    Ok(ExitCode::SUCCESS)
}

async fn generate_via_service(server: &str, args: &GenerateArgs) -> Result<ExitCode, String> {
    let client = postgen_client::ApiClient::new(server);
    let resp = client
        .generate(&postgen_client::GenerateRequest {
            api_url: args.url.clone(),
            count: args.count,
            mode: args.mode.clone(),
            method: Some(args.method.to_uppercase()),
        })
        .await
        .map_err(|e| e.to_string())?;
    if let Some(out) = &args.out {
        let bytes = client.download(&resp.download_id).await.map_err(|e| e.to_string())?;
        std::fs::write(out, &bytes).map_err(|e| format!("cannot write {}: {e}", out.display()))?;
    }
    for diagnostic in &resp.diagnostics {
        eprintln!("note: {diagnostic}");
    }
    print!("{}", resp.script_text);
    Ok(ExitCode::SUCCESS)
}

async fn cmd_run(args: RunArgs) -> Result<ExitCode, String> {
    let bytes = std::fs::read(&args.collection)
        .map_err(|e| format!("cannot read {}: {e}", args.collection.display()))?;
    let (collection, warnings) = parse_collection(&bytes).map_err(|e| e.to_string())?;
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    let template = ProbeConfig { timeout_ms: args.timeout_ms, ..ProbeConfig::get("") };
    let report = runner::run_collection(&collection, args.target.as_deref(), &template).await;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report.to_json()).expect("report"));
    } else {
        print!("{}", report.render_text());
    }
    Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

async fn cmd_probe(args: ProbeArgs) -> Result<ExitCode, String> {
    let config = ProbeConfig {
        timeout_ms: args.timeout_ms,
        ..ProbeConfig::get(args.url).with_method(&args.method)
    };
    let capture = probe::probe(&config).await.map_err(|e| e.to_string())?;
    println!("{}", probe::summarize_capture(&capture, 4000));
    Ok(ExitCode::SUCCESS)
}

fn cmd_corpus(args: CorpusArgs) -> Result<ExitCode, String> {
    match args.command {
        CorpusCommand::Add { corpus_file, description, tags, script } => {
            let text = if script.as_os_str() == "-" {
                use std::io::Read;
                let mut buf = String::new();
                std::io::stdin().read_to_string(&mut buf).map_err(|e| e.to_string())?;
                buf
            } else {
                std::fs::read_to_string(&script)
                    .map_err(|e| format!("cannot read {}: {e}", script.display()))?
            };
            let tags: Vec<String> = tags
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect();
            let record = generator::ingest_exemplar(&description, &text, &tags)
                .map_err(|e| e.to_string())?;
            let mut corpus = generator::load_corpus(&corpus_file).map_err(|e| e.to_string())?;
            if corpus.iter().any(|r| r.id == record.id) {
                eprintln!("note: exemplar {} already stored", record.id);
            } else {
                println!("added exemplar {}", record.id);
                corpus.push(record);
                generator::save_corpus(&corpus_file, &corpus).map_err(|e| e.to_string())?;
            }
            Ok(ExitCode::SUCCESS)
        }
        CorpusCommand::List { corpus_file } => {
            let corpus = generator::load_corpus(&corpus_file).map_err(|e| e.to_string())?;
            for record in &corpus {
                println!("{}  {}  [{}]", record.id, record.description, record.tags.join(", "));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

async fn cmd_serve(args: ServeArgs) -> Result<ExitCode, String> {
    let corpus = load_corpus_arg(&args.corpus_file)?;
    let provider = ProviderConfig::from_env();
    let state = Arc::new(postgen_service::AppState::new(provider, corpus));
    postgen_service::serve_blocking(state, args.port)
        .await
        .map_err(|e| e.to_string())?;
    Ok(ExitCode::SUCCESS)
}
