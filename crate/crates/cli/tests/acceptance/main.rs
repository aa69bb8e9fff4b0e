//! Acceptance suite: one test per release criterion, each printing a single
//! PASS/FAIL line. Everything runs locally against stub servers and a mock
//! completion provider.

mod oracle;

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::panic::AssertUnwindSafe;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::{Path as AxPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use postgen_core::collection::{parse_collection, serialize_collection, SCHEMA_URL};
use postgen_core::dsl::{canonicalize, parse_script, render_script};
use postgen_core::generator::{
    derive_catalog, generate_deterministic, generate_llm, ApiKey, CatalogOptions, ProviderConfig,
};
use postgen_core::probe::{probe, ProbeConfig};
use postgen_core::runner::run_scripts;
use postgen_core::testkit::{arb_collection, arb_scripts, mars_capture};

const GOLDEN: &str = include_str!("../fixtures/mars_photos_listing.txt");
const SECRET: &str = "sk-acceptance-secret-key-42";

fn criterion(n: u32, name: &str, f: impl FnOnce()) {
    match std::panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(()) => println!("ACCEPTANCE PASS [{n}] {name}"),
        Err(cause) => {
            println!("ACCEPTANCE FAIL [{n}] {name}");
            std::panic::resume_unwind(cause);
        }
    }
}

fn rt() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap()
}

// -------------------------------------------------------------------------
// 1. golden listing
// -------------------------------------------------------------------------

#[test]
fn criterion_1_golden_listing() {
    criterion(1, "deterministic generation reproduces the golden listing byte-for-byte", || {
        let started = Instant::now();
        let scripts =
            generate_deterministic(&mars_capture(), 6, &CatalogOptions::default()).unwrap();
        let rendered = render_script(&scripts);
        assert_eq!(rendered, GOLDEN, "rendered listing deviates from the golden fixture");
        assert_eq!(rendered.split("\n\n").count(), 6);
        assert!(started.elapsed() < Duration::from_secs(1), "generation took too long");
    });
}

// -------------------------------------------------------------------------
// 2. grammar round trip + fuzz
// -------------------------------------------------------------------------

#[test]
fn criterion_2_grammar_round_trip_and_fuzz() {
    criterion(2, "grammar: 10k parse\u{2218}render identities, 10k canonicalize checks, 60s fuzz", || {
        let mut runner = TestRunner::new(PropConfig { cases: 10_000, failure_persistence: None, ..PropConfig::default() });
        runner
            .run(&arb_scripts(), |scripts| {
                let text = render_script(&scripts);
                let (parsed, _) = parse_script(&text).expect("rendered text parses");
                prop_assert_eq!(parsed, scripts);
                Ok(())
            })
            .unwrap();

        let mut runner = TestRunner::new(PropConfig { cases: 10_000, failure_persistence: None, ..PropConfig::default() });
        runner
            .run(&(arb_scripts(), any::<u8>()), |(scripts, seed)| {
                let text = perturb(&render_script(&scripts), seed);
                let (parsed, _) = parse_script(&text).expect("perturbed text parses");
                prop_assert_eq!(render_script(&parsed), canonicalize(&text).unwrap());
                Ok(())
            })
            .unwrap();

        // fuzz: arbitrary bytes and mutated golden text, 60 seconds, no panics
        let started = Instant::now();
        let mut rng = StdRng::seed_from_u64(0xF00D);
        let mut iterations: u64 = 0;
        while started.elapsed() < Duration::from_secs(60) {
            let len = rng.gen_range(0..512);
            let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let _ = parse_script(&String::from_utf8_lossy(&bytes));

            let mut mutated = GOLDEN.as_bytes().to_vec();
            for _ in 0..rng.gen_range(1..8) {
                let i = rng.gen_range(0..mutated.len());
                mutated[i] = rng.gen();
            }
            let _ = parse_script(&String::from_utf8_lossy(&mutated));
            iterations += 2;
        }
        assert!(iterations > 1000, "fuzz loop barely ran: {iterations} inputs");
    });
}

fn perturb(text: &str, seed: u8) -> String {
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        if seed % 2 == 0 && i % 3 == 0 {
            out.push('\n');
        }
        if seed % 3 == 0 {
            out.push('\t');
        }
        out.push_str(line.trim_start());
        out.push('\n');
    }
    out
}

// -------------------------------------------------------------------------
// 3. collection round trip
// -------------------------------------------------------------------------

#[test]
fn criterion_3_collection_round_trip() {
    criterion(3, "collection: 1k parse\u{2218}serialize identities, schema URL always present", || {
        let mut runner = TestRunner::new(PropConfig { cases: 1_000, failure_persistence: None, ..PropConfig::default() });
        runner
            .run(&arb_collection(), |collection| {
                let bytes = serialize_collection(&collection);
                prop_assert!(String::from_utf8_lossy(&bytes).contains(SCHEMA_URL));
                let (parsed, warnings) = parse_collection(&bytes).expect("round trip parses");
                prop_assert_eq!(parsed, collection);
                prop_assert!(warnings.is_empty());
                Ok(())
            })
            .unwrap();
    });
}

// -------------------------------------------------------------------------
// 4. runner oracle equivalence
// -------------------------------------------------------------------------

#[test]
fn criterion_4_runner_oracle_equivalence() {
    criterion(4, "runner matches the brute-force oracle on the enumerated table", || {
        let captures = oracle::enumerated_captures();
        let assertions = oracle::assertion_table();
        assert!(captures.len() >= 200);
        let mut agreements = 0usize;
        for capture in &captures {
            for assertion in &assertions {
                let got = postgen_core::runner::eval_assertion(assertion, capture).passed;
                let want = oracle::expected_outcome(assertion, capture);
                assert_eq!(got, want, "disagreement on {assertion:?}");
                agreements += 1;
            }
        }
        assert!(agreements >= captures.len() * 6);

        // strict-below boundary: latency == threshold must fail
        let mut boundary = mars_capture();
        boundary.latency_ms = 200;
        let below = postgen_core::dsl::Assertion::ResponseTimeBelow(200);
        assert!(!postgen_core::runner::eval_assertion(&below, &boundary).passed);
        assert!(!oracle::expected_outcome(&below, &boundary));
    });
}

// -------------------------------------------------------------------------
// 5. self-consistency on randomized stub responses
// -------------------------------------------------------------------------

fn random_body(rng: &mut StdRng) -> (StatusCode, bool, Vec<u8>) {
    let status = *[200u16, 201, 400, 404, 503].get(rng.gen_range(0..5)).unwrap();
    let status = StatusCode::from_u16(status).unwrap();
    match rng.gen_range(0..5) {
        0 => (status, false, Vec::new()),
        1 => (status, false, b"plain response".to_vec()),
        2 => {
            let n = rng.gen_range(1..4);
            let items: Vec<Value> = (0..n)
                .map(|i| {
                    json!({
                        "id": i,
                        "value": rng.gen_range(-100i64..100),
                        "label": format!("row{}", rng.gen_range(0..10)),
                        "flag": rng.gen::<bool>(),
                    })
                })
                .collect();
            (status, true, serde_json::to_vec(&json!({ "records": items })).unwrap())
        }
        3 => (status, true, serde_json::to_vec(&json!({ "empty": [] })).unwrap()),
        _ => {
            let body = json!({
                "photos": [{"sol": rng.gen_range(0i64..5000), "camera": "FHAZ"}],
                "total": rng.gen_range(0i64..100),
            });
            (status, true, serde_json::to_vec(&body).unwrap())
        }
    }
}

async fn start_random_stub(bodies: Arc<Vec<(StatusCode, bool, Vec<u8>)>>) -> SocketAddr {
    async fn handler(
        State(bodies): State<Arc<Vec<(StatusCode, bool, Vec<u8>)>>>,
        AxPath(i): AxPath<usize>,
    ) -> Response {
        let (status, is_json, body) = &bodies[i % bodies.len()];
        let mut resp = (*status, body.clone()).into_response();
        if *is_json {
            resp.headers_mut()
                .insert("content-type", "application/json".parse().unwrap());
        }
        resp
    }
    let app = Router::new().route("/r/{i}", get(handler)).with_state(bodies);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    addr
}

#[test]
fn criterion_5_self_consistency() {
    criterion(5, "deterministic scripts fully pass against the capture that produced them", || {
        let runtime = rt();
        runtime.block_on(async {
            let mut rng = StdRng::seed_from_u64(0xC0FFEE);
            let bodies: Vec<_> = (0..100).map(|_| random_body(&mut rng)).collect();
            let addr = start_random_stub(Arc::new(bodies)).await;
            for i in 0..100usize {
                let capture =
                    probe(&ProbeConfig::get(format!("http://{addr}/r/{i}"))).await.unwrap();
                let catalog = derive_catalog(&capture, &CatalogOptions::default());
                assert!(!catalog.is_empty());
                let scripts =
                    generate_deterministic(&capture, catalog.len(), &CatalogOptions::default())
                        .unwrap();
                let report = run_scripts(&scripts, &capture);
                assert_eq!(
                    report.failed_count,
                    0,
                    "response {i} produced failing scripts:\n{}",
                    report.render_text()
                );
            }
        });
    });
}

// -------------------------------------------------------------------------
// 6. LLM path with mock provider
// -------------------------------------------------------------------------

#[derive(Clone)]
enum Scripted {
    Reply(String),
    Http500,
}

#[derive(Clone, Default)]
struct MockProvider {
    replies: Arc<Mutex<VecDeque<Scripted>>>,
}

async fn completions(State(state): State<MockProvider>, Json(_): Json<Value>) -> Response {
    match state.replies.lock().unwrap().pop_front() {
        Some(Scripted::Reply(content)) => Json(json!({
            "choices": [{"message": {"role": "assistant", "content": content}}]
        }))
        .into_response(),
        Some(Scripted::Http500) | None => {
            (StatusCode::INTERNAL_SERVER_ERROR, "mock failure").into_response()
        }
    }
}

async fn start_mock_provider(replies: Vec<Scripted>) -> SocketAddr {
    let state = MockProvider { replies: Arc::new(Mutex::new(replies.into())) };
    let app = Router::new().route("/chat/completions", post(completions)).with_state(state);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    addr
}

fn mock_provider_config(addr: SocketAddr) -> ProviderConfig {
    ProviderConfig {
        base_url: format!("http://{addr}"),
        model: "mock".into(),
        api_key: ApiKey::new(SECRET),
        temperature: 0.0,
        max_attempts: 2,
    }
}

#[test]
fn criterion_6_llm_path_with_mock_provider() {
    criterion(6, "LLM path: first-try accept, one-repair success, fallback, no key leakage", || {
        let log_buffer: Arc<Mutex<Vec<u8>>> = Arc::new(Mutex::new(Vec::new()));
        let writer_buffer = log_buffer.clone();
        let subscriber = tracing_subscriber::fmt()
            .with_max_level(tracing::Level::TRACE)
            .with_writer(move || BufWriter(writer_buffer.clone()))
            .finish();
        let _guard = tracing::subscriber::set_default(subscriber);

        let runtime = rt();
        let mut observed_text = String::new();
        runtime.block_on(async {
            let capture = mars_capture();
            let opts = CatalogOptions::default();

            // (a) valid completion accepted first try
            let addr = start_mock_provider(vec![Scripted::Reply(GOLDEN.into())]).await;
            let (scripts, diags) =
                generate_llm(&capture, 6, &mock_provider_config(addr), &[], &opts).await.unwrap();
            assert_eq!(render_script(&scripts), GOLDEN);
            assert!(diags.is_empty(), "unexpected diagnostics: {diags:?}");

            // (b) invalid then valid: exactly one repair diagnostic
            let addr = start_mock_provider(vec![
                Scripted::Reply("sorry, I can only answer in prose".into()),
                Scripted::Reply(GOLDEN.into()),
            ])
            .await;
            let (scripts, diags) =
                generate_llm(&capture, 6, &mock_provider_config(addr), &[], &opts).await.unwrap();
            assert_eq!(scripts.len(), 6);
            assert_eq!(diags.len(), 1, "expected exactly one repair diagnostic: {diags:?}");
            observed_text.push_str(&diags.join("\n"));

            // (c) always invalid: deterministic fallback
            let addr = start_mock_provider(vec![Scripted::Http500, Scripted::Http500]).await;
            let (scripts, diags) =
                generate_llm(&capture, 6, &mock_provider_config(addr), &[], &opts).await.unwrap();
            assert_eq!(render_script(&scripts), GOLDEN);
            assert!(diags.iter().any(|d| d.contains("fell back to deterministic")));
            observed_text.push_str(&diags.join("\n"));
        });

        // (d) API key never appears in logs, diagnostics, or debug output
        let logs = String::from_utf8_lossy(&log_buffer.lock().unwrap()).into_owned();
        assert!(!logs.contains(SECRET), "api key leaked into logs");
        assert!(!observed_text.contains(SECRET), "api key leaked into diagnostics");
        let debug_render = format!("{:?}", mock_provider_config("127.0.0.1:1".parse().unwrap()));
        assert!(!debug_render.contains(SECRET), "api key leaked via Debug");
    });
}

struct BufWriter(Arc<Mutex<Vec<u8>>>);

impl std::io::Write for BufWriter {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

// -------------------------------------------------------------------------
// 7. end-to-end chain: CLI and service agree byte-for-byte
// -------------------------------------------------------------------------

async fn start_photos_stub() -> SocketAddr {
    let app = Router::new().route(
        "/photos",
        get(|| async {
            (
                [("content-type", "application/json")],
                r#"{"photos":[{"sol":0,"camera":"FHAZ"}]}"#,
            )
        }),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    addr
}

#[test]
fn criterion_7_end_to_end_chain() {
    criterion(7, "E2E: CLI generate+run 6/6, service flow yields byte-identical collection", || {
        let started = Instant::now();
        let runtime = rt();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("chain.postman_collection.json");

        let (target, service_addr) = runtime.block_on(async {
            let target = start_photos_stub().await;
            std::env::set_var("POSTGEN_UUID_SEED", "42");
            let state = Arc::new(postgen_service::AppState::new(None, Vec::new()));
            let addr = postgen_service::serve(state, 0).await.unwrap();
            (target, addr)
        });
        let url = format!("http://{target}/photos");

        // CLI: generate with a pinned collection id, then run
        let generated = Command::new(env!("CARGO_BIN_EXE_postgen"))
            .env("POSTGEN_UUID_SEED", "42")
            .args([
                "generate", "--url", &url, "--count", "6", "--mode", "deterministic",
                "--out", out.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(generated.status.success());
        assert_eq!(String::from_utf8_lossy(&generated.stdout), GOLDEN);

        let ran = Command::new(env!("CARGO_BIN_EXE_postgen"))
            .args(["run", "--collection", out.to_str().unwrap(), "--target", &url])
            .output()
            .unwrap();
        assert!(ran.status.success(), "run failed: {}", String::from_utf8_lossy(&ran.stdout));
        assert!(String::from_utf8_lossy(&ran.stdout).contains("passed: 6  failed: 0"));

        // Service: same job through POST /chat and GET /download
        let service_bytes = runtime.block_on(async {
            let client = postgen_client::ApiClient::new(format!("http://{service_addr}"));
            let resp = client
                .generate(&postgen_client::GenerateRequest {
                    api_url: url.clone(),
                    count: 6,
                    mode: Some("deterministic".into()),
                    method: None,
                })
                .await
                .unwrap();
            assert_eq!(resp.script_text, GOLDEN);
            client.download(&resp.download_id).await.unwrap()
        });

        let cli_bytes = std::fs::read(&out).unwrap();
        assert_eq!(service_bytes, cli_bytes, "service and CLI collections differ");
        let (collection, warnings) = parse_collection(&cli_bytes).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(collection.items.len(), 1);

        assert!(started.elapsed() < Duration::from_secs(5), "E2E chain exceeded 5 s");
    });
}

// -------------------------------------------------------------------------
// 8. service contract: 400 / 404 / expiry
// -------------------------------------------------------------------------

struct MockClock(Arc<AtomicU64>);

impl postgen_service::Clock for MockClock {
    fn now_secs(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[test]
fn criterion_8_service_contract() {
    criterion(8, "service contract: count 0 is 400, unknown id 404, expired id 404", || {
        let runtime = rt();
        runtime.block_on(async {
            let target = start_photos_stub().await;
            let now = Arc::new(AtomicU64::new(1_000_000));
            let state = Arc::new(postgen_service::AppState::with_clock(
                None,
                Vec::new(),
                Box::new(MockClock(now.clone())),
            ));
            let addr = postgen_service::serve(state, 0).await.unwrap();
            let client = postgen_client::ApiClient::new(format!("http://{addr}"));

            // count 0 -> 400
            match client
                .generate(&postgen_client::GenerateRequest {
                    api_url: format!("http://{target}/photos"),
                    count: 0,
                    mode: None,
                    method: None,
                })
                .await
            {
                Err(postgen_client::ClientError::Api { status: 400, .. }) => {}
                other => panic!("expected 400, got {other:?}"),
            }

            // unknown id -> 404
            match client.download("ffffffff-0000-0000-0000-000000000000").await {
                Err(postgen_client::ClientError::Api { status: 404, .. }) => {}
                other => panic!("expected 404, got {other:?}"),
            }

            // expired id -> 404 under an injected clock
            let resp = client
                .generate(&postgen_client::GenerateRequest {
                    api_url: format!("http://{target}/photos"),
                    count: 6,
                    mode: Some("deterministic".into()),
                    method: None,
                })
                .await
                .unwrap();
            assert!(client.download(&resp.download_id).await.is_ok());
            now.fetch_add(postgen_service::DOWNLOAD_TTL_SECS + 1, Ordering::SeqCst);
            match client.download(&resp.download_id).await {
                Err(postgen_client::ClientError::Api { status: 404, .. }) => {}
                other => panic!("expected 404 after expiry, got {other:?}"),
            }
        });
    });
}
