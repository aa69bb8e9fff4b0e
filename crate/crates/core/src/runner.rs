//! Postman-free assertion evaluation, so exported collections can be
//! verified end to end without importing them anywhere.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::collection::PostmanCollection;
use crate::dsl::{self, Assertion, JsonPath, JsonScalar, PathSegment, TestScript};
use crate::probe::{probe, ProbeConfig, ResponseCapture};

/// Outcome of one assertion. `assertion` holds the canonical statement text
/// so reports are readable without the grammar; a transport failure in
/// [`run_collection`] shows up as a pseudo-result with the probe description
/// here instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionResult {
    pub assertion: String,
    pub passed: bool,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptResult {
    pub title: String,
    pub assertions: Vec<AssertionResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scripts: Vec<ScriptResult>,
    pub passed_count: usize,
    pub failed_count: usize,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.failed_count == 0
    }

    fn push(&mut self, script: ScriptResult) {
        for r in &script.assertions {
            if r.passed {
                self.passed_count += 1;
            } else {
                self.failed_count += 1;
            }
        }
        self.scripts.push(script);
    }

    fn merge(&mut self, other: RunReport) {
        for script in other.scripts {
            self.push(script);
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("report serializes")
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for script in &self.scripts {
            out.push_str(&format!("{}\n", script.title));
            for r in &script.assertions {
                let mark = if r.passed { "pass" } else { "FAIL" };
                out.push_str(&format!("  [{mark}] {}", r.assertion));
                if !r.message.is_empty() {
                    out.push_str(&format!("  ({})", r.message));
                }
                out.push('\n');
            }
        }
        out.push_str(&format!("passed: {}  failed: {}\n", self.passed_count, self.failed_count));
        out
    }
}

fn result(a: &Assertion, passed: bool, message: String) -> AssertionResult {
    AssertionResult {
        assertion: dsl::render_assertion(a),
        passed,
        message: if passed { String::new() } else { message },
    }
}

fn resolve<'a>(body: &'a Option<Value>, path: &JsonPath) -> Result<&'a Value, String> {
    let mut cur = body.as_ref().ok_or_else(|| "body is not JSON".to_string())?;
    for seg in &path.segments {
        cur = match seg {
            PathSegment::Field(name) => cur.get(name.as_str()),
            PathSegment::Index(i) => cur.get(*i as usize),
        }
        .ok_or_else(|| format!("path {path} not found"))?;
    }
    Ok(cur)
}

fn scalar_matches(lit: &JsonScalar, v: &Value) -> bool {
    match lit {
        JsonScalar::Null => v.is_null(),
        JsonScalar::Bool(b) => v.as_bool() == Some(*b),
        // 0 and 0.0 are equal; strings never equal numbers.
        JsonScalar::Int(i) => match v {
            Value::Number(n) => n.as_i64() == Some(*i) || n.as_f64() == Some(*i as f64),
            _ => false,
        },
        JsonScalar::Float(x) => match v {
            Value::Number(n) => n.as_f64() == Some(*x),
            _ => false,
        },
        JsonScalar::Str(s) => v.as_str() == Some(s.as_str()),
    }
}

/// Evaluate one assertion against a capture. Total: unresolvable paths and
/// non-JSON bodies are failures with a message, never errors.
pub fn eval_assertion(a: &Assertion, c: &ResponseCapture) -> AssertionResult {
    match a {
        Assertion::StatusEquals(code) => result(
            a,
            c.status == *code,
            format!("expected status {code}, got {}", c.status),
        ),
        Assertion::BodyNotEmpty => {
            result(a, !c.body_bytes.is_empty(), "body is empty".to_string())
        }
        Assertion::HeaderPresent(name) => result(
            a,
            c.header(name).is_some(),
            format!("header {name:?} not present"),
        ),
        Assertion::ResponseTimeBelow(ms) => result(
            a,
            c.latency_ms < *ms,
            format!("response took {} ms, bound is {ms} ms", c.latency_ms),
        ),
        Assertion::JsonPathIsNonEmptyArray(path) => match resolve(&c.json_body, path) {
            Ok(Value::Array(items)) if !items.is_empty() => result(a, true, String::new()),
            Ok(Value::Array(_)) => result(a, false, format!("array at {path} is empty")),
            Ok(_) => result(a, false, format!("value at {path} is not an array")),
            Err(msg) => result(a, false, msg),
        },
        Assertion::JsonPathEquals(path, lit) => match resolve(&c.json_body, path) {
            Ok(v) => result(
                a,
                scalar_matches(lit, v),
                format!("value at {path} is {v}, expected {lit}"),
            ),
            Err(msg) => result(a, false, msg),
        },
    }
}

/// Evaluate every assertion of every script; no short-circuiting, so the
/// report lists every failing claim.
pub fn run_scripts(scripts: &[TestScript], c: &ResponseCapture) -> RunReport {
    let mut report = RunReport { scripts: Vec::new(), passed_count: 0, failed_count: 0 };
    for script in scripts {
        let assertions = script.assertions.iter().map(|a| eval_assertion(a, c)).collect();
        report.push(ScriptResult { title: script.title.clone(), assertions });
    }
    report
}

/// Probe each item's URL (or the override), parse its test event, and run
/// it. Probe and parse failures become failed pseudo-results carrying the
/// transport message, so one bad item cannot abort the report.
pub async fn run_collection(
    collection: &PostmanCollection,
    url_override: Option<&str>,
    probe_template: &ProbeConfig,
) -> RunReport {
    let mut report = RunReport { scripts: Vec::new(), passed_count: 0, failed_count: 0 };
    for item in &collection.items {
        let url = url_override.unwrap_or(&item.request_url);
        let config = ProbeConfig {
            url: url.to_string(),
            method: item.request_method.clone(),
            ..probe_template.clone()
        };
        let capture = match probe(&config).await {
            Ok(c) => c,
            Err(e) => {
                report.push(ScriptResult {
                    title: item.name.clone(),
                    assertions: vec![AssertionResult {
                        assertion: format!("{} {}", item.request_method, url),
                        passed: false,
                        message: e.to_string(),
                    }],
                });
                continue;
            }
        };
        let text = item.test_script_lines.join("\n");
        match dsl::parse_script(&text) {
            Ok((scripts, _)) => report.merge(run_scripts(&scripts, &capture)),
            Err(e) => report.push(ScriptResult {
                title: item.name.clone(),
                assertions: vec![AssertionResult {
                    assertion: format!("{} {}", item.request_method, url),
                    passed: false,
                    message: format!("test script does not parse: {e}"),
                }],
            }),
        }
    }
    report
}
