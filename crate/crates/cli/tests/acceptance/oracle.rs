//! Independent brute-force oracle for assertion evaluation, written from the
//! assertion definitions. Must not call into the runner.

use postgen_core::dsl::{Assertion, JsonPath, JsonScalar, PathSegment};
use postgen_core::probe::ResponseCapture;
use serde_json::Value;

fn resolve<'a>(body: &'a Option<Value>, path: &JsonPath) -> Option<&'a Value> {
    let mut cur = body.as_ref()?;
    for seg in &path.segments {
        cur = match seg {
            PathSegment::Field(name) => match cur {
                Value::Object(map) => map.get(name)?,
                _ => return None,
            },
            PathSegment::Index(i) => match cur {
                Value::Array(items) => items.get(*i as usize)?,
                _ => return None,
            },
        };
    }
    Some(cur)
}

fn scalar_eq(lit: &JsonScalar, v: &Value) -> bool {
    match (lit, v) {
        (JsonScalar::Null, Value::Null) => true,
        (JsonScalar::Bool(a), Value::Bool(b)) => a == b,
        (JsonScalar::Int(i), Value::Number(n)) => {
            n.as_i64().map(|x| x == *i).unwrap_or(false)
                || n.as_f64().map(|x| x == *i as f64).unwrap_or(false)
        }
        (JsonScalar::Float(x), Value::Number(n)) => n.as_f64().map(|y| y == *x).unwrap_or(false),
        (JsonScalar::Str(a), Value::String(b)) => a == b,
        _ => false,
    }
}

pub fn expected_outcome(a: &Assertion, c: &ResponseCapture) -> bool {
    match a {
        Assertion::StatusEquals(code) => c.status == *code,
        Assertion::BodyNotEmpty => !c.body_bytes.is_empty(),
        Assertion::HeaderPresent(name) => c
            .headers
            .iter()
            .any(|(n, _)| n.to_ascii_lowercase() == name.to_ascii_lowercase()),
        Assertion::ResponseTimeBelow(ms) => c.latency_ms < *ms,
        Assertion::JsonPathIsNonEmptyArray(path) => {
            matches!(resolve(&c.json_body, path), Some(Value::Array(items)) if !items.is_empty())
        }
        Assertion::JsonPathEquals(path, lit) => {
            resolve(&c.json_body, path).map(|v| scalar_eq(lit, v)).unwrap_or(false)
        }
    }
}

pub fn enumerated_captures() -> Vec<ResponseCapture> {
    let statuses = [200u16, 204, 404, 500];
    let header_sets: [Vec<(String, String)>; 2] = [
        vec![("Content-Type".into(), "application/json".into())],
        vec![("X-Other".into(), "1".into())],
    ];
    let bodies: [&[u8]; 7] = [
        b"",
        b"plain text",
        br#"{"photos":[{"sol":0,"camera":"FHAZ"}]}"#,
        br#"{"photos":[]}"#,
        br#"{"a":0.0,"b":"0"}"#,
        br#"[1,2,3]"#,
        br#"{"photos":[{"sol":1}]}"#,
    ];
    let latencies = [0u64, 150, 200, 250];
    let mut out = Vec::new();
    for status in statuses {
        for headers in &header_sets {
            for body in bodies {
                for latency in latencies {
                    out.push(ResponseCapture::from_parts(
                        status,
                        headers.clone(),
                        body.to_vec(),
                        latency,
                        "http://stub.local/".into(),
                    ));
                }
            }
        }
    }
    out
}

pub fn assertion_table() -> Vec<Assertion> {
    let photos = JsonPath::root().field("photos");
    let sol = JsonPath::root().field("photos").index(0).field("sol");
    let camera = JsonPath::root().field("photos").index(0).field("camera");
    vec![
        Assertion::StatusEquals(200),
        Assertion::StatusEquals(404),
        Assertion::BodyNotEmpty,
        Assertion::HeaderPresent("content-type".into()),
        Assertion::HeaderPresent("Content-Type".into()),
        Assertion::HeaderPresent("x-api-key".into()),
        Assertion::ResponseTimeBelow(200),
        Assertion::ResponseTimeBelow(1),
        Assertion::JsonPathIsNonEmptyArray(photos),
        Assertion::JsonPathIsNonEmptyArray(JsonPath::root()),
        Assertion::JsonPathIsNonEmptyArray(JsonPath::root().field("missing")),
        Assertion::JsonPathEquals(sol, JsonScalar::Int(0)),
        Assertion::JsonPathEquals(camera, JsonScalar::Str("FHAZ".into())),
        Assertion::JsonPathEquals(JsonPath::root().field("a"), JsonScalar::Float(0.0)),
        Assertion::JsonPathEquals(JsonPath::root().field("a"), JsonScalar::Int(0)),
        Assertion::JsonPathEquals(JsonPath::root().field("b"), JsonScalar::Int(0)),
        Assertion::JsonPathEquals(JsonPath::root().field("b"), JsonScalar::Str("0".into())),
        Assertion::JsonPathEquals(JsonPath::root().field("missing"), JsonScalar::Null),
    ]
}
