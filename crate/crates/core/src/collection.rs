//! In-memory model of the Postman Collection v2.1 format with lossless,
//! deterministic JSON serialization. The layout is fixed (info, item; within
//! an item: name, event, request) so equal collections serialize to identical
//! bytes.

use rand::RngCore;
use serde_json::{json, Map, Value};
use thiserror::Error;
use url::Url;
use uuid::Uuid;

use crate::dsl::{self, TestScript};

/// The `info.schema` value every collection must carry, exactly.
pub const SCHEMA_URL: &str =
    "https://schema.getpostman.com/json/collection/v2.1.0/collection.json";

/// File name convention for exported collections.
pub fn collection_file_name(name: &str) -> String {
    format!("{name}.postman_collection.json")
}

pub const HTTP_METHODS: [&str; 7] = ["GET", "POST", "PUT", "PATCH", "DELETE", "HEAD", "OPTIONS"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectionItem {
    pub name: String,
    pub request_method: String,
    pub request_url: String,
    pub test_script_lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostmanCollection {
    pub info_name: String,
    pub info_id: String,
    pub schema_url: String,
    pub items: Vec<CollectionItem>,
}

#[derive(Debug, Error)]
pub enum CollectionError {
    #[error("no test scripts supplied")]
    EmptyScripts,
    #[error("invalid URL: {0}")]
    InvalidUrl(String),
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("not a v2.1 collection: {0}")]
    SchemaMismatch(String),
    #[error("invariant violation at {path}: {message}")]
    InvariantViolation { path: String, message: String },
}

impl PostmanCollection {
    pub fn validate(&self) -> Result<(), CollectionError> {
        let fail = |path: &str, message: String| {
            Err(CollectionError::InvariantViolation { path: path.to_string(), message })
        };
        if self.schema_url != SCHEMA_URL {
            return fail("info.schema", format!("expected {SCHEMA_URL}"));
        }
        if Uuid::parse_str(&self.info_id).is_err() {
            return fail("info._postman_id", format!("{:?} is not a UUID", self.info_id));
        }
        if self.items.is_empty() {
            return fail("item", "collection has no items".into());
        }
        for (i, item) in self.items.iter().enumerate() {
            let at = |field: &str| format!("item[{i}].{field}");
            if !HTTP_METHODS.contains(&item.request_method.as_str()) {
                return fail(&at("request.method"), format!("unknown method {:?}", item.request_method));
            }
            if Url::parse(&item.request_url).is_err() {
                return fail(&at("request.url"), format!("{:?} is not absolute", item.request_url));
            }
            let joined = item.test_script_lines.join("\n");
            if let Err(e) = dsl::parse_script(&joined) {
                return fail(&at("event"), format!("test script does not parse: {e}"));
            }
        }
        Ok(())
    }
}

/// Build a one-item collection carrying the rendered scripts as its test
/// event. A fresh v4 UUID is drawn from `rng` so tests can pin the id.
pub fn build_collection_with_rng(
    name: &str,
    url: &str,
    method: &str,
    scripts: &[TestScript],
    rng: &mut dyn RngCore,
) -> Result<PostmanCollection, CollectionError> {
    if scripts.is_empty() {
        return Err(CollectionError::EmptyScripts);
    }
    Url::parse(url).map_err(|e| CollectionError::InvalidUrl(format!("{url:?}: {e}")))?;
    let mut bytes = [0u8; 16];
    rng.fill_bytes(&mut bytes);
    let id = uuid::Builder::from_random_bytes(bytes).into_uuid();
    let rendered = dsl::render_script(scripts);
    let lines: Vec<String> = rendered.lines().map(str::to_string).collect();
    let collection = PostmanCollection {
        info_name: name.to_string(),
        info_id: id.to_string(),
        schema_url: SCHEMA_URL.to_string(),
        items: vec![CollectionItem {
            name: name.to_string(),
            request_method: method.to_string(),
            request_url: url.to_string(),
            test_script_lines: lines,
        }],
    };
    collection.validate()?;
    Ok(collection)
}

pub fn build_collection(
    name: &str,
    url: &str,
    method: &str,
    scripts: &[TestScript],
) -> Result<PostmanCollection, CollectionError> {
    build_collection_with_rng(name, url, method, scripts, &mut rand::thread_rng())
}

/// Like [`build_collection`], but with an optional seed so tests and
/// reproducible runs can pin the collection id.
pub fn build_collection_seeded(
    name: &str,
    url: &str,
    method: &str,
    scripts: &[TestScript],
    seed: Option<u64>,
) -> Result<PostmanCollection, CollectionError> {
    use rand::SeedableRng;
    match seed {
        Some(s) => {
            let mut rng = rand::rngs::StdRng::seed_from_u64(s);
            build_collection_with_rng(name, url, method, scripts, &mut rng)
        }
        None => build_collection(name, url, method, scripts),
    }
}

/// Serialize to pretty-printed UTF-8 JSON. Deterministic: equal collections
/// yield byte-identical output.
pub fn serialize_collection(c: &PostmanCollection) -> Vec<u8> {
    let items: Vec<Value> = c
        .items
        .iter()
        .map(|item| {
            json!({
                "name": item.name,
                "event": [{
                    "listen": "test",
                    "script": {
                        "exec": item.test_script_lines,
                        "type": "text/javascript",
                    },
                }],
                "request": {
                    "method": item.request_method,
                    "header": [],
                    "url": { "raw": item.request_url },
                },
            })
        })
        .collect();
    let doc = json!({
        "info": {
            "_postman_id": c.info_id,
            "name": c.info_name,
            "schema": c.schema_url,
        },
        "item": items,
    });
    let mut out = serde_json::to_vec_pretty(&doc).expect("collection serializes");
    out.push(b'\n');
    out
}

/// Parse exported collection bytes back into the model. Unknown fields are
/// tolerated and reported as warnings so real Postman exports load.
pub fn parse_collection(
    bytes: &[u8],
) -> Result<(PostmanCollection, Vec<String>), CollectionError> {
    let doc: Value = serde_json::from_slice(bytes)
        .map_err(|e| CollectionError::MalformedJson(e.to_string()))?;
    let mut warnings = Vec::new();
    let root = as_object(&doc, "$", &mut warnings, &["info", "item"])?;

    let info_val = root
        .get("info")
        .ok_or_else(|| CollectionError::SchemaMismatch("missing info object".into()))?;
    let info = as_object(info_val, "info", &mut warnings, &["_postman_id", "name", "schema"])?;
    let schema_url = match info.get("schema").and_then(Value::as_str) {
        Some(s) if s == SCHEMA_URL => s.to_string(),
        Some(other) => {
            return Err(CollectionError::SchemaMismatch(format!("schema is {other:?}")))
        }
        None => return Err(CollectionError::SchemaMismatch("missing info.schema".into())),
    };
    let info_name = str_field(info, "info", "name")?;
    let info_id = str_field(info, "info", "_postman_id")?;

    let items_val = root.get("item").ok_or_else(|| CollectionError::InvariantViolation {
        path: "item".into(),
        message: "missing item array".into(),
    })?;
    let items_arr = items_val.as_array().ok_or_else(|| CollectionError::InvariantViolation {
        path: "item".into(),
        message: "item is not an array".into(),
    })?;
    let mut items = Vec::with_capacity(items_arr.len());
    for (i, item_val) in items_arr.iter().enumerate() {
        let at = format!("item[{i}]");
        let item = as_object(item_val, &at, &mut warnings, &["name", "event", "request"])?;
        let name = str_field(item, &at, "name")?;

        let request_val = item.get("request").ok_or_else(|| CollectionError::InvariantViolation {
            path: format!("{at}.request"),
            message: "missing request".into(),
        })?;
        let request = as_object(request_val, &format!("{at}.request"), &mut warnings, &["method", "header", "url"])?;
        let request_method = str_field(request, &format!("{at}.request"), "method")?;
        let request_url = match request.get("url") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Object(obj)) => match obj.get("raw").and_then(Value::as_str) {
                Some(raw) => {
                    for key in obj.keys().filter(|k| *k != "raw") {
                        warnings.push(format!("{at}.request.url.{key}: unknown field ignored"));
                    }
                    raw.to_string()
                }
                None => {
                    return Err(CollectionError::InvariantViolation {
                        path: format!("{at}.request.url"),
                        message: "url object has no raw field".into(),
                    })
                }
            },
            _ => {
                return Err(CollectionError::InvariantViolation {
                    path: format!("{at}.request.url"),
                    message: "missing or non-string url".into(),
                })
            }
        };

        let mut test_script_lines = Vec::new();
        if let Some(events) = item.get("event") {
            let events = events.as_array().ok_or_else(|| CollectionError::InvariantViolation {
                path: format!("{at}.event"),
                message: "event is not an array".into(),
            })?;
            for (j, ev) in events.iter().enumerate() {
                let ev_at = format!("{at}.event[{j}]");
                let ev = as_object(ev, &ev_at, &mut warnings, &["listen", "script"])?;
                if ev.get("listen").and_then(Value::as_str) != Some("test") {
                    warnings.push(format!("{ev_at}: non-test event ignored"));
                    continue;
                }
                let script_val = ev.get("script").ok_or_else(|| CollectionError::InvariantViolation {
                    path: format!("{ev_at}.script"),
                    message: "missing script".into(),
                })?;
                let script = as_object(script_val, &format!("{ev_at}.script"), &mut warnings, &["exec", "type"])?;
                let exec = script.get("exec").ok_or_else(|| CollectionError::InvariantViolation {
                    path: format!("{ev_at}.script.exec"),
                    message: "missing exec".into(),
                })?;
                match exec {
                    Value::Array(lines) => {
                        for line in lines {
                            match line.as_str() {
                                Some(s) => test_script_lines.push(s.to_string()),
                                None => {
                                    return Err(CollectionError::InvariantViolation {
                                        path: format!("{ev_at}.script.exec"),
                                        message: "exec entries must be strings".into(),
                                    })
                                }
                            }
                        }
                    }
                    Value::String(s) => {
                        test_script_lines.extend(s.lines().map(str::to_string));
                    }
                    _ => {
                        return Err(CollectionError::InvariantViolation {
                            path: format!("{ev_at}.script.exec"),
                            message: "exec must be an array of lines".into(),
                        })
                    }
                }
            }
        }
        items.push(CollectionItem { name, request_method, request_url, test_script_lines });
    }

    let collection = PostmanCollection { info_name, info_id, schema_url, items };
    collection.validate()?;
    Ok((collection, warnings))
}

fn as_object<'a>(
    v: &'a Value,
    path: &str,
    warnings: &mut Vec<String>,
    known: &[&str],
) -> Result<&'a Map<String, Value>, CollectionError> {
    let obj = v.as_object().ok_or_else(|| CollectionError::InvariantViolation {
        path: path.to_string(),
        message: "expected an object".into(),
    })?;
    for key in obj.keys() {
        if !known.contains(&key.as_str()) {
            warnings.push(format!("{path}.{key}: unknown field ignored"));
        }
    }
    Ok(obj)
}

fn str_field(
    obj: &Map<String, Value>,
    path: &str,
    key: &str,
) -> Result<String, CollectionError> {
    obj.get(key)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| CollectionError::InvariantViolation {
            path: format!("{path}.{key}"),
            message: "missing or non-string".into(),
        })
}
