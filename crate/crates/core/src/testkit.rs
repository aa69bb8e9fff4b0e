//! Random generators and shared fixtures for tests. Enabled with the
//! `testkit` feature; not part of the public API proper.

use proptest::prelude::*;

use crate::collection::{CollectionItem, PostmanCollection, HTTP_METHODS, SCHEMA_URL};
use crate::dsl::{self, Assertion, JsonPath, JsonScalar, PathSegment, TestScript};
use crate::probe::ResponseCapture;

/// The capture every golden test is built on: one observed exchange with a
/// JSON body holding a non-empty `photos` array.
pub fn mars_capture() -> ResponseCapture {
    ResponseCapture::from_parts(
        200,
        vec![
            ("Content-Type".into(), "application/json".into()),
            ("Content-Length".into(), "38".into()),
        ],
        br#"{"photos":[{"sol":0,"camera":"FHAZ"}]}"#.to_vec(),
        150,
        "https://api.nasa.gov/mars-photos/api/v1/rovers/curiosity/photos".into(),
    )
}

pub fn arb_field_name() -> impl Strategy<Value = String> {
    "[a-z_][a-z0-9_]{0,7}"
}

pub fn arb_path() -> impl Strategy<Value = JsonPath> {
    prop::collection::vec(
        prop_oneof![
            arb_field_name().prop_map(PathSegment::Field),
            (0u64..1000).prop_map(PathSegment::Index),
        ],
        0..=8,
    )
    .prop_map(|segments| JsonPath { segments })
}

pub fn arb_scalar() -> impl Strategy<Value = JsonScalar> {
    prop_oneof![
        Just(JsonScalar::Null),
        any::<bool>().prop_map(JsonScalar::Bool),
        any::<i64>().prop_map(JsonScalar::Int),
        prop::num::f64::NORMAL.prop_map(JsonScalar::Float),
        Just(JsonScalar::Float(0.0)),
        arb_text().prop_map(JsonScalar::Str),
    ]
}

/// Printable-ish text including escapes the renderer must handle.
pub fn arb_text() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof![
            prop::char::range(' ', '~'),
            Just('\\'),
            Just('"'),
            Just('\''),
            Just('\n'),
            prop::char::range('\u{a0}', '\u{2ff}'),
        ],
        0..20,
    )
    .prop_map(|cs| cs.into_iter().collect())
}

pub fn arb_title() -> impl Strategy<Value = String> {
    arb_text().prop_filter("title must be non-empty", |s| !s.is_empty())
}

pub fn arb_assertion() -> impl Strategy<Value = Assertion> {
    prop_oneof![
        (100u16..=599).prop_map(Assertion::StatusEquals),
        Just(Assertion::BodyNotEmpty),
        arb_title().prop_map(Assertion::HeaderPresent),
        (1u64..1_000_000).prop_map(Assertion::ResponseTimeBelow),
        arb_path().prop_map(Assertion::JsonPathIsNonEmptyArray),
        (arb_path(), arb_scalar()).prop_map(|(p, s)| Assertion::JsonPathEquals(p, s)),
    ]
}

pub fn arb_script() -> impl Strategy<Value = TestScript> {
    (arb_title(), prop::collection::vec(arb_assertion(), 1..=4))
        .prop_map(|(title, assertions)| TestScript { title, assertions })
}

pub fn arb_scripts() -> impl Strategy<Value = Vec<TestScript>> {
    prop::collection::vec(arb_script(), 0..=5)
}

pub fn arb_collection() -> impl Strategy<Value = PostmanCollection> {
    let item = (
        arb_title(),
        prop::sample::select(HTTP_METHODS.to_vec()),
        "[a-z]{1,8}(/[a-z0-9]{1,6}){0,3}",
        prop::collection::vec(arb_script(), 1..=4),
    )
        .prop_map(|(name, method, path, scripts)| CollectionItem {
            name,
            request_method: method.to_string(),
            request_url: format!("https://example.com/{path}"),
            test_script_lines: dsl::render_script(&scripts).lines().map(str::to_string).collect(),
        });
    (any::<[u8; 16]>(), arb_title(), prop::collection::vec(item, 1..=3)).prop_map(
        |(id_bytes, name, items)| PostmanCollection {
            info_name: name,
            info_id: uuid::Builder::from_random_bytes(id_bytes).into_uuid().to_string(),
            schema_url: SCHEMA_URL.to_string(),
            items,
        },
    )
}
