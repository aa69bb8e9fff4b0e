//! Core toolkit for generating, exporting, and executing Postman test cases
//! against live REST APIs: a typed assertion DSL with renderer and parser, a
//! Collection v2.1 model, an HTTP probe, deterministic and LLM-backed
//! generators, and a built-in runner.

pub mod collection;
pub mod dsl;
pub mod generator;
pub mod job;
pub mod probe;
pub mod runner;
#[cfg(feature = "testkit")]
pub mod testkit;
