//! Declarative scenario documents.
//!
//! A scenario is a JSON document (see `docs/scenario-schema.md`). Documents
//! may inherit from a parent via `base`; objects merge key by key, arrays and
//! scalars replace. CAN-style communication matrices referenced under
//! `stream_matrices` are expanded into ordinary streams while parsing.

mod matrix;
mod model;
mod parse;
mod resolve;
mod validate;

pub use matrix::{parse_matrix, MatrixError, MatrixRow, MatrixSpec};
pub use model::*;
pub use parse::{parse_scenario, parse_scenario_file, to_json, DirSource, MemorySource, ParseError, ScenarioSource};
pub use resolve::{expand_pattern, resolve_streams, ResolvedStream, StreamPlan};
pub use validate::{validate_scenario, Issue, ValidationReport};
