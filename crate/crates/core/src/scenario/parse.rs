use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use thiserror::Error;

use super::matrix::{parse_matrix, MatrixError};
use super::model::{MatrixRef, ScenarioConfig};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{doc}: syntax error at line {line}, column {column}: {msg}")]
    Syntax { doc: String, line: usize, column: usize, msg: String },
    #[error("{doc}: at {path}: {msg}")]
    Schema { doc: String, path: String, msg: String },
    #[error("cannot resolve base scenario {name:?}: {msg}")]
    UnresolvedBase { name: String, msg: String },
    #[error("inheritance cycle: {0}")]
    Cycle(String),
    #[error("cannot load stream matrix {path:?}: {msg}")]
    Matrix { path: String, msg: String },
    #[error(transparent)]
    MatrixRow(#[from] MatrixError),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
}

/// Where `base` references and matrix files are looked up.
pub trait ScenarioSource {
    /// Text of the scenario document called `name`.
    fn scenario(&self, name: &str) -> Result<String, String>;
    /// Text of an auxiliary file referenced by a document.
    fn file(&self, path: &str) -> Result<String, String>;
}

/// Resolves `base: foo` to `<dir>/foo.json` and relative paths against `dir`.
#[derive(Debug, Clone)]
pub struct DirSource {
    pub dir: PathBuf,
}

impl DirSource {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DirSource { dir: dir.into() }
    }
}

impl ScenarioSource for DirSource {
    fn scenario(&self, name: &str) -> Result<String, String> {
        let p = self.dir.join(format!("{name}.json"));
        fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))
    }

    fn file(&self, path: &str) -> Result<String, String> {
        let p = self.dir.join(path);
        fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))
    }
}

/// In-memory documents, mostly for tests.
#[derive(Debug, Clone, Default)]
pub struct MemorySource {
    pub scenarios: BTreeMap<String, String>,
    pub files: BTreeMap<String, String>,
}

impl ScenarioSource for MemorySource {
    fn scenario(&self, name: &str) -> Result<String, String> {
        self.scenarios.get(name).cloned().ok_or_else(|| "no such scenario".to_string())
    }

    fn file(&self, path: &str) -> Result<String, String> {
        self.files.get(path).cloned().ok_or_else(|| "no such file".to_string())
    }
}

const MATRIX_KEY: &str = "stream_matrices";

/// Parses a scenario document, applying inheritance and expanding stream
/// matrices.
pub fn parse_scenario(text: &str, source: &dyn ScenarioSource) -> Result<ScenarioConfig, ParseError> {
    let root = syntax("<input>", text)?;
    let mut stack = Vec::new();
    if let Some(n) = root.get("name").and_then(Value::as_str) {
        stack.push(n.to_string());
    }
    let mut merged = resolve_bases(root, source, &mut stack)?;
    let matrices = match merged.as_object_mut().and_then(|o| o.remove(MATRIX_KEY)) {
        None | Some(Value::Null) => Vec::new(),
        Some(v) => deserialize::<Vec<MatrixRef>>("<input>", v)?,
    };
    let mut cfg: ScenarioConfig = deserialize("<input>", merged)?;
    for m in matrices {
        let text = source.file(&m.path).map_err(|msg| ParseError::Matrix { path: m.path.clone(), msg })?;
        let rows = parse_matrix(&text)?;
        cfg.streams.extend(m.expand(&rows)?);
    }
    Ok(cfg)
}

/// Parses a document from disk; `base` and matrix references resolve
/// relative to the document's directory.
pub fn parse_scenario_file(path: &Path) -> Result<ScenarioConfig, ParseError> {
    let text = fs::read_to_string(path).map_err(|e| ParseError::Io(path.to_path_buf(), e))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_scenario(&text, &DirSource::new(dir))
}

/// Serializes a config so that parsing it back yields the same value. Every
/// field is written explicitly, which keeps inherited values from leaking
/// back in through `base`.
pub fn to_json(cfg: &ScenarioConfig) -> String {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Some(o) = v.as_object_mut() {
        o.insert(MATRIX_KEY.to_string(), Value::Array(Vec::new()));
    }
    serde_json::to_string_pretty(&v).expect("value serializes")
}

fn syntax(doc: &str, text: &str) -> Result<Value, ParseError> {
    serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        doc: doc.to_string(),
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })
}

fn deserialize<T: serde::de::DeserializeOwned>(doc: &str, v: Value) -> Result<T, ParseError> {
    serde_path_to_error::deserialize(v).map_err(|e| ParseError::Schema {
        doc: doc.to_string(),
        path: e.path().to_string(),
        msg: e.inner().to_string(),
    })
}

fn resolve_bases(doc: Value, source: &dyn ScenarioSource, stack: &mut Vec<String>) -> Result<Value, ParseError> {
    let base = match doc.get("base") {
        None | Some(Value::Null) => return Ok(doc),
        Some(Value::String(b)) => b.clone(),
        Some(_) => {
            return Err(ParseError::Schema {
                doc: stack.last().cloned().unwrap_or_default(),
                path: "base".into(),
                msg: "expected a scenario name".into(),
            })
        }
    };
    if stack.contains(&base) {
        stack.push(base);
        return Err(ParseError::Cycle(stack.join(" -> ")));
    }
    let text = source
        .scenario(&base)
        .map_err(|msg| ParseError::UnresolvedBase { name: base.clone(), msg })?;
    let parent = syntax(&base, &text)?;
    stack.push(base);
    let parent = resolve_bases(parent, source, stack)?;
    stack.pop();
    Ok(merge(parent, doc))
}

/// Objects merge key by key; anything else in the child replaces the parent.
pub(crate) fn merge(parent: Value, child: Value) -> Value {
    match (parent, child) {
        (Value::Object(mut p), Value::Object(c)) => {
            for (k, v) in c {
                let merged = match p.remove(&k) {
                    Some(pv) => merge(pv, v),
                    None => v,
                };
                p.insert(k, merged);
            }
            Value::Object(p)
        }
        (_, c) => c,
    }
}
