//! Instance files and the text document format shared by all outputs.
//!
//! Documents are JSON with matrices as nested arrays. Floating-point numbers
//! are written with 17 significant digits (`d.dddddddddddddddde±x`), which
//! reads back to the identical `f64`; integers are written as integers.
//!
//! ```json
//! {
//!   "states": ["1", "2"],
//!   "lower": [[0, 0.2], [0.2, 0]],
//!   "upper": [[0, 0.9], [0.9, 0]],
//!   "marginal": [1, 1],
//!   "q": [1, 0],
//!   "f": [0, 1],
//!   "steps": 2
//! }
//! ```

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::chain::{ChainError, Gamble, MassFunction};
use crate::graph::{rows_to_array, IntervalBounds, ModelError, StateSpace};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("cannot write non-finite number {0}")]
    NonFinite(f64),
}

/// On-disk shape of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default)]
    pub states: Option<Vec<String>>,
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    pub marginal: Vec<f64>,
    pub q: Vec<f64>,
    pub f: Vec<f64>,
    pub steps: usize,
}

/// Bounds plus the `q`, `f` and step count of one bounds problem.
///
/// The bounds are only structurally checked; call
/// [`IntervalBounds::validate`] before optimising.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub bounds: IntervalBounds,
    pub q: MassFunction,
    pub f: Gamble,
    pub steps: usize,
}

impl Instance {
    pub fn from_file_data(file: InstanceFile) -> Result<Self, FormatError> {
        let s = file.marginal.len();
        let states = match file.states {
            Some(labels) => StateSpace::new(labels)?,
            None => StateSpace::numbered(s)?,
        };
        if states.len() != s {
            return Err(ModelError::Dimension {
                what: "marginal",
                expected: states.len(),
                found: s,
            }
            .into());
        }
        let bounds = IntervalBounds::new(
            states,
            rows_to_array("lower", &file.lower, s)?,
            rows_to_array("upper", &file.upper, s)?,
            file.marginal.into(),
        )?;
        for (what, v) in [("q", &file.q), ("f", &file.f)] {
            if v.len() != s {
                return Err(ModelError::Dimension { what, expected: s, found: v.len() }.into());
            }
        }
        Ok(Self {
            bounds,
            q: MassFunction::new(file.q)?,
            f: Gamble::new(file.f)?,
            steps: file.steps,
        })
    }

    pub fn to_file_data(&self) -> InstanceFile {
        let b = &self.bounds;
        let rows = |m: &ndarray::Array2<f64>| m.rows().into_iter().map(|r| r.to_vec()).collect();
        InstanceFile {
            states: Some(b.states().labels().to_vec()),
            lower: rows(b.lower_matrix()),
            upper: rows(b.upper_matrix()),
            marginal: b.marginals().to_vec(),
            q: self.q.values().to_vec(),
            f: self.f.values().to_vec(),
            steps: self.steps,
        }
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        Self::from_file_data(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_document(&self) -> Result<String, FormatError> {
        write_document(&serde_json::to_value(self.to_file_data())?)
    }

    pub fn save(&self, path: &Path) -> Result<(), FormatError> {
        let text = self.to_document()?;
        std::fs::write(path, text).map_err(|source| FormatError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// 17 significant digits in scientific notation.
pub fn format_f64(v: f64) -> Result<String, FormatError> {
    if !v.is_finite() {
        return Err(FormatError::NonFinite(v));
    }
    Ok(format!("{v:.16e}"))
}

/// Renders a JSON value as a document: one key per line, arrays of scalars on
/// a single line, arrays of arrays one row per line.
pub fn write_document(value: &Value) -> Result<String, FormatError> {
    let mut out = String::new();
    write_value(&mut out, value, 0)?;
    out.push('\n');
    Ok(out)
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn write_value(out: &mut String, value: &Value, indent: usize) -> Result<(), FormatError> {
    let pad = |n: usize| "  ".repeat(n);
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_f64(n.as_f64().expect("f64"))?);
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s)?),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) if items.iter().all(is_scalar) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(out, item, indent)?;
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(out, item, indent + 1)?;
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            let _ = write!(out, "{}]", pad(indent));
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (i, (k, v)) in map.iter().enumerate() {
                let _ = write!(out, "{}{}: ", pad(indent + 1), serde_json::to_string(k)?);
                write_value(out, v, indent + 1)?;
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            let _ = write!(out, "{}}}", pad(indent));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXAMPLE: &str = r#"{
        "states": ["a", "b"],
        "lower": [[0, 0.2], [0.2, 0]],
        "upper": [[0, 0.9], [0.9, 0]],
        "marginal": [1, 1],
        "q": [1, 0],
        "f": [0, 1],
        "steps": 2
    }"#;

    #[test]
    fn parses_example() {
        let inst = Instance::parse(EXAMPLE).unwrap();
        assert_eq!(inst.steps, 2);
        assert_eq!(inst.bounds.upper(0, 1), 0.9);
        assert_eq!(inst.bounds.states().label(1), "b");
        assert!(inst.bounds.validate().is_valid());
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(Instance::parse("{"), Err(FormatError::Parse(_))));
        let bad = EXAMPLE.replace("\"marginal\": [1, 1]", "\"marginal\": [1, 1, 1]");
        assert!(matches!(Instance::parse(&bad), Err(FormatError::Model(_))));
        let bad = EXAMPLE.replace("\"steps\"", "\"stepz\"");
        assert!(Instance::parse(&bad).is_err());
    }

    #[test]
    fn document_layout() {
        let inst = Instance::parse(EXAMPLE).unwrap();
        let doc = inst.to_document().unwrap();
        assert!(doc.contains("\"steps\": 2"));
        assert!(doc.contains("[0.0000000000000000e0, 2.0000000000000001e-1]"));
        assert_eq!(Instance::parse(&doc).unwrap(), inst);
        assert!(format_f64(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn numbers_round_trip_bit_exactly(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let text = format_f64(v).unwrap();
            let back: f64 = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }

        #[test]
        fn instances_round_trip(seed in 0u64..500, s in 2usize..7) {
            let inst = crate::generate::generate_instance(&crate::generate::GenParams {
                vertices: s, seed, ..Default::default()
            }).unwrap();
            let back = Instance::parse(&inst.to_document().unwrap()).unwrap();
            prop_assert_eq!(back, inst);
        }
    }
}
