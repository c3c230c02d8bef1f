//! JSON reading and writing of instances and solve results.
//!
//! Instance documents look like
//! `{"n": 1, "r": 1, "t": [2], "blocks": [[[1, 2]]], "b_up": [3], "b_low": [2]}`
//! with an optional `"c"` array. Each block is a list of its `r` rows.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{InstanceError, Matrix, NFoldInstance, SolveOutcome, SolveStats, Status};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Syntax or schema problem; serde's message names the offending field.
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field `{field}`: {message}")]
    Field {
        field: &'static str,
        message: String,
    },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

impl From<serde_json::Error> for ParseError {
    fn from(e: serde_json::Error) -> Self {
        let full = e.to_string();
        // serde_json appends " at line X column Y"; we report those separately.
        let message = match full.rfind(" at line ") {
            Some(pos) => full[..pos].to_string(),
            None => full,
        };
        ParseError::Syntax {
            line: e.line(),
            column: e.column(),
            message,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub n: usize,
    pub r: usize,
    pub t: Vec<usize>,
    pub blocks: Vec<Vec<Vec<i64>>>,
    pub b_up: Vec<i64>,
    pub b_low: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<i64>>,
}

impl InstanceDoc {
    pub fn from_instance(inst: &NFoldInstance) -> Self {
        Self {
            n: inst.n(),
            r: inst.r,
            t: inst.widths(),
            blocks: inst.blocks.iter().map(Matrix::to_rows).collect(),
            b_up: inst.b_up.clone(),
            b_low: inst.b_low.clone(),
            c: inst.c.clone(),
        }
    }

    /// Converts the document to an instance, checking the redundant `n`, `r`
    /// and `t` fields against the block data.
    pub fn into_instance(self) -> Result<NFoldInstance, ParseError> {
        if self.blocks.len() != self.n {
            return Err(ParseError::Field {
                field: "blocks",
                message: format!("{} blocks given but n = {}", self.blocks.len(), self.n),
            });
        }
        if self.t.len() != self.n {
            return Err(ParseError::Field {
                field: "t",
                message: format!("{} widths given but n = {}", self.t.len(), self.n),
            });
        }
        let mut blocks = Vec::with_capacity(self.n);
        for (k, (rows, &width)) in self.blocks.iter().zip(&self.t).enumerate() {
            if rows.len() != self.r {
                return Err(ParseError::Field {
                    field: "blocks",
                    message: format!("block {k} has {} rows but r = {}", rows.len(), self.r),
                });
            }
            let m = Matrix::from_rows(rows, width).map_err(|e| ParseError::Field {
                field: "blocks",
                message: format!("block {k}: {e}"),
            })?;
            blocks.push(m);
        }
        Ok(NFoldInstance {
            r: self.r,
            blocks,
            b_up: self.b_up,
            b_low: self.b_low,
            c: self.c,
        })
    }
}

pub fn parse_instance(text: &str) -> Result<NFoldInstance, ParseError> {
    let doc: InstanceDoc = serde_json::from_str(text)?;
    doc.into_instance()
}

pub fn instance_to_json(inst: &NFoldInstance) -> String {
    serde_json::to_string_pretty(&InstanceDoc::from_instance(inst))
        .expect("instance documents always serialize")
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<NFoldInstance, ParseError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ParseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_instance(&text)
}

pub fn write_instance(path: impl AsRef<Path>, inst: &NFoldInstance) -> std::io::Result<()> {
    fs::write(path, instance_to_json(inst) + "\n")
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultDoc {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<i64>,
    pub stats: SolveStats,
}

impl From<&SolveOutcome> for ResultDoc {
    fn from(out: &SolveOutcome) -> Self {
        Self {
            status: out.status,
            x: out.solution.as_ref().map(|s| s.x.clone()),
            objective: out.objective(),
            stats: out.stats.clone(),
        }
    }
}

pub fn result_to_json(out: &SolveOutcome) -> String {
    serde_json::to_string_pretty(&ResultDoc::from(out)).expect("results always serialize")
}

pub fn write_result(path: impl AsRef<Path>, out: &SolveOutcome) -> std::io::Result<()> {
    fs::write(path, result_to_json(out) + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        r#"{"n": 1, "r": 1, "t": [2], "blocks": [[[1, 2]]], "b_up": [3], "b_low": [2]}"#;

    #[test]
    fn parses_minimal_document() {
        let inst = parse_instance(MINIMAL).unwrap();
        assert_eq!(inst.n(), 1);
        assert_eq!(inst.blocks[0].column(1), &[2]);
        assert_eq!(inst.c, None);
    }

    #[test]
    fn missing_field_is_named() {
        let text = r#"{"n": 1, "r": 1, "t": [2], "blocks": [[[1, 2]]], "b_up": [3]}"#;
        let err = parse_instance(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("b_low"), "{msg}");
        assert!(matches!(err, ParseError::Syntax { line: 1, .. }));
    }

    #[test]
    fn ragged_rows_rejected() {
        let text = r#"{"n": 1, "r": 1, "t": [2], "blocks": [[[1]]], "b_up": [3], "b_low": [2]}"#;
        assert!(matches!(
            parse_instance(text),
            Err(ParseError::Field {
                field: "blocks",
                ..
            })
        ));
    }

    #[test]
    fn zero_row_blocks_keep_their_width() {
        let text = r#"{"n": 1, "r": 0, "t": [3], "blocks": [[]], "b_up": [], "b_low": [2]}"#;
        let inst = parse_instance(text).unwrap();
        assert_eq!(inst.blocks[0].cols(), 3);
        assert_eq!(parse_instance(&instance_to_json(&inst)).unwrap(), inst);
    }
}
