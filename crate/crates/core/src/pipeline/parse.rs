//! Extraction of answers and programs from model responses.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::families::{FamilyId, SemanticSolution};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("no JSON object found in the response")]
    NoJsonFound,
    #[error("JSON does not match the {family} answer schema: {detail}")]
    SchemaMismatch { family: FamilyId, detail: String },
    #[error("no fenced code block found in the response")]
    FormatError,
}

/// A solution read from model output, with the cost the model claims for it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    pub solution: SemanticSolution,
    pub claimed_cost: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramSource {
    pub code: String,
    pub language: String,
}

/// Top-level JSON objects in `text`, in order of appearance. Objects nested
/// inside a found object are not reported separately.
pub fn json_objects(text: &str) -> Vec<Value> {
    let mut found = Vec::new();
    let mut i = 0;
    while let Some(off) = text[i..].find('{') {
        let start = i + off;
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(v @ Value::Object(_))) => {
                i = start + stream.byte_offset();
                found.push(v);
            }
            _ => i = start + 1,
        }
    }
    found
}

/// Reads the last JSON object of a response as a family answer. Objects of
/// the form `{"objective_cost": .., "solution_json": ..}` are unwrapped and
/// the claimed cost kept for the record only.
pub fn parse_solution_json(text: &str, family: FamilyId) -> Result<ParsedAnswer, ParseError> {
    let last = json_objects(text).pop().ok_or(ParseError::NoJsonFound)?;
    interpret(&last, family)
}

pub fn interpret(value: &Value, family: FamilyId) -> Result<ParsedAnswer, ParseError> {
    let (payload, claimed_cost) = match value.get("solution_json") {
        Some(inner) => (inner, value.get("objective_cost").and_then(Value::as_i64)),
        None => (value, None),
    };
    let solution = SemanticSolution::from_json(family, payload).map_err(|e| ParseError::SchemaMismatch {
        family,
        detail: e.0,
    })?;
    Ok(ParsedAnswer { solution, claimed_cost })
}

/// Body of the last closed fenced code block.
pub fn extract_program(text: &str) -> Result<ProgramSource, ParseError> {
    let mut last = None;
    let mut open: Option<(String, Vec<&str>)> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        match open.take() {
            None => {
                if let Some(tag) = trimmed.strip_prefix("```") {
                    open = Some((tag.trim().to_string(), Vec::new()));
                }
            }
            Some((tag, mut body)) => {
                if trimmed.starts_with("```") {
                    let mut code = body.join("\n");
                    code.push('\n');
                    last = Some(ProgramSource { code, language: tag });
                } else {
                    body.push(line);
                    open = Some((tag, body));
                }
            }
        }
    }
    last.ok_or(ParseError::FormatError)
}
