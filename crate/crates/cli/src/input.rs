//! Reading study counts or a p-value triple from JSON or one-row CSV.

use std::fs;
use std::io::Read;

use serde_json::{Map, Value};
use tnswac::study_model::COUNT_FIELDS;
use tnswac::{PValueSet, StudyCounts};

use crate::CliError;

const PVALUE_FIELDS: [&str; 3] = ["p_i", "p_ii", "p_iii"];

/// What `analyze` can be fed: raw counts, or p-values computed elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisInput {
    Counts(StudyCounts),
    PValues(PValueSet),
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

/// `-` reads standard input, text starting with `{` is inline JSON, anything
/// else is a file path.
pub fn read_source(source: &str) -> Result<String, CliError> {
    if source == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| schema("--input", format!("cannot read standard input: {e}")))?;
        return Ok(s);
    }
    if source.trim_start().starts_with('{') {
        return Ok(source.to_string());
    }
    fs::read_to_string(source)
        .map_err(|e| schema("--input", format!("cannot read `{source}`: {e}")))
}

/// Parses JSON objects as they are and a header line plus one data row as
/// CSV; CSV values are kept as strings.
fn parse_fields(text: &str) -> Result<Map<String, Value>, CliError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        return match serde_json::from_str::<Value>(trimmed) {
            Ok(Value::Object(map)) => Ok(map),
            Ok(_) => Err(schema("--input", "JSON input must be an object")),
            Err(e) => Err(schema("--input", format!("malformed JSON: {e}"))),
        };
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(trimmed.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| schema("--input", format!("malformed CSV header: {e}")))?
        .clone();
    let mut rows = reader.records();
    let row = match rows.next() {
        Some(Ok(r)) => r,
        Some(Err(e)) => return Err(schema("--input", format!("malformed CSV row: {e}"))),
        None => return Err(schema("--input", "CSV input has a header but no data row")),
    };
    if rows.next().is_some() {
        return Err(schema(
            "--input",
            "CSV input must contain exactly one data row",
        ));
    }
    let mut map = Map::new();
    for (h, v) in headers.iter().zip(row.iter()) {
        if map
            .insert(h.to_string(), Value::String(v.to_string()))
            .is_some()
        {
            return Err(schema(h, "duplicate column"));
        }
    }
    Ok(map)
}

fn check_keys(map: &Map<String, Value>, expected: &[&str]) -> Result<(), CliError> {
    if let Some(k) = map.keys().find(|k| !expected.contains(&k.as_str())) {
        return Err(schema(
            k.as_str(),
            format!("unknown field; expected {}", expected.join(", ")),
        ));
    }
    if let Some(k) = expected.iter().find(|k| !map.contains_key(**k)) {
        return Err(schema(*k, "missing field"));
    }
    Ok(())
}

fn as_count(field: &str, v: &Value) -> Result<u64, CliError> {
    let parsed = match v {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.parse::<u64>().ok(),
        _ => None,
    };
    parsed.ok_or_else(|| schema(field, format!("must be a non-negative integer, got {v}")))
}

fn as_probability(field: &str, v: &Value) -> Result<f64, CliError> {
    let parsed = match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.parse::<f64>().ok(),
        _ => None,
    };
    match parsed {
        Some(p) if (0.0..=1.0).contains(&p) => Ok(p),
        _ => Err(schema(
            field,
            format!("must be a number in [0, 1], got {v}"),
        )),
    }
}

fn counts_from(map: &Map<String, Value>) -> Result<StudyCounts, CliError> {
    check_keys(map, &COUNT_FIELDS)?;
    let mut cells = [0u64; 6];
    for (cell, field) in cells.iter_mut().zip(COUNT_FIELDS) {
        *cell = as_count(field, &map[field])?;
    }
    Ok(StudyCounts::from_array(cells))
}

pub fn parse_counts(text: &str) -> Result<StudyCounts, CliError> {
    counts_from(&parse_fields(text)?)
}

pub fn parse_analysis_input(text: &str) -> Result<AnalysisInput, CliError> {
    let map = parse_fields(text)?;
    if map.keys().any(|k| k.starts_with("p_")) {
        check_keys(&map, &PVALUE_FIELDS)?;
        let [a, b, c] = PVALUE_FIELDS.map(|f| as_probability(f, &map[f]));
        let set =
            PValueSet::from_triple(a?, b?, c?).map_err(|e| schema("--input", e.to_string()))?;
        return Ok(AnalysisInput::PValues(set));
    }
    counts_from(&map).map(AnalysisInput::Counts)
}
