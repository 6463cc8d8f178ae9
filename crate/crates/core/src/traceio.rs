//! Generation traces in, per-record scores out.
//!
//! A trace file is JSONL, one [`GenerationRecord`] per line:
//!
//! ```json
//! {"schema": "seqscore/1", "id": "tqa-17", "question": "Capital of France?",
//!  "gold_answers": ["Paris"],
//!  "reference": {"text": "Paris", "token_log_probs": [-0.05, -0.01],
//!                "decode": {"kind": "greedy"}},
//!  "samples": [{"text": "Paris", "token_log_probs": [-0.1], "temperature": 1.0}],
//!  "external_labels": {"llm_judge": true}}
//! ```
//!
//! `tokens` on the reference and `samples`/`external_labels` are optional.
//! Text is what gets clustered; the log-probabilities are what get scored.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Measure, SampleSet};
use crate::seqmodel::{ScoredSequence, TokenId};

pub const SCHEMA_VERSION: &str = "seqscore/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DecodeMethod {
    Greedy,
    Beam { width: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<TokenId>>,
    pub token_log_probs: Vec<f64>,
    pub decode: DecodeMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub text: String,
    pub token_log_probs: Vec<f64>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub schema: String,
    pub id: String,
    pub question: String,
    pub gold_answers: Vec<String>,
    pub reference: Reference,
    #[serde(default)]
    pub samples: Vec<Sample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_labels: Option<BTreeMap<String, bool>>,
}

impl GenerationRecord {
    pub fn reference_sequence(&self) -> Result<ScoredSequence> {
        let lps = self.reference.token_log_probs.clone();
        match &self.reference.tokens {
            Some(tokens) => ScoredSequence::new(tokens.clone(), lps),
            None => ScoredSequence::from_token_log_probs(lps),
        }
    }

    pub fn sample_texts(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.text.clone()).collect()
    }

    pub fn sample_set(&self, cluster_ids: Option<Vec<usize>>) -> Result<SampleSet> {
        let samples = self
            .samples
            .iter()
            .map(|s| ScoredSequence::from_token_log_probs(s.token_log_probs.clone()))
            .collect::<Result<Vec<_>>>()?;
        match cluster_ids {
            Some(ids) => SampleSet::with_clusters(samples, ids),
            None => SampleSet::new(samples),
        }
    }

    fn validate(&self, line: usize) -> Result<()> {
        let fail = |field: String, message: String| Err(Error::Parse { line, field, message });
        if self.schema != SCHEMA_VERSION {
            return fail("schema".into(), format!("unsupported schema `{}`", self.schema));
        }
        check_log_probs(&self.reference.token_log_probs, "reference.token_log_probs", line)?;
        if let Some(tokens) = &self.reference.tokens {
            if tokens.len() != self.reference.token_log_probs.len() {
                return fail(
                    "reference.tokens".into(),
                    format!("{} tokens but {} log-probs", tokens.len(), self.reference.token_log_probs.len()),
                );
            }
        }
        if let DecodeMethod::Beam { width: 0 } = self.reference.decode {
            return fail("reference.decode".into(), "beam width must be at least 1".into());
        }
        for (i, s) in self.samples.iter().enumerate() {
            check_log_probs(&s.token_log_probs, &format!("samples[{i}].token_log_probs"), line)?;
            if s.temperature.is_nan() || s.temperature <= 0.0 {
                return fail(
                    format!("samples[{i}].temperature"),
                    format!("temperature {} must be positive", s.temperature),
                );
            }
        }
        Ok(())
    }
}

fn check_log_probs(lps: &[f64], field: &str, line: usize) -> Result<()> {
    let fail = |message: String| Err(Error::Parse { line, field: field.to_owned(), message });
    if lps.is_empty() {
        return fail("empty log-prob list".into());
    }
    if lps.iter().any(|lp| *lp > 0.0) {
        return fail("log-prob > 0".into());
    }
    Ok(())
}

fn json_error_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    msg.split('`').nth(1).map(str::to_owned).unwrap_or_else(|| "<record>".into())
}

/// Parses JSONL trace records. Blank lines are skipped; duplicate ids are
/// rejected.
pub fn parse_traces(reader: impl Read) -> Result<Vec<GenerationRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GenerationRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            field: json_error_field(&e),
            message: e.to_string(),
        })?;
        record.validate(line_no)?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::Parse {
                line: line_no,
                field: "id".into(),
                message: format!("duplicate id `{}`", record.id),
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_traces(path: impl AsRef<Path>) -> Result<Vec<GenerationRecord>> {
    parse_traces(File::open(path)?)
}

pub fn write_traces(records: &[GenerationRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// One score for one record, with the correctness labels known for it.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub id: String,
    pub measure: Measure,
    pub value: f64,
    pub labels: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultFormat {
    Csv,
    Jsonl,
}

impl ResultFormat {
    /// `.jsonl`/`.json` map to JSONL, anything else to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "json") => ResultFormat::Jsonl,
            _ => ResultFormat::Csv,
        }
    }
}

impl FromStr for ResultFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ResultFormat::Csv),
            "jsonl" => Ok(ResultFormat::Jsonl),
            other => Err(Error::Config(format!("unknown result format `{other}`"))),
        }
    }
}

/// Renders `x` with 6 significant digits, like C's `%.6g`.
pub fn format_sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn labeler_columns(rows: &[ResultRow]) -> Vec<String> {
    let set: BTreeSet<&String> = rows.iter().flat_map(|r| r.labels.keys()).collect();
    set.into_iter().cloned().collect()
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    id: String,
    measure: Measure,
    value: String,
    labels: BTreeMap<String, bool>,
}

/// Writes long-form results: `id, measure, value`, then one column per
/// labeler in lexicographic order.
pub fn write_results_to(rows: &[ResultRow], out: impl Write, format: ResultFormat) -> Result<()> {
    match format {
        ResultFormat::Csv => {
            let labelers = labeler_columns(rows);
            let mut w = csv::Writer::from_writer(out);
            let mut header = vec!["id".to_owned(), "measure".to_owned(), "value".to_owned()];
            header.extend(labelers.iter().cloned());
            w.write_record(&header)?;
            for r in rows {
                let mut record = vec![r.id.clone(), r.measure.to_string(), format_sig6(r.value)];
                record.extend(labelers.iter().map(|l| r.labels.get(l).map_or(String::new(), |b| b.to_string())));
                w.write_record(&record)?;
            }
            w.flush()?;
        }
        ResultFormat::Jsonl => {
            let mut out = BufWriter::new(out);
            for r in rows {
                let row = JsonRow {
                    id: r.id.clone(),
                    measure: r.measure,
                    value: format_sig6(r.value),
                    labels: r.labels.clone(),
                };
                serde_json::to_writer(&mut out, &row).map_err(std::io::Error::from)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

pub fn write_results(rows: &[ResultRow], path: impl AsRef<Path>, format: ResultFormat) -> Result<()> {
    write_results_to(rows, File::create(path)?, format)
}

fn parse_value(s: &str, line: usize) -> Result<f64> {
    s.parse::<f64>().map_err(|e| Error::Parse { line, field: "value".into(), message: e.to_string() })
}

pub fn parse_results(reader: impl Read, format: ResultFormat) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    match format {
        ResultFormat::Csv => {
            let mut r = csv::Reader::from_reader(reader);
            let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
            if header.len() < 3 || header[..3] != ["id", "measure", "value"] {
                return Err(Error::Parse {
                    line: 1,
                    field: "header".into(),
                    message: "expected id,measure,value".into(),
                });
            }
            for (i, rec) in r.records().enumerate() {
                let line = i + 2;
                let rec = rec?;
                let measure = rec[1].parse::<Measure>().map_err(|e| Error::Parse {
                    line,
                    field: "measure".into(),
                    message: e.to_string(),
                })?;
                let mut labels = BTreeMap::new();
                for (name, cell) in header[3..].iter().zip(rec.iter().skip(3)) {
                    match cell {
                        "" => {}
                        "true" => {
                            labels.insert(name.clone(), true);
                        }
                        "false" => {
                            labels.insert(name.clone(), false);
                        }
                        other => {
                            return Err(Error::Parse {
                                line,
                                field: name.clone(),
                                message: format!("bad label `{other}`"),
                            })
                        }
                    }
                }
                rows.push(ResultRow { id: rec[0].to_owned(), measure, value: parse_value(&rec[2], line)?, labels });
            }
        }
        ResultFormat::Jsonl => {
            for (i, line) in BufReader::new(reader).lines().enumerate() {
                let line_no = i + 1;
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let row: JsonRow = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    line: line_no,
                    field: json_error_field(&e),
                    message: e.to_string(),
                })?;
                rows.push(ResultRow {
                    value: parse_value(&row.value, line_no)?,
                    id: row.id,
                    measure: row.measure,
                    labels: row.labels,
                });
            }
        }
    }
    Ok(rows)
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    parse_results(File::open(path)?, ResultFormat::from_path(path))
}
