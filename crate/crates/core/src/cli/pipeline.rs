//! Trace scoring and evaluation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{g_nll, score_samples, Measure};
use crate::eval::{auroc, rejection_accuracy, F1Config, LabeledScore};
use crate::semcluster::{cluster, cluster_with_oracle, ClusterStrategy, HttpOracle};
use crate::traceio::{format_sig6, GenerationRecord, ResultRow};

/// Name of the labeler derived from the SQuAD F1 threshold.
pub const F1_LABELER: &str = "squad_f1";

#[derive(Debug, Clone)]
pub struct ScoreOptions {
    pub measures: Vec<Measure>,
    pub cluster: ClusterStrategy,
    pub f1: F1Config,
}

/// Correctness labels of a record: the external ones plus the F1 label of
/// the reference answer when gold answers exist.
pub fn record_labels(record: &GenerationRecord, f1: &F1Config) -> BTreeMap<String, bool> {
    let mut labels = record.external_labels.clone().unwrap_or_default();
    if !record.gold_answers.is_empty() {
        labels.insert(F1_LABELER.to_owned(), f1.is_correct(&record.reference.text, &record.gold_answers));
    }
    labels
}

pub fn labels_from_traces(records: &[GenerationRecord], f1: &F1Config) -> HashMap<String, BTreeMap<String, bool>> {
    records.iter().map(|r| (r.id.clone(), record_labels(r, f1))).collect()
}

/// Semantic cluster ids of every record's samples, in record order.
pub fn cluster_records(records: &[GenerationRecord], strategy: &ClusterStrategy) -> Result<Vec<Vec<usize>>> {
    let oracle = match strategy {
        ClusterStrategy::Entailment(config) => Some(HttpOracle::new(config)),
        _ => None,
    };
    records
        .par_iter()
        .map(|r| {
            let answers = r.sample_texts();
            if answers.is_empty() {
                return Ok(Vec::new());
            }
            match &oracle {
                Some(oracle) => cluster_with_oracle(&answers, oracle, Some(&r.question)),
                None => cluster(&answers, strategy),
            }
        })
        .collect()
}

/// One row per (record, measure), records in input order.
pub fn score_records(records: &[GenerationRecord], options: &ScoreOptions) -> Result<Vec<ResultRow>> {
    if options.measures.is_empty() {
        return Err(Error::Config("no measures requested".into()));
    }
    if let Some(m) = options.measures.iter().find(|m| m.needs_samples()) {
        if let Some(r) = records.iter().find(|r| r.samples.is_empty()) {
            return Err(Error::Config(format!("{m} requires sampled answers but record `{}` has none", r.id)));
        }
    }
    let clusters = if options.measures.iter().any(|m| m.needs_clusters()) {
        Some(cluster_records(records, &options.cluster)?)
    } else {
        None
    };

    let mut rows = Vec::with_capacity(records.len() * options.measures.len());
    for (i, record) in records.iter().enumerate() {
        let labels = record_labels(record, &options.f1);
        let ids = clusters.as_ref().map(|c| c[i].clone());
        let sample_set = if record.samples.is_empty() { None } else { Some(record.sample_set(ids)?) };
        for &measure in &options.measures {
            let value = match measure {
                Measure::Gnll => g_nll(&record.reference_sequence()?).value,
                m => score_samples(m, sample_set.as_ref().expect("checked above"))?.value,
            };
            rows.push(ResultRow { id: record.id.clone(), measure, value, labels: labels.clone() });
        }
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
struct ClusterLine<'a> {
    id: &'a str,
    cluster_ids: &'a [usize],
}

pub fn write_clusters(records: &[GenerationRecord], clusters: &[Vec<usize>], mut out: impl Write) -> Result<()> {
    for (r, ids) in records.iter().zip(clusters) {
        serde_json::to_writer(&mut out, &ClusterLine { id: &r.id, cluster_ids: ids }).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Scores of one dataset, e.g. one results file.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub rows: Vec<ResultRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub dataset: String,
    pub labeler: String,
    pub measure: Measure,
    pub n: usize,
    pub auroc: f64,
    pub rejection_accuracy: f64,
}

pub const MEAN_DATASET: &str = "mean";

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub datasets: Vec<String>,
    /// Per-dataset rows followed by the unweighted mean over datasets.
    pub rows: Vec<EvalRow>,
}

fn row_labels<'a>(
    labels: Option<&'a HashMap<String, BTreeMap<String, bool>>>,
    row: &'a ResultRow,
) -> &'a BTreeMap<String, bool> {
    labels.map_or(&row.labels, |l| &l[&row.id])
}

/// AUROC and rejection accuracy per (dataset, labeler, measure).
///
/// Labels come from `labels` when given (every scored id must be labeled
/// and every labeled id scored in some dataset), otherwise from the label columns of the result rows.
pub fn evaluate(
    datasets: &[Dataset],
    labels: Option<&HashMap<String, BTreeMap<String, bool>>>,
    keep_fraction: f64,
) -> Result<EvaluationReport> {
    if let Some(labels) = labels {
        let scored: BTreeSet<&str> = datasets.iter().flat_map(|d| d.rows.iter().map(|r| r.id.as_str())).collect();
        if let Some(id) = labels.keys().map(String::as_str).find(|id| !scored.contains(id)) {
            return Err(Error::Evaluation(format!("labeled record `{id}` has no scores")));
        }
    }
    let mut rows = Vec::new();
    for ds in datasets {
        let ids: BTreeSet<&str> = ds.rows.iter().map(|r| r.id.as_str()).collect();
        if let Some(labels) = labels {
            let label_ids: BTreeSet<&str> = labels.keys().map(String::as_str).collect();
            if let Some(id) = ids.difference(&label_ids).next() {
                return Err(Error::Evaluation(format!("{}: scored record `{id}` has no labels", ds.name)));
            }
        }
        let label_of = |row| row_labels(labels, row);
        if let Some(row) = ds.rows.iter().find(|r| label_of(r).is_empty()) {
            return Err(Error::Evaluation(format!("{}: record `{}` is not labeled", ds.name, row.id)));
        }
        let measures: BTreeSet<Measure> = ds.rows.iter().map(|r| r.measure).collect();
        let labelers: BTreeSet<&String> = ds.rows.iter().flat_map(|r| label_of(r).keys()).collect();
        for measure in Measure::ALL.iter().filter(|m| measures.contains(m)) {
            for labeler in &labelers {
                let items: Vec<LabeledScore> = ds
                    .rows
                    .iter()
                    .filter(|r| r.measure == *measure)
                    .filter_map(|r| label_of(r).get(*labeler).map(|c| LabeledScore::new(r.value, *c)))
                    .collect();
                let ctx = |e: Error| Error::Evaluation(format!("{} / {labeler} / {measure}: {e}", ds.name));
                rows.push(EvalRow {
                    dataset: ds.name.clone(),
                    labeler: (*labeler).clone(),
                    measure: *measure,
                    n: items.len(),
                    auroc: auroc(&items).map_err(ctx)?,
                    rejection_accuracy: rejection_accuracy(&items, keep_fraction).map_err(ctx)?,
                });
            }
        }
    }

    let mut groups: BTreeMap<(String, Measure), Vec<&EvalRow>> = BTreeMap::new();
    for r in &rows {
        groups.entry((r.labeler.clone(), r.measure)).or_default().push(r);
    }
    let means: Vec<EvalRow> = groups
        .into_iter()
        .map(|((labeler, measure), rs)| {
            let k = rs.len() as f64;
            EvalRow {
                dataset: MEAN_DATASET.to_owned(),
                labeler,
                measure,
                n: rs.iter().map(|r| r.n).sum(),
                auroc: rs.iter().map(|r| r.auroc).sum::<f64>() / k,
                rejection_accuracy: rs.iter().map(|r| r.rejection_accuracy).sum::<f64>() / k,
            }
        })
        .collect();
    rows.extend(means);
    Ok(EvaluationReport { datasets: datasets.iter().map(|d| d.name.clone()).collect(), rows })
}

impl EvaluationReport {
    pub fn get(&self, dataset: &str, labeler: &str, measure: Measure) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.dataset == dataset && r.labeler == labeler && r.measure == measure)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["dataset", "labeler", "measure", "n", "auroc", "rejection_accuracy"])?;
        for r in &self.rows {
            w.write_record([
                r.dataset.clone(),
                r.labeler.clone(),
                r.measure.to_string(),
                r.n.to_string(),
                format_sig6(r.auroc),
                format_sig6(r.rejection_accuracy),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Plain-text tables: measures as rows, `labeler/dataset` as columns.
    pub fn render_table(&self, keep_fraction: f64) -> String {
        let labelers: BTreeSet<&str> = self.rows.iter().map(|r| r.labeler.as_str()).collect();
        let mut columns: Vec<(&str, &str)> = Vec::new();
        for l in &labelers {
            for d in self.datasets.iter().map(String::as_str).chain([MEAN_DATASET]) {
                columns.push((l, d));
            }
        }
        let measures: Vec<Measure> =
            Measure::ALL.into_iter().filter(|m| self.rows.iter().any(|r| r.measure == *m)).collect();
        let mut out = String::new();
        type Metric = fn(&EvalRow) -> f64;
        let sections: [(&str, Metric); 2] = [("AUROC", |r| r.auroc), ("Rejection accuracy", |r| r.rejection_accuracy)];
        for (title, metric) in sections {
            if title == "AUROC" {
                let _ = writeln!(out, "{title}");
            } else {
                let _ = writeln!(out, "\n{title} (keep {:.0}%)", keep_fraction * 100.0);
            }
            let _ = write!(out, "{:<8}", "measure");
            for (l, d) in &columns {
                let _ = write!(out, " {:>16}", format!("{l}/{d}"));
            }
            out.push('\n');
            for m in &measures {
                let _ = write!(out, "{:<8}", m.name());
                for (l, d) in &columns {
                    let cell = self.get(d, l, *m).map_or("-".to_owned(), |r| format!("{:.3}", metric(r)));
                    let _ = write!(out, " {cell:>16}");
                }
                out.push('\n');
            }
        }
        out
    }
}
