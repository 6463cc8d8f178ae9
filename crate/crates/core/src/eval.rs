//! Correctness labels and the metrics used to compare uncertainty measures.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// An uncertainty score paired with whether the answer was correct.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledScore {
    pub score: f64,
    pub correct: bool,
}

impl LabeledScore {
    pub fn new(score: f64, correct: bool) -> Self {
        Self { score, correct }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Config {
    pub threshold: f64,
}

impl Default for F1Config {
    fn default() -> Self {
        Self { threshold: 0.5 }
    }
}

impl F1Config {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Config(format!("F1 threshold {threshold} outside [0, 1]")));
        }
        Ok(Self { threshold })
    }

    /// An answer counts as correct when its F1 strictly exceeds the threshold.
    pub fn is_correct(&self, prediction: &str, gold: &[String]) -> bool {
        squad_f1(prediction, gold) > self.threshold
    }
}

/// SQuAD answer normalization: lowercase, drop ASCII punctuation, drop the
/// articles `a`/`an`/`the`, collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    normalized_tokens(text).join(" ")
}

fn normalized_tokens(text: &str) -> Vec<String> {
    let stripped: String = text.to_lowercase().chars().filter(|c| !c.is_ascii_punctuation()).collect();
    stripped.split_whitespace().filter(|w| !matches!(*w, "a" | "an" | "the")).map(str::to_owned).collect()
}

fn token_f1(pred: &[String], gold: &[String]) -> f64 {
    match (pred.is_empty(), gold.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for g in gold {
        *counts.entry(g).or_default() += 1;
    }
    let mut overlap = 0usize;
    for p in pred {
        if let Some(c) = counts.get_mut(p.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred.len() as f64;
    let recall = overlap as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Token-level F1 of `prediction` against the best-matching gold answer.
/// Returns 0 when `gold` is empty.
pub fn squad_f1(prediction: &str, gold: &[String]) -> f64 {
    let pred = normalized_tokens(prediction);
    gold.iter().map(|g| token_f1(&pred, &normalized_tokens(g))).fold(0.0, f64::max)
}

/// Probability that a random incorrect item scores strictly higher than a
/// random correct one, ties counting one half.
///
/// Computed exactly from mid-ranks (Mann-Whitney U), `O(n log n)`.
pub fn auroc(items: &[LabeledScore]) -> Result<f64> {
    if let Some(item) = items.iter().find(|i| !i.score.is_finite()) {
        return Err(Error::Evaluation(format!("non-finite score {}", item.score)));
    }
    let n_incorrect = items.iter().filter(|i| !i.correct).count();
    let n_correct = items.len() - n_incorrect;
    if n_incorrect == 0 || n_correct == 0 {
        return Err(Error::Evaluation(format!(
            "AUROC needs both classes ({n_correct} correct, {n_incorrect} incorrect)"
        )));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|a, b| items[*a].score.total_cmp(&items[*b].score));

    // sum of 1-based mid-ranks over incorrect items
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && items[order[j + 1]].score == items[order[i]].score {
            j += 1;
        }
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        let incorrect_in_group = order[i..=j].iter().filter(|k| !items[**k].correct).count();
        rank_sum += mid_rank * incorrect_in_group as f64;
        i = j + 1;
    }
    let (ni, nc) = (n_incorrect as f64, n_correct as f64);
    let u = rank_sum - ni * (ni + 1.0) / 2.0;
    Ok(u / (ni * nc))
}

/// Accuracy on the `floor(keep_fraction · N)` least uncertain items (at
/// least one). Equal scores keep their input order.
pub fn rejection_accuracy(items: &[LabeledScore], keep_fraction: f64) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::Evaluation("rejection accuracy of an empty set".into()));
    }
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::Evaluation(format!("keep fraction {keep_fraction} outside (0, 1]")));
    }
    if items.iter().any(|i| i.score.is_nan()) {
        return Err(Error::Evaluation("NaN score".into()));
    }
    let mut sorted: Vec<&LabeledScore> = items.iter().collect();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));
    let keep = ((keep_fraction * items.len() as f64).floor() as usize).max(1);
    let correct = sorted[..keep].iter().filter(|i| i.correct).count();
    Ok(correct as f64 / keep as f64)
}
