//! Uncertainty measures. Higher values mean more uncertainty.
//!
//! - `G-NLL`: negative log-likelihood of the greedy (or best-of-beam)
//!   sequence, the zero-one score measure.
//! - `PE` / `LN-PE`: Monte Carlo predictive entropy over sampled sequences.
//! - `SE` / `LN-SE`: entropy over semantic clusters, each cluster weighted by
//!   its share of the sampled likelihood mass.
//! - `D-SE`: entropy of the cluster frequencies, ignoring likelihoods.
//!
//! The length-normalized variants use the per-token mean log-probability in
//! place of the sequence log-probability.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::seqmodel::ScoredSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "G-NLL")]
    Gnll,
    #[serde(rename = "PE")]
    Pe,
    #[serde(rename = "LN-PE")]
    LnPe,
    #[serde(rename = "SE")]
    Se,
    #[serde(rename = "LN-SE")]
    LnSe,
    #[serde(rename = "D-SE")]
    Dse,
}

impl Measure {
    pub const ALL: [Measure; 6] = [Measure::Pe, Measure::LnPe, Measure::Se, Measure::LnSe, Measure::Dse, Measure::Gnll];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Gnll => "G-NLL",
            Measure::Pe => "PE",
            Measure::LnPe => "LN-PE",
            Measure::Se => "SE",
            Measure::LnSe => "LN-SE",
            Measure::Dse => "D-SE",
        }
    }

    pub fn needs_samples(self) -> bool {
        self != Measure::Gnll
    }

    pub fn needs_clusters(self) -> bool {
        matches!(self, Measure::Se | Measure::LnSe | Measure::Dse)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).map(|c| c.to_ascii_uppercase()).collect();
        Ok(match key.as_str() {
            "GNLL" => Measure::Gnll,
            "PE" => Measure::Pe,
            "LNPE" => Measure::LnPe,
            "SE" => Measure::Se,
            "LNSE" => Measure::LnSe,
            "DSE" => Measure::Dse,
            _ => return Err(Error::Config(format!("unknown measure `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyScore {
    pub measure: Measure,
    pub value: f64,
}

/// Sequences sampled from the model being scored, optionally with their
/// semantic cluster labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    samples: Vec<ScoredSequence>,
    cluster_ids: Option<Vec<usize>>,
}

impl SampleSet {
    pub fn new(samples: Vec<ScoredSequence>) -> Result<Self> {
        if samples.is_empty() {
            return input("sample set is empty");
        }
        Ok(Self { samples, cluster_ids: None })
    }

    pub fn with_clusters(samples: Vec<ScoredSequence>, cluster_ids: Vec<usize>) -> Result<Self> {
        if cluster_ids.len() != samples.len() {
            return input(format!("{} cluster ids for {} samples", cluster_ids.len(), samples.len()));
        }
        let mut set = Self::new(samples)?;
        set.cluster_ids = Some(cluster_ids);
        Ok(set)
    }

    pub fn samples(&self) -> &[ScoredSequence] {
        &self.samples
    }

    pub fn cluster_ids(&self) -> Option<&[usize]> {
        self.cluster_ids.as_deref()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn clusters(&self) -> Result<&[usize]> {
        self.cluster_ids.as_deref().ok_or_else(|| Error::Input("semantic entropy requires cluster ids".into()))
    }
}

fn log_prob_of(seq: &ScoredSequence, normalized: bool) -> f64 {
    if normalized {
        seq.ln_log_prob()
    } else {
        seq.total_log_prob()
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn g_nll(reference: &ScoredSequence) -> UncertaintyScore {
    UncertaintyScore { measure: Measure::Gnll, value: -reference.total_log_prob() }
}

/// `G-NLL` straight from a list of token log-probabilities.
pub fn g_nll_from_log_probs(token_log_probs: &[f64]) -> Result<UncertaintyScore> {
    Ok(g_nll(&ScoredSequence::from_token_log_probs(token_log_probs.to_vec())?))
}

/// `(1/N) Σ_n -log p(y_n)`, or with `p̄` when `normalized`.
pub fn predictive_entropy(set: &SampleSet, normalized: bool) -> Result<UncertaintyScore> {
    if set.is_empty() {
        return input("predictive entropy of an empty sample set");
    }
    let total: f64 = set.samples.iter().map(|s| -log_prob_of(s, normalized)).sum();
    let measure = if normalized { Measure::LnPe } else { Measure::Pe };
    Ok(UncertaintyScore { measure, value: total / set.len() as f64 })
}

/// `(1/N) Σ_n -log p̂(c_n)` with `p̂(c)` the likelihood mass of cluster `c`
/// relative to the total mass of the sampled set.
pub fn semantic_entropy(set: &SampleSet, normalized: bool) -> Result<UncertaintyScore> {
    let clusters = set.clusters()?;
    let lls: Vec<f64> = set.samples.iter().map(|s| log_prob_of(s, normalized)).collect();
    let log_total = log_sum_exp(lls.iter().copied());
    if log_total == f64::NEG_INFINITY {
        return input("sampled sequences carry zero total likelihood");
    }
    let k = clusters.iter().max().map_or(0, |m| m + 1);
    let log_mass: Vec<f64> = (0..k)
        .map(|c| {
            let members = lls.iter().zip(clusters).filter(move |(_, id)| **id == c).map(|(l, _)| *l);
            log_sum_exp(members) - log_total
        })
        .collect();
    let total: f64 = clusters.iter().map(|c| -log_mass[*c]).sum();
    let measure = if normalized { Measure::LnSe } else { Measure::Se };
    Ok(UncertaintyScore { measure, value: (total / set.len() as f64).max(0.0) })
}

/// `-Σ_c p̂(c) log p̂(c)` with `p̂(c)` the fraction of samples in cluster `c`.
pub fn discrete_semantic_entropy(set: &SampleSet) -> Result<UncertaintyScore> {
    let clusters = set.clusters()?;
    let n = clusters.len() as f64;
    let k = clusters.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    clusters.iter().for_each(|c| counts[*c] += 1);
    let value = counts
        .iter()
        .filter(|c| **c > 0)
        .map(|c| {
            let p = *c as f64 / n;
            -p * p.ln()
        })
        .sum::<f64>()
        .max(0.0);
    Ok(UncertaintyScore { measure: Measure::Dse, value })
}

/// Computes one sampling-based measure over `set`.
pub fn score_samples(measure: Measure, set: &SampleSet) -> Result<UncertaintyScore> {
    match measure {
        Measure::Pe => predictive_entropy(set, false),
        Measure::LnPe => predictive_entropy(set, true),
        Measure::Se => semantic_entropy(set, false),
        Measure::LnSe => semantic_entropy(set, true),
        Measure::Dse => discrete_semantic_entropy(set),
        Measure::Gnll => Err(Error::Config("G-NLL is computed from the reference sequence".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqmodel::tests::toy_model;

    fn seq(lps: &[f64]) -> ScoredSequence {
        ScoredSequence::from_token_log_probs(lps.to_vec()).unwrap()
    }

    #[test]
    fn g_nll_examples() {
        let g = crate::decode::greedy(&toy_model());
        assert!((g_nll(&g).value + 0.42f64.ln()).abs() < 1e-12);
        assert!((g_nll(&g).value - 0.8675).abs() < 1e-4);
        assert_eq!(g_nll(&seq(&[0.0, 0.0])).value, 0.0);
        let uniform = seq(&[-(20f64.ln()); 4]);
        assert!((g_nll(&uniform).value - 11.9829).abs() < 1e-4);
        assert!(g_nll_from_log_probs(&[]).is_err());
    }

    #[test]
    fn pe_of_deterministic_samples_is_zero() {
        let set = SampleSet::new(vec![seq(&[0.0, 0.0]); 5]).unwrap();
        assert_eq!(predictive_entropy(&set, false).unwrap().value, 0.0);
        assert_eq!(predictive_entropy(&set, true).unwrap().value, 0.0);
    }

    #[test]
    fn pe_exact_expectation_on_toy_model() {
        // Weighting each of the 4 sequences by its probability recovers the entropy.
        let probs = [0.42f64, 0.18, 0.20, 0.20];
        let expect: f64 = probs.iter().map(|p| p * -p.ln()).sum();
        assert!((expect - 1.3168).abs() < 1e-4);
        // 50 samples with exact frequencies 21/9/10/10
        let mut samples = Vec::new();
        for (p, count) in probs.iter().zip([21, 9, 10, 10]) {
            samples.extend(std::iter::repeat_n(seq(&[p.ln()]), count));
        }
        let pe = predictive_entropy(&SampleSet::new(samples).unwrap(), false).unwrap();
        assert!((pe.value - expect).abs() < 1e-12);
    }

    #[test]
    fn se_examples() {
        let one = SampleSet::with_clusters(vec![seq(&[-1.0]), seq(&[-2.0])], vec![0, 0]).unwrap();
        assert_eq!(semantic_entropy(&one, false).unwrap().value, 0.0);

        let split = SampleSet::with_clusters(vec![seq(&[-1.0]), seq(&[-1.0])], vec![0, 1]).unwrap();
        assert!((semantic_entropy(&split, false).unwrap().value - 2f64.ln()).abs() < 1e-12);

        // Cluster masses {.5, .3, .2} over sizes {5, 3, 2}: each member carries mass/size.
        let mut samples = Vec::new();
        let mut ids = Vec::new();
        for (c, (mass, size)) in [(0.5f64, 5), (0.3, 3), (0.2, 2)].into_iter().enumerate() {
            for _ in 0..size {
                samples.push(seq(&[(mass / size as f64).ln()]));
                ids.push(c);
            }
        }
        let set = SampleSet::with_clusters(samples, ids).unwrap();
        let expect = (5.0 * -0.5f64.ln() + 3.0 * -0.3f64.ln() + 2.0 * -0.2f64.ln()) / 10.0;
        let se = semantic_entropy(&set, false).unwrap().value;
        assert!((se - expect).abs() < 1e-12);
        assert!((se - 1.0297).abs() < 1e-4);
    }

    #[test]
    fn se_singletons_match_direct_computation() {
        let lls = [-0.3f64, -1.2, -2.5, -0.9];
        let set = SampleSet::with_clusters(lls.iter().map(|l| seq(&[*l])).collect(), vec![0, 1, 2, 3]).unwrap();
        let z: f64 = lls.iter().map(|l| l.exp()).sum();
        let direct: f64 = lls.iter().map(|l| -(l.exp() / z).ln()).sum::<f64>() / 4.0;
        assert!((semantic_entropy(&set, false).unwrap().value - direct).abs() < 1e-12);
    }

    #[test]
    fn ln_se_uses_per_token_mean() {
        let set = SampleSet::with_clusters(vec![seq(&[-1.0, -3.0]), seq(&[-2.0])], vec![0, 1]).unwrap();
        // both have mean log-prob -2: symmetric split
        assert!((semantic_entropy(&set, true).unwrap().value - 2f64.ln()).abs() < 1e-12);
        assert!(semantic_entropy(&set, false).unwrap().value > 0.0);
    }

    #[test]
    fn se_errors() {
        let set = SampleSet::new(vec![seq(&[-1.0])]).unwrap();
        assert!(semantic_entropy(&set, false).is_err());
        assert!(discrete_semantic_entropy(&set).is_err());
        let zero = SampleSet::with_clusters(vec![seq(&[f64::NEG_INFINITY])], vec![0]).unwrap();
        assert!(semantic_entropy(&zero, false).is_err());
        assert!(SampleSet::new(vec![]).is_err());
        assert!(SampleSet::with_clusters(vec![seq(&[-1.0])], vec![0, 1]).is_err());
    }

    #[test]
    fn zero_likelihood_sample_adds_no_mass() {
        let set = SampleSet::with_clusters(vec![seq(&[-1.0]), seq(&[-1.0]), seq(&[f64::NEG_INFINITY])], vec![0, 1, 1])
            .unwrap();
        let expect = (-(0.5f64.ln()) * 3.0) / 3.0;
        assert!((semantic_entropy(&set, false).unwrap().value - expect).abs() < 1e-12);
    }

    #[test]
    fn dse_examples() {
        let same = SampleSet::with_clusters(vec![seq(&[-1.0]); 4], vec![0; 4]).unwrap();
        assert_eq!(discrete_semantic_entropy(&same).unwrap().value, 0.0);

        let ids = vec![0, 0, 0, 0, 0, 1, 1, 1, 2, 2];
        let set = SampleSet::with_clusters(vec![seq(&[-1.0]); 10], ids).unwrap();
        let expect = -(0.5 * 0.5f64.ln() + 0.3 * 0.3f64.ln() + 0.2 * 0.2f64.ln());
        let v = discrete_semantic_entropy(&set).unwrap().value;
        assert!((v - expect).abs() < 1e-12);
        assert!((v - 1.0297).abs() < 1e-4);

        let singletons = SampleSet::with_clusters(vec![seq(&[-1.0]); 10], (0..10).collect()).unwrap();
        assert!((discrete_semantic_entropy(&singletons).unwrap().value - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn measure_names_round_trip() {
        for m in Measure::ALL {
            assert_eq!(m.name().parse::<Measure>().unwrap(), m);
        }
        assert_eq!("gnll".parse::<Measure>().unwrap(), Measure::Gnll);
        assert!("entropy".parse::<Measure>().is_err());
    }
}
