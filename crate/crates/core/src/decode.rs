//! Greedy, beam and temperature-multinomial decoding over a
//! [`TokenDistributionSource`].
//!
//! Decoded sequences always carry base-model log-probabilities; the
//! temperature only reshapes the sampling distribution.

use std::cmp::Ordering;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{input, Result};
use crate::seqmodel::{ScoredSequence, TokenDistributionSource, TokenId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Greedy,
    Beam { width: usize },
    Multinomial { temperature: f64, seed: u64 },
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Greedy => write!(f, "greedy"),
            Strategy::Beam { width } => write!(f, "beam{width}"),
            Strategy::Multinomial { temperature, .. } => write!(f, "ms(tau={temperature})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeConfig {
    pub strategy: Strategy,
    pub length: usize,
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        match self.strategy {
            Strategy::Beam { width: 0 } => input("beam width must be at least 1"),
            Strategy::Multinomial { temperature, .. } if !(temperature > 0.0 && temperature.is_finite()) => {
                input(format!("temperature must be positive, got {temperature}"))
            }
            _ if self.length == 0 => input("decode length must be at least 1"),
            _ => Ok(()),
        }
    }
}

/// Runs `config` against `source`. Greedy yields one sequence, beam search
/// the final beam (best first), multinomial `n_samples` draws.
pub fn decode<S: TokenDistributionSource + ?Sized>(
    source: &S,
    config: &DecodeConfig,
    n_samples: usize,
) -> Result<Vec<ScoredSequence>> {
    config.validate()?;
    if config.length > source.max_len() {
        return input(format!("decode length {} exceeds source max length {}", config.length, source.max_len()));
    }
    match config.strategy {
        Strategy::Greedy => Ok(vec![greedy_to(source, config.length)]),
        Strategy::Beam { width } => Ok(beam_to(source, width, config.length)),
        Strategy::Multinomial { temperature, seed } => sample_to(source, temperature, seed, n_samples, config.length),
    }
}

/// Per-step argmax decoding over the full length of `source`.
pub fn greedy<S: TokenDistributionSource + ?Sized>(source: &S) -> ScoredSequence {
    greedy_to(source, source.max_len())
}

fn greedy_to<S: TokenDistributionSource + ?Sized>(source: &S, length: usize) -> ScoredSequence {
    let mut tokens = Vec::with_capacity(length);
    let mut lps = Vec::with_capacity(length);
    for _ in 0..length {
        let dist = source.next(&tokens);
        let t = dist.argmax();
        lps.push(dist.log_prob(t));
        tokens.push(t);
    }
    ScoredSequence::new(tokens, lps).expect("greedy produces a well-formed sequence")
}

#[derive(Debug, Clone)]
struct Hypothesis {
    tokens: Vec<TokenId>,
    lps: Vec<f64>,
    total: f64,
}

fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.total.total_cmp(&a.total).then_with(|| a.tokens.cmp(&b.tokens))
}

/// Fixed-length beam search without length penalty.
///
/// Keeps the `width` best prefixes per level (ties broken toward the
/// lexicographically smaller token sequence) and returns the final beam in
/// descending log-probability.
pub fn beam_search<S: TokenDistributionSource + ?Sized>(source: &S, width: usize) -> Result<Vec<ScoredSequence>> {
    if width == 0 {
        return input("beam width must be at least 1");
    }
    Ok(beam_to(source, width, source.max_len()))
}

fn beam_to<S: TokenDistributionSource + ?Sized>(source: &S, width: usize, length: usize) -> Vec<ScoredSequence> {
    let mut beam = vec![Hypothesis { tokens: Vec::new(), lps: Vec::new(), total: 0.0 }];
    for _ in 0..length {
        let mut candidates = Vec::with_capacity(beam.len() * source.vocab().size());
        for hyp in &beam {
            let dist = source.next(&hyp.tokens);
            for (t, lp) in dist.log_probs().iter().enumerate() {
                let mut tokens = hyp.tokens.clone();
                tokens.push(t as TokenId);
                let mut lps = hyp.lps.clone();
                lps.push(*lp);
                candidates.push(Hypothesis { tokens, lps, total: hyp.total + lp });
            }
        }
        if candidates.len() > width {
            candidates.select_nth_unstable_by(width - 1, rank);
            candidates.truncate(width);
        }
        candidates.sort_by(rank);
        beam = candidates;
    }
    beam.into_iter()
        .map(|h| ScoredSequence::new(h.tokens, h.lps).expect("beam produces well-formed sequences"))
        .collect()
}

/// Draws `n_samples` sequences from `p^(1/τ)` renormalized at every step.
/// One ChaCha8 stream seeded from `seed` drives all draws.
pub fn multinomial_sample<S: TokenDistributionSource + ?Sized>(
    source: &S,
    temperature: f64,
    seed: u64,
    n_samples: usize,
) -> Result<Vec<ScoredSequence>> {
    sample_to(source, temperature, seed, n_samples, source.max_len())
}

fn sample_to<S: TokenDistributionSource + ?Sized>(
    source: &S,
    temperature: f64,
    seed: u64,
    n_samples: usize,
    length: usize,
) -> Result<Vec<ScoredSequence>> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return input(format!("temperature must be positive, got {temperature}"));
    }
    if n_samples == 0 {
        return input("n_samples must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(source.vocab().size());
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut tokens = Vec::with_capacity(length);
        let mut lps = Vec::with_capacity(length);
        for _ in 0..length {
            let dist = source.next(&tokens);
            let t = sample_tempered(dist.log_probs(), temperature, &mut weights, &mut rng);
            lps.push(dist.log_prob(t));
            tokens.push(t);
        }
        out.push(ScoredSequence::new(tokens, lps)?);
    }
    Ok(out)
}

fn sample_tempered(log_probs: &[f64], temperature: f64, weights: &mut Vec<f64>, rng: &mut impl Rng) -> TokenId {
    let max = log_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    weights.clear();
    weights.extend(log_probs.iter().map(|lp| ((lp - max) / temperature).exp()));
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            cum += w;
            last_positive = i;
            if u < cum {
                return i as TokenId;
            }
        }
    }
    last_positive as TokenId
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqmodel::tests::toy_model;
    use crate::seqmodel::{sequence_log_prob, OneHotSource, UniformSource, Vocab};
    use crate::synthdist::{exact_stats, sample_model, DirichletSpec, DEFAULT_LEAF_BUDGET};

    #[test]
    fn greedy_on_toy_model() {
        let g = greedy(&toy_model());
        assert_eq!(g.tokens(), &[0, 0]);
        assert!((g.total_log_prob() - 0.42f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn greedy_on_one_hot_and_uniform() {
        let s = OneHotSource::new(Vocab::new(4).unwrap(), vec![3, 1, 2]).unwrap();
        let g = greedy(&s);
        assert_eq!(g.tokens(), &[3, 1, 2]);
        assert_eq!(g.total_log_prob(), 0.0);

        let u = UniformSource::new(Vocab::new(7).unwrap(), 3);
        let g = greedy(&u);
        assert_eq!(g.tokens(), &[0, 0, 0]);
        assert!((g.total_log_prob() + 3.0 * 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn beam_width_one_is_greedy() {
        let m = sample_model(DirichletSpec::zipf_preset(20).unwrap(), 4, 5).unwrap();
        let b = beam_search(&m, 1).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0], greedy(&m));
        assert!(beam_search(&m, 0).is_err());
    }

    #[test]
    fn full_beam_on_toy_model() {
        let toy = toy_model();
        let b = beam_search(&toy, 4).unwrap();
        let order: Vec<_> = b.iter().map(|s| s.tokens().to_vec()).collect();
        // 00: .42, 10: .20, 11: .20, 01: .18
        assert_eq!(order, vec![vec![0, 0], vec![1, 0], vec![1, 1], vec![0, 1]]);
        let exact = exact_stats(&toy, DEFAULT_LEAF_BUDGET).unwrap();
        assert_eq!(b[0].total_log_prob(), exact.max_log_prob);
    }

    #[test]
    fn beam_width_five_not_worse_than_greedy() {
        for seed in 0..10 {
            let m = sample_model(DirichletSpec::zipf_preset(20).unwrap(), 4, seed).unwrap();
            let exact = exact_stats(&m, DEFAULT_LEAF_BUDGET).unwrap();
            let g = greedy(&m).total_log_prob();
            let b = beam_search(&m, 5).unwrap()[0].total_log_prob();
            assert!(b >= g);
            assert!(b <= exact.max_log_prob);
        }
    }

    #[test]
    fn low_temperature_reproduces_greedy() {
        let toy = toy_model();
        let s = multinomial_sample(&toy, 1e-6, 9, 200).unwrap();
        assert!(s.iter().all(|x| x.tokens() == [0, 0]));
    }

    #[test]
    fn sampling_records_base_log_probs() {
        let toy = toy_model();
        for s in multinomial_sample(&toy, 1.5, 1, 50).unwrap() {
            let lp = sequence_log_prob(&toy, s.tokens()).unwrap();
            assert_eq!(lp.to_bits(), s.total_log_prob().to_bits());
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = sample_model(DirichletSpec::zipf_preset(20).unwrap(), 3, 2).unwrap();
        let a = multinomial_sample(&m, 1.0, 77, 20).unwrap();
        let b = multinomial_sample(&m, 1.0, 77, 20).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, multinomial_sample(&m, 1.0, 78, 20).unwrap());
    }

    #[test]
    fn invalid_configs() {
        let toy = toy_model();
        assert!(multinomial_sample(&toy, 0.0, 1, 1).is_err());
        assert!(multinomial_sample(&toy, -1.0, 1, 1).is_err());
        assert!(multinomial_sample(&toy, 1.0, 1, 0).is_err());
        let cfg = DecodeConfig { strategy: Strategy::Greedy, length: 3 };
        assert!(decode(&toy, &cfg, 1).is_err());
        let cfg = DecodeConfig { strategy: Strategy::Beam { width: 0 }, length: 2 };
        assert!(decode(&toy, &cfg, 1).is_err());
    }

    #[test]
    fn decode_with_shorter_length() {
        let toy = toy_model();
        let cfg = DecodeConfig { strategy: Strategy::Greedy, length: 1 };
        let out = decode(&toy, &cfg, 1).unwrap();
        assert_eq!(out[0].tokens(), &[0]);
        assert!((out[0].total_log_prob() - 0.6f64.ln()).abs() < 1e-15);
    }
}
