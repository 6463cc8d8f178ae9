//! Synthetic estimator-quality study: how well do sampled entropy
//! estimates and decoded maxima track the enumerated ground truth?
//!
//! Seeds fan out from the master seed with [`derive_seed`]:
//!
//! ```text
//! model  = derive_seed(master, [0, |V|, T, draw])
//! sample = derive_seed(master, [1, |V|, T, draw, run, N, tau.to_bits()])
//! ```
//!
//! Every random quantity is keyed by its indices, so adding runs or sample
//! counts never perturbs existing ones.

use std::io::Write;

use rayon::prelude::*;

use crate::decode::{beam_search, greedy, multinomial_sample};
use crate::error::{Error, Result};
use crate::estimators::{predictive_entropy, SampleSet};
use crate::synthdist::{derive_seed, exact_stats, DirichletSpec, ExactStats, SyntheticModel, DEFAULT_LEAF_BUDGET};
use crate::traceio::format_sig6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SynthStrategy {
    /// Beam search; `N` is the beam width and the estimate is the best beam.
    Beam,
    Multinomial {
        temperature: f64,
    },
}

impl SynthStrategy {
    fn name(&self) -> &'static str {
        match self {
            SynthStrategy::Beam => "beam",
            SynthStrategy::Multinomial { .. } => "ms",
        }
    }

    fn param(&self) -> String {
        match self {
            SynthStrategy::Beam => String::new(),
            SynthStrategy::Multinomial { temperature } => format_sig6(*temperature),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthExperimentConfig {
    /// Vocabulary sizes; each selects its Zipf preset.
    pub vocab_sizes: Vec<usize>,
    pub depths: Vec<usize>,
    pub sample_counts: Vec<usize>,
    pub runs: usize,
    pub strategies: Vec<SynthStrategy>,
    pub master_seed: u64,
    /// Draw a new model per run instead of keeping one model fixed.
    pub resample_model: bool,
    pub leaf_budget: u64,
}

impl Default for SynthExperimentConfig {
    fn default() -> Self {
        Self {
            vocab_sizes: vec![20],
            depths: vec![2, 3, 4],
            sample_counts: (1..=30).collect(),
            runs: 1000,
            strategies: vec![
                SynthStrategy::Beam,
                SynthStrategy::Multinomial { temperature: 0.5 },
                SynthStrategy::Multinomial { temperature: 1.0 },
            ],
            master_seed: 0,
            resample_model: false,
            leaf_budget: DEFAULT_LEAF_BUDGET,
        }
    }
}

impl SynthExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.runs == 0 {
            return bad("runs must be at least 1");
        }
        if self.vocab_sizes.is_empty() || self.depths.is_empty() || self.sample_counts.is_empty() {
            return bad("vocab sizes, depths and sample counts must be non-empty");
        }
        if self.depths.contains(&0) {
            return bad("depths must be at least 1");
        }
        if self.sample_counts.contains(&0) {
            return bad("sample counts must be at least 1");
        }
        for s in &self.strategies {
            if let SynthStrategy::Multinomial { temperature } = s {
                if !(*temperature > 0.0 && temperature.is_finite()) {
                    return Err(Error::Config(format!("temperature {temperature} must be positive")));
                }
            }
        }
        for v in &self.vocab_sizes {
            DirichletSpec::zipf_preset(*v)?;
        }
        Ok(())
    }

    fn models(&self, vocab: usize, depth: usize) -> Result<Vec<(SyntheticModel, ExactStats)>> {
        let spec = DirichletSpec::zipf_preset(vocab)?;
        let draws = if self.resample_model { self.runs } else { 1 };
        (0..draws)
            .into_par_iter()
            .map(|draw| {
                let seed = model_seed(self.master_seed, vocab, depth, draw);
                let model = SyntheticModel::new(spec.clone(), depth, seed)?;
                let exact = exact_stats(&model, self.leaf_budget)?;
                Ok((model, exact))
            })
            .collect()
    }

    fn model_for_run<'a>(
        &self,
        models: &'a [(SyntheticModel, ExactStats)],
        run: usize,
    ) -> (usize, &'a (SyntheticModel, ExactStats)) {
        if self.resample_model {
            (run, &models[run])
        } else {
            (0, &models[0])
        }
    }
}

pub fn model_seed(master: u64, vocab: usize, depth: usize, draw: usize) -> u64 {
    derive_seed(master, &[0, vocab as u64, depth as u64, draw as u64])
}

pub fn sample_seed(
    master: u64,
    vocab: usize,
    depth: usize,
    draw: usize,
    run: usize,
    n: usize,
    temperature: f64,
) -> u64 {
    derive_seed(master, &[1, vocab as u64, depth as u64, draw as u64, run as u64, n as u64, temperature.to_bits()])
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRow {
    pub vocab: usize,
    pub depth: usize,
    pub temperature: f64,
    pub n: usize,
    pub mean_est: f64,
    pub std_est: f64,
    pub exact_entropy: f64,
}

impl EntropyRow {
    /// Standard error of `mean_est` over `runs` runs.
    pub fn std_error(&self, runs: usize) -> f64 {
        self.std_est / (runs as f64).sqrt()
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Monte Carlo predictive-entropy estimates for every multinomial strategy.
/// Beam strategies are not samplers and are skipped.
pub fn run_synth_entropy(config: &SynthExperimentConfig) -> Result<Vec<EntropyRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for &vocab in &config.vocab_sizes {
        for &depth in &config.depths {
            let models = config.models(vocab, depth)?;
            let exact_mean = models.iter().map(|(_, e)| e.entropy_nats).sum::<f64>() / models.len() as f64;
            for strategy in &config.strategies {
                let SynthStrategy::Multinomial { temperature } = *strategy else { continue };
                for &n in &config.sample_counts {
                    let estimates: Vec<f64> = (0..config.runs)
                        .into_par_iter()
                        .map(|run| {
                            let (draw, (model, _)) = config.model_for_run(&models, run);
                            let seed = sample_seed(config.master_seed, vocab, depth, draw, run, n, temperature);
                            let samples = multinomial_sample(model, temperature, seed, n)?;
                            Ok(predictive_entropy(&SampleSet::new(samples)?, false)?.value)
                        })
                        .collect::<Result<_>>()?;
                    let (mean_est, std_est) = mean_std(&estimates);
                    rows.push(EntropyRow {
                        vocab,
                        depth,
                        temperature,
                        n,
                        mean_est,
                        std_est,
                        exact_entropy: exact_mean,
                    });
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxlikRow {
    pub vocab: usize,
    pub depth: usize,
    pub strategy: SynthStrategy,
    pub n: usize,
    pub median_gap: f64,
    pub q05: f64,
    pub q95: f64,
    pub hit_rate: f64,
}

/// Best log-probability found by `strategy` with budget `n`.
pub fn best_found(model: &SyntheticModel, strategy: SynthStrategy, n: usize, seed: u64) -> Result<f64> {
    match strategy {
        SynthStrategy::Beam if n == 1 => Ok(greedy(model).total_log_prob()),
        SynthStrategy::Beam => Ok(beam_search(model, n)?[0].total_log_prob()),
        SynthStrategy::Multinomial { temperature } => Ok(multinomial_sample(model, temperature, seed, n)?
            .iter()
            .map(|s| s.total_log_prob())
            .fold(f64::NEG_INFINITY, f64::max)),
    }
}

/// Gap between the best decoded log-probability and the enumerated
/// maximum. Gaps are `<= 0`; a hit is a gap of exactly zero.
pub fn run_synth_maxlik(config: &SynthExperimentConfig) -> Result<Vec<MaxlikRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for &vocab in &config.vocab_sizes {
        for &depth in &config.depths {
            let models = config.models(vocab, depth)?;
            for &strategy in &config.strategies {
                for &n in &config.sample_counts {
                    // beam search is deterministic: one evaluation per model suffices
                    let evaluations = match strategy {
                        SynthStrategy::Beam => models.len(),
                        SynthStrategy::Multinomial { .. } => config.runs,
                    };
                    let temperature = match strategy {
                        SynthStrategy::Beam => 0.0,
                        SynthStrategy::Multinomial { temperature } => temperature,
                    };
                    let mut gaps: Vec<f64> = (0..evaluations)
                        .into_par_iter()
                        .map(|run| {
                            let (draw, (model, exact)) = config.model_for_run(&models, run);
                            let seed = sample_seed(config.master_seed, vocab, depth, draw, run, n, temperature);
                            Ok(best_found(model, strategy, n, seed)? - exact.max_log_prob)
                        })
                        .collect::<Result<_>>()?;
                    let hits = gaps.iter().filter(|g| **g == 0.0).count();
                    gaps.sort_by(f64::total_cmp);
                    rows.push(MaxlikRow {
                        vocab,
                        depth,
                        strategy,
                        n,
                        median_gap: quantile(&gaps, 0.5),
                        q05: quantile(&gaps, 0.05),
                        q95: quantile(&gaps, 0.95),
                        hit_rate: hits as f64 / gaps.len() as f64,
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_entropy_csv(rows: &[EntropyRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["width", "depth", "strategy", "tau", "n", "mean_est", "std_est", "exact_entropy"])?;
    for r in rows {
        w.write_record([
            r.vocab.to_string(),
            r.depth.to_string(),
            "ms".to_owned(),
            format_sig6(r.temperature),
            r.n.to_string(),
            format_sig6(r.mean_est),
            format_sig6(r.std_est),
            format_sig6(r.exact_entropy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_maxlik_csv(rows: &[MaxlikRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["width", "depth", "strategy", "param", "n", "median_gap", "q05", "q95", "hit_rate"])?;
    for r in rows {
        w.write_record([
            r.vocab.to_string(),
            r.depth.to_string(),
            r.strategy.name().to_owned(),
            r.strategy.param(),
            r.n.to_string(),
            format_sig6(r.median_gap),
            format_sig6(r.q05),
            format_sig6(r.q95),
            format_sig6(r.hit_rate),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthExperimentConfig {
        SynthExperimentConfig {
            vocab_sizes: vec![20],
            depths: vec![2],
            sample_counts: vec![1, 5],
            runs: 50,
            master_seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&xs, 0.5), 3.0);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert!((quantile(&xs, 0.05) - 1.2).abs() < 1e-12);
        assert_eq!(quantile(&[7.0], 0.95), 7.0);
    }

    #[test]
    fn entropy_rows_cover_grid() {
        let rows = run_synth_entropy(&small()).unwrap();
        // 2 temperatures × 2 sample counts; beam skipped
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.exact_entropy > 0.0 && r.std_est >= 0.0));
    }

    #[test]
    fn adding_runs_keeps_earlier_seeds() {
        assert_eq!(sample_seed(1, 20, 2, 0, 5, 3, 1.0), sample_seed(1, 20, 2, 0, 5, 3, 1.0));
        assert_ne!(sample_seed(1, 20, 2, 0, 5, 3, 1.0), sample_seed(1, 20, 2, 0, 6, 3, 1.0));
        let mut cfg = small();
        cfg.resample_model = true;
        cfg.strategies = vec![SynthStrategy::Beam];
        cfg.sample_counts = vec![1];
        let a = run_synth_maxlik(&cfg).unwrap();
        cfg.runs = 80;
        let b = run_synth_maxlik(&cfg).unwrap();
        // the first 50 draws are shared, so hits can only accumulate
        let hits_a = (a[0].hit_rate * 50.0).round();
        let hits_b = (b[0].hit_rate * 80.0).round();
        assert!(hits_b >= hits_a);
    }

    #[test]
    fn exhaustive_beam_always_hits() {
        let mut cfg = small();
        cfg.resample_model = true;
        cfg.strategies = vec![SynthStrategy::Beam];
        cfg.sample_counts = vec![20];
        let rows = run_synth_maxlik(&cfg).unwrap();
        assert_eq!(rows[0].hit_rate, 1.0);
        assert_eq!(rows[0].q05, 0.0);
    }

    #[test]
    fn gaps_are_non_positive() {
        let rows = run_synth_maxlik(&small()).unwrap();
        assert!(rows.iter().all(|r| r.q95 <= 0.0 && r.median_gap <= 0.0));
    }

    #[test]
    fn config_validation() {
        let mut cfg = small();
        cfg.runs = 0;
        assert!(run_synth_entropy(&cfg).is_err());
        let mut cfg = small();
        cfg.vocab_sizes = vec![30];
        assert!(run_synth_maxlik(&cfg).is_err());
        let mut cfg = small();
        cfg.vocab_sizes = vec![100];
        cfg.depths = vec![5];
        assert!(matches!(run_synth_maxlik(&cfg), Err(Error::Budget { .. })));
    }
}
