//! Command-line experiment runner behind the `seqscore` binary.

pub mod pipeline;
pub mod synth;

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::decode::{decode, DecodeConfig, Strategy};
use crate::error::{Error, Result};
use crate::estimators::Measure;
use crate::eval::F1Config;
use crate::semcluster::{ClusterStrategy, EntailmentConfig, NLI_ENDPOINT_ENV};
use crate::synthdist::{exact_stats, DirichletSpec, SynthModelConfig, SyntheticModel, DEFAULT_LEAF_BUDGET};
use crate::traceio::{format_sig6, read_results, read_traces, write_results_to, ResultFormat};

use pipeline::{cluster_records, evaluate, labels_from_traces, score_records, write_clusters, Dataset, ScoreOptions};
use synth::{
    run_synth_entropy, run_synth_maxlik, write_entropy_csv, write_maxlik_csv, SynthExperimentConfig, SynthStrategy,
};

#[derive(Debug, Parser)]
#[command(name = "seqscore", version, about = "Uncertainty measures for autoregressive sequence models")]
pub struct Cli {
    /// Master seed for every random quantity.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo predictive-entropy estimates against enumerated ground truth.
    SynthEntropy(SynthArgs),
    /// Decoded maximum sequence likelihood against enumerated ground truth.
    SynthMaxlik(SynthArgs),
    /// Decode a synthetic model.
    Decode(DecodeArgs),
    /// Score generation traces with uncertainty measures.
    Score(ScoreArgs),
    /// Print semantic cluster ids of each record's samples.
    Cluster(ClusterArgs),
    /// AUROC and rejection accuracy of scored results.
    Evaluate(EvaluateArgs),
    /// Check a trace file against the schema.
    ValidateTraces(TracesArg),
}

fn parse_list<T: std::str::FromStr>(s: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        out.push(part.parse::<T>().map_err(|e| format!("`{part}`: {e}"))?);
    }
    Ok(out)
}

/// `1,2,5` or `1..30` (inclusive) or a mix: `1..5,10,20`.
fn parse_counts(s: &str) -> std::result::Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a.parse().map_err(|e| format!("`{part}`: {e}"))?;
            let b: usize = b.trim_start_matches('=').parse().map_err(|e| format!("`{part}`: {e}"))?;
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|e| format!("`{part}`: {e}"))?);
        }
    }
    Ok(out)
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Vocabulary sizes (Zipf presets exist for 20 and 100).
    #[arg(long, default_value = "20", value_parser = parse_list::<usize>)]
    pub vocab: Vec<Vec<usize>>,
    #[arg(long, default_value = "2,3,4", value_parser = parse_list::<usize>)]
    pub depths: Vec<Vec<usize>>,
    /// Sample counts / beam widths, e.g. `1..30` or `1,5,10`.
    #[arg(long, default_value = "1..30", value_parser = parse_counts)]
    pub samples: Vec<Vec<usize>>,
    #[arg(long, default_value_t = 1000)]
    pub runs: usize,
    /// Multinomial sampling temperatures.
    #[arg(long, default_value = "0.5,1.0", value_parser = parse_list::<f64>)]
    pub temperatures: Vec<Vec<f64>>,
    /// Leave beam search out of the max-likelihood study.
    #[arg(long)]
    pub no_beam: bool,
    /// Draw a fresh model for every run instead of fixing one.
    #[arg(long)]
    pub resample_model: bool,
    #[arg(long, default_value_t = DEFAULT_LEAF_BUDGET)]
    pub budget: u64,
}

impl SynthArgs {
    fn config(&self, seed: u64) -> SynthExperimentConfig {
        let mut strategies = Vec::new();
        if !self.no_beam {
            strategies.push(SynthStrategy::Beam);
        }
        strategies.extend(self.temperatures.iter().flatten().map(|t| SynthStrategy::Multinomial { temperature: *t }));
        SynthExperimentConfig {
            vocab_sizes: self.vocab.iter().flatten().copied().collect(),
            depths: self.depths.iter().flatten().copied().collect(),
            sample_counts: self.samples.iter().flatten().copied().collect(),
            runs: self.runs,
            strategies,
            master_seed: seed,
            resample_model: self.resample_model,
            leaf_budget: self.budget,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyKind {
    Greedy,
    Beam,
    Multinomial,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Model configuration block (vocab_size, preset|alphas, depth, seed, shuffle).
    #[arg(long, conflicts_with_all = ["vocab", "depth"])]
    pub model: Option<PathBuf>,
    /// Zipf preset vocabulary size when no --model is given.
    #[arg(long, default_value_t = 20)]
    pub vocab: usize,
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[arg(long, value_enum, default_value = "greedy")]
    pub strategy: StrategyKind,
    #[arg(long, default_value_t = 5)]
    pub beam_width: usize,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Decoded length; defaults to the model depth.
    #[arg(long)]
    pub length: Option<usize>,
    /// Number of multinomial samples.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Also enumerate the model and report its exact entropy and maximum.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ClusterKind {
    Exact,
    Normalized,
    Entailment,
}

#[derive(Debug, Args)]
pub struct ClusterOpts {
    #[arg(long = "cluster", value_enum, default_value = "normalized")]
    pub kind: ClusterKind,
    /// Entailment oracle URL.
    #[arg(long, env = NLI_ENDPOINT_ENV)]
    pub nli_endpoint: Option<String>,
    #[arg(long, default_value_t = 30.0)]
    pub nli_timeout_secs: f64,
    /// Disable the in-memory entailment cache.
    #[arg(long)]
    pub no_cache: bool,
}

impl ClusterOpts {
    fn strategy(&self) -> Result<ClusterStrategy> {
        Ok(match self.kind {
            ClusterKind::Exact => ClusterStrategy::Exact,
            ClusterKind::Normalized => ClusterStrategy::Normalized,
            ClusterKind::Entailment => {
                let endpoint = self.nli_endpoint.clone().ok_or_else(|| {
                    Error::Config(format!("entailment clustering needs --nli-endpoint or {NLI_ENDPOINT_ENV}"))
                })?;
                if self.nli_timeout_secs.is_nan() || self.nli_timeout_secs <= 0.0 {
                    return Err(Error::Config("--nli-timeout-secs must be positive".into()));
                }
                ClusterStrategy::Entailment(EntailmentConfig {
                    endpoint,
                    timeout: Duration::from_secs_f64(self.nli_timeout_secs),
                    cache: !self.no_cache,
                })
            }
        })
    }
}

#[derive(Debug, Args)]
pub struct TracesArg {
    #[arg(long)]
    pub traces: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub traces: PathBuf,
    /// Comma-separated measures: G-NLL, PE, LN-PE, SE, LN-SE, D-SE.
    #[arg(long, default_value = "G-NLL,PE,LN-PE,SE,LN-SE,D-SE", value_parser = parse_list::<Measure>)]
    pub measures: Vec<Vec<Measure>>,
    #[command(flatten)]
    pub cluster: ClusterOpts,
    #[arg(long, default_value = "csv")]
    pub format: ResultFormat,
    /// F1 above which a reference answer counts as correct.
    #[arg(long, default_value_t = 0.5)]
    pub f1_threshold: f64,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub traces: PathBuf,
    #[command(flatten)]
    pub cluster: ClusterOpts,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Results files, one per dataset (named after the file stem).
    #[arg(long, required = true, num_args = 1..)]
    pub results: Vec<PathBuf>,
    /// Take labels from this trace file instead of the result rows.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    pub keep_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    pub f1_threshold: f64,
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(io::BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn dataset_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn load_model(args: &DecodeArgs, seed: u64) -> Result<SyntheticModel> {
    match &args.model {
        Some(path) => SynthModelConfig::parse(&fs::read_to_string(path)?)?.build(),
        None => SyntheticModel::new(DirichletSpec::zipf_preset(args.vocab)?, args.depth, seed),
    }
}

fn run_decode(args: &DecodeArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let model = load_model(args, seed)?;
    let strategy = match args.strategy {
        StrategyKind::Greedy => Strategy::Greedy,
        StrategyKind::Beam => Strategy::Beam { width: args.beam_width },
        StrategyKind::Multinomial => Strategy::Multinomial { temperature: args.temperature, seed },
    };
    let config = DecodeConfig { strategy, length: args.length.unwrap_or(model.depth()) };
    let sequences = decode(&model, &config, args.n)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "tokens", "log_prob", "ln_log_prob"])?;
    for (i, s) in sequences.iter().enumerate() {
        let tokens: Vec<String> = s.tokens().iter().map(|t| t.to_string()).collect();
        w.write_record([
            i.to_string(),
            tokens.join(" "),
            format_sig6(s.total_log_prob()),
            format_sig6(s.ln_log_prob()),
        ])?;
    }
    w.flush()?;
    drop(w);
    if args.exact {
        let stats = exact_stats(&model, DEFAULT_LEAF_BUDGET)?;
        let tokens: Vec<String> = stats.argmax_tokens.iter().map(|t| t.to_string()).collect();
        eprintln!(
            "exact: entropy {} nats, max log-prob {} at [{}]",
            format_sig6(stats.entropy_nats),
            format_sig6(stats.max_log_prob),
            tokens.join(" ")
        );
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    if cli.threads > 0 {
        // a second initialization (e.g. in tests) keeps the existing pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match &cli.command {
        Command::SynthEntropy(args) => {
            let rows = run_synth_entropy(&args.config(cli.seed))?;
            write_entropy_csv(&rows, output(&cli.out)?)
        }
        Command::SynthMaxlik(args) => {
            let rows = run_synth_maxlik(&args.config(cli.seed))?;
            write_maxlik_csv(&rows, output(&cli.out)?)
        }
        Command::Decode(args) => run_decode(args, cli.seed, &mut output(&cli.out)?),
        Command::Score(args) => {
            let records = read_traces(&args.traces)?;
            let options = ScoreOptions {
                measures: args.measures.iter().flatten().copied().collect(),
                cluster: args.cluster.strategy()?,
                f1: F1Config::new(args.f1_threshold)?,
            };
            let rows = score_records(&records, &options)?;
            write_results_to(&rows, output(&cli.out)?, args.format)
        }
        Command::Cluster(args) => {
            let records = read_traces(&args.traces)?;
            let clusters = cluster_records(&records, &args.cluster.strategy()?)?;
            write_clusters(&records, &clusters, output(&cli.out)?)
        }
        Command::Evaluate(args) => {
            let datasets = args
                .results
                .iter()
                .map(|p| Ok(Dataset { name: dataset_name(p), rows: read_results(p)? }))
                .collect::<Result<Vec<_>>>()?;
            let f1 = F1Config::new(args.f1_threshold)?;
            let labels = match &args.labels {
                Some(path) => Some(labels_from_traces(&read_traces(path)?, &f1)),
                None => None,
            };
            let report = evaluate(&datasets, labels.as_ref(), args.keep_fraction)?;
            print!("{}", report.render_table(args.keep_fraction));
            if let Some(path) = &cli.out {
                report.write_csv(io::BufWriter::new(File::create(path)?))?;
            }
            Ok(())
        }
        Command::ValidateTraces(args) => {
            let records = read_traces(&args.traces)?;
            let samples: usize = records.iter().map(|r| r.samples.len()).sum();
            let mut out = output(&cli.out)?;
            writeln!(out, "ok: {} records, {samples} samples", records.len())?;
            Ok(())
        }
    }
}

/// Entry point of the `seqscore` binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
