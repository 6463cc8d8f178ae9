//! Score a trace file with every measure and print the results as CSV.
//!
//! ```text
//! cargo run --example score_traces -- [traces.jsonl]
//! ```

use seqscore::cli::pipeline::{score_records, ScoreOptions};
use seqscore::estimators::Measure;
use seqscore::eval::F1Config;
use seqscore::semcluster::ClusterStrategy;
use seqscore::traceio::{read_traces, write_results_to, ResultFormat};

fn main() -> seqscore::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/traces.jsonl").to_owned());
    let records = read_traces(&path)?;
    let options =
        ScoreOptions { measures: Measure::ALL.to_vec(), cluster: ClusterStrategy::Normalized, f1: F1Config::default() };
    let rows = score_records(&records, &options)?;
    write_results_to(&rows, std::io::stdout().lock(), ResultFormat::Csv)
}
