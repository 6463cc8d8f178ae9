//! AUROC and rejection accuracy of each measure on the example traces.

use seqscore::cli::pipeline::{evaluate, score_records, Dataset, ScoreOptions};
use seqscore::estimators::Measure;
use seqscore::eval::F1Config;
use seqscore::semcluster::ClusterStrategy;
use seqscore::traceio::read_traces;

fn main() -> seqscore::Result<()> {
    let records = read_traces(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/traces.jsonl"))?;
    let options =
        ScoreOptions { measures: Measure::ALL.to_vec(), cluster: ClusterStrategy::Normalized, f1: F1Config::default() };
    let rows = score_records(&records, &options)?;
    let keep = 0.75;
    let report = evaluate(&[Dataset { name: "trivia".into(), rows }], None, keep)?;
    print!("{}", report.render_table(keep));
    Ok(())
}
