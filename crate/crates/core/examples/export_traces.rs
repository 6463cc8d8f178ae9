//! Write a trace file in the `seqscore/1` schema from a synthetic model:
//! a greedy reference plus ten tempered samples per "question".
//!
//! Real exporters fill the same fields from an LLM's generation output.
//!
//! ```text
//! cargo run --example export_traces -- out.jsonl
//! seqscore score --traces out.jsonl --measures G-NLL,PE,LN-PE
//! ```

use seqscore::decode::{greedy, multinomial_sample};
use seqscore::synthdist::{DirichletSpec, SyntheticModel};
use seqscore::traceio::{write_traces, DecodeMethod, GenerationRecord, Reference, Sample, SCHEMA_VERSION};
use seqscore::ScoredSequence;

fn text(s: &ScoredSequence) -> String {
    s.tokens().iter().map(|t| format!("w{t}")).collect::<Vec<_>>().join(" ")
}

fn main() -> seqscore::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "traces.jsonl".into());
    let spec = DirichletSpec::zipf_preset(20)?;
    let mut records = Vec::new();
    for q in 0..5u64 {
        let model = SyntheticModel::new(spec.clone(), 3, q)?;
        let reference = greedy(&model);
        let samples = multinomial_sample(&model, 1.0, 100 + q, 10)?
            .iter()
            .map(|s| Sample { text: text(s), token_log_probs: s.token_log_probs().to_vec(), temperature: 1.0 })
            .collect();
        records.push(GenerationRecord {
            schema: SCHEMA_VERSION.to_owned(),
            id: format!("synth-{q}"),
            question: format!("synthetic prompt {q}"),
            gold_answers: vec![],
            reference: Reference {
                text: text(&reference),
                tokens: Some(reference.tokens().to_vec()),
                token_log_probs: reference.token_log_probs().to_vec(),
                decode: DecodeMethod::Greedy,
            },
            samples,
            external_labels: None,
        });
    }
    write_traces(&records, &out)?;
    println!("wrote {} records to {out}", records.len());
    Ok(())
}
