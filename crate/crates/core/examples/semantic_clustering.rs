//! Cluster sampled answers by string rules or, when `SEQSCORE_NLI_ENDPOINT`
//! is set, by bidirectional entailment through the HTTP oracle.

use std::time::Duration;

use seqscore::estimators::{discrete_semantic_entropy, semantic_entropy, SampleSet};
use seqscore::semcluster::{cluster_in_context, ClusterStrategy, EntailmentConfig, NLI_ENDPOINT_ENV};
use seqscore::ScoredSequence;

fn main() -> seqscore::Result<()> {
    let question = "What is the capital of France?";
    let answers: Vec<String> =
        ["Paris", "paris.", "The city of Paris", "Lyon", "Paris", "Marseille"].iter().map(|s| s.to_string()).collect();
    let log_probs = [-0.4, -1.1, -2.3, -1.6, -0.5, -2.9];

    let mut strategies = vec![("exact", ClusterStrategy::Exact), ("normalized", ClusterStrategy::Normalized)];
    if let Ok(endpoint) = std::env::var(NLI_ENDPOINT_ENV) {
        let config = EntailmentConfig { endpoint, timeout: Duration::from_secs(30), cache: true };
        strategies.push(("entailment", ClusterStrategy::Entailment(config)));
    } else {
        println!("({NLI_ENDPOINT_ENV} not set, skipping entailment)\n");
    }

    for (name, strategy) in strategies {
        let ids = cluster_in_context(&answers, &strategy, Some(question))?;
        let samples =
            log_probs.iter().map(|lp| ScoredSequence::from_token_log_probs(vec![*lp])).collect::<Result<_, _>>()?;
        let set = SampleSet::with_clusters(samples, ids.clone())?;
        println!(
            "{name:<11} {ids:?}  SE {:.4}  D-SE {:.4}",
            semantic_entropy(&set, false)?.value,
            discrete_semantic_entropy(&set)?.value
        );
    }
    Ok(())
}
