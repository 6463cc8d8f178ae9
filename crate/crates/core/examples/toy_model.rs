//! The two-token toy model: exact statistics, greedy decoding and G-NLL.
//!
//! ```text
//! cargo run --example toy_model
//! ```

use seqscore::decode::{beam_search, greedy};
use seqscore::estimators::g_nll;
use seqscore::seqmodel::TableSource;
use seqscore::synthdist::{exact_stats, DEFAULT_LEAF_BUDGET};
use seqscore::{TokenDistribution, Vocab};

fn main() -> seqscore::Result<()> {
    let node = |p: f64| TokenDistribution::from_probs(&[p, 1.0 - p]);
    // p(0) = .6, p(0|0) = .7, p(0|1) = .5
    let model =
        TableSource::new(Vocab::new(2)?, 2, vec![(vec![], node(0.6)?), (vec![0], node(0.7)?), (vec![1], node(0.5)?)])?;

    let exact = exact_stats(&model, DEFAULT_LEAF_BUDGET)?;
    println!("entropy       {:.4} nats", exact.entropy_nats);
    println!("max log-prob  {:.4} at {:?}", exact.max_log_prob, exact.argmax_tokens);

    let g = greedy(&model);
    println!("greedy        {:?}  G-NLL {:.4}", g.tokens(), g_nll(&g).value);

    println!("full beam:");
    for s in beam_search(&model, 4)? {
        println!("  {:?}  p = {:.2}", s.tokens(), s.total_log_prob().exp());
    }
    Ok(())
}
