//! Greedy, beam and multinomial decoding of one synthetic model.

use seqscore::decode::{decode, DecodeConfig, Strategy};
use seqscore::synthdist::{exact_stats, DirichletSpec, SyntheticModel, DEFAULT_LEAF_BUDGET};

fn main() -> seqscore::Result<()> {
    let model = SyntheticModel::new(DirichletSpec::zipf_preset(20)?, 4, 3)?;
    let exact = exact_stats(&model, DEFAULT_LEAF_BUDGET)?;
    println!("exact maximum {:.4} at {:?}\n", exact.max_log_prob, exact.argmax_tokens);

    let strategies = [
        Strategy::Greedy,
        Strategy::Beam { width: 5 },
        Strategy::Multinomial { temperature: 0.5, seed: 1 },
        Strategy::Multinomial { temperature: 1.0, seed: 1 },
    ];
    for strategy in strategies {
        let config = DecodeConfig { strategy, length: model.depth() };
        let decoded = decode(&model, &config, 5)?;
        println!("{strategy:?}");
        for s in &decoded {
            println!("  {:?}  log p {:>8.4}  per token {:>7.4}", s.tokens(), s.total_log_prob(), s.ln_log_prob());
        }
    }
    Ok(())
}
