//! Sample a Dirichlet-Zipf model and enumerate its ground truth.
//!
//! ```text
//! cargo run --release --example synthetic_oracle -- [vocab] [depth] [seed]
//! ```

use seqscore::synthdist::{exact_stats, DirichletSpec, SynthModelConfig, DEFAULT_LEAF_BUDGET};
use seqscore::TokenDistributionSource;

fn main() -> seqscore::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let vocab = args.first().copied().unwrap_or(20) as usize;
    let depth = args.get(1).copied().unwrap_or(3) as usize;
    let seed = args.get(2).copied().unwrap_or(7);

    let config = SynthModelConfig { spec: DirichletSpec::zipf_preset(vocab)?, depth, seed };
    print!("{}", config.to_config_string());
    let model = config.build()?;

    let root: Vec<f64> = model.next(&[]).probs().collect();
    let mut top: Vec<(usize, f64)> = root.iter().copied().enumerate().collect();
    top.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("\nroot distribution, top 5:");
    for (t, p) in top.iter().take(5) {
        println!("  token {t:>3}  {p:.4}");
    }

    let exact = exact_stats(&model, DEFAULT_LEAF_BUDGET)?;
    println!("\n{} sequences", exact.leaves);
    println!(
        "entropy       {:.4} nats (uniform would be {:.4})",
        exact.entropy_nats,
        depth as f64 * (vocab as f64).ln()
    );
    println!("max log-prob  {:.4} at {:?}", exact.max_log_prob, exact.argmax_tokens);
    println!("total mass    {:.15}", exact.total_mass);
    Ok(())
}
