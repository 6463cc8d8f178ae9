//! How close do beam search and sampling get to the most likely sequence?
//! Gaps are decoded minus exact log-probability, over fresh model draws.

use seqscore::cli::synth::{run_synth_maxlik, SynthExperimentConfig, SynthStrategy};

fn main() -> seqscore::Result<()> {
    let config = SynthExperimentConfig {
        depths: vec![2, 3, 4],
        sample_counts: vec![1, 5, 10],
        runs: 100,
        strategies: vec![SynthStrategy::Beam, SynthStrategy::Multinomial { temperature: 1.0 }],
        resample_model: true,
        ..Default::default()
    };
    println!("{:>2} {:>5} {:>3} {:>10} {:>10} {:>6}", "T", "kind", "N", "median gap", "q05", "hits");
    for r in run_synth_maxlik(&config)? {
        let kind = match r.strategy {
            SynthStrategy::Beam => "beam",
            SynthStrategy::Multinomial { .. } => "ms",
        };
        println!("{:>2} {kind:>5} {:>3} {:>10.4} {:>10.4} {:>6.2}", r.depth, r.n, r.median_gap, r.q05, r.hit_rate);
    }
    Ok(())
}
