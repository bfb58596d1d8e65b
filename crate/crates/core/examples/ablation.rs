//! Train under each ablation mode with the same budget and compare the
//! moving-average episode length at the end.
//!
//! ```text
//! cargo run --release --example ablation -- 30000
//! ```

use cpnshop::bench::{run_ablation, AblationMode, DecileTrend};
use cpnshop::instances::bundled;
use cpnshop::ppo::TrainConfig;
use cpnshop::EnvConfig;

fn main() -> cpnshop::Result<()> {
    let steps: u64 = std::env::args().nth(1).map_or(30_000, |s| s.parse().expect("step count"));
    let inst = bundled::ta01();
    let config = TrainConfig { total_steps: steps, ..TrainConfig::default() };

    println!("{:<13} {:>9} {:>14} {:>14}", "mode", "episodes", "final ep_len", "first->last");
    for mode in AblationMode::ALL {
        let (_, log) = run_ablation(&inst, mode, &EnvConfig::default(), &config)?;
        let final_len = log.rows.last().map_or(f64::NAN, |r| r.ep_len);
        let trend = DecileTrend::of(&log.episode_lengths())
            .map_or("-".to_string(), |t| format!("{:.0}->{:.0}", t.first_mean, t.last_mean));
        println!("{:<13} {:>9} {:>14.1} {:>14}", mode.name(), log.episodes.len(), final_len, trend);
    }
    Ok(())
}
