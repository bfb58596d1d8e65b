//! Train the masked PPO agent on a generated 6x6 instance, compare its
//! greedy schedule with the dispatching rules, and save a checkpoint and
//! metrics log.
//!
//! ```text
//! cargo run --release --example train_agent -- 100000 out/
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use cpnshop::ppo::{evaluate, train_with_progress, Checkpoint, TrainConfig};
use cpnshop::{generate_random, run_episode, EnvConfig, PolicyKind, RulePolicy};

fn main() -> cpnshop::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().map_or(100_000, |s| s.parse().expect("step count"));
    let dir = args.next().map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&dir)?;

    let inst = generate_random(6, 6, 1, 2)?;
    let env = EnvConfig::default();
    for kind in PolicyKind::HEURISTICS {
        let out = run_episode(&mut RulePolicy::new(kind, 0)?, &inst, &env)?;
        println!("{kind:>4}: {}", out.schedule.makespan);
    }

    let config = TrainConfig { total_steps: steps, ..TrainConfig::default() };
    let (params, log) = train_with_progress(std::slice::from_ref(&inst), &env, &config, |row| {
        println!(
            "step {:>7}  mean episode length {:>6.2}  mean reward {:>7.3}  kl {:.4}  entropy {:.3}",
            row.step, row.ep_len, row.ep_rew, row.kl, row.entropy
        );
    })?;

    let schedule = evaluate(&params, &inst, &env)?;
    println!("agent (greedy): {}", schedule.makespan);

    let ckpt = dir.join("agent_6x6.json");
    Checkpoint::new(&params, &env.clone().with_capacity(inst.num_jobs())).save(&ckpt)?;
    let metrics = dir.join("agent_6x6_metrics.csv");
    log.write_metrics_csv(BufWriter::new(File::create(&metrics)?))?;
    println!("wrote {} and {}", ckpt.display(), metrics.display());
    Ok(())
}
