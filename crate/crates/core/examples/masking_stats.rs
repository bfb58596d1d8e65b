//! How sparse the action space is: enabled-action fraction and the share of
//! clock ticks at which a decision is needed, under a random legal policy.

use cpnshop::bench::measure_enabled_fraction;
use cpnshop::instances::bundled;
use cpnshop::{run_episode, EnvConfig, PolicyKind, RulePolicy};

fn main() -> cpnshop::Result<()> {
    for (name, inst) in [("ta01", bundled::ta01()), ("ta41", bundled::ta41())] {
        let cfg = EnvConfig::default();
        let fraction = measure_enabled_fraction(&inst, &mut RulePolicy::new(PolicyKind::Random, 1)?, &cfg)?;
        let out = run_episode(&mut RulePolicy::new(PolicyKind::Random, 1)?, &inst, &cfg)?;
        println!(
            "{name}: {:.1}% of job actions enabled on average; {} decisions over {} ticks ({:.1}%)",
            fraction * 100.0,
            out.decision_steps,
            out.clock_ticks,
            100.0 * out.decision_steps as f64 / out.clock_ticks as f64
        );
    }
    Ok(())
}
