//! Walk a tiny instance through the environment by hand: masks, rewards,
//! clock jumps, the token census, and the JSON-lines event log.

use cpnshop::{EnvConfig, Environment, Instance, Operation};

fn main() -> cpnshop::Result<()> {
    // job 0: m0 for 3, then m1 for 2; job 1: m0 for 2, then m1 for 4
    let inst = Instance::new(
        2,
        vec![
            vec![Operation::new(0, 3), Operation::new(1, 2)],
            vec![Operation::new(0, 2), Operation::new(1, 4)],
        ],
    )?;
    let mut env = Environment::new(inst, EnvConfig::default())?;
    println!("observation length {}, actions {} (last = standby)", env.observation_len(), env.num_actions());

    while !env.is_terminated() {
        let (mask, before) = (env.action_mask(), env.clock());
        // prefer the lowest enabled job slot; standby only if nothing else
        let action = mask.allocations().next().unwrap_or(mask.standby_index());
        let r = env.step(action)?;
        let (queued, ready, busy, delivered) = env.net().token_census();
        println!(
            "t={before:>2} mask {:?} -> action {}  reward {:+.2}  then clock {:>2}  tokens q/r/m/d {queued}/{ready}/{busy}/{delivered}",
            mask.bits().iter().map(|&b| b as u8).collect::<Vec<_>>(),
            action,
            r.reward,
            r.info.clock
        );
    }

    let schedule = env.extract_schedule()?;
    println!("\nmakespan {} after {} decisions", schedule.makespan, env.decision_steps());
    println!("\nevent log:");
    env.net().write_event_log(std::io::stdout().lock())?;
    Ok(())
}
