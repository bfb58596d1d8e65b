//! One network for many shop sizes: a padded environment with 100 job slots
//! runs a 15x15 instance (empty slots stay masked), and operations are
//! appended to an empty slot while the episode is under way.

use cpnshop::instances::bundled;
use cpnshop::ppo::{evaluate, NetworkParams};
use cpnshop::{EnvConfig, Environment, Policy, PolicyKind, RulePolicy};

fn main() -> cpnshop::Result<()> {
    let inst = bundled::ta01();
    let env_config = EnvConfig::default().with_capacity(100);
    let mut env = Environment::new(inst.clone(), env_config.clone())?;
    println!(
        "capacity {} -> observation length {}, {} actions",
        env.capacity(),
        env.observation_len(),
        env.num_actions()
    );

    let mut spt = RulePolicy::new(PolicyKind::Spt, 0)?;
    let mut appended = false;
    while !env.is_terminated() {
        let mask = env.action_mask();
        assert!(mask.allocations().all(|slot| slot < inst.num_jobs() || appended));
        let action = spt.act(&env, &mask)?;
        env.step(action)?;
        if !appended && env.clock() >= 200 {
            // a rush order arrives in slot 90: machine 3 then machine 7
            env.append_operation(90, 3, 40)?;
            env.append_operation(90, 7, 25)?;
            appended = true;
            println!("t={}: appended a two-operation job to slot 90", env.clock());
        }
    }
    let schedule = env.extract_schedule()?;
    let rush: Vec<_> = schedule.entries.iter().filter(|e| e.job == 90).collect();
    println!("makespan {} with the rush job at {:?}", schedule.makespan, rush.iter().map(|e| (e.start, e.end)).collect::<Vec<_>>());

    // any network shaped for 100 slots and 15 machines can act here
    let params = NetworkParams::new(env.observation_len(), env.num_actions(), 64, 0)?;
    let untrained = evaluate(&params, &inst, &env_config)?;
    println!("untrained 100-slot network on ta01: makespan {}", untrained.makespan);
    Ok(())
}
