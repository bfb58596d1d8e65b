mod common;

use num_bigint::BigUint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cpnshop::instances::{parse_instance, LcgState};
use cpnshop::ppo::{Agent, NetworkParams};
use cpnshop::{validate, EnvConfig, Environment, Instance, InstanceFormat, Operation, Policy, PolicyKind, RulePolicy, Schedule};

const A: u64 = 16807;
const M: u64 = 2_147_483_647;

fn instance_strategy(max_jobs: usize, max_machines: usize) -> impl Strategy<Value = Instance> {
    (1..=max_jobs, 1..=max_machines, any::<u64>()).prop_map(|(j, m, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        common::random_square(&mut rng, j, m, 1, 20)
    })
}

/// Recirculating jobs of uneven length, so machines can be revisited.
fn ragged_strategy() -> impl Strategy<Value = Instance> {
    (1usize..=5, 1usize..=4, any::<u64>()).prop_map(|(j, m, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jobs = (0..j)
            .map(|_| {
                let n = rng.gen_range(1..=6);
                (0..n).map(|_| Operation::new(rng.gen_range(0..m), rng.gen_range(1..=15))).collect()
            })
            .collect();
        Instance::new(m, jobs).unwrap()
    })
}

fn random_config(rng: &mut ChaCha8Rng, jobs: usize) -> EnvConfig {
    EnvConfig {
        capacity: Some(jobs + rng.gen_range(0..3)),
        event_based: rng.gen_bool(0.7),
        ..EnvConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tokens_conserved_and_machines_exclusive(inst in ragged_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut env = Environment::new(inst.clone(), random_config(&mut rng, inst.num_jobs())).unwrap();
        let total = inst.total_operations();
        let mut guard = 0;
        loop {
            let net = env.net();
            let (q, r, p, d) = net.token_census();
            prop_assert_eq!(q + r + p + d, total);
            prop_assert_eq!(net.total_tokens(), total);
            for m in 0..net.num_machines() {
                prop_assert_eq!(net.is_idle(m), net.processing(m).is_none());
            }
            prop_assert_eq!(net.busy_count() + net.idle_count(), net.num_machines());
            if env.is_terminated() {
                prop_assert_eq!(d, total);
                break;
            }
            let enabled: Vec<usize> = env.action_mask().enabled().collect();
            prop_assert!(!enabled.is_empty(), "live state with nothing enabled");
            env.step(enabled[rng.gen_range(0..enabled.len())]).unwrap();
            guard += 1;
            prop_assert!(guard < 100_000);
        }
    }

    #[test]
    fn random_legal_schedules_are_valid(inst in ragged_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = random_config(&mut rng, inst.num_jobs());
        let mut env = Environment::new(inst.clone(), cfg).unwrap();
        while !env.is_terminated() {
            let enabled: Vec<usize> = env.action_mask().enabled().collect();
            env.step(enabled[rng.gen_range(0..enabled.len())]).unwrap();
        }
        let schedule = env.extract_schedule().unwrap();
        prop_assert!(validate(&schedule, &inst).is_ok());
        prop_assert_eq!(schedule.len(), inst.total_operations());
        let lower = (0..inst.num_jobs())
            .map(|j| inst.job(j).iter().map(|o| u64::from(o.duration)).sum::<u64>())
            .max()
            .unwrap();
        prop_assert!(schedule.makespan >= lower);
    }

    #[test]
    fn lcg_matches_bigint(seed in 1i64..(M as i64), steps in 1usize..200) {
        let mut state = LcgState::new(seed).unwrap();
        let mut big = BigUint::from(seed as u64);
        for _ in 0..steps {
            state.next_unit();
            big = (big * BigUint::from(A)) % BigUint::from(M);
            prop_assert_eq!(BigUint::from(state.value() as u64), big.clone());
        }
    }

    #[test]
    fn uniform_int_stays_in_range(seed in 1i64..(M as i64), lo in -50i64..50, span in 0i64..100) {
        let mut state = LcgState::new(seed).unwrap();
        for _ in 0..50 {
            let v = state.uniform_int(lo, lo + span).unwrap();
            prop_assert!((lo..=lo + span).contains(&v));
        }
    }

    #[test]
    fn instance_text_round_trips(inst in instance_strategy(6, 6)) {
        let orlib = parse_instance(&inst.to_orlib(), InstanceFormat::Orlib).unwrap();
        prop_assert_eq!(&orlib, &inst);
        let taillard = parse_instance(&inst.to_taillard().unwrap(), InstanceFormat::Taillard).unwrap();
        prop_assert_eq!(&taillard, &inst);
    }

    #[test]
    fn ragged_instances_round_trip_orlib(inst in ragged_strategy()) {
        let back = parse_instance(&inst.to_orlib(), InstanceFormat::Orlib).unwrap();
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn schedule_json_and_csv_round_trip(inst in ragged_strategy(), kind in prop::sample::select(PolicyKind::HEURISTICS.to_vec())) {
        let mut policy = RulePolicy::new(kind, 0).unwrap();
        let out = cpnshop::run_episode(&mut policy, &inst, &EnvConfig::default()).unwrap();
        let mut buf = Vec::new();
        out.schedule.write_json(&mut buf).unwrap();
        prop_assert_eq!(&Schedule::read_json(buf.as_slice()).unwrap(), &out.schedule);
        buf.clear();
        out.schedule.write_csv(&mut buf).unwrap();
        prop_assert_eq!(&Schedule::read_csv(buf.as_slice()).unwrap(), &out.schedule);
    }

    #[test]
    fn duration_rules_ignore_time_scale(
        inst in instance_strategy(5, 5),
        k in 2u32..7,
        kind in prop::sample::select(vec![PolicyKind::Spt, PolicyKind::Lpt, PolicyKind::Sso, PolicyKind::Lso]),
    ) {
        let scaled = Instance::new(
            inst.num_machines(),
            inst.jobs().iter().map(|job| job.iter().map(|o| Operation::new(o.machine, o.duration * k)).collect()).collect(),
        ).unwrap();
        let cfg = EnvConfig::default();
        let a = cpnshop::run_episode(&mut RulePolicy::new(kind, 0).unwrap(), &inst, &cfg).unwrap();
        let b = cpnshop::run_episode(&mut RulePolicy::new(kind, 0).unwrap(), &scaled, &cfg).unwrap();
        prop_assert_eq!(&a.actions, &b.actions);
        prop_assert_eq!(a.schedule.makespan * u64::from(k), b.schedule.makespan);
    }

    #[test]
    fn sampling_agent_never_picks_masked(inst in instance_strategy(5, 4), seed in any::<u64>()) {
        let cfg = EnvConfig { capacity: Some(inst.num_jobs() + 2), ..EnvConfig::default() };
        let mut env = Environment::new(inst, cfg).unwrap();
        let params = NetworkParams::new(env.observation_len(), env.num_actions(), 16, seed).unwrap();
        let mut agent = Agent::sampling(params, seed);
        while !env.is_terminated() {
            let mask = env.action_mask();
            let a = agent.act(&env, &mask).unwrap();
            prop_assert!(mask.is_enabled(a));
            env.step(a).unwrap();
        }
    }
}

#[test]
fn brute_force_oracles_agree_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let inst = common::random_square(&mut rng, 3, 3, 1, 9);
        assert_eq!(common::env_brute_force(&inst), common::permutation_optimum(&inst));
    }
}
