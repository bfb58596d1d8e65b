//! Oracles and generators shared by the integration tests.

#![allow(dead_code)]

use itertools::Itertools;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use cpnshop::ppo::{Batch, NetworkParams, Transition};
use cpnshop::{EnvConfig, Environment, Instance, Operation};

/// Random instance where every job visits every machine once, durations in
/// `lo..=hi`.
pub fn random_square(rng: &mut ChaCha8Rng, jobs: usize, machines: usize, lo: u32, hi: u32) -> Instance {
    let mut all = Vec::with_capacity(jobs);
    for _ in 0..jobs {
        let mut order: Vec<usize> = (0..machines).collect();
        for i in (1..machines).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        all.push(order.into_iter().map(|m| Operation::new(m, rng.gen_range(lo..=hi))).collect());
    }
    Instance::new(machines, all).expect("valid instance")
}

/// Smallest makespan over every legal action sequence of the environment,
/// standby included.
pub fn env_brute_force(instance: &Instance) -> u64 {
    fn go(env: &Environment, best: &mut u64) {
        if env.is_terminated() {
            *best = (*best).min(env.clock());
            return;
        }
        if env.clock() >= *best {
            return;
        }
        for action in env.action_mask().enabled() {
            let mut next = env.clone();
            next.step(action).expect("enabled action");
            go(&next, best);
        }
    }
    let env = Environment::new(instance.clone(), EnvConfig::default()).expect("env");
    let mut best = u64::MAX;
    go(&env, &mut best);
    best
}

/// Optimum by a different route: every combination of per-machine job
/// orders, each evaluated as the longest path of its precedence graph
/// (infeasible cyclic combinations are skipped).
pub fn permutation_optimum(instance: &Instance) -> u64 {
    let m = instance.num_machines();
    let ops: Vec<(usize, usize)> = instance
        .jobs()
        .iter()
        .enumerate()
        .flat_map(|(j, job)| (0..job.len()).map(move |k| (j, k)))
        .collect();
    let per_machine: Vec<Vec<(usize, usize)>> = (0..m)
        .map(|mach| ops.iter().copied().filter(|&(j, k)| instance.job(j)[k].machine == mach).collect())
        .collect();
    let orders: Vec<Vec<Vec<(usize, usize)>>> = per_machine
        .iter()
        .map(|list| list.iter().copied().permutations(list.len()).collect())
        .collect();

    let mut best = u64::MAX;
    for combo in orders.iter().multi_cartesian_product() {
        if let Some(span) = longest_path(instance, &combo) {
            best = best.min(span);
        }
    }
    best
}

fn longest_path(instance: &Instance, machine_orders: &[&Vec<(usize, usize)>]) -> Option<u64> {
    // predecessor lists: job predecessor plus machine predecessor
    let index = |j: usize, k: usize| -> usize { instance.jobs()[..j].iter().map(Vec::len).sum::<usize>() + k };
    let n = instance.total_operations();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut dur = vec![0u64; n];
    for (j, job) in instance.jobs().iter().enumerate() {
        for (k, op) in job.iter().enumerate() {
            dur[index(j, k)] = u64::from(op.duration);
            if k > 0 {
                preds[index(j, k)].push(index(j, k - 1));
            }
        }
    }
    for order in machine_orders {
        for pair in order.windows(2) {
            preds[index(pair[1].0, pair[1].1)].push(index(pair[0].0, pair[0].1));
        }
    }
    // Kahn's algorithm; a leftover node means a cycle
    let mut indegree: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (v, ps) in preds.iter().enumerate() {
        for &p in ps {
            succs[p].push(v);
        }
    }
    let mut start = vec![0u64; n];
    let mut queue: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut done = 0;
    while let Some(v) = queue.pop() {
        done += 1;
        for &s in &succs[v] {
            start[s] = start[s].max(start[v] + dur[v]);
            indegree[s] -= 1;
            if indegree[s] == 0 {
                queue.push(s);
            }
        }
    }
    (done == n).then(|| (0..n).map(|v| start[v] + dur[v]).max().unwrap_or(0))
}

/// A small random batch for gradient checks: random masks, enabled actions,
/// behaviour log-probabilities offset from the current policy so that some
/// ratios fall outside the clip range.
pub fn random_batch(rng: &mut ChaCha8Rng, params: &NetworkParams, size: usize) -> Batch {
    let input = params.input_len();
    let actions = params.num_actions();
    let mut batch = Batch::default();
    for _ in 0..size {
        let observation: Vec<f64> = (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut mask: Vec<bool> = (0..actions).map(|_| rng.gen_bool(0.6)).collect();
        let forced = rng.gen_range(0..actions);
        mask[forced] = true;
        let enabled: Vec<usize> = (0..actions).filter(|&a| mask[a]).collect();
        let action = enabled[rng.gen_range(0..enabled.len())];
        let (logits, value) = cpnshop::ppo::forward(params, &observation).expect("forward");
        let probs = cpnshop::ppo::masked_distribution(&logits, &mask).expect("dist");
        let log_prob = probs[action].ln() + rng.gen_range(-0.5..0.5);
        batch.transitions.push(Transition {
            observation,
            mask,
            action,
            log_prob,
            reward: rng.gen_range(-1.0..1.0),
            value,
            done: false,
        });
        batch.advantages.push(rng.gen_range(-2.0..2.0));
        batch.returns.push(rng.gen_range(-2.0..2.0));
    }
    batch
}

/// Largest relative error between analytic and central-difference
/// gradients of the total loss, over every actor and critic parameter.
/// Errors are taken relative to `max(|analytic|, |numeric|, floor)`.
pub fn max_gradient_error(params: &NetworkParams, batch: &Batch, config: &cpnshop::TrainConfig, h: f64, floor: f64) -> f64 {
    use cpnshop::ppo::loss_and_gradients;
    let idx: Vec<usize> = (0..batch.len()).collect();
    let (_, grads) = loss_and_gradients(params, batch, &idx, config).expect("loss");
    let loss_at = |p: &NetworkParams| loss_and_gradients(p, batch, &idx, config).expect("loss").0.loss;
    let mut worst: f64 = 0.0;
    for (net, analytic) in [(0, &grads.actor), (1, &grads.critic)] {
        for (i, &a) in analytic.iter().enumerate() {
            let shifted = |delta: f64| {
                let mut p = params.clone();
                let slot = if net == 0 { &mut p.actor.params_mut()[i] } else { &mut p.critic.params_mut()[i] };
                *slot += delta;
                loss_at(&p)
            };
            let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
            let denom = a.abs().max(numeric.abs()).max(floor);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    worst
}
