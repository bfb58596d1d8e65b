//! Decision policies: six dispatching rules, a random-legal baseline, and
//! the episode driver shared by every policy (including trained agents).

use std::fmt;
use std::str::FromStr;

use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ActionMask, EnvConfig, Environment, SlotFeatures};
use crate::error::{Error, Result};
use crate::instances::Instance;
use crate::petrinet::FiringEvent;
use crate::schedule::{validate, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PolicyKind {
    /// Shortest processing time of the head operation.
    Spt,
    /// Longest processing time of the head operation.
    Lpt,
    /// Fewest remaining operations.
    Sps,
    /// Most remaining operations.
    Lps,
    /// Shortest subsequent operation.
    Sso,
    /// Longest subsequent operation.
    Lso,
    Random,
    Agent,
}

impl PolicyKind {
    pub const HEURISTICS: [PolicyKind; 6] = [
        PolicyKind::Spt,
        PolicyKind::Lpt,
        PolicyKind::Sps,
        PolicyKind::Lps,
        PolicyKind::Sso,
        PolicyKind::Lso,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Spt => "SPT",
            Self::Lpt => "LPT",
            Self::Sps => "SPS",
            Self::Lps => "LPS",
            Self::Sso => "SSO",
            Self::Lso => "LSO",
            Self::Random => "RANDOM",
            Self::Agent => "AGENT",
        }
    }

    /// Score of a slot and whether lower scores win.
    fn score(self, f: &SlotFeatures) -> Option<(u64, bool)> {
        // a head with no successor has a subsequent-operation time of 0
        let next = u64::from(f.next_duration.unwrap_or(0));
        Some(match self {
            Self::Spt => (u64::from(f.head_duration), true),
            Self::Lpt => (u64::from(f.head_duration), false),
            Self::Sps => (f.remaining_ops as u64, true),
            Self::Lps => (f.remaining_ops as u64, false),
            Self::Sso => (next, true),
            Self::Lso => (next, false),
            Self::Random | Self::Agent => return None,
        })
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "spt" => Self::Spt,
            "lpt" => Self::Lpt,
            "sps" => Self::Sps,
            "lps" => Self::Lps,
            "sso" => Self::Sso,
            "lso" => Self::Lso,
            "random" => Self::Random,
            "agent" => Self::Agent,
            other => return Err(Error::InvalidConfig(format!("unknown policy {other:?}"))),
        })
    }
}

/// Picks an enabled allocation by rule `kind`. Only mask-enabled job slots
/// are scored, standby is never chosen, ties go to the lowest slot index.
/// `features(slot)` supplies the slot's pending-operation features.
pub fn decide<F>(kind: PolicyKind, features: F, mask: &ActionMask, rng: Option<&mut ChaCha8Rng>) -> Result<usize>
where
    F: Fn(usize) -> Option<SlotFeatures>,
{
    if mask.count() == 0 {
        return Err(Error::EmptyMask);
    }
    match kind {
        PolicyKind::Agent => Err(Error::InvalidConfig(
            "the agent policy needs trained parameters".into(),
        )),
        PolicyKind::Random => {
            let rng = rng.ok_or_else(|| Error::InvalidConfig("random policy needs an rng".into()))?;
            mask.allocations()
                .choose(rng)
                .or_else(|| mask.standby().then(|| mask.standby_index()))
                .ok_or(Error::EmptyMask)
        }
        rule => {
            let mut best: Option<(usize, u64)> = None;
            for slot in mask.allocations() {
                let f = features(slot).ok_or_else(|| Error::BadIndex(format!("slot {slot} has no pending operation")))?;
                let (score, lower_wins) = rule.score(&f).expect("heuristic rule");
                let better = match best {
                    None => true,
                    Some((_, b)) if lower_wins => score < b,
                    Some((_, b)) => score > b,
                };
                if better {
                    best = Some((slot, score));
                }
            }
            match best {
                Some((slot, _)) => Ok(slot),
                // only standby is legal (possible without event-based control)
                None => Ok(mask.standby_index()),
            }
        }
    }
}

/// Anything that picks an action in an environment state.
pub trait Policy {
    fn act(&mut self, env: &Environment, mask: &ActionMask) -> Result<usize>;
}

/// A dispatching rule or the random-legal baseline.
#[derive(Debug, Clone)]
pub struct RulePolicy {
    kind: PolicyKind,
    rng: ChaCha8Rng,
}

impl RulePolicy {
    pub fn new(kind: PolicyKind, seed: u64) -> Result<Self> {
        if kind == PolicyKind::Agent {
            return Err(Error::InvalidConfig("use ppo::Agent for the agent policy".into()));
        }
        Ok(Self {
            kind,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }
}

impl Policy for RulePolicy {
    fn act(&mut self, env: &Environment, mask: &ActionMask) -> Result<usize> {
        decide(self.kind, |s| env.slot_features(s), mask, Some(&mut self.rng))
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub schedule: Schedule,
    pub decision_steps: u64,
    pub clock_ticks: u64,
    pub total_reward: f64,
    /// Mean over decision points of enabled allocations / capacity.
    pub enabled_fraction: f64,
    /// Actions taken, in order.
    pub actions: Vec<usize>,
    /// Every transition firing of the episode.
    pub events: Vec<FiringEvent>,
}

/// Drives a fresh environment to termination with `policy` and checks the
/// resulting schedule.
pub fn run_episode(policy: &mut dyn Policy, instance: &Instance, config: &EnvConfig) -> Result<EpisodeOutcome> {
    let mut env = Environment::new(instance.clone(), config.clone())?;
    run_in(policy, &mut env)
}

/// Like [`run_episode`] but on an existing environment, from its current state.
pub fn run_in(policy: &mut dyn Policy, env: &mut Environment) -> Result<EpisodeOutcome> {
    let mut total_reward = 0.0;
    let mut fraction_sum = 0.0;
    let mut decisions = 0u64;
    let mut actions = Vec::new();
    while !env.is_terminated() {
        let mask = env.action_mask();
        fraction_sum += mask.allocations().count() as f64 / env.capacity() as f64;
        decisions += 1;
        let action = policy.act(env, &mask)?;
        actions.push(action);
        total_reward += env.step(action)?.reward;
    }
    let schedule = env.extract_schedule()?;
    validate(&schedule, env.instance())?;
    Ok(EpisodeOutcome {
        schedule,
        decision_steps: env.decision_steps(),
        clock_ticks: env.clock(),
        total_reward,
        enabled_fraction: if decisions == 0 { 0.0 } else { fraction_sum / decisions as f64 },
        actions,
        events: env.net().events().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{bundled, Operation};

    fn feats(head: u32, remaining: usize, next: Option<u32>) -> SlotFeatures {
        SlotFeatures { head_duration: head, remaining_ops: remaining, next_duration: next }
    }

    #[test]
    fn spt_picks_shortest_head() {
        let table = [feats(4, 1, None), feats(2, 1, None), feats(7, 1, None)];
        let mask = ActionMask::new(vec![true, true, true, false]);
        let a = decide(PolicyKind::Spt, |s| table.get(s).copied(), &mask, None).unwrap();
        assert_eq!(a, 1);
        let a = decide(PolicyKind::Lpt, |s| table.get(s).copied(), &mask, None).unwrap();
        assert_eq!(a, 2);
    }

    #[test]
    fn lps_picks_most_remaining() {
        let table = [feats(1, 3, None), feats(1, 5, None)];
        let mask = ActionMask::new(vec![true, true, false]);
        assert_eq!(decide(PolicyKind::Lps, |s| table.get(s).copied(), &mask, None).unwrap(), 1);
        assert_eq!(decide(PolicyKind::Sps, |s| table.get(s).copied(), &mask, None).unwrap(), 0);
    }

    #[test]
    fn subsequent_rules_treat_last_op_as_zero() {
        let table = [feats(1, 2, Some(5)), feats(1, 1, None), feats(1, 2, Some(9))];
        let mask = ActionMask::new(vec![true, true, true, true]);
        assert_eq!(decide(PolicyKind::Sso, |s| table.get(s).copied(), &mask, None).unwrap(), 1);
        assert_eq!(decide(PolicyKind::Lso, |s| table.get(s).copied(), &mask, None).unwrap(), 2);
    }

    #[test]
    fn ties_go_to_lowest_index_and_masked_slots_ignored() {
        let table = [feats(1, 1, None), feats(3, 1, None), feats(3, 1, None)];
        let mask = ActionMask::new(vec![false, true, true, true]);
        assert_eq!(decide(PolicyKind::Spt, |s| table.get(s).copied(), &mask, None).unwrap(), 1);
    }

    #[test]
    fn empty_mask_is_error() {
        let mask = ActionMask::new(vec![false, false]);
        assert!(matches!(decide(PolicyKind::Spt, |_| None, &mask, None), Err(Error::EmptyMask)));
    }

    #[test]
    fn random_is_reproducible_and_legal() {
        let ta01 = bundled::ta01();
        let cfg = EnvConfig::default();
        let a = run_episode(&mut RulePolicy::new(PolicyKind::Random, 9).unwrap(), &ta01, &cfg).unwrap();
        let b = run_episode(&mut RulePolicy::new(PolicyKind::Random, 9).unwrap(), &ta01, &cfg).unwrap();
        assert_eq!(a.schedule, b.schedule);
        assert_eq!(a.actions, b.actions);
        assert_eq!(a.decision_steps, 225);
    }

    #[test]
    fn heuristics_produce_valid_schedules() {
        let ta01 = bundled::ta01();
        for kind in PolicyKind::HEURISTICS {
            let out = run_episode(&mut RulePolicy::new(kind, 0).unwrap(), &ta01, &EnvConfig::default()).unwrap();
            validate(&out.schedule, &ta01).unwrap();
            assert_eq!(out.schedule.makespan, out.clock_ticks);
        }
    }

    #[test]
    fn single_op_enabled_fraction() {
        let inst = Instance::new(1, vec![vec![Operation::new(0, 5)]]).unwrap();
        let out = run_episode(&mut RulePolicy::new(PolicyKind::Spt, 0).unwrap(), &inst, &EnvConfig::default()).unwrap();
        assert_eq!(out.enabled_fraction, 1.0);
    }
}
