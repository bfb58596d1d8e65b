//! Event-driven decision environment over the shop net.
//!
//! The action space has `capacity + 1` entries: action `i < capacity`
//! selects job slot `i` and allocates its head operation to the machine the
//! operation is colored for (both firings happen at the current clock), and
//! the last action is standby. Between decisions the clock runs on its own:
//! with event-based control the agent is only consulted when at least one
//! allocation is enabled.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{Instance, Operation};
use crate::petrinet::{FiringEvent, PetriNet, Time, TransitionId};
use crate::schedule::{Schedule, ScheduleEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Machine utilization right after the action, minus the standby penalty.
    #[default]
    Instantaneous,
    /// A flat -1 per decision step.
    FixedNegative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub observation_depth: usize,
    pub standby_penalty: f64,
    /// Number of job slots; `None` means exactly the instance's job count.
    pub capacity: Option<usize>,
    pub reward_mode: RewardMode,
    pub event_based: bool,
    /// When false, masked actions are accepted as no-ops with zero reward.
    pub masking: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            observation_depth: 1,
            standby_penalty: 0.1,
            capacity: None,
            reward_mode: RewardMode::Instantaneous,
            event_based: true,
            masking: true,
        }
    }
}

impl EnvConfig {
    pub fn with_capacity(mut self, capacity: usize) -> Self {
        self.capacity = Some(capacity);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.observation_depth == 0 {
            return Err(Error::InvalidConfig("observation_depth must be at least 1".into()));
        }
        if !self.standby_penalty.is_finite() || self.standby_penalty < 0.0 {
            return Err(Error::InvalidConfig("standby_penalty must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Binary mask over the `capacity + 1` actions; the last bit is standby.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActionMask(Vec<bool>);

impl ActionMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// Every action enabled.
    pub fn all(len: usize) -> Self {
        Self(vec![true; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn is_enabled(&self, action: usize) -> bool {
        self.0.get(action).copied().unwrap_or(false)
    }

    pub fn standby_index(&self) -> usize {
        self.0.len() - 1
    }

    pub fn standby(&self) -> bool {
        self.0.last().copied().unwrap_or(false)
    }

    /// Enabled non-standby actions.
    pub fn allocations(&self) -> impl Iterator<Item = usize> + '_ {
        let n = self.0.len().saturating_sub(1);
        self.0[..n].iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn enabled(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub clock: Time,
    pub decision_steps: u64,
    pub clock_ticks: u64,
    /// Whether the action changed the marking (false for a rejected no-op).
    pub fired: bool,
    pub events: Vec<FiringEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub mask: ActionMask,
    pub reward: f64,
    pub terminated: bool,
    pub info: StepInfo,
}

/// Per-slot features the dispatching rules score on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotFeatures {
    pub head_duration: u32,
    /// Operations not yet allocated, head included.
    pub remaining_ops: usize,
    /// Duration of the operation after the head, if any.
    pub next_duration: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct Environment {
    original: Instance,
    instance: Instance,
    config: EnvConfig,
    capacity: usize,
    net: PetriNet,
    duration_scale: f64,
    decision_steps: u64,
}

impl Environment {
    /// Builds the environment; call [`Environment::observe`] and
    /// [`Environment::action_mask`] (or [`Environment::reset`]) for the
    /// initial state.
    pub fn new(instance: Instance, config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let capacity = config.capacity.unwrap_or(instance.num_jobs());
        let net = PetriNet::new(&instance, capacity)?;
        let mut env = Self {
            original: instance.clone(),
            duration_scale: f64::from(instance.max_duration().max(1)),
            instance,
            config,
            capacity,
            net,
            decision_steps: 0,
        };
        env.settle();
        Ok(env)
    }

    /// Restores the initial marking of the original instance.
    pub fn reset(&mut self) -> (Observation, ActionMask) {
        self.instance = self.original.clone();
        self.net = PetriNet::new(&self.instance, self.capacity).expect("capacity already checked");
        self.duration_scale = f64::from(self.instance.max_duration().max(1));
        self.decision_steps = 0;
        self.settle();
        (self.observe(), self.action_mask())
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn num_actions(&self) -> usize {
        self.capacity + 1
    }

    pub fn standby_action(&self) -> usize {
        self.capacity
    }

    pub fn num_machines(&self) -> usize {
        self.net.num_machines()
    }

    pub fn observation_len(&self) -> usize {
        observation_len(self.num_machines(), self.capacity, self.config.observation_depth)
    }

    pub fn net(&self) -> &PetriNet {
        &self.net
    }

    /// The instance including any appended operations.
    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn clock(&self) -> Time {
        self.net.clock()
    }

    pub fn decision_steps(&self) -> u64 {
        self.decision_steps
    }

    pub fn is_terminated(&self) -> bool {
        self.net.is_terminal()
    }

    fn allocation_enabled(&self, slot: usize) -> bool {
        !self.net.job_in_process(slot)
            && self.net.head(slot).is_some_and(|tok| self.net.is_idle(tok.color))
    }

    fn any_allocation(&self) -> bool {
        (0..self.capacity).any(|s| self.allocation_enabled(s))
    }

    /// Legal actions in the current marking, derived from the net's guards.
    pub fn action_mask(&self) -> ActionMask {
        let mut bits: Vec<bool> = (0..self.capacity).map(|s| self.allocation_enabled(s)).collect();
        let any_alloc = bits.iter().any(|&b| b);
        let busy = self.net.busy_count() > 0;
        // Without event-based control standby is the only way to let time pass.
        bits.push(busy && (any_alloc || !self.config.event_based));
        ActionMask(bits)
    }

    pub fn slot_features(&self, slot: usize) -> Option<SlotFeatures> {
        let mut pending = self.net.pending(slot);
        let head = pending.next()?;
        Some(SlotFeatures {
            head_duration: head.duration,
            remaining_ops: self.net.pending_count(slot),
            next_duration: pending.next().map(|t| t.duration),
        })
    }

    /// Flat state vector: per-machine remaining processing time, then for each
    /// job slot and depth level the (machine / M, duration) of the pending
    /// operation or -1 sentinels, then the delivered fraction. Times are
    /// scaled by the largest operation duration.
    pub fn observe(&self) -> Observation {
        let m = self.num_machines();
        let depth = self.config.observation_depth;
        let mut obs = Vec::with_capacity(self.observation_len());
        for machine in 0..m {
            let remaining = self
                .net
                .processing(machine)
                .map_or(0.0, |t| f64::from(t.duration.saturating_sub(t.elapsed)));
            obs.push(remaining / self.duration_scale);
        }
        for slot in 0..self.capacity {
            let mut pending = self.net.pending(slot);
            for _ in 0..depth {
                match pending.next() {
                    Some(t) => {
                        obs.push(t.color as f64 / m as f64);
                        obs.push(f64::from(t.duration) / self.duration_scale);
                    }
                    None => obs.extend([-1.0, -1.0]),
                }
            }
        }
        let total = self.net.total_tokens();
        obs.push(if total == 0 {
            0.0
        } else {
            self.net.delivered_count() as f64 / total as f64
        });
        Observation(obs)
    }

    fn utilization(&self) -> f64 {
        1.0 - self.net.idle_count() as f64 / self.num_machines() as f64
    }

    /// Reward for `action`, evaluated on the marking right after it took
    /// effect (for standby: after the jump to the next completion) and
    /// before the clock runs on to the next decision point.
    fn reward(&self, action: usize) -> f64 {
        match self.config.reward_mode {
            RewardMode::FixedNegative => -1.0,
            RewardMode::Instantaneous => {
                let penalty = if action == self.standby_action() {
                    self.config.standby_penalty
                } else {
                    0.0
                };
                self.utilization() - penalty
            }
        }
    }

    /// Runs the clock while nothing can be decided.
    fn settle(&mut self) -> Vec<FiringEvent> {
        let mut events = Vec::new();
        if self.config.event_based {
            while !self.net.is_terminal() && !self.any_allocation() {
                events.extend(self.net.advance_clock());
            }
        }
        events
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.net.is_terminal() {
            return Err(Error::Terminated);
        }
        if action > self.capacity {
            return Err(Error::BadIndex(format!(
                "action {action} outside 0..={}",
                self.capacity
            )));
        }
        let mask = self.action_mask();
        if !mask.is_enabled(action) {
            if self.config.masking {
                return Err(Error::MaskedAction(action));
            }
            self.decision_steps += 1;
            return Ok(self.result(0.0, false, Vec::new()));
        }
        self.decision_steps += 1;

        let mut events = Vec::new();
        if action < self.capacity {
            if self.net.ready(action).is_none() {
                events.push(self.net.fire(TransitionId::Selection(action))?);
            }
            let machine = self.net.ready(action).expect("selected").color;
            events.push(self.net.fire(TransitionId::Allocation { job: action, machine })?);
        } else if self.config.event_based {
            events.extend(self.net.advance_to_next_delivery());
        } else {
            events.extend(self.net.advance_clock());
        }
        let reward = self.reward(action);
        events.extend(self.settle());
        Ok(self.result(reward, true, events))
    }

    fn result(&self, reward: f64, fired: bool, events: Vec<FiringEvent>) -> StepResult {
        StepResult {
            observation: self.observe(),
            mask: self.action_mask(),
            reward,
            terminated: self.net.is_terminal(),
            info: StepInfo {
                clock: self.net.clock(),
                decision_steps: self.decision_steps,
                clock_ticks: self.net.clock(),
                fired,
                events,
            },
        }
    }

    /// Appends an operation to job slot `job` during an episode.
    pub fn append_operation(&mut self, job: usize, machine: usize, duration: u32) -> Result<()> {
        if self.net.is_terminal() {
            return Err(Error::Terminated);
        }
        let op = Operation::new(machine, duration);
        let seq = self.net.append(job, op)?;
        self.instance.push_operation(job, op)?;
        debug_assert_eq!(self.instance.job(job).len(), seq + 1);
        self.duration_scale = self.duration_scale.max(f64::from(duration));
        Ok(())
    }

    /// The plan read back from the tokens' stays in processing places.
    pub fn extract_schedule(&self) -> Result<Schedule> {
        if !self.net.is_terminal() {
            return Err(Error::NotTerminated);
        }
        let entries = self
            .net
            .delivered_tokens()
            .map(|t| {
                let (start, end) = t.processing_interval().expect("delivered tokens were processed");
                ScheduleEntry {
                    job: t.job,
                    op: t.seq,
                    machine: t.color,
                    start,
                    end,
                }
            })
            .collect();
        Ok(Schedule::from_entries(entries))
    }
}

pub fn observation_len(machines: usize, capacity: usize, depth: usize) -> usize {
    machines + capacity * depth * 2 + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::bundled;
    use crate::schedule::validate;

    fn inst(m: usize, jobs: &[&[(usize, u32)]]) -> Instance {
        Instance::new(
            m,
            jobs.iter()
                .map(|ops| ops.iter().map(|&(m, d)| Operation::new(m, d)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn reset_shapes() {
        let mut env = Environment::new(bundled::ta01(), EnvConfig::default()).unwrap();
        let (obs, mask) = env.reset();
        assert_eq!(obs.len(), 46);
        assert_eq!(mask.len(), 16);
        assert!(mask.bits()[..15].iter().all(|&b| b));
        assert!(!mask.standby());

        let env = Environment::new(bundled::ta01(), EnvConfig::default().with_capacity(100)).unwrap();
        let mask = env.action_mask();
        assert!(mask.bits()[15..100].iter().all(|&b| !b));
        assert_eq!(env.observation_len(), 15 + 200 + 1);
    }

    #[test]
    fn single_op_mask_and_episode() {
        let mut env = Environment::new(inst(1, &[&[(0, 5)]]), EnvConfig::default()).unwrap();
        assert_eq!(env.action_mask().bits(), &[true, false]);
        let r = env.step(0).unwrap();
        assert!(r.terminated);
        assert_eq!(r.info.clock, 5);
        let s = env.extract_schedule().unwrap();
        assert_eq!(s.entries, vec![ScheduleEntry { job: 0, op: 0, machine: 0, start: 0, end: 5 }]);
        assert_eq!(s.makespan, 5);
        assert!(matches!(env.step(0), Err(Error::Terminated)));
    }

    #[test]
    fn shared_machine_contention() {
        let mut env = Environment::new(inst(2, &[&[(0, 3), (1, 1)], &[(0, 4), (1, 1)]]), EnvConfig::default()).unwrap();
        assert_eq!(env.action_mask().bits(), &[true, true, false]);
        let r = env.step(0).unwrap();
        // m0 now busy, so job 1 is blocked and nothing else can be allocated:
        // the clock runs until job 0 leaves m0 at t = 3
        assert_eq!(r.info.clock, 3);
        assert_eq!(r.mask.bits(), &[true, true, false]);
    }

    #[test]
    fn standby_bit_follows_busy_machine() {
        let mut env = Environment::new(inst(2, &[&[(0, 3)], &[(0, 4)], &[(1, 2)]]), EnvConfig::default()).unwrap();
        assert_eq!(env.action_mask().bits(), &[true, true, true, false]);
        let r = env.step(0).unwrap();
        assert_eq!(r.info.clock, 0);
        assert_eq!(r.mask.bits(), &[false, false, true, true]);
        // standby jumps to the next completion (job 0 on m0 at t = 3)
        let r = env.step(3).unwrap();
        assert_eq!(r.info.clock, 3);
        // both machines idle once job 0 is delivered: 0 utilization - penalty
        assert!((r.reward + 0.1).abs() < 1e-12);
        assert!(matches!(env.step(0), Err(Error::MaskedAction(0))));
    }

    #[test]
    fn two_jobs_one_machine() {
        let mut env = Environment::new(inst(1, &[&[(0, 3)], &[(0, 4)]]), EnvConfig::default()).unwrap();
        while !env.is_terminated() {
            let a = env.action_mask().allocations().next().unwrap();
            env.step(a).unwrap();
        }
        assert_eq!(env.extract_schedule().unwrap().makespan, 7);
    }

    #[test]
    fn rewards() {
        let mut env = Environment::new(inst(2, &[&[(0, 3)], &[(1, 4)]]), EnvConfig::default()).unwrap();
        let r = env.step(0).unwrap();
        assert!((r.reward - 0.5).abs() < 1e-12);
        let r = env.step(1).unwrap();
        assert!((r.reward - 1.0).abs() < 1e-12);

        let cfg = EnvConfig { reward_mode: RewardMode::FixedNegative, ..EnvConfig::default() };
        let mut env = Environment::new(inst(2, &[&[(0, 3)], &[(1, 4)]]), cfg).unwrap();
        assert_eq!(env.step(0).unwrap().reward, -1.0);
    }

    #[test]
    fn utilization_arithmetic() {
        // 15 machines, 12 busy after the action: 1 - 3/15 = 0.8
        let jobs: Vec<Vec<Operation>> = (0..15).map(|m| vec![Operation::new(m, 10)]).collect();
        let mut env = Environment::new(Instance::new(15, jobs).unwrap(), EnvConfig::default()).unwrap();
        let mut r = None;
        for a in 0..12 {
            r = Some(env.step(a).unwrap());
        }
        assert!((r.unwrap().reward - 0.8).abs() < 1e-12);
    }

    #[test]
    fn unmasked_illegal_action_is_noop() {
        let cfg = EnvConfig { masking: false, ..EnvConfig::default() };
        let mut env = Environment::new(inst(1, &[&[(0, 3)], &[(0, 4)]]), cfg).unwrap();
        env.step(0).unwrap();
        let clock = env.clock();
        let before = env.observe();
        let r = env.step(2).unwrap();
        assert_eq!(r.reward, 0.0);
        assert!(!r.info.fired);
        assert_eq!(r.observation, before);
        assert_eq!(env.clock(), clock);
        assert_eq!(env.decision_steps(), 2);
    }

    #[test]
    fn no_event_mode_ticks_on_standby() {
        let cfg = EnvConfig { event_based: false, ..EnvConfig::default() };
        let mut env = Environment::new(inst(1, &[&[(0, 3)], &[(0, 2)]]), cfg).unwrap();
        env.step(0).unwrap();
        let mask = env.action_mask();
        assert_eq!(mask.bits(), &[false, false, true]);
        env.step(2).unwrap();
        assert_eq!(env.clock(), 1);
        let mut steps = 2;
        while !env.is_terminated() {
            let a = env.action_mask().enabled().next().unwrap();
            env.step(a).unwrap();
            steps += 1;
        }
        assert_eq!(env.extract_schedule().unwrap().makespan, 5);
        assert_eq!(steps, 1 + 3 + 1 + 2);
    }

    #[test]
    fn observation_layout() {
        let cfg = EnvConfig { observation_depth: 2, ..EnvConfig::default() };
        let mut env = Environment::new(inst(2, &[&[(1, 4), (0, 2)], &[(0, 8)]]), cfg).unwrap();
        let obs = env.observe();
        assert_eq!(obs.len(), 2 + 2 * 2 * 2 + 1);
        assert_eq!(obs.0, vec![0.0, 0.0, 0.5, 0.5, 0.0, 0.25, 0.0, 1.0, -1.0, -1.0, 0.0]);
        env.step(0).unwrap();
        let obs = env.observe();
        assert_eq!(&obs.0[..2], &[0.0, 0.5]);
        assert!(obs.0.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn append_to_padded_slot() {
        let mut env = Environment::new(bundled::ta01(), EnvConfig::default().with_capacity(100)).unwrap();
        assert!(!env.action_mask().is_enabled(90));
        let before = env.net().total_tokens();
        env.append_operation(90, 2, 10).unwrap();
        assert!(env.action_mask().is_enabled(90));
        assert_eq!(env.net().total_tokens(), before + 1);
        assert!(matches!(env.append_operation(0, 15, 3), Err(Error::BadIndex(_))));
        assert!(matches!(env.append_operation(100, 0, 3), Err(Error::BadIndex(_))));
        while !env.is_terminated() {
            let a = env.action_mask().allocations().next().unwrap();
            env.step(a).unwrap();
        }
        let s = env.extract_schedule().unwrap();
        validate(&s, env.instance()).unwrap();
        assert_eq!(s.len(), 226);
        assert!(matches!(env.append_operation(0, 0, 1), Err(Error::Terminated)));
    }

    #[test]
    fn extract_before_end_fails() {
        let env = Environment::new(inst(1, &[&[(0, 5)]]), EnvConfig::default()).unwrap();
        assert!(matches!(env.extract_schedule(), Err(Error::NotTerminated)));
    }
}
