//! Colored timed Petri net of a job shop.
//!
//! Places come in five families: one job queue and one ready slot per job
//! slot, and one processing place, one idle place and one delivery sink per
//! machine. Tokens are operations colored by their destination machine.
//!
//! Selection moves the head of a job queue into its ready slot. Allocation
//! moves a ready token onto the machine matching its color, consuming that
//! machine's idle marking. Delivery is autonomous: once a token has spent its
//! full duration in a processing place it moves to the delivery sink and the
//! idle marking comes back. A job's next operation cannot be selected while
//! its predecessor is still on a machine. Controllable transitions (selection, allocation)
//! fire only when requested through [`PetriNet::fire`], so a request is the
//! control signal of their guards.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{Instance, Operation};

pub type Time = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "lowercase")]
pub enum PlaceId {
    Job(usize),
    Ready(usize),
    Machine(usize),
    Delivery(usize),
}

/// Transition identifiers. Allocation transitions are job-indexed; the
/// `machine` field is the color binding the firing is requested under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionId {
    Selection(usize),
    Allocation { job: usize, machine: usize },
    Delivery(usize),
}

impl TransitionId {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Selection(_) => "selection",
            Self::Allocation { .. } => "allocation",
            Self::Delivery(_) => "delivery",
        }
    }
}

/// One stay of a token in a place. `leave` is `None` while it is still there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub place: PlaceId,
    pub enter: Time,
    pub leave: Option<Time>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// Destination machine.
    pub color: usize,
    pub job: usize,
    pub duration: u32,
    pub seq: usize,
    /// Ticks spent in the current processing place.
    pub elapsed: u32,
    pub history: Vec<Visit>,
}

impl Token {
    fn new(job: usize, seq: usize, op: Operation, place: PlaceId, now: Time) -> Self {
        Self {
            color: op.machine,
            job,
            duration: op.duration,
            seq,
            elapsed: 0,
            history: vec![Visit {
                place,
                enter: now,
                leave: None,
            }],
        }
    }

    fn move_to(&mut self, place: PlaceId, now: Time) {
        if let Some(last) = self.history.last_mut() {
            last.leave = Some(now);
        }
        self.history.push(Visit {
            place,
            enter: now,
            leave: None,
        });
    }

    /// (start, end) of the token's stay on its machine, once delivered.
    pub fn processing_interval(&self) -> Option<(Time, Time)> {
        self.history
            .iter()
            .find(|v| matches!(v.place, PlaceId::Machine(_)))
            .and_then(|v| v.leave.map(|end| (v.enter, end)))
    }

    fn is_done(&self) -> bool {
        self.elapsed >= self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiringEvent {
    pub clock: Time,
    pub transition: TransitionId,
    pub job: usize,
    pub machine: usize,
    pub seq: usize,
}

#[derive(Serialize)]
struct EventLine<'a> {
    clock: Time,
    transition: &'a str,
    job: usize,
    machine: usize,
    seq: usize,
}

#[derive(Debug, Clone)]
pub struct PetriNet {
    job_places: Vec<VecDeque<Token>>,
    ready_places: Vec<Option<Token>>,
    machine_places: Vec<Option<Token>>,
    idle_places: Vec<bool>,
    /// Per job slot: an operation of this job is on a machine.
    in_process: Vec<bool>,
    delivery_places: Vec<Vec<Token>>,
    clock: Time,
    total_tokens: usize,
    events: Vec<FiringEvent>,
}

impl PetriNet {
    /// Initial marking for `instance` with `capacity` job slots: slot `i < J`
    /// holds job `i`'s operations in order, every machine is idle.
    pub fn new(instance: &Instance, capacity: usize) -> Result<Self> {
        let jobs = instance.num_jobs();
        if capacity < jobs {
            return Err(Error::CapacityTooSmall { capacity, jobs });
        }
        let machines = instance.num_machines();
        let mut job_places = vec![VecDeque::new(); capacity];
        for (j, ops) in instance.jobs().iter().enumerate() {
            job_places[j] = ops
                .iter()
                .enumerate()
                .map(|(seq, &op)| Token::new(j, seq, op, PlaceId::Job(j), 0))
                .collect();
        }
        Ok(Self {
            job_places,
            ready_places: vec![None; capacity],
            machine_places: vec![None; machines],
            idle_places: vec![true; machines],
            in_process: vec![false; capacity],
            delivery_places: vec![Vec::new(); machines],
            clock: 0,
            total_tokens: instance.total_operations(),
            events: Vec::new(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.job_places.len()
    }

    pub fn num_machines(&self) -> usize {
        self.machine_places.len()
    }

    pub fn clock(&self) -> Time {
        self.clock
    }

    pub fn job_queue(&self, slot: usize) -> &VecDeque<Token> {
        &self.job_places[slot]
    }

    pub fn ready(&self, slot: usize) -> Option<&Token> {
        self.ready_places[slot].as_ref()
    }

    pub fn processing(&self, machine: usize) -> Option<&Token> {
        self.machine_places[machine].as_ref()
    }

    pub fn is_idle(&self, machine: usize) -> bool {
        self.idle_places[machine]
    }

    /// Whether an operation of job slot `slot` is currently being processed.
    pub fn job_in_process(&self, slot: usize) -> bool {
        self.in_process[slot]
    }

    pub fn delivered(&self, machine: usize) -> &[Token] {
        &self.delivery_places[machine]
    }

    pub fn events(&self) -> &[FiringEvent] {
        &self.events
    }

    /// The next operation of a job slot: its ready token, else its queue head.
    pub fn head(&self, slot: usize) -> Option<&Token> {
        self.ready_places[slot]
            .as_ref()
            .or_else(|| self.job_places[slot].front())
    }

    /// Operations of `slot` not yet allocated, head first.
    pub fn pending(&self, slot: usize) -> impl Iterator<Item = &Token> {
        self.ready_places[slot]
            .iter()
            .chain(self.job_places[slot].iter())
    }

    pub fn pending_count(&self, slot: usize) -> usize {
        self.job_places[slot].len() + usize::from(self.ready_places[slot].is_some())
    }

    pub fn total_tokens(&self) -> usize {
        self.total_tokens
    }

    pub fn delivered_count(&self) -> usize {
        self.delivery_places.iter().map(Vec::len).sum()
    }

    pub fn busy_count(&self) -> usize {
        self.idle_places.iter().filter(|&&idle| !idle).count()
    }

    pub fn idle_count(&self) -> usize {
        self.idle_places.iter().filter(|&&idle| idle).count()
    }

    /// Tokens per place family: (queued, ready, processing, delivered).
    pub fn token_census(&self) -> (usize, usize, usize, usize) {
        (
            self.job_places.iter().map(VecDeque::len).sum(),
            self.ready_places.iter().flatten().count(),
            self.machine_places.iter().flatten().count(),
            self.delivered_count(),
        )
    }

    fn check_exists(&self, t: TransitionId) -> Result<()> {
        let ok = match t {
            TransitionId::Selection(j) => j < self.capacity(),
            TransitionId::Allocation { job, machine } => {
                job < self.capacity() && machine < self.num_machines()
            }
            TransitionId::Delivery(m) => m < self.num_machines(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::UnknownTransition(t))
        }
    }

    /// Guard of transition `t` in the current marking.
    pub fn guard(&self, t: TransitionId) -> Result<bool> {
        self.check_exists(t)?;
        Ok(self.guard_unchecked(t))
    }

    fn guard_unchecked(&self, t: TransitionId) -> bool {
        match t {
            TransitionId::Selection(j) => {
                !self.job_places[j].is_empty()
                    && self.ready_places[j].is_none()
                    && !self.in_process[j]
            }
            TransitionId::Allocation { job, machine } => {
                self.idle_places[machine]
                    && self.ready_places[job]
                        .as_ref()
                        .is_some_and(|tok| tok.color == machine)
            }
            TransitionId::Delivery(m) => self.machine_places[m].as_ref().is_some_and(Token::is_done),
        }
    }

    /// Fires `t`, moving one token. Firing a disabled transition is an error
    /// and leaves the marking untouched.
    pub fn fire(&mut self, t: TransitionId) -> Result<FiringEvent> {
        self.check_exists(t)?;
        if !self.guard_unchecked(t) {
            return Err(Error::GuardViolation(t));
        }
        let now = self.clock;
        let token = match t {
            TransitionId::Selection(j) => {
                let mut tok = self.job_places[j].pop_front().expect("guarded");
                tok.move_to(PlaceId::Ready(j), now);
                self.ready_places[j].insert(tok)
            }
            TransitionId::Allocation { job, machine } => {
                let mut tok = self.ready_places[job].take().expect("guarded");
                tok.move_to(PlaceId::Machine(machine), now);
                tok.elapsed = 0;
                self.idle_places[machine] = false;
                self.in_process[job] = true;
                self.machine_places[machine].insert(tok)
            }
            TransitionId::Delivery(m) => {
                let mut tok = self.machine_places[m].take().expect("guarded");
                tok.move_to(PlaceId::Delivery(m), now);
                self.idle_places[m] = true;
                self.in_process[tok.job] = false;
                self.delivery_places[m].push(tok);
                self.delivery_places[m].last().expect("just pushed")
            }
        };
        let event = FiringEvent {
            clock: now,
            transition: t,
            job: token.job,
            machine: token.color,
            seq: token.seq,
        };
        self.events.push(event);
        Ok(event)
    }

    /// Advances the clock by one tick, then fires every enabled delivery in
    /// ascending machine order.
    pub fn advance_clock(&mut self) -> Vec<FiringEvent> {
        self.clock += 1;
        for tok in self.machine_places.iter_mut().flatten() {
            tok.elapsed += 1;
        }
        (0..self.num_machines())
            .filter(|&m| self.guard_unchecked(TransitionId::Delivery(m)))
            .collect::<Vec<_>>()
            .into_iter()
            .map(|m| self.fire(TransitionId::Delivery(m)).expect("guard checked"))
            .collect()
    }

    /// Ticks until at least one delivery fires; returns the deliveries.
    /// Returns an empty list immediately when no machine is busy.
    pub fn advance_to_next_delivery(&mut self) -> Vec<FiringEvent> {
        if self.busy_count() == 0 {
            return Vec::new();
        }
        loop {
            let fired = self.advance_clock();
            if !fired.is_empty() {
                return fired;
            }
        }
    }

    /// No operation left in any job queue, ready slot or machine.
    pub fn is_terminal(&self) -> bool {
        self.job_places.iter().all(VecDeque::is_empty)
            && self.ready_places.iter().all(Option::is_none)
            && self.machine_places.iter().all(Option::is_none)
    }

    /// Enqueues a new operation at the tail of job slot `slot`, with `seq`
    /// one past the highest sequence index that job has used.
    pub fn append(&mut self, slot: usize, op: Operation) -> Result<usize> {
        if slot >= self.capacity() {
            return Err(Error::BadIndex(format!(
                "job slot {slot} (capacity {})",
                self.capacity()
            )));
        }
        if op.machine >= self.num_machines() {
            return Err(Error::BadIndex(format!(
                "machine {} ({} machines)",
                op.machine,
                self.num_machines()
            )));
        }
        if op.duration == 0 {
            return Err(Error::BadIndex("duration must be at least 1".into()));
        }
        let seq = self.next_seq(slot);
        let tok = Token::new(slot, seq, op, PlaceId::Job(slot), self.clock);
        self.job_places[slot].push_back(tok);
        self.total_tokens += 1;
        Ok(seq)
    }

    fn next_seq(&self, slot: usize) -> usize {
        let in_net = self
            .pending(slot)
            .map(|t| t.seq)
            .chain(self.machine_places.iter().flatten().filter(|t| t.job == slot).map(|t| t.seq))
            .chain(
                self.delivery_places
                    .iter()
                    .flatten()
                    .filter(|t| t.job == slot)
                    .map(|t| t.seq),
            )
            .max();
        in_net.map_or(0, |s| s + 1)
    }

    /// All delivered tokens, in delivery order per machine.
    pub fn delivered_tokens(&self) -> impl Iterator<Item = &Token> {
        self.delivery_places.iter().flatten()
    }

    /// Writes the firing log; see [`write_event_log`].
    pub fn write_event_log<W: Write>(&self, out: W) -> Result<()> {
        write_event_log(&self.events, out)
    }
}

/// Writes firing events as JSON lines of `{clock, transition, job, machine, seq}`.
pub fn write_event_log<W: Write>(events: &[FiringEvent], mut out: W) -> Result<()> {
    for e in events {
        let line = EventLine {
            clock: e.clock,
            transition: e.transition.kind(),
            job: e.job,
            machine: e.machine,
            seq: e.seq,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
