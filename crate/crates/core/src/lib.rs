//! Job-shop scheduling on a colored timed Petri net.
//!
//! The shop floor is a net whose tokens are operations colored by their
//! destination machine. [`env::Environment`] turns the net into an
//! event-driven decision process with an action mask taken from the
//! transition guards; [`policies`] holds dispatching rules that act in it and
//! [`ppo`] trains a masked actor-critic agent for it. [`bench`] compares
//! policies, runs ablations and draws Gantt charts.

pub mod bench;
pub mod env;
pub mod error;
pub mod instances;
pub mod nn;
pub mod petrinet;
pub mod policies;
pub mod ppo;
pub mod schedule;

pub use env::{ActionMask, EnvConfig, Environment, Observation, RewardMode, StepResult};
pub use error::{Error, Result};
pub use instances::{generate_random, parse_instance, Instance, InstanceFormat, LcgState, Operation};
pub use petrinet::{PetriNet, Token, TransitionId};
pub use ppo::{Agent, NetworkParams, TrainConfig};
pub use policies::{run_episode, Policy, PolicyKind, RulePolicy};
pub use schedule::{validate, Schedule, ScheduleEntry};
