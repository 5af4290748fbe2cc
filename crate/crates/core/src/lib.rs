//! Decomposition-based iterative solver for resource investment problems.
//!
//! The resource investment problem (RIP) asks for task start times that
//! minimize the total cost of provisioned renewable resource capacities under
//! precedence and time-window constraints. This crate implements:
//!
//! * the canonical data model with feasibility checking, exact rational
//!   objectives, usage-profile arithmetic and analytic lower bounds
//!   ([`model`]);
//! * decomposition of an instance into processes (weakly connected components
//!   of the task DAG) and the process-level interaction graph with its node
//!   and edge features ([`decompose`]);
//! * per-process subproblem construction against the shared usage profile,
//!   exact branch-and-bound and heuristic candidate generation, and commits
//!   ([`subproblem`]);
//! * process-ordering policies (heuristics and a graph-attention Q-network
//!   trained with a reconfiguration-aware DQN) and local-solution selection
//!   (heuristics and a pairwise-ranking value network) ([`ordering`],
//!   [`qnet`], [`selection`]);
//! * cold-start and continual (schedule-reusing) solve entry points
//!   ([`episode`]);
//! * JSON instance files, a synthetic instance/delta generator, parameter
//!   checkpoints and a benchmark harness ([`ripfile`], [`generate`],
//!   [`checkpoint`], [`bench`]).

pub mod bench;
pub mod checkpoint;
pub mod decompose;
pub mod episode;
pub mod error;
pub mod fixtures;
pub mod generate;
pub mod model;
pub mod nn;
pub mod ordering;
pub mod qnet;
pub mod ripfile;
pub mod seeds;
pub mod selection;
pub mod subproblem;

pub use error::Error;
pub use model::{Cost, Instance, ResourceKind, Schedule, Task, UsageProfile};
