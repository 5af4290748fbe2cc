//! Canonical problem data model: instances, schedules, usage profiles,
//! lower bounds and reconfiguration deltas.
//!
//! All values are immutable after construction and every operation is a pure
//! function, so the model is safe to evaluate concurrently.

pub mod bounds;
pub mod delta;
pub mod instance;
pub mod profile;
pub mod schedule;

pub use bounds::{lower_bound, LowerBound};
pub use delta::{apply_delta, ReconfigDelta};
pub use instance::{
    validate_instance, Amount, Cost, Horizon, Instance, ResourceKind, StartMap, Task, Time,
    ValidationReport, Violation,
};
pub use profile::{build_usage_profile, UsageProfile};
pub use schedule::{
    check_schedule, objective_cost, objective_from_provisions, ConstraintViolation, Schedule,
    Verdict,
};
