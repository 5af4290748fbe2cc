//! Schedules, feasibility checking and the resource-cost objective.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;

use super::instance::{Amount, Cost, Instance, StartMap, Time};
use super::profile::UsageProfile;
use crate::error::Error;

/// A start-time assignment. May be partial while under construction; the
/// feasibility and objective operations require completeness.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schedule {
    starts: StartMap,
}

impl Schedule {
    pub fn new(starts: StartMap) -> Self {
        Schedule { starts }
    }

    pub fn from_pairs<I: IntoIterator<Item = (String, Time)>>(pairs: I) -> Self {
        Schedule {
            starts: pairs.into_iter().collect(),
        }
    }

    pub fn starts(&self) -> &StartMap {
        &self.starts
    }

    pub fn start_of(&self, id: &str) -> Option<Time> {
        self.starts.get(id).copied()
    }

    pub fn set(&mut self, id: String, start: Time) {
        self.starts.insert(id, start);
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn is_complete(&self, inst: &Instance) -> bool {
        inst.tasks().iter().all(|t| self.starts.contains_key(&t.id))
    }

    /// Usage profile induced by the assigned starts.
    pub fn usage(&self, inst: &Instance) -> Result<UsageProfile, Error> {
        super::profile::build_usage_profile(inst, &self.starts)
    }

    /// Derived provisioning levels: the per-resource peak of the usage
    /// profile (the tightest capacities covering this schedule).
    pub fn provisions(&self, inst: &Instance) -> Result<Vec<Amount>, Error> {
        Ok(self.usage(inst)?.peaks())
    }
}

/// One violated schedule constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintViolation {
    Precedence {
        pred: String,
        succ: String,
        pred_finish: Time,
        succ_start: Time,
    },
    BeforeWindow {
        task: String,
        start: Time,
        earliest_start: Time,
    },
    AfterWindow {
        task: String,
        start: Time,
        latest_start: Time,
    },
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintViolation::Precedence {
                pred,
                succ,
                pred_finish,
                succ_start,
            } => write!(
                f,
                "precedence {pred}\u{2192}{succ} violated: finish {pred_finish} > start {succ_start}"
            ),
            ConstraintViolation::BeforeWindow {
                task,
                start,
                earliest_start,
            } => write!(f, "task {task} starts at {start} before earliest start {earliest_start}"),
            ConstraintViolation::AfterWindow {
                task,
                start,
                latest_start,
            } => write!(f, "task {task} starts at {start} after latest start {latest_start}"),
        }
    }
}

/// Feasibility verdict with per-constraint diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Feasible,
    Infeasible(Vec<ConstraintViolation>),
}

impl Verdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Verdict::Feasible)
    }
}

/// Check a complete schedule against precedence and window constraints.
///
/// The capacity constraint needs no check: provisions are derived as the
/// usage peak, which satisfies it tightly, and peaks of non-negative demands
/// are non-negative.
pub fn check_schedule(inst: &Instance, sched: &Schedule) -> Result<Verdict, Error> {
    let missing: Vec<String> = inst
        .tasks()
        .iter()
        .filter(|t| sched.start_of(&t.id).is_none())
        .map(|t| t.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingAssignments { tasks: missing });
    }

    let mut violations = Vec::new();
    for t in inst.tasks() {
        let start = sched.start_of(&t.id).unwrap();
        if start < t.earliest_start {
            violations.push(ConstraintViolation::BeforeWindow {
                task: t.id.clone(),
                start,
                earliest_start: t.earliest_start,
            });
        }
        if start > t.latest_start() {
            violations.push(ConstraintViolation::AfterWindow {
                task: t.id.clone(),
                start,
                latest_start: t.latest_start(),
            });
        }
    }
    for (pred, succ) in inst.precedence() {
        let (Some(ps), Some(ss)) = (sched.start_of(pred), sched.start_of(succ)) else {
            continue; // dangling edge: an instance-level violation, not a schedule one
        };
        let pred_finish = ps + inst.task_by_id(pred).map(|t| t.duration).unwrap_or(0);
        if pred_finish > ss {
            violations.push(ConstraintViolation::Precedence {
                pred: pred.clone(),
                succ: succ.clone(),
                pred_finish,
                succ_start: ss,
            });
        }
    }

    if violations.is_empty() {
        Ok(Verdict::Feasible)
    } else {
        Ok(Verdict::Infeasible(violations))
    }
}

/// Total provisioning cost `sum_k c_k * R_k` of a feasible schedule, with
/// `R_k` derived as the peak usage.
pub fn objective_cost(inst: &Instance, sched: &Schedule) -> Result<Cost, Error> {
    match check_schedule(inst, sched)? {
        Verdict::Feasible => {}
        Verdict::Infeasible(violations) => {
            return Err(Error::InfeasibleSchedule {
                diagnostics: violations.iter().map(|v| v.to_string()).collect(),
            })
        }
    }
    let peaks = sched.provisions(inst)?;
    Ok(objective_from_provisions(inst, &peaks))
}

/// `sum_k c_k * R_k` for explicit provisioning levels.
pub fn objective_from_provisions(inst: &Instance, provisions: &[Amount]) -> Cost {
    inst.resources()
        .iter()
        .zip(provisions)
        .map(|(r, &p)| r.unit_cost * Cost::from_integer(p))
        .fold(Cost::zero(), |a, b| a + b)
}

/// Earliest precedence-feasible start per task (ignoring deadlines). If any
/// feasible schedule exists, this one is feasible too.
pub fn earliest_start_schedule(inst: &Instance) -> Option<Schedule> {
    let order = inst.topological_order()?;
    let preds = inst.predecessors();
    let mut starts: BTreeMap<String, Time> = BTreeMap::new();
    let mut by_index: Vec<Time> = vec![0; inst.n_tasks()];
    for &i in &order {
        let t = inst.task(i);
        let mut s = t.earliest_start;
        for &p in &preds[i] {
            s = s.max(by_index[p] + inst.task(p).duration);
        }
        by_index[i] = s;
        starts.insert(t.id.clone(), s);
    }
    Some(Schedule::new(starts))
}
