//! Synthetic instance and delta generation.
//!
//! Instances are feasible by construction: the generator lays out a seed
//! schedule first and derives every window around it, so the seed schedule is
//! a retained feasibility witness. Deltas perturb task parameters only within
//! ranges that keep the earliest-start schedule feasible, re-deriving windows
//! where needed, so updated instances stay feasible too.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::model::schedule::earliest_start_schedule;
use crate::model::{
    check_schedule, validate_instance, Cost, Instance, ReconfigDelta, ResourceKind, Schedule,
    Task, Time,
};

/// Generator knobs. `processes` is exact: the output decomposes into exactly
/// that many weakly connected components.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub processes: usize,
    pub tasks_min: usize,
    pub tasks_max: usize,
    pub resources: usize,
    /// Probability of each forward in-process task pair gaining an extra
    /// precedence edge beyond the spanning tree.
    pub extra_edge_prob: f64,
    pub duration_max: i64,
    pub demand_max: i64,
    pub cost_max: i64,
    /// Window padding around the seed schedule.
    pub window_slack: i64,
    /// Spread of process start offsets; larger values reduce overlap.
    pub start_spread: i64,
    /// Maximum idle gap inserted between a task and its predecessors in the
    /// seed schedule.
    pub idle_gap: i64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            processes: 3,
            tasks_min: 6,
            tasks_max: 9,
            resources: 1,
            extra_edge_prob: 0.2,
            duration_max: 4,
            demand_max: 4,
            cost_max: 3,
            window_slack: 3,
            start_spread: 4,
            idle_gap: 1,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.processes == 0 {
            return Err(Error::InvalidConfig {
                reason: "need at least one process".to_string(),
            });
        }
        if self.tasks_min > self.tasks_max || self.tasks_max < self.processes {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "task range [{}, {}] cannot host {} processes",
                    self.tasks_min, self.tasks_max, self.processes
                ),
            });
        }
        if self.resources == 0 {
            return Err(Error::InvalidConfig {
                reason: "need at least one resource".to_string(),
            });
        }
        if self.duration_max < 1 || self.demand_max < 1 || self.cost_max < 1 {
            return Err(Error::InvalidConfig {
                reason: "duration, demand and cost maxima must be at least 1".to_string(),
            });
        }
        if !(0.0..=1.0).contains(&self.extra_edge_prob) {
            return Err(Error::InvalidConfig {
                reason: "extra edge probability must lie in [0, 1]".to_string(),
            });
        }
        if self.window_slack < 0 || self.start_spread < 0 || self.idle_gap < 0 {
            return Err(Error::InvalidConfig {
                reason: "slack parameters must be non-negative".to_string(),
            });
        }
        Ok(())
    }
}

/// Benchmark difficulty strata by process count and task count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DifficultyClass {
    Easy,
    Normal,
    Hard,
}

impl DifficultyClass {
    /// Stratum of an instance shape, if it falls in a published band.
    pub fn classify(processes: usize, tasks: usize) -> Option<DifficultyClass> {
        match (processes, tasks) {
            (100, 2634..=3589) => Some(DifficultyClass::Easy),
            (200, 5566..=6572) => Some(DifficultyClass::Normal),
            (300, 8929..=9509) => Some(DifficultyClass::Hard),
            _ => None,
        }
    }
}

/// Generate an instance along with its feasibility witness schedule.
pub fn generate_with_witness(cfg: &GenConfig) -> Result<(Instance, Schedule), Error> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let lo = cfg.tasks_min.max(cfg.processes);
    let total = if lo >= cfg.tasks_max {
        lo
    } else {
        rng.random_range(lo..=cfg.tasks_max)
    };

    let mut sizes = vec![1usize; cfg.processes];
    for _ in 0..total - cfg.processes {
        let p = rng.random_range(0..cfg.processes);
        sizes[p] += 1;
    }

    let width = total.to_string().len().max(3);
    let mut tasks = Vec::with_capacity(total);
    let mut precedence: BTreeSet<(String, String)> = BTreeSet::new();
    let mut witness = Schedule::default();
    let mut next_id = 0usize;

    for &size in &sizes {
        let base = next_id;
        let offset = if cfg.start_spread > 0 {
            rng.random_range(0..=cfg.start_spread)
        } else {
            0
        };
        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); size];
        for j in 1..size {
            parents[j].push(rng.random_range(0..j));
            for i in 0..j {
                if !parents[j].contains(&i) && rng.random_bool(cfg.extra_edge_prob) {
                    parents[j].push(i);
                }
            }
            parents[j].sort_unstable();
        }

        let mut local_starts: Vec<Time> = vec![0; size];
        let mut local_durations: Vec<Time> = vec![0; size];
        for j in 0..size {
            let id = format!("t{:0width$}", base + j);
            let duration = rng.random_range(1..=cfg.duration_max);
            let mut demands: Vec<i64> = (0..cfg.resources)
                .map(|_| rng.random_range(0..=cfg.demand_max))
                .collect();
            if demands.iter().all(|&d| d == 0) {
                let k = rng.random_range(0..cfg.resources);
                demands[k] = rng.random_range(1..=cfg.demand_max);
            }

            let mut start = offset;
            for &p in &parents[j] {
                start = start.max(local_starts[p] + local_durations[p]);
            }
            if cfg.idle_gap > 0 {
                start += rng.random_range(0..=cfg.idle_gap);
            }

            let slack_before = if cfg.window_slack > 0 {
                rng.random_range(0..=cfg.window_slack)
            } else {
                0
            };
            let slack_after = if cfg.window_slack > 0 {
                rng.random_range(0..=cfg.window_slack)
            } else {
                0
            };
            let earliest = (start - slack_before).max(0);
            let deadline = start + duration + slack_after;

            local_starts[j] = start;
            local_durations[j] = duration;
            witness.set(id.clone(), start);
            for &p in &parents[j] {
                precedence.insert((format!("t{:0width$}", base + p), id.clone()));
            }
            tasks.push(Task {
                id,
                duration,
                earliest_start: earliest,
                deadline,
                demands,
            });
        }
        next_id += size;
    }

    let resources = (1..=cfg.resources)
        .map(|k| ResourceKind {
            id: format!("R{k}"),
            unit_cost: Cost::from_integer(rng.random_range(1..=cfg.cost_max)),
        })
        .collect();

    let instance = Instance::new(tasks, resources, precedence);
    debug_assert!(validate_instance(&instance).is_ok());
    debug_assert!(matches!(
        check_schedule(&instance, &witness),
        Ok(crate::model::Verdict::Feasible)
    ));
    Ok((instance, witness))
}

pub fn generate_instance(cfg: &GenConfig) -> Result<Instance, Error> {
    generate_with_witness(cfg).map(|(inst, _)| inst)
}

/// Perturb `ceil(fraction * |T|)` distinct tasks, keeping the instance valid
/// and feasibility intact relative to the earliest-start witness.
pub fn generate_delta(
    inst: &Instance,
    fraction: f64,
    seed: u64,
) -> Result<ReconfigDelta, Error> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig {
            reason: format!("delta fraction {fraction} must lie in (0, 1]"),
        });
    }
    let n = inst.n_tasks();
    let mut delta = ReconfigDelta::default();
    if n == 0 {
        return Ok(delta);
    }
    let witness = earliest_start_schedule(inst).ok_or(Error::InvalidInstance {
        violations: vec!["cyclic precedence".to_string()],
    })?;
    match check_schedule(inst, &witness)? {
        crate::model::Verdict::Feasible => {}
        crate::model::Verdict::Infeasible(v) => {
            return Err(Error::InfeasibleSchedule {
                diagnostics: v.iter().map(|x| x.to_string()).collect(),
            })
        }
    }

    let count = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, n, count).into_vec();
    chosen.sort_unstable();

    let succs = inst.successors();
    for idx in chosen {
        let task = inst.task(idx);
        let start = witness.start_of(&task.id).unwrap();
        let mut replacement = task.clone();
        match rng.random_range(0..3u8) {
            // Demand change: always safe, resources never constrain
            // feasibility, only cost.
            0 => {
                perturb_demands(&mut replacement, &mut rng);
            }
            // Duration change, bounded by the witness slack when growing.
            1 => {
                let succ_bound = succs[idx]
                    .iter()
                    .map(|&j| witness.start_of(&inst.task(j).id).unwrap())
                    .min()
                    .unwrap_or(Time::MAX);
                let room = succ_bound.min(task.deadline) - (start + task.duration);
                if room >= 1 && rng.random_bool(0.5) {
                    replacement.duration += 1;
                } else if task.duration >= 2 {
                    replacement.duration -= 1;
                } else if room >= 1 {
                    replacement.duration += 1;
                } else {
                    perturb_demands(&mut replacement, &mut rng);
                }
            }
            // Window change around the witness start.
            _ => {
                let e_hi = start.min(task.earliest_start + 2);
                let e_lo = (task.earliest_start - 2).max(0).min(e_hi);
                replacement.earliest_start = rng.random_range(e_lo..=e_hi);
                let l_lo = (start + task.duration).max(task.deadline - 2);
                let l_hi = (task.deadline + 2).max(l_lo);
                replacement.deadline = rng.random_range(l_lo..=l_hi);
            }
        }
        delta.modified.insert(task.id.clone(), replacement);
    }
    Ok(delta)
}

fn perturb_demands(task: &mut Task, rng: &mut ChaCha8Rng) {
    let k = rng.random_range(0..task.demands.len());
    let old = task.demands[k];
    let mut demand = rng.random_range(0..=old.max(1) + 2);
    if demand == old {
        demand = if old == 0 { 1 } else { old - 1 };
    }
    task.demands[k] = demand;
    if task.demands.iter().all(|&d| d == 0) {
        task.demands[k] = old.max(1);
    }
}
