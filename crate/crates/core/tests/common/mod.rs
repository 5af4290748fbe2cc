//! Shared brute-force oracles. These re-derive feasibility and optima
//! directly from the constraint definitions, independently of the library's
//! solver and checking paths.

#![allow(dead_code)]

use ripsched_core::model::{Cost, Instance, Schedule, StartMap, Time};

use num_traits::Zero;

/// Every start assignment satisfying windows and precedence, by exhaustive
/// recursion over the window products. Desk scale only.
pub fn enumerate_feasible(inst: &Instance) -> Vec<StartMap> {
    let n = inst.n_tasks();
    let mut out = Vec::new();
    let mut starts: Vec<Option<Time>> = vec![None; n];
    let preds = inst.predecessors();
    let Some(order) = inst.topological_order() else {
        return out;
    };

    fn recurse(
        inst: &Instance,
        order: &[usize],
        preds: &[Vec<usize>],
        depth: usize,
        starts: &mut Vec<Option<Time>>,
        out: &mut Vec<StartMap>,
    ) {
        if depth == order.len() {
            let map: StartMap = starts
                .iter()
                .enumerate()
                .map(|(i, s)| (inst.task(i).id.clone(), s.unwrap()))
                .collect();
            out.push(map);
            return;
        }
        let i = order[depth];
        let t = inst.task(i);
        let mut lo = t.earliest_start;
        for &p in &preds[i] {
            lo = lo.max(starts[p].unwrap() + inst.task(p).duration);
        }
        for s in lo..=t.latest_start() {
            starts[i] = Some(s);
            recurse(inst, order, preds, depth + 1, starts, out);
        }
        starts[i] = None;
    }

    recurse(inst, &order, &preds, 0, &mut starts, &mut out);
    out
}

/// Direct objective evaluation from the constraint formulation: per-resource
/// peak of active demands times unit costs.
pub fn direct_objective(inst: &Instance, starts: &StartMap) -> Cost {
    let horizon = inst.horizon();
    let mut total = Cost::zero();
    for (k, res) in inst.resources().iter().enumerate() {
        let mut peak: i64 = 0;
        for t in horizon.start..horizon.end {
            let mut usage = 0;
            for task in inst.tasks() {
                if let Some(&s) = starts.get(&task.id) {
                    if s <= t && t < s + task.duration {
                        usage += task.demands[k];
                    }
                }
            }
            peak = peak.max(usage);
        }
        total += res.unit_cost * Cost::from_integer(peak);
    }
    total
}

/// Minimum objective over all feasible schedules.
pub fn brute_force_optimum(inst: &Instance) -> Option<(Schedule, Cost)> {
    let mut best: Option<(Schedule, Cost)> = None;
    for starts in enumerate_feasible(inst) {
        let cost = direct_objective(inst, &starts);
        match &best {
            Some((_, incumbent)) if *incumbent <= cost => {}
            _ => best = Some((Schedule::new(starts), cost)),
        }
    }
    best
}

/// Symmetric relative error for finite-difference gradient checks.
/// Differences below 1e-8 count as equal: central differences of an O(10)
/// loss at step 1e-5 carry ~1e-10 of cancellation noise, so entries whose
/// true gradient sits below that resolution (saturated softmax paths) would
/// otherwise compare noise against zero. Real gradients here are orders of
/// magnitude above the guard.
pub fn fd_rel_err(numeric: f64, analytic: f64) -> f64 {
    let diff = (numeric - analytic).abs();
    if diff < 1e-8 {
        return 0.0;
    }
    diff / (numeric.abs() + analytic.abs()).max(1e-8)
}

/// Feasibility exactly as the constraint set states it: precedence
/// separation, window bounds, non-negative provisions.
pub fn direct_feasible(inst: &Instance, starts: &StartMap) -> bool {
    for task in inst.tasks() {
        let Some(&s) = starts.get(&task.id) else {
            return false;
        };
        if s < task.earliest_start || s > task.deadline - task.duration {
            return false;
        }
    }
    for (pred, succ) in inst.precedence() {
        let sp = starts[pred];
        let ss = starts[succ];
        if sp + inst.task_by_id(pred).unwrap().duration > ss {
            return false;
        }
    }
    true
}
