//! Analytic lower bounds on the optimal provisioning cost.

use num_traits::Zero;

use super::instance::{Amount, Cost, Instance};
use super::schedule::objective_from_provisions;

/// Per-resource lower bounds and their combined cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LowerBound {
    pub per_resource: Vec<Amount>,
    pub total: Cost,
}

/// Valid lower bound on the optimum: per resource, the larger of
///
/// * the energy bound `ceil(sum_i r_ik * d_i / H)` over the horizon span `H`,
/// * the peak of compulsory parts: with precedence-tightened windows
///   `[e', l']`, a task must be running throughout `[l'-d, e'+d)` whenever
///   that interval is non-empty, no matter where it starts.
pub fn lower_bound(inst: &Instance) -> LowerBound {
    let n_res = inst.n_resources();
    let horizon = inst.horizon();
    let span = horizon.span() as i64;
    let mut per_resource = vec![0i64; n_res];

    if span > 0 {
        for k in 0..n_res {
            let energy: i64 = inst.tasks().iter().map(|t| t.demands[k] * t.duration).sum();
            per_resource[k] = (energy + span - 1) / span;
        }
    }

    if let Some(windows) = inst.propagated_windows() {
        let mut compulsory = vec![vec![0i64; horizon.span()]; n_res];
        for (i, t) in inst.tasks().iter().enumerate() {
            let (e, l) = windows[i];
            let from = l - t.duration;
            let to = e + t.duration; // exclusive
            for time in from.max(horizon.start)..to.min(horizon.end) {
                let idx = horizon.index(time);
                for k in 0..n_res {
                    compulsory[k][idx] += t.demands[k];
                }
            }
        }
        for k in 0..n_res {
            let peak = compulsory[k].iter().copied().max().unwrap_or(0);
            per_resource[k] = per_resource[k].max(peak);
        }
    }

    let total = if n_res == 0 {
        Cost::zero()
    } else {
        objective_from_provisions(inst, &per_resource)
    };
    LowerBound {
        per_resource,
        total,
    }
}
