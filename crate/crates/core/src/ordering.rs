//! Process-selection policies: which unscheduled process to schedule next.

use num_traits::Zero;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::decompose::ProcessGraph;
use crate::error::Error;
use crate::model::{Cost, Instance, UsageProfile};
use crate::qnet::{encode_state, q_values, QNetworkParams};

/// A policy maps the current graph state and candidate set to exactly one
/// process id. The heuristic rules are deterministic; the random rule owns a
/// private seeded generator and the learned rule wraps a trained Q-network.
pub enum OrderingPolicy {
    /// Lexicographic by (latest finish ascending, processing time descending,
    /// id ascending): finish-constrained, work-heavy processes first.
    Ccpm,
    /// Highest total cost-weighted work `sum_i sum_k c_k r_ik d_i`.
    Mrrr,
    /// Largest task-set size.
    Dum,
    /// Uniform over the candidate set.
    Rand(ChaCha8Rng),
    /// Greedy argmax of the learned value function.
    Rl(QNetworkParams),
}

impl OrderingPolicy {
    pub fn rand(seed: u64) -> Self {
        OrderingPolicy::Rand(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn name(&self) -> &'static str {
        match self {
            OrderingPolicy::Ccpm => "ccpm",
            OrderingPolicy::Mrrr => "mrrr",
            OrderingPolicy::Dum => "dum",
            OrderingPolicy::Rand(_) => "rand",
            OrderingPolicy::Rl(_) => "rl",
        }
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, OrderingPolicy::Rand(_))
    }
}

/// Total cost-weighted work of a process: the MRRR ranking key.
fn resource_requirement(graph: &ProcessGraph, inst: &Instance, process: usize) -> Cost {
    graph.processes[process]
        .task_indices
        .iter()
        .map(|&i| {
            let t = inst.task(i);
            inst.resources()
                .iter()
                .zip(&t.demands)
                .map(|(r, &d)| r.unit_cost * Cost::from_integer(d * t.duration))
                .fold(Cost::zero(), |a, b| a + b)
        })
        .fold(Cost::zero(), |a, b| a + b)
}

/// Pick the next process from the candidate set. All ties terminate at
/// ascending process id.
pub fn select_next(
    policy: &mut OrderingPolicy,
    graph: &ProcessGraph,
    inst: &Instance,
    _rpu: &UsageProfile,
) -> Result<usize, Error> {
    let candidates: Vec<usize> = graph.candidates.iter().copied().collect();
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }

    match policy {
        OrderingPolicy::Ccpm => Ok(candidates
            .iter()
            .copied()
            .min_by_key(|&p| {
                let proc = &graph.processes[p];
                (proc.window_end, -proc.processing_time(inst), p)
            })
            .unwrap()),
        OrderingPolicy::Mrrr => {
            let mut best = candidates[0];
            let mut best_req = resource_requirement(graph, inst, best);
            for &p in &candidates[1..] {
                let req = resource_requirement(graph, inst, p);
                if req > best_req {
                    best = p;
                    best_req = req;
                }
            }
            Ok(best)
        }
        OrderingPolicy::Dum => {
            let mut best = candidates[0];
            for &p in &candidates[1..] {
                if graph.processes[p].len() > graph.processes[best].len() {
                    best = p;
                }
            }
            Ok(best)
        }
        OrderingPolicy::Rand(rng) => {
            let idx = rng.random_range(0..candidates.len());
            Ok(candidates[idx])
        }
        OrderingPolicy::Rl(params) => {
            let scheduled = (graph.n_nodes() - graph.candidates.len()) as u32;
            let state = encode_state(graph, scheduled);
            let scores = q_values(params, &state)?;
            let mut best = scores[0];
            for &(p, q) in &scores[1..] {
                if q > best.1 {
                    best = (p, q);
                }
            }
            Ok(best.0)
        }
    }
}
