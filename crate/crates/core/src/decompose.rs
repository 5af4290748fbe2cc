//! Decomposition of an instance into processes and the process-level graph.
//!
//! A process is a weakly connected component of the task DAG, so every
//! precedence edge stays inside one process and the processes partition the
//! task set. Processes interact only through the shared resource pool; two
//! processes are linked in the process-level graph exactly when some pair of
//! their tasks has intersecting closed feasible windows `[e, l]`, i.e. when
//! they could be active simultaneously.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_traits::ToPrimitive;

use crate::error::Error;
use crate::model::{Amount, Instance, Time, UsageProfile};

/// Scheduling status of a process within one solve episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessStatus {
    Unscheduled,
    /// Committed at the given 1-based iteration; order 0 marks schedules
    /// carried over unchanged from a prior solution.
    Scheduled { order: u32 },
}

/// A weakly connected component of the task DAG.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Process {
    pub id: usize,
    /// Member task indices into the instance task list, ascending.
    pub task_indices: Vec<usize>,
    /// Earliest start over members.
    pub window_start: Time,
    /// Latest finish bound over members.
    pub window_end: Time,
    pub status: ProcessStatus,
}

impl Process {
    pub fn len(&self) -> usize {
        self.task_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.task_indices.is_empty()
    }

    pub fn is_scheduled(&self) -> bool {
        matches!(self.status, ProcessStatus::Scheduled { .. })
    }

    pub fn order_code(&self) -> u32 {
        match self.status {
            ProcessStatus::Unscheduled => 0,
            ProcessStatus::Scheduled { order } => order,
        }
    }

    /// Resource kinds demanded (strictly positively) by some member task.
    pub fn used_resources(&self, inst: &Instance) -> BTreeSet<usize> {
        let mut used = BTreeSet::new();
        for &i in &self.task_indices {
            for (k, &d) in inst.task(i).demands.iter().enumerate() {
                if d > 0 {
                    used.insert(k);
                }
            }
        }
        used
    }

    /// Total processing time of the members.
    pub fn processing_time(&self, inst: &Instance) -> i64 {
        self.task_indices.iter().map(|&i| inst.task(i).duration).sum()
    }
}

/// Partition the tasks into weakly connected components of the precedence
/// DAG, ordered by smallest member task id.
pub fn decompose_processes(inst: &Instance) -> Vec<Process> {
    let n = inst.n_tasks();
    let mut undirected = vec![Vec::new(); n];
    for (pred, succ) in inst.precedence() {
        if let (Some(i), Some(j)) = (inst.index_of(pred), inst.index_of(succ)) {
            undirected[i].push(j);
            undirected[j].push(i);
        }
    }

    let mut seen = vec![false; n];
    let mut processes = Vec::new();
    for root in 0..n {
        if seen[root] {
            continue;
        }
        let mut members = Vec::new();
        let mut queue = vec![root];
        seen[root] = true;
        while let Some(i) = queue.pop() {
            members.push(i);
            for &j in &undirected[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push(j);
                }
            }
        }
        members.sort_unstable();
        let window_start = members
            .iter()
            .map(|&i| inst.task(i).earliest_start)
            .min()
            .unwrap();
        let window_end = members.iter().map(|&i| inst.task(i).deadline).max().unwrap();
        processes.push(Process {
            id: processes.len(),
            task_indices: members,
            window_start,
            window_end,
            status: ProcessStatus::Unscheduled,
        });
    }
    processes
}

/// Weighted resource usage of the shared profile over the closed window
/// `[from, to]`: costs normalize across resources and each resource is scaled
/// by its current provisioning level. A resource with zero provisioning
/// contributes nothing (its usage is identically zero there).
fn weighted_usage(
    inst: &Instance,
    rpu: &UsageProfile,
    caps: &[Amount],
    from: Time,
    to: Time,
) -> Result<f64, Error> {
    let total_cost = inst.total_unit_cost();
    let total = total_cost
        .to_f64()
        .filter(|c| *c > 0.0)
        .ok_or(Error::DegenerateCostVector)?;
    let mut acc = 0.0;
    for (k, r) in inst.resources().iter().enumerate() {
        if caps[k] == 0 {
            continue;
        }
        let c = r.unit_cost.to_f64().unwrap_or(0.0);
        acc += c / caps[k] as f64 * rpu.sum_closed(k, from, to) as f64;
    }
    Ok(acc / total)
}

/// The four node features of a process:
/// total processing time, average cost-weighted demand per member task,
/// scheduling-order code (0 while unscheduled), and the weighted usage of the
/// shared profile across the process window.
pub fn node_features(
    proc: &Process,
    inst: &Instance,
    rpu: &UsageProfile,
    caps: &[Amount],
) -> Result<[f64; 4], Error> {
    let total_cost = inst
        .total_unit_cost()
        .to_f64()
        .filter(|c| *c > 0.0)
        .ok_or(Error::DegenerateCostVector)?;

    let processing_time = proc.processing_time(inst) as f64;

    let mut demand_cost = 0.0;
    for &i in &proc.task_indices {
        for (k, r) in inst.resources().iter().enumerate() {
            demand_cost += r.unit_cost.to_f64().unwrap_or(0.0) * inst.task(i).demands[k] as f64;
        }
    }
    let weighted_demand = demand_cost / (proc.len() as f64 * total_cost);

    let usage = weighted_usage(inst, rpu, caps, proc.window_start, proc.window_end)?;

    Ok([
        processing_time,
        weighted_demand,
        proc.order_code() as f64,
        usage,
    ])
}

/// The seven edge features of an overlapping process pair, oriented
/// `(pi, pj)`: overlap window start and end, shared-resource ratio, weighted
/// usage attributed to each endpoint's window restriction, their sum, and the
/// per-step system-wide utilization inside the overlap window.
pub fn edge_features(
    pi: &Process,
    pj: &Process,
    inst: &Instance,
    rpu: &UsageProfile,
    caps: &[Amount],
) -> Result<[f64; 7], Error> {
    let start = pi.window_start.max(pj.window_start);
    let end = pi.window_end.min(pj.window_end);
    if start > end {
        return Err(Error::NonOverlappingPair { a: pi.id, b: pj.id });
    }

    let shared = pi
        .used_resources(inst)
        .intersection(&pj.used_resources(inst))
        .count();
    let ratio = if inst.n_resources() == 0 {
        0.0
    } else {
        shared as f64 / inst.n_resources() as f64
    };

    let usage_i = weighted_usage(inst, rpu, caps, start, end)?;
    let usage_j = weighted_usage(inst, rpu, caps, start, end)?;

    let total_cost = inst
        .total_unit_cost()
        .to_f64()
        .filter(|c| *c > 0.0)
        .ok_or(Error::DegenerateCostVector)?;
    let window_len = (end - start + 1) as f64;
    let mut system = 0.0;
    for (k, r) in inst.resources().iter().enumerate() {
        if caps[k] == 0 {
            continue;
        }
        let c = r.unit_cost.to_f64().unwrap_or(0.0);
        system += c / caps[k] as f64 * rpu.sum_closed(k, start, end) as f64 / window_len;
    }
    system /= total_cost;

    Ok([
        start as f64,
        end as f64,
        ratio,
        usage_i,
        usage_j,
        usage_i + usage_j,
        system,
    ])
}

/// One undirected edge of the process-level graph; features are oriented
/// from the lower-id endpoint `a` to `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessEdge {
    pub a: usize,
    pub b: usize,
    pub features: [f64; 7],
}

/// The process-level interaction graph with feature annotations and the
/// candidate set of still-unscheduled processes.
///
/// Edge topology depends only on task windows, so commits refresh the feature
/// vectors in place while the structure stays fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessGraph {
    pub processes: Vec<Process>,
    pub edges: Vec<ProcessEdge>,
    pub node_features: Vec<[f64; 4]>,
    adjacency: Vec<Vec<(usize, usize)>>,
    pub candidates: BTreeSet<usize>,
}

impl ProcessGraph {
    pub fn n_nodes(&self) -> usize {
        self.processes.len()
    }

    /// Neighbors of node `i` as `(neighbor, edge index)`, ascending by id.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    /// Features of the edge between `i` and `j`, oriented `(i, j)`.
    pub fn oriented_edge_features(&self, edge_idx: usize, from: usize) -> [f64; 7] {
        let edge = &self.edges[edge_idx];
        let mut f = edge.features;
        if from != edge.a {
            f.swap(3, 4);
        }
        f
    }

    /// Plain-text listing, one node or edge per line, for golden-file tests.
    pub fn debug_dump(&self, inst: &Instance) -> String {
        let mut out = String::new();
        for (p, feats) in self.processes.iter().zip(&self.node_features) {
            let ids: Vec<&str> = p
                .task_indices
                .iter()
                .map(|&i| inst.task(i).id.as_str())
                .collect();
            let status = match p.status {
                ProcessStatus::Unscheduled => "unscheduled".to_string(),
                ProcessStatus::Scheduled { order } => format!("scheduled@{order}"),
            };
            writeln!(
                out,
                "node {} tasks={} window=[{},{}] status={} feat={:?}",
                p.id,
                ids.join(","),
                p.window_start,
                p.window_end,
                status,
                feats
            )
            .unwrap();
        }
        for e in &self.edges {
            writeln!(out, "edge {}-{} feat={:?}", e.a, e.b, e.features).unwrap();
        }
        out
    }
}

/// True when some task pair across the two processes has intersecting closed
/// windows. Runs a merge scan over windows sorted by earliest start.
fn windows_overlap(pi: &Process, pj: &Process, inst: &Instance) -> bool {
    let collect = |p: &Process| {
        let mut v: Vec<(Time, Time)> = p
            .task_indices
            .iter()
            .map(|&i| {
                let t = inst.task(i);
                (t.earliest_start, t.deadline)
            })
            .collect();
        v.sort_unstable();
        v
    };
    let a = collect(pi);
    let b = collect(pj);
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let (ea, la) = a[i];
        let (eb, lb) = b[j];
        if ea.max(eb) <= la.min(lb) {
            return true;
        }
        if la < lb {
            i += 1;
        } else {
            j += 1;
        }
    }
    false
}

/// Assemble the process-level graph: overlap edges, node and edge features,
/// and the candidate set of unscheduled processes.
pub fn build_process_graph(
    inst: &Instance,
    procs: Vec<Process>,
    rpu: &UsageProfile,
    caps: &[Amount],
) -> Result<ProcessGraph, Error> {
    let n = procs.len();
    let mut edges = Vec::new();
    let mut adjacency = vec![Vec::new(); n];
    for a in 0..n {
        for b in a + 1..n {
            if windows_overlap(&procs[a], &procs[b], inst) {
                let idx = edges.len();
                edges.push(ProcessEdge {
                    a,
                    b,
                    features: edge_features(&procs[a], &procs[b], inst, rpu, caps)?,
                });
                adjacency[a].push((b, idx));
                adjacency[b].push((a, idx));
            }
        }
    }

    let node_features_v: Result<Vec<[f64; 4]>, Error> = procs
        .iter()
        .map(|p| node_features(p, inst, rpu, caps))
        .collect();

    let candidates = procs
        .iter()
        .filter(|p| !p.is_scheduled())
        .map(|p| p.id)
        .collect();

    Ok(ProcessGraph {
        node_features: node_features_v?,
        processes: procs,
        edges,
        adjacency,
        candidates,
    })
}

impl ProcessGraph {
    /// Recompute every node and edge feature against the current profile and
    /// provisioning levels. Statuses and topology are preserved.
    pub fn refresh_features(
        &mut self,
        inst: &Instance,
        rpu: &UsageProfile,
        caps: &[Amount],
    ) -> Result<(), Error> {
        for (p, slot) in self.processes.iter().zip(self.node_features.iter_mut()) {
            *slot = node_features(p, inst, rpu, caps)?;
        }
        for e in &mut self.edges {
            e.features =
                edge_features(&self.processes[e.a], &self.processes[e.b], inst, rpu, caps)?;
        }
        Ok(())
    }
}
