//! Instance data model and structural validation.
//!
//! An instance bundles non-preemptive tasks with integer durations, feasible
//! start windows `[e, l - d]`, per-resource demands, unit resource costs and a
//! precedence DAG. Time is discrete; a task started at `S` is active over the
//! half-open interval `[S, S + d)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Ratio;

/// Discrete time coordinate.
pub type Time = i64;
/// Integer resource units.
pub type Amount = i64;
/// Exact rational cost; keeps objective comparisons free of float ties.
pub type Cost = Ratio<i64>;

/// A non-preemptive task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub id: String,
    pub duration: Time,
    pub earliest_start: Time,
    /// Latest finish bound: the task must complete by this time.
    pub deadline: Time,
    /// One entry per resource kind, in instance resource order.
    pub demands: Vec<Amount>,
}

impl Task {
    /// Latest start compatible with the deadline.
    pub fn latest_start(&self) -> Time {
        self.deadline - self.duration
    }
}

/// A renewable resource kind with a per-unit provisioning cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceKind {
    pub id: String,
    pub unit_cost: Cost,
}

/// Half-open time span `[start, end)` covering every task window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Horizon {
    pub start: Time,
    pub end: Time,
}

impl Horizon {
    pub fn span(&self) -> usize {
        (self.end - self.start).max(0) as usize
    }

    /// Index of time `t` into horizon-length arrays; `t` must lie inside.
    pub fn index(&self, t: Time) -> usize {
        debug_assert!(t >= self.start && t < self.end);
        (t - self.start) as usize
    }

    pub fn contains(&self, t: Time) -> bool {
        t >= self.start && t < self.end
    }
}

/// A full instance: tasks, resources and the precedence relation.
///
/// Tasks are kept sorted by id so that identical instances have identical
/// in-memory layout regardless of construction order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    tasks: Vec<Task>,
    resources: Vec<ResourceKind>,
    precedence: BTreeSet<(String, String)>,
}

impl Instance {
    pub fn new(
        mut tasks: Vec<Task>,
        resources: Vec<ResourceKind>,
        precedence: BTreeSet<(String, String)>,
    ) -> Self {
        tasks.sort_by(|a, b| a.id.cmp(&b.id));
        Instance {
            tasks,
            resources,
            precedence,
        }
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn resources(&self) -> &[ResourceKind] {
        &self.resources
    }

    pub fn precedence(&self) -> &BTreeSet<(String, String)> {
        &self.precedence
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn n_resources(&self) -> usize {
        self.resources.len()
    }

    pub fn task(&self, idx: usize) -> &Task {
        &self.tasks[idx]
    }

    /// Index of a task id in the sorted task list.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.tasks.binary_search_by(|t| t.id.as_str().cmp(id)).ok()
    }

    pub fn task_by_id(&self, id: &str) -> Option<&Task> {
        self.index_of(id).map(|i| &self.tasks[i])
    }

    /// Sum of all unit costs.
    pub fn total_unit_cost(&self) -> Cost {
        self.resources
            .iter()
            .map(|r| r.unit_cost)
            .fold(Cost::from_integer(0), |a, b| a + b)
    }

    /// Time span `[min e, max l)` covering every window; `[0, 0)` when empty.
    pub fn horizon(&self) -> Horizon {
        if self.tasks.is_empty() {
            return Horizon { start: 0, end: 0 };
        }
        let start = self.tasks.iter().map(|t| t.earliest_start).min().unwrap();
        let end = self.tasks.iter().map(|t| t.deadline).max().unwrap();
        Horizon { start, end }
    }

    /// Successor adjacency over task indices. Edges with unknown endpoints
    /// are skipped; run [`validate_instance`] first to surface those.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.tasks.len()];
        for (pred, succ) in &self.precedence {
            if let (Some(i), Some(j)) = (self.index_of(pred), self.index_of(succ)) {
                adj[i].push(j);
            }
        }
        adj
    }

    /// Predecessor adjacency over task indices.
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.tasks.len()];
        for (pred, succ) in &self.precedence {
            if let (Some(i), Some(j)) = (self.index_of(pred), self.index_of(succ)) {
                adj[j].push(i);
            }
        }
        adj
    }

    /// Start windows tightened by precedence: earliest starts pushed forward
    /// along predecessors, deadlines pulled back along successors. Returns
    /// `(earliest_start, deadline)` per task, or `None` if the precedence
    /// relation is cyclic.
    pub fn propagated_windows(&self) -> Option<Vec<(Time, Time)>> {
        let order = self.topological_order()?;
        let succs = self.successors();
        let preds = self.predecessors();
        let mut windows: Vec<(Time, Time)> = self
            .tasks
            .iter()
            .map(|t| (t.earliest_start, t.deadline))
            .collect();
        for &i in &order {
            for &p in &preds[i] {
                let lb = windows[p].0 + self.tasks[p].duration;
                if lb > windows[i].0 {
                    windows[i].0 = lb;
                }
            }
        }
        for &i in order.iter().rev() {
            for &s in &succs[i] {
                let ub = windows[s].1 - self.tasks[s].duration;
                if ub < windows[i].1 {
                    windows[i].1 = ub;
                }
            }
        }
        Some(windows)
    }

    /// Topological order of task indices (smallest index first among ready
    /// tasks), or `None` when the precedence relation has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let succs = self.successors();
        let n = self.tasks.len();
        let mut indeg = vec![0usize; n];
        for out in &succs {
            for &j in out {
                indeg[j] += 1;
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&i) = ready.iter().next() {
            ready.remove(&i);
            order.push(i);
            for &j in &succs[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

/// One violated structural invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateTaskId(String),
    DuplicateResourceId(String),
    UnknownPrecedenceTask { edge: (String, String), missing: String },
    PrecedenceCycle { cycle: Vec<String> },
    NonPositiveDuration { task: String, duration: Time },
    NegativeEarliestStart { task: String, earliest_start: Time },
    WindowTooSmall { task: String },
    NegativeCost { resource: String },
    NegativeDemand { task: String, resource: String },
    DemandArityMismatch { task: String, expected: usize, got: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateTaskId(id) => write!(f, "duplicate task id {id}"),
            Violation::DuplicateResourceId(id) => write!(f, "duplicate resource id {id}"),
            Violation::UnknownPrecedenceTask { edge, missing } => write!(
                f,
                "precedence edge ({}, {}) references unknown task {missing}",
                edge.0, edge.1
            ),
            Violation::PrecedenceCycle { cycle } => {
                write!(f, "cycle {}", cycle.join("\u{2192}"))
            }
            Violation::NonPositiveDuration { task, duration } => {
                write!(f, "task {task} has non-positive duration {duration}")
            }
            Violation::NegativeEarliestStart {
                task,
                earliest_start,
            } => write!(f, "task {task} has negative earliest start {earliest_start}"),
            Violation::WindowTooSmall { task } => write!(f, "window too small for {task}"),
            Violation::NegativeCost { resource } => {
                write!(f, "resource {resource} has negative unit cost")
            }
            Violation::NegativeDemand { task, resource } => {
                write!(f, "task {task} has negative demand for {resource}")
            }
            Violation::DemandArityMismatch {
                task,
                expected,
                got,
            } => write!(
                f,
                "task {task} has {got} demand entries, expected {expected}"
            ),
        }
    }
}

/// Outcome of [`validate_instance`]: `ok` or the full violation list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            write!(f, "ok")
        } else {
            for (i, v) in self.violations.iter().enumerate() {
                if i > 0 {
                    writeln!(f)?;
                }
                write!(f, "{v}")?;
            }
            Ok(())
        }
    }
}

/// Check every structural invariant; violations are data, not failures.
pub fn validate_instance(inst: &Instance) -> ValidationReport {
    let mut violations = Vec::new();

    let mut seen = BTreeSet::new();
    for t in inst.tasks() {
        if !seen.insert(t.id.as_str()) {
            violations.push(Violation::DuplicateTaskId(t.id.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    for r in inst.resources() {
        if !seen.insert(r.id.as_str()) {
            violations.push(Violation::DuplicateResourceId(r.id.clone()));
        }
        if r.unit_cost < Cost::from_integer(0) {
            violations.push(Violation::NegativeCost {
                resource: r.id.clone(),
            });
        }
    }

    for t in inst.tasks() {
        if t.duration < 1 {
            violations.push(Violation::NonPositiveDuration {
                task: t.id.clone(),
                duration: t.duration,
            });
        }
        if t.earliest_start < 0 {
            violations.push(Violation::NegativeEarliestStart {
                task: t.id.clone(),
                earliest_start: t.earliest_start,
            });
        }
        if t.earliest_start + t.duration > t.deadline {
            violations.push(Violation::WindowTooSmall { task: t.id.clone() });
        }
        if t.demands.len() != inst.n_resources() {
            violations.push(Violation::DemandArityMismatch {
                task: t.id.clone(),
                expected: inst.n_resources(),
                got: t.demands.len(),
            });
        }
        for (k, &d) in t.demands.iter().enumerate() {
            if d < 0 {
                let resource = inst
                    .resources()
                    .get(k)
                    .map(|r| r.id.clone())
                    .unwrap_or_else(|| format!("#{k}"));
                violations.push(Violation::NegativeDemand {
                    task: t.id.clone(),
                    resource,
                });
            }
        }
    }

    let mut edges_ok = true;
    for edge in inst.precedence() {
        for end in [&edge.0, &edge.1] {
            if inst.index_of(end).is_none() {
                violations.push(Violation::UnknownPrecedenceTask {
                    edge: edge.clone(),
                    missing: end.clone(),
                });
                edges_ok = false;
            }
        }
    }

    if edges_ok {
        if let Some(cycle) = find_cycle(inst) {
            violations.push(Violation::PrecedenceCycle { cycle });
        }
    }

    ValidationReport { violations }
}

/// Locate one directed cycle, reported as a closed id path `a → … → a`.
fn find_cycle(inst: &Instance) -> Option<Vec<String>> {
    let succs = inst.successors();
    let n = inst.n_tasks();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut color = vec![0u8; n];
    let mut parent = vec![usize::MAX; n];

    for root in 0..n {
        if color[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        color[root] = 1;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if *next < succs[node].len() {
                let child = succs[node][*next];
                *next += 1;
                match color[child] {
                    0 => {
                        color[child] = 1;
                        parent[child] = node;
                        stack.push((child, 0));
                    }
                    1 => {
                        // Back edge: walk parents from `node` to `child`.
                        let mut path = vec![child];
                        let mut cur = node;
                        while cur != child {
                            path.push(cur);
                            cur = parent[cur];
                        }
                        path.push(child);
                        path.reverse();
                        return Some(
                            path.into_iter().map(|i| inst.task(i).id.clone()).collect(),
                        );
                    }
                    _ => {}
                }
            } else {
                color[node] = 2;
                stack.pop();
            }
        }
    }
    None
}

/// Convenience: a start-time assignment keyed by task id.
pub type StartMap = BTreeMap<String, Time>;
