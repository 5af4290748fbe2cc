//! Per-process subproblems against the shared usage profile.
//!
//! Selecting a process restricts the instance to that process's tasks with
//! previously committed work entering only through the background usage
//! snapshot. The subproblem objective is the peak form
//! `min sum_k c_k * max_t (u_k(t) + local_k(t))`: provisions are whatever the
//! combined profile peaks at, so minimizing provisioning cost and minimizing
//! the combined peak cost coincide.
//!
//! Small subproblems are solved exactly by branch and bound over feasible
//! starts; larger ones fall back to a serial schedule-generation scheme with
//! a family of priority rules.

use std::collections::BTreeSet;

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::decompose::{ProcessGraph, ProcessStatus};
use crate::error::Error;
use crate::model::{Amount, Cost, Instance, StartMap, Time, UsageProfile};
use crate::seeds;

/// Processes at most this large are solved exactly; larger ones use the
/// schedule-generation heuristic.
pub const EXACT_TASK_THRESHOLD: usize = 12;

/// A self-contained single-process instance plus the background usage
/// snapshot it must be solved against.
#[derive(Debug, Clone)]
pub struct SubproblemSpec {
    pub process: usize,
    /// Member task ids, ascending; all parallel vectors use this order.
    pub task_ids: Vec<String>,
    pub durations: Vec<Time>,
    /// Raw `(earliest_start, deadline)` windows.
    pub windows: Vec<(Time, Time)>,
    pub demands: Vec<Vec<Amount>>,
    /// Internal precedence as local index pairs.
    pub edges: Vec<(usize, usize)>,
    pub costs: Vec<Cost>,
    pub background: UsageProfile,
}

/// One local schedule for a subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSolution {
    pub process: usize,
    pub starts: StartMap,
    /// Usage added by this candidate alone.
    pub local_profile: UsageProfile,
    /// Peak of background plus local usage, per resource.
    pub provisions: Vec<Amount>,
    /// `sum_k c_k * provisions_k`.
    pub objective: Cost,
}

impl CandidateSolution {
    /// Start times in task-id order; the lexicographic tie-break key.
    pub fn start_vector(&self) -> Vec<Time> {
        self.starts.values().copied().collect()
    }

    /// Latest finish over the candidate's tasks, or `None` when empty.
    pub fn max_finish(&self, spec: &SubproblemSpec) -> Option<Time> {
        spec.task_ids
            .iter()
            .zip(&spec.durations)
            .map(|(id, d)| self.starts[id] + d)
            .max()
    }
}

/// Restrict the instance to the selected process against the current profile.
/// Previously scheduled tasks are fixed and visible only through the
/// background snapshot.
pub fn construct_subproblem(
    graph: &ProcessGraph,
    process: usize,
    rpu: &UsageProfile,
    inst: &Instance,
) -> Result<SubproblemSpec, Error> {
    if process >= graph.n_nodes() || !graph.candidates.contains(&process) {
        return Err(Error::NotACandidate { process });
    }
    let proc = &graph.processes[process];
    let members = &proc.task_indices;
    let local_of = |global: usize| members.binary_search(&global).ok();

    let mut edges = Vec::new();
    for (pred, succ) in inst.precedence() {
        if let (Some(pi), Some(si)) = (inst.index_of(pred), inst.index_of(succ)) {
            if let (Some(a), Some(b)) = (local_of(pi), local_of(si)) {
                edges.push((a, b));
            }
        }
    }

    Ok(SubproblemSpec {
        process,
        task_ids: members.iter().map(|&i| inst.task(i).id.clone()).collect(),
        durations: members.iter().map(|&i| inst.task(i).duration).collect(),
        windows: members
            .iter()
            .map(|&i| {
                let t = inst.task(i);
                (t.earliest_start, t.deadline)
            })
            .collect(),
        demands: members.iter().map(|&i| inst.task(i).demands.clone()).collect(),
        edges,
        costs: inst.resources().iter().map(|r| r.unit_cost).collect(),
        background: rpu.clone(),
    })
}

/// Internal solver state over the spec with precedence-tightened windows.
struct Prepared {
    /// `(earliest_start, latest_start)` per local task after propagation.
    start_bounds: Vec<(Time, Time)>,
    /// Branch order: topological, ties by local index (= id order).
    order: Vec<usize>,
    preds: Vec<Vec<usize>>,
}

fn prepare(spec: &SubproblemSpec) -> Result<Prepared, Error> {
    let n = spec.task_ids.len();
    let mut preds = vec![Vec::new(); n];
    let mut succs = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for &(a, b) in &spec.edges {
        preds[b].push(a);
        succs[a].push(b);
        indeg[b] += 1;
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
    if order.len() != n {
        // A cycle inside a process means the instance itself was invalid.
        return Err(Error::SubproblemInfeasible {
            process: spec.process,
            task: spec.task_ids.first().cloned().unwrap_or_default(),
        });
    }

    let mut windows: Vec<(Time, Time)> = spec.windows.clone();
    for &i in &order {
        for &p in &preds[i].clone() {
            let lb = windows[p].0 + spec.durations[p];
            if lb > windows[i].0 {
                windows[i].0 = lb;
            }
        }
    }
    for &i in order.iter().rev() {
        for &s in &succs[i] {
            let ub = windows[s].1 - spec.durations[s];
            if ub < windows[i].1 {
                windows[i].1 = ub;
            }
        }
    }

    let mut start_bounds = Vec::with_capacity(n);
    for i in 0..n {
        let (e, l) = windows[i];
        let latest = l - spec.durations[i];
        if e > latest {
            return Err(Error::SubproblemInfeasible {
                process: spec.process,
                task: spec.task_ids[i].clone(),
            });
        }
        start_bounds.push((e, latest));
    }

    Ok(Prepared {
        start_bounds,
        order,
        preds,
    })
}

/// Combined background-plus-placed-tasks profile with incremental peak
/// maintenance for the branch-and-bound search.
struct CombinedState {
    profile: UsageProfile,
    peaks: Vec<Amount>,
    costs: Vec<Cost>,
}

impl CombinedState {
    fn new(background: &UsageProfile, costs: &[Cost]) -> Self {
        CombinedState {
            peaks: background.peaks(),
            profile: background.clone(),
            costs: costs.to_vec(),
        }
    }

    fn cost(&self) -> Cost {
        self.costs
            .iter()
            .zip(&self.peaks)
            .map(|(c, &p)| *c * Cost::from_integer(p))
            .fold(Cost::zero(), |a, b| a + b)
    }

    fn place(&mut self, spec: &SubproblemSpec, task: usize, start: Time) -> Vec<Amount> {
        let saved = self.peaks.clone();
        let horizon = self.profile.horizon();
        for t in start..start + spec.durations[task] {
            if !horizon.contains(t) {
                continue;
            }
            for (k, &d) in spec.demands[task].iter().enumerate() {
                let level = self.profile.level(k, t) + d;
                self.set_level(k, t, level);
                if level > self.peaks[k] {
                    self.peaks[k] = level;
                }
            }
        }
        saved
    }

    fn unplace(&mut self, spec: &SubproblemSpec, task: usize, start: Time, saved: Vec<Amount>) {
        let horizon = self.profile.horizon();
        for t in start..start + spec.durations[task] {
            if !horizon.contains(t) {
                continue;
            }
            for (k, &d) in spec.demands[task].iter().enumerate() {
                let level = self.profile.level(k, t) - d;
                self.set_level(k, t, level);
            }
        }
        self.peaks = saved;
    }

    fn set_level(&mut self, k: usize, t: Time, value: Amount) {
        let horizon = self.profile.horizon();
        let idx = horizon.index(t);
        // UsageProfile has no interior mutation API on purpose; the solver
        // keeps its own scratch rows.
        self.rows_mut()[k][idx] = value;
    }

    fn rows_mut(&mut self) -> &mut Vec<Vec<Amount>> {
        self.profile.rows_mut()
    }
}

fn candidate_from_starts(spec: &SubproblemSpec, starts: &[Time]) -> CandidateSolution {
    let mut local = UsageProfile::zero(spec.background.horizon(), spec.costs.len());
    let horizon = local.horizon();
    for (i, &s) in starts.iter().enumerate() {
        for t in s..s + spec.durations[i] {
            if !horizon.contains(t) {
                continue;
            }
            let idx = horizon.index(t);
            for (k, &d) in spec.demands[i].iter().enumerate() {
                local.rows_mut()[k][idx] += d;
            }
        }
    }
    let mut provisions = Vec::with_capacity(spec.costs.len());
    for k in 0..spec.costs.len() {
        let peak = spec
            .background
            .resource(k)
            .iter()
            .zip(local.resource(k))
            .map(|(&a, &b)| a + b)
            .max()
            .unwrap_or(0);
        provisions.push(peak);
    }
    let objective = spec
        .costs
        .iter()
        .zip(&provisions)
        .map(|(c, &p)| *c * Cost::from_integer(p))
        .fold(Cost::zero(), |a, b| a + b);
    CandidateSolution {
        process: spec.process,
        starts: spec
            .task_ids
            .iter()
            .cloned()
            .zip(starts.iter().copied())
            .collect(),
        local_profile: local,
        provisions,
        objective,
    }
}

/// Bounded pool of the `m` best `(cost, start-vector)` leaves, ordered by
/// cost then lexicographic start vector in task-id order.
struct BestPool {
    capacity: usize,
    entries: Vec<(Cost, Vec<Time>)>,
}

impl BestPool {
    fn new(capacity: usize) -> Self {
        BestPool {
            capacity,
            entries: Vec::new(),
        }
    }

    fn bound(&self) -> Option<&Cost> {
        (self.entries.len() == self.capacity).then(|| &self.entries.last().unwrap().0)
    }

    fn offer(&mut self, cost: Cost, starts: Vec<Time>) {
        let key = (cost, starts);
        let pos = self.entries.partition_point(|e| *e <= key);
        if pos >= self.capacity {
            return;
        }
        if self.entries.get(pos.wrapping_sub(1)).is_some_and(|e| *e == key) {
            return; // duplicate start vector
        }
        self.entries.insert(pos, key);
        self.entries.truncate(self.capacity);
    }
}

/// Exact branch and bound: up to `m` candidates with pairwise-distinct start
/// vectors, best-first by objective and then lexicographic starts; the first
/// is optimal for the subproblem.
pub fn solve_exact(spec: &SubproblemSpec, m: usize) -> Result<Vec<CandidateSolution>, Error> {
    let prep = prepare(spec)?;
    let n = spec.task_ids.len();
    let mut pool = BestPool::new(m.max(1));
    let mut state = CombinedState::new(&spec.background, &spec.costs);
    let mut starts: Vec<Time> = vec![0; n];

    fn dfs(
        spec: &SubproblemSpec,
        prep: &Prepared,
        depth: usize,
        state: &mut CombinedState,
        starts: &mut Vec<Time>,
        pool: &mut BestPool,
    ) {
        if let Some(bound) = pool.bound() {
            // Placing more tasks never lowers the combined peak, so a partial
            // cost strictly above the pool's worst kept entry is hopeless.
            // Ties continue: a later leaf may win the lexicographic tie-break.
            if state.cost() > *bound {
                return;
            }
        }
        if depth == prep.order.len() {
            pool.offer(state.cost(), starts.clone());
            return;
        }
        let task = prep.order[depth];
        let (e, latest) = prep.start_bounds[task];
        let mut lo = e;
        for &p in &prep.preds[task] {
            lo = lo.max(starts[p] + spec.durations[p]);
        }
        for s in lo..=latest {
            starts[task] = s;
            let saved = state.place(spec, task, s);
            dfs(spec, prep, depth + 1, state, starts, pool);
            state.unplace(spec, task, s, saved);
        }
    }

    dfs(spec, &prep, 0, &mut state, &mut starts, &mut pool);

    // With consistent propagated windows the serial search always reaches a
    // leaf, so an empty pool cannot happen past `prepare`.
    debug_assert!(!pool.entries.is_empty());
    Ok(pool
        .entries
        .iter()
        .map(|(_, s)| candidate_from_starts(spec, s))
        .collect())
}

/// Serial schedule-generation scheme: place tasks one at a time in priority
/// order, each at the feasible start minimizing the incremental combined peak
/// cost (earliest among ties). One candidate per rule: minimum slack, maximum
/// cost-weighted work, then seeded shuffles up to `m` rules. Duplicates by
/// start vector collapse, so fewer than `m` candidates may come back.
pub fn solve_heuristic(
    spec: &SubproblemSpec,
    m: usize,
    seed: u64,
) -> Result<Vec<CandidateSolution>, Error> {
    let prep = prepare(spec)?;
    let n = spec.task_ids.len();

    let slack_rank: Vec<i64> = (0..n)
        .map(|i| prep.start_bounds[i].1 - prep.start_bounds[i].0)
        .collect();
    let work_rank: Vec<Cost> = (0..n)
        .map(|i| {
            spec.costs
                .iter()
                .zip(&spec.demands[i])
                .map(|(c, &d)| *c * Cost::from_integer(d * spec.durations[i]))
                .fold(Cost::zero(), |a, b| a + b)
        })
        .collect();

    let mut seen: BTreeSet<Vec<Time>> = BTreeSet::new();
    let mut out = Vec::new();
    for rule in 0..m {
        // priority[i]: lower schedules earlier; ties fall back to local index.
        let priority: Vec<i64> = match rule {
            0 => slack_rank.clone(),
            1 => {
                let mut ranked: Vec<usize> = (0..n).collect();
                ranked.sort_by(|&a, &b| work_rank[b].cmp(&work_rank[a]).then(a.cmp(&b)));
                let mut pr = vec![0i64; n];
                for (pos, &i) in ranked.iter().enumerate() {
                    pr[i] = pos as i64;
                }
                pr
            }
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, rule as u64));
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                let mut pr = vec![0i64; n];
                for (pos, &i) in perm.iter().enumerate() {
                    pr[i] = pos as i64;
                }
                pr
            }
        };

        let starts = run_sgs(spec, &prep, &priority);
        if seen.insert(starts.clone()) {
            out.push(candidate_from_starts(spec, &starts));
        }
    }

    out.sort_by(|a, b| {
        a.objective
            .cmp(&b.objective)
            .then_with(|| a.start_vector().cmp(&b.start_vector()))
    });
    Ok(out)
}

fn run_sgs(spec: &SubproblemSpec, prep: &Prepared, priority: &[i64]) -> Vec<Time> {
    let n = spec.task_ids.len();
    let mut placed = vec![false; n];
    let mut starts = vec![0i64; n];
    let mut state = CombinedState::new(&spec.background, &spec.costs);
    let mut remaining_preds: Vec<usize> = (0..n).map(|i| prep.preds[i].len()).collect();

    for _ in 0..n {
        let next = (0..n)
            .filter(|&i| !placed[i] && remaining_preds[i] == 0)
            .min_by_key(|&i| (priority[i], i))
            .expect("acyclic subproblem always has a ready task");

        let (e, latest) = prep.start_bounds[next];
        let mut lo = e;
        for &p in &prep.preds[next] {
            lo = lo.max(starts[p] + spec.durations[p]);
        }
        let mut best: Option<(Cost, Time)> = None;
        for s in lo..=latest {
            let saved = state.place(spec, next, s);
            let cost = state.cost();
            state.unplace(spec, next, s, saved);
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                best = Some((cost, s));
            }
        }
        let (_, s) = best.expect("propagated windows leave at least one start");
        starts[next] = s;
        state.place(spec, next, s);
        placed[next] = true;
        for (i, preds) in prep.preds.iter().enumerate() {
            if !placed[i] && preds.contains(&next) {
                remaining_preds[i] -= 1;
            }
        }
    }
    starts
}

/// Route to the exact solver for small processes and the heuristic otherwise.
pub fn solve_subproblem(
    spec: &SubproblemSpec,
    m: usize,
    exact_threshold: usize,
    seed: u64,
) -> Result<Vec<CandidateSolution>, Error> {
    if spec.task_ids.len() <= exact_threshold {
        solve_exact(spec, m)
    } else {
        solve_heuristic(spec, m, seed)
    }
}

/// Commit a candidate: fold its local usage into the shared profile, mark the
/// process scheduled at the given 1-based iteration, and recompute all graph
/// features with provisions set to the updated peaks.
pub fn commit(
    rpu: &mut UsageProfile,
    cand: &CandidateSolution,
    graph: &mut ProcessGraph,
    process: usize,
    iteration: u32,
    inst: &Instance,
) -> Result<(), Error> {
    if cand.process != process {
        return Err(Error::NotACandidate { process });
    }
    if !graph.candidates.contains(&process) {
        return Err(Error::AlreadyCommitted { process });
    }
    rpu.add_assign(&cand.local_profile);
    graph.candidates.remove(&process);
    graph.processes[process].status = ProcessStatus::Scheduled { order: iteration };
    let caps = rpu.peaks();
    graph.refresh_features(inst, rpu, &caps)
}
