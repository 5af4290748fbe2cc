//! Local-solution selection: scoring, heuristics and ranking training.
//!
//! Every subproblem solve yields a small pool of candidate local schedules;
//! exactly one is committed. The learned selector scores each candidate with
//! a value network over the graph state and a fixed-width candidate summary,
//! trained offline with a pairwise logistic ranking loss on rolled-out final
//! objectives (lower score = preferred, selection is argmin). The heuristic
//! selectors rank by smoothness (adjacent-difference mean or total variation
//! of the combined profile), earliest completion, or a seeded coin.

use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decompose::ProcessGraph;
use crate::episode::{Episode, SolveOptions};
use crate::error::Error;
use crate::model::{validate_instance, Cost, Instance, Time, UsageProfile};
use crate::nn::{register_layer, Adam, GatLayer, GatLayerIds, Mat, Tape, VarId};
use crate::ordering::{select_next, OrderingPolicy};
use crate::qnet::{embeddings_on_tape, GraphState, EDGE_FEATURES, NODE_FEATURES};
use crate::seeds;
use crate::subproblem::CandidateSolution;

/// Fixed-width summary of one candidate's local impact. The profile stats
/// aggregate across resources with cost weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateFeatures {
    /// Cost-weighted root-mean-square of the incremental usage.
    pub rms: f64,
    /// Cost-weighted total variation (sum of adjacent absolute differences).
    pub total_variation: f64,
    /// Cost-weighted peak of the incremental usage.
    pub peak: f64,
    /// First peak position, normalized by the horizon span.
    pub peak_position: f64,
    /// Fraction of the candidate's active span covered by neighboring
    /// processes' feasible windows.
    pub neighbor_overlap: f64,
    /// Mean remaining start slack over the candidate's tasks.
    pub mean_slack: f64,
    /// Minimum remaining start slack over the candidate's tasks.
    pub min_slack: f64,
}

pub const CANDIDATE_FEATURES: usize = 7;

impl CandidateFeatures {
    pub fn to_vec(self) -> [f64; CANDIDATE_FEATURES] {
        [
            self.rms,
            self.total_variation,
            self.peak,
            self.peak_position,
            self.neighbor_overlap,
            self.mean_slack,
            self.min_slack,
        ]
    }
}

/// Summarize a feasible candidate's local impact.
pub fn candidate_features(
    cand: &CandidateSolution,
    graph: &ProcessGraph,
    rpu: &UsageProfile,
    inst: &Instance,
) -> CandidateFeatures {
    let horizon = rpu.horizon();
    let span = horizon.span();
    let total_cost = inst.total_unit_cost().to_f64().unwrap_or(0.0);
    let norm = if total_cost > 0.0 { total_cost } else { 1.0 };

    let mut rms = 0.0;
    let mut tv = 0.0;
    let mut peak = 0.0;
    let mut peak_position = 0.0;
    for (k, r) in inst.resources().iter().enumerate() {
        let c = r.unit_cost.to_f64().unwrap_or(0.0);
        let row = cand.local_profile.resource(k);
        if row.is_empty() {
            continue;
        }
        let sq: i64 = row.iter().map(|&v| v * v).sum();
        rms += c * (sq as f64 / span as f64).sqrt();
        let var: i64 = row.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        tv += c * var as f64;
        let row_peak = row.iter().copied().max().unwrap_or(0);
        peak += c * row_peak as f64;
        if row_peak > 0 {
            let pos = row.iter().position(|&v| v == row_peak).unwrap();
            peak_position += c * pos as f64 / span as f64;
        }
    }
    rms /= norm;
    tv /= norm;
    peak /= norm;
    peak_position /= norm;

    // Active span of the candidate against the union of neighbor windows.
    let mut neighbor_overlap = 0.0;
    let starts = cand.start_vector();
    if !starts.is_empty() {
        let durations: Vec<Time> = cand
            .starts
            .keys()
            .map(|id| inst.task_by_id(id).map(|t| t.duration).unwrap_or(0))
            .collect();
        let span_start = *starts.iter().min().unwrap();
        let span_end = starts
            .iter()
            .zip(&durations)
            .map(|(&s, &d)| s + d)
            .max()
            .unwrap();
        let len = (span_end - span_start).max(0);
        if len > 0 {
            let mut covered = 0i64;
            for t in span_start..span_end {
                let hit = graph
                    .neighbors(cand.process)
                    .iter()
                    .any(|&(j, _)| {
                        let p = &graph.processes[j];
                        t >= p.window_start && t < p.window_end
                    });
                if hit {
                    covered += 1;
                }
            }
            neighbor_overlap = covered as f64 / len as f64;
        }
    }

    let mut slacks: Vec<i64> = Vec::with_capacity(cand.starts.len());
    for (id, &s) in &cand.starts {
        if let Some(t) = inst.task_by_id(id) {
            slacks.push(t.latest_start() - s);
        }
    }
    let (mean_slack, min_slack) = if slacks.is_empty() {
        (0.0, 0.0)
    } else {
        (
            slacks.iter().sum::<i64>() as f64 / slacks.len() as f64,
            *slacks.iter().min().unwrap() as f64,
        )
    };

    CandidateFeatures {
        rms,
        total_variation: tv,
        peak,
        peak_position,
        neighbor_overlap,
        mean_slack,
        min_slack,
    }
}

/// Selector network architecture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub hidden: usize,
    pub gat_layers: usize,
    pub mlp_hidden: usize,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig {
            hidden: 64,
            gat_layers: 2,
            mlp_hidden: 64,
        }
    }
}

/// Value-network weights: a graph encoder of the same attention family as
/// the Q-network (separate parameters) pooled by mean into a global
/// embedding, and a two-layer perceptron over the embedding concatenated
/// with the candidate summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectorParams {
    pub encoder: Vec<GatLayer>,
    pub mlp_hidden_weight: Mat,
    pub mlp_hidden_bias: Mat,
    pub mlp_out_weight: Mat,
    pub mlp_out_bias: Mat,
}

impl SelectorParams {
    pub fn seeded(cfg: &SelectorConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut encoder = Vec::with_capacity(cfg.gat_layers);
        let mut in_dim = NODE_FEATURES;
        for _ in 0..cfg.gat_layers.max(1) {
            encoder.push(GatLayer::seeded(in_dim, cfg.hidden, EDGE_FEATURES, &mut rng));
            in_dim = cfg.hidden;
        }
        SelectorParams {
            encoder,
            mlp_hidden_weight: Mat::glorot(cfg.mlp_hidden, cfg.hidden + CANDIDATE_FEATURES, &mut rng),
            mlp_hidden_bias: Mat::zeros(cfg.mlp_hidden, 1),
            mlp_out_weight: Mat::glorot(1, cfg.mlp_hidden, &mut rng),
            mlp_out_bias: Mat::zeros(1, 1),
        }
    }

    pub fn config(&self) -> SelectorConfig {
        SelectorConfig {
            hidden: self.encoder.last().map(|l| l.out_dim()).unwrap_or(0),
            gat_layers: self.encoder.len(),
            mlp_hidden: self.mlp_hidden_weight.rows(),
        }
    }

    pub fn tensors(&self) -> Vec<(String, &Mat)> {
        let mut out = Vec::new();
        for (i, layer) in self.encoder.iter().enumerate() {
            for (name, m) in layer.tensors() {
                out.push((format!("encoder{i}.{name}"), m));
            }
        }
        out.push(("mlp.hidden_weight".to_string(), &self.mlp_hidden_weight));
        out.push(("mlp.hidden_bias".to_string(), &self.mlp_hidden_bias));
        out.push(("mlp.out_weight".to_string(), &self.mlp_out_weight));
        out.push(("mlp.out_bias".to_string(), &self.mlp_out_bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Mat)> {
        let mut out = Vec::new();
        for (i, layer) in self.encoder.iter_mut().enumerate() {
            for (name, m) in layer.tensors_mut() {
                out.push((format!("encoder{i}.{name}"), m));
            }
        }
        out.push(("mlp.hidden_weight".to_string(), &mut self.mlp_hidden_weight));
        out.push(("mlp.hidden_bias".to_string(), &mut self.mlp_hidden_bias));
        out.push(("mlp.out_weight".to_string(), &mut self.mlp_out_weight));
        out.push(("mlp.out_bias".to_string(), &mut self.mlp_out_bias));
        out
    }

    fn check_state(&self, state: &GraphState) -> Result<(), Error> {
        let first = self.encoder.first().ok_or_else(|| Error::ShapeMismatch {
            context: "selector encoder has no layers".to_string(),
        })?;
        if first.in_dim() != NODE_FEATURES || first.edge_dim() != EDGE_FEATURES {
            return Err(Error::ShapeMismatch {
                context: "selector encoder input dims".to_string(),
            });
        }
        let hidden = self.encoder.last().unwrap().out_dim();
        if self.mlp_hidden_weight.cols() != hidden + CANDIDATE_FEATURES {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "selector mlp expects {} inputs, encoder + features give {}",
                    self.mlp_hidden_weight.cols(),
                    hidden + CANDIDATE_FEATURES
                ),
            });
        }
        if state.node_features.is_empty() {
            return Err(Error::ShapeMismatch {
                context: "empty graph state".to_string(),
            });
        }
        Ok(())
    }
}

struct SelectorIds {
    encoder: Vec<GatLayerIds>,
    mlp_hidden_weight: VarId,
    mlp_hidden_bias: VarId,
    mlp_out_weight: VarId,
    mlp_out_bias: VarId,
}

fn register_selector(tape: &mut Tape, params: &SelectorParams) -> SelectorIds {
    SelectorIds {
        encoder: params
            .encoder
            .iter()
            .map(|l| register_layer(tape, l))
            .collect(),
        mlp_hidden_weight: tape.leaf(params.mlp_hidden_weight.clone()),
        mlp_hidden_bias: tape.leaf(params.mlp_hidden_bias.clone()),
        mlp_out_weight: tape.leaf(params.mlp_out_weight.clone()),
        mlp_out_bias: tape.leaf(params.mlp_out_bias.clone()),
    }
}

fn selector_param_ids(ids: &SelectorIds) -> Vec<VarId> {
    let mut out = Vec::new();
    for l in &ids.encoder {
        out.extend([l.theta_self, l.theta_msg, l.theta_edge, l.attention]);
    }
    out.extend([
        ids.mlp_hidden_weight,
        ids.mlp_hidden_bias,
        ids.mlp_out_weight,
        ids.mlp_out_bias,
    ]);
    out
}

/// Score candidates on one tape: shared global embedding, one MLP pass per
/// candidate summary.
fn scores_on_tape(
    tape: &mut Tape,
    ids: &SelectorIds,
    state: &GraphState,
    feats: &[CandidateFeatures],
) -> Vec<VarId> {
    let embeddings = embeddings_on_tape(tape, &ids.encoder, state);
    let all = tape.concat_cols(&embeddings);
    let global = tape.mean_cols(all);
    feats
        .iter()
        .map(|f| {
            let z = tape.leaf(Mat::column(&f.to_vec()));
            let joined = tape.concat_rows(&[global, z]);
            let lin = tape.matmul(ids.mlp_hidden_weight, joined);
            let lin = tape.add(lin, ids.mlp_hidden_bias);
            let act = tape.leaky_relu(lin, crate::nn::LEAKY_SLOPE);
            let out = tape.matmul(ids.mlp_out_weight, act);
            tape.add(out, ids.mlp_out_bias)
        })
        .collect()
}

/// Value-network score of one candidate; lower is better.
pub fn score(
    params: &SelectorParams,
    state: &GraphState,
    feats: &CandidateFeatures,
) -> Result<f64, Error> {
    params.check_state(state)?;
    let mut tape = Tape::new();
    let ids = register_selector(&mut tape, params);
    let vars = scores_on_tape(&mut tape, &ids, state, std::slice::from_ref(feats));
    Ok(tape.scalar(vars[0]))
}

/// Pairwise logistic ranking loss: for every ordered pair whose first
/// objective is strictly smaller, add `log(1 + exp(s_first - s_second))`.
/// Equal objectives contribute nothing. Minimized when better candidates
/// score lower.
pub fn rank_loss(scores: &[f64], objectives: &[Cost]) -> Result<f64, Error> {
    if scores.len() < 2 || scores.len() != objectives.len() {
        return Err(Error::RankingTooShort { got: scores.len() });
    }
    let mut loss = 0.0;
    for j in 0..scores.len() {
        for k in 0..scores.len() {
            if objectives[j] < objectives[k] {
                loss += crate::nn::tape::log1p_exp(scores[j] - scores[k]);
            }
        }
    }
    Ok(loss)
}

/// Local-solution selection policies.
pub enum SelectionPolicy {
    Learned(SelectorParams),
    /// Minimum cost-weighted mean adjacent difference of the combined
    /// profile.
    Mad,
    /// Minimum cost-weighted total variation of the combined profile.
    Tv,
    /// Minimum completion time (earliest latest-finish), the aggressive
    /// early-committing rule.
    Mct,
    /// Seeded uniform choice.
    RandLs(ChaCha8Rng),
}

impl SelectionPolicy {
    pub fn rand(seed: u64) -> Self {
        SelectionPolicy::RandLs(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn name(&self) -> &'static str {
        match self {
            SelectionPolicy::Learned(_) => "learned",
            SelectionPolicy::Mad => "mad",
            SelectionPolicy::Tv => "tv",
            SelectionPolicy::Mct => "mct",
            SelectionPolicy::RandLs(_) => "rand",
        }
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, SelectionPolicy::RandLs(_))
    }
}

/// Cost-weighted total variation of the combined profile `rpu + local`,
/// exact in rationals.
fn combined_variation(cand: &CandidateSolution, rpu: &UsageProfile, inst: &Instance) -> Cost {
    let mut acc = Cost::zero();
    for (k, r) in inst.resources().iter().enumerate() {
        let base = rpu.resource(k);
        let local = cand.local_profile.resource(k);
        let mut var = 0i64;
        for w in 0..base.len().saturating_sub(1) {
            let a = base[w] + local[w];
            let b = base[w + 1] + local[w + 1];
            var += (b - a).abs();
        }
        acc += r.unit_cost * Cost::from_integer(var);
    }
    acc
}

/// Pick one candidate index. Deterministic selectors break ties by the
/// lowest candidate index.
pub fn select(
    policy: &mut SelectionPolicy,
    candidates: &[CandidateSolution],
    state: &GraphState,
    graph: &ProcessGraph,
    rpu: &UsageProfile,
    inst: &Instance,
) -> Result<usize, Error> {
    if candidates.is_empty() {
        return Err(Error::NoCandidateSolutions);
    }
    match policy {
        SelectionPolicy::Learned(params) => {
            let mut best = (0usize, f64::INFINITY);
            for (idx, cand) in candidates.iter().enumerate() {
                let feats = candidate_features(cand, graph, rpu, inst);
                let s = score(params, state, &feats)?;
                if s < best.1 {
                    best = (idx, s);
                }
            }
            Ok(best.0)
        }
        SelectionPolicy::Mad | SelectionPolicy::Tv => {
            // At adjacent-step granularity the mean difference is the total
            // variation divided by the same horizon constant, so both rules
            // minimize the same exact quantity.
            let mut best = 0usize;
            let mut best_tv = combined_variation(&candidates[0], rpu, inst);
            for (idx, cand) in candidates.iter().enumerate().skip(1) {
                let tv = combined_variation(cand, rpu, inst);
                if tv < best_tv {
                    best = idx;
                    best_tv = tv;
                }
            }
            Ok(best)
        }
        SelectionPolicy::Mct => {
            let finish = |cand: &CandidateSolution| -> Time {
                cand.starts
                    .iter()
                    .map(|(id, &s)| s + inst.task_by_id(id).map(|t| t.duration).unwrap_or(0))
                    .max()
                    .unwrap_or(Time::MIN)
            };
            let mut best = 0usize;
            let mut best_finish = finish(&candidates[0]);
            for (idx, cand) in candidates.iter().enumerate().skip(1) {
                let f = finish(cand);
                if f < best_finish {
                    best = idx;
                    best_finish = f;
                }
            }
            Ok(best)
        }
        SelectionPolicy::RandLs(rng) => Ok(rng.random_range(0..candidates.len())),
    }
}

/// One offline supervision tuple: the state at selection time, candidate
/// summaries, and the rolled-out final objectives per candidate.
#[derive(Debug, Clone)]
pub struct SelectionTuple {
    pub state: GraphState,
    pub features: Vec<CandidateFeatures>,
    pub objectives: Vec<Cost>,
}

/// Roll-out configuration for tuple collection and training.
#[derive(Debug, Clone)]
pub struct SelectorTrainConfig {
    pub net: SelectorConfig,
    pub lr: f64,
    pub epochs: usize,
    /// Cap on tuples collected per instance; `None` keeps every iteration.
    pub max_tuples_per_instance: Option<usize>,
    pub pool_size: usize,
    pub exact_threshold: usize,
}

impl Default for SelectorTrainConfig {
    fn default() -> Self {
        SelectorTrainConfig {
            net: SelectorConfig::default(),
            lr: 0.001,
            epochs: 10,
            max_tuples_per_instance: None,
            pool_size: 2,
            exact_threshold: crate::subproblem::EXACT_TASK_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectorTrainLog {
    pub tuples: usize,
    pub skipped_rollouts: usize,
    pub epoch_mean_loss: Vec<f64>,
}

fn baseline_pair(
    policy: &OrderingPolicy,
    selector: &SelectionPolicy,
) -> Result<(OrderingPolicy, SelectionPolicy), Error> {
    let p = match policy {
        OrderingPolicy::Ccpm => OrderingPolicy::Ccpm,
        OrderingPolicy::Mrrr => OrderingPolicy::Mrrr,
        OrderingPolicy::Dum => OrderingPolicy::Dum,
        _ => {
            return Err(Error::InvalidConfig {
                reason: "baseline ordering policy must be deterministic".to_string(),
            })
        }
    };
    let s = match selector {
        SelectionPolicy::Mad => SelectionPolicy::Mad,
        SelectionPolicy::Tv => SelectionPolicy::Tv,
        SelectionPolicy::Mct => SelectionPolicy::Mct,
        _ => {
            return Err(Error::InvalidConfig {
                reason: "baseline selector must be a deterministic heuristic".to_string(),
            })
        }
    };
    Ok((p, s))
}

/// Enumerate supervision tuples from cold-start episodes: at each iteration
/// of the baseline trajectory, every candidate is committed in a cloned
/// episode and rolled out to completion under the fixed baseline; the final
/// objectives label the tuple. Iterations with fewer than two candidates
/// carry no signal and are skipped; infeasible rollouts skip the tuple and
/// are counted.
pub fn collect_selection_tuples(
    instances: &[Instance],
    baseline_policy: &OrderingPolicy,
    baseline_selector: &SelectionPolicy,
    cfg: &SelectorTrainConfig,
) -> Result<(Vec<SelectionTuple>, usize), Error> {
    let mut tuples = Vec::new();
    let mut skipped = 0usize;
    for inst in instances {
        let report = validate_instance(inst);
        if !report.is_ok() {
            return Err(Error::InvalidInstance {
                violations: report.violations.iter().map(|v| v.to_string()).collect(),
            });
        }
        let opts = SolveOptions {
            pool_size: cfg.pool_size,
            exact_threshold: cfg.exact_threshold,
            heuristic_seed: 0,
        };
        let mut episode = Episode::cold_start(inst, opts.clone())?;
        let mut collected = 0usize;
        while !episode.is_done() {
            let (mut bp, mut bs) = baseline_pair(baseline_policy, baseline_selector)?;
            let process = select_next(&mut bp, episode.graph(), inst, episode.rpu())?;
            let candidates = episode.solve_candidates(process)?;
            let state = episode.encode();

            let under_cap = cfg
                .max_tuples_per_instance
                .is_none_or(|cap| collected < cap);
            if candidates.len() >= 2 && under_cap {
                let mut features = Vec::with_capacity(candidates.len());
                let mut objectives = Vec::with_capacity(candidates.len());
                let mut ok = true;
                for cand in &candidates {
                    features.push(candidate_features(
                        cand,
                        episode.graph(),
                        episode.rpu(),
                        inst,
                    ));
                    let mut branch = episode.clone();
                    if branch.commit_candidate(process, cand).is_err() {
                        ok = false;
                        break;
                    }
                    match roll_out(&mut branch, baseline_policy, baseline_selector) {
                        Ok(obj) => objectives.push(obj),
                        Err(_) => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    tuples.push(SelectionTuple {
                        state: state.clone(),
                        features,
                        objectives,
                    });
                    collected += 1;
                } else {
                    skipped += 1;
                }
            }

            let chosen = select(
                &mut bs,
                &candidates,
                &state,
                episode.graph(),
                episode.rpu(),
                inst,
            )?;
            episode.commit_candidate(process, &candidates[chosen])?;
        }
    }
    Ok((tuples, skipped))
}

fn roll_out(
    episode: &mut Episode,
    policy: &OrderingPolicy,
    selector: &SelectionPolicy,
) -> Result<Cost, Error> {
    let (mut bp, mut bs) = baseline_pair(policy, selector)?;
    while !episode.is_done() {
        let process = select_next(&mut bp, episode.graph(), episode.instance(), episode.rpu())?;
        episode.step(process, &mut bs)?;
    }
    episode.finish().map(|(_, obj)| obj)
}

/// Offline ranking training over collected tuples.
pub fn train_selector(
    instances: &[Instance],
    baseline_policy: &OrderingPolicy,
    baseline_selector: &SelectionPolicy,
    cfg: &SelectorTrainConfig,
    seed: u64,
) -> Result<(SelectorParams, SelectorTrainLog), Error> {
    let (tuples, skipped) =
        collect_selection_tuples(instances, baseline_policy, baseline_selector, cfg)?;
    if tuples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let params = train_selector_on_tuples(&tuples, cfg, seed)?;
    let (params, mut log) = params;
    log.skipped_rollouts = skipped;
    Ok((params, log))
}

/// Gradient descent on the pairwise ranking loss over prepared tuples.
pub fn train_selector_on_tuples(
    tuples: &[SelectionTuple],
    cfg: &SelectorTrainConfig,
    seed: u64,
) -> Result<(SelectorParams, SelectorTrainLog), Error> {
    if tuples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.lr <= 0.0 || cfg.epochs == 0 {
        return Err(Error::InvalidConfig {
            reason: "selector training needs positive lr and at least one epoch".to_string(),
        });
    }
    let mut params = SelectorParams::seeded(&cfg.net, seeds::derive(seed, 2));
    let mut adam = Adam::new(cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = SelectorTrainLog {
        tuples: tuples.len(),
        ..SelectorTrainLog::default()
    };

    let mut order: Vec<usize> = (0..tuples.len()).collect();
    for _epoch in 0..cfg.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut counted = 0usize;
        for &idx in &order {
            let tuple = &tuples[idx];
            if tuple.objectives.iter().all(|o| *o == tuple.objectives[0]) {
                continue; // no ordered pairs, zero loss and zero gradient
            }
            let (loss, grads) = rank_loss_gradients(&params, tuple)?;
            epoch_loss += loss;
            counted += 1;
            let mut tensors = params.tensors_mut();
            let mut slots: Vec<&mut Mat> = tensors.iter_mut().map(|(_, m)| &mut **m).collect();
            let grad_refs: Vec<&Mat> = grads.iter().collect();
            adam.step(&mut slots, &grad_refs);
        }
        log.epoch_mean_loss
            .push(if counted == 0 { 0.0 } else { epoch_loss / counted as f64 });
    }
    Ok((params, log))
}

/// Ranking loss of one tuple, forward only. Test hook for gradient checks.
pub fn rank_loss_value(params: &SelectorParams, tuple: &SelectionTuple) -> Result<f64, Error> {
    params.check_state(&tuple.state)?;
    let mut tape = Tape::new();
    let ids = register_selector(&mut tape, params);
    let score_vars = scores_on_tape(&mut tape, &ids, &tuple.state, &tuple.features);
    let loss = rank_loss_on_tape(&mut tape, &score_vars, &tuple.objectives)?;
    Ok(tape.scalar(loss))
}

/// Analytic gradients of one tuple's ranking loss, aligned with `tensors()`.
pub fn rank_loss_gradients(
    params: &SelectorParams,
    tuple: &SelectionTuple,
) -> Result<(f64, Vec<Mat>), Error> {
    params.check_state(&tuple.state)?;
    let mut tape = Tape::new();
    let ids = register_selector(&mut tape, params);
    let score_vars = scores_on_tape(&mut tape, &ids, &tuple.state, &tuple.features);
    let loss = rank_loss_on_tape(&mut tape, &score_vars, &tuple.objectives)?;
    let grads = tape.backward(loss);
    let out = selector_param_ids(&ids)
        .into_iter()
        .map(|id| grads.of(id).clone())
        .collect();
    Ok((tape.scalar(loss), out))
}

fn rank_loss_on_tape(
    tape: &mut Tape,
    scores: &[VarId],
    objectives: &[Cost],
) -> Result<VarId, Error> {
    if scores.len() < 2 || scores.len() != objectives.len() {
        return Err(Error::RankingTooShort { got: scores.len() });
    }
    let mut total: Option<VarId> = None;
    for j in 0..scores.len() {
        for k in 0..scores.len() {
            if objectives[j] < objectives[k] {
                let diff = tape.sub(scores[j], scores[k]);
                let term = tape.log1p_exp(diff);
                total = Some(match total {
                    None => term,
                    Some(acc) => tape.add(acc, term),
                });
            }
        }
    }
    Ok(match total {
        Some(t) => t,
        // All objectives equal: the loss is identically zero.
        None => tape.leaf(Mat::scalar(0.0)),
    })
}

/// Fraction of strictly-ordered candidate pairs the selector ranks
/// consistently (better objective gets the lower score).
pub fn ranking_accuracy(params: &SelectorParams, tuples: &[SelectionTuple]) -> Result<f64, Error> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for tuple in tuples {
        let mut scores = Vec::with_capacity(tuple.features.len());
        for f in &tuple.features {
            scores.push(score(params, &tuple.state, f)?);
        }
        for j in 0..scores.len() {
            for k in 0..scores.len() {
                if tuple.objectives[j] < tuple.objectives[k] {
                    total += 1;
                    if scores[j] < scores[k] {
                        correct += 1;
                    }
                }
            }
        }
    }
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(correct as f64 / total as f64)
}
