//! Graph-attention Q-network and the reconfiguration-aware DQN trainer.
//!
//! The state is the annotated process-level graph; the action set is the
//! candidate (unscheduled) process set; transitions are deterministic commits
//! of one local schedule; the reward is sparse, paid once when the candidate
//! set empties, and equals `alpha * bound / objective` so that cheaper final
//! schedules earn more.
//!
//! The network stacks attention layers over node and edge features and reads
//! a per-candidate scalar from a linear head over the node embedding
//! concatenated with the graph mean embedding. Training follows standard
//! deep Q-learning: seeded epsilon-greedy rollouts, a bounded replay ring, a
//! uniformly sampled minibatch and one gradient step per environment step,
//! with a target network synchronized at a fixed period.

use std::collections::VecDeque;

use num_traits::ToPrimitive;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decompose::ProcessGraph;
use crate::episode::{Episode, SolveOptions};
use crate::error::Error;
use crate::model::{check_schedule, lower_bound, validate_instance, Cost, Instance, Schedule};
use crate::nn::{
    layer_forward, register_layer, Adam, GatLayer, GatLayerIds, Mat, Neighborhoods, Tape, VarId,
};
use crate::seeds;
use crate::selection::SelectionPolicy;

pub const NODE_FEATURES: usize = 4;
pub const EDGE_FEATURES: usize = 7;

/// Dense snapshot of the process-level graph as the MDP state.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphState {
    pub node_features: Vec<[f64; NODE_FEATURES]>,
    /// Directed edges `(from, to, features oriented from -> to)`; every
    /// undirected graph edge appears in both directions.
    pub edges: Vec<(usize, usize, [f64; EDGE_FEATURES])>,
    /// True exactly for unscheduled (candidate) nodes.
    pub mask: Vec<bool>,
    pub iteration: u32,
}

impl GraphState {
    pub fn n_nodes(&self) -> usize {
        self.node_features.len()
    }

    pub fn candidate_ids(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    pub fn is_terminal(&self) -> bool {
        self.mask.iter().all(|&m| !m)
    }
}

/// Copy the current features and candidate mask into a dense state.
pub fn encode_state(graph: &ProcessGraph, iteration: u32) -> GraphState {
    let mut edges = Vec::with_capacity(graph.edges.len() * 2);
    for i in 0..graph.n_nodes() {
        for &(j, edge_idx) in graph.neighbors(i) {
            edges.push((i, j, graph.oriented_edge_features(edge_idx, i)));
        }
    }
    GraphState {
        node_features: graph.node_features.clone(),
        mask: graph
            .processes
            .iter()
            .map(|p| graph.candidates.contains(&p.id))
            .collect(),
        edges,
        iteration,
    }
}

/// Network architecture knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QNetConfig {
    pub hidden: usize,
    pub layers: usize,
}

impl Default for QNetConfig {
    fn default() -> Self {
        QNetConfig {
            hidden: 64,
            layers: 2,
        }
    }
}

/// Learnable weights: one attention layer stack plus the scalar head over
/// `[node embedding || graph mean embedding]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetworkParams {
    pub layers: Vec<GatLayer>,
    pub head_weight: Mat,
    pub head_bias: Mat,
}

impl QNetworkParams {
    pub fn seeded(cfg: &QNetConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(cfg.layers);
        let mut in_dim = NODE_FEATURES;
        for _ in 0..cfg.layers.max(1) {
            layers.push(GatLayer::seeded(in_dim, cfg.hidden, EDGE_FEATURES, &mut rng));
            in_dim = cfg.hidden;
        }
        QNetworkParams {
            layers,
            head_weight: Mat::glorot(1, 2 * cfg.hidden, &mut rng),
            head_bias: Mat::zeros(1, 1),
        }
    }

    pub fn hidden(&self) -> usize {
        self.layers.last().map(|l| l.out_dim()).unwrap_or(0)
    }

    pub fn config(&self) -> QNetConfig {
        QNetConfig {
            hidden: self.hidden(),
            layers: self.layers.len(),
        }
    }

    pub fn tensors(&self) -> Vec<(String, &Mat)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, m) in layer.tensors() {
                out.push((format!("layer{i}.{name}"), m));
            }
        }
        out.push(("head.weight".to_string(), &self.head_weight));
        out.push(("head.bias".to_string(), &self.head_bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Mat)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for (name, m) in layer.tensors_mut() {
                out.push((format!("layer{i}.{name}"), m));
            }
        }
        out.push(("head.weight".to_string(), &mut self.head_weight));
        out.push(("head.bias".to_string(), &mut self.head_bias));
        out
    }

    fn check_state(&self, state: &GraphState) -> Result<(), Error> {
        let first = self.layers.first().ok_or_else(|| Error::ShapeMismatch {
            context: "network has no layers".to_string(),
        })?;
        if first.in_dim() != NODE_FEATURES || first.edge_dim() != EDGE_FEATURES {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "input layer expects {}-dim nodes and {}-dim edges",
                    first.in_dim(),
                    first.edge_dim()
                ),
            });
        }
        let mut dim = first.out_dim();
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            if layer.in_dim() != dim {
                return Err(Error::ShapeMismatch {
                    context: format!("layer {i} input dim {} != {}", layer.in_dim(), dim),
                });
            }
            dim = layer.out_dim();
        }
        if self.head_weight.cols() != 2 * dim {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "head expects {} inputs, embeddings give {}",
                    self.head_weight.cols(),
                    2 * dim
                ),
            });
        }
        for (i, f) in state.node_features.iter().enumerate() {
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::ShapeMismatch {
                    context: format!("node {i} has non-finite features"),
                });
            }
        }
        Ok(())
    }
}

/// Tape handles for a registered parameter set.
pub struct QNetIds {
    pub layers: Vec<GatLayerIds>,
    pub head_weight: VarId,
    pub head_bias: VarId,
}

pub fn register_params(tape: &mut Tape, params: &QNetworkParams) -> QNetIds {
    QNetIds {
        layers: params
            .layers
            .iter()
            .map(|l| register_layer(tape, l))
            .collect(),
        head_weight: tape.leaf(params.head_weight.clone()),
        head_bias: tape.leaf(params.head_bias.clone()),
    }
}

/// Grad extraction order must match `tensors()`.
pub fn param_var_ids(ids: &QNetIds) -> Vec<VarId> {
    let mut out = Vec::new();
    for l in &ids.layers {
        out.extend([l.theta_self, l.theta_msg, l.theta_edge, l.attention]);
    }
    out.push(ids.head_weight);
    out.push(ids.head_bias);
    out
}

/// Build node inputs and neighborhoods (self first, neighbors ascending) for
/// one state on the tape.
pub fn state_on_tape(tape: &mut Tape, state: &GraphState) -> (Vec<VarId>, Neighborhoods) {
    let inputs: Vec<VarId> = state
        .node_features
        .iter()
        .map(|f| tape.leaf(Mat::column(f)))
        .collect();
    let mut neighborhoods: Neighborhoods = (0..state.n_nodes())
        .map(|i| vec![(i, None)])
        .collect();
    let mut directed: Vec<(usize, usize, VarId)> = state
        .edges
        .iter()
        .map(|(from, to, feats)| (*from, *to, tape.leaf(Mat::column(feats))))
        .collect();
    directed.sort_by_key(|&(from, to, _)| (from, to));
    for (from, to, var) in directed {
        neighborhoods[from].push((to, Some(var)));
    }
    (inputs, neighborhoods)
}

/// Stack every attention layer over the state; returns per-node embeddings.
pub fn embeddings_on_tape(
    tape: &mut Tape,
    layer_ids: &[GatLayerIds],
    state: &GraphState,
) -> Vec<VarId> {
    let (mut nodes, neighborhoods) = state_on_tape(tape, state);
    for ids in layer_ids {
        nodes = layer_forward(tape, ids, &nodes, &neighborhoods);
    }
    nodes
}

/// Scalar head per masked-true node over the node embedding concatenated
/// with the graph mean embedding.
fn heads_on_tape(tape: &mut Tape, ids: &QNetIds, state: &GraphState) -> Vec<(usize, VarId)> {
    let embeddings = embeddings_on_tape(tape, &ids.layers, state);
    let all = tape.concat_cols(&embeddings);
    let mean = tape.mean_cols(all);
    let mut out = Vec::new();
    for (i, &masked) in state.mask.iter().enumerate() {
        if !masked {
            continue;
        }
        let joined = tape.concat_rows(&[embeddings[i], mean]);
        let lin = tape.matmul(ids.head_weight, joined);
        out.push((i, tape.add(lin, ids.head_bias)));
    }
    out
}

/// Action values `Q(x, p)` for every candidate `p`, ascending by node id.
pub fn q_values(
    params: &QNetworkParams,
    state: &GraphState,
) -> Result<Vec<(usize, f64)>, Error> {
    params.check_state(state)?;
    if state.is_terminal() {
        return Err(Error::EmptyCandidates);
    }
    let mut tape = Tape::new();
    let ids = register_params(&mut tape, params);
    let heads = heads_on_tape(&mut tape, &ids, state);
    Ok(heads.into_iter().map(|(i, v)| (i, tape.scalar(v))).collect())
}

/// Per-node embeddings without gradients; used by the selector's encoder.
pub fn node_embeddings(layers: &[GatLayer], state: &GraphState) -> Vec<Vec<f64>> {
    let mut tape = Tape::new();
    let ids: Vec<GatLayerIds> = layers.iter().map(|l| register_layer(&mut tape, l)).collect();
    let vars = embeddings_on_tape(&mut tape, &ids, state);
    vars.into_iter()
        .map(|v| tape.value(v).data().to_vec())
        .collect()
}

/// Terminal reward `alpha * bound / objective`; zero on every non-terminal
/// transition. The bound is a valid lower bound so the ratio is at most 1 on
/// exact bounds and the reward at most `alpha`.
pub fn terminal_reward(objective: &Cost, bound: &Cost, alpha: f64) -> Result<f64, Error> {
    if *objective <= Cost::from_integer(0) {
        return Err(Error::NonPositiveObjective {
            objective: objective.to_string(),
        });
    }
    let ratio = (bound / objective).to_f64().unwrap_or(0.0);
    Ok(alpha * ratio)
}

/// Epsilon-greedy action selection over the candidate set; greedy ties break
/// by ascending node id.
pub fn act_epsilon_greedy(
    params: &QNetworkParams,
    state: &GraphState,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<usize, Error> {
    let candidates = state.candidate_ids();
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if rng.random::<f64>() < epsilon {
        return Ok(candidates[rng.random_range(0..candidates.len())]);
    }
    let scores = q_values(params, state)?;
    let mut best = scores[0];
    for &(p, q) in &scores[1..] {
        if q > best.1 {
            best = (p, q);
        }
    }
    Ok(best.0)
}

/// One stored interaction.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: GraphState,
    pub action: usize,
    pub reward: f64,
    pub next: GraphState,
    pub terminal: bool,
}

/// Bounded ring of transitions; oldest evicted first.
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            items: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    /// Uniform sample of `amount` distinct transitions.
    pub fn sample(&self, rng: &mut ChaCha8Rng, amount: usize) -> Vec<&Transition> {
        let amount = amount.min(self.items.len());
        rand::seq::index::sample(rng, self.items.len(), amount)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

/// Bootstrapped regression target: the reward alone on terminal transitions,
/// otherwise reward plus the discounted best target-network value.
pub fn td_target(
    transition: &Transition,
    target: &QNetworkParams,
    gamma: f64,
) -> Result<f64, Error> {
    if transition.terminal {
        return Ok(transition.reward);
    }
    let scores = q_values(target, &transition.next).map_err(|e| match e {
        Error::EmptyCandidates => Error::NonTerminalWithoutCandidates,
        other => other,
    })?;
    let best = scores
        .iter()
        .map(|&(_, q)| q)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(transition.reward + gamma * best)
}

/// Mean squared TD error of a batch on a fresh tape; returns the scalar loss
/// plus the parameter variable ids for gradient extraction.
fn batch_loss_on_tape(
    tape: &mut Tape,
    params: &QNetworkParams,
    batch: &[(&GraphState, usize, f64)],
) -> (VarId, Vec<VarId>) {
    let ids = register_params(tape, params);
    let mut total: Option<VarId> = None;
    for &(state, action, target) in batch {
        let heads = heads_on_tape(tape, &ids, state);
        let q = heads
            .into_iter()
            .find(|(i, _)| *i == action)
            .map(|(_, v)| v)
            .expect("action not in candidate mask");
        let y = tape.leaf(Mat::scalar(target));
        let diff = tape.sub(y, q);
        let sq = tape.mul(diff, diff);
        total = Some(match total {
            None => sq,
            Some(acc) => tape.add(acc, sq),
        });
    }
    let total = total.expect("empty batch");
    let loss = tape.scale(total, 1.0 / batch.len() as f64);
    (loss, param_var_ids(&ids))
}

/// TD loss of a fixed batch, forward only. Test hook for gradient checks.
pub fn td_loss_value(params: &QNetworkParams, batch: &[(&GraphState, usize, f64)]) -> f64 {
    let mut tape = Tape::new();
    let (loss, _) = batch_loss_on_tape(&mut tape, params, batch);
    tape.scalar(loss)
}

/// Analytic gradients of the batch TD loss, aligned with `tensors()`.
pub fn td_loss_gradients(
    params: &QNetworkParams,
    batch: &[(&GraphState, usize, f64)],
) -> (f64, Vec<Mat>) {
    let mut tape = Tape::new();
    let (loss, param_ids) = batch_loss_on_tape(&mut tape, params, batch);
    let grads = tape.backward(loss);
    (
        tape.scalar(loss),
        param_ids.into_iter().map(|id| grads.of(id).clone()).collect(),
    )
}

/// Hyperparameters of the trainer. Defaults follow the reference setting:
/// reward scale 100, discount 0.9, exploration 0.05, target sync every 10
/// steps, minibatch 128, learning rate 1e-3, replay capacity 10_000 and a
/// candidate pool of 2 local solutions per subproblem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub target_sync: usize,
    pub minibatch: usize,
    pub lr: f64,
    /// Episode budget; training cycles through the triples.
    pub episodes: usize,
    pub buffer_capacity: usize,
    pub pool_size: usize,
    pub exact_threshold: usize,
    pub net: QNetConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 100.0,
            gamma: 0.9,
            epsilon: 0.05,
            target_sync: 10,
            minibatch: 128,
            lr: 0.001,
            episodes: 100,
            buffer_capacity: 10_000,
            pool_size: 2,
            exact_threshold: crate::subproblem::EXACT_TASK_THRESHOLD,
            net: QNetConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |reason: &str| Err(Error::InvalidConfig {
            reason: reason.to_string(),
        });
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if self.target_sync == 0 {
            return bad("target sync period must be at least 1");
        }
        if self.minibatch == 0 {
            return bad("minibatch must be at least 1");
        }
        if self.lr <= 0.0 {
            return bad("learning rate must be positive");
        }
        if self.episodes == 0 {
            return bad("episode budget must be at least 1");
        }
        if self.buffer_capacity == 0 {
            return bad("replay capacity must be at least 1");
        }
        if self.pool_size == 0 {
            return bad("pool size must be at least 1");
        }
        Ok(())
    }
}

/// One reconfiguration training case: the original instance, a feasible
/// schedule for it, and the updated instance to re-solve.
#[derive(Debug, Clone)]
pub struct TrainTriple {
    pub original: Instance,
    pub prior: Schedule,
    pub updated: Instance,
}

/// Per-episode record plus free-form notes (e.g. short-minibatch warnings).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub episodes: Vec<EpisodeRecord>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub objective: f64,
    pub reward: f64,
    pub steps: usize,
}

/// Train the Q-network on reconfiguration triples.
///
/// Runs one epsilon-greedy episode per budget slot (cycling through the
/// triples), stores every transition, and performs one minibatch gradient
/// step per environment step against a periodically synchronized target
/// network. When the buffer holds fewer than `minibatch` transitions the
/// step samples what is available and the log notes it once.
pub fn train_dqn(
    triples: &[TrainTriple],
    cfg: &TrainConfig,
    selector: &mut SelectionPolicy,
    seed: u64,
) -> Result<(QNetworkParams, TrainLog), Error> {
    cfg.validate()?;
    if triples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for (i, triple) in triples.iter().enumerate() {
        let report = validate_instance(&triple.original);
        if !report.is_ok() {
            return Err(Error::InvalidTriple {
                index: i,
                reason: format!("original instance invalid: {report}"),
            });
        }
        let report = validate_instance(&triple.updated);
        if !report.is_ok() {
            return Err(Error::InvalidTriple {
                index: i,
                reason: format!("updated instance invalid: {report}"),
            });
        }
        match check_schedule(&triple.original, &triple.prior) {
            Ok(v) if v.is_feasible() => {}
            Ok(_) => {
                return Err(Error::InvalidTriple {
                    index: i,
                    reason: "prior schedule infeasible for the original instance".to_string(),
                })
            }
            Err(e) => {
                return Err(Error::InvalidTriple {
                    index: i,
                    reason: e.to_string(),
                })
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = QNetworkParams::seeded(&cfg.net, seeds::derive(seed, 1));
    let mut target = params.clone();
    let mut adam = Adam::new(cfg.lr);
    let mut replay = ReplayBuffer::new(cfg.buffer_capacity);
    let mut log = TrainLog::default();
    let mut short_batch_noted = false;
    let mut global_step: usize = 0;

    for ep in 0..cfg.episodes {
        let triple = &triples[ep % triples.len()];
        let opts = SolveOptions {
            pool_size: cfg.pool_size,
            exact_threshold: cfg.exact_threshold,
            heuristic_seed: seeds::derive(seed, 0x1000 + ep as u64),
        };
        let mut episode =
            Episode::from_reconfig(&triple.original, &triple.prior, &triple.updated, opts)?;
        let bound = lower_bound(&triple.updated).total;

        let mut steps = 0usize;
        let mut final_reward = 0.0;
        while !episode.is_done() {
            let state = episode.encode();
            let action = act_epsilon_greedy(&params, &state, cfg.epsilon, &mut rng)?;
            episode.step(action, selector)?;
            let next = episode.encode();
            let terminal = episode.is_done();
            let reward = if terminal {
                let (_, objective) = episode.finish()?;
                terminal_reward(&objective, &bound, cfg.alpha)?
            } else {
                0.0
            };
            replay.push(Transition {
                state,
                action,
                reward,
                next,
                terminal,
            });
            final_reward = reward;
            steps += 1;

            let want = cfg.minibatch;
            if replay.len() < want && !short_batch_noted {
                log.notes.push(format!(
                    "minibatch shortened to buffer size {} (< {}) during warmup",
                    replay.len(),
                    want
                ));
                short_batch_noted = true;
            }
            let batch = replay.sample(&mut rng, want);
            let mut prepared = Vec::with_capacity(batch.len());
            for t in &batch {
                let y = td_target(t, &target, cfg.gamma)?;
                prepared.push((&t.state, t.action, y));
            }
            let (_, grads) = td_loss_gradients(&params, &prepared);
            {
                let mut tensors = params.tensors_mut();
                let mut slots: Vec<&mut Mat> =
                    tensors.iter_mut().map(|(_, m)| &mut **m).collect();
                let grad_refs: Vec<&Mat> = grads.iter().collect();
                adam.step(&mut slots, &grad_refs);
            }
            global_step += 1;
            if global_step % cfg.target_sync == 0 {
                target = params.clone();
            }
        }

        let (_, objective) = episode.finish()?;
        log.episodes.push(EpisodeRecord {
            objective: objective.to_f64().unwrap_or(f64::NAN),
            reward: final_reward,
            steps,
        });
    }

    Ok((params, log))
}
