//! Graph attention layer (GATv2 form): attention logits apply the
//! nonlinearity before the attention vector, so attention can vary with the
//! receiving node. Message passing for node `i` aggregates its neighborhood
//! plus itself; the self-contribution carries no edge features.

use rand::Rng;

use super::mat::Mat;
use super::tape::{Tape, VarId};

/// Negative slope shared by every nonlinearity in the stack.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Trainable parameters of one attention layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer {
    /// Transform of the receiving node inside the attention logit.
    pub theta_self: Mat,
    /// Transform of the neighbor; doubles as the message transform.
    pub theta_msg: Mat,
    /// Transform of the edge features inside the attention logit.
    pub theta_edge: Mat,
    /// Attention vector reducing the activated logit input to a scalar.
    pub attention: Mat,
}

impl GatLayer {
    pub fn seeded<R: Rng>(in_dim: usize, out_dim: usize, edge_dim: usize, rng: &mut R) -> Self {
        GatLayer {
            theta_self: Mat::glorot(out_dim, in_dim, rng),
            theta_msg: Mat::glorot(out_dim, in_dim, rng),
            theta_edge: Mat::glorot(out_dim, edge_dim, rng),
            attention: Mat::glorot(out_dim, 1, rng),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.theta_msg.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.theta_msg.rows()
    }

    pub fn edge_dim(&self) -> usize {
        self.theta_edge.cols()
    }

    pub fn tensors(&self) -> Vec<(&'static str, &Mat)> {
        vec![
            ("theta_self", &self.theta_self),
            ("theta_msg", &self.theta_msg),
            ("theta_edge", &self.theta_edge),
            ("attention", &self.attention),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Mat)> {
        vec![
            ("theta_self", &mut self.theta_self),
            ("theta_msg", &mut self.theta_msg),
            ("theta_edge", &mut self.theta_edge),
            ("attention", &mut self.attention),
        ]
    }
}

/// Tape handles of one registered layer.
#[derive(Debug, Clone, Copy)]
pub struct GatLayerIds {
    pub theta_self: VarId,
    pub theta_msg: VarId,
    pub theta_edge: VarId,
    pub attention: VarId,
}

pub fn register_layer(tape: &mut Tape, layer: &GatLayer) -> GatLayerIds {
    GatLayerIds {
        theta_self: tape.leaf(layer.theta_self.clone()),
        theta_msg: tape.leaf(layer.theta_msg.clone()),
        theta_edge: tape.leaf(layer.theta_edge.clone()),
        attention: tape.leaf(layer.attention.clone()),
    }
}

/// Per-node neighborhoods: entry `i` lists `(j, edge_features)` with the
/// self-entry `(i, None)` first and neighbors ascending. Edge feature vars
/// must be column vectors registered on the same tape.
pub type Neighborhoods = Vec<Vec<(usize, Option<VarId>)>>;

/// One message-passing layer over column-vector node inputs; returns the new
/// per-node embeddings.
pub fn layer_forward(
    tape: &mut Tape,
    ids: &GatLayerIds,
    inputs: &[VarId],
    neighborhoods: &Neighborhoods,
) -> Vec<VarId> {
    let n = inputs.len();
    assert_eq!(neighborhoods.len(), n);

    let messages: Vec<VarId> = inputs.iter().map(|&v| tape.matmul(ids.theta_msg, v)).collect();
    let self_parts: Vec<VarId> = inputs
        .iter()
        .map(|&v| tape.matmul(ids.theta_self, v))
        .collect();
    let attn_row = tape.transpose(ids.attention);

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut logits = Vec::with_capacity(neighborhoods[i].len());
        let mut neigh_messages = Vec::with_capacity(neighborhoods[i].len());
        for &(j, edge) in &neighborhoods[i] {
            let mut pre = tape.add(self_parts[i], messages[j]);
            if let Some(e) = edge {
                let ev = tape.matmul(ids.theta_edge, e);
                pre = tape.add(pre, ev);
            }
            let act = tape.leaky_relu(pre, LEAKY_SLOPE);
            logits.push(tape.matmul(attn_row, act));
            neigh_messages.push(messages[j]);
        }
        let logit_row = tape.concat_cols(&logits);
        let weights = tape.softmax_row(logit_row);
        let weights_col = tape.transpose(weights);
        let stacked = tape.concat_cols(&neigh_messages);
        out.push(tape.matmul(stacked, weights_col));
    }
    out
}
