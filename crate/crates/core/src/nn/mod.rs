//! Minimal neural-network machinery: dense matrices, a reverse-mode tape,
//! the graph-attention layer and an Adam optimizer. Everything is f64 and
//! CPU-only; graphs are small and rebuilt per state.

pub mod adam;
pub mod gat;
pub mod mat;
pub mod tape;

pub use adam::Adam;
pub use gat::{layer_forward, register_layer, GatLayer, GatLayerIds, Neighborhoods, LEAKY_SLOPE};
pub use mat::Mat;
pub use tape::{Gradients, Tape, VarId};
