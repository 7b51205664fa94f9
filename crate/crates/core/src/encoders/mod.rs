//! Modality encoders: a patch transformer over rasterized layouts and a
//! neighbour-masked transformer over netlist graphs.

mod blocks;
mod graph;
mod layout;

pub use blocks::{Attended, Attention, Block, LayerNorm, Linear};
pub use graph::{GraphEncoder, GraphEncoderConfig, GraphTokens, NUM_EDGE_TYPES};
pub use layout::{LayoutEncoder, LayoutEncoderConfig, LayoutTokens, SPECIAL_TOKENS};
