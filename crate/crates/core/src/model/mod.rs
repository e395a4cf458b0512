//! The task-driven modular scoring model, its two shared-gating ablations,
//! and the joint-embedding baseline.

pub mod config;
pub mod forward;
pub mod gating;
pub mod params;
pub mod traced;

pub use config::ModularNetConfig;
pub use gating::GatingSet;
pub use params::{glorot_bound, KindParams, Linear, Mlp, ModelKind, ModelParams, ParamGroup};
pub use traced::TracedModel;

/// An (object id, attribute id) label; the unit of composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptPair {
    pub object: usize,
    pub attribute: usize,
}

impl ConceptPair {
    pub fn new(object: usize, attribute: usize) -> Self {
        ConceptPair { object, attribute }
    }
}

/// Weight-matrix parameters of one modular layer: `M` modules of width `d`.
pub fn modular_layer_weight_count(modules: usize, width: usize) -> usize {
    modules * width * width
}

/// Weight-matrix parameters of the dense layer of equal total width `M * d`.
pub fn dense_layer_weight_count(modules: usize, width: usize) -> usize {
    (modules * width) * (modules * width)
}

/// All affine parameters (weights and biases) of one modular layer.
pub fn modular_layer_param_count(modules: usize, width: usize) -> usize {
    modules * (width * width + width)
}

/// All affine parameters of the equal-width dense layer.
pub fn dense_layer_param_count(modules: usize, width: usize) -> usize {
    let total = modules * width;
    total * total + total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modular_layers_use_m_times_fewer_weight_parameters() {
        for m in [12, 18, 24, 30] {
            let d = 16;
            assert_eq!(
                dense_layer_weight_count(m, d),
                m * modular_layer_weight_count(m, d)
            );
            assert_eq!(modular_layer_param_count(m, d), m * (d * d + d));
            assert_eq!(dense_layer_param_count(m, d), (m * d) * (m * d) + m * d);
        }
    }
}
