//! Softmax-normalized edge weights that rewire the modular network.

use crate::error::{Error, Result};
use crate::model::config::ModularNetConfig;
use crate::numeric::tensor::{self, Tensor};

/// Per-layer gating logits and their softmax normalization.
///
/// Layer `i` (0-based) is stored destination-major as a
/// `(destinations x incoming)` matrix: row `j` holds the weights on the edges
/// feeding destination module `j`, which are positive and sum to one. In the
/// edge notation `g_{k->j}` that row is the softmax over `k` of the logits
/// `q_{k->j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GatingSet {
    logits: Vec<Tensor>,
    gates: Vec<Tensor>,
}

impl GatingSet {
    /// Splits a flat logit vector (layer-major, destination-major layout; see
    /// [`ModularNetConfig::gate_layer_offset`]) and normalizes each
    /// destination's incoming edges.
    pub fn from_flat_logits(cfg: &ModularNetConfig, flat: &[f64]) -> Result<Self> {
        if flat.len() != cfg.gate_vec_len() {
            return Err(Error::dim(
                "gating",
                format!(
                    "flat logit vector has {} values, layout needs {}",
                    flat.len(),
                    cfg.gate_vec_len()
                ),
            ));
        }
        let mut logits = Vec::with_capacity(cfg.layers);
        let mut gates = Vec::with_capacity(cfg.layers);
        for i in 0..cfg.layers {
            let (prev, cur) = cfg.gate_dims(i);
            let off = cfg.gate_layer_offset(i);
            let q = Tensor::matrix(cur, prev, flat[off..off + prev * cur].to_vec())?;
            gates.push(tensor::row_softmax(&q));
            logits.push(q);
        }
        Ok(GatingSet { logits, gates })
    }

    /// The unit-weight gating produced by all-zero logits.
    pub fn uniform(cfg: &ModularNetConfig) -> Self {
        GatingSet::from_flat_logits(cfg, &vec![0.0; cfg.gate_vec_len()])
            .expect("zero vector matches layout")
    }

    /// Wraps explicit per-layer gate matrices (destination-major) without
    /// normalizing them, e.g. to drive the network with exact one-hot
    /// selections. Logits are recorded as zeros.
    pub fn from_gate_matrices(gates: Vec<Tensor>) -> Self {
        let logits = gates.iter().map(|g| Tensor::zeros(g.rows(), g.cols())).collect();
        GatingSet { logits, gates }
    }

    pub fn num_layers(&self) -> usize {
        self.gates.len()
    }

    /// Normalized gate matrix of a layer, `(destinations x incoming)`.
    pub fn gates(&self, layer: usize) -> &Tensor {
        &self.gates[layer]
    }

    /// Raw logit matrix of a layer, `(destinations x incoming)`.
    pub fn logits(&self, layer: usize) -> &Tensor {
        &self.logits[layer]
    }

    /// Incoming gate weights of destination module `j` in `layer`.
    pub fn incoming(&self, layer: usize, module: usize) -> &[f64] {
        self.gates[layer].row(module)
    }

    /// Gate weight on the edge from source module `src` to destination `dst`.
    pub fn edge(&self, layer: usize, src: usize, dst: usize) -> f64 {
        self.gates[layer].get(dst, src)
    }

    /// All gate values concatenated in the flat layout.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.gates {
            out.extend_from_slice(g.data());
        }
        out
    }

    /// Checks positivity and that each destination's incoming weights sum to
    /// one within `tol`.
    pub fn validate_simplex(&self, tol: f64) -> Result<()> {
        for (layer, g) in self.gates.iter().enumerate() {
            for j in 0..g.rows() {
                let row = g.row(j);
                if row.iter().any(|v| *v <= 0.0) {
                    return Err(Error::Contract(format!(
                        "non-positive gate in layer {layer}, module {j}"
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > tol {
                    return Err(Error::Contract(format!(
                        "gates into layer {layer}, module {j} sum to {sum}"
                    )));
                }
            }
        }
        Ok(())
    }
}
