//! Architecture configuration and the flat gating-vector layout.

use crate::error::{Error, Result};

/// Shape of the modular feature extractor and its gating network.
///
/// A network with `layers = L` has module counts `[1, m_1, ..., m_{L-1}, 1]`:
/// the input acts as a single pseudo-module, inner layers carry the
/// configurable module counts, and the final layer is a single module whose
/// output feeds the scoring head. Every module produces a `module_dim`
/// vector; first-layer modules consume the `feature_dim` input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModularNetConfig {
    pub layers: usize,
    /// Modules per inner layer (length `layers - 1`).
    pub inner_modules: Vec<usize>,
    pub module_dim: usize,
    pub feature_dim: usize,
    pub gating_hidden: usize,
    pub embedding_dim: usize,
}

impl ModularNetConfig {
    /// Same module count for every inner layer.
    pub fn uniform(
        layers: usize,
        modules: usize,
        module_dim: usize,
        feature_dim: usize,
        gating_hidden: usize,
        embedding_dim: usize,
    ) -> Self {
        ModularNetConfig {
            layers,
            inner_modules: vec![modules; layers.saturating_sub(1)],
            module_dim,
            feature_dim,
            gating_hidden,
            embedding_dim,
        }
    }

    /// The 3-layer / 24-module / 16-dim profile with a 64-unit gating hidden
    /// layer, used for the larger benchmark.
    pub fn mit_states_profile(feature_dim: usize, embedding_dim: usize) -> Self {
        ModularNetConfig::uniform(3, 24, 16, feature_dim, 64, embedding_dim)
    }

    /// The 2-layer variant of the same profile, used for the fine-grained
    /// benchmark.
    pub fn ut_zappos_profile(feature_dim: usize, embedding_dim: usize) -> Self {
        ModularNetConfig::uniform(2, 24, 16, feature_dim, 64, embedding_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Config("layers must be >= 1".to_string()));
        }
        if self.inner_modules.len() != self.layers - 1 {
            return Err(Error::Config(format!(
                "expected {} inner module counts, got {}",
                self.layers - 1,
                self.inner_modules.len()
            )));
        }
        for (dim, what) in [
            (self.module_dim, "module_dim"),
            (self.feature_dim, "feature_dim"),
            (self.gating_hidden, "gating_hidden"),
            (self.embedding_dim, "embedding_dim"),
        ] {
            if dim == 0 {
                return Err(Error::Config(format!("{what} must be >= 1")));
            }
        }
        if self.inner_modules.iter().any(|m| *m == 0) {
            return Err(Error::Config("module counts must be >= 1".to_string()));
        }
        Ok(())
    }

    /// Module counts per layer including the input pseudo-module and the
    /// single output module: length `layers + 1`, indices 0..=layers.
    pub fn module_counts(&self) -> Vec<usize> {
        let mut counts = Vec::with_capacity(self.layers + 1);
        counts.push(1);
        counts.extend_from_slice(&self.inner_modules);
        counts.push(1);
        counts
    }

    /// Gating-matrix shape for 0-based layer `i`: (incoming modules,
    /// destination modules).
    pub fn gate_dims(&self, layer: usize) -> (usize, usize) {
        let counts = self.module_counts();
        (counts[layer], counts[layer + 1])
    }

    /// Length of the flat gating vector: sum over layers of
    /// `incoming * destinations`.
    pub fn gate_vec_len(&self) -> usize {
        (0..self.layers)
            .map(|i| {
                let (prev, cur) = self.gate_dims(i);
                prev * cur
            })
            .sum()
    }

    /// Offset of a layer's block inside the flat gating vector. The flat
    /// layout is layer-major and destination-module-major: entry
    /// `offset + j * incoming + k` is the logit on the edge from source
    /// module `k` to destination module `j`.
    pub fn gate_layer_offset(&self, layer: usize) -> usize {
        (0..layer)
            .map(|i| {
                let (prev, cur) = self.gate_dims(i);
                prev * cur
            })
            .sum()
    }

    /// Input width of modules in 0-based layer `i`.
    pub fn module_input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.feature_dim
        } else {
            self.module_dim
        }
    }
}
