//! Plain (untraced) scoring. Training uses the recorded twin in
//! [`super::traced`]; both run the same kernels in the same order, so their
//! outputs are bit-identical.

use crate::error::{Error, Result};
use crate::model::gating::GatingSet;
use crate::model::params::{KindParams, Linear, ModelParams, Mlp};
use crate::model::ConceptPair;
use crate::numeric::tensor::{self, Tensor};

pub(crate) fn run_mlp(mlp: &Mlp, x: &Tensor) -> Result<Tensor> {
    let h = tensor::relu(&tensor::affine(&mlp.w1, x, &mlp.b1)?);
    tensor::affine(&mlp.w2, &h, &mlp.b2)
}

/// Runs the modular layers: each layer mixes the previous outputs with the
/// layer's gates, then applies every module's affine map and a ReLU. Returns
/// the single final-layer module output.
pub(crate) fn run_modular(
    modules: &[Vec<Linear>],
    gates: &GatingSet,
    x: &Tensor,
) -> Result<Tensor> {
    let mut prev = x.reshaped(1, x.len())?;
    for (i, layer) in modules.iter().enumerate() {
        let mixed = tensor::matmul(gates.gates(i), &prev)?;
        let mut data = Vec::with_capacity(layer.len() * layer[0].bias.len());
        let mut out_dim = 0;
        for (j, m) in layer.iter().enumerate() {
            let row = Tensor::vector(mixed.row(j).to_vec());
            let o = tensor::affine(&m.weight, &row, &m.bias)?;
            out_dim = o.len();
            data.extend_from_slice(o.data());
        }
        prev = tensor::relu(&Tensor::matrix(layer.len(), out_dim, data)?);
    }
    Ok(Tensor::vector(prev.row(0).to_vec()))
}

impl ModelParams {
    pub(crate) fn check_pair(&self, pair: ConceptPair) -> Result<()> {
        if pair.object >= self.num_objects() {
            return Err(Error::Vocab(format!(
                "object id {} outside vocabulary of {}",
                pair.object,
                self.num_objects()
            )));
        }
        if pair.attribute >= self.num_attributes() {
            return Err(Error::Vocab(format!(
                "attribute id {} outside vocabulary of {}",
                pair.attribute,
                self.num_attributes()
            )));
        }
        Ok(())
    }

    fn embed_pair(&self, pair: ConceptPair) -> Result<Tensor> {
        let eo = Tensor::vector(self.obj_embed.row(pair.object).to_vec());
        let ea = Tensor::vector(self.attr_embed.row(pair.attribute).to_vec());
        tensor::concat(&[&eo, &ea])
    }

    /// The gating produced for a concept pair. For the shared-gate ablations
    /// this is the same set for every pair; the joint-embedding baseline has
    /// no gating network.
    pub fn gating(&self, pair: ConceptPair) -> Result<GatingSet> {
        self.check_pair(pair)?;
        match &self.kind {
            KindParams::Tmn { gate_mlp, .. } => {
                let q = run_mlp(gate_mlp, &self.embed_pair(pair)?)?;
                GatingSet::from_flat_logits(&self.config, q.data())
            }
            KindParams::TaskAgnostic { shared_logits, .. }
            | KindParams::NoJoint { shared_logits, .. } => {
                GatingSet::from_flat_logits(&self.config, shared_logits.data())
            }
            KindParams::LabelEmbed { .. } => Err(Error::Contract(
                "the joint-embedding baseline has no gating network".to_string(),
            )),
        }
    }

    /// Runs the modular feature extractor under the given gates. `x` must
    /// already have the first layer's input width (for the input-concat
    /// ablation that includes the pair embedding).
    pub fn modular_forward(&self, x: &Tensor, gates: &GatingSet) -> Result<Tensor> {
        let modules = self.modules().ok_or_else(|| {
            Error::Contract("the joint-embedding baseline has no modular layers".to_string())
        })?;
        let expect = modules[0][0].weight.cols();
        if x.len() != expect {
            return Err(Error::dim(
                "modular_forward",
                format!("input has {} values, first layer expects {expect}", x.len()),
            ));
        }
        run_modular(modules, gates, x)
    }

    /// The representation scored by the head: the final module output for the
    /// modular kinds and the image MLP embedding for the baseline. Together
    /// with the pair it determines the compatibility score.
    pub fn task_feature(&self, x: &Tensor, pair: ConceptPair) -> Result<Tensor> {
        self.check_pair(pair)?;
        match &self.kind {
            KindParams::Tmn { modules, .. } => run_modular(modules, &self.gating(pair)?, x),
            KindParams::TaskAgnostic { modules, .. } => {
                let xin = tensor::concat(&[&x.clone(), &self.embed_pair(pair)?])?;
                run_modular(modules, &self.gating(pair)?, &xin)
            }
            KindParams::NoJoint { modules, .. } => run_modular(modules, &self.gating(pair)?, x),
            KindParams::LabelEmbed { image_mlp, .. } => run_mlp(image_mlp, x),
        }
    }

    /// Joint compatibility of (image feature, object, attribute).
    pub fn score(&self, x: &Tensor, pair: ConceptPair) -> Result<f64> {
        self.check_pair(pair)?;
        match &self.kind {
            KindParams::Tmn { modules, proj, .. } => {
                let feat = run_modular(modules, &self.gating(pair)?, x)?;
                Ok(tensor::affine(&proj.weight, &feat, &proj.bias)?.data()[0])
            }
            KindParams::TaskAgnostic { modules, proj, .. } => {
                let xin = tensor::concat(&[&x.clone(), &self.embed_pair(pair)?])?;
                let feat = run_modular(modules, &self.gating(pair)?, &xin)?;
                Ok(tensor::affine(&proj.weight, &feat, &proj.bias)?.data()[0])
            }
            KindParams::NoJoint {
                modules,
                pair_proj,
                ..
            } => {
                let feat = run_modular(modules, &self.gating(pair)?, x)?;
                let pv = tensor::affine(&pair_proj.weight, &self.embed_pair(pair)?, &pair_proj.bias)?;
                tensor::dot(&feat, &pv)
            }
            KindParams::LabelEmbed {
                pair_mlp,
                image_mlp,
            } => {
                let iv = run_mlp(image_mlp, x)?;
                let pv = run_mlp(pair_mlp, &self.embed_pair(pair)?)?;
                tensor::dot(&iv, &pv)
            }
        }
    }

    /// Scores every (sample, candidate) combination into an `N x P` tensor.
    /// Pair-side work (gatings, pair vectors) is computed once per candidate
    /// and image-side features once per sample where the model allows it;
    /// every entry equals an independent [`Self::score`] call bit for bit.
    pub fn score_grid(&self, xs: &[&Tensor], pairs: &[ConceptPair]) -> Result<Tensor> {
        if pairs.is_empty() {
            return Err(Error::Contract(
                "score grid requires at least one candidate pair".to_string(),
            ));
        }
        let mut out = vec![0.0; xs.len() * pairs.len()];
        match &self.kind {
            KindParams::Tmn { modules, proj, .. } => {
                for (pi, pair) in pairs.iter().enumerate() {
                    let gates = self.gating(*pair)?;
                    for (ni, x) in xs.iter().enumerate() {
                        let feat = run_modular(modules, &gates, x)?;
                        out[ni * pairs.len() + pi] =
                            tensor::affine(&proj.weight, &feat, &proj.bias)?.data()[0];
                    }
                }
            }
            KindParams::TaskAgnostic { modules, proj, .. } => {
                let gates = self.gating(pairs[0])?;
                for (pi, pair) in pairs.iter().enumerate() {
                    self.check_pair(*pair)?;
                    let emb = self.embed_pair(*pair)?;
                    for (ni, x) in xs.iter().enumerate() {
                        let xin = tensor::concat(&[x, &emb])?;
                        let feat = run_modular(modules, &gates, &xin)?;
                        out[ni * pairs.len() + pi] =
                            tensor::affine(&proj.weight, &feat, &proj.bias)?.data()[0];
                    }
                }
            }
            KindParams::NoJoint {
                modules,
                pair_proj,
                ..
            } => {
                let gates = self.gating(pairs[0])?;
                let feats: Vec<Tensor> = xs
                    .iter()
                    .map(|x| run_modular(modules, &gates, x))
                    .collect::<Result<_>>()?;
                for (pi, pair) in pairs.iter().enumerate() {
                    self.check_pair(*pair)?;
                    let pv =
                        tensor::affine(&pair_proj.weight, &self.embed_pair(*pair)?, &pair_proj.bias)?;
                    for (ni, feat) in feats.iter().enumerate() {
                        out[ni * pairs.len() + pi] = tensor::dot(feat, &pv)?;
                    }
                }
            }
            KindParams::LabelEmbed {
                pair_mlp,
                image_mlp,
            } => {
                let feats: Vec<Tensor> = xs
                    .iter()
                    .map(|x| run_mlp(image_mlp, x))
                    .collect::<Result<_>>()?;
                for (pi, pair) in pairs.iter().enumerate() {
                    self.check_pair(*pair)?;
                    let pv = run_mlp(pair_mlp, &self.embed_pair(*pair)?)?;
                    for (ni, feat) in feats.iter().enumerate() {
                        out[ni * pairs.len() + pi] = tensor::dot(feat, &pv)?;
                    }
                }
            }
        }
        Tensor::matrix(xs.len(), pairs.len(), out)
    }

    /// Rewrites one modular layer as the equivalent dense affine map whose
    /// `(j, k)` block is `g_{k->j} * W_j`, with the module biases stacked.
    /// Applying ReLU after this map to the concatenated previous-layer
    /// outputs reproduces the concatenated layer outputs.
    pub fn dense_equivalent(
        &self,
        gates: &GatingSet,
        layer: usize,
    ) -> Result<(Tensor, Tensor)> {
        let modules = self.modules().ok_or_else(|| {
            Error::Contract("the joint-embedding baseline has no modular layers".to_string())
        })?;
        if layer >= modules.len() {
            return Err(Error::Contract(format!(
                "layer {layer} out of {}",
                modules.len()
            )));
        }
        let layer_mods = &modules[layer];
        let d_in = layer_mods[0].weight.cols();
        let d = layer_mods[0].weight.rows();
        let (prev, cur) = (gates.gates(layer).cols(), gates.gates(layer).rows());
        let mut dense = Tensor::zeros(cur * d, prev * d_in);
        let mut bias = Vec::with_capacity(cur * d);
        for (j, m) in layer_mods.iter().enumerate() {
            bias.extend_from_slice(m.bias.data());
            for k in 0..prev {
                let g = gates.edge(layer, k, j);
                for r in 0..d {
                    for c in 0..d_in {
                        dense.set(j * d + r, k * d_in + c, g * m.weight.get(r, c));
                    }
                }
            }
        }
        Ok((dense, Tensor::vector(bias)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::ModularNetConfig;
    use crate::model::params::ModelKind;

    fn tiny(kind: ModelKind) -> ModelParams {
        let cfg = ModularNetConfig::uniform(2, 3, 4, 5, 6, 4);
        ModelParams::init(
            kind,
            cfg,
            (0..3).map(|i| format!("o{i}")).collect(),
            (0..2).map(|i| format!("a{i}")).collect(),
            42,
            None,
        )
        .unwrap()
    }

    fn rand_x(len: usize, seed: u64) -> Tensor {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Tensor::vector((0..len).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn zero_gating_mlp_gives_uniform_gates() {
        let mut p = tiny(ModelKind::Tmn);
        for name in ["gate_w1", "gate_b1", "gate_w2", "gate_b2"] {
            let t = p.block_mut(name).unwrap();
            *t = Tensor::zeros(t.rows(), t.cols());
        }
        // Layer 1 is the final single module fed by 3 inner modules.
        let g = p.gating(ConceptPair::new(1, 1)).unwrap();
        assert_eq!(g.incoming(1, 0).len(), 3);
        for v in g.incoming(1, 0) {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gates_are_a_simplex_for_any_pair() {
        let p = tiny(ModelKind::Tmn);
        for o in 0..3 {
            for a in 0..2 {
                p.gating(ConceptPair::new(o, a))
                    .unwrap()
                    .validate_simplex(1e-9)
                    .unwrap();
            }
        }
    }

    #[test]
    fn out_of_range_pair_is_a_vocab_error() {
        let p = tiny(ModelKind::Tmn);
        assert!(matches!(
            p.gating(ConceptPair::new(3, 0)),
            Err(Error::Vocab(_))
        ));
        assert!(matches!(
            p.score(&rand_x(5, 0), ConceptPair::new(0, 9)),
            Err(Error::Vocab(_))
        ));
    }

    #[test]
    fn zero_projection_scores_zero() {
        let mut p = tiny(ModelKind::Tmn);
        *p.block_mut("proj_w").unwrap() = Tensor::zeros(1, 4);
        *p.block_mut("proj_b").unwrap() = Tensor::zeros(1, 1);
        let x = rand_x(5, 1);
        assert_eq!(p.score(&x, ConceptPair::new(2, 1)).unwrap(), 0.0);
    }

    #[test]
    fn shared_gates_are_identical_across_pairs() {
        for kind in [ModelKind::TaskAgnostic, ModelKind::NoJoint] {
            let p = tiny(kind);
            let g1 = p.gating(ConceptPair::new(0, 0)).unwrap();
            let g2 = p.gating(ConceptPair::new(2, 1)).unwrap();
            assert_eq!(g1, g2);
        }
    }

    #[test]
    fn no_joint_features_ignore_the_pair() {
        let p = tiny(ModelKind::NoJoint);
        let x = rand_x(5, 2);
        let f1 = p.task_feature(&x, ConceptPair::new(0, 0)).unwrap();
        let f2 = p.task_feature(&x, ConceptPair::new(2, 1)).unwrap();
        assert_eq!(f1, f2);
    }

    #[test]
    fn tmn_features_depend_on_the_pair() {
        let p = tiny(ModelKind::Tmn);
        let x = rand_x(5, 3);
        let feats: Vec<Tensor> = (0..3)
            .flat_map(|o| (0..2).map(move |a| (o, a)))
            .map(|(o, a)| p.task_feature(&x, ConceptPair::new(o, a)).unwrap())
            .collect();
        assert!(
            feats.iter().any(|f| f != &feats[0]),
            "features identical for every pair"
        );
    }

    #[test]
    fn no_joint_orthogonal_feature_scores_zero() {
        let mut p = tiny(ModelKind::NoJoint);
        // Zero pair projection makes the pair vector zero, orthogonal to
        // everything.
        *p.block_mut("pair_proj_w").unwrap() = Tensor::zeros(4, 8);
        *p.block_mut("pair_proj_b").unwrap() = Tensor::zeros(4, 1);
        assert_eq!(p.score(&rand_x(5, 4), ConceptPair::new(1, 1)).unwrap(), 0.0);
    }

    #[test]
    fn labelembed_zero_side_scores_zero_and_scales_linearly() {
        let mut p = tiny(ModelKind::LabelEmbed);
        let x = rand_x(5, 5);
        let pair = ConceptPair::new(1, 0);
        let s = p.score(&x, pair).unwrap();
        // Scaling the last image layer by alpha scales the score by alpha.
        let alpha = 2.5;
        for name in ["image_w2", "image_b2"] {
            let t = p.block_mut(name).unwrap();
            let scaled = tensor::scale(alpha, t);
            *t = scaled;
        }
        let s2 = p.score(&x, pair).unwrap();
        assert!((s2 - alpha * s).abs() < 1e-12);
        // Zeroing one side kills the score.
        *p.block_mut("pair_w2").unwrap() = Tensor::zeros(4, 6);
        *p.block_mut("pair_b2").unwrap() = Tensor::zeros(4, 1);
        assert_eq!(p.score(&x, pair).unwrap(), 0.0);
    }

    #[test]
    fn score_grid_matches_independent_scores() {
        for kind in ModelKind::ALL {
            let p = tiny(kind);
            let xs: Vec<Tensor> = (0..4).map(|i| rand_x(5, 10 + i)).collect();
            let xrefs: Vec<&Tensor> = xs.iter().collect();
            let pairs: Vec<ConceptPair> = vec![
                ConceptPair::new(0, 0),
                ConceptPair::new(1, 1),
                ConceptPair::new(2, 0),
            ];
            let grid = p.score_grid(&xrefs, &pairs).unwrap();
            for (ni, x) in xs.iter().enumerate() {
                for (pi, pair) in pairs.iter().enumerate() {
                    let s = p.score(x, *pair).unwrap();
                    assert_eq!(
                        grid.get(ni, pi).to_bits(),
                        s.to_bits(),
                        "{kind:?} grid[{ni},{pi}]"
                    );
                }
            }
        }
    }

    #[test]
    fn empty_candidates_rejected() {
        let p = tiny(ModelKind::Tmn);
        let x = rand_x(5, 0);
        assert!(p.score_grid(&[&x], &[]).is_err());
    }
}
