//! Learnable state for every model kind, block iteration for the optimizer
//! and checkpointing, and seeded initialization.

use std::collections::HashMap;


use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::model::config::ModularNetConfig;
use crate::numeric::tensor::Tensor;

/// Which scoring model the parameters belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Gating network conditioned on the concept pair rewires the modules.
    Tmn,
    /// Shared learned gates; pair embedding concatenated to the input.
    TaskAgnostic,
    /// Shared learned gates; pair embedding dotted with the output feature.
    NoJoint,
    /// Two separate MLPs embed pair and image into a joint space.
    LabelEmbed,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Tmn => "tmn",
            ModelKind::TaskAgnostic => "ablation_a",
            ModelKind::NoJoint => "ablation_b",
            ModelKind::LabelEmbed => "labelembed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tmn" => Ok(ModelKind::Tmn),
            "ablation_a" => Ok(ModelKind::TaskAgnostic),
            "ablation_b" => Ok(ModelKind::NoJoint),
            "labelembed" => Ok(ModelKind::LabelEmbed),
            other => Err(Error::Config(format!(
                "unknown model kind '{other}' (expected tmn, ablation_a, ablation_b, labelembed)"
            ))),
        }
    }

    pub const ALL: [ModelKind; 4] = [
        ModelKind::Tmn,
        ModelKind::TaskAgnostic,
        ModelKind::NoJoint,
        ModelKind::LabelEmbed,
    ];
}

/// An affine map `weight * x + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// A two-layer MLP with a ReLU hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

/// Kind-specific parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub enum KindParams {
    Tmn {
        gate_mlp: Mlp,
        modules: Vec<Vec<Linear>>,
        proj: Linear,
    },
    TaskAgnostic {
        shared_logits: Tensor,
        modules: Vec<Vec<Linear>>,
        proj: Linear,
    },
    NoJoint {
        shared_logits: Tensor,
        modules: Vec<Vec<Linear>>,
        pair_proj: Linear,
    },
    LabelEmbed {
        pair_mlp: Mlp,
        image_mlp: Mlp,
    },
}

/// Which optimizer group a parameter block belongs to. The concept side
/// (embeddings, gating, pair projections) trains with the gating-network
/// step size; the image side with the feature-extractor step size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Gating,
    Feature,
}

/// The full learnable state plus the vocabulary it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub(crate) config: ModularNetConfig,
    pub(crate) object_names: Vec<String>,
    pub(crate) attribute_names: Vec<String>,
    pub(crate) obj_embed: Tensor,
    pub(crate) attr_embed: Tensor,
    pub(crate) kind: KindParams,
}

/// Glorot-style uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let a = glorot_bound(cols, rows);
    let dist = Uniform::new(-a, a).expect("valid uniform bounds");
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Tensor::matrix(rows, cols, data).expect("shape matches data")
}

fn linear(rng: &mut ChaCha8Rng, out_dim: usize, in_dim: usize) -> Linear {
    Linear {
        weight: glorot(rng, out_dim, in_dim),
        bias: Tensor::zeros(out_dim, 1),
    }
}

fn mlp(rng: &mut ChaCha8Rng, in_dim: usize, hidden: usize, out_dim: usize) -> Mlp {
    Mlp {
        w1: glorot(rng, hidden, in_dim),
        b1: Tensor::zeros(hidden, 1),
        w2: glorot(rng, out_dim, hidden),
        b2: Tensor::zeros(out_dim, 1),
    }
}

impl ModelParams {
    /// Seeded initialization. Weights are Glorot-uniform, biases and shared
    /// gate logits zero. Embedding rows come from `pretrained` where the name
    /// is present (keyed by vocabulary name) and from `Normal(0, 0.6^2)`
    /// otherwise.
    pub fn init(
        kind: ModelKind,
        config: ModularNetConfig,
        object_names: Vec<String>,
        attribute_names: Vec<String>,
        seed: u64,
        pretrained: Option<&HashMap<String, Vec<f64>>>,
    ) -> Result<Self> {
        config.validate()?;
        if object_names.is_empty() || attribute_names.is_empty() {
            return Err(Error::Config(
                "vocabulary must contain at least one object and one attribute".to_string(),
            ));
        }
        for name in object_names.iter().chain(&attribute_names) {
            if name.is_empty() || name.contains('\n') || name.contains('\t') {
                return Err(Error::Vocab(format!("invalid vocabulary name '{name}'")));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.6).expect("valid normal");
        let e = config.embedding_dim;

        let mut embed_rows = |names: &[String]| -> Result<Tensor> {
            let mut data = Vec::with_capacity(names.len() * e);
            for name in names {
                match pretrained.and_then(|t| t.get(name)) {
                    Some(row) => {
                        if row.len() != e {
                            return Err(Error::Format {
                                path: "<embeddings>".to_string(),
                                line: 0,
                                msg: format!(
                                    "vector for '{name}' has {} dims, model expects {e}",
                                    row.len()
                                ),
                            });
                        }
                        data.extend_from_slice(row);
                    }
                    None => data.extend((0..e).map(|_| normal.sample(&mut rng))),
                }
            }
            Tensor::matrix(names.len(), e, data)
        };

        let obj_embed = embed_rows(&object_names)?;
        let attr_embed = embed_rows(&attribute_names)?;

        let modules_for = |rng: &mut ChaCha8Rng, cfg: &ModularNetConfig, extra_input: usize| {
            let counts = cfg.module_counts();
            (0..cfg.layers)
                .map(|i| {
                    let d_in = cfg.module_input_dim(i) + if i == 0 { extra_input } else { 0 };
                    (0..counts[i + 1])
                        .map(|_| linear(rng, cfg.module_dim, d_in))
                        .collect()
                })
                .collect::<Vec<Vec<Linear>>>()
        };

        let kind_params = match kind {
            ModelKind::Tmn => KindParams::Tmn {
                gate_mlp: mlp(&mut rng, 2 * e, config.gating_hidden, config.gate_vec_len()),
                modules: modules_for(&mut rng, &config, 0),
                proj: linear(&mut rng, 1, config.module_dim),
            },
            ModelKind::TaskAgnostic => KindParams::TaskAgnostic {
                shared_logits: Tensor::zeros(config.gate_vec_len(), 1),
                modules: modules_for(&mut rng, &config, 2 * e),
                proj: linear(&mut rng, 1, config.module_dim),
            },
            ModelKind::NoJoint => KindParams::NoJoint {
                shared_logits: Tensor::zeros(config.gate_vec_len(), 1),
                modules: modules_for(&mut rng, &config, 0),
                pair_proj: linear(&mut rng, config.module_dim, 2 * e),
            },
            ModelKind::LabelEmbed => KindParams::LabelEmbed {
                pair_mlp: mlp(&mut rng, 2 * e, config.gating_hidden, config.module_dim),
                image_mlp: mlp(
                    &mut rng,
                    config.feature_dim,
                    config.gating_hidden,
                    config.module_dim,
                ),
            },
        };

        Ok(ModelParams {
            config,
            object_names,
            attribute_names,
            obj_embed,
            attr_embed,
            kind: kind_params,
        })
    }

    pub fn kind(&self) -> ModelKind {
        match &self.kind {
            KindParams::Tmn { .. } => ModelKind::Tmn,
            KindParams::TaskAgnostic { .. } => ModelKind::TaskAgnostic,
            KindParams::NoJoint { .. } => ModelKind::NoJoint,
            KindParams::LabelEmbed { .. } => ModelKind::LabelEmbed,
        }
    }

    pub fn config(&self) -> &ModularNetConfig {
        &self.config
    }

    pub fn object_names(&self) -> &[String] {
        &self.object_names
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn num_objects(&self) -> usize {
        self.object_names.len()
    }

    pub fn num_attributes(&self) -> usize {
        self.attribute_names.len()
    }

    pub(crate) fn modules(&self) -> Option<&Vec<Vec<Linear>>> {
        match &self.kind {
            KindParams::Tmn { modules, .. }
            | KindParams::TaskAgnostic { modules, .. }
            | KindParams::NoJoint { modules, .. } => Some(modules),
            KindParams::LabelEmbed { .. } => None,
        }
    }

    /// Every parameter block in checkpoint order.
    pub fn blocks(&self) -> Vec<(String, ParamGroup, &Tensor)> {
        use ParamGroup::{Feature, Gating};
        let mut out: Vec<(String, ParamGroup, &Tensor)> = vec![
            ("obj_embed".to_string(), Gating, &self.obj_embed),
            ("attr_embed".to_string(), Gating, &self.attr_embed),
        ];
        fn push_modules<'a>(
            out: &mut Vec<(String, ParamGroup, &'a Tensor)>,
            modules: &'a [Vec<Linear>],
        ) {
            for (i, layer) in modules.iter().enumerate() {
                for (j, m) in layer.iter().enumerate() {
                    out.push((format!("module_{i}_{j}_w"), ParamGroup::Feature, &m.weight));
                    out.push((format!("module_{i}_{j}_b"), ParamGroup::Feature, &m.bias));
                }
            }
        }
        match &self.kind {
            KindParams::Tmn {
                gate_mlp,
                modules,
                proj,
            } => {
                out.push(("gate_w1".to_string(), Gating, &gate_mlp.w1));
                out.push(("gate_b1".to_string(), Gating, &gate_mlp.b1));
                out.push(("gate_w2".to_string(), Gating, &gate_mlp.w2));
                out.push(("gate_b2".to_string(), Gating, &gate_mlp.b2));
                push_modules(&mut out, modules);
                out.push(("proj_w".to_string(), Feature, &proj.weight));
                out.push(("proj_b".to_string(), Feature, &proj.bias));
            }
            KindParams::TaskAgnostic {
                shared_logits,
                modules,
                proj,
            } => {
                out.push(("shared_gates".to_string(), Gating, shared_logits));
                push_modules(&mut out, modules);
                out.push(("proj_w".to_string(), Feature, &proj.weight));
                out.push(("proj_b".to_string(), Feature, &proj.bias));
            }
            KindParams::NoJoint {
                shared_logits,
                modules,
                pair_proj,
            } => {
                out.push(("shared_gates".to_string(), Gating, shared_logits));
                push_modules(&mut out, modules);
                out.push(("pair_proj_w".to_string(), Gating, &pair_proj.weight));
                out.push(("pair_proj_b".to_string(), Gating, &pair_proj.bias));
            }
            KindParams::LabelEmbed {
                pair_mlp,
                image_mlp,
            } => {
                out.push(("pair_w1".to_string(), Gating, &pair_mlp.w1));
                out.push(("pair_b1".to_string(), Gating, &pair_mlp.b1));
                out.push(("pair_w2".to_string(), Gating, &pair_mlp.w2));
                out.push(("pair_b2".to_string(), Gating, &pair_mlp.b2));
                out.push(("image_w1".to_string(), Feature, &image_mlp.w1));
                out.push(("image_b1".to_string(), Feature, &image_mlp.b1));
                out.push(("image_w2".to_string(), Feature, &image_mlp.w2));
                out.push(("image_b2".to_string(), Feature, &image_mlp.b2));
            }
        }
        out
    }

    /// Mutable view of every block, in the same order as [`Self::blocks`].
    pub fn blocks_mut(&mut self) -> Vec<(String, ParamGroup, &mut Tensor)> {
        use ParamGroup::{Feature, Gating};
        let mut out: Vec<(String, ParamGroup, &mut Tensor)> = vec![
            ("obj_embed".to_string(), Gating, &mut self.obj_embed),
            ("attr_embed".to_string(), Gating, &mut self.attr_embed),
        ];
        fn push_modules<'a>(
            out: &mut Vec<(String, ParamGroup, &'a mut Tensor)>,
            modules: &'a mut Vec<Vec<Linear>>,
        ) {
            for (i, layer) in modules.iter_mut().enumerate() {
                for (j, m) in layer.iter_mut().enumerate() {
                    out.push((format!("module_{i}_{j}_w"), ParamGroup::Feature, &mut m.weight));
                    out.push((format!("module_{i}_{j}_b"), ParamGroup::Feature, &mut m.bias));
                }
            }
        }
        match &mut self.kind {
            KindParams::Tmn {
                gate_mlp,
                modules,
                proj,
            } => {
                out.push(("gate_w1".to_string(), Gating, &mut gate_mlp.w1));
                out.push(("gate_b1".to_string(), Gating, &mut gate_mlp.b1));
                out.push(("gate_w2".to_string(), Gating, &mut gate_mlp.w2));
                out.push(("gate_b2".to_string(), Gating, &mut gate_mlp.b2));
                push_modules(&mut out, modules);
                out.push(("proj_w".to_string(), Feature, &mut proj.weight));
                out.push(("proj_b".to_string(), Feature, &mut proj.bias));
            }
            KindParams::TaskAgnostic {
                shared_logits,
                modules,
                proj,
            } => {
                out.push(("shared_gates".to_string(), Gating, shared_logits));
                push_modules(&mut out, modules);
                out.push(("proj_w".to_string(), Feature, &mut proj.weight));
                out.push(("proj_b".to_string(), Feature, &mut proj.bias));
            }
            KindParams::NoJoint {
                shared_logits,
                modules,
                pair_proj,
            } => {
                out.push(("shared_gates".to_string(), Gating, shared_logits));
                push_modules(&mut out, modules);
                out.push(("pair_proj_w".to_string(), Gating, &mut pair_proj.weight));
                out.push(("pair_proj_b".to_string(), Gating, &mut pair_proj.bias));
            }
            KindParams::LabelEmbed {
                pair_mlp,
                image_mlp,
            } => {
                out.push(("pair_w1".to_string(), Gating, &mut pair_mlp.w1));
                out.push(("pair_b1".to_string(), Gating, &mut pair_mlp.b1));
                out.push(("pair_w2".to_string(), Gating, &mut pair_mlp.w2));
                out.push(("pair_b2".to_string(), Gating, &mut pair_mlp.b2));
                out.push(("image_w1".to_string(), Feature, &mut image_mlp.w1));
                out.push(("image_b1".to_string(), Feature, &mut image_mlp.b1));
                out.push(("image_w2".to_string(), Feature, &mut image_mlp.w2));
                out.push(("image_b2".to_string(), Feature, &mut image_mlp.b2));
            }
        }
        out
    }

    /// Looks up a block by name for targeted edits in tests and tools.
    pub fn block_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.blocks_mut()
            .into_iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, _, t)| t)
    }

    pub fn total_parameters(&self) -> usize {
        self.blocks().iter().map(|(_, _, t)| t.len()).sum()
    }
}
