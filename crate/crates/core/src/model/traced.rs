//! Tape-recorded scoring used by training and gradient checks. Mirrors
//! [`super::forward`] kernel for kernel so values agree bit for bit.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::config::ModularNetConfig;
use crate::model::params::{KindParams, Linear, ModelKind, ModelParams, Mlp};
use crate::model::ConceptPair;
use crate::numeric::tape::{Gradients, NodeId, Tape};
use crate::numeric::tensor::Tensor;

struct TracedMlp {
    w1: NodeId,
    b1: NodeId,
    w2: NodeId,
    b2: NodeId,
}

enum TracedKind {
    Tmn {
        gate_mlp: TracedMlp,
        modules: Vec<Vec<(NodeId, NodeId)>>,
        proj: (NodeId, NodeId),
    },
    TaskAgnostic {
        shared_logits: NodeId,
        modules: Vec<Vec<(NodeId, NodeId)>>,
        proj: (NodeId, NodeId),
    },
    NoJoint {
        shared_logits: NodeId,
        modules: Vec<Vec<(NodeId, NodeId)>>,
        pair_proj: (NodeId, NodeId),
    },
    LabelEmbed {
        pair_mlp: TracedMlp,
        image_mlp: TracedMlp,
    },
}

/// Model parameters registered as tape leaves, with per-pair and per-sample
/// caching so repeated candidates share subgraphs.
pub struct TracedModel {
    config: ModularNetConfig,
    num_objects: usize,
    num_attributes: usize,
    obj_embed: NodeId,
    attr_embed: NodeId,
    kind: TracedKind,
    block_ids: Vec<NodeId>,
    block_shapes: Vec<(usize, usize)>,
    gate_cache: HashMap<ConceptPair, Vec<NodeId>>,
    pair_vec_cache: HashMap<ConceptPair, NodeId>,
    feature_cache: HashMap<NodeId, NodeId>,
}

impl TracedModel {
    /// Registers every parameter block on the tape, in block order.
    pub fn register(tape: &mut Tape, params: &ModelParams) -> Result<Self> {
        let blocks = params.blocks();
        let mut block_ids = Vec::with_capacity(blocks.len());
        let mut block_shapes = Vec::with_capacity(blocks.len());
        for (_, _, tensor) in &blocks {
            block_ids.push(tape.param(tensor)?);
            block_shapes.push(tensor.shape());
        }

        // Blocks are ordered: obj_embed, attr_embed, then kind blocks.
        let mut it = block_ids.iter().copied();
        let obj_embed = it.next().expect("obj_embed present");
        let attr_embed = it.next().expect("attr_embed present");

        let take_modules = |it: &mut dyn Iterator<Item = NodeId>,
                                modules: &Vec<Vec<Linear>>|
         -> Vec<Vec<(NodeId, NodeId)>> {
            modules
                .iter()
                .map(|layer| {
                    layer
                        .iter()
                        .map(|_| {
                            let w = it.next().expect("module weight");
                            let b = it.next().expect("module bias");
                            (w, b)
                        })
                        .collect()
                })
                .collect()
        };
        let take_mlp = |it: &mut dyn Iterator<Item = NodeId>, _m: &Mlp| -> TracedMlp {
            TracedMlp {
                w1: it.next().expect("w1"),
                b1: it.next().expect("b1"),
                w2: it.next().expect("w2"),
                b2: it.next().expect("b2"),
            }
        };

        let kind = match &params.kind {
            KindParams::Tmn {
                gate_mlp, modules, ..
            } => {
                let gm = take_mlp(&mut it, gate_mlp);
                let ms = take_modules(&mut it, modules);
                let proj = (it.next().expect("proj_w"), it.next().expect("proj_b"));
                TracedKind::Tmn {
                    gate_mlp: gm,
                    modules: ms,
                    proj,
                }
            }
            KindParams::TaskAgnostic { modules, .. } => {
                let shared = it.next().expect("shared_gates");
                let ms = take_modules(&mut it, modules);
                let proj = (it.next().expect("proj_w"), it.next().expect("proj_b"));
                TracedKind::TaskAgnostic {
                    shared_logits: shared,
                    modules: ms,
                    proj,
                }
            }
            KindParams::NoJoint { modules, .. } => {
                let shared = it.next().expect("shared_gates");
                let ms = take_modules(&mut it, modules);
                let pair_proj = (
                    it.next().expect("pair_proj_w"),
                    it.next().expect("pair_proj_b"),
                );
                TracedKind::NoJoint {
                    shared_logits: shared,
                    modules: ms,
                    pair_proj,
                }
            }
            KindParams::LabelEmbed {
                pair_mlp,
                image_mlp,
            } => TracedKind::LabelEmbed {
                pair_mlp: take_mlp(&mut it, pair_mlp),
                image_mlp: take_mlp(&mut it, image_mlp),
            },
        };
        debug_assert!(it.next().is_none(), "all blocks consumed");

        Ok(TracedModel {
            config: params.config.clone(),
            num_objects: params.num_objects(),
            num_attributes: params.num_attributes(),
            obj_embed,
            attr_embed,
            kind,
            block_ids,
            block_shapes,
            gate_cache: HashMap::new(),
            pair_vec_cache: HashMap::new(),
            feature_cache: HashMap::new(),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match &self.kind {
            TracedKind::Tmn { .. } => ModelKind::Tmn,
            TracedKind::TaskAgnostic { .. } => ModelKind::TaskAgnostic,
            TracedKind::NoJoint { .. } => ModelKind::NoJoint,
            TracedKind::LabelEmbed { .. } => ModelKind::LabelEmbed,
        }
    }

    fn check_pair(&self, pair: ConceptPair) -> Result<()> {
        if pair.object >= self.num_objects || pair.attribute >= self.num_attributes {
            return Err(Error::Vocab(format!(
                "pair ({}, {}) outside vocabulary ({} objects, {} attributes)",
                pair.object, pair.attribute, self.num_objects, self.num_attributes
            )));
        }
        Ok(())
    }

    fn embed_pair(&self, tape: &mut Tape, pair: ConceptPair) -> Result<NodeId> {
        let eo = tape.lookup(self.obj_embed, pair.object)?;
        let ea = tape.lookup(self.attr_embed, pair.attribute)?;
        tape.concat(&[eo, ea])
    }

    fn mlp(tape: &mut Tape, m: &TracedMlp, x: NodeId) -> Result<NodeId> {
        let h0 = tape.affine(m.w1, x, m.b1)?;
        let h = tape.relu(h0)?;
        tape.affine(m.w2, h, m.b2)
    }

    /// Per-layer gate matrix nodes from a flat logit vector node.
    fn gates_from_logits(&self, tape: &mut Tape, flat: NodeId) -> Result<Vec<NodeId>> {
        let mut out = Vec::with_capacity(self.config.layers);
        for i in 0..self.config.layers {
            let (prev, cur) = self.config.gate_dims(i);
            let off = self.config.gate_layer_offset(i);
            let qs = tape.slice(flat, off, prev * cur)?;
            let qm = tape.reshape(qs, cur, prev)?;
            out.push(tape.row_softmax(qm)?);
        }
        Ok(out)
    }

    /// Gate matrices for a pair, cached per pair within this tape.
    pub fn gates(&mut self, tape: &mut Tape, pair: ConceptPair) -> Result<Vec<NodeId>> {
        self.check_pair(pair)?;
        let key = match &self.kind {
            // Shared gates: one cache entry serves every pair.
            TracedKind::TaskAgnostic { .. } | TracedKind::NoJoint { .. } => ConceptPair::new(0, 0),
            _ => pair,
        };
        if let Some(ids) = self.gate_cache.get(&key) {
            return Ok(ids.clone());
        }
        let ids = match &self.kind {
            TracedKind::Tmn { gate_mlp, .. } => {
                let gate_mlp = TracedMlp {
                    w1: gate_mlp.w1,
                    b1: gate_mlp.b1,
                    w2: gate_mlp.w2,
                    b2: gate_mlp.b2,
                };
                let e = self.embed_pair(tape, pair)?;
                let q = Self::mlp(tape, &gate_mlp, e)?;
                self.gates_from_logits(tape, q)?
            }
            TracedKind::TaskAgnostic { shared_logits, .. }
            | TracedKind::NoJoint { shared_logits, .. } => {
                let flat = *shared_logits;
                self.gates_from_logits(tape, flat)?
            }
            TracedKind::LabelEmbed { .. } => {
                return Err(Error::Contract(
                    "the joint-embedding baseline has no gating network".to_string(),
                ))
            }
        };
        self.gate_cache.insert(key, ids.clone());
        Ok(ids)
    }

    fn modular(
        tape: &mut Tape,
        modules: &[Vec<(NodeId, NodeId)>],
        gates: &[NodeId],
        x: NodeId,
    ) -> Result<NodeId> {
        let d_in = tape.value(x).len();
        let mut o = tape.reshape(x, 1, d_in)?;
        for (layer, gate) in modules.iter().zip(gates) {
            let mixed = tape.matmul(*gate, o)?;
            let ws: Vec<NodeId> = layer.iter().map(|(w, _)| *w).collect();
            let bs: Vec<NodeId> = layer.iter().map(|(_, b)| *b).collect();
            let aff = tape.module_affine(&ws, &bs, mixed)?;
            o = tape.relu(aff)?;
        }
        let d = tape.value(o).cols();
        tape.reshape(o, d, 1)
    }

    /// Compatibility score of `(x, pair)` as a scalar node.
    pub fn score(&mut self, tape: &mut Tape, x: NodeId, pair: ConceptPair) -> Result<NodeId> {
        self.check_pair(pair)?;
        match &self.kind {
            TracedKind::Tmn { modules, proj, .. } => {
                let (modules, proj) = (modules.clone(), *proj);
                let gates = self.gates(tape, pair)?;
                let feat = Self::modular(tape, &modules, &gates, x)?;
                tape.affine(proj.0, feat, proj.1)
            }
            TracedKind::TaskAgnostic { modules, proj, .. } => {
                let (modules, proj) = (modules.clone(), *proj);
                let gates = self.gates(tape, pair)?;
                let emb = self.embed_pair(tape, pair)?;
                let xin = tape.concat(&[x, emb])?;
                let feat = Self::modular(tape, &modules, &gates, xin)?;
                tape.affine(proj.0, feat, proj.1)
            }
            TracedKind::NoJoint {
                modules,
                pair_proj,
                ..
            } => {
                let (modules, pair_proj) = (modules.clone(), *pair_proj);
                let feat = if let Some(f) = self.feature_cache.get(&x).copied() {
                    f
                } else {
                    let gates = self.gates(tape, pair)?;
                    let f = Self::modular(tape, &modules, &gates, x)?;
                    self.feature_cache.insert(x, f);
                    f
                };
                let pv = if let Some(p) = self.pair_vec_cache.get(&pair).copied() {
                    p
                } else {
                    let emb = self.embed_pair(tape, pair)?;
                    let p = tape.affine(pair_proj.0, emb, pair_proj.1)?;
                    self.pair_vec_cache.insert(pair, p);
                    p
                };
                tape.dot(feat, pv)
            }
            TracedKind::LabelEmbed {
                pair_mlp,
                image_mlp,
            } => {
                let pair_mlp = TracedMlp {
                    w1: pair_mlp.w1,
                    b1: pair_mlp.b1,
                    w2: pair_mlp.w2,
                    b2: pair_mlp.b2,
                };
                let image_mlp = TracedMlp {
                    w1: image_mlp.w1,
                    b1: image_mlp.b1,
                    w2: image_mlp.w2,
                    b2: image_mlp.b2,
                };
                let feat = if let Some(f) = self.feature_cache.get(&x).copied() {
                    f
                } else {
                    let f = Self::mlp(tape, &image_mlp, x)?;
                    self.feature_cache.insert(x, f);
                    f
                };
                let pv = if let Some(p) = self.pair_vec_cache.get(&pair).copied() {
                    p
                } else {
                    let emb = self.embed_pair(tape, pair)?;
                    let p = Self::mlp(tape, &pair_mlp, emb)?;
                    self.pair_vec_cache.insert(pair, p);
                    p
                };
                tape.dot(feat, pv)
            }
        }
    }

    /// Gradients for every parameter block, in block order.
    pub fn block_gradients(&self, grads: &Gradients) -> Vec<Tensor> {
        self.block_ids
            .iter()
            .zip(&self.block_shapes)
            .map(|(id, (r, c))| {
                Tensor::matrix(*r, *c, grads.get(*id).to_vec()).expect("adjoint shape")
            })
            .collect()
    }
}
