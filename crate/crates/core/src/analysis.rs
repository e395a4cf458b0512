//! Interpretability and qualitative outputs: edge and module attribution
//! tables, thresholded routing topologies, representation exports for
//! external embedding tools, and pair-conditioned retrieval.

use std::fmt::Write as _;

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::model::{ConceptPair, GatingSet, ModelParams};

/// One ranked (pair, strength) list.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionEntry {
    pub pair: ConceptPair,
    pub strength: f64,
}

/// Pairs that respond most strongly on one edge of the modular network.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeAttribution {
    pub layer: usize,
    pub src: usize,
    pub dst: usize,
    pub ranked: Vec<AttributionEntry>,
}

/// Pairs that lean most heavily on one module, by total outgoing gate weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleAttribution {
    pub layer: usize,
    pub module: usize,
    pub ranked: Vec<AttributionEntry>,
}

fn gatings_for(params: &ModelParams, pairs: &[ConceptPair]) -> Result<Vec<GatingSet>> {
    pairs.iter().map(|p| params.gating(*p)).collect()
}

fn rank(mut entries: Vec<AttributionEntry>, n: usize) -> Result<Vec<AttributionEntry>> {
    if n == 0 || n > entries.len() {
        return Err(Error::Contract(format!(
            "requested top {n} of {} pairs",
            entries.len()
        )));
    }
    // Descending strength, ties toward the earlier pair in the input order.
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&i, &j| {
        entries[j]
            .strength
            .partial_cmp(&entries[i].strength)
            .expect("finite strengths")
            .then(i.cmp(&j))
    });
    order.truncate(n);
    let picked: Vec<AttributionEntry> = order.into_iter().map(|i| entries[i].clone()).collect();
    entries.clear();
    Ok(picked)
}

/// For every edge, the `n` pairs with the largest gate weight on it.
pub fn top_pairs_per_edge(
    params: &ModelParams,
    pairs: &[ConceptPair],
    n: usize,
) -> Result<Vec<EdgeAttribution>> {
    let gatings = gatings_for(params, pairs)?;
    let cfg = params.config();
    let mut out = Vec::new();
    for layer in 0..cfg.layers {
        let (prev, cur) = cfg.gate_dims(layer);
        for dst in 0..cur {
            for src in 0..prev {
                let entries: Vec<AttributionEntry> = pairs
                    .iter()
                    .zip(&gatings)
                    .map(|(p, g)| AttributionEntry {
                        pair: *p,
                        strength: g.edge(layer, src, dst),
                    })
                    .collect();
                out.push(EdgeAttribution {
                    layer,
                    src,
                    dst,
                    ranked: rank(entries, n)?,
                });
            }
        }
    }
    Ok(out)
}

/// For every module with outgoing edges (the inner layers), the `n` pairs
/// with the largest sum of outgoing gate weights. The final module has no
/// outgoing edges and is excluded, as is the input.
pub fn top_pairs_per_module(
    params: &ModelParams,
    pairs: &[ConceptPair],
    n: usize,
) -> Result<Vec<ModuleAttribution>> {
    let gatings = gatings_for(params, pairs)?;
    let cfg = params.config();
    let counts = cfg.module_counts();
    let mut out = Vec::new();
    for layer in 1..cfg.layers {
        // Modules of layer `layer` feed gating layer index `layer` (whose
        // sources are this layer's modules).
        for module in 0..counts[layer] {
            let entries: Vec<AttributionEntry> = pairs
                .iter()
                .zip(&gatings)
                .map(|(p, g)| {
                    let outgoing = (0..counts[layer + 1])
                        .map(|dst| g.edge(layer, module, dst))
                        .sum();
                    AttributionEntry {
                        pair: *p,
                        strength: outgoing,
                    }
                })
                .collect();
            out.push(ModuleAttribution {
                layer,
                module,
                ranked: rank(entries, n)?,
            });
        }
    }
    Ok(out)
}

/// How the topology threshold interprets "within tolerance of the highest
/// weight": against each destination module's strongest incoming edge, or
/// against the single strongest edge of the whole gating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdRule {
    PerDestination,
    GlobalMax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyEdge {
    pub layer: usize,
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// The edges a pair's gating keeps under the threshold rule.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyGraph {
    pub pair: ConceptPair,
    pub tolerance: f64,
    pub rule: ThresholdRule,
    pub edges: Vec<TopologyEdge>,
}

impl TopologyGraph {
    /// Edges shared with another pair's graph (position-wise identity).
    pub fn shared_edges(&self, other: &TopologyGraph) -> Vec<(usize, usize, usize)> {
        self.edges
            .iter()
            .filter(|e| {
                other
                    .edges
                    .iter()
                    .any(|o| (o.layer, o.src, o.dst) == (e.layer, e.src, e.dst))
            })
            .map(|e| (e.layer, e.src, e.dst))
            .collect()
    }
}

/// Keeps each edge whose gate weight is within `tolerance` of the reference
/// maximum: `g >= (1 - tolerance) * reference`.
pub fn topology_graph(
    params: &ModelParams,
    pair: ConceptPair,
    tolerance: f64,
    rule: ThresholdRule,
) -> Result<TopologyGraph> {
    if !(0.0 < tolerance && tolerance < 1.0) {
        return Err(Error::Config(format!(
            "tolerance {tolerance} outside (0, 1)"
        )));
    }
    let gating = params.gating(pair)?;
    let cfg = params.config();
    let global_max = (0..cfg.layers)
        .map(|l| {
            gating.gates(l)
                .data()
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let mut edges = Vec::new();
    for layer in 0..cfg.layers {
        let (prev, cur) = cfg.gate_dims(layer);
        for dst in 0..cur {
            let dest_max = gating
                .incoming(layer, dst)
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            let reference = match rule {
                ThresholdRule::PerDestination => dest_max,
                ThresholdRule::GlobalMax => global_max,
            };
            for src in 0..prev {
                let weight = gating.edge(layer, src, dst);
                if weight >= (1.0 - tolerance) * reference {
                    edges.push(TopologyEdge {
                        layer,
                        src,
                        dst,
                        weight,
                    });
                }
            }
        }
    }
    Ok(TopologyGraph {
        pair,
        tolerance,
        rule,
        edges,
    })
}

/// Edge-list TSV for a topology graph: `layer<TAB>src<TAB>dst<TAB>weight`.
pub fn topology_tsv(graph: &TopologyGraph) -> String {
    let mut out = String::from("layer\tsrc\tdst\tweight\n");
    for e in &graph.edges {
        let _ = writeln!(out, "{}\t{}\t{}\t{:.16e}", e.layer, e.src, e.dst, e.weight);
    }
    out
}

/// Which representation to export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// One row per pair: the flattened gate vector.
    Gatings,
    /// One row per (sample, pair): the task-driven feature and a valid flag.
    Features,
    /// One row per (sample, pair): the compatibility score and a valid flag.
    Scores,
}

impl Representation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gatings" => Ok(Representation::Gatings),
            "features" => Ok(Representation::Features),
            "scores" => Ok(Representation::Scores),
            other => Err(Error::Config(format!(
                "unknown representation '{other}' (expected gatings, features, or scores)"
            ))),
        }
    }
}

/// Writes a TSV export of the requested representation. Pair columns carry
/// the model's vocabulary names; the `valid` flag marks rows whose pair is
/// the sample's true label. Values are printed with 17 significant digits so
/// re-parsing reproduces them exactly.
pub fn export_representations(
    params: &ModelParams,
    samples: &[Sample],
    pairs: &[ConceptPair],
    which: Representation,
) -> Result<String> {
    let name = |p: &ConceptPair| -> (&str, &str) {
        (
            &params.object_names()[p.object],
            &params.attribute_names()[p.attribute],
        )
    };
    let mut out = String::new();
    match which {
        Representation::Gatings => {
            let cfg = params.config();
            out.push_str("object\tattribute");
            for layer in 0..cfg.layers {
                let (prev, cur) = cfg.gate_dims(layer);
                for dst in 0..cur {
                    for src in 0..prev {
                        let _ = write!(out, "\tg{layer}_{src}_{dst}");
                    }
                }
            }
            out.push('\n');
            for pair in pairs {
                let flat = params.gating(*pair)?.flat();
                let (o, a) = name(pair);
                let _ = write!(out, "{o}\t{a}");
                for v in flat {
                    let _ = write!(out, "\t{v:.16e}");
                }
                out.push('\n');
            }
        }
        Representation::Features => {
            let d = params.config().module_dim;
            out.push_str("sample_id\tobject\tattribute\tvalid");
            for i in 0..d {
                let _ = write!(out, "\tf{i}");
            }
            out.push('\n');
            for s in samples {
                for pair in pairs {
                    let feat = params.task_feature(&s.features, *pair)?;
                    let (o, a) = name(pair);
                    let valid = if s.label == *pair { 1 } else { 0 };
                    let _ = write!(out, "{}\t{o}\t{a}\t{valid}", s.id);
                    for v in feat.data() {
                        let _ = write!(out, "\t{v:.16e}");
                    }
                    out.push('\n');
                }
            }
        }
        Representation::Scores => {
            out.push_str("sample_id\tobject\tattribute\tvalid\tscore\n");
            let xs: Vec<&crate::numeric::tensor::Tensor> =
                samples.iter().map(|s| &s.features).collect();
            let grid = params.score_grid(&xs, pairs)?;
            for (si, s) in samples.iter().enumerate() {
                for (pi, pair) in pairs.iter().enumerate() {
                    let (o, a) = name(pair);
                    let valid = if s.label == *pair { 1 } else { 0 };
                    let _ = writeln!(
                        out,
                        "{}\t{o}\t{a}\t{valid}\t{:.16e}",
                        s.id,
                        grid.get(si, pi)
                    );
                }
            }
        }
    }
    Ok(out)
}

/// Samples ranked by compatibility with a pair, best first, ties toward the
/// earlier sample.
pub fn retrieve(
    params: &ModelParams,
    pair: ConceptPair,
    samples: &[Sample],
    n: usize,
) -> Result<Vec<(String, f64)>> {
    if n > samples.len() {
        return Err(Error::Contract(format!(
            "requested {n} results from {} samples",
            samples.len()
        )));
    }
    let xs: Vec<&crate::numeric::tensor::Tensor> = samples.iter().map(|s| &s.features).collect();
    let grid = params.score_grid(&xs, &[pair])?;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&i, &j| {
        grid.get(j, 0)
            .partial_cmp(&grid.get(i, 0))
            .expect("finite scores")
            .then(i.cmp(&j))
    });
    order.truncate(n);
    Ok(order
        .into_iter()
        .map(|i| (samples[i].id.clone(), grid.get(i, 0)))
        .collect())
}
