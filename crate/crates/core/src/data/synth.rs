//! Synthetic contextual-composition datasets for desk-scale experiments.
//!
//! Each object and attribute gets a latent vector; a pair's clean feature is
//! `tanh(P [u_o; v_a; u_o * v_a])` under a fixed random projection, with
//! Gaussian noise added per sample. The elementwise product term makes the
//! attribute's effect depend on the object, so scoring models must capture
//! the interaction rather than matching object and attribute independently.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, PairFlag, Sample, SplitSpec, Vocab};
use crate::error::{Error, Result};
use crate::model::ConceptPair;
use crate::numeric::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub objects: usize,
    pub attributes: usize,
    pub latent_dim: usize,
    pub feature_dim: usize,
    pub samples_per_pair: usize,
    pub noise: f64,
    /// Fraction of all pairs held out as unseen, split evenly between the
    /// val and test splits.
    pub unseen_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            objects: 20,
            attributes: 15,
            latent_dim: 12,
            feature_dim: 64,
            samples_per_pair: 20,
            noise: 0.1,
            unseen_fraction: 0.2,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        for (v, what) in [
            (self.objects, "objects"),
            (self.attributes, "attributes"),
            (self.latent_dim, "latent_dim"),
            (self.feature_dim, "feature_dim"),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{what} must be >= 1")));
            }
        }
        if self.samples_per_pair < 3 {
            return Err(Error::Config(
                "samples_per_pair must be >= 3 so seen pairs reach train, val, and test"
                    .to_string(),
            ));
        }
        if !(0.0 < self.unseen_fraction && self.unseen_fraction < 1.0) {
            return Err(Error::Config(format!(
                "unseen_fraction {} outside (0, 1)",
                self.unseen_fraction
            )));
        }
        if self.noise < 0.0 || !self.noise.is_finite() {
            return Err(Error::Config(format!("invalid noise {}", self.noise)));
        }
        Ok(())
    }
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    Ok(generate_synthetic_with_latents(cfg)?.0)
}

/// Like [`generate_synthetic`], additionally returning the latent vector of
/// every object and attribute keyed by vocabulary name. The latents play the
/// role pretrained word vectors play for real data: a structured embedding
/// table the models may be initialized from.
pub fn generate_synthetic_with_latents(
    cfg: &SynthConfig,
) -> Result<(Dataset, std::collections::HashMap<String, Vec<f64>>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let p = cfg.latent_dim;
    let n_pairs = cfg.objects * cfg.attributes;
    let n_unseen = (cfg.unseen_fraction * n_pairs as f64).round() as usize;
    if n_unseen < 2 {
        return Err(Error::Config(
            "unseen_fraction yields fewer than 2 unseen pairs (val and test each need one)"
                .to_string(),
        ));
    }

    let draw = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| normal.sample(rng)).collect()
    };
    let object_latents: Vec<Vec<f64>> = (0..cfg.objects).map(|_| draw(p, &mut rng)).collect();
    let attribute_latents: Vec<Vec<f64>> = (0..cfg.attributes).map(|_| draw(p, &mut rng)).collect();
    let proj_scale = 1.0 / ((3 * p) as f64).sqrt();
    let projection: Vec<f64> = (0..cfg.feature_dim * 3 * p)
        .map(|_| normal.sample(&mut rng) * proj_scale)
        .collect();

    // All pairs in object-major order.
    let pairs: Vec<ConceptPair> = (0..cfg.objects)
        .flat_map(|o| (0..cfg.attributes).map(move |a| ConceptPair::new(o, a)))
        .collect();

    // Choose unseen pairs so that every object and attribute keeps at least
    // one seen pair.
    let mut unseen: Vec<usize> = Vec::new();
    let mut found = false;
    for _ in 0..1000 {
        let mut idx: Vec<usize> = (0..n_pairs).collect();
        idx.shuffle(&mut rng);
        let candidate: Vec<usize> = idx[..n_unseen].to_vec();
        let mut obj_seen = vec![false; cfg.objects];
        let mut attr_seen = vec![false; cfg.attributes];
        let held: std::collections::HashSet<usize> = candidate.iter().copied().collect();
        for (i, pair) in pairs.iter().enumerate() {
            if !held.contains(&i) {
                obj_seen[pair.object] = true;
                attr_seen[pair.attribute] = true;
            }
        }
        if obj_seen.iter().all(|c| *c) && attr_seen.iter().all(|c| *c) {
            unseen = candidate;
            found = true;
            break;
        }
    }
    if !found {
        return Err(Error::Config(
            "could not hold out the requested unseen fraction while keeping every \
             object and attribute covered by a train pair"
                .to_string(),
        ));
    }
    unseen.sort_unstable();
    let val_unseen: Vec<usize> = unseen.iter().copied().step_by(2).collect();
    let test_unseen: Vec<usize> = unseen.iter().copied().skip(1).step_by(2).collect();
    let unseen_set: std::collections::HashSet<usize> = unseen.iter().copied().collect();
    let seen: Vec<usize> = (0..n_pairs).filter(|i| !unseen_set.contains(i)).collect();

    let train_pairs: Vec<ConceptPair> = seen.iter().map(|i| pairs[*i]).collect();
    let eval_pairs = |held: &[usize]| -> Vec<PairFlag> {
        let mut out: Vec<PairFlag> = seen
            .iter()
            .map(|i| PairFlag {
                pair: pairs[*i],
                unseen: false,
            })
            .collect();
        out.extend(held.iter().map(|i| PairFlag {
            pair: pairs[*i],
            unseen: true,
        }));
        out
    };
    let splits = SplitSpec {
        train_pairs,
        val_pairs: eval_pairs(&val_unseen),
        test_pairs: eval_pairs(&test_unseen),
    };

    // Per-sample features. Seen pairs send their last samples to val and
    // test; unseen pairs send everything to their evaluation split.
    let eval_n = (0.1 * cfg.samples_per_pair as f64).round().max(1.0) as usize;
    let val_unseen_set: std::collections::HashSet<usize> = val_unseen.iter().copied().collect();
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    let mut counter = 0usize;
    for (i, pair) in pairs.iter().enumerate() {
        let u = &object_latents[pair.object];
        let v = &attribute_latents[pair.attribute];
        let mut latent = Vec::with_capacity(3 * p);
        latent.extend_from_slice(u);
        latent.extend_from_slice(v);
        latent.extend(u.iter().zip(v).map(|(a, b)| a * b));
        let mut clean = vec![0.0; cfg.feature_dim];
        for (r, c) in clean.iter_mut().enumerate() {
            let row = &projection[r * 3 * p..(r + 1) * 3 * p];
            *c = row
                .iter()
                .zip(&latent)
                .map(|(w, z)| w * z)
                .sum::<f64>()
                .tanh();
        }
        for s in 0..cfg.samples_per_pair {
            let features: Vec<f64> = clean
                .iter()
                .map(|c| c + cfg.noise * normal.sample(&mut rng))
                .collect();
            let sample = Sample {
                id: format!("s{counter:06}"),
                features: Tensor::vector(features),
                label: *pair,
            };
            counter += 1;
            if unseen_set.contains(&i) {
                if val_unseen_set.contains(&i) {
                    val.push(sample);
                } else {
                    test.push(sample);
                }
            } else if s < cfg.samples_per_pair - 2 * eval_n {
                train.push(sample);
            } else if s < cfg.samples_per_pair - eval_n {
                val.push(sample);
            } else {
                test.push(sample);
            }
        }
    }

    let vocab = Vocab::new(
        (0..cfg.objects).map(|i| format!("obj{i}")).collect(),
        (0..cfg.attributes).map(|i| format!("attr{i}")).collect(),
    )?;
    splits.validate(&vocab)?;
    let mut latents = std::collections::HashMap::new();
    for (i, u) in object_latents.iter().enumerate() {
        latents.insert(format!("obj{i}"), u.clone());
    }
    for (i, v) in attribute_latents.iter().enumerate() {
        latents.insert(format!("attr{i}"), v.clone());
    }
    Ok((
        Dataset {
            vocab,
            splits,
            feature_dim: cfg.feature_dim,
            train,
            val,
            test,
        },
        latents,
    ))
}
