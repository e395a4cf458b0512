//! A compositional zero-shot learning toolkit built around task-driven
//! modular networks: a gating network conditioned on (object, attribute)
//! pairs rewires a modular feature extractor to score the compatibility of
//! (image feature, object, attribute) triplets. The crate covers the scoring
//! models and their ablations, negative-sampled cross-entropy training with
//! ConceptDrop, the generalized seen/unseen evaluation protocol with
//! calibration sweep and area summaries, dataset and checkpoint formats, and
//! interpretability exports.

pub mod analysis;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod numeric;
pub mod training;

pub use error::{Error, Result};
