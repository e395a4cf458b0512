//! Pretrained word-vector ingestion for embedding initialization.
//!
//! Format: one `token v1 v2 ... vK` line per vector, space-separated.
//! Tokens are matched to vocabulary names case-insensitively with
//! underscores treated as spaces, so `dry_river` matches the name
//! "Dry River".

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::data::Vocab;
use crate::error::{Error, Result};

/// Vectors found for vocabulary names, plus the names with no match.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingLoad {
    /// Keyed by the original vocabulary name.
    pub vectors: HashMap<String, Vec<f64>>,
    pub missing: Vec<String>,
    /// Dimension of the vectors in the file, if any were present.
    pub dim: Option<usize>,
}

fn normalize(name: &str) -> String {
    name.to_lowercase().replace('_', " ")
}

pub fn load_embeddings(path: &Path, vocab: &Vocab) -> Result<EmbeddingLoad> {
    let text = fs::read_to_string(path)?;

    // Normalized name -> original vocabulary names (an object and an
    // attribute may share a name).
    let mut wanted: HashMap<String, Vec<&str>> = HashMap::new();
    for name in vocab.objects().iter().chain(vocab.attributes()) {
        wanted.entry(normalize(name)).or_default().push(name);
    }

    let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
    let mut dim: Option<usize> = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields
            .next()
            .ok_or_else(|| Error::format(path, line_no, "missing token"))?;
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::format(path, line_no, format!("bad float '{f}'")))
            })
            .collect::<Result<_>>()?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::format(
                    path,
                    line_no,
                    format!("vector has {} values, earlier lines had {d}", values.len()),
                ))
            }
            _ => {}
        }
        if let Some(names) = wanted.get(normalize(token).as_str()) {
            for name in names {
                // First occurrence wins.
                vectors
                    .entry((*name).to_string())
                    .or_insert_with(|| values.clone());
            }
        }
    }

    let missing = vocab
        .objects()
        .iter()
        .chain(vocab.attributes())
        .filter(|n| !vectors.contains_key(*n))
        .cloned()
        .collect();
    Ok(EmbeddingLoad {
        vectors,
        missing,
        dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocab {
        Vocab::new(
            vec!["Dry River".to_string(), "city".to_string()],
            vec!["old".to_string(), "mossy".to_string()],
        )
        .unwrap()
    }

    #[test]
    fn full_coverage_and_normalized_match() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.txt");
        fs::write(
            &path,
            "dry_river 1 2 3\ncity 4 5 6\nold 7 8 9\nmossy 1 1 1\nextra 0 0 0\n",
        )
        .unwrap();
        let load = load_embeddings(&path, &vocab()).unwrap();
        assert!(load.missing.is_empty());
        assert_eq!(load.vectors["Dry River"], vec![1.0, 2.0, 3.0]);
        assert_eq!(load.dim, Some(3));
    }

    #[test]
    fn empty_file_reports_everything_missing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.txt");
        fs::write(&path, "").unwrap();
        let load = load_embeddings(&path, &vocab()).unwrap();
        assert!(load.vectors.is_empty());
        assert_eq!(load.missing.len(), 4);
        assert_eq!(load.dim, None);
    }

    #[test]
    fn ragged_vectors_are_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.txt");
        fs::write(&path, "old 1 2 3\nmossy 1 2\n").unwrap();
        let err = load_embeddings(&path, &vocab()).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }
}
