//! Flat `key = value` configuration files and the flag/file/default
//! precedence rules.

use std::collections::HashMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use tmn_core::error::{Error, Result};

/// Keys accepted in configuration files; mirrors the command-line flags.
pub const KNOWN_KEYS: &[&str] = &[
    "data",
    "out",
    "seed",
    "model",
    "layers",
    "modules",
    "module-dim",
    "gating-hidden",
    "embedding-dim",
    "lr-feat",
    "lr-gate",
    "batch",
    "negatives",
    "concept-drop",
    "epochs",
    "topk",
    "ckpt",
    "split",
    "pair",
    "objects",
    "attributes",
    "latent-dim",
    "features",
    "samples-per-pair",
    "noise",
    "unseen-fraction",
    "embeddings",
    "freeze-embeddings",
    "export",
    "tolerance",
    "global-threshold",
];

/// Values parsed from a `key = value` file. Keys use hyphens; underscores in
/// the file are accepted and normalized.
#[derive(Debug, Default)]
pub struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut values = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Format {
                path: path.display().to_string(),
                line: line_no,
                msg: format!("expected 'key = value', got '{trimmed}'"),
            })?;
            let key = key.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Format {
                    path: path.display().to_string(),
                    line: line_no,
                    msg: format!("unknown key '{key}'"),
                });
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Format {
                    path: path.display().to_string(),
                    line: line_no,
                    msg: format!("duplicate key '{key}'"),
                });
            }
        }
        Ok(FileConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }
}

/// Command-line flag beats file value beats default.
pub fn resolve<T: FromStr + Display>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
    default: T,
) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match file.get(key) {
        Some(raw) => raw
            .parse::<T>()
            .map_err(|_| Error::Config(format!("bad value '{raw}' for '{key}'"))),
        None => Ok(default),
    }
}

/// Like [`resolve`] but the value stays optional.
pub fn resolve_opt<T: FromStr>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
) -> Result<Option<T>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match file.get(key) {
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|_| Error::Config(format!("bad value '{raw}' for '{key}'"))),
        None => Ok(None),
    }
}
