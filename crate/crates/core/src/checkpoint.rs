//! Checkpoint serialization.
//!
//! Layout: the magic line `TMN1`, a UTF-8 header describing the model kind,
//! architecture, vocabulary, and parameter blocks, the line `data`, then the
//! raw parameter values as 64-bit little-endian floats in declared block
//! order. Round-trips are bit-exact, and re-serializing a loaded checkpoint
//! reproduces the file byte for byte.
//!
//! ```text
//! TMN1
//! kind tmn
//! layers 3
//! inner_modules 24 24
//! module_dim 16
//! feature_dim 64
//! gating_hidden 64
//! embedding_dim 16
//! object <name>        (one line per object, in id order)
//! attribute <name>     (one line per attribute, in id order)
//! block <name> <rows> <cols>
//! data
//! <rows*cols f64 little-endian values per block>
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelParams, ModularNetConfig};
use crate::numeric::tensor::Tensor;

pub const MAGIC: &str = "TMN1";

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_checkpoint(params, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let file = File::open(path)?;
    read_checkpoint(&mut BufReader::new(file), path)
}

pub fn write_checkpoint(params: &ModelParams, w: &mut impl Write) -> Result<()> {
    let cfg = params.config();
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "kind {}", params.kind().as_str())?;
    writeln!(w, "layers {}", cfg.layers)?;
    let inner: Vec<String> = cfg.inner_modules.iter().map(|m| m.to_string()).collect();
    writeln!(w, "inner_modules {}", inner.join(" "))?;
    writeln!(w, "module_dim {}", cfg.module_dim)?;
    writeln!(w, "feature_dim {}", cfg.feature_dim)?;
    writeln!(w, "gating_hidden {}", cfg.gating_hidden)?;
    writeln!(w, "embedding_dim {}", cfg.embedding_dim)?;
    for name in params.object_names() {
        writeln!(w, "object {name}")?;
    }
    for name in params.attribute_names() {
        writeln!(w, "attribute {name}")?;
    }
    let blocks = params.blocks();
    for (name, _, t) in &blocks {
        writeln!(w, "block {name} {} {}", t.rows(), t.cols())?;
    }
    writeln!(w, "data")?;
    for (_, _, t) in &blocks {
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

struct HeaderLines<'a, R: Read> {
    r: &'a mut R,
    path: &'a Path,
    line_no: usize,
}

impl<R: Read> HeaderLines<'_, R> {
    /// Reads one `\n`-terminated header line (byte-wise, so the binary
    /// payload that follows `data` is never touched).
    fn next_line(&mut self) -> Result<String> {
        let mut bytes = Vec::new();
        let mut buf = [0u8; 1];
        loop {
            let n = self.r.read(&mut buf)?;
            if n == 0 {
                return Err(Error::format(
                    self.path,
                    self.line_no,
                    "unexpected end of header",
                ));
            }
            if buf[0] == b'\n' {
                break;
            }
            bytes.push(buf[0]);
        }
        self.line_no += 1;
        String::from_utf8(bytes)
            .map_err(|_| Error::format(self.path, self.line_no, "header is not UTF-8"))
    }
}

pub fn read_checkpoint(r: &mut impl Read, path: &Path) -> Result<ModelParams> {
    let mut lines = HeaderLines {
        r,
        path,
        line_no: 0,
    };
    if lines.next_line()? != MAGIC {
        return Err(Error::format(path, 1, "missing TMN1 magic"));
    }

    let mut kind = None;
    let mut layers = None;
    let mut inner_modules = None;
    let mut module_dim = None;
    let mut feature_dim = None;
    let mut gating_hidden = None;
    let mut embedding_dim = None;
    let mut objects = Vec::new();
    let mut attributes = Vec::new();
    let mut declared: Vec<(String, usize, usize)> = Vec::new();

    loop {
        let line = lines.next_line()?;
        let line_no = lines.line_no;
        if line == "data" {
            break;
        }
        let (key, rest) = line
            .split_once(' ')
            .ok_or_else(|| Error::format(path, line_no, format!("malformed line '{line}'")))?;
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::format(path, line_no, format!("bad integer '{s}'")))
        };
        match key {
            "kind" => kind = Some(ModelKind::parse(rest)?),
            "layers" => layers = Some(parse_usize(rest)?),
            "inner_modules" => {
                inner_modules = Some(
                    rest.split_whitespace()
                        .map(parse_usize)
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            "module_dim" => module_dim = Some(parse_usize(rest)?),
            "feature_dim" => feature_dim = Some(parse_usize(rest)?),
            "gating_hidden" => gating_hidden = Some(parse_usize(rest)?),
            "embedding_dim" => embedding_dim = Some(parse_usize(rest)?),
            "object" => objects.push(rest.to_string()),
            "attribute" => attributes.push(rest.to_string()),
            "block" => {
                let mut parts = rest.split(' ');
                let name = parts
                    .next()
                    .ok_or_else(|| Error::format(path, line_no, "block missing name"))?
                    .to_string();
                let rows = parse_usize(
                    parts
                        .next()
                        .ok_or_else(|| Error::format(path, line_no, "block missing rows"))?,
                )?;
                let cols = parse_usize(
                    parts
                        .next()
                        .ok_or_else(|| Error::format(path, line_no, "block missing cols"))?,
                )?;
                declared.push((name, rows, cols));
            }
            other => {
                return Err(Error::format(
                    path,
                    line_no,
                    format!("unknown header key '{other}'"),
                ))
            }
        }
    }

    let missing = |what: &str| Error::format(path, lines.line_no, format!("missing {what}"));
    let kind = kind.ok_or_else(|| missing("kind"))?;
    let config = ModularNetConfig {
        layers: layers.ok_or_else(|| missing("layers"))?,
        inner_modules: inner_modules.ok_or_else(|| missing("inner_modules"))?,
        module_dim: module_dim.ok_or_else(|| missing("module_dim"))?,
        feature_dim: feature_dim.ok_or_else(|| missing("feature_dim"))?,
        gating_hidden: gating_hidden.ok_or_else(|| missing("gating_hidden"))?,
        embedding_dim: embedding_dim.ok_or_else(|| missing("embedding_dim"))?,
    };
    config
        .validate()
        .map_err(|e| Error::format(path, lines.line_no, e.to_string()))?;
    if objects.is_empty() || attributes.is_empty() {
        return Err(missing("vocabulary"));
    }

    // Build a zero-seeded skeleton to know the expected block schema, then
    // fill it from the payload.
    let mut params = ModelParams::init(kind, config, objects, attributes, 0, None)
        .map_err(|e| Error::format(path, lines.line_no, e.to_string()))?;
    {
        let expected = params.blocks();
        if expected.len() != declared.len() {
            return Err(Error::format(
                path,
                lines.line_no,
                format!(
                    "{} blocks declared, model kind expects {}",
                    declared.len(),
                    expected.len()
                ),
            ));
        }
        for ((name, rows, cols), (want_name, _, t)) in declared.iter().zip(&expected) {
            if name != want_name || *rows != t.rows() || *cols != t.cols() {
                return Err(Error::format(
                    path,
                    lines.line_no,
                    format!(
                        "block '{name}' ({rows}x{cols}) does not match expected \
                         '{want_name}' ({}x{})",
                        t.rows(),
                        t.cols()
                    ),
                ));
            }
        }
    }

    let r = lines.r;
    for (_, _, t) in params.blocks_mut() {
        let mut bytes = vec![0u8; t.len() * 8];
        r.read_exact(&mut bytes).map_err(|_| {
            Error::format(path, 0, "payload shorter than declared blocks".to_string())
        })?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        *t = Tensor::matrix(t.rows(), t.cols(), values)
            .expect("declared shape matches value count");
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::format(
            path,
            0,
            "trailing bytes after declared blocks".to_string(),
        ));
    }
    Ok(params)
}
