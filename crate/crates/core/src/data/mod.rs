//! Dataset model, split specification, and the TSV dataset formats.
//!
//! A dataset directory holds four files:
//!
//! * `splits.tsv` — rows `split<TAB>flag<TAB>object<TAB>attribute` where
//!   `split` is `train|val|test` and `flag` is `seen|unseen`.
//! * `train.tsv`, `val.tsv`, `test.tsv` — feature files with a `#D <dim>`
//!   header and rows `sample_id<TAB>object<TAB>attribute<TAB>v1..vD`.
//!
//! Vocabulary ids are assigned by first appearance in the split file. Floats
//! are written with 17 significant digits, so serialize/ingest round-trips
//! are exact.

pub mod embeddings;
pub mod synth;

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ConceptPair, ModelParams};
use crate::numeric::tensor::Tensor;

pub use embeddings::{load_embeddings, EmbeddingLoad};
pub use synth::{generate_synthetic, generate_synthetic_with_latents, SynthConfig};

pub const SPLITS_FILE: &str = "splits.tsv";

/// Ordered object and attribute names; ids are list positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    objects: Vec<String>,
    attributes: Vec<String>,
    object_ids: HashMap<String, usize>,
    attribute_ids: HashMap<String, usize>,
}

impl Vocab {
    pub fn new(objects: Vec<String>, attributes: Vec<String>) -> Result<Self> {
        let index = |names: &[String], what: &str| -> Result<HashMap<String, usize>> {
            let mut map = HashMap::new();
            for (i, n) in names.iter().enumerate() {
                if n.is_empty() || n.contains('\t') || n.contains('\n') {
                    return Err(Error::Vocab(format!("invalid {what} name '{n}'")));
                }
                if map.insert(n.clone(), i).is_some() {
                    return Err(Error::Vocab(format!("duplicate {what} name '{n}'")));
                }
            }
            Ok(map)
        };
        let object_ids = index(&objects, "object")?;
        let attribute_ids = index(&attributes, "attribute")?;
        Ok(Vocab {
            objects,
            attributes,
            object_ids,
            attribute_ids,
        })
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn object_id(&self, name: &str) -> Option<usize> {
        self.object_ids.get(name).copied()
    }

    pub fn attribute_id(&self, name: &str) -> Option<usize> {
        self.attribute_ids.get(name).copied()
    }

    pub fn pair_by_names(&self, object: &str, attribute: &str) -> Result<ConceptPair> {
        let o = self
            .object_id(object)
            .ok_or_else(|| Error::Vocab(format!("unknown object '{object}'")))?;
        let a = self
            .attribute_id(attribute)
            .ok_or_else(|| Error::Vocab(format!("unknown attribute '{attribute}'")))?;
        Ok(ConceptPair::new(o, a))
    }

    pub fn pair_names(&self, pair: ConceptPair) -> (&str, &str) {
        (&self.objects[pair.object], &self.attributes[pair.attribute])
    }

    /// Re-expresses a pair of this vocabulary in a model's id space, matching
    /// by name.
    pub fn align_pair(&self, params: &ModelParams, pair: ConceptPair) -> Result<ConceptPair> {
        let (oname, aname) = self.pair_names(pair);
        let o = params
            .object_names()
            .iter()
            .position(|n| n == oname)
            .ok_or_else(|| Error::Vocab(format!("object '{oname}' unknown to the checkpoint")))?;
        let a = params
            .attribute_names()
            .iter()
            .position(|n| n == aname)
            .ok_or_else(|| {
                Error::Vocab(format!("attribute '{aname}' unknown to the checkpoint"))
            })?;
        Ok(ConceptPair::new(o, a))
    }
}

/// One labelled feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub features: Tensor,
    pub label: ConceptPair,
}

/// A candidate pair of an evaluation split together with its novelty flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairFlag {
    pub pair: ConceptPair,
    pub unseen: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSplit {
    Val,
    Test,
}

impl EvalSplit {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalSplit::Val => "val",
            EvalSplit::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "val" => Ok(EvalSplit::Val),
            "test" => Ok(EvalSplit::Test),
            other => Err(Error::Config(format!(
                "unknown split '{other}' (expected val or test)"
            ))),
        }
    }
}

/// Pair counts of a split specification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounts {
    pub train: usize,
    pub val_seen: usize,
    pub val_unseen: usize,
    pub test_seen: usize,
    pub test_unseen: usize,
}

/// Published pair counts of the MIT-States benchmark split.
pub const MIT_STATES_COUNTS: SplitCounts = SplitCounts {
    train: 1262,
    val_seen: 300,
    val_unseen: 300,
    test_seen: 400,
    test_unseen: 400,
};

/// Published pair counts of the UT-Zappos benchmark split.
pub const UT_ZAPPOS_COUNTS: SplitCounts = SplitCounts {
    train: 83,
    val_seen: 15,
    val_unseen: 15,
    test_seen: 18,
    test_unseen: 18,
};

/// Which pairs are trainable and which eval pairs count as seen or unseen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_pairs: Vec<ConceptPair>,
    pub val_pairs: Vec<PairFlag>,
    pub test_pairs: Vec<PairFlag>,
}

impl SplitSpec {
    pub fn eval_pairs(&self, split: EvalSplit) -> &[PairFlag] {
        match split {
            EvalSplit::Val => &self.val_pairs,
            EvalSplit::Test => &self.test_pairs,
        }
    }

    /// Candidate set for generalized evaluation on a split: all train pairs
    /// plus the split's unseen pairs, each with its novelty flag.
    pub fn candidates(&self, split: EvalSplit) -> Vec<PairFlag> {
        let mut out: Vec<PairFlag> = self
            .train_pairs
            .iter()
            .map(|p| PairFlag {
                pair: *p,
                unseen: false,
            })
            .collect();
        out.extend(
            self.eval_pairs(split)
                .iter()
                .filter(|pf| pf.unseen)
                .copied(),
        );
        out
    }

    pub fn counts(&self) -> SplitCounts {
        let count = |pairs: &[PairFlag], unseen: bool| {
            pairs.iter().filter(|pf| pf.unseen == unseen).count()
        };
        SplitCounts {
            train: self.train_pairs.len(),
            val_seen: count(&self.val_pairs, false),
            val_unseen: count(&self.val_pairs, true),
            test_seen: count(&self.test_pairs, false),
            test_unseen: count(&self.test_pairs, true),
        }
    }

    /// Checks the structural invariants: seen eval pairs are train pairs,
    /// unseen eval pairs are disjoint from the train pairs, each eval split
    /// carries both kinds, and every object and attribute occurs in at least
    /// one train pair.
    pub fn validate(&self, vocab: &Vocab) -> Result<()> {
        if self.train_pairs.is_empty() {
            return Err(Error::Contract("no train pairs".to_string()));
        }
        let train: HashSet<ConceptPair> = self.train_pairs.iter().copied().collect();
        if train.len() != self.train_pairs.len() {
            return Err(Error::Contract("duplicate train pair".to_string()));
        }
        for (pairs, name) in [(&self.val_pairs, "val"), (&self.test_pairs, "test")] {
            let mut uniq = HashSet::new();
            for pf in pairs.iter() {
                if !uniq.insert(pf.pair) {
                    return Err(Error::Contract(format!("duplicate {name} pair")));
                }
                if pf.unseen && train.contains(&pf.pair) {
                    return Err(Error::Contract(format!(
                        "{name} pair flagged unseen also appears in train"
                    )));
                }
                if !pf.unseen && !train.contains(&pf.pair) {
                    return Err(Error::Contract(format!(
                        "{name} pair flagged seen missing from train"
                    )));
                }
            }
            if !pairs.iter().any(|pf| pf.unseen) {
                return Err(Error::Contract(format!("{name} split has no unseen pairs")));
            }
            if !pairs.iter().any(|pf| !pf.unseen) {
                return Err(Error::Contract(format!("{name} split has no seen pairs")));
            }
        }
        let mut objects = vec![false; vocab.objects().len()];
        let mut attributes = vec![false; vocab.attributes().len()];
        for p in &self.train_pairs {
            objects[p.object] = true;
            attributes[p.attribute] = true;
        }
        if let Some(i) = objects.iter().position(|c| !c) {
            return Err(Error::Contract(format!(
                "object '{}' appears in no train pair",
                vocab.objects()[i]
            )));
        }
        if let Some(i) = attributes.iter().position(|c| !c) {
            return Err(Error::Contract(format!(
                "attribute '{}' appears in no train pair",
                vocab.attributes()[i]
            )));
        }
        Ok(())
    }

    /// Compares pair counts against a published benchmark profile.
    pub fn expect_counts(&self, expected: &SplitCounts) -> Result<()> {
        let got = self.counts();
        if got != *expected {
            return Err(Error::Config(format!(
                "split counts {got:?} do not match expected {expected:?}"
            )));
        }
        Ok(())
    }
}

/// A loaded dataset: vocabulary, split specification, and per-split samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub vocab: Vocab,
    pub splits: SplitSpec,
    pub feature_dim: usize,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Dataset {
    pub fn eval_samples(&self, split: EvalSplit) -> &[Sample] {
        match split {
            EvalSplit::Val => &self.val,
            EvalSplit::Test => &self.test,
        }
    }

    /// Every pair named by the split file, train first, then unseen val and
    /// test pairs, without duplicates.
    pub fn all_pairs(&self) -> Vec<ConceptPair> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut push = |p: ConceptPair| {
            if seen.insert(p) {
                out.push(p);
            }
        };
        for p in &self.splits.train_pairs {
            push(*p);
        }
        for pf in self.splits.val_pairs.iter().chain(&self.splits.test_pairs) {
            push(pf.pair);
        }
        out
    }

    pub fn load(dir: &Path) -> Result<Dataset> {
        let (vocab, splits) = load_split_spec(&dir.join(SPLITS_FILE))?;
        let mut dims = Vec::new();
        let mut load_split = |name: &str, allowed: &HashSet<ConceptPair>| -> Result<Vec<Sample>> {
            let path = dir.join(name);
            let (dim, samples) = load_features(&path, &vocab)?;
            dims.push(dim);
            for (line, s) in samples.iter().enumerate() {
                if !allowed.contains(&s.label) {
                    let (o, a) = vocab.pair_names(s.label);
                    return Err(Error::format(
                        &path,
                        line + 2,
                        format!("pair ({o}, {a}) is not listed for this split"),
                    ));
                }
            }
            Ok(samples)
        };
        let train_set: HashSet<ConceptPair> = splits.train_pairs.iter().copied().collect();
        let val_set: HashSet<ConceptPair> = splits.val_pairs.iter().map(|pf| pf.pair).collect();
        let test_set: HashSet<ConceptPair> = splits.test_pairs.iter().map(|pf| pf.pair).collect();
        let train = load_split("train.tsv", &train_set)?;
        let val = load_split("val.tsv", &val_set)?;
        let test = load_split("test.tsv", &test_set)?;

        if dims.iter().any(|d| *d != dims[0]) {
            return Err(Error::Config(format!(
                "feature files disagree on dimension: {dims:?}"
            )));
        }
        let dataset = Dataset {
            vocab,
            splits,
            feature_dim: dims[0],
            train,
            val,
            test,
        };
        dataset.check_sample_ids(dir)?;
        dataset.splits.validate(&dataset.vocab)?;
        Ok(dataset)
    }

    fn check_sample_ids(&self, dir: &Path) -> Result<()> {
        let mut ids = HashSet::new();
        for s in self.train.iter().chain(&self.val).chain(&self.test) {
            if !ids.insert(&s.id) {
                return Err(Error::format(
                    &dir.join("<features>"),
                    0,
                    format!("duplicate sample id '{}'", s.id),
                ));
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut splits = String::new();
        let write_pairs = |buf: &mut String, split: &str, pairs: &[PairFlag]| {
            for pf in pairs {
                let (o, a) = self.vocab.pair_names(pf.pair);
                let flag = if pf.unseen { "unseen" } else { "seen" };
                writeln_str(buf, &format!("{split}\t{flag}\t{o}\t{a}"));
            }
        };
        for p in &self.splits.train_pairs {
            let (o, a) = self.vocab.pair_names(*p);
            writeln_str(&mut splits, &format!("train\tseen\t{o}\t{a}"));
        }
        write_pairs(&mut splits, "val", &self.splits.val_pairs);
        write_pairs(&mut splits, "test", &self.splits.test_pairs);
        fs::write(dir.join(SPLITS_FILE), splits)?;

        for (name, samples) in [
            ("train.tsv", &self.train),
            ("val.tsv", &self.val),
            ("test.tsv", &self.test),
        ] {
            let mut out = String::new();
            writeln_str(&mut out, &format!("#D {}", self.feature_dim));
            for s in samples {
                let (o, a) = self.vocab.pair_names(s.label);
                let mut row = format!("{}\t{o}\t{a}", s.id);
                for v in s.features.data() {
                    let _ = write!(row, "\t{v:.16e}");
                }
                writeln_str(&mut out, &row);
            }
            fs::write(dir.join(name), out)?;
        }
        Ok(())
    }
}

fn writeln_str(buf: &mut String, line: &str) {
    buf.push_str(line);
    buf.push('\n');
}

/// Parses a split file, building the vocabulary in first-appearance order.
pub fn load_split_spec(path: &Path) -> Result<(Vocab, SplitSpec)> {
    let text = fs::read_to_string(path)?;
    let mut objects = Vec::new();
    let mut attributes = Vec::new();
    let mut object_ids: HashMap<String, usize> = HashMap::new();
    let mut attribute_ids: HashMap<String, usize> = HashMap::new();

    let mut train_pairs = Vec::new();
    let mut val_pairs = Vec::new();
    let mut test_pairs = Vec::new();
    let mut seen_rows: HashSet<(u8, ConceptPair)> = HashSet::new();

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::format(
                path,
                line_no,
                format!("expected 4 tab-separated fields, got {}", fields.len()),
            ));
        }
        let (split, flag, oname, aname) = (fields[0], fields[1], fields[2], fields[3]);
        if oname.is_empty() || aname.is_empty() {
            return Err(Error::format(path, line_no, "empty name"));
        }
        let o = *object_ids.entry(oname.to_string()).or_insert_with(|| {
            objects.push(oname.to_string());
            objects.len() - 1
        });
        let a = *attribute_ids.entry(aname.to_string()).or_insert_with(|| {
            attributes.push(aname.to_string());
            attributes.len() - 1
        });
        let pair = ConceptPair::new(o, a);
        let unseen = match flag {
            "seen" => false,
            "unseen" => true,
            other => {
                return Err(Error::format(
                    path,
                    line_no,
                    format!("unknown flag '{other}' (expected seen or unseen)"),
                ))
            }
        };
        let split_code = match split {
            "train" => 0u8,
            "val" => 1,
            "test" => 2,
            other => {
                return Err(Error::format(
                    path,
                    line_no,
                    format!("unknown split '{other}' (expected train, val, or test)"),
                ))
            }
        };
        if !seen_rows.insert((split_code, pair)) {
            return Err(Error::format(
                path,
                line_no,
                format!("duplicate pair ({oname}, {aname}) in split '{split}'"),
            ));
        }
        match split_code {
            0 => {
                if unseen {
                    return Err(Error::format(
                        path,
                        line_no,
                        "train pairs must be flagged seen",
                    ));
                }
                train_pairs.push(pair);
            }
            1 => val_pairs.push(PairFlag { pair, unseen }),
            _ => test_pairs.push(PairFlag { pair, unseen }),
        }
    }

    let vocab = Vocab::new(objects, attributes)?;
    let splits = SplitSpec {
        train_pairs,
        val_pairs,
        test_pairs,
    };
    splits
        .validate(&vocab)
        .map_err(|e| Error::format(path, 0, e.to_string()))?;
    Ok((vocab, splits))
}

/// Parses one feature file against a known vocabulary. Returns the declared
/// dimension and the samples in file order.
pub fn load_features(path: &Path, vocab: &Vocab) -> Result<(usize, Vec<Sample>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::format(path, 1, "empty feature file"))?;
    let dim: usize = header
        .strip_prefix("#D ")
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| Error::format(path, 1, "expected '#D <dim>' header"))?;

    let mut samples = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 + dim {
            return Err(Error::format(
                path,
                line_no,
                format!("expected {} fields, got {}", 3 + dim, fields.len()),
            ));
        }
        let label = vocab
            .pair_by_names(fields[1], fields[2])
            .map_err(|e| Error::format(path, line_no, e.to_string()))?;
        let mut values = Vec::with_capacity(dim);
        for f in &fields[3..] {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::format(path, line_no, format!("bad float '{f}'")))?;
            if !v.is_finite() {
                return Err(Error::format(path, line_no, "non-finite feature value"));
            }
            values.push(v);
        }
        samples.push(Sample {
            id: fields[0].to_string(),
            features: Tensor::vector(values),
            label,
        });
    }
    Ok((dim, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_dataset(dir: &Path, splits: &str, train: &str, val: &str, test: &str) {
        fs::write(dir.join(SPLITS_FILE), splits).unwrap();
        fs::write(dir.join("train.tsv"), train).unwrap();
        fs::write(dir.join("val.tsv"), val).unwrap();
        fs::write(dir.join("test.tsv"), test).unwrap();
    }

    const SPLITS: &str = "train\tseen\tapple\tripe\n\
                          train\tseen\tapple\tsliced\n\
                          train\tseen\tpear\tsliced\n\
                          train\tseen\tpear\tripe\n\
                          val\tseen\tapple\tripe\n\
                          val\tunseen\tapple\tdry\n\
                          train\tseen\tfig\tdry\n\
                          test\tseen\tpear\tripe\n\
                          test\tunseen\tfig\tripe\n";

    #[test]
    fn load_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(
            dir.path(),
            SPLITS,
            "#D 2\ns0\tapple\tripe\t0.5\t-1.25\ns1\tfig\tdry\t1.0\t2.0\n",
            "#D 2\nv0\tapple\tdry\t0.1\t0.2\nv1\tapple\tripe\t0.0\t0.125\n",
            "#D 2\nt0\tfig\tripe\t-0.5\t0.75\nt1\tpear\tripe\t3.0\t4.0\n",
        );
        let d = Dataset::load(dir.path()).unwrap();
        // First-appearance vocabulary order.
        assert_eq!(d.vocab.objects(), ["apple", "pear", "fig"]);
        assert_eq!(d.vocab.attributes(), ["ripe", "sliced", "dry"]);
        assert_eq!(d.feature_dim, 2);
        assert_eq!(d.train.len(), 2);
        assert_eq!(d.train[0].features.data(), &[0.5, -1.25]);

        // Serialize, re-ingest: identical dataset and identical bytes.
        let out = tempfile::tempdir().unwrap();
        d.save(out.path()).unwrap();
        let d2 = Dataset::load(out.path()).unwrap();
        assert_eq!(d, d2);
        let out2 = tempfile::tempdir().unwrap();
        d2.save(out2.path()).unwrap();
        for f in [SPLITS_FILE, "train.tsv", "val.tsv", "test.tsv"] {
            assert_eq!(
                fs::read(out.path().join(f)).unwrap(),
                fs::read(out2.path().join(f)).unwrap(),
                "{f} not byte-identical"
            );
        }
    }

    #[test]
    fn unseen_val_pair_in_train_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let bad = "train\tseen\tapple\tripe\n\
                   train\tseen\tpear\tdry\n\
                   val\tseen\tapple\tripe\n\
                   val\tunseen\tpear\tdry\n\
                   test\tseen\tapple\tripe\n\
                   test\tunseen\tapple\tdry\n";
        write_dataset(dir.path(), bad, "#D 1\n", "#D 1\n", "#D 1\n");
        let err = Dataset::load(dir.path()).unwrap_err();
        assert!(err.to_string().contains("unseen"), "{err}");
    }

    #[test]
    fn sample_pair_must_be_listed_for_its_split() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(
            dir.path(),
            SPLITS,
            "#D 1\ns0\tapple\tdry\t1.0\n", // (apple, dry) is a val pair, not train
            "#D 1\n",
            "#D 1\n",
        );
        let err = Dataset::load(dir.path()).unwrap_err();
        assert!(err.to_string().contains("not listed"), "{err}");
    }

    #[test]
    fn duplicate_sample_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(
            dir.path(),
            SPLITS,
            "#D 1\ns0\tapple\tripe\t1.0\n",
            "#D 1\ns0\tapple\tdry\t1.0\n",
            "#D 1\n",
        );
        let err = Dataset::load(dir.path()).unwrap_err();
        assert!(err.to_string().contains("duplicate sample id"), "{err}");
    }

    #[test]
    fn wrong_field_count_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(
            dir.path(),
            SPLITS,
            "#D 2\ns0\tapple\tripe\t1.0\n",
            "#D 2\n",
            "#D 2\n",
        );
        let err = Dataset::load(dir.path()).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }

    #[test]
    fn uncovered_primitive_rejected() {
        let dir = tempfile::tempdir().unwrap();
        // 'mossy' only appears as an unseen attribute; zero-shot composition
        // needs every primitive in train.
        let bad = "train\tseen\tapple\tripe\n\
                   val\tseen\tapple\tripe\n\
                   val\tunseen\tapple\tmossy\n\
                   test\tseen\tapple\tripe\n\
                   test\tunseen\tapple\tmossy\n";
        write_dataset(dir.path(), bad, "#D 1\n", "#D 1\n", "#D 1\n");
        let err = Dataset::load(dir.path()).unwrap_err();
        assert!(err.to_string().contains("no train pair"), "{err}");
    }

    #[test]
    fn benchmark_count_profiles() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(
            dir.path(),
            SPLITS,
            "#D 1\n",
            "#D 1\n",
            "#D 1\n",
        );
        let d = Dataset::load(dir.path()).unwrap();
        assert_eq!(
            d.splits.counts(),
            SplitCounts {
                train: 5,
                val_seen: 1,
                val_unseen: 1,
                test_seen: 1,
                test_unseen: 1
            }
        );
        assert!(d.splits.expect_counts(&MIT_STATES_COUNTS).is_err());
    }

    #[test]
    fn candidates_are_train_plus_split_unseen() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), SPLITS, "#D 1\n", "#D 1\n", "#D 1\n");
        let d = Dataset::load(dir.path()).unwrap();
        let cands = d.splits.candidates(EvalSplit::Val);
        assert_eq!(cands.len(), 6); // 5 train + 1 val-unseen
        assert_eq!(cands.iter().filter(|pf| pf.unseen).count(), 1);
    }
}
