//! Generalized evaluation protocol: score matrices, the calibration-bias
//! sweep over seen/unseen accuracy, its area, best operating points, and
//! closed-world accuracy.
//!
//! The sweep is exact: per sample, top-k correctness is monotone in the bias
//! and flips at one critical threshold, so evaluating at every threshold,
//! the midpoints between consecutive thresholds, and the two infinite
//! sentinels enumerates every achievable operating point.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;

use crate::data::{PairFlag, Sample};
use crate::error::{Error, Result};
use crate::model::{ConceptPair, ModelParams};
use crate::numeric::tensor::Tensor;

/// Scores for every (sample, candidate pair) plus the seen/unseen mask and
/// per-sample true labels.
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    pub sample_ids: Vec<String>,
    pub pairs: Vec<ConceptPair>,
    pub unseen: Vec<bool>,
    /// `samples x pairs`, row-major.
    pub scores: Tensor,
    /// Per sample, the candidate index of its true pair.
    pub true_index: Vec<usize>,
}

impl ScoreMatrix {
    /// Scores `samples` against `candidates` with one gating evaluation per
    /// candidate. Labels are expressed in the model's id space.
    pub fn build(
        params: &ModelParams,
        samples: &[Sample],
        candidates: &[PairFlag],
    ) -> Result<ScoreMatrix> {
        if candidates.is_empty() {
            return Err(Error::Contract("no candidate pairs".to_string()));
        }
        if samples.is_empty() {
            return Err(Error::Contract("no samples to score".to_string()));
        }
        let mut index: HashMap<ConceptPair, usize> = HashMap::new();
        for (i, pf) in candidates.iter().enumerate() {
            if index.insert(pf.pair, i).is_some() {
                return Err(Error::Contract(format!(
                    "candidate pair ({}, {}) listed twice",
                    pf.pair.object, pf.pair.attribute
                )));
            }
        }
        let true_index = samples
            .iter()
            .map(|s| {
                index.get(&s.label).copied().ok_or_else(|| {
                    Error::Contract(format!(
                        "true pair of sample '{}' missing from candidates",
                        s.id
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let xs: Vec<&Tensor> = samples.iter().map(|s| &s.features).collect();
        let pairs: Vec<ConceptPair> = candidates.iter().map(|pf| pf.pair).collect();
        let scores = params.score_grid(&xs, &pairs)?;
        Ok(ScoreMatrix {
            sample_ids: samples.iter().map(|s| s.id.clone()).collect(),
            pairs,
            unseen: candidates.iter().map(|pf| pf.unseen).collect(),
            scores,
            true_index,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.true_index.len()
    }

    pub fn num_candidates(&self) -> usize {
        self.pairs.len()
    }

    pub fn row(&self, sample: usize) -> &[f64] {
        self.scores.row(sample)
    }

    /// Whether a sample's true pair is unseen.
    pub fn sample_unseen(&self, sample: usize) -> bool {
        self.unseen[self.true_index[sample]]
    }
}

/// Compares two biased candidate scores. The infinite sentinel biases order
/// strictly by class first (so they behave as limits rather than saturating
/// float arithmetic), then by raw score.
fn compare_biased(
    score_a: f64,
    unseen_a: bool,
    score_b: f64,
    unseen_b: bool,
    bias: f64,
) -> Ordering {
    if bias == f64::INFINITY {
        match (unseen_a, unseen_b) {
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            _ => score_a.partial_cmp(&score_b).expect("finite scores"),
        }
    } else if bias == f64::NEG_INFINITY {
        match (unseen_a, unseen_b) {
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            _ => score_a.partial_cmp(&score_b).expect("finite scores"),
        }
    } else {
        let a = if unseen_a { score_a + bias } else { score_a };
        let b = if unseen_b { score_b + bias } else { score_b };
        a.partial_cmp(&b).expect("finite biased scores")
    }
}

/// The `k` best candidates of one score row with the bias added to unseen
/// candidates. Ties break toward the lowest candidate index.
pub fn predict_topk(
    scores_row: &[f64],
    bias: f64,
    unseen_mask: &[bool],
    k: usize,
) -> Result<Vec<usize>> {
    if scores_row.len() != unseen_mask.len() {
        return Err(Error::dim(
            "predict_topk",
            format!("{} scores, {} mask flags", scores_row.len(), unseen_mask.len()),
        ));
    }
    if k == 0 || k > scores_row.len() {
        return Err(Error::Contract(format!(
            "top-{k} of {} candidates",
            scores_row.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores_row.len()).collect();
    order.sort_by(|&i, &j| {
        compare_biased(
            scores_row[j],
            unseen_mask[j],
            scores_row[i],
            unseen_mask[i],
            bias,
        )
        .then(i.cmp(&j))
    });
    order.truncate(k);
    Ok(order)
}

/// Counts candidates ranked strictly above the true pair under the bias.
fn rivals_above(
    row: &[f64],
    unseen: &[bool],
    true_idx: usize,
    bias: f64,
    restrict_unseen: Option<bool>,
) -> usize {
    let (ts, tu) = (row[true_idx], unseen[true_idx]);
    let mut n = 0;
    for i in 0..row.len() {
        if i == true_idx {
            continue;
        }
        if let Some(want) = restrict_unseen {
            if unseen[i] != want {
                continue;
            }
        }
        match compare_biased(row[i], unseen[i], ts, tu, bias) {
            Ordering::Greater => n += 1,
            Ordering::Equal if i < true_idx => n += 1,
            _ => {}
        }
    }
    n
}

fn correct_at(m: &ScoreMatrix, sample: usize, bias: f64, k: usize) -> bool {
    rivals_above(m.row(sample), &m.unseen, m.true_index[sample], bias, None) < k
}

/// Piecewise-constant description of one sample's top-k correctness as a
/// function of the bias: a single flip threshold with explicit values below,
/// at, and above it, or a constant.
enum SampleCorrectness {
    Constant(bool),
    Flip {
        threshold: f64,
        below: bool,
        at: bool,
        above: bool,
    },
}

impl SampleCorrectness {
    fn eval(&self, bias: f64) -> bool {
        match self {
            SampleCorrectness::Constant(v) => *v,
            SampleCorrectness::Flip {
                threshold,
                below,
                at,
                above,
            } => match bias.partial_cmp(threshold).expect("comparable bias") {
                Ordering::Less => *below,
                Ordering::Equal => *at,
                Ordering::Greater => *above,
            },
        }
    }

    fn flip_threshold(&self) -> Option<f64> {
        match self {
            SampleCorrectness::Constant(_) => None,
            SampleCorrectness::Flip { threshold, .. } => Some(*threshold),
        }
    }
}

/// Finds the flip of one sample by binary search over its cross-class
/// critical thresholds (correctness is monotone in the bias).
fn sample_correctness(m: &ScoreMatrix, sample: usize, k: usize) -> SampleCorrectness {
    let below = correct_at(m, sample, f64::NEG_INFINITY, k);
    let above = correct_at(m, sample, f64::INFINITY, k);
    if below == above {
        return SampleCorrectness::Constant(below);
    }
    let row = m.row(sample);
    let t = m.true_index[sample];
    let true_unseen = m.unseen[t];
    let mut thresholds: Vec<f64> = (0..row.len())
        .filter(|i| *i != t && m.unseen[*i] != true_unseen)
        .map(|i| {
            if true_unseen {
                row[i] - row[t]
            } else {
                row[t] - row[i]
            }
        })
        .collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).expect("finite thresholds"));
    thresholds.dedup();

    // Probe points: thresholds, strict midpoints between neighbours, and a
    // sentinel beyond the last threshold (the flip may only show up past it
    // when the at-threshold tie still resolves to the `below` value).
    let mut probes = Vec::with_capacity(2 * thresholds.len() + 1);
    for (i, &t) in thresholds.iter().enumerate() {
        probes.push(t);
        if let Some(&next) = thresholds.get(i + 1) {
            let mid = t + (next - t) / 2.0;
            if mid > t && mid < next {
                probes.push(mid);
            }
        }
    }
    probes.push(thresholds.last().expect("cross-class thresholds exist") + 1.0);
    // Correctness over probes is `below ... below above ... above`; find the
    // first probe on the `above` side.
    let first_above = probes.partition_point(|p| correct_at(m, sample, *p, k) == below);
    debug_assert!(first_above < probes.len(), "flip must occur at a threshold");
    let p = probes[first_above.min(probes.len() - 1)];
    if thresholds.binary_search_by(|t| t.partial_cmp(&p).unwrap()).is_ok() {
        // Flip lands exactly on a threshold and takes the `above` value there.
        SampleCorrectness::Flip {
            threshold: p,
            below,
            at: above,
            above,
        }
    } else {
        // The first `above` probe is a midpoint or the sentinel, so the
        // preceding probe (always a threshold) flips but still evaluates to
        // the `below` value at the point itself.
        let prev = probes[first_above - 1];
        debug_assert!(thresholds
            .binary_search_by(|t| t.partial_cmp(&prev).unwrap())
            .is_ok());
        SampleCorrectness::Flip {
            threshold: prev,
            below,
            at: below,
            above,
        }
    }
}

/// One operating point of the calibration sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub bias: f64,
    pub seen_acc: f64,
    pub unseen_acc: f64,
}

/// The seen/unseen accuracy trade-off curve at one `k`, ordered by strictly
/// increasing bias from `-inf` to `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationCurve {
    pub k: usize,
    pub points: Vec<CurvePoint>,
}

/// Sweeps the calibration bias over every critical threshold (plus interval
/// midpoints and infinite sentinels) and reports seen/unseen top-k accuracy
/// at each point.
pub fn calibration_sweep(m: &ScoreMatrix, k: usize) -> Result<CalibrationCurve> {
    if k == 0 || k > m.num_candidates() {
        return Err(Error::Contract(format!(
            "top-{k} of {} candidates",
            m.num_candidates()
        )));
    }
    let seen_samples: Vec<usize> = (0..m.num_samples())
        .filter(|s| !m.sample_unseen(*s))
        .collect();
    let unseen_samples: Vec<usize> = (0..m.num_samples())
        .filter(|s| m.sample_unseen(*s))
        .collect();
    if seen_samples.is_empty() || unseen_samples.is_empty() {
        return Err(Error::Protocol(
            "calibration sweep needs both seen- and unseen-labelled samples".to_string(),
        ));
    }

    let correctness: Vec<SampleCorrectness> = (0..m.num_samples())
        .map(|s| sample_correctness(m, s, k))
        .collect();

    let mut thresholds: Vec<f64> = correctness
        .iter()
        .filter_map(|c| c.flip_threshold())
        .collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).expect("finite thresholds"));
    thresholds.dedup();

    let mut biases = Vec::with_capacity(2 * thresholds.len() + 2);
    biases.push(f64::NEG_INFINITY);
    for (i, &t) in thresholds.iter().enumerate() {
        biases.push(t);
        if let Some(&next) = thresholds.get(i + 1) {
            let mid = t + (next - t) / 2.0;
            if mid > t && mid < next {
                biases.push(mid);
            }
        }
    }
    biases.push(f64::INFINITY);

    let accuracy = |samples: &[usize], bias: f64| -> f64 {
        let hits = samples
            .iter()
            .filter(|s| correctness[**s].eval(bias))
            .count();
        hits as f64 / samples.len() as f64
    };
    let points = biases
        .into_iter()
        .map(|bias| CurvePoint {
            bias,
            seen_acc: accuracy(&seen_samples, bias),
            unseen_acc: accuracy(&unseen_samples, bias),
        })
        .collect();
    Ok(CalibrationCurve { k, points })
}

/// Area under the (unseen accuracy, seen accuracy) staircase, augmented with
/// the axis endpoints `(0, max seen)` and `(max unseen, 0)`, integrated with
/// the trapezoid rule.
pub fn auc(curve: &CalibrationCurve) -> f64 {
    let max_seen = curve.points.iter().map(|p| p.seen_acc).fold(0.0, f64::max);
    let max_unseen = curve
        .points
        .iter()
        .map(|p| p.unseen_acc)
        .fold(0.0, f64::max);
    let mut xs = Vec::with_capacity(curve.points.len() + 2);
    let mut ys = Vec::with_capacity(curve.points.len() + 2);
    xs.push(0.0);
    ys.push(max_seen);
    for p in &curve.points {
        xs.push(p.unseen_acc);
        ys.push(p.seen_acc);
    }
    xs.push(max_unseen);
    ys.push(0.0);
    let mut area = 0.0;
    for i in 0..xs.len() - 1 {
        area += (xs[i + 1] - xs[i]) * (ys[i] + ys[i + 1]) / 2.0;
    }
    area
}

/// Best seen accuracy, best unseen accuracy, and best harmonic mean over the
/// operating points of a curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestMetrics {
    pub seen: f64,
    pub unseen: f64,
    pub harmonic: f64,
}

pub fn best_metrics(curve: &CalibrationCurve) -> BestMetrics {
    let mut best = BestMetrics {
        seen: 0.0,
        unseen: 0.0,
        harmonic: 0.0,
    };
    for p in &curve.points {
        best.seen = best.seen.max(p.seen_acc);
        best.unseen = best.unseen.max(p.unseen_acc);
        let hm = if p.seen_acc + p.unseen_acc > 0.0 {
            2.0 * p.seen_acc * p.unseen_acc / (p.seen_acc + p.unseen_acc)
        } else {
            0.0
        };
        best.harmonic = best.harmonic.max(hm);
    }
    best
}

/// Top-k accuracy of unseen-labelled samples when only unseen pairs compete,
/// with no calibration bias.
pub fn closed_world_accuracy(m: &ScoreMatrix, k: usize) -> Result<f64> {
    let n_unseen_candidates = m.unseen.iter().filter(|u| **u).count();
    if k == 0 || k > n_unseen_candidates {
        return Err(Error::Contract(format!(
            "top-{k} of {n_unseen_candidates} unseen candidates"
        )));
    }
    let samples: Vec<usize> = (0..m.num_samples())
        .filter(|s| m.sample_unseen(*s))
        .collect();
    if samples.is_empty() {
        return Err(Error::Protocol(
            "closed-world accuracy needs unseen-labelled samples".to_string(),
        ));
    }
    let hits = samples
        .iter()
        .filter(|s| {
            rivals_above(m.row(**s), &m.unseen, m.true_index[**s], 0.0, Some(true)) < k
        })
        .count();
    Ok(hits as f64 / samples.len() as f64)
}

/// The summary cells of the generalized protocol: area at k = 1, 2, 3, best
/// operating points of the top-1 curve, and closed-world accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub auc_at: [f64; 3],
    pub best: BestMetrics,
    pub closed_world: f64,
}

pub fn summarize(m: &ScoreMatrix) -> Result<(EvalSummary, Vec<CalibrationCurve>)> {
    let curves: Vec<CalibrationCurve> = (1..=3)
        .map(|k| calibration_sweep(m, k))
        .collect::<Result<_>>()?;
    let auc_at = [auc(&curves[0]), auc(&curves[1]), auc(&curves[2])];
    let best = best_metrics(&curves[0]);
    let closed_world = closed_world_accuracy(m, 1)?;
    Ok((
        EvalSummary {
            auc_at,
            best,
            closed_world,
        },
        curves,
    ))
}

fn fmt_bias(b: f64) -> String {
    if b == f64::INFINITY {
        "inf".to_string()
    } else if b == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{b:.16e}")
    }
}

/// TSV rendering of a curve: `bias<TAB>seen_acc<TAB>unseen_acc`.
pub fn curve_tsv(curve: &CalibrationCurve) -> String {
    let mut out = String::from("bias\tseen_acc\tunseen_acc\n");
    for p in &curve.points {
        let _ = writeln!(
            out,
            "{}\t{:.16e}\t{:.16e}",
            fmt_bias(p.bias),
            p.seen_acc,
            p.unseen_acc
        );
    }
    out
}

/// TSV rendering of a summary: one header row and one value row.
pub fn summary_tsv(s: &EvalSummary) -> String {
    let mut out = String::from(
        "auc_top1\tauc_top2\tauc_top3\tbest_seen\tbest_unseen\tbest_hm\tclosed_world\n",
    );
    let _ = writeln!(
        out,
        "{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}",
        s.auc_at[0], s.auc_at[1], s.auc_at[2], s.best.seen, s.best.unseen, s.best.harmonic,
        s.closed_world
    );
    out
}
