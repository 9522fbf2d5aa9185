//! Accuracy and accuracy–coverage metrics, dev-set threshold selection,
//! curve sweeps, and the random / majority-class baselines.
//!
//! Every sample is reduced to its top score and the canonical that achieved
//! it. With one threshold `x1`, samples scoring below `x1` are predicted
//! OTHER and the rest get their argmax; accuracy is over all `N` samples.
//! With a second threshold `x2 >= x1`, samples in `[x1, x2)` are left
//! unpredicted, accuracy is over predicted samples only, and coverage is the
//! predicted fraction `(X1 + N - X2) / N`.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{CanonicalRegistry, Label, LabeledExample};
use crate::error::{Error, Result};
use crate::norm::Prediction;

/// Default threshold grid resolution.
pub const DEFAULT_GRID_STEP: f64 = 0.01;

/// A sample's best score and the canonical that achieved it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub top_score: f64,
    /// `None` when the argmax is unknown; such a sample is never correct
    /// when a canonical is predicted.
    pub argmax: Option<String>,
}

impl Scored {
    pub fn new(top_score: f64, argmax: impl Into<String>) -> Self {
        Scored {
            top_score,
            argmax: Some(argmax.into()),
        }
    }
}

impl From<&Prediction> for Scored {
    fn from(p: &Prediction) -> Self {
        Scored {
            top_score: p.top_score,
            argmax: Some(p.argmax().to_owned()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub x1: Option<f64>,
    pub x2: Option<f64>,
    pub n_total: usize,
    pub n_below_x1: usize,
    pub n_between: usize,
    pub n_predicted: usize,
    pub n_correct: usize,
    /// Absent when nothing was predicted.
    pub accuracy: Option<f64>,
    pub coverage: f64,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn check_lengths(preds: &[Scored], gold: &[Label]) -> Result<()> {
    if preds.len() != gold.len() {
        return Err(Error::LengthMismatch(preds.len(), gold.len()));
    }
    Ok(())
}

fn canonical_correct(p: &Scored, g: &Label) -> bool {
    match (g, &p.argmax) {
        (Label::Canonical(c), Some(a)) => a == c,
        _ => false,
    }
}

/// Single-threshold accuracy over all samples.
pub fn accuracy_single(preds: &[Scored], gold: &[Label], x1: f64) -> Result<EvalReport> {
    let mut report = accuracy_coverage(preds, gold, x1, x1)?;
    report.x2 = None;
    Ok(report)
}

/// Two-threshold accuracy over predicted samples, plus coverage.
pub fn accuracy_coverage(preds: &[Scored], gold: &[Label], x1: f64, x2: f64) -> Result<EvalReport> {
    check_lengths(preds, gold)?;
    if x2 < x1 {
        return Err(Error::Config(format!("x2 = {x2} is below x1 = {x1}")));
    }
    let (mut below, mut between, mut correct) = (0, 0, 0);
    for (p, g) in preds.iter().zip(gold) {
        if p.top_score < x1 {
            below += 1;
            correct += usize::from(g.is_other());
        } else if p.top_score < x2 {
            between += 1;
        } else {
            correct += usize::from(canonical_correct(p, g));
        }
    }
    let n = preds.len();
    let predicted = n - between;
    Ok(EvalReport {
        x1: Some(x1),
        x2: Some(x2),
        n_total: n,
        n_below_x1: below,
        n_between: between,
        n_predicted: predicted,
        n_correct: correct,
        accuracy: ratio(correct, predicted),
        coverage: ratio(predicted, n).unwrap_or(0.0),
    })
}

/// Accuracy of hard label predictions (every sample predicted).
pub fn evaluate_labels(preds: &[Label], gold: &[Label]) -> Result<EvalReport> {
    if preds.len() != gold.len() {
        return Err(Error::LengthMismatch(preds.len(), gold.len()));
    }
    let n = preds.len();
    let correct = preds.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(EvalReport {
        x1: None,
        x2: None,
        n_total: n,
        n_below_x1: preds.iter().filter(|p| p.is_other()).count(),
        n_between: 0,
        n_predicted: n,
        n_correct: correct,
        accuracy: ratio(correct, n),
        coverage: if n > 0 { 1.0 } else { 0.0 },
    })
}

/// Threshold candidates `lo, lo + step, ..., hi`.
pub fn grid(range: (f64, f64), step: f64) -> Result<Vec<f64>> {
    let (lo, hi) = range;
    if !(step > 0.0) || !(hi >= lo) {
        return Err(Error::Config(format!("bad grid: range {range:?}, step {step}")));
    }
    let n = ((hi - lo) / step).round() as usize;
    Ok((0..=n)
        .map(|i| {
            let x = lo + i as f64 * step;
            ((x * 1e12).round() / 1e12).min(hi)
        })
        .collect())
}

/// True if `a` beats `b`: higher accuracy, then higher coverage.
/// Candidates are visited in increasing (x1, x2), so keeping the incumbent on
/// a full tie prefers the lower thresholds.
fn better(a: &EvalReport, b: &EvalReport) -> bool {
    let (aa, ba) = (a.accuracy.unwrap_or(-1.0), b.accuracy.unwrap_or(-1.0));
    aa > ba || (aa == ba && a.coverage > b.coverage)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSelection {
    /// Best single threshold.
    pub single: EvalReport,
    /// Best `(x1, x2)` pair; absent if no pair predicts anything.
    pub band: Option<EvalReport>,
    pub candidates: usize,
}

/// Exhaustive grid search over `range` maximizing dev accuracy.
pub fn select_thresholds(preds: &[Scored], gold: &[Label], range: (f64, f64), step: f64) -> Result<ThresholdSelection> {
    check_lengths(preds, gold)?;
    let xs = grid(range, step)?;
    let mut best_single: Option<EvalReport> = None;
    for &x1 in &xs {
        let r = accuracy_single(preds, gold, x1)?;
        if best_single.as_ref().is_none_or(|b| better(&r, b)) {
            best_single = Some(r);
        }
    }
    let mut best_band: Option<EvalReport> = None;
    for (i, &x1) in xs.iter().enumerate() {
        for &x2 in &xs[i..] {
            let r = accuracy_coverage(preds, gold, x1, x2)?;
            if r.accuracy.is_none() {
                continue;
            }
            if best_band.as_ref().is_none_or(|b| better(&r, b)) {
                best_band = Some(r);
            }
        }
    }
    Ok(ThresholdSelection {
        single: best_single.expect("grid is never empty"),
        band: best_band,
        candidates: xs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub x1: f64,
    pub x2: f64,
    pub accuracy: f64,
    pub coverage: f64,
    pub n_predicted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    /// Every grid pair with non-zero coverage, by coverage descending.
    pub points: Vec<CurvePoint>,
    /// Points not dominated in both accuracy and coverage, by coverage descending.
    pub frontier: Vec<CurvePoint>,
}

pub fn sweep_curve(preds: &[Scored], gold: &[Label], range: (f64, f64), step: f64) -> Result<Curve> {
    check_lengths(preds, gold)?;
    let xs = grid(range, step)?;
    let mut points = Vec::new();
    for (i, &x1) in xs.iter().enumerate() {
        for &x2 in &xs[i..] {
            let r = accuracy_coverage(preds, gold, x1, x2)?;
            if let Some(accuracy) = r.accuracy {
                points.push(CurvePoint {
                    x1,
                    x2,
                    accuracy,
                    coverage: r.coverage,
                    n_predicted: r.n_predicted,
                });
            }
        }
    }
    points.sort_by(|a, b| {
        b.coverage
            .total_cmp(&a.coverage)
            .then(b.accuracy.total_cmp(&a.accuracy))
            .then(a.x1.total_cmp(&b.x1))
            .then(a.x2.total_cmp(&b.x2))
    });
    let frontier = pareto_frontier(&points);
    Ok(Curve { points, frontier })
}

/// Expects `points` sorted by coverage descending, accuracy descending.
fn pareto_frontier(points: &[CurvePoint]) -> Vec<CurvePoint> {
    let mut best = f64::NEG_INFINITY;
    let mut out = Vec::new();
    for p in points {
        if p.accuracy > best {
            best = p.accuracy;
            out.push(*p);
        }
    }
    out
}

/// Writes `x1,x2,accuracy,coverage,n_predicted` rows under a header.
pub fn write_curve_csv<W: Write>(mut w: W, points: &[CurvePoint]) -> Result<()> {
    writeln!(w, "x1,x2,accuracy,coverage,n_predicted")?;
    for p in points {
        writeln!(w, "{},{},{:.6},{:.6},{}", p.x1, p.x2, p.accuracy, p.coverage, p.n_predicted)?;
    }
    Ok(())
}

/// Uniform choice among the attribute's canonicals; never OTHER.
pub fn baseline_random(examples: &[LabeledExample], registry: &CanonicalRegistry, seed: u64) -> Result<Vec<Label>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    examples
        .iter()
        .map(|e| {
            let canonicals = registry.get(&e.attribute).ok_or_else(|| Error::UnknownAttribute {
                attribute: e.attribute.clone(),
                line: Some(e.line),
            })?;
            Ok(Label::Canonical(canonicals[rng.gen_range(0..canonicals.len())].clone()))
        })
        .collect()
}

/// Most frequent dev label per attribute, applied to every test example.
/// Ties go to the earlier canonical in the registry, with OTHER last; an
/// attribute absent from dev gets OTHER.
pub fn baseline_majority(dev: &[LabeledExample], test: &[LabeledExample], registry: &CanonicalRegistry) -> Vec<Label> {
    let mut counts: HashMap<&str, HashMap<&Label, usize>> = HashMap::new();
    for e in dev {
        *counts.entry(e.attribute.as_str()).or_default().entry(&e.gold).or_default() += 1;
    }
    let rank = |attr: &str, label: &Label| -> usize {
        match label {
            Label::Other => usize::MAX,
            Label::Canonical(c) => registry
                .get(attr)
                .and_then(|cs| cs.iter().position(|x| x == c))
                .unwrap_or(usize::MAX - 1),
        }
    };
    let mut majority: HashMap<&str, Label> = HashMap::new();
    for (attr, per_label) in &counts {
        let best = per_label
            .iter()
            .max_by(|(la, ca), (lb, cb)| {
                ca.cmp(cb)
                    .then_with(|| rank(attr, lb).cmp(&rank(attr, la)))
                    .then_with(|| lb.as_str().cmp(la.as_str()))
            })
            .map(|(l, _)| (*l).clone())
            .unwrap_or(Label::Other);
        majority.insert(attr, best);
    }
    test.iter()
        .map(|e| majority.get(e.attribute.as_str()).cloned().unwrap_or(Label::Other))
        .collect()
}
