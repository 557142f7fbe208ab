//! Scoring of pipeline output against gold annotations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::EntitySpan;
use crate::labels::{named_enum, EntityCategory, ReportLabel};

named_enum!(
    MatchMode {
        Exact => "exact",
        Overlap => "overlap",
    }
);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("report {0:?} present in gold but not in predictions")]
    MissingPrediction(String),
    #[error("report {0:?} present in predictions but not in gold")]
    UnexpectedPrediction(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

impl Prf {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Self { precision, recall, f1: f1(precision, recall) }
    }

    fn mean(items: &[Prf]) -> Self {
        if items.is_empty() {
            return Self::default();
        }
        let n = items.len() as f64;
        Self {
            precision: items.iter().map(|p| p.precision).sum::<f64>() / n,
            recall: items.iter().map(|p| p.recall).sum::<f64>() / n,
            f1: items.iter().map(|p| p.f1).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub label: ReportLabel,
    pub support: u64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    #[serde(flatten)]
    pub prf: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub accuracy: f64,
    #[serde(flatten)]
    pub prf: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub n: u64,
    pub accuracy: f64,
    /// Rows are gold labels, columns predictions, both in `ReportLabel::ALL` order.
    pub confusion: [[u64; 3]; 3],
    pub per_label: Vec<LabelMetrics>,
    /// Unweighted mean over labels occurring in gold or predictions.
    pub macro_avg: Prf,
    /// Any finding (NonNodular or ITN) vs NoFinding.
    pub binary_itf: BinaryMetrics,
}

fn label_index(l: ReportLabel) -> usize {
    ReportLabel::ALL.iter().position(|x| *x == l).unwrap()
}

/// Report-level metrics; both maps must hold the same report ids.
pub fn score_classification(
    gold: &BTreeMap<String, ReportLabel>,
    pred: &BTreeMap<String, ReportLabel>,
) -> Result<ClassificationReport, EvalError> {
    if let Some(id) = gold.keys().find(|k| !pred.contains_key(*k)) {
        return Err(EvalError::MissingPrediction(id.clone()));
    }
    if let Some(id) = pred.keys().find(|k| !gold.contains_key(*k)) {
        return Err(EvalError::UnexpectedPrediction(id.clone()));
    }
    let mut confusion = [[0u64; 3]; 3];
    for (id, g) in gold {
        confusion[label_index(*g)][label_index(pred[id])] += 1;
    }
    let n = gold.len() as u64;
    let correct: u64 = (0..3).map(|i| confusion[i][i]).sum();

    let mut per_label = Vec::new();
    for (i, label) in ReportLabel::ALL.iter().enumerate() {
        let tp = confusion[i][i];
        let support: u64 = confusion[i].iter().sum();
        let predicted: u64 = (0..3).map(|r| confusion[r][i]).sum();
        per_label.push(LabelMetrics {
            label: *label,
            support,
            tp,
            fp: predicted - tp,
            fn_: support - tp,
            prf: Prf::from_counts(tp, predicted - tp, support - tp),
        });
    }
    let present: Vec<Prf> = per_label.iter().filter(|m| m.support > 0 || m.fp > 0).map(|m| m.prf).collect();

    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (gi, row) in confusion.iter().enumerate() {
        for (pi, &c) in row.iter().enumerate() {
            let g = ReportLabel::ALL[gi].is_itf();
            let p = ReportLabel::ALL[pi].is_itf();
            match (g, p) {
                (true, true) => tp += c,
                (false, true) => fp += c,
                (true, false) => fn_ += c,
                (false, false) => tn += c,
            }
        }
    }
    Ok(ClassificationReport {
        n,
        accuracy: ratio(correct, n),
        confusion,
        per_label,
        macro_avg: Prf::mean(&present),
        binary_itf: BinaryMetrics { tp, fp, fn_, tn, accuracy: ratio(tp + tn, n), prf: Prf::from_counts(tp, fp, fn_) },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Counts {
    tp: u64,
    fp: u64,
    fn_: u64,
}

/// One-to-one matching of same-category spans; returns matched pairs count.
fn match_spans(gold: &[&EntitySpan], pred: &[&EntitySpan], mode: MatchMode) -> u64 {
    match mode {
        MatchMode::Exact => {
            let mut remaining: BTreeMap<(usize, usize), u64> = BTreeMap::new();
            for g in gold {
                *remaining.entry((g.start, g.end)).or_default() += 1;
            }
            let mut tp = 0;
            for p in pred {
                if let Some(c) = remaining.get_mut(&(p.start, p.end)) {
                    if *c > 0 {
                        *c -= 1;
                        tp += 1;
                    }
                }
            }
            tp
        }
        MatchMode::Overlap => {
            // (overlap, not-identical, gold index, pred index): longest overlap
            // first, identical boundaries first among equal overlaps
            let mut pairs: Vec<(usize, bool, usize, usize)> = Vec::new();
            for (gi, g) in gold.iter().enumerate() {
                for (pi, p) in pred.iter().enumerate() {
                    let ov = g.overlap(p);
                    if ov > 0 {
                        pairs.push((ov, (g.start, g.end) != (p.start, p.end), gi, pi));
                    }
                }
            }
            pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
            let mut gused = vec![false; gold.len()];
            let mut pused = vec![false; pred.len()];
            let mut tp = 0;
            for (_, _, gi, pi) in pairs {
                if !gused[gi] && !pused[pi] {
                    gused[gi] = true;
                    pused[pi] = true;
                    tp += 1;
                }
            }
            tp
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub category: EntityCategory,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    #[serde(flatten)]
    pub prf: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanReport {
    pub mode: MatchMode,
    pub per_category: Vec<CategoryMetrics>,
    pub micro: Prf,
    /// Unweighted mean over categories present in gold.
    #[serde(rename = "macro")]
    pub macro_avg: Prf,
    /// Character-level agreement on the category set covering each character
    /// inside the union of gold and predicted spans. An approximation of a
    /// per-token accuracy that needs no access to the report text.
    pub char_accuracy: f64,
}

fn by_category(spans: &[EntitySpan]) -> BTreeMap<EntityCategory, Vec<&EntitySpan>> {
    let mut m: BTreeMap<EntityCategory, Vec<&EntitySpan>> = BTreeMap::new();
    for s in spans {
        m.entry(s.category).or_default().push(s);
    }
    m
}

/// Per-character category sets for one report: (agreeing, total) characters.
fn char_agreement(gold: &[EntitySpan], pred: &[EntitySpan]) -> (u64, u64) {
    let mut cover: BTreeMap<usize, (BTreeSet<EntityCategory>, BTreeSet<EntityCategory>)> = BTreeMap::new();
    for s in gold {
        for c in s.start..s.end {
            cover.entry(c).or_default().0.insert(s.category);
        }
    }
    for s in pred {
        for c in s.start..s.end {
            cover.entry(c).or_default().1.insert(s.category);
        }
    }
    let agree = cover.values().filter(|(g, p)| g == p).count() as u64;
    (agree, cover.len() as u64)
}

/// Span-level metrics. Reports missing on either side count all their spans
/// as misses (gold) or false alarms (pred).
pub fn score_spans(
    gold: &BTreeMap<String, Vec<EntitySpan>>,
    pred: &BTreeMap<String, Vec<EntitySpan>>,
    mode: MatchMode,
) -> SpanReport {
    let empty = Vec::new();
    let ids: BTreeSet<&String> = gold.keys().chain(pred.keys()).collect();
    let mut counts: BTreeMap<EntityCategory, Counts> = BTreeMap::new();
    let mut gold_categories = BTreeSet::new();
    let (mut agree, mut total) = (0u64, 0u64);
    for id in ids {
        let g = gold.get(id).unwrap_or(&empty);
        let p = pred.get(id).unwrap_or(&empty);
        let gc = by_category(g);
        let pc = by_category(p);
        let cats: BTreeSet<EntityCategory> = gc.keys().chain(pc.keys()).copied().collect();
        for cat in cats {
            let gs = gc.get(&cat).map(Vec::as_slice).unwrap_or(&[]);
            let ps = pc.get(&cat).map(Vec::as_slice).unwrap_or(&[]);
            if !gs.is_empty() {
                gold_categories.insert(cat);
            }
            let tp = match_spans(gs, ps, mode);
            let c = counts.entry(cat).or_default();
            c.tp += tp;
            c.fp += ps.len() as u64 - tp;
            c.fn_ += gs.len() as u64 - tp;
        }
        let (a, t) = char_agreement(g, p);
        agree += a;
        total += t;
    }
    let per_category: Vec<CategoryMetrics> = counts
        .iter()
        .map(|(cat, c)| CategoryMetrics {
            category: *cat,
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            prf: Prf::from_counts(c.tp, c.fp, c.fn_),
        })
        .collect();
    let (tp, fp, fn_) = counts.values().fold((0, 0, 0), |acc, c| (acc.0 + c.tp, acc.1 + c.fp, acc.2 + c.fn_));
    let macro_items: Vec<Prf> =
        per_category.iter().filter(|m| gold_categories.contains(&m.category)).map(|m| m.prf).collect();
    SpanReport {
        mode,
        per_category,
        micro: Prf::from_counts(tp, fp, fn_),
        macro_avg: Prf::mean(&macro_items),
        char_accuracy: if total == 0 { 1.0 } else { agree as f64 / total as f64 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub primary_mode: MatchMode,
    pub classification: ClassificationReport,
    pub spans_exact: SpanReport,
    pub spans_overlap: SpanReport,
}
