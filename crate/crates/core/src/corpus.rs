//! Report and annotation data model, newline-delimited JSON I/O, and
//! inter-annotator agreement.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::hash::Hash;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::labels::{BodyGroup, EntityCategory, Modality, ReportLabel, SUBTYPE_NODULAR};
use crate::text::{char_len, char_slice};

/// One radiology report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub report_id: String,
    pub patient_id: String,
    pub study_date: NaiveDate,
    pub modality: Modality,
    pub body_group: BodyGroup,
    pub text: String,
}

/// A standoff annotation. Serialized as `[start, end, category, subtype, raw_text]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "SpanTuple", into = "SpanTuple")]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub category: EntityCategory,
    pub subtype: Option<String>,
    pub raw_text: String,
}

type SpanTuple = (usize, usize, EntityCategory, Option<String>, String);

impl From<SpanTuple> for EntitySpan {
    fn from((start, end, category, subtype, raw_text): SpanTuple) -> Self {
        Self { start, end, category, subtype, raw_text }
    }
}

impl From<EntitySpan> for SpanTuple {
    fn from(s: EntitySpan) -> Self {
        (s.start, s.end, s.category, s.subtype, s.raw_text)
    }
}

impl EntitySpan {
    /// Builds a span by slicing `text`; panics if the range is invalid.
    pub fn from_text(text: &str, start: usize, end: usize, category: EntityCategory, subtype: Option<String>) -> Self {
        let raw_text = char_slice(text, start, end)
            .unwrap_or_else(|| panic!("span {start}..{end} outside text"))
            .to_string();
        Self { start, end, category, subtype, raw_text }
    }

    pub fn overlap(&self, other: &EntitySpan) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }

    pub fn is_nodular_finding(&self) -> bool {
        self.category == EntityCategory::TypeOfFinding && self.subtype.as_deref() == Some(SUBTYPE_NODULAR)
    }
}

/// One annotator's (or the adjudicated) labelling of one report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedReport {
    pub report_id: String,
    pub annotator_id: String,
    pub report_label: ReportLabel,
    pub spans: Vec<EntitySpan>,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: duplicate report_id {id:?}")]
    DuplicateId { id: String, line: usize },
}

fn open(path: &Path) -> Result<BufReader<File>, CorpusError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

/// Reads newline-delimited JSON records. Blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let reader = open(path)?;
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|source| CorpusError::Parse { line: i + 1, source })?;
        out.push(rec);
    }
    Ok(out)
}

/// Writes one compact JSON object per line, newline-terminated.
pub fn write_jsonl<T: Serialize, W: Write>(mut w: W, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

fn reject_duplicates<'a>(ids: impl Iterator<Item = &'a str>) -> Result<(), CorpusError> {
    let mut seen = HashSet::new();
    for (i, id) in ids.enumerate() {
        if !seen.insert(id) {
            return Err(CorpusError::DuplicateId { id: id.to_string(), line: i + 1 });
        }
    }
    Ok(())
}

/// Reads a corpus file, preserving file order and rejecting duplicate ids.
pub fn read_corpus(path: &Path) -> Result<Vec<ReportDoc>, CorpusError> {
    let docs: Vec<ReportDoc> = read_jsonl(path)?;
    reject_duplicates(docs.iter().map(|d| d.report_id.as_str()))?;
    Ok(docs)
}

pub fn write_corpus<W: Write>(w: W, docs: &[ReportDoc]) -> std::io::Result<()> {
    write_jsonl(w, docs)
}

/// Reads an annotation file. The adjudicated format holds one record per
/// report, so duplicate report ids are rejected.
pub fn read_annotations(path: &Path) -> Result<Vec<AnnotatedReport>, CorpusError> {
    let anns: Vec<AnnotatedReport> = read_jsonl(path)?;
    reject_duplicates(anns.iter().map(|a| a.report_id.as_str()))?;
    Ok(anns)
}

pub fn write_annotations<W: Write>(w: W, anns: &[AnnotatedReport]) -> std::io::Result<()> {
    write_jsonl(w, anns)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ReportMismatch { annotation: String, doc: String },
    EmptySpan { index: usize, start: usize, end: usize },
    OutOfBounds { index: usize, end: usize, len: usize },
    RawTextMismatch { index: usize, expected: String, found: String },
    ItnWithoutNodule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ReportMismatch { annotation, doc } => {
                write!(f, "annotation for {annotation:?} checked against report {doc:?}")
            }
            Violation::EmptySpan { index, start, end } => {
                write!(f, "span {index}: start<end violated ({start}..{end})")
            }
            Violation::OutOfBounds { index, end, len } => {
                write!(f, "span {index}: end {end} beyond text length {len}")
            }
            Violation::RawTextMismatch { index, expected, found } => {
                write!(f, "span {index}: raw_text {found:?} but text has {expected:?}")
            }
            Violation::ItnWithoutNodule => f.write_str("label ITN without a nodular TypeOfFinding span"),
        }
    }
}

/// Checks span invariants and label/span consistency. Violations are
/// returned rather than raised.
pub fn validate_annotation(a: &AnnotatedReport, doc: &ReportDoc) -> Vec<Violation> {
    let mut out = Vec::new();
    if a.report_id != doc.report_id {
        out.push(Violation::ReportMismatch { annotation: a.report_id.clone(), doc: doc.report_id.clone() });
    }
    let len = char_len(&doc.text);
    for (index, s) in a.spans.iter().enumerate() {
        if s.start >= s.end {
            out.push(Violation::EmptySpan { index, start: s.start, end: s.end });
            continue;
        }
        if s.end > len {
            out.push(Violation::OutOfBounds { index, end: s.end, len });
            continue;
        }
        let expected = char_slice(&doc.text, s.start, s.end).unwrap_or_default();
        if expected != s.raw_text {
            out.push(Violation::RawTextMismatch {
                index,
                expected: expected.to_string(),
                found: s.raw_text.clone(),
            });
        }
    }
    if a.report_label == ReportLabel::Itn && !a.spans.iter().any(EntitySpan::is_nodular_finding) {
        out.push(Violation::ItnWithoutNodule);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgreementError {
    #[error("label vectors are empty")]
    Empty,
    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("agreement needs at least two annotators, got {0}")]
    TooFewAnnotators(usize),
}

/// Cohen's kappa between two raters over the same items.
pub fn cohen_kappa<L: Eq + Hash>(a: &[L], b: &[L]) -> Result<f64, AgreementError> {
    if a.len() != b.len() {
        return Err(AgreementError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(AgreementError::Empty);
    }
    let n = a.len() as f64;
    let mut agree = 0usize;
    let mut margin_a: HashMap<&L, usize> = HashMap::new();
    let mut margin_b: HashMap<&L, usize> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        if x == y {
            agree += 1;
        }
        *margin_a.entry(x).or_default() += 1;
        *margin_b.entry(y).or_default() += 1;
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = margin_a
        .iter()
        .map(|(label, &ca)| ca as f64 * *margin_b.get(label).unwrap_or(&0) as f64)
        .sum::<f64>()
        / (n * n);
    if (1.0 - p_e).abs() < f64::EPSILON {
        // Both raters used one shared label for every item.
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairKappa {
    pub first: String,
    pub second: String,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementGate {
    pub pass: bool,
    pub threshold: f64,
    pub min_kappa: f64,
    pub pairs: Vec<PairKappa>,
}

pub const DEFAULT_KAPPA_THRESHOLD: f64 = 0.8;

/// Pass iff every pairwise kappa strictly exceeds `threshold`.
pub fn agreement_gate<L: Eq + Hash>(
    annotations: &BTreeMap<String, Vec<L>>,
    threshold: f64,
) -> Result<AgreementGate, AgreementError> {
    if annotations.len() < 2 {
        return Err(AgreementError::TooFewAnnotators(annotations.len()));
    }
    let entries: Vec<_> = annotations.iter().collect();
    let mut pairs = Vec::new();
    for i in 0..entries.len() {
        for j in i + 1..entries.len() {
            let kappa = cohen_kappa(entries[i].1, entries[j].1)?;
            pairs.push(PairKappa { first: entries[i].0.clone(), second: entries[j].0.clone(), kappa });
        }
    }
    let min_kappa = pairs.iter().map(|p| p.kappa).fold(f64::INFINITY, f64::min);
    Ok(AgreementGate { pass: min_kappa > threshold, threshold, min_kappa, pairs })
}

/// Groups per-annotator report labels into aligned vectors over the report
/// ids every annotator labelled. Used to feed [`agreement_gate`] from raw
/// (pre-adjudication) annotation records.
pub fn label_vectors(records: &[AnnotatedReport]) -> BTreeMap<String, Vec<ReportLabel>> {
    let mut by_annotator: BTreeMap<String, BTreeMap<&str, ReportLabel>> = BTreeMap::new();
    for r in records {
        by_annotator.entry(r.annotator_id.clone()).or_default().insert(&r.report_id, r.report_label);
    }
    let mut common: Option<HashSet<&str>> = None;
    for labels in by_annotator.values() {
        let ids: HashSet<&str> = labels.keys().copied().collect();
        common = Some(match common {
            None => ids,
            Some(c) => c.intersection(&ids).copied().collect(),
        });
    }
    let mut ids: Vec<&str> = common.unwrap_or_default().into_iter().collect();
    ids.sort_unstable();
    by_annotator
        .into_iter()
        .map(|(ann, labels)| (ann, ids.iter().map(|id| labels[id]).collect()))
        .collect()
}
