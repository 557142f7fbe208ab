use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use itf_core::corpus::{AnnotatedReport, EntitySpan};
use itf_core::eval::{score_classification, score_spans, EvalReport, MatchMode, SpanReport};
use itf_core::extract::FindingResult;
use itf_core::labels::ReportLabel;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{json_bytes, read_jsonl};
use crate::manifest::Run;
use crate::tables::{fixed, Table};
use crate::ConfigFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Exact,
    Overlap,
}

impl From<Mode> for MatchMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exact => MatchMode::Exact,
            Mode::Overlap => MatchMode::Overlap,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Gold annotations (JSONL of annotated reports).
    #[arg(long)]
    pub gold: PathBuf,
    /// Predictions: annotated reports or extraction findings.
    #[arg(long)]
    pub pred: PathBuf,
    /// Span matching used for the headline numbers; both are reported.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Settings {
    mode: MatchMode,
}

impl Default for Settings {
    fn default() -> Self {
        Self { mode: MatchMode::Overlap }
    }
}

/// Either record type carries a report label and spans.
#[derive(Deserialize)]
#[serde(untagged)]
enum Prediction {
    Annotated(AnnotatedReport),
    Finding(FindingResult),
}

type Labelled = (BTreeMap<String, ReportLabel>, BTreeMap<String, Vec<EntitySpan>>);

fn split(records: impl IntoIterator<Item = (String, ReportLabel, Vec<EntitySpan>)>) -> Labelled {
    let mut labels = BTreeMap::new();
    let mut spans = BTreeMap::new();
    for (id, label, s) in records {
        labels.insert(id.clone(), label);
        spans.insert(id, s);
    }
    (labels, spans)
}

fn read_predictions(path: &Path) -> Result<Labelled> {
    let records: Vec<Prediction> = read_jsonl(path)?;
    Ok(split(records.into_iter().map(|p| match p {
        Prediction::Annotated(a) => (a.report_id, a.report_label, a.spans),
        Prediction::Finding(f) => (f.report_id, f.label, f.spans),
    })))
}

fn span_rows(t: &mut Table, mode: &str, r: &SpanReport) {
    for c in &r.per_category {
        t.push(vec![
            mode.into(),
            c.category.to_string(),
            fixed(c.prf.precision, 4),
            fixed(c.prf.recall, 4),
            fixed(c.prf.f1, 4),
        ]);
    }
    t.push(vec![mode.into(), "micro".into(), fixed(r.micro.precision, 4), fixed(r.micro.recall, 4), fixed(r.micro.f1, 4)]);
    t.push(vec![
        mode.into(),
        "macro".into(),
        fixed(r.macro_avg.precision, 4),
        fixed(r.macro_avg.recall, 4),
        fixed(r.macro_avg.f1, 4),
    ]);
}

pub fn run(args: &Args, config: &ConfigFile, run: &mut Run) -> Result<()> {
    let mut s: Settings = config.section("eval")?;
    if let Some(m) = args.mode {
        s.mode = m.into();
    }
    run.set_config(&s);
    run.input(&args.gold)?;
    run.input(&args.pred)?;
    let gold: Vec<AnnotatedReport> = read_jsonl(&args.gold)?;
    let (gold_labels, gold_spans) = split(gold.into_iter().map(|a| (a.report_id, a.report_label, a.spans)));
    let (pred_labels, pred_spans) = read_predictions(&args.pred)?;
    let classification =
        score_classification(&gold_labels, &pred_labels).map_err(|e| CliError::data("eval", e))?;
    let report = EvalReport {
        primary_mode: s.mode,
        classification,
        spans_exact: score_spans(&gold_spans, &pred_spans, MatchMode::Exact),
        spans_overlap: score_spans(&gold_spans, &pred_spans, MatchMode::Overlap),
    };
    let mut t = Table::new(&["mode", "category", "precision", "recall", "f1"]);
    let c = &report.classification;
    t.push(vec![
        "report".into(),
        "binary_itf".into(),
        fixed(c.binary_itf.prf.precision, 4),
        fixed(c.binary_itf.prf.recall, 4),
        fixed(c.binary_itf.prf.f1, 4),
    ]);
    span_rows(&mut t, "exact", &report.spans_exact);
    span_rows(&mut t, "overlap", &report.spans_overlap);
    run.output(&args.out, &json_bytes(&report))?;
    run.output(&args.out.with_extension("txt"), t.to_text().as_bytes())?;
    Ok(())
}
