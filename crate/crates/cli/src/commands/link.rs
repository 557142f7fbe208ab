use std::collections::HashMap;
use std::path::PathBuf;

use itf_core::cascade::link_cohort;
use itf_core::cohort::{CohortRow, PatientTimeline};
use itf_core::extract::FindingResult;

use crate::commands::cohort::load_codes;
use crate::error::Result;
use crate::io::{csv_bytes, json_bytes, read_csv, read_jsonl};
use crate::manifest::Run;
use crate::ConfigFile;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub timelines: PathBuf,
    #[arg(long)]
    pub findings: PathBuf,
    #[arg(long)]
    pub codes: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &Args, _config: &ConfigFile, run: &mut Run) -> Result<()> {
    run.set_config(&serde_json::json!({}));
    for p in [&args.cohort, &args.timelines, &args.findings] {
        run.input(p)?;
    }
    let codes = load_codes(args.codes.as_ref(), run)?;
    let rows: Vec<CohortRow> = read_csv(&args.cohort)?;
    let timelines: Vec<PatientTimeline> = read_jsonl(&args.timelines)?;
    let findings: Vec<FindingResult> = read_jsonl(&args.findings)?;
    let timelines: HashMap<String, PatientTimeline> =
        timelines.into_iter().map(|t| (t.patient_id.clone(), t)).collect();
    let itf: HashMap<String, bool> = findings.iter().map(|f| (f.report_id.clone(), f.label.is_itf())).collect();
    let (outcomes, summary) = link_cohort(&rows, &timelines, &itf, &codes);
    run.output(&args.out, &csv_bytes(&outcomes)?)?;
    run.output(&args.out.with_extension("summary.json"), &json_bytes(&summary))?;
    Ok(())
}
