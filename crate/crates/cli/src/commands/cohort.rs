use std::collections::HashMap;
use std::path::PathBuf;

use itf_core::codes::CodeTable;
use itf_core::cohort::{build_cohort, PatientTimeline};
use itf_core::corpus::ReportDoc;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{csv_bytes, json_bytes, read_jsonl};
use crate::manifest::Run;
use crate::ConfigFile;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub timelines: PathBuf,
    /// Code table CSV; the built-in table when omitted.
    #[arg(long)]
    pub codes: Option<PathBuf>,
    /// Seed for the choice among same-day qualifying studies.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Corpus supplying modality and body group of each index study.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Settings {
    seed: u64,
}

pub fn load_codes(path: Option<&PathBuf>, run: &mut Run) -> Result<CodeTable> {
    match path {
        Some(p) => {
            run.input(p)?;
            CodeTable::from_file(p).map_err(|e| CliError::data(p.display().to_string(), e))
        }
        None => Ok(CodeTable::default()),
    }
}

pub fn run(args: &Args, config: &ConfigFile, run: &mut Run) -> Result<()> {
    let mut s: Settings = config.section("cohort")?;
    if let Some(seed) = args.seed {
        s.seed = seed;
    }
    run.set_config(&s);
    run.set_seed(s.seed);
    run.input(&args.timelines)?;
    let codes = load_codes(args.codes.as_ref(), run)?;
    let reports = match &args.corpus {
        Some(p) => {
            run.input(p)?;
            let docs: Vec<ReportDoc> = read_jsonl(p)?;
            Some(docs.into_iter().map(|d| (d.report_id.clone(), d)).collect::<HashMap<_, _>>())
        }
        None => None,
    };
    let timelines: Vec<PatientTimeline> = read_jsonl(&args.timelines)?;
    for t in &timelines {
        t.validate().map_err(|e| CliError::data(format!("timeline {}", t.patient_id), e))?;
    }
    let (rows, summary) = build_cohort(&timelines, &codes, s.seed, reports.as_ref());
    run.output(&args.out, &csv_bytes(&rows)?)?;
    run.output(&args.out.with_extension("summary.json"), &json_bytes(&summary))?;
    Ok(())
}
