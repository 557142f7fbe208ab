use std::path::PathBuf;

use itf_core::synthgen::{self, GenConfig};

use crate::error::{CliError, Result};
use crate::io::{json_bytes, jsonl_bytes};
use crate::manifest::Run;
use crate::{ConfigFile, OUT_DIR_ENV};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of patients to generate.
    #[arg(long)]
    pub patients: Option<usize>,
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: PathBuf,
}

pub fn run(args: &Args, config: &ConfigFile, run: &mut Run) -> Result<()> {
    let mut cfg: GenConfig = config.section("synth")?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.patients {
        cfg.n_patients = n;
    }
    run.set_config(&cfg);
    run.set_seed(cfg.seed);
    let data = synthgen::generate(&cfg).map_err(|e| CliError::data("synth config", e))?;
    let out = &args.out;
    run.output(&out.join("corpus.jsonl"), &jsonl_bytes(&data.reports))?;
    run.output(&out.join("gold.jsonl"), &jsonl_bytes(&data.gold))?;
    run.output(&out.join("timelines.jsonl"), &jsonl_bytes(&data.timelines))?;
    run.output(&out.join("truth.jsonl"), &jsonl_bytes(&data.truth))?;
    run.output(&out.join("calibration.json"), &json_bytes(&synthgen::calibration(&data)))?;
    Ok(())
}
