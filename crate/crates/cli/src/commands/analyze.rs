use std::path::{Path, PathBuf};

use itf_core::cascade::CascadeOutcomes;
use itf_core::cohort::CohortRow;
use itf_core::extract::FindingResult;

use crate::analysis::{self, AnalysisConfig};
use crate::error::Result;
use crate::io::{csv_bytes, json_bytes, read_csv, read_jsonl};
use crate::manifest::Run;
use crate::tables::Table;
use crate::{ConfigFile, OUT_DIR_ENV};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub outcomes: PathBuf,
    #[arg(long)]
    pub findings: PathBuf,
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: PathBuf,
}

/// Writes `name.csv` and its `name.txt` rendering.
pub fn emit(run: &mut Run, dir: &Path, name: &str, table: &Table) -> Result<()> {
    run.output(&dir.join(format!("{name}.csv")), &table.to_csv())?;
    run.output(&dir.join(format!("{name}.txt")), table.to_text().as_bytes())
}

pub fn run(args: &Args, config: &ConfigFile, run: &mut Run) -> Result<()> {
    let cfg: AnalysisConfig = config.section("analyze")?;
    run.set_config(&cfg);
    for p in [&args.cohort, &args.outcomes, &args.findings] {
        run.input(p)?;
    }
    let rows: Vec<CohortRow> = read_csv(&args.cohort)?;
    let outcomes: Vec<CascadeOutcomes> = read_csv(&args.outcomes)?;
    let findings: Vec<FindingResult> = read_jsonl(&args.findings)?;
    let subjects = analysis::join(&rows, &outcomes, &findings)?;

    let mut counts = analysis::table1_counts(&subjects, &cfg.fit);
    counts.extend(analysis::table3_counts(&subjects));
    let data = analysis::model_data(&subjects);
    let model = analysis::fit_models(&data, &cfg)?;

    let out = &args.out;
    run.output(&out.join("counts.csv"), &csv_bytes(&counts)?)?;
    emit(run, out, "table1", &analysis::render_table1(&counts, cfg.haldane))?;
    emit(run, out, "table2", &analysis::table2(&subjects))?;
    emit(run, out, "table3", &analysis::render_table3(&counts, cfg.haldane))?;
    emit(run, out, "model", &analysis::render_model(&model.selected, &model.selected_cells))?;
    emit(run, out, "model_full", &analysis::render_model(&model.full, &model.full_cells))?;
    emit(run, out, "lasso_path", &analysis::render_path(&model.path))?;
    emit(run, out, "forest", &analysis::render_forest(&model.selected))?;
    run.output(&out.join("diagnostics.json"), &json_bytes(&model.diagnostics))?;
    Ok(())
}
