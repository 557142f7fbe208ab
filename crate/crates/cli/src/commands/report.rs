use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analysis::{self, CountRow};
use crate::commands::analyze::emit;
use crate::error::Result;
use crate::io::read_csv;
use crate::manifest::Run;
use crate::{ConfigFile, OUT_DIR_ENV};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory holding `counts.csv`, as written by `analyze`.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Where to write the tables; defaults to the input directory.
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub haldane: bool,
}

impl Args {
    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| self.input.clone())
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Settings {
    haldane: bool,
}

pub fn run(args: &Args, config: &ConfigFile, run: &mut Run) -> Result<()> {
    let mut s: Settings = config.section("report")?;
    s.haldane |= args.haldane;
    run.set_config(&s);
    let counts_path = args.input.join("counts.csv");
    run.input(&counts_path)?;
    let counts: Vec<CountRow> = read_csv(&counts_path)?;
    let out = args.out_dir();
    emit(run, &out, "table1", &analysis::render_table1(&counts, s.haldane))?;
    emit(run, &out, "table3", &analysis::render_table3(&counts, s.haldane))?;
    Ok(())
}
