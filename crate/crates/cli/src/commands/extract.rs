use std::path::{Path, PathBuf};

use itf_core::corpus::AnnotatedReport;
use itf_core::detect::{lexicon_backend, CompiledLexicon, Lexicon};
use itf_core::extract::Extractor;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::jsonl_bytes;
use crate::manifest::Run;
use crate::ConfigFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Lexicon,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum)]
    pub backend: Option<Backend>,
    /// JSON lexicon replacing the built-in term lists.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Findings file; predictions and warnings are written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Settings {
    backend: Backend,
    lexicon: Option<PathBuf>,
}

pub const ANNOTATOR_ID: &str = "lexicon";

/// `findings.jsonl` becomes `findings.<suffix>.jsonl`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}.jsonl"))
}

pub fn run(args: &Args, config: &ConfigFile, run: &mut Run) -> Result<()> {
    let mut s: Settings = config.section("extract")?;
    if let Some(b) = args.backend {
        s.backend = b;
    }
    if let Some(l) = &args.lexicon {
        s.lexicon = Some(l.clone());
    }
    run.set_config(&s);
    run.input(&args.corpus)?;
    let lexicon = match &s.lexicon {
        Some(path) => {
            run.input(path)?;
            Lexicon::from_file(path).map_err(|e| CliError::data(path.display().to_string(), e))?
        }
        None => Lexicon::default(),
    };
    let lex_err = |e| CliError::data("lexicon", e);
    let backend = match s.backend {
        Backend::Lexicon => lexicon_backend(lexicon.clone()).map_err(lex_err)?,
    };
    let extractor = Extractor::new(CompiledLexicon::new(lexicon).map_err(lex_err)?);
    let docs = crate::io::read_jsonl(&args.corpus)?;
    let results: Vec<_> = docs
        .par_iter()
        .map(|doc| {
            let cls = itf_core::detect::classify_report(doc, &backend, extractor.rules());
            extractor.extract(doc, &cls)
        })
        .collect();
    let mut findings = Vec::with_capacity(results.len());
    let mut warnings = Vec::new();
    for (f, w) in results {
        findings.push(f);
        warnings.extend(w);
    }
    let predictions: Vec<AnnotatedReport> = findings
        .iter()
        .map(|f| AnnotatedReport {
            report_id: f.report_id.clone(),
            annotator_id: ANNOTATOR_ID.to_string(),
            report_label: f.label,
            spans: f.spans.clone(),
        })
        .collect();
    run.output(&args.out, &jsonl_bytes(&findings))?;
    run.output(&sibling(&args.out, "predictions"), &jsonl_bytes(&predictions))?;
    run.output(&sibling(&args.out, "warnings"), &jsonl_bytes(&warnings))?;
    Ok(())
}
