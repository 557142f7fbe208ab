//! Cohort-level analyses behind `analyze` and `report`: univariate odds
//! ratios, the imaging feature distribution, cascade outcome odds ratios and
//! the multivariable ITF model.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Display;

use itf_core::cascade::CascadeOutcomes;
use itf_core::cohort::{CohortRow, DEMOGRAPHIC_KEYS};
use itf_core::extract::{
    Attenuation, Density, Enhancement, FindingResult, Location, MetabolicActivity, MetabolicDistribution,
    Recommendation, SizeBin,
};
use itf_core::labels::{BodyGroup, Modality, ReportLabel};
use itf_stats::{
    cell_counts, deletion_change, diagnose, interaction_contrasts, lambda_grid, lasso_path_with, logistic_fit_with,
    lr_test, odds_ratio, CellContrast, ContingencyTable, DesignBuilder, DesignMatrix, Diagnostics, FitOptions,
    CellCount, InteractionSpec, LassoOptions, LassoPath, LrTest, ModelFit, OddsRatio, StatsError, INTERCEPT,
};
use itf_stats::design::{dummy_name, interaction_name};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::tables::{fixed, opt_fixed, or_display, percent, Table};

pub const SEX: &str = "sex";
pub const AGE: &str = "age_per_5y";
pub const BMI: &str = "bmi_per_5";
pub const SPECIALTY: &str = "specialty";
pub const MODALITY: &str = "modality";
pub const BODY: &str = "body_group";

pub const REF_SEX: &str = "Male";
pub const REF_SPECIALTY: &str = "Emergency Medicine";
pub const REF_MODALITY: &str = "CT";
pub const REF_BODY: &str = "Chest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Points on the LASSO lambda grid.
    pub lambda_count: usize,
    /// Smallest lambda as a fraction of the largest.
    pub lambda_min_ratio: f64,
    pub hl_groups: usize,
    pub cook_threshold: f64,
    /// Add 0.5 to every cell of a 2x2 table with a zero count instead of
    /// leaving its odds ratio undefined.
    pub haldane: bool,
    pub fit: FitOptions,
    pub lasso: LassoOptions,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            lambda_count: 100,
            lambda_min_ratio: 1e-4,
            hl_groups: 10,
            cook_threshold: 0.5,
            haldane: false,
            fit: FitOptions::default(),
            lasso: LassoOptions::default(),
        }
    }
}

/// A linked patient with its cohort row and, when present, the finding on
/// its index report.
#[derive(Debug, Clone, Copy)]
pub struct Subject<'a> {
    pub row: &'a CohortRow,
    pub outcome: &'a CascadeOutcomes,
    pub finding: Option<&'a FindingResult>,
}

impl Subject<'_> {
    pub fn itf(&self) -> bool {
        self.outcome.had_itf
    }
}

/// Joins outcomes to their cohort rows and index findings. Every outcome
/// must have a cohort row.
pub fn join<'a>(
    rows: &'a [CohortRow],
    outcomes: &'a [CascadeOutcomes],
    findings: &'a [FindingResult],
) -> Result<Vec<Subject<'a>>> {
    let by_patient: HashMap<&str, &CohortRow> = rows.iter().map(|r| (r.patient_id.as_str(), r)).collect();
    let by_report: HashMap<&str, &FindingResult> = findings.iter().map(|f| (f.report_id.as_str(), f)).collect();
    outcomes
        .iter()
        .map(|o| {
            let row = by_patient
                .get(o.patient_id.as_str())
                .ok_or_else(|| CliError::data("outcomes", format!("patient {:?} is not in the cohort", o.patient_id)))?;
            let finding = row.index_report_id.as_deref().and_then(|id| by_report.get(id).copied());
            Ok(Subject { row, outcome: o, finding })
        })
        .collect()
}

/// One line of the shareable aggregate behind tables 1 and 3. 2x2 rows
/// carry `a` (exposed with event), `b` (exposed without), `c` (reference
/// with event) and `d` (reference without). Rows from a univariate
/// logistic fit carry the ITF and no-ITF counts in `a` and `b` and the
/// estimate in `log_or` and `se`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub table: String,
    pub variable: String,
    pub level: String,
    pub reference: String,
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
    pub log_or: Option<f64>,
    pub se: Option<f64>,
}

pub const TABLE1: &str = "table1";
pub const TABLE3: &str = "table3";

impl CountRow {
    fn two_by_two(table: &str, variable: &str, level: &str, reference: &str, t: ContingencyTable) -> Self {
        Self {
            table: table.to_string(),
            variable: variable.to_string(),
            level: level.to_string(),
            reference: reference.to_string(),
            a: t.a,
            b: t.b,
            c: t.c,
            d: t.d,
            log_or: None,
            se: None,
        }
    }

    fn estimate(&self, haldane: bool) -> std::result::Result<OddsRatio, StatsError> {
        match (self.log_or, self.se) {
            (Some(l), Some(s)) => Ok(OddsRatio::from_log(l, s)),
            _ => odds_ratio(&ContingencyTable::new(self.a, self.b, self.c, self.d), haldane),
        }
    }

    fn is_logistic(&self) -> bool {
        self.log_or.is_some()
    }
}

/// Level-vs-reference rows for one categorical variable. Missing values are
/// skipped. Without an explicit reference the most frequent level is used,
/// ties going to the alphabetically first.
fn categorical_rows(variable: &str, values: &[(Option<String>, bool)], reference: Option<&str>) -> Vec<CountRow> {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for (v, _) in values {
        if let Some(v) = v {
            *freq.entry(v.as_str()).or_default() += 1;
        }
    }
    let reference = match reference {
        Some(r) => r,
        None => match freq.iter().max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(x.0))) {
            Some((r, _)) => r,
            None => return Vec::new(),
        },
    };
    if !freq.contains_key(reference) {
        return Vec::new();
    }
    let (mut c, mut d) = (0, 0);
    for (v, itf) in values {
        if v.as_deref() == Some(reference) {
            if *itf {
                c += 1
            } else {
                d += 1
            }
        }
    }
    freq.keys()
        .filter(|l| **l != reference)
        .map(|level| {
            let a = values.iter().filter(|(v, itf)| v.as_deref() == Some(*level) && *itf).count() as u64;
            let b = values.iter().filter(|(v, itf)| v.as_deref() == Some(*level) && !*itf).count() as u64;
            CountRow::two_by_two(TABLE1, variable, level, reference, ContingencyTable::new(a, b, c, d))
        })
        .collect()
}

/// Univariate logistic row for a continuous predictor; missing values are
/// skipped. The estimate is absent when the fit fails.
fn continuous_row(variable: &str, values: &[(Option<f64>, bool)], increment: f64, opts: &FitOptions) -> CountRow {
    let kept: Vec<(f64, bool)> = values.iter().filter_map(|(v, y)| v.map(|v| (v, *y))).collect();
    let x: Vec<f64> = kept.iter().map(|(v, _)| *v).collect();
    let y: Vec<bool> = kept.iter().map(|(_, y)| *y).collect();
    let a = y.iter().filter(|v| **v).count() as u64;
    let mut row = CountRow {
        table: TABLE1.to_string(),
        variable: variable.to_string(),
        level: String::new(),
        reference: String::new(),
        a,
        b: y.len() as u64 - a,
        c: 0,
        d: 0,
        log_or: None,
        se: None,
    };
    let fit = DesignBuilder::new(x.len())
        .continuous(variable, &x, increment)
        .map(DesignBuilder::build)
        .and_then(|design| logistic_fit_with(&design, &y, opts));
    if let Ok(fit) = fit {
        row.log_or = Some(fit.coefficients[1]);
        row.se = Some(fit.std_errors[1]);
    }
    row
}

/// Univariate ITF associations for every baseline variable.
pub fn table1_counts(subjects: &[Subject], opts: &FitOptions) -> Vec<CountRow> {
    let cat = |f: &dyn Fn(&CohortRow) -> Option<String>| -> Vec<(Option<String>, bool)> {
        subjects.iter().map(|s| (f(s.row), s.itf())).collect()
    };
    let num = |f: &dyn Fn(&CohortRow) -> Option<f64>| -> Vec<(Option<f64>, bool)> {
        subjects.iter().map(|s| (f(s.row), s.itf())).collect()
    };
    let mut rows = Vec::new();
    rows.extend(categorical_rows(SEX, &cat(&|r| Some(r.sex.to_string())), Some(REF_SEX)));
    rows.push(continuous_row(AGE, &num(&|r| Some(r.age_years as f64)), 5.0, opts));
    rows.push(continuous_row(BMI, &num(&|r| r.bmi), 5.0, opts));
    rows.extend(categorical_rows(SPECIALTY, &cat(&|r| r.specialty.clone()), Some(REF_SPECIALTY)));
    rows.extend(categorical_rows(MODALITY, &cat(&|r| r.modality.map(|m| m.to_string())), Some(REF_MODALITY)));
    rows.extend(categorical_rows(BODY, &cat(&|r| r.body_group.map(|b| b.to_string())), Some(REF_BODY)));
    rows.push(continuous_row("charlson_count", &num(&|r| Some(r.charlson_count as f64)), 1.0, opts));
    for key in DEMOGRAPHIC_KEYS {
        rows.extend(categorical_rows(key, &cat(&|r| r.demographic(key).map(str::to_string)), None));
    }
    rows
}

pub const OUTCOMES: [&str; 6] =
    ["Ultrasound", "Thyroid nodule", "Thyroid biopsy", "Partial thyroidectomy", "Total thyroidectomy", "Thyroid cancer"];

fn outcome_flags(o: &CascadeOutcomes) -> [bool; 6] {
    [
        o.ultrasound_date.is_some(),
        o.nodule_dx,
        o.biopsy,
        o.partial_thyroidectomy,
        o.total_thyroidectomy,
        o.cancer_confirmed,
    ]
}

/// Cascade outcomes, ITF against no ITF.
pub fn table3_counts(subjects: &[Subject]) -> Vec<CountRow> {
    OUTCOMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let t = ContingencyTable::from_pairs(subjects.iter().map(|s| (s.itf(), outcome_flags(s.outcome)[k])));
            CountRow::two_by_two(TABLE3, name, "", "", t)
        })
        .collect()
}

const OR_COLUMNS: [&str; 4] = ["odds_ratio", "ci_low", "ci_high", "display"];

fn or_cells(row: &CountRow, haldane: bool, places: usize) -> [String; 4] {
    match row.estimate(haldane) {
        Ok(or) => [
            fixed(or.estimate, 4),
            fixed(or.ci_low, 4),
            fixed(or.ci_high, 4),
            or_display(or.estimate, or.ci_low, or.ci_high, places),
        ],
        Err(_) => [String::new(), String::new(), String::new(), "NA".to_string()],
    }
}

/// Univariate odds ratios; a reference row precedes the first level of each
/// categorical variable. `itf_rate` is the ITF percentage within the level.
pub fn render_table1(rows: &[CountRow], haldane: bool) -> Table {
    let mut header = vec!["variable", "level", "itf_n", "no_itf_n", "itf_rate"];
    header.extend(OR_COLUMNS);
    let mut t = Table::new(&header);
    let mut seen = BTreeSet::new();
    for r in rows.iter().filter(|r| r.table == TABLE1) {
        if !r.is_logistic() && !r.reference.is_empty() && seen.insert(r.variable.clone()) {
            let total = (r.c + r.d) as usize;
            t.push(vec![
                r.variable.clone(),
                r.reference.clone(),
                r.c.to_string(),
                r.d.to_string(),
                percent(r.c as usize, total),
                fixed(1.0, 4),
                String::new(),
                String::new(),
                "Ref".to_string(),
            ]);
        }
        let rate = if r.is_logistic() { String::new() } else { percent(r.a as usize, (r.a + r.b) as usize) };
        let mut cells = vec![r.variable.clone(), r.level.clone(), r.a.to_string(), r.b.to_string(), rate];
        cells.extend(or_cells(r, haldane, 2));
        t.push(cells);
    }
    t
}

/// Outcome odds ratios, ITF against no ITF, with the share of each group
/// that had the outcome.
pub fn render_table3(rows: &[CountRow], haldane: bool) -> Table {
    let mut header =
        vec!["outcome", "no_itf_events", "no_itf_total", "no_itf_pct", "itf_events", "itf_total", "itf_pct"];
    header.extend(OR_COLUMNS);
    let mut t = Table::new(&header);
    for r in rows.iter().filter(|r| r.table == TABLE3) {
        let (itf_n, no_n) = ((r.a + r.b) as usize, (r.c + r.d) as usize);
        let mut cells = vec![
            r.variable.clone(),
            r.c.to_string(),
            no_n.to_string(),
            percent(r.c as usize, no_n),
            r.a.to_string(),
            itf_n.to_string(),
            percent(r.a as usize, itf_n),
        ];
        cells.extend(or_cells(r, haldane, 1));
        t.push(cells);
    }
    t
}

struct FeatureTable<'a> {
    table: Table,
    findings: &'a [&'a FindingResult],
}

impl FeatureTable<'_> {
    fn row(&mut self, feature: &str, level: &str, n: usize, of: usize, value: String) {
        self.table.push(vec![feature.into(), level.into(), n.to_string(), percent(n, of), value]);
    }

    fn categorical<T: Copy + PartialEq + Display>(
        &mut self,
        feature: &str,
        get: impl Fn(&FindingResult) -> Option<T>,
        levels: &[T],
    ) {
        let total = self.findings.len();
        let present: Vec<T> = self.findings.iter().filter_map(|f| get(f)).collect();
        self.row(feature, "", present.len(), total, String::new());
        for level in levels {
            let n = present.iter().filter(|v| *v == level).count();
            self.row(feature, &level.to_string(), n, present.len(), String::new());
        }
    }
}

/// Imaging features of nodular index findings. Feature rows give the share
/// of nodular findings reporting the feature; level rows give the share of
/// those reporting it.
pub fn table2(subjects: &[Subject]) -> Table {
    let findings: Vec<&FindingResult> =
        subjects.iter().filter_map(|s| s.finding).filter(|f| f.label == ReportLabel::Itn).collect();
    let mut t = FeatureTable { table: Table::new(&["feature", "level", "n", "pct", "value"]), findings: &findings };
    t.row("Nodular findings", "", findings.len(), findings.len(), String::new());
    t.categorical("Location", |f| f.location, Location::ALL);
    t.categorical("Recommendation", |f| f.recommendation, Recommendation::ALL);
    let sizes: Vec<f64> = findings.iter().filter_map(|f| f.size_cm).collect();
    t.row("Size", "", sizes.len(), findings.len(), String::new());
    if !sizes.is_empty() {
        let n = sizes.len() as f64;
        let mean = sizes.iter().sum::<f64>() / n;
        let sd = if sizes.len() > 1 {
            (sizes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        t.table.push(vec!["Size".into(), "Mean (SD)".into(), String::new(), String::new(), format!("{mean:.1} ({sd:.1})")]);
    }
    let bins: Vec<SizeBin> = findings.iter().filter_map(|f| f.size_bin).collect();
    for bin in SizeBin::ALL {
        let n = bins.iter().filter(|b| *b == bin).count();
        t.row("Size", bin.as_str(), n, bins.len(), String::new());
    }
    t.categorical("Density", |f| f.density, Density::ALL);
    t.categorical("Enhancement", |f| f.enhancement, Enhancement::ALL);
    t.categorical("Calcifications", |f| f.calcified.filter(|c| *c).map(|_| "Calcified"), &["Calcified"]);
    t.categorical("Attenuation", |f| f.attenuation, Attenuation::ALL);
    t.categorical("Metabolic activity", |f| f.metabolic_activity, MetabolicActivity::ALL);
    t.categorical("Metabolic distribution", |f| f.metabolic_distribution, MetabolicDistribution::ALL);
    t.table
}

/// Complete-case inputs of the multivariable model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelData {
    pub patient_ids: Vec<String>,
    pub y: Vec<bool>,
    pub sex: Vec<String>,
    pub age: Vec<f64>,
    pub bmi: Vec<f64>,
    pub specialty: Vec<String>,
    pub modality: Vec<String>,
    pub body: Vec<String>,
    /// Subjects dropped for a missing model variable.
    pub incomplete: usize,
}

pub fn model_data(subjects: &[Subject]) -> ModelData {
    let mut d = ModelData {
        patient_ids: Vec::new(),
        y: Vec::new(),
        sex: Vec::new(),
        age: Vec::new(),
        bmi: Vec::new(),
        specialty: Vec::new(),
        modality: Vec::new(),
        body: Vec::new(),
        incomplete: 0,
    };
    for s in subjects {
        let r = s.row;
        let (Some(bmi), Some(spec), Some(m), Some(b)) = (r.bmi, &r.specialty, r.modality, r.body_group) else {
            d.incomplete += 1;
            continue;
        };
        d.patient_ids.push(r.patient_id.clone());
        d.y.push(s.itf());
        d.sex.push(r.sex.to_string());
        d.age.push(r.age_years as f64);
        d.bmi.push(bmi);
        d.specialty.push(spec.clone());
        d.modality.push(m.to_string());
        d.body.push(b.to_string());
    }
    d
}

pub fn interaction_spec() -> InteractionSpec {
    InteractionSpec {
        a: MODALITY.into(),
        a_levels: Modality::ALL.iter().map(|m| m.to_string()).collect(),
        a_reference: REF_MODALITY.into(),
        b: BODY.into(),
        b_levels: BodyGroup::ALL.iter().map(|b| b.to_string()).collect(),
        b_reference: REF_BODY.into(),
    }
}

/// Full design: sex, age per 5 years, BMI per 5 units, specialty, modality,
/// body group and modality x body group. Indicator columns whose rows all
/// share one outcome cannot be estimated and are removed; their names are
/// returned alongside interaction cells never observed.
impl ModelData {
    fn subset(&self, keep: &[usize]) -> ModelData {
        fn pick<T: Clone>(v: &[T], keep: &[usize]) -> Vec<T> {
            keep.iter().map(|&i| v[i].clone()).collect()
        }
        ModelData {
            patient_ids: pick(&self.patient_ids, keep),
            y: pick(&self.y, keep),
            sex: pick(&self.sex, keep),
            age: pick(&self.age, keep),
            bmi: pick(&self.bmi, keep),
            specialty: pick(&self.specialty, keep),
            modality: pick(&self.modality, keep),
            body: pick(&self.body, keep),
            incomplete: self.incomplete,
        }
    }
}

/// Observed modality x body cells whose rows all share one outcome. Each
/// cell owns one parameter of the interaction model, so such a cell is
/// fitted perfectly only in the limit; its rows carry no information about
/// the other coefficients.
pub fn separated_cells(counts: &BTreeMap<(String, String), CellCount>) -> Vec<(String, String)> {
    counts.iter().filter(|(_, c)| c.n > 0 && (c.events == 0 || c.events == c.n)).map(|(k, _)| k.clone()).collect()
}

/// The column that carries a cell's own parameter: the interaction term, or
/// the main effect for a cell on the reference row or column.
fn cell_column(m: &str, b: &str) -> Option<String> {
    match (m == REF_MODALITY, b == REF_BODY) {
        (true, true) => None,
        (false, true) => Some(dummy_name(MODALITY, m)),
        (true, false) => Some(dummy_name(BODY, b)),
        (false, false) => Some(interaction_name(MODALITY, m, BODY, b)),
    }
}

/// Design of the full interaction model on the `keep` rows, with the
/// columns of `separated` cells removed, plus any other indicator whose
/// covered rows all share one outcome. Returns the design, the removed
/// columns and the cells with no observations.
pub fn full_design(
    d: &ModelData,
    keep: &[usize],
    separated: &[(String, String)],
) -> Result<(DesignMatrix, Vec<String>, Vec<String>)> {
    let stats = |e: StatsError| CliError::data("design", e);
    let builder = DesignBuilder::new(d.y.len())
        .categorical(SEX, &d.sex, REF_SEX)
        .and_then(|b| b.continuous(AGE, &d.age, 5.0))
        .and_then(|b| b.continuous(BMI, &d.bmi, 5.0))
        .and_then(|b| b.categorical(SPECIALTY, &d.specialty, REF_SPECIALTY))
        .and_then(|b| b.categorical(MODALITY, &d.modality, REF_MODALITY))
        .and_then(|b| b.categorical(BODY, &d.body, REF_BODY))
        .and_then(|b| b.interaction((MODALITY, &d.modality, REF_MODALITY), (BODY, &d.body, REF_BODY)))
        .map_err(stats)?;
    let unobserved = builder.dropped().to_vec();
    let x = builder.build().rows(keep);
    let y: Vec<bool> = keep.iter().map(|&i| d.y[i]).collect();
    let mut degenerate: Vec<String> =
        separated.iter().filter_map(|(m, b)| cell_column(m, b)).filter(|c| x.names.contains(c)).collect();
    for (j, name) in x.names.iter().enumerate() {
        if name == INTERCEPT || name == AGE || name == BMI || degenerate.contains(name) {
            continue;
        }
        let (mut n, mut events) = (0, 0);
        for (i, y) in y.iter().enumerate() {
            if x.x[(i, j)] != 0.0 {
                n += 1;
                events += *y as usize;
            }
        }
        if events == 0 || events == n {
            degenerate.push(name.clone());
        }
    }
    let names: Vec<&str> = degenerate.iter().map(String::as_str).collect();
    Ok((x.without(&names), degenerate, unobserved))
}

/// Once a modality or body group main effect is gone, the interaction
/// coefficients on its row or column hold whole cell effects, so they are
/// not reported as ratios of odds ratios.
fn mask_ratios(cells: &mut [CellContrast], removed: &[String]) {
    for c in cells {
        if removed.contains(&dummy_name(MODALITY, &c.a_level)) || removed.contains(&dummy_name(BODY, &c.b_level)) {
            c.ratio_of_or = None;
            c.ror_ci_low = None;
            c.ror_ci_high = None;
        }
    }
}

fn is_interaction(name: &str) -> bool {
    name.contains(':')
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub n_complete: usize,
    pub n_incomplete: usize,
    pub events: usize,
    /// Modality x body cells whose rows all share one outcome; their rows
    /// are left out of every model fit.
    pub separated_cells: Vec<String>,
    pub n_separated: usize,
    /// Columns removed for those cells, and indicators whose covered rows
    /// all share one outcome.
    pub degenerate_columns: Vec<String>,
    /// Modality x body group combinations with no observations.
    pub unobserved_cells: Vec<String>,
    pub selected_lambda: f64,
    pub selected_columns: Vec<String>,
    pub diagnostics: Diagnostics,
    /// Patients behind `diagnostics.cook_flags`.
    pub cook_flagged_patients: Vec<String>,
    /// Largest relative coefficient change when the flagged patients are
    /// removed; absent when nothing is flagged or the refit fails.
    pub deletion_max_relative_change: Option<f64>,
    /// Main effects against main effects plus the interaction, both
    /// unpenalized.
    pub interaction_lrt: LrTest,
}

#[derive(Debug, Clone)]
pub struct ModelResult {
    pub path: LassoPath,
    /// Unpenalized refit of the SBC-selected support.
    pub selected: ModelFit,
    pub full: ModelFit,
    pub main_effects: ModelFit,
    pub selected_cells: Vec<CellContrast>,
    pub full_cells: Vec<CellContrast>,
    pub diagnostics: ModelDiagnostics,
}

pub fn fit_models(all: &ModelData, cfg: &AnalysisConfig) -> Result<ModelResult> {
    let counts = cell_counts(&all.modality, &all.body, &all.y);
    let separated = separated_cells(&counts);
    if separated.iter().any(|(m, b)| m == REF_MODALITY && b == REF_BODY) {
        return Err(CliError::data("model", "reference cell has no outcome variation"));
    }
    let keep: Vec<usize> = (0..all.y.len())
        .filter(|&i| !separated.iter().any(|(m, b)| *m == all.modality[i] && *b == all.body[i]))
        .collect();
    let (x, degenerate, unobserved) = full_design(all, &keep, &separated)?;
    let d = &all.subset(&keep);
    let y = &d.y;
    let full = logistic_fit_with(&x, y, &cfg.fit).map_err(stats("full model"))?;
    let inter: Vec<&str> = x.names.iter().map(String::as_str).filter(|n| is_interaction(n)).collect();
    let xm = x.without(&inter);
    let main_effects = logistic_fit_with(&xm, y, &cfg.fit).map_err(stats("main-effects model"))?;
    let interaction_lrt = lr_test(&main_effects, &full).map_err(stats("interaction test"))?;

    let grid = lambda_grid(&x, y, cfg.lambda_count, cfg.lambda_min_ratio).map_err(stats("lambda grid"))?;
    let path = lasso_path_with(&x, y, &grid, &cfg.lasso).map_err(stats("lasso path"))?;
    let columns = path.selected_columns();
    let names: Vec<&str> = columns.iter().map(String::as_str).collect();
    let xs = x.select_named(&names).map_err(stats("selected design"))?;
    let selected = logistic_fit_with(&xs, y, &cfg.fit).map_err(stats("selected model"))?;
    let diagnostics = diagnose(&selected, &xs, y, cfg.hl_groups, cfg.cook_threshold).map_err(stats("diagnostics"))?;
    let deletion = if diagnostics.cook_flags.is_empty() {
        None
    } else {
        deletion_change(&selected, &xs, y, &diagnostics.cook_flags).ok()
    };

    let spec = interaction_spec();
    let mut selected_cells = interaction_contrasts(&selected, &spec, &counts);
    let mut full_cells = interaction_contrasts(&full, &spec, &counts);
    mask_ratios(&mut selected_cells, &degenerate);
    mask_ratios(&mut full_cells, &degenerate);
    Ok(ModelResult {
        selected_cells,
        full_cells,
        diagnostics: ModelDiagnostics {
            n_complete: all.y.len(),
            n_incomplete: all.incomplete,
            events: all.y.iter().filter(|v| **v).count(),
            separated_cells: separated.iter().map(|(m, b)| format!("{m}:{b}")).collect(),
            n_separated: all.y.len() - y.len(),
            degenerate_columns: degenerate,
            unobserved_cells: unobserved,
            selected_lambda: path.selected_point().lambda,
            selected_columns: columns,
            cook_flagged_patients: diagnostics.cook_flags.iter().map(|&i| d.patient_ids[i].clone()).collect(),
            diagnostics,
            deletion_max_relative_change: deletion,
            interaction_lrt,
        },
        path,
        selected,
        full,
        main_effects,
    })
}

fn stats(what: &'static str) -> impl Fn(StatsError) -> CliError {
    move |e| CliError::data(what, e)
}

fn sci(x: f64) -> String {
    format!("{x:.6e}")
}

/// Coefficient rows followed by modality x body group cell rows.
pub fn render_model(fit: &ModelFit, cells: &[CellContrast]) -> Table {
    let mut t = Table::new(&[
        "section",
        "term",
        "modality",
        "body_group",
        "n",
        "events",
        "estimate",
        "std_error",
        "p_value",
        "odds_ratio",
        "ci_low",
        "ci_high",
        "ratio_of_or",
        "ror_ci_low",
        "ror_ci_high",
        "flag",
    ]);
    for r in fit.table() {
        t.push(vec![
            "coefficient".into(),
            r.name,
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            fixed(r.estimate, 6),
            fixed(r.std_error, 6),
            sci(r.p_value),
            fixed(r.odds_ratio, 4),
            fixed(r.ci_low, 4),
            fixed(r.ci_high, 4),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ]);
    }
    for c in cells {
        t.push(vec![
            "cell".into(),
            String::new(),
            c.a_level.clone(),
            c.b_level.clone(),
            c.n.to_string(),
            c.events.to_string(),
            String::new(),
            String::new(),
            String::new(),
            opt_fixed(c.odds_ratio, 4),
            opt_fixed(c.ci_low, 4),
            opt_fixed(c.ci_high, 4),
            opt_fixed(c.ratio_of_or, 4),
            opt_fixed(c.ror_ci_low, 4),
            opt_fixed(c.ror_ci_high, 4),
            c.flag.map(|f| format!("{f:?}")).unwrap_or_default(),
        ]);
    }
    t
}

/// Point estimates and intervals of the selected model, on both scales.
pub fn render_forest(fit: &ModelFit) -> Table {
    let mut t = Table::new(&["term", "odds_ratio", "ci_low", "ci_high", "log_or", "log_ci_low", "log_ci_high"]);
    for r in fit.table().into_iter().filter(|r| r.name != INTERCEPT) {
        t.push(vec![
            r.name,
            fixed(r.odds_ratio, 4),
            fixed(r.ci_low, 4),
            fixed(r.ci_high, 4),
            fixed(r.estimate, 6),
            fixed(r.ci_low.ln(), 6),
            fixed(r.ci_high.ln(), 6),
        ]);
    }
    t
}

pub fn render_path(path: &LassoPath) -> Table {
    let mut t = Table::new(&["step", "lambda", "k", "log_likelihood", "sbc", "kkt_violation", "selected", "support"]);
    for (i, p) in path.points.iter().enumerate() {
        let support: Vec<&str> = path
            .names
            .iter()
            .zip(&p.standardized)
            .filter(|(n, b)| n.as_str() != INTERCEPT && **b != 0.0)
            .map(|(n, _)| n.as_str())
            .collect();
        t.push(vec![
            i.to_string(),
            sci(p.lambda),
            p.k.to_string(),
            fixed(p.log_likelihood, 6),
            fixed(p.sbc, 6),
            sci(p.kkt_violation),
            (i == path.selected).to_string(),
            support.join(";"),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(table: &str, variable: &str, level: &str, reference: &str, abcd: [u64; 4]) -> CountRow {
        let [a, b, c, d] = abcd;
        CountRow::two_by_two(table, variable, level, reference, ContingencyTable::new(a, b, c, d))
    }

    #[test]
    fn table3_rendering() {
        let rows = vec![row(TABLE3, "Thyroid biopsy", "", "", [555, 8522, 148, 106458])];
        let t = render_table3(&rows, false);
        assert_eq!(t.rows[0][1..7], ["148", "106606", "0.1", "555", "9077", "6.1"]);
        assert_eq!(t.rows[0][10], "46.8 (39.0, 56.2)");
    }

    #[test]
    fn table1_reference_rows() {
        let rows = vec![
            row(TABLE1, "modality", "MRI", "CT", [10, 90, 20, 80]),
            row(TABLE1, "modality", "PET", "CT", [30, 70, 20, 80]),
            row(TABLE1, "sex", "Female", "Male", [5860, 55353, 3208, 51219]),
        ];
        let t = render_table1(&rows, false);
        let levels: Vec<&str> = t.rows.iter().map(|r| r[1].as_str()).collect();
        assert_eq!(levels, ["CT", "MRI", "PET", "Male", "Female"]);
        assert_eq!(t.rows[0][8], "Ref");
        assert_eq!(t.rows[4][8], "1.69 (1.62, 1.77)");
    }

    #[test]
    fn zero_cell_is_na_unless_corrected() {
        let rows = vec![row(TABLE3, "x", "", "", [0, 10, 5, 10])];
        assert_eq!(render_table3(&rows, false).rows[0][10], "NA");
        assert_ne!(render_table3(&rows, true).rows[0][10], "NA");
    }

    #[test]
    fn categorical_reference_defaults_to_most_frequent() {
        let vals: Vec<(Option<String>, bool)> = [("b", true), ("b", false), ("a", true), ("c", false), ("b", true)]
            .iter()
            .map(|(v, y)| (Some(v.to_string()), *y))
            .chain([(None, true)])
            .collect();
        let rows = categorical_rows("v", &vals, None);
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.reference == "b" && r.c == 2 && r.d == 1));
    }

    fn cell_data(dead: (&str, &str)) -> ModelData {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut d = model_data(&[]);
        for i in 0..8000 {
            let m = Modality::ALL[i % Modality::ALL.len()].to_string();
            let b = BodyGroup::ALL[(i / 5) % BodyGroup::ALL.len()].to_string();
            let y = (m.as_str(), b.as_str()) != dead && r.random_bool(0.3);
            d.patient_ids.push(format!("P{i}"));
            d.y.push(y);
            d.sex.push(if r.random_bool(0.5) { "Female" } else { "Male" }.into());
            d.age.push(r.random_range(20.0..90.0));
            d.bmi.push(r.random_range(18.0..40.0));
            d.specialty.push(if r.random_bool(0.5) { REF_SPECIALTY } else { "Other" }.into());
            d.modality.push(m);
            d.body.push(b);
        }
        d
    }

    #[test]
    fn separated_reference_column_cell_is_left_out() {
        let d = cell_data(("Ultrasound", REF_BODY));
        let cfg = AnalysisConfig { lambda_count: 10, ..AnalysisConfig::default() };
        let res = fit_models(&d, &cfg).unwrap();
        let diag = &res.diagnostics;
        assert_eq!(diag.separated_cells, ["Ultrasound:Chest"]);
        assert_eq!(diag.n_separated, 400);
        assert_eq!(diag.degenerate_columns, ["modality=Ultrasound"]);
        let cell = |m: &str, b: &str| res.full_cells.iter().find(|c| c.a_level == m && c.b_level == b).unwrap();
        assert_eq!(cell("Ultrasound", "Chest").flag, Some(itf_stats::CellFlag::NoVariation));
        let neck = cell("Ultrasound", "Neck");
        assert!(neck.odds_ratio.is_some() && neck.ratio_of_or.is_none());
        assert!(cell("MRI", "Neck").ratio_of_or.is_some());
    }

    #[test]
    fn separated_interior_cell_drops_its_interaction() {
        let d = cell_data(("PET", "Head"));
        let res = fit_models(&d, &AnalysisConfig { lambda_count: 10, ..AnalysisConfig::default() }).unwrap();
        assert_eq!(res.diagnostics.degenerate_columns, ["modality=PET:body_group=Head"]);
        assert!(res.full_cells.iter().filter(|c| c.a_level == "PET" && c.b_level != "Head").all(|c| c.odds_ratio.is_some()));
        assert!(res.full.index("modality=PET").is_some());
    }
}
