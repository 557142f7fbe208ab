//! Cell odds ratios from a model with two categorical main effects and their
//! interaction, relative to the reference cell, with delta-method intervals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::contingency::Z95;
use crate::design::{dummy_name, interaction_name};
use crate::logistic::ModelFit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionSpec {
    pub a: String,
    pub a_levels: Vec<String>,
    pub a_reference: String,
    pub b: String,
    pub b_levels: Vec<String>,
    pub b_reference: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellFlag {
    Reference,
    /// No observations in the cell; nothing is estimable.
    Empty,
    /// Every observation in the cell has the same outcome.
    NoVariation,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCount {
    pub n: usize,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellContrast {
    pub a_level: String,
    pub b_level: String,
    pub n: usize,
    pub events: usize,
    /// Odds ratio of the cell against the reference cell.
    pub odds_ratio: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// exp of the interaction coefficient: the cell odds ratio divided by
    /// the product of its two main-effect odds ratios. Absent on reference
    /// rows and columns.
    pub ratio_of_or: Option<f64>,
    pub ror_ci_low: Option<f64>,
    pub ror_ci_high: Option<f64>,
    pub flag: Option<CellFlag>,
}

/// Variance of the sum of the listed coefficients.
fn sum_variance(fit: &ModelFit, idx: &[usize]) -> f64 {
    idx.iter().flat_map(|&i| idx.iter().map(move |&j| (i, j))).map(|(i, j)| fit.covariance[(i, j)]).sum()
}

/// Contrasts for every (a, b) level pair. Coefficients absent from the fit
/// (for example removed by selection) count as zero. `counts` holds the
/// observations and events per cell.
pub fn interaction_contrasts(
    fit: &ModelFit,
    spec: &InteractionSpec,
    counts: &BTreeMap<(String, String), CellCount>,
) -> Vec<CellContrast> {
    let mut out = Vec::new();
    for la in &spec.a_levels {
        for lb in &spec.b_levels {
            let CellCount { n, events } = counts.get(&(la.clone(), lb.clone())).copied().unwrap_or_default();
            let mut cell = CellContrast {
                a_level: la.clone(),
                b_level: lb.clone(),
                n,
                events,
                odds_ratio: None,
                ci_low: None,
                ci_high: None,
                ratio_of_or: None,
                ror_ci_low: None,
                ror_ci_high: None,
                flag: None,
            };
            let a_ref = *la == spec.a_reference;
            let b_ref = *lb == spec.b_reference;
            if a_ref && b_ref {
                cell.odds_ratio = Some(1.0);
                cell.ci_low = Some(1.0);
                cell.ci_high = Some(1.0);
                cell.flag = Some(CellFlag::Reference);
                out.push(cell);
                continue;
            }
            if n == 0 || events == 0 || events == n {
                cell.flag = Some(if n == 0 { CellFlag::Empty } else { CellFlag::NoVariation });
                out.push(cell);
                continue;
            }
            let mut names = Vec::new();
            if !a_ref {
                names.push(dummy_name(&spec.a, la));
            }
            if !b_ref {
                names.push(dummy_name(&spec.b, lb));
            }
            let inter = (!a_ref && !b_ref).then(|| interaction_name(&spec.a, la, &spec.b, lb));
            names.extend(inter.clone());
            let idx: Vec<usize> = names.iter().filter_map(|nm| fit.index(nm)).collect();
            let est: f64 = idx.iter().map(|&j| fit.coefficients[j]).sum();
            let se = sum_variance(fit, &idx).sqrt();
            cell.odds_ratio = Some(est.exp());
            cell.ci_low = Some((est - Z95 * se).exp());
            cell.ci_high = Some((est + Z95 * se).exp());
            if let Some(inter) = inter {
                let (b, s) = match fit.index(&inter) {
                    Some(j) => (fit.coefficients[j], fit.std_errors[j]),
                    None => (0.0, 0.0),
                };
                cell.ratio_of_or = Some(b.exp());
                cell.ror_ci_low = Some((b - Z95 * s).exp());
                cell.ror_ci_high = Some((b + Z95 * s).exp());
            }
            out.push(cell);
        }
    }
    out
}

/// Observations and events per (a, b) cell.
pub fn cell_counts<S: AsRef<str>, T: AsRef<str>>(a: &[S], b: &[T], y: &[bool]) -> BTreeMap<(String, String), CellCount> {
    let mut m: BTreeMap<(String, String), CellCount> = BTreeMap::new();
    for ((p, q), &event) in a.iter().zip(b).zip(y) {
        let c = m.entry((p.as_ref().to_string(), q.as_ref().to_string())).or_default();
        c.n += 1;
        c.events += event as usize;
    }
    m
}
