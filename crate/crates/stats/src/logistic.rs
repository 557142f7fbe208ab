//! Maximum-likelihood logistic regression by iteratively reweighted least
//! squares, with Wald standard errors from the inverse information.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::contingency::Z95;
use crate::design::{DesignMatrix, INTERCEPT};
use crate::error::{Result, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Relative change in log-likelihood below which IRLS stops.
    pub tolerance: f64,
    pub max_iter: usize,
    /// A coefficient beyond this magnitude while the likelihood is still
    /// rising is treated as separation.
    pub separation_limit: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iter: 50, separation_limit: 15.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub log_likelihood: f64,
    /// -2 log-likelihood; the saturated constant is zero for binary data.
    pub deviance: f64,
    pub n: usize,
    /// Number of estimated parameters, intercept included.
    pub k: usize,
    pub fitted: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
    pub odds_ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn as_vector(y: &[bool]) -> DVector<f64> {
    DVector::from_iterator(y.len(), y.iter().map(|&v| if v { 1.0 } else { 0.0 }))
}

pub fn log_likelihood(x: &DesignMatrix, y: &[bool], beta: &[f64]) -> f64 {
    let eta = &x.x * DVector::from_column_slice(beta);
    eta.iter().zip(y).map(|(e, &yi)| if yi { e - softplus(*e) } else { -softplus(*e) }).sum()
}

/// Gradient of the log-likelihood.
pub fn score(x: &DesignMatrix, y: &[bool], beta: &[f64]) -> Vec<f64> {
    let eta = &x.x * DVector::from_column_slice(beta);
    let resid = DVector::from_iterator(y.len(), eta.iter().zip(y).map(|(e, &yi)| (yi as u8 as f64) - sigmoid(*e)));
    (x.x.tr_mul(&resid)).iter().copied().collect()
}

/// X' W X.
pub(crate) fn weighted_gram(x: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut xw = x.clone();
    for mut col in xw.column_iter_mut() {
        for (v, wi) in col.iter_mut().zip(w) {
            *v *= wi.sqrt();
        }
    }
    xw.tr_mul(&xw)
}

/// Inverse of a symmetric positive-definite matrix, or a rank error when
/// its correlation form is numerically singular.
pub(crate) fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = m.nrows();
    let d: Vec<f64> = (0..k).map(|i| m[(i, i)]).collect();
    if d.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(StatsError::RankDeficient);
    }
    let s = DMatrix::from_fn(k, k, |i, j| m[(i, j)] / (d[i] * d[j]).sqrt());
    let chol = s.cholesky().ok_or(StatsError::RankDeficient)?;
    let l = chol.l();
    if (0..k).any(|i| l[(i, i)] * l[(i, i)] < 1e-12) {
        return Err(StatsError::RankDeficient);
    }
    let inv = chol.inverse();
    Ok(DMatrix::from_fn(k, k, |i, j| inv[(i, j)] / (d[i] * d[j]).sqrt()))
}

fn check_inputs(x: &DesignMatrix, y: &[bool]) -> Result<()> {
    let (n, k) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(StatsError::Dimension(format!("{} outcomes for {n} rows", y.len())));
    }
    if n <= k {
        return Err(StatsError::TooFewObservations { n, k });
    }
    let events = y.iter().filter(|v| **v).count();
    if events == 0 || events == n {
        return Err(StatsError::SingleClass);
    }
    for (j, name) in x.names.iter().enumerate() {
        if name == INTERCEPT {
            continue;
        }
        let col = x.x.column(j);
        if col.iter().all(|v| *v == col[0]) {
            return Err(StatsError::ConstantColumn(name.clone()));
        }
    }
    Ok(())
}

pub fn logistic_fit(x: &DesignMatrix, y: &[bool]) -> Result<ModelFit> {
    logistic_fit_with(x, y, &FitOptions::default())
}

pub fn logistic_fit_with(x: &DesignMatrix, y: &[bool], opts: &FitOptions) -> Result<ModelFit> {
    check_inputs(x, y)?;
    let (n, k) = (x.nrows(), x.ncols());
    let yv = as_vector(y);
    let events = yv.sum();
    let mut beta = DVector::zeros(k);
    if let Some(j) = x.column_index(INTERCEPT) {
        beta[j] = (events / (n as f64 - events)).ln();
    }
    let ll_of = |b: &DVector<f64>| {
        let eta = &x.x * b;
        eta.iter().zip(y).map(|(e, &yi)| if yi { e - softplus(*e) } else { -softplus(*e) }).sum::<f64>()
    };
    let mut ll = ll_of(&beta);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let eta = &x.x * &beta;
        let p: Vec<f64> = eta.iter().map(|e| sigmoid(*e)).collect();
        let w: Vec<f64> = p.iter().map(|pi| pi * (1.0 - pi)).collect();
        let resid = DVector::from_iterator(n, yv.iter().zip(&p).map(|(yi, pi)| yi - pi));
        let grad = x.x.tr_mul(&resid);
        let cov = spd_inverse(&weighted_gram(&x.x, &w))?;
        let step = &cov * &grad;

        let mut t = 1.0;
        let mut next = &beta + &step * t;
        let mut ll_next = ll_of(&next);
        let mut halvings = 0;
        while ll_next < ll - 1e-12 * ll.abs() && halvings < 40 {
            t *= 0.5;
            next = &beta + &step * t;
            ll_next = ll_of(&next);
            halvings += 1;
        }
        let rising = ll_next > ll;
        if rising {
            if let Some(j) = (0..k).find(|&j| next[j].abs() > opts.separation_limit) {
                return Err(StatsError::Separation(x.names[j].clone()));
            }
        }
        let rel = (ll_next - ll).abs() / ll_next.abs().max(1e-300);
        let moved = (&next - &beta).amax();
        beta = next;
        ll = ll_next;
        if rel < opts.tolerance {
            let g = x.x.tr_mul(&(&yv - (&x.x * &beta).map(sigmoid)));
            if g.amax() < 1e-8 || moved < 1e-13 {
                converged = true;
                break;
            }
        }
    }

    let eta = &x.x * &beta;
    let fitted: Vec<f64> = eta.iter().map(|e| sigmoid(*e)).collect();
    let w: Vec<f64> = fitted.iter().map(|pi| pi * (1.0 - pi)).collect();
    let covariance = spd_inverse(&weighted_gram(&x.x, &w))?;
    let std_errors = (0..k).map(|j| covariance[(j, j)].sqrt()).collect();
    Ok(ModelFit {
        names: x.names.clone(),
        coefficients: beta.iter().copied().collect(),
        std_errors,
        covariance,
        log_likelihood: ll,
        deviance: -2.0 * ll,
        n,
        k,
        fitted,
        iterations,
        converged,
    })
}

impl ModelFit {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.index(name).map(|j| self.coefficients[j])
    }

    /// Schwarz Bayesian criterion, -2 logL + k ln n.
    pub fn sbc(&self) -> f64 {
        self.deviance + self.k as f64 * (self.n as f64).ln()
    }

    /// Wald table with odds ratios and 95% intervals.
    pub fn table(&self) -> Vec<CoefRow> {
        let normal = Normal::standard();
        self.names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let (b, se) = (self.coefficients[j], self.std_errors[j]);
                let z = b / se;
                CoefRow {
                    name: name.clone(),
                    estimate: b,
                    std_error: se,
                    z,
                    p_value: 2.0 * normal.sf(z.abs()),
                    odds_ratio: b.exp(),
                    ci_low: (b - Z95 * se).exp(),
                    ci_high: (b + Z95 * se).exp(),
                }
            })
            .collect()
    }

    /// Diagonal of the weighted hat matrix W^1/2 X (X'WX)^-1 X' W^1/2.
    pub fn leverage(&self, x: &DesignMatrix) -> Vec<f64> {
        let m = &x.x * &self.covariance;
        (0..x.nrows())
            .map(|i| {
                let w = self.fitted[i] * (1.0 - self.fitted[i]);
                w * m.row(i).dot(&x.x.row(i))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contingency::{odds_ratio, ContingencyTable};
    use crate::design::DesignBuilder;

    pub(crate) fn expand(t: &ContingencyTable) -> (DesignMatrix, Vec<bool>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (count, exposed, event) in [(t.a, true, true), (t.b, true, false), (t.c, false, true), (t.d, false, false)] {
            for _ in 0..count {
                xs.push(exposed);
                ys.push(event);
            }
        }
        (DesignBuilder::new(xs.len()).binary("exposed", &xs).unwrap().build(), ys)
    }

    #[test]
    fn biopsy_two_by_two() {
        let t = ContingencyTable::new(555, 8522, 148, 106458);
        let (x, y) = expand(&t);
        let fit = logistic_fit(&x, &y).unwrap();
        let or = odds_ratio(&t, false).unwrap();
        assert!((fit.coefficients[1] - or.log_or).abs() < 1e-6);
        assert!((fit.std_errors[1] - or.se_log_or).abs() < 1e-6);
        assert!((fit.coefficients[1].exp() - 46.845).abs() < 1e-3);
        assert!(fit.converged);
    }

    #[test]
    fn intercept_only() {
        let y: Vec<bool> = (0..50).map(|i| i < 13).collect();
        let x = DesignBuilder::new(50).build();
        let fit = logistic_fit(&x, &y).unwrap();
        assert!((fit.coefficients[0] - (13.0f64 / 37.0).ln()).abs() < 1e-10);
    }

    #[test]
    fn separation_detected() {
        let xs: Vec<bool> = (0..40).map(|i| i % 3 == 0).collect();
        let x = DesignBuilder::new(40).binary("x", &xs).unwrap().build();
        assert!(matches!(logistic_fit(&x, &xs), Err(StatsError::Separation(_))));
    }

    #[test]
    fn rank_deficiency() {
        let a: Vec<f64> = (0..30).map(|i| (i % 7) as f64).collect();
        let y: Vec<bool> = (0..30).map(|i| i % 2 == 0).collect();
        let x = DesignBuilder::new(30).continuous("a", &a, 1.0).unwrap().continuous("b", &a, 0.5).unwrap().build();
        assert_eq!(logistic_fit(&x, &y).unwrap_err(), StatsError::RankDeficient);
    }

    #[test]
    fn input_checks() {
        let x = DesignBuilder::new(4).continuous("a", &[1.0, 2.0, 3.0, 4.0], 1.0).unwrap().build();
        assert_eq!(logistic_fit(&x, &[true; 4]).unwrap_err(), StatsError::SingleClass);
        assert!(matches!(logistic_fit(&x, &[true]), Err(StatsError::Dimension(_))));
        let c = DesignBuilder::new(4).continuous("c", &[2.0; 4], 1.0).unwrap().build();
        assert!(matches!(logistic_fit(&c, &[true, false, true, false]), Err(StatsError::ConstantColumn(_))));
        let small = DesignBuilder::new(2).continuous("a", &[1.0, 2.0], 1.0).unwrap().build();
        assert!(matches!(logistic_fit(&small, &[true, false]), Err(StatsError::TooFewObservations { .. })));
    }
}
