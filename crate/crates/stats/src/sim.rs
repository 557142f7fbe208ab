//! Monte-Carlo harnesses with their own data generators, used to check the
//! estimators against known truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::contingency::{odds_ratio, ContingencyTable};
use crate::design::{DesignBuilder, DesignMatrix};
use crate::diagnostics::hosmer_lemeshow;
use crate::error::Result;
use crate::lasso::{kkt_violation, lambda_grid, lasso_path};
use crate::logistic::{logistic_fit, sigmoid};
use crate::lrt::lr_test;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Draws `y` from a logistic model with linear predictor `eta`.
fn outcomes(rng: &mut ChaCha8Rng, eta: &[f64]) -> Vec<bool> {
    eta.iter().map(|e| rng.random_bool(sigmoid(*e))).collect()
}

fn gaussian_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (DesignMatrix, Vec<Vec<f64>>) {
    let cols: Vec<Vec<f64>> = (0..p).map(|_| normals(rng, n)).collect();
    let mut b = DesignBuilder::new(n);
    for (j, c) in cols.iter().enumerate() {
        b = b.continuous(&format!("x{}", j + 1), c, 1.0).expect("length");
    }
    (b.build(), cols)
}

/// Expands a random all-positive 2x2 table into rows, fits a logistic
/// model on the exposure indicator and returns the absolute differences
/// from the closed-form log odds ratio and its Wald SE.
pub fn two_by_two_gap(seed: u64) -> Result<(f64, f64)> {
    let mut r = rng(seed);
    let t = ContingencyTable::new(
        r.random_range(1..400),
        r.random_range(1..400),
        r.random_range(1..400),
        r.random_range(1..400),
    );
    let or = odds_ratio(&t, false)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (count, exposed, event) in [(t.a, true, true), (t.b, true, false), (t.c, false, true), (t.d, false, false)] {
        for _ in 0..count {
            xs.push(exposed);
            ys.push(event);
        }
    }
    let x = DesignBuilder::new(xs.len()).binary("exposed", &xs)?.build();
    let fit = logistic_fit(&x, &ys)?;
    Ok(((fit.coefficients[1] - or.log_or).abs(), (fit.std_errors[1] - or.se_log_or).abs()))
}

/// Worst KKT violation over a 30-point path on a random instance with
/// a sparse true coefficient vector.
pub fn lasso_kkt_worst(seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let n = r.random_range(150..600);
    let p = r.random_range(3..12);
    let (x, cols) = gaussian_design(&mut r, n, p);
    let beta: Vec<f64> = (0..p).map(|_| if r.random_bool(0.5) { r.random_range(-1.5..1.5) } else { 0.0 }).collect();
    let eta: Vec<f64> = (0..n).map(|i| -0.3 + (0..p).map(|j| beta[j] * cols[j][i]).sum::<f64>()).collect();
    let y = outcomes(&mut r, &eta);
    let grid = lambda_grid(&x, &y, 30, 1e-3)?;
    let path = lasso_path(&x, &y, &grid)?;
    let mut worst = 0.0f64;
    for pt in &path.points {
        worst = worst.max(kkt_violation(&x, &y, pt)?);
    }
    Ok(worst)
}

pub const SUPPORT_N: usize = 2000;
pub const SUPPORT_P: usize = 10;
pub const SUPPORT_TRUE: [(usize, f64); 3] = [(0, 1.0), (3, -1.0), (7, 1.2)];

/// Support recovery on a well-conditioned design: n = 2000, 10 independent
/// standard-normal predictors, three with |beta| >= 1. Returns whether the
/// SBC-selected support contains the true one.
pub fn support_recovered(seed: u64) -> Result<bool> {
    let mut r = rng(seed);
    let (x, cols) = gaussian_design(&mut r, SUPPORT_N, SUPPORT_P);
    let eta: Vec<f64> =
        (0..SUPPORT_N).map(|i| -0.5 + SUPPORT_TRUE.iter().map(|(j, b)| b * cols[*j][i]).sum::<f64>()).collect();
    let y = outcomes(&mut r, &eta);
    let grid = lambda_grid(&x, &y, 50, 1e-3)?;
    let path = lasso_path(&x, &y, &grid)?;
    let chosen = path.selected_columns();
    Ok(SUPPORT_TRUE.iter().all(|(j, _)| chosen.contains(&format!("x{}", j + 1))))
}

/// Hosmer-Lemeshow p-value (10 groups) for a correctly specified model:
/// n = 1000, one standard-normal predictor.
pub fn hl_null_p(seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let n = 1000;
    let (x, cols) = gaussian_design(&mut r, n, 1);
    let eta: Vec<f64> = cols[0].iter().map(|v| -1.0 + v).collect();
    let y = outcomes(&mut r, &eta);
    let fit = logistic_fit(&x, &y)?;
    Ok(hosmer_lemeshow(&fit.fitted, &y, 10)?.p_value.expect("10 groups"))
}

/// Likelihood-ratio p-value for adding one pure-noise column to a correctly
/// specified model: n = 500.
pub fn lrt_null_p(seed: u64) -> Result<f64> {
    let mut r = rng(seed);
    let n = 500;
    let (x, cols) = gaussian_design(&mut r, n, 2);
    let eta: Vec<f64> = cols[0].iter().map(|v| -0.5 + 0.8 * v).collect();
    let y = outcomes(&mut r, &eta);
    let full = logistic_fit(&x, &y)?;
    let nested = logistic_fit(&x.without(&["x2"]), &y)?;
    Ok(lr_test(&nested, &full)?.p_value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harnesses_run() {
        let (a, b) = two_by_two_gap(1).unwrap();
        assert!(a < 1e-6 && b < 1e-6);
        assert!(lasso_kkt_worst(1).unwrap() <= 1e-6);
        assert!(support_recovered(1).unwrap());
        let p = hl_null_p(1).unwrap();
        assert!((0.0..=1.0).contains(&p));
        let p = lrt_null_p(1).unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}
