//! L1-penalized logistic regression along a decreasing lambda grid.
//!
//! Non-intercept columns are standardized to mean 0 and variance 1 before
//! fitting; the objective is `-logL/n + lambda * sum |beta_j|` on that scale
//! with an unpenalized intercept. Each grid point is solved by proximal
//! Newton steps whose quadratic subproblem is minimized by coordinate descent
//! on the weighted Gram matrix, warm-started from the previous point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{DesignMatrix, INTERCEPT};
use crate::error::{Result, StatsError};
use crate::logistic::{as_vector, sigmoid, softplus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoOptions {
    /// Stop when every KKT condition holds to within this amount.
    pub kkt_tolerance: f64,
    pub max_newton: usize,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self { kkt_tolerance: 1e-8, max_newton: 100, max_sweeps: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    /// On the original column scale, intercept first.
    pub coefficients: Vec<f64>,
    /// On the standardized scale, intercept first.
    pub standardized: Vec<f64>,
    pub log_likelihood: f64,
    /// Nonzero coefficients, intercept included.
    pub k: usize,
    pub sbc: f64,
    pub kkt_violation: f64,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoPath {
    pub names: Vec<String>,
    pub n: usize,
    pub points: Vec<PathPoint>,
    /// Index of the point with the smallest SBC; the first wins ties.
    pub selected: usize,
}

impl LassoPath {
    pub fn selected_point(&self) -> &PathPoint {
        &self.points[self.selected]
    }

    /// Intercept plus every column with a nonzero coefficient at the
    /// selected point, in design order.
    pub fn selected_columns(&self) -> Vec<String> {
        let p = self.selected_point();
        self.names
            .iter()
            .zip(&p.standardized)
            .filter(|(n, b)| n.as_str() == INTERCEPT || **b != 0.0)
            .map(|(n, _)| n.clone())
            .collect()
    }
}

/// Standardized copy of a design with the intercept moved to column 0.
struct Standardized {
    z: DMatrix<f64>,
    /// Original column index for each standardized column.
    order: Vec<usize>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    /// Nonzero raw values of each row, by standardized column. Dummy
    /// columns make these far sparser than `z`.
    rows: Vec<Vec<(usize, f64)>>,
}

fn standardize(x: &DesignMatrix) -> Result<Standardized> {
    let icpt = x.column_index(INTERCEPT).ok_or_else(|| StatsError::UnknownColumn(INTERCEPT.into()))?;
    let n = x.nrows() as f64;
    let mut order = vec![icpt];
    order.extend((0..x.ncols()).filter(|&j| j != icpt));
    let mut mean = vec![0.0];
    let mut sd = vec![1.0];
    for &j in &order[1..] {
        let col = x.x.column(j);
        let m = col.sum() / n;
        let v = col.iter().map(|c| (c - m).powi(2)).sum::<f64>() / n;
        if !(v > 0.0) {
            return Err(StatsError::ConstantColumn(x.names[j].clone()));
        }
        mean.push(m);
        sd.push(v.sqrt());
    }
    let z = DMatrix::from_fn(x.nrows(), order.len(), |i, c| {
        if c == 0 {
            1.0
        } else {
            (x.x[(i, order[c])] - mean[c]) / sd[c]
        }
    });
    let rows = (0..x.nrows())
        .map(|i| {
            order
                .iter()
                .enumerate()
                .map(|(c, &j)| (c, if c == 0 { 1.0 } else { x.x[(i, j)] }))
                .filter(|(_, v)| *v != 0.0)
                .collect()
        })
        .collect();
    Ok(Standardized { z, order, mean, sd, rows })
}

/// Relative objective change treated as rounding noise in the line search.
const OBJECTIVE_SLACK: f64 = 1e-12;

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

struct Problem<'a> {
    s: &'a Standardized,
    z: &'a DMatrix<f64>,
    y: DVector<f64>,
    n: f64,
}

impl Problem<'_> {
    fn log_likelihood(&self, theta: &DVector<f64>) -> f64 {
        let eta = self.z * theta;
        eta.iter().zip(self.y.iter()).map(|(e, yi)| yi * e - softplus(*e)).sum()
    }

    fn objective(&self, theta: &DVector<f64>, lambda: f64) -> f64 {
        -self.log_likelihood(theta) / self.n + lambda * theta.iter().skip(1).map(|b| b.abs()).sum::<f64>()
    }

    /// (1/n) Z'(y - p).
    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let p = (self.z * theta).map(sigmoid);
        self.z.tr_mul(&(&self.y - p)) / self.n
    }

    fn kkt_violation(&self, theta: &DVector<f64>, lambda: f64) -> f64 {
        let g = self.gradient(theta);
        let mut worst = g[0].abs();
        for j in 1..theta.len() {
            let v = if theta[j] == 0.0 { (g[j].abs() - lambda).max(0.0) } else { (g[j] - lambda * theta[j].signum()).abs() };
            worst = worst.max(v);
        }
        worst
    }

    /// (1/n) Z'WZ, accumulated over the sparse raw rows and then centred
    /// and scaled.
    fn weighted_gram(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let k = self.s.order.len();
        let mut raw = DMatrix::<f64>::zeros(k, k);
        for (row, wi) in self.s.rows.iter().zip(w.iter()) {
            for (a, &(ja, va)) in row.iter().enumerate() {
                let wa = wi * va;
                for &(jb, vb) in &row[a..] {
                    raw[(ja, jb)] += wa * vb;
                }
            }
        }
        let total = raw[(0, 0)];
        let (m, sd) = (&self.s.mean, &self.s.sd);
        DMatrix::from_fn(k, k, |a, b| {
            let (lo, hi) = (a.min(b), a.max(b));
            let cross = raw[(lo, hi)] - m[a] * raw[(0, b)] - m[b] * raw[(0, a)] + m[a] * m[b] * total;
            cross / (sd[a] * sd[b] * self.n)
        })
    }

    /// Minimizes the penalized quadratic model around `theta` by coordinate
    /// descent on the weighted Gram matrix. The linear term is built from
    /// the exact gradient, so any rounding in the Gram only slows
    /// convergence and never moves the fixed point.
    fn newton_target(&self, theta: &DVector<f64>, lambda: f64, max_sweeps: usize) -> DVector<f64> {
        let p = (self.z * theta).map(sigmoid);
        let w = p.map(|pi| (pi * (1.0 - pi)).max(1e-5));
        let h = self.weighted_gram(&w);
        let b = self.z.tr_mul(&(&self.y - &p)) / self.n + &h * theta;

        let k = theta.len();
        let mut t = theta.clone();
        let mut q = &h * &t;
        for _ in 0..max_sweeps {
            let mut biggest = 0.0f64;
            for j in 0..k {
                let hjj = h[(j, j)];
                let c = b[j] - q[j] + hjj * t[j];
                let new = if j == 0 { c / hjj } else { soft_threshold(c, lambda) / hjj };
                let delta = new - t[j];
                if delta != 0.0 {
                    q.axpy(delta, &h.column(j), 1.0);
                    t[j] = new;
                    biggest = biggest.max(delta.abs() * hjj.sqrt());
                }
            }
            if biggest < 1e-14 {
                break;
            }
        }
        t
    }

    fn solve(&self, start: DVector<f64>, lambda: f64, opts: &LassoOptions) -> (DVector<f64>, usize, f64) {
        let mut theta = start;
        let mut f = self.objective(&theta, lambda);
        let mut steps = 0;
        let mut violation = self.kkt_violation(&theta, lambda);
        while violation > opts.kkt_tolerance && steps < opts.max_newton {
            steps += 1;
            let target = self.newton_target(&theta, lambda, opts.max_sweeps);
            let dir = &target - &theta;
            let mut s = 1.0;
            let mut next = target;
            let mut f_next = self.objective(&next, lambda);
            // Near the optimum the objective stops resolving improvements;
            // a step that leaves it flat to rounding is taken as is.
            let slack = OBJECTIVE_SLACK * f.abs().max(1.0);
            let mut halvings = 0;
            while f_next > f + slack && halvings < 50 {
                s *= 0.5;
                next = &theta + &dir * s;
                f_next = self.objective(&next, lambda);
                halvings += 1;
            }
            if f_next > f + slack {
                break;
            }
            theta = next;
            f = f_next;
            violation = self.kkt_violation(&theta, lambda);
        }
        (theta, steps, violation)
    }
}

fn check_y(x: &DesignMatrix, y: &[bool]) -> Result<()> {
    if y.len() != x.nrows() {
        return Err(StatsError::Dimension(format!("{} outcomes for {} rows", y.len(), x.nrows())));
    }
    let events = y.iter().filter(|v| **v).count();
    if events == 0 || events == y.len() {
        return Err(StatsError::SingleClass);
    }
    Ok(())
}

/// Smallest lambda at which every slope is zero.
pub fn lambda_max(x: &DesignMatrix, y: &[bool]) -> Result<f64> {
    check_y(x, y)?;
    let s = standardize(x)?;
    let yv = as_vector(y);
    let n = y.len() as f64;
    let ybar = yv.sum() / n;
    let g = s.z.tr_mul(&yv.add_scalar(-ybar)) / n;
    Ok(g.iter().skip(1).fold(0.0, |m, v| m.max(v.abs())))
}

/// `count` log-spaced values from `lambda_max` down to `lambda_max * min_ratio`.
pub fn lambda_grid(x: &DesignMatrix, y: &[bool], count: usize, min_ratio: f64) -> Result<Vec<f64>> {
    let top = lambda_max(x, y)?;
    if count == 1 {
        return Ok(vec![top]);
    }
    let step = min_ratio.ln() / (count - 1) as f64;
    Ok((0..count).map(|i| top * (step * i as f64).exp()).collect())
}

pub fn lasso_path(x: &DesignMatrix, y: &[bool], lambdas: &[f64]) -> Result<LassoPath> {
    lasso_path_with(x, y, lambdas, &LassoOptions::default())
}

pub fn lasso_path_with(x: &DesignMatrix, y: &[bool], lambdas: &[f64], opts: &LassoOptions) -> Result<LassoPath> {
    if lambdas.is_empty()
        || lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0))
        || lambdas.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(StatsError::LambdaGrid);
    }
    check_y(x, y)?;
    let s = standardize(x)?;
    let prob = Problem { s: &s, z: &s.z, y: as_vector(y), n: y.len() as f64 };
    let k = s.order.len();
    let ybar = prob.y.sum() / prob.n;
    let mut theta = DVector::zeros(k);
    theta[0] = (ybar / (1.0 - ybar)).ln();

    let mut points = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let (t, newton_steps, kkt_violation) = prob.solve(theta, lambda, opts);
        theta = t;
        let ll = prob.log_likelihood(&theta);
        let nonzero = 1 + theta.iter().skip(1).filter(|b| **b != 0.0).count();
        let mut standardized = vec![0.0; k];
        let mut coefficients = vec![0.0; k];
        let mut intercept = theta[0];
        for c in 1..k {
            let orig = s.order[c];
            standardized[orig] = theta[c];
            coefficients[orig] = theta[c] / s.sd[c];
            intercept -= theta[c] * s.mean[c] / s.sd[c];
        }
        standardized[s.order[0]] = theta[0];
        coefficients[s.order[0]] = intercept;
        points.push(PathPoint {
            lambda,
            coefficients,
            standardized,
            log_likelihood: ll,
            k: nonzero,
            sbc: -2.0 * ll + nonzero as f64 * prob.n.ln(),
            kkt_violation,
            newton_steps,
        });
    }
    let selected = argmin_first(points.iter().map(|p| p.sbc));
    Ok(LassoPath { names: x.names.clone(), n: y.len(), points, selected })
}

pub(crate) fn argmin_first(xs: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in xs.into_iter().enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Largest KKT violation of `point` for the problem it was fitted to,
/// recomputed from scratch.
pub fn kkt_violation(x: &DesignMatrix, y: &[bool], point: &PathPoint) -> Result<f64> {
    let s = standardize(x)?;
    let prob = Problem { s: &s, z: &s.z, y: as_vector(y), n: y.len() as f64 };
    let theta = DVector::from_iterator(s.order.len(), s.order.iter().map(|&j| point.standardized[j]));
    Ok(prob.kkt_violation(&theta, point.lambda))
}
