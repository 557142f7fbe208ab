//! Goodness of fit, discrimination and influence.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::design::DesignMatrix;
use crate::error::{Result, StatsError};
use crate::logistic::{logistic_fit, ModelFit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HlGroup {
    pub n: usize,
    pub observed: f64,
    pub expected: f64,
    pub max_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HosmerLemeshow {
    pub statistic: f64,
    pub df: usize,
    /// Absent when fewer than three groups leave no degrees of freedom.
    pub p_value: Option<f64>,
    pub groups: Vec<HlGroup>,
    /// Requested groups folded into a neighbour because an expected count
    /// fell below 1.
    pub merged: usize,
}

fn check_probabilities(p: &[f64], y: &[bool]) -> Result<()> {
    if p.len() != y.len() {
        return Err(StatsError::Dimension(format!("{} probabilities for {} outcomes", p.len(), y.len())));
    }
    if p.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
        return Err(StatsError::Probability);
    }
    Ok(())
}

/// Hosmer-Lemeshow test over `g` groups of risk. Observations are ordered
/// by fitted probability (stable, so ties keep input order) and cut into `g`
/// groups of near-equal size. A group whose expected events or non-events
/// fall below 1 is merged into its successor (the last into its
/// predecessor) until none remain.
pub fn hosmer_lemeshow(p: &[f64], y: &[bool], g: usize) -> Result<HosmerLemeshow> {
    check_probabilities(p, y)?;
    let n = p.len();
    if g < 2 || n < g {
        return Err(StatsError::TooFewGroups(g.min(n)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut groups: Vec<HlGroup> = (0..g)
        .map(|k| {
            let idx = &order[k * n / g..(k + 1) * n / g];
            HlGroup {
                n: idx.len(),
                observed: idx.iter().filter(|&&i| y[i]).count() as f64,
                expected: idx.iter().map(|&i| p[i]).sum(),
                max_probability: idx.iter().map(|&i| p[i]).fold(0.0, f64::max),
            }
        })
        .collect();
    let thin = |h: &HlGroup| h.expected < 1.0 || (h.n as f64 - h.expected) < 1.0;
    let mut merged = 0;
    while groups.len() > 1 {
        let Some(i) = groups.iter().position(thin) else { break };
        let j = if i + 1 < groups.len() { i + 1 } else { i - 1 };
        let (lo, hi) = (i.min(j), i.max(j));
        let h = groups.remove(hi);
        let l = &mut groups[lo];
        l.n += h.n;
        l.observed += h.observed;
        l.expected += h.expected;
        l.max_probability = l.max_probability.max(h.max_probability);
        merged += 1;
    }
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    let statistic: f64 = groups
        .iter()
        .map(|h| (h.observed - h.expected).powi(2) / (h.expected * (1.0 - h.expected / h.n as f64)))
        .sum();
    let df = groups.len() - 2;
    let p_value = (df > 0).then(|| ChiSquared::new(df as f64).expect("df > 0").sf(statistic));
    Ok(HosmerLemeshow { statistic, df, p_value, groups, merged })
}

/// Area under the ROC curve as the Mann-Whitney concordance probability,
/// ties counting one half.
pub fn auc(scores: &[f64], y: &[bool]) -> Result<f64> {
    if scores.len() != y.len() {
        return Err(StatsError::Dimension(format!("{} scores for {} outcomes", scores.len(), y.len())));
    }
    let pos = y.iter().filter(|v| **v).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(StatsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += midrank * order[i..=j].iter().filter(|&&k| y[k]).count() as f64;
        i = j + 1;
    }
    let (pos, neg) = (pos as f64, neg as f64);
    Ok((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

/// One-step Cook's distance for each observation:
/// `D_i = r_i^2 h_i / (k (1 - h_i)^2)` with Pearson residual `r_i` and
/// weighted-hat leverage `h_i`.
pub fn cooks_distance(fit: &ModelFit, x: &DesignMatrix, y: &[bool]) -> Result<Vec<f64>> {
    if x.nrows() != fit.n || y.len() != fit.n {
        return Err(StatsError::Dimension("design and outcomes must match the fit".into()));
    }
    let h = fit.leverage(x);
    Ok((0..fit.n)
        .map(|i| {
            let p = fit.fitted[i];
            let r2 = (y[i] as u8 as f64 - p).powi(2) / (p * (1.0 - p));
            r2 * h[i] / (fit.k as f64 * (1.0 - h[i]).powi(2))
        })
        .collect())
}

/// Indices whose Cook's distance exceeds `threshold`.
pub fn cooks_screen(fit: &ModelFit, x: &DesignMatrix, y: &[bool], threshold: f64) -> Result<Vec<usize>> {
    Ok(cooks_distance(fit, x, y)?.iter().enumerate().filter(|(_, d)| **d > threshold).map(|(i, _)| i).collect())
}

/// Largest relative coefficient change, over all coefficients, when the
/// listed observations are removed and the model is refitted.
pub fn deletion_change(fit: &ModelFit, x: &DesignMatrix, y: &[bool], drop: &[usize]) -> Result<f64> {
    let keep: Vec<usize> = (0..x.nrows()).filter(|i| !drop.contains(i)).collect();
    let ys: Vec<bool> = keep.iter().map(|&i| y[i]).collect();
    let refit = logistic_fit(&x.rows(&keep), &ys)?;
    Ok(fit
        .coefficients
        .iter()
        .zip(&refit.coefficients)
        .map(|(a, b)| ((b - a) / a).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub hosmer_lemeshow: HosmerLemeshow,
    pub auc: f64,
    pub cook_threshold: f64,
    pub cook_flags: Vec<usize>,
    pub max_cook: f64,
}

pub fn diagnose(fit: &ModelFit, x: &DesignMatrix, y: &[bool], groups: usize, cook_threshold: f64) -> Result<Diagnostics> {
    let d = cooks_distance(fit, x, y)?;
    Ok(Diagnostics {
        hosmer_lemeshow: hosmer_lemeshow(&fit.fitted, y, groups)?,
        auc: auc(&fit.fitted, y)?,
        cook_threshold,
        cook_flags: d.iter().enumerate().filter(|(_, v)| **v > cook_threshold).map(|(i, _)| i).collect(),
        max_cook: d.iter().copied().fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::DesignBuilder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_auc(s: &[f64], y: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..s.len() {
            for j in 0..s.len() {
                if y[i] && !y[j] {
                    den += 1.0;
                    num += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_edges() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert_eq!(auc(&[0.1, 0.2], &[true, true]).unwrap_err(), StatsError::SingleClass);
    }

    #[test]
    fn auc_matches_all_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 17, 200, 500] {
            let mut y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
            y[0] = true;
            y[1] = false;
            // Coarse scores force many ties.
            let s: Vec<f64> = (0..n).map(|_| (rng.random_range(0..20) as f64) / 20.0).collect();
            assert!((auc(&s, &y).unwrap() - brute_auc(&s, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn hl_perfect_calibration() {
        // Five risk groups of four, each with one event at probability 0.25.
        let p = vec![0.25; 20];
        let y: Vec<bool> = (0..20).map(|i| i % 4 == 0).collect();
        let hl = hosmer_lemeshow(&p, &y, 5).unwrap();
        assert_eq!(hl.statistic, 0.0);
        assert_eq!(hl.p_value, Some(1.0));
    }

    #[test]
    fn hl_merges_thin_groups() {
        let n = 200;
        let p: Vec<f64> = (0..n).map(|i| 0.001 + 0.6 * (i as f64 / n as f64)).collect();
        let y: Vec<bool> = (0..n).map(|i| i % 4 == 0).collect();
        let hl = hosmer_lemeshow(&p, &y, 10).unwrap();
        assert!(hl.merged > 0);
        assert!(hl.groups.iter().all(|g| g.expected >= 1.0));
        assert_eq!(hl.df, hl.groups.len() - 2);
        assert!(hl.p_value.is_some());
        assert_eq!(hl.groups.iter().map(|g| g.n).sum::<usize>(), n);
    }

    #[test]
    fn hl_rejects_bad_probabilities() {
        assert_eq!(hosmer_lemeshow(&[0.0, 0.5, 0.5], &[true, false, true], 3).unwrap_err(), StatsError::Probability);
    }

    #[test]
    fn cook_flags_leverage_outlier() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 60;
        let mut xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut y: Vec<bool> = xs.iter().map(|x| rng.random_bool(crate::logistic::sigmoid(0.3 + 1.5 * x))).collect();
        xs.push(8.0);
        y.push(false);
        let x = DesignBuilder::new(n + 1).continuous("x", &xs, 1.0).unwrap().build();
        let fit = logistic_fit(&x, &y).unwrap();
        let flags = cooks_screen(&fit, &x, &y, 0.5).unwrap();
        assert_eq!(flags, vec![n]);
    }

    #[test]
    fn no_flags_on_balanced_duplicates() {
        let base = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let mut xs = Vec::new();
        let mut y = Vec::new();
        for _ in 0..10 {
            for (i, v) in base.iter().enumerate() {
                xs.push(*v);
                xs.push(*v);
                y.push(true);
                y.push(i % 2 == 0);
            }
        }
        let x = DesignBuilder::new(xs.len()).continuous("x", &xs, 1.0).unwrap().build();
        let fit = logistic_fit(&x, &y).unwrap();
        assert!(cooks_screen(&fit, &x, &y, 0.5).unwrap().is_empty());
    }
}
