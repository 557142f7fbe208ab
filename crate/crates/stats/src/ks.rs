//! One-sample Kolmogorov-Smirnov test against Uniform(0, 1).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS statistic and asymptotic p-value with the Stephens small-sample
/// adjustment `(sqrt(n) + 0.12 + 0.11 / sqrt(n)) D`.
pub fn ks_uniform(samples: &[f64]) -> KsResult {
    let mut u: Vec<f64> = samples.to_vec();
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let statistic = u
        .iter()
        .enumerate()
        .map(|(i, x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max);
    let rn = n.sqrt();
    KsResult { statistic, p_value: kolmogorov_sf((rn + 0.12 + 0.11 / rn) * statistic) }
}
