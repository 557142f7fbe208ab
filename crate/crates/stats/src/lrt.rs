//! Likelihood-ratio test between nested logistic fits.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Result, StatsError};
use crate::logistic::ModelFit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrTest {
    pub chi2: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Compares `nested` against `full`; every column of `nested` must appear
/// in `full` and both must be fitted to the same observations.
pub fn lr_test(nested: &ModelFit, full: &ModelFit) -> Result<LrTest> {
    if nested.n != full.n {
        return Err(StatsError::NotNested(format!("fitted to {} and {} observations", nested.n, full.n)));
    }
    if let Some(missing) = nested.names.iter().find(|n| !full.names.contains(n)) {
        return Err(StatsError::NotNested(format!("`{missing}` is not in the full model")));
    }
    let df = full.k - nested.k;
    // Both fits maximize the likelihood, so a negative difference is rounding.
    let chi2 = (nested.deviance - full.deviance).max(0.0);
    let p_value = if df == 0 { 1.0 } else { ChiSquared::new(df as f64).expect("df > 0").sf(chi2) };
    Ok(LrTest { chi2, df, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::DesignBuilder;
    use crate::logistic::logistic_fit;

    fn fixture() -> (crate::design::DesignMatrix, Vec<bool>) {
        let a: Vec<f64> = (0..80).map(|i| (i % 9) as f64).collect();
        let b: Vec<f64> = (0..80).map(|i| ((i * 7) % 5) as f64).collect();
        let y: Vec<bool> = (0..80).map(|i| (i % 9) + (i % 4) > 6).collect();
        let x = DesignBuilder::new(80).continuous("a", &a, 1.0).unwrap().continuous("b", &b, 1.0).unwrap().build();
        (x, y)
    }

    #[test]
    fn identical_models() {
        let (x, y) = fixture();
        let f = logistic_fit(&x, &y).unwrap();
        let t = lr_test(&f, &f).unwrap();
        assert_eq!((t.chi2, t.df, t.p_value), (0.0, 0, 1.0));
    }

    #[test]
    fn nested_pair() {
        let (x, y) = fixture();
        let full = logistic_fit(&x, &y).unwrap();
        let nested = logistic_fit(&x.without(&["b"]), &y).unwrap();
        let t = lr_test(&nested, &full).unwrap();
        assert_eq!(t.df, 1);
        assert!((t.chi2 - (nested.deviance - full.deviance)).abs() < 1e-12);
        assert!(t.p_value > 0.0 && t.p_value <= 1.0);
        assert!(matches!(lr_test(&full, &nested), Err(StatsError::NotNested(_))));
    }
}
