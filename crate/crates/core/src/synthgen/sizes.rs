//! Nodule size sampling: a lognormal moment-matched to the target mean and
//! SD, truncated to a plausible range and rounded to one decimal.

use rand::Rng;
use rand_distr::{Distribution, LogNormal};

use crate::extract::round1;

pub const MIN_CM: f64 = 0.1;
pub const MAX_CM: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SizeParamError {
    #[error("size mean must be positive and finite, got {0}")]
    Mean(f64),
    #[error("size SD must be positive and finite, got {0}")]
    Sd(f64),
    #[error("size mean {0} lies outside the truncation range [{MIN_CM}, {MAX_CM}]")]
    OutOfRange(f64),
}

#[derive(Debug, Clone)]
pub struct SizeSampler {
    dist: LogNormal<f64>,
}

/// Log-scale parameters whose untruncated lognormal has the given moments.
pub fn lognormal_params(mean: f64, sd: f64) -> (f64, f64) {
    let sigma2 = (1.0 + (sd / mean).powi(2)).ln();
    (mean.ln() - sigma2 / 2.0, sigma2.sqrt())
}

impl SizeSampler {
    pub fn new(mean_cm: f64, sd_cm: f64) -> Result<Self, SizeParamError> {
        if !(mean_cm.is_finite() && mean_cm > 0.0) {
            return Err(SizeParamError::Mean(mean_cm));
        }
        if !(sd_cm.is_finite() && sd_cm > 0.0) {
            return Err(SizeParamError::Sd(sd_cm));
        }
        if !(MIN_CM..=MAX_CM).contains(&mean_cm) {
            return Err(SizeParamError::OutOfRange(mean_cm));
        }
        let (mu, sigma) = lognormal_params(mean_cm, sd_cm);
        let dist = LogNormal::new(mu, sigma).map_err(|_| SizeParamError::Sd(sd_cm))?;
        Ok(Self { dist })
    }

    /// One size in cm, rejection-sampled into `[MIN_CM, MAX_CM]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x = self.dist.sample(rng);
            if (MIN_CM..=MAX_CM).contains(&x) {
                return round1(x);
            }
        }
    }
}
