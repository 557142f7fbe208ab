//! 2x2 tables and cross-product odds ratios with log-scale Wald intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Result, StatsError};

pub const Z95: f64 = 1.96;

/// Counts laid out as exposed-event `a`, exposed-nonevent `b`,
/// unexposed-event `c`, unexposed-nonevent `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self { a, b, c, d }
    }

    /// Tallies (exposed, event) pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut t = Self::new(0, 0, 0, 0);
        for (exposed, event) in pairs {
            match (exposed, event) {
                (true, true) => t.a += 1,
                (true, false) => t.b += 1,
                (false, true) => t.c += 1,
                (false, false) => t.d += 1,
            }
        }
        t
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn has_zero(&self) -> bool {
        self.a == 0 || self.b == 0 || self.c == 0 || self.d == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OddsRatio {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub log_or: f64,
    pub se_log_or: f64,
    /// Whether 0.5 was added to every cell.
    pub corrected: bool,
}

impl OddsRatio {
    pub fn from_log(log_or: f64, se: f64) -> Self {
        Self {
            estimate: log_or.exp(),
            ci_low: (log_or - Z95 * se).exp(),
            ci_high: (log_or + Z95 * se).exp(),
            log_or,
            se_log_or: se,
            corrected: false,
        }
    }
}

/// Cross-product odds ratio. A zero cell is an error unless `haldane` is
/// set, in which case 0.5 is added to every cell.
pub fn odds_ratio(t: &ContingencyTable, haldane: bool) -> Result<OddsRatio> {
    let corrected = t.has_zero();
    if corrected && !haldane {
        return Err(StatsError::ZeroCell(format!("a={} b={} c={} d={}", t.a, t.b, t.c, t.d)));
    }
    let add = if corrected { 0.5 } else { 0.0 };
    let [a, b, c, d] = [t.a, t.b, t.c, t.d].map(|x| x as f64 + add);
    let log_or = (a * d / (b * c)).ln();
    let se = (1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d).sqrt();
    Ok(OddsRatio { corrected, ..OddsRatio::from_log(log_or, se) })
}
