//! Named code sets for inclusion, exclusion and outcome ascertainment.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use crate::labels::named_enum;

named_enum!(
    CodeSystem {
        Icd9 => "ICD9",
        Icd10 => "ICD10",
        Cpt => "CPT",
        Hcpcs => "HCPCS",
    }
);

impl CodeSystem {
    pub fn is_icd(self) -> bool {
        matches!(self, CodeSystem::Icd9 | CodeSystem::Icd10)
    }
}

pub const QUALIFYING_IMAGING: &str = "qualifying_imaging";
pub const THYROID_CANCER: &str = "thyroid_cancer";
pub const THYROID_NODULE: &str = "thyroid_nodule";
pub const THYROIDECTOMY: &str = "thyroidectomy";
pub const PARTIAL_THYROIDECTOMY: &str = "partial_thyroidectomy";
pub const BIOPSY: &str = "biopsy";
pub const HYPERTHYROIDISM: &str = "hyperthyroidism";
pub const ULTRASOUND_THYROID: &str = "ultrasound_thyroid";

/// Sets whose presence before the index study excludes a patient.
pub const EXCLUSION_SETS: &[&str] =
    &[THYROID_CANCER, THYROID_NODULE, THYROIDECTOMY, PARTIAL_THYROIDECTOMY, BIOPSY, HYPERTHYROIDISM];

pub const REQUIRED_SETS: &[&str] = &[
    QUALIFYING_IMAGING,
    THYROID_CANCER,
    THYROID_NODULE,
    THYROIDECTOMY,
    PARTIAL_THYROIDECTOMY,
    BIOPSY,
    HYPERTHYROIDISM,
    ULTRASOUND_THYROID,
];

/// Default table in `set_name,system,code_or_range` form.
pub const DEFAULT_CODES_CSV: &str = include_str!("default_codes.csv");

#[derive(Debug, thiserror::Error)]
pub enum CodeTableError {
    #[error("reading code table {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("code table row {row}: {source}")]
    Csv {
        row: usize,
        #[source]
        source: csv::Error,
    },
    #[error("code table row {row}: unknown system {system:?}")]
    UnknownSystem { row: usize, system: String },
    #[error("code table row {row}: bad range {range:?}: {reason}")]
    BadRange { row: usize, range: String, reason: &'static str },
    #[error("code table row {row}: empty code")]
    EmptyCode { row: usize },
    #[error("code table lacks required set {0:?}")]
    MissingSet(String),
}

#[derive(Debug, Deserialize)]
struct Row {
    set_name: String,
    system: String,
    code_or_range: String,
}

/// Normalizes an ICD code to upper case with a dot after the category
/// ("e041" -> "E04.1").
pub fn normalize_icd(code: &str) -> String {
    let c = code.trim().to_uppercase();
    if c.contains('.') || c.len() <= 3 {
        c
    } else {
        format!("{}.{}", &c[..3], &c[3..])
    }
}

/// Hierarchical ICD match: the event code equals the listed code or is one of
/// its subdivisions.
pub fn icd_matches(listed: &str, event: &str) -> bool {
    if !event.starts_with(listed) {
        return false;
    }
    match event[listed.len()..].chars().next() {
        None => true,
        Some('.') => true,
        Some(_) => listed.contains('.'),
    }
}

fn split_numeric_tail(s: &str) -> (&str, &str) {
    let idx = s.rfind(|c: char| !c.is_ascii_digit()).map_or(0, |i| i + 1);
    s.split_at(idx)
}

/// Expands `lo-hi` into explicit codes. Both ends must share their
/// non-numeric prefix and the width of their numeric tail, which is kept
/// (zero padded) in every expanded code.
pub fn expand_range(expr: &str) -> Result<Vec<String>, &'static str> {
    let Some((lo, hi)) = expr.split_once('-') else {
        return Ok(vec![expr.trim().to_string()]);
    };
    let (lo, hi) = (lo.trim(), hi.trim());
    let (lp, ld) = split_numeric_tail(lo);
    let (hp, hd) = split_numeric_tail(hi);
    if ld.is_empty() || hd.is_empty() {
        return Err("range ends must end in digits");
    }
    if lp != hp {
        return Err("range ends have different prefixes");
    }
    if ld.len() != hd.len() {
        return Err("range ends have different widths");
    }
    let a: u64 = ld.parse().map_err(|_| "numeric overflow")?;
    let b: u64 = hd.parse().map_err(|_| "numeric overflow")?;
    if a > b {
        return Err("inverted range");
    }
    if b - a > 100_000 {
        return Err("range too large");
    }
    let w = ld.len();
    Ok((a..=b).map(|n| format!("{lp}{n:0w$}")).collect())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CodeSet {
    exact: BTreeSet<(CodeSystem, String)>,
    icd: Vec<(CodeSystem, String)>,
}

impl CodeSet {
    fn insert(&mut self, system: CodeSystem, code: &str) {
        if system.is_icd() {
            let c = normalize_icd(code);
            if !self.icd.iter().any(|(s, x)| *s == system && *x == c) {
                self.icd.push((system, c));
            }
        } else {
            self.exact.insert((system, code.trim().to_uppercase()));
        }
    }

    pub fn contains(&self, system: CodeSystem, code: &str) -> bool {
        if system.is_icd() {
            let c = normalize_icd(code);
            self.icd.iter().any(|(s, listed)| *s == system && icd_matches(listed, &c))
        } else {
            self.exact.contains(&(system, code.trim().to_uppercase()))
        }
    }

    pub fn len(&self) -> usize {
        self.exact.len() + self.icd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Codes of one system in this set, in sorted order.
    pub fn codes(&self, system: CodeSystem) -> Vec<String> {
        let mut out: Vec<String> = if system.is_icd() {
            self.icd.iter().filter(|(s, _)| *s == system).map(|(_, c)| c.clone()).collect()
        } else {
            self.exact.iter().filter(|(s, _)| *s == system).map(|(_, c)| c.clone()).collect()
        };
        out.sort();
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeTable {
    sets: BTreeMap<String, CodeSet>,
}

impl CodeTable {
    pub fn from_csv_str(s: &str) -> Result<Self, CodeTableError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(s.as_bytes());
        let mut sets: BTreeMap<String, CodeSet> = BTreeMap::new();
        for (i, rec) in rdr.deserialize::<Row>().enumerate() {
            let row = i + 2;
            let r = rec.map_err(|source| CodeTableError::Csv { row, source })?;
            let system: CodeSystem =
                r.system.parse().map_err(|_| CodeTableError::UnknownSystem { row, system: r.system.clone() })?;
            if r.code_or_range.is_empty() {
                return Err(CodeTableError::EmptyCode { row });
            }
            let codes = expand_range(&r.code_or_range).map_err(|reason| CodeTableError::BadRange {
                row,
                range: r.code_or_range.clone(),
                reason,
            })?;
            let set = sets.entry(r.set_name).or_default();
            for c in codes {
                set.insert(system, &c);
            }
        }
        let table = Self { sets };
        for name in REQUIRED_SETS {
            if !table.sets.contains_key(*name) {
                return Err(CodeTableError::MissingSet(name.to_string()));
            }
        }
        Ok(table)
    }

    pub fn from_file(path: &Path) -> Result<Self, CodeTableError> {
        let s = std::fs::read_to_string(path).map_err(|e| CodeTableError::Io(path.display().to_string(), e))?;
        Self::from_csv_str(&s)
    }

    pub fn set(&self, name: &str) -> Option<&CodeSet> {
        self.sets.get(name)
    }

    pub fn in_set(&self, name: &str, system: CodeSystem, code: &str) -> bool {
        self.sets.get(name).is_some_and(|s| s.contains(system, code))
    }

    pub fn is_exclusion(&self, system: CodeSystem, code: &str) -> bool {
        EXCLUSION_SETS.iter().any(|s| self.in_set(s, system, code))
    }

    pub fn set_names(&self) -> impl Iterator<Item = &str> {
        self.sets.keys().map(String::as_str)
    }
}

impl Default for CodeTable {
    fn default() -> Self {
        Self::from_csv_str(DEFAULT_CODES_CSV).expect("embedded code table is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_expansion_keeps_prefix_and_width() {
        assert_eq!(expand_range("70480-70482").unwrap(), ["70480", "70481", "70482"]);
        assert_eq!(expand_range("G0252-G0254").unwrap(), ["G0252", "G0253", "G0254"]);
        assert_eq!(expand_range("E10.2-E10.4").unwrap(), ["E10.2", "E10.3", "E10.4"]);
        assert_eq!(expand_range("042-044").unwrap(), ["042", "043", "044"]);
        assert_eq!(expand_range("71250").unwrap(), ["71250"]);
        assert_eq!(expand_range("72125-71127"), Err("inverted range"));
        assert!(expand_range("G0210-H0234").is_err());
        assert!(expand_range("100-1000").is_err());
    }

    #[test]
    fn default_table_sets() {
        let t = CodeTable::default();
        assert!(t.in_set(QUALIFYING_IMAGING, CodeSystem::Cpt, "70485"));
        assert!(t.in_set(QUALIFYING_IMAGING, CodeSystem::Cpt, "72126"));
        assert!(t.in_set(QUALIFYING_IMAGING, CodeSystem::Hcpcs, "G0233"));
        assert!(t.in_set(QUALIFYING_IMAGING, CodeSystem::Cpt, "78815"));
        assert!(!t.in_set(QUALIFYING_IMAGING, CodeSystem::Cpt, "70493"));
        assert!(t.in_set(THYROID_CANCER, CodeSystem::Icd10, "C73"));
        assert!(t.in_set(THYROID_CANCER, CodeSystem::Icd9, "193"));
        assert!(t.in_set(THYROID_NODULE, CodeSystem::Icd10, "E04.1"));
        assert!(t.in_set(THYROID_NODULE, CodeSystem::Icd10, "E041"));
        assert!(t.in_set(THYROID_NODULE, CodeSystem::Hcpcs, "G9552"));
        assert!(!t.in_set(THYROID_NODULE, CodeSystem::Icd10, "E04.9"));
        assert!(t.in_set(HYPERTHYROIDISM, CodeSystem::Icd10, "E05.00"));
        assert!(!t.in_set(HYPERTHYROIDISM, CodeSystem::Icd10, "E05.90"));
        assert!(t.in_set(BIOPSY, CodeSystem::Cpt, "60100"));
        assert!(t.in_set(PARTIAL_THYROIDECTOMY, CodeSystem::Cpt, "60220"));
        assert!(t.in_set(THYROIDECTOMY, CodeSystem::Cpt, "60240"));
        assert!(t.in_set(ULTRASOUND_THYROID, CodeSystem::Cpt, "76536"));
        // system matters
        assert!(!t.in_set(THYROID_CANCER, CodeSystem::Icd9, "C73"));
        assert!(t.is_exclusion(CodeSystem::Icd9, "242.01"));
        assert!(!t.is_exclusion(CodeSystem::Cpt, "71250"));
    }

    #[test]
    fn icd_hierarchy_is_dot_aware() {
        assert!(icd_matches("C73", "C73"));
        assert!(icd_matches("C73", "C73.9"));
        assert!(icd_matches("E04.1", "E04.10"));
        assert!(!icd_matches("E04.1", "E04.2"));
        assert!(!icd_matches("19", "193"));
        assert_eq!(normalize_icd("e0410"), "E04.10");
    }

    #[test]
    fn table_errors() {
        let bad = "set_name,system,code_or_range\nqualifying_imaging,CPT,72125-71127\n";
        assert!(matches!(CodeTable::from_csv_str(bad), Err(CodeTableError::BadRange { row: 2, .. })));
        let bad = "set_name,system,code_or_range\nqualifying_imaging,LOINC,1\n";
        assert!(matches!(CodeTable::from_csv_str(bad), Err(CodeTableError::UnknownSystem { .. })));
        let missing = "set_name,system,code_or_range\nqualifying_imaging,CPT,71250\n";
        assert!(matches!(CodeTable::from_csv_str(missing), Err(CodeTableError::MissingSet(_))));
    }
}
