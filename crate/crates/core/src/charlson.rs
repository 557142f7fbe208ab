//! Charlson comorbidity index over a 12-month pre-index window.

use chrono::{Days, NaiveDate};

use crate::codes::{expand_range, icd_matches, normalize_icd, CodeSystem};
use crate::cohort::PatientTimeline;
use crate::labels::named_enum;

named_enum!(
    Condition {
        Aids => "AIDS",
        Cerebrovascular => "CerebrovascularDisease",
        Chf => "CHF",
        Cpd => "CPD",
        Dementia => "Dementia",
        Diabetes => "Diabetes",
        DiabetesOrganDamage => "DiabetesOrganDamage",
        Hemiplegia => "Hemiplegia",
        LiverDisease => "LiverDisease",
        MetastaticSolidTumor => "MetastaticSolidTumor",
        MildLiverDisease => "MildLiverDisease",
        OtherCancer => "OtherCancer",
        PeripheralVascular => "PeripheralVascularDisease",
        Renal => "RenalDisease",
        Rheumatologic => "RheumatologicDisease",
        Ulcer => "Ulcer",
    }
);

impl Condition {
    pub fn weight(self) -> u32 {
        use Condition::*;
        match self {
            Chf | Cerebrovascular | Cpd | Dementia | Diabetes | MildLiverDisease | PeripheralVascular
            | Rheumatologic | Ulcer => 1,
            DiabetesOrganDamage | Hemiplegia | Renal | OtherCancer => 2,
            LiverDisease => 3,
            MetastaticSolidTumor | Aids => 6,
        }
    }

    /// ICD-10 code prefixes (Quan coding), ranges allowed.
    pub fn icd10(self) -> &'static [&'static str] {
        use Condition::*;
        match self {
            Chf => &["I09.9", "I11.0", "I13.0", "I13.2", "I25.5", "I42.0", "I42.5-I42.9", "I43", "I50", "P29.0"],
            PeripheralVascular => &[
                "I70", "I71", "I73.1", "I73.8", "I73.9", "I77.1", "I79.0", "I79.2", "K55.1", "K55.8", "K55.9",
                "Z95.8", "Z95.9",
            ],
            Cerebrovascular => &["G45", "G46", "H34.0", "I60-I69"],
            Dementia => &["F00-F03", "F05.1", "G30", "G31.1"],
            Cpd => &["I27.8", "I27.9", "J40-J47", "J60-J67", "J68.4", "J70.1", "J70.3"],
            Rheumatologic => &["M05", "M06", "M31.5", "M32-M34", "M35.1", "M35.3", "M36.0"],
            Ulcer => &["K25-K28"],
            MildLiverDisease => &[
                "B18", "K70.0-K70.3", "K70.9", "K71.3-K71.5", "K71.7", "K73", "K74", "K76.0", "K76.2-K76.4", "K76.8",
                "K76.9", "Z94.4",
            ],
            Diabetes => &[
                "E10.0", "E10.1", "E10.6", "E10.8", "E10.9", "E11.0", "E11.1", "E11.6", "E11.8", "E11.9", "E12.0",
                "E12.1", "E12.6", "E12.8", "E12.9", "E13.0", "E13.1", "E13.6", "E13.8", "E13.9", "E14.0", "E14.1",
                "E14.6", "E14.8", "E14.9",
            ],
            DiabetesOrganDamage => &[
                "E10.2-E10.5", "E10.7", "E11.2-E11.5", "E11.7", "E12.2-E12.5", "E12.7", "E13.2-E13.5", "E13.7",
                "E14.2-E14.5", "E14.7",
            ],
            Hemiplegia => &["G04.1", "G11.4", "G80.1", "G80.2", "G81", "G82", "G83.0-G83.4", "G83.9"],
            Renal => &[
                "I12.0", "I13.1", "N03.2-N03.7", "N05.2-N05.7", "N18", "N19", "N25.0", "Z49.0-Z49.2", "Z94.0", "Z99.2",
            ],
            OtherCancer => &[
                "C00-C26", "C30-C34", "C37-C41", "C43", "C45-C58", "C60-C76", "C81-C85", "C88", "C90-C97",
            ],
            LiverDisease => &[
                "I85.0", "I85.9", "I86.4", "I98.2", "K70.4", "K71.1", "K72.1", "K72.9", "K76.5", "K76.6", "K76.7",
            ],
            MetastaticSolidTumor => &["C77-C80"],
            Aids => &["B20-B22", "B24"],
        }
    }

    /// ICD-9-CM code prefixes (Deyo coding), ranges allowed.
    pub fn icd9(self) -> &'static [&'static str] {
        use Condition::*;
        match self {
            Chf => &["428"],
            PeripheralVascular => &["441", "443.9", "785.4", "V43.4"],
            Cerebrovascular => &["430-438"],
            Dementia => &["290"],
            Cpd => &["490-496", "500-505", "506.4"],
            Rheumatologic => &["710.0", "710.1", "710.4", "714.0-714.2", "714.81", "725"],
            Ulcer => &["531-534"],
            MildLiverDisease => &["571.2", "571.4-571.6"],
            Diabetes => &["250.0-250.3", "250.7"],
            DiabetesOrganDamage => &["250.4-250.6"],
            Hemiplegia => &["342", "344.1"],
            Renal => &["582", "583.0-583.7", "585", "586", "588"],
            OtherCancer => &["140-172", "174-194", "195.0-195.8", "200-208"],
            LiverDisease => &["456.0", "456.1", "456.20", "456.21", "572.2-572.8"],
            MetastaticSolidTumor => &["196-198", "199.0", "199.1"],
            Aids => &["042-044"],
        }
    }

    /// One representative ICD-10 code, used by the generator.
    pub fn example_icd10(self) -> String {
        let first = self.icd10()[0];
        expand_range(first).expect("static table")[0].clone()
    }
}

/// Expanded prefix lists per condition, built once.
struct Table {
    icd10: Vec<(Condition, Vec<String>)>,
    icd9: Vec<(Condition, Vec<String>)>,
}

fn expand_all(list: &[&str]) -> Vec<String> {
    list.iter()
        .flat_map(|r| expand_range(r).expect("static table"))
        .map(|c| normalize_icd(&c))
        .collect()
}

static TABLE: std::sync::LazyLock<Table> = std::sync::LazyLock::new(|| Table {
    icd10: Condition::ALL.iter().map(|c| (*c, expand_all(c.icd10()))).collect(),
    icd9: Condition::ALL.iter().map(|c| (*c, expand_all(c.icd9()))).collect(),
});

/// Conditions flagged by a single diagnosis code.
pub fn conditions_for(system: CodeSystem, code: &str) -> Vec<Condition> {
    let table = match system {
        CodeSystem::Icd10 => &TABLE.icd10,
        CodeSystem::Icd9 => &TABLE.icd9,
        _ => return Vec::new(),
    };
    let c = normalize_icd(code);
    table
        .iter()
        .filter(|(_, prefixes)| prefixes.iter().any(|p| icd_matches(p, &c)))
        .map(|(cond, _)| *cond)
        .collect()
}

pub fn age_points(age_years: u32) -> u32 {
    match age_years {
        ..=49 => 0,
        50..=59 => 1,
        60..=69 => 2,
        70..=79 => 3,
        _ => 4,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CharlsonScore {
    pub count: u32,
    pub weighted: u32,
    pub age_weighted: u32,
}

/// Scores a set of flagged conditions; duplicates are ignored.
pub fn score(conditions: &[Condition], age_years: u32) -> CharlsonScore {
    let mut distinct: Vec<Condition> = conditions.to_vec();
    distinct.sort();
    distinct.dedup();
    let weighted: u32 = distinct.iter().map(|c| c.weight()).sum();
    CharlsonScore { count: distinct.len() as u32, weighted, age_weighted: weighted + age_points(age_years) }
}

/// Conditions coded in `[index_date - 365 days, index_date)`.
pub fn flagged_conditions(timeline: &PatientTimeline, index_date: NaiveDate) -> Vec<Condition> {
    let start = index_date - Days::new(365);
    let mut out: Vec<Condition> = timeline
        .events
        .iter()
        .filter(|e| e.date >= start && e.date < index_date)
        .flat_map(|e| conditions_for(e.system, &e.code))
        .collect();
    out.sort();
    out.dedup();
    out
}

pub fn charlson(timeline: &PatientTimeline, index_date: NaiveDate, age_years: u32) -> CharlsonScore {
    score(&flagged_conditions(timeline, index_date), age_years)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_scores() {
        assert_eq!(score(&[], 45), CharlsonScore { count: 0, weighted: 0, age_weighted: 0 });
        let s = score(&[Condition::MetastaticSolidTumor, Condition::Diabetes], 72);
        assert_eq!((s.count, s.weighted, s.age_weighted), (2, 7, 10));
        let s = score(&[Condition::Chf], 55);
        assert_eq!((s.count, s.weighted, s.age_weighted), (1, 1, 2));
        let s = score(&[Condition::Chf, Condition::Chf], 80);
        assert_eq!((s.count, s.weighted, s.age_weighted), (1, 1, 5));
    }

    #[test]
    fn code_lookup() {
        assert_eq!(conditions_for(CodeSystem::Icd10, "I50.9"), [Condition::Chf]);
        assert_eq!(conditions_for(CodeSystem::Icd10, "C78.0"), [Condition::MetastaticSolidTumor]);
        assert_eq!(conditions_for(CodeSystem::Icd10, "E11.9"), [Condition::Diabetes]);
        assert_eq!(conditions_for(CodeSystem::Icd10, "E11.4"), [Condition::DiabetesOrganDamage]);
        assert_eq!(conditions_for(CodeSystem::Icd9, "428.0"), [Condition::Chf]);
        assert_eq!(conditions_for(CodeSystem::Icd9, "042"), [Condition::Aids]);
        assert!(conditions_for(CodeSystem::Icd10, "J18.9").is_empty());
        assert!(conditions_for(CodeSystem::Cpt, "I50").is_empty());
    }

    #[test]
    fn weights_and_examples_cover_all_conditions() {
        assert_eq!(Condition::ALL.len(), 16);
        for c in Condition::ALL {
            assert!([1, 2, 3, 6].contains(&c.weight()));
            assert_eq!(conditions_for(CodeSystem::Icd10, &c.example_icd10()), [*c], "{c}");
        }
    }

    #[test]
    fn age_point_edges() {
        assert_eq!([49, 50, 59, 60, 69, 70, 79, 80, 95].map(age_points), [0, 1, 1, 2, 2, 3, 3, 4, 4]);
    }
}
