//! Coded-event timelines around the index study: comorbidities, injected
//! exclusions and downstream cascade events.

use std::collections::BTreeMap;

use chrono::{Days, Months, NaiveDate};
use rand::seq::IndexedRandom;
use rand::Rng;

use super::{ArmRates, Baseline, GenConfig};
use crate::charlson::Condition;
use crate::codes::CodeSystem;
use crate::cohort::{CodedEvent, ExclusionReason, PatientTimeline};
use crate::labels::{BodyGroup, Modality};

const STUDY_DAYS: u64 = 2190;

fn study_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2016, 1, 1).unwrap()
}

/// CPT code for the index study of a modality and body region.
pub fn imaging_code(m: Modality, b: BodyGroup) -> &'static str {
    use BodyGroup::*;
    match (m, b) {
        (Modality::Ct, Head) => "70480",
        (Modality::Ct, Neck) => "70490",
        (Modality::Ct, Chest) => "71250",
        (Modality::Ct, Mixed) => "72125",
        (Modality::Mri, Head) => "70540",
        (Modality::Mri, Neck) => "70543",
        (Modality::Mri, Chest) => "71550",
        (Modality::Mri, Mixed) => "72141",
        (Modality::NuclearMedicine, Head) => "78804",
        (Modality::NuclearMedicine, Neck) => "78070",
        (Modality::NuclearMedicine, Chest) => "78452",
        (Modality::NuclearMedicine, Mixed) => "78804",
        (Modality::Pet, Head) => "78608",
        (Modality::Pet, Neck) => "78811",
        (Modality::Pet, Chest) => "78812",
        (Modality::Pet, Mixed) => "78815",
        (Modality::Ultrasound, _) => "93880",
    }
}

/// Share of patients flagged with each condition in the lookback year.
const CHARLSON_PREVALENCE: [(Condition, f64); 16] = [
    (Condition::Aids, 0.001),
    (Condition::Cerebrovascular, 0.012),
    (Condition::Chf, 0.026),
    (Condition::Cpd, 0.061),
    (Condition::Dementia, 0.008),
    (Condition::Diabetes, 0.068),
    (Condition::DiabetesOrganDamage, 0.028),
    (Condition::Hemiplegia, 0.002),
    (Condition::LiverDisease, 0.007),
    (Condition::MetastaticSolidTumor, 0.012),
    (Condition::MildLiverDisease, 0.025),
    (Condition::OtherCancer, 0.093),
    (Condition::PeripheralVascular, 0.028),
    (Condition::Renal, 0.051),
    (Condition::Rheumatologic, 0.017),
    (Condition::Ulcer, 0.003),
];

/// Prior-history codes used for injected exclusions. None of them is a
/// Charlson code, so they leave the comorbidity truth untouched.
const PRIOR_HISTORY_CODES: &[(CodeSystem, &str)] = &[
    (CodeSystem::Icd10, "E04.1"),
    (CodeSystem::Icd9, "241.1"),
    (CodeSystem::Cpt, "60240"),
    (CodeSystem::Cpt, "60220"),
    (CodeSystem::Cpt, "60100"),
    (CodeSystem::Icd10, "E05.00"),
    (CodeSystem::Icd9, "242.01"),
];

const NODULE_CODES: &[(CodeSystem, &str)] =
    &[(CodeSystem::Icd10, "E04.1"), (CodeSystem::Icd10, "D34"), (CodeSystem::Icd9, "241.0")];
const BIOPSY_CODES: &[&str] = &["60100", "60001", "60300"];
const PARTIAL_CODES: &[&str] = &["60220", "60210"];
const TOTAL_CODES: &[&str] = &["60240", "60252", "60270"];
const CANCER_CODES: &[(CodeSystem, &str)] = &[(CodeSystem::Icd10, "C73"), (CodeSystem::Icd9, "193")];
const THYROID_US: &str = "76536";

/// Counts per category from the cohort description; the remainder up to
/// the cohort size is left missing.
const DEMOGRAPHICS: &[(&str, &[(&str, f64)])] = &[
    ("race", &[("Black", 5025.0), ("Asian", 2853.0), ("White", 103559.0), ("Other", 2377.0)]),
    ("ethnicity", &[("Hispanic", 6217.0), ("Not Hispanic", 106960.0)]),
    ("language", &[("Non-English", 3021.0), ("English", 112561.0)]),
    (
        "marital",
        &[("Married/Life Partner", 73933.0), ("Divorced/Separated", 9927.0), ("Widowed", 7892.0), ("Single", 23370.0)],
    ),
    (
        "education",
        &[
            ("No high school degree", 2527.0),
            ("Highschool Degree/GED", 32231.0),
            ("Some college/associate degree", 14589.0),
            ("Bachelor's degree", 20374.0),
            ("Post-Graduate Degree", 16579.0),
        ],
    ),
    ("employment", &[("Disabled", 5520.0), ("Employed", 36602.0), ("Retired", 34267.0), ("Unemployed", 6861.0)]),
    (
        "payor",
        &[
            ("Private", 59612.0),
            ("Medicare", 42269.0),
            ("Medicaid", 9331.0),
            ("Other Govt Programs", 2429.0),
            ("Self-Pay", 2042.0),
        ],
    ),
    ("financial_risk", &[("Not hard", 63522.0), ("Somewhat hard", 8354.0), ("Hard/Very Hard", 3699.0)]),
];
const COHORT_SIZE: f64 = 115683.0;

pub(super) fn draw_demographics<R: Rng + ?Sized>(rng: &mut R) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for (key, cats) in DEMOGRAPHICS {
        let mut u = rng.random::<f64>() * COHORT_SIZE;
        for (value, count) in cats.iter() {
            if u < *count {
                out.insert(key.to_string(), value.to_string());
                break;
            }
            u -= count;
        }
    }
    out
}

fn days(d: NaiveDate, n: i64) -> NaiveDate {
    if n >= 0 {
        d + Days::new(n as u64)
    } else {
        d - Days::new((-n) as u64)
    }
}

/// Planned cascade outcomes; these are what linkage must recover.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(super) struct Planned {
    pub ultrasound: bool,
    pub nodule_dx: bool,
    pub biopsy: bool,
    pub partial: bool,
    pub total: bool,
    pub cancer: bool,
}

pub(super) struct Built {
    pub timeline: PatientTimeline,
    pub index_date: NaiveDate,
    pub charlson_count: u32,
    pub planned: Planned,
}

/// Conditional probability of an outcome given that an ultrasound happened.
fn given_ultrasound(rate: f64, rates: &ArmRates) -> f64 {
    if rates.ultrasound > 0.0 {
        (rate / rates.ultrasound).min(1.0)
    } else {
        0.0
    }
}

pub(super) fn build<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &GenConfig,
    b: &Baseline,
    had_itf: bool,
    report_ids: &[String],
) -> Built {
    let pid = b.patient_id.as_str();
    let index_date = study_start() + Days::new(rng.random_range(0..STUDY_DAYS));
    let birth_date = index_date.checked_sub_months(Months::new(12 * b.age)).expect("date in range")
        - Days::new(rng.random_range(0..=360));
    let lookback: i64 = if b.exclusion == Some(ExclusionReason::InsufficientLookback) {
        rng.random_range(30..=300)
    } else {
        rng.random_range(400..=3650)
    };
    let first_record_date = days(index_date, -lookback);
    let ev = |date: NaiveDate, system: CodeSystem, code: &str| CodedEvent::new(pid, date, system, code);

    let mut events = Vec::new();
    let imaging = |body: BodyGroup, acc: &str| CodedEvent {
        accession: Some(acc.to_string()),
        ordering_specialty: Some(b.specialty.clone()),
        ..ev(index_date, CodeSystem::Cpt, imaging_code(b.modality, body))
    };
    events.push(imaging(b.body, &report_ids[0]));
    if let (Some(body), Some(acc)) = (b.duplicate, report_ids.get(1)) {
        events.push(imaging(body, acc));
    }

    let mut charlson_count = 0;
    for (cond, p) in CHARLSON_PREVALENCE {
        if !rng.random_bool(p) {
            continue;
        }
        let code = cond.example_icd10();
        if rng.random_bool(0.9) {
            let back = rng.random_range(1..=365.min(lookback));
            events.push(ev(days(index_date, -back), CodeSystem::Icd10, &code));
            charlson_count += 1;
        } else {
            let back = rng.random_range(366..=730);
            if back <= lookback {
                events.push(ev(days(index_date, -back), CodeSystem::Icd10, &code));
            }
        }
    }

    match b.exclusion {
        Some(ExclusionReason::PriorThyroidHistory) => {
            let (system, code) = *PRIOR_HISTORY_CODES.choose(rng).unwrap();
            let back = rng.random_range(1..=300.min(lookback));
            events.push(ev(days(index_date, -back), system, code));
        }
        None if rng.random_bool(cfg.same_day_exclusion_rate) => {
            events.push(ev(index_date, CodeSystem::Icd10, "E04.1"));
        }
        _ => {}
    }
    if rng.random_bool(0.1) {
        events.push(ev(days(index_date, rng.random_range(200..=900)), CodeSystem::Cpt, "71250"));
    }

    let rates = if had_itf { &cfg.outcomes.itf } else { &cfg.outcomes.no_itf };
    let mut planned = Planned { ultrasound: rng.random_bool(rates.ultrasound), ..Default::default() };
    if planned.ultrasound {
        let us = days(index_date, rng.random_range(1..=180));
        events.push(ev(us, CodeSystem::Cpt, THYROID_US));
        planned.nodule_dx = rng.random_bool(given_ultrasound(rates.nodule_dx, rates));
        planned.biopsy = rng.random_bool(given_ultrasound(rates.biopsy, rates));
        planned.partial = rng.random_bool(given_ultrasound(rates.partial_thyroidectomy, rates));
        planned.total = rng.random_bool(given_ultrasound(rates.total_thyroidectomy, rates));
        planned.cancer = rng.random_bool(given_ultrasound(rates.cancer, rates));
        if planned.nodule_dx {
            let (system, code) = *NODULE_CODES.choose(rng).unwrap();
            events.push(ev(days(us, rng.random_range(1..=60)), system, code));
        }
        if planned.biopsy {
            events.push(ev(days(us, rng.random_range(1..=60)), CodeSystem::Cpt, BIOPSY_CODES.choose(rng).unwrap()));
        }
        let mut surgery: Option<NaiveDate> = None;
        for (flag, codes) in [(planned.partial, PARTIAL_CODES), (planned.total, TOTAL_CODES)] {
            if flag {
                let d = days(us, rng.random_range(20..=150));
                events.push(ev(d, CodeSystem::Cpt, codes.choose(rng).unwrap()));
                surgery = Some(surgery.map_or(d, |s| s.min(d)));
            }
        }
        let window_end = days(us, 180);
        let cancer_code = |rng: &mut R| *CANCER_CODES.choose(rng).unwrap();
        match (planned.cancer, surgery) {
            (true, Some(s)) => {
                let room = (window_end - s).num_days();
                let (system, code) = cancer_code(rng);
                events.push(ev(days(s, rng.random_range(1..=room)), system, code));
            }
            (true, None) => {
                for offset in rand::seq::index::sample(rng, 180, 3) {
                    let (system, code) = cancer_code(rng);
                    events.push(ev(days(us, offset as i64 + 1), system, code));
                }
            }
            (false, Some(s)) if rng.random_bool(0.05) && (s - us).num_days() > 1 => {
                // rule-out code before surgery: never confirms
                let (system, code) = cancer_code(rng);
                events.push(ev(days(us, rng.random_range(1..(s - us).num_days())), system, code));
            }
            (false, None) if rng.random_bool(0.05) => {
                let n = rng.random_range(1..=2);
                for offset in rand::seq::index::sample(rng, 180, n) {
                    let (system, code) = cancer_code(rng);
                    events.push(ev(days(us, offset as i64 + 1), system, code));
                }
            }
            _ => {}
        }
    } else {
        if rng.random_bool(0.03) {
            events.push(ev(days(index_date, rng.random_range(181..=260)), CodeSystem::Cpt, THYROID_US));
        }
        if rng.random_bool(0.005) {
            events.push(ev(days(index_date, rng.random_range(1..=100)), CodeSystem::Cpt, BIOPSY_CODES[0]));
        }
    }

    events.sort_by_key(|e| e.date);
    let timeline = PatientTimeline {
        patient_id: pid.to_string(),
        birth_date,
        sex: b.sex,
        bmi: b.bmi,
        demographics: b.demographics.clone(),
        events,
        first_record_date,
    };
    Built { timeline, index_date, charlson_count, planned }
}
