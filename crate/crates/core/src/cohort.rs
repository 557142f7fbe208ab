//! Cohort construction: index study selection, eligibility and baseline
//! covariates.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::{Days, NaiveDate};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::charlson;
use crate::codes::{CodeSystem, CodeTable, QUALIFYING_IMAGING};
use crate::corpus::ReportDoc;
use crate::labels::{BodyGroup, Modality, Sex};
use crate::seed::keyed_rng;

pub const LOOKBACK_DAYS: u64 = 365;
pub const ADULT_AGE: u32 = 18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodedEvent {
    pub patient_id: String,
    pub date: NaiveDate,
    pub system: CodeSystem,
    pub code: String,
    /// Report id for imaging events that produced a report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accession: Option<String>,
    /// Specialty of the ordering clinician, for imaging events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering_specialty: Option<String>,
}

impl CodedEvent {
    pub fn new(patient_id: &str, date: NaiveDate, system: CodeSystem, code: &str) -> Self {
        Self {
            patient_id: patient_id.to_string(),
            date,
            system,
            code: code.to_string(),
            accession: None,
            ordering_specialty: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientTimeline {
    pub patient_id: String,
    pub birth_date: NaiveDate,
    pub sex: Sex,
    pub bmi: Option<f64>,
    #[serde(default)]
    pub demographics: BTreeMap<String, String>,
    pub events: Vec<CodedEvent>,
    pub first_record_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TimelineError {
    #[error("patient {0}: events not sorted by date")]
    Unsorted(String),
    #[error("patient {0}: event before first_record_date")]
    EventBeforeFirstRecord(String),
    #[error("patient {0}: event with empty code")]
    EmptyCode(String),
    #[error("patient {0}: event belongs to patient {1}")]
    ForeignEvent(String, String),
}

impl PatientTimeline {
    pub fn validate(&self) -> Result<(), TimelineError> {
        let id = || self.patient_id.clone();
        if self.events.windows(2).any(|w| w[0].date > w[1].date) {
            return Err(TimelineError::Unsorted(id()));
        }
        if self.events.first().is_some_and(|e| e.date < self.first_record_date) {
            return Err(TimelineError::EventBeforeFirstRecord(id()));
        }
        for e in &self.events {
            if e.code.trim().is_empty() {
                return Err(TimelineError::EmptyCode(id()));
            }
            if e.patient_id != self.patient_id {
                return Err(TimelineError::ForeignEvent(id(), e.patient_id.clone()));
            }
        }
        Ok(())
    }

    /// Sorts events by date (stable) so that a timeline read from disk in any
    /// order satisfies the ordering invariant.
    pub fn sort_events(&mut self) {
        self.events.sort_by_key(|e| e.date);
    }
}

/// Age in completed years on `at`.
pub fn age_years(birth: NaiveDate, at: NaiveDate) -> u32 {
    at.years_since(birth).unwrap_or(0)
}

fn event_order_key(e: &CodedEvent) -> (NaiveDate, CodeSystem, &str, Option<&str>) {
    (e.date, e.system, e.code.as_str(), e.accession.as_deref())
}

/// Earliest qualifying imaging date; ties on that date are broken uniformly
/// at random by a generator keyed on `(seed, patient_id)`.
pub fn select_index_study<'a>(timeline: &'a PatientTimeline, codes: &CodeTable, seed: u64) -> Option<&'a CodedEvent> {
    let mut qualifying: Vec<&CodedEvent> =
        timeline.events.iter().filter(|e| codes.in_set(QUALIFYING_IMAGING, e.system, &e.code)).collect();
    let first = qualifying.iter().map(|e| e.date).min()?;
    qualifying.retain(|e| e.date == first);
    qualifying.sort_by(|a, b| event_order_key(a).cmp(&event_order_key(b)));
    let pick = if qualifying.len() == 1 {
        0
    } else {
        keyed_rng(seed, &timeline.patient_id).random_range(0..qualifying.len())
    };
    Some(qualifying[pick])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExclusionReason {
    Minor,
    InsufficientLookback,
    PriorThyroidHistory,
}

impl ExclusionReason {
    pub const ALL: [ExclusionReason; 3] =
        [ExclusionReason::Minor, ExclusionReason::InsufficientLookback, ExclusionReason::PriorThyroidHistory];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExclusionReason::Minor => "Minor",
            ExclusionReason::InsufficientLookback => "InsufficientLookback",
            ExclusionReason::PriorThyroidHistory => "PriorThyroidHistory",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Eligibility {
    Eligible,
    Excluded(ExclusionReason),
}

impl Eligibility {
    pub fn is_eligible(&self) -> bool {
        matches!(self, Eligibility::Eligible)
    }
}

impl fmt::Display for Eligibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Eligibility::Eligible => f.write_str("Eligible"),
            Eligibility::Excluded(r) => write!(f, "Excluded({})", r.as_str()),
        }
    }
}

impl FromStr for Eligibility {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "Eligible" {
            return Ok(Eligibility::Eligible);
        }
        let inner = s
            .strip_prefix("Excluded(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| format!("bad eligibility {s:?}"))?;
        ExclusionReason::ALL
            .iter()
            .find(|r| r.as_str() == inner)
            .map(|r| Eligibility::Excluded(*r))
            .ok_or_else(|| format!("unknown exclusion reason {inner:?}"))
    }
}

impl Serialize for Eligibility {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Eligibility {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Demographic keys carried from the timeline into cohort rows.
pub const DEMOGRAPHIC_KEYS: [&str; 8] =
    ["race", "ethnicity", "language", "marital", "education", "employment", "payor", "financial_risk"];

/// One patient's index study with baseline covariates. Flat so it maps
/// directly onto a CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRow {
    pub patient_id: String,
    pub index_report_id: Option<String>,
    pub index_date: NaiveDate,
    pub index_code: String,
    pub age_years: u32,
    pub sex: Sex,
    pub bmi: Option<f64>,
    pub modality: Option<Modality>,
    pub body_group: Option<BodyGroup>,
    pub specialty: Option<String>,
    pub charlson_count: u32,
    pub charlson_weighted: u32,
    pub charlson_age_weighted: u32,
    pub eligibility: Eligibility,
    pub race: Option<String>,
    pub ethnicity: Option<String>,
    pub language: Option<String>,
    pub marital: Option<String>,
    pub education: Option<String>,
    pub employment: Option<String>,
    pub payor: Option<String>,
    pub financial_risk: Option<String>,
}

impl CohortRow {
    /// Takes modality and body group from the index report.
    pub fn with_report(mut self, doc: &ReportDoc) -> Self {
        self.modality = Some(doc.modality);
        self.body_group = Some(doc.body_group);
        self
    }

    pub fn demographic(&self, key: &str) -> Option<&str> {
        match key {
            "race" => self.race.as_deref(),
            "ethnicity" => self.ethnicity.as_deref(),
            "language" => self.language.as_deref(),
            "marital" => self.marital.as_deref(),
            "education" => self.education.as_deref(),
            "employment" => self.employment.as_deref(),
            "payor" => self.payor.as_deref(),
            "financial_risk" => self.financial_risk.as_deref(),
            _ => None,
        }
    }
}

/// Eligibility is checked in a fixed order (age, lookback, prior history) and
/// the first failing gate is reported.
pub fn eligibility(timeline: &PatientTimeline, index_date: NaiveDate, codes: &CodeTable) -> Eligibility {
    if age_years(timeline.birth_date, index_date) < ADULT_AGE {
        return Eligibility::Excluded(ExclusionReason::Minor);
    }
    if timeline.first_record_date > index_date - Days::new(LOOKBACK_DAYS) {
        return Eligibility::Excluded(ExclusionReason::InsufficientLookback);
    }
    let prior = timeline.events.iter().any(|e| e.date < index_date && codes.is_exclusion(e.system, &e.code));
    if prior {
        return Eligibility::Excluded(ExclusionReason::PriorThyroidHistory);
    }
    Eligibility::Eligible
}

pub fn apply_eligibility(timeline: &PatientTimeline, index: &CodedEvent, codes: &CodeTable) -> CohortRow {
    let age = age_years(timeline.birth_date, index.date);
    let score = charlson::charlson(timeline, index.date, age);
    let demo = |k: &str| timeline.demographics.get(k).cloned();
    CohortRow {
        patient_id: timeline.patient_id.clone(),
        index_report_id: index.accession.clone(),
        index_date: index.date,
        index_code: index.code.clone(),
        age_years: age,
        sex: timeline.sex,
        bmi: timeline.bmi,
        modality: None,
        body_group: None,
        specialty: index.ordering_specialty.clone(),
        charlson_count: score.count,
        charlson_weighted: score.weighted,
        charlson_age_weighted: score.age_weighted,
        eligibility: eligibility(timeline, index.date, codes),
        race: demo("race"),
        ethnicity: demo("ethnicity"),
        language: demo("language"),
        marital: demo("marital"),
        education: demo("education"),
        employment: demo("employment"),
        payor: demo("payor"),
        financial_risk: demo("financial_risk"),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub timelines: usize,
    pub no_qualifying_imaging: usize,
    pub eligible: usize,
    pub excluded_minor: usize,
    pub excluded_insufficient_lookback: usize,
    pub excluded_prior_thyroid_history: usize,
    /// Index studies whose report was not found in the supplied corpus.
    pub missing_index_report: usize,
}

/// Builds cohort rows for every patient with a qualifying study, sorted by
/// patient id. `reports` (keyed by report id) fills modality and body group.
pub fn build_cohort(
    timelines: &[PatientTimeline],
    codes: &CodeTable,
    seed: u64,
    reports: Option<&HashMap<String, ReportDoc>>,
) -> (Vec<CohortRow>, CohortSummary) {
    let results: Vec<Option<(CohortRow, bool)>> = timelines
        .par_iter()
        .map(|t| {
            let mut t = t.clone();
            t.sort_events();
            let index = select_index_study(&t, codes, seed)?;
            let mut row = apply_eligibility(&t, index, codes);
            let mut missing = false;
            if let Some(reports) = reports {
                match index.accession.as_ref().and_then(|a| reports.get(a)) {
                    Some(doc) => row = row.with_report(doc),
                    None => missing = true,
                }
            }
            Some((row, missing))
        })
        .collect();

    let mut summary = CohortSummary { timelines: timelines.len(), ..Default::default() };
    let mut rows = Vec::new();
    for r in results {
        let Some((row, missing)) = r else {
            summary.no_qualifying_imaging += 1;
            continue;
        };
        if missing {
            summary.missing_index_report += 1;
        }
        match row.eligibility {
            Eligibility::Eligible => summary.eligible += 1,
            Eligibility::Excluded(ExclusionReason::Minor) => summary.excluded_minor += 1,
            Eligibility::Excluded(ExclusionReason::InsufficientLookback) => summary.excluded_insufficient_lookback += 1,
            Eligibility::Excluded(ExclusionReason::PriorThyroidHistory) => summary.excluded_prior_thyroid_history += 1,
        }
        rows.push(row);
    }
    rows.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    (rows, summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn imaging(pid: &str, date: NaiveDate, code: &str, acc: &str) -> CodedEvent {
        CodedEvent { accession: Some(acc.into()), ..CodedEvent::new(pid, date, CodeSystem::Cpt, code) }
    }

    fn timeline(pid: &str, birth: NaiveDate, first: NaiveDate, events: Vec<CodedEvent>) -> PatientTimeline {
        PatientTimeline {
            patient_id: pid.into(),
            birth_date: birth,
            sex: Sex::Female,
            bmi: Some(27.0),
            demographics: BTreeMap::new(),
            events,
            first_record_date: first,
        }
    }

    #[test]
    fn index_selection_basics() {
        let codes = CodeTable::default();
        let t = timeline("P", d(1960, 1, 1), d(2015, 1, 1), vec![CodedEvent::new("P", d(2020, 1, 1), CodeSystem::Cpt, "99213")]);
        assert!(select_index_study(&t, &codes, 1).is_none());
        let t = timeline(
            "P",
            d(1960, 1, 1),
            d(2015, 1, 1),
            vec![imaging("P", d(2020, 1, 1), "71250", "R1"), imaging("P", d(2021, 1, 1), "70490", "R2")],
        );
        for seed in 0..5 {
            assert_eq!(select_index_study(&t, &codes, seed).unwrap().accession.as_deref(), Some("R1"));
        }
    }

    #[test]
    fn same_day_pick_is_uniform_and_permutation_invariant() {
        let codes = CodeTable::default();
        let mut first = 0;
        let n = 10_000;
        for i in 0..n {
            let pid = format!("P{i}");
            let a = imaging(&pid, d(2020, 3, 3), "71250", "A");
            let b = imaging(&pid, d(2020, 3, 3), "70490", "B");
            let t1 = timeline(&pid, d(1960, 1, 1), d(2015, 1, 1), vec![a.clone(), b.clone()]);
            let t2 = timeline(&pid, d(1960, 1, 1), d(2015, 1, 1), vec![b, a]);
            let p1 = select_index_study(&t1, &codes, 42).unwrap();
            let p2 = select_index_study(&t2, &codes, 42).unwrap();
            assert_eq!(p1, p2);
            if p1.accession.as_deref() == Some("A") {
                first += 1;
            }
        }
        let expected = n as f64 / 2.0;
        let chi2 = 2.0 * (first as f64 - expected).powi(2) / expected;
        // chi-square(1) upper 1% point
        assert!(chi2 < 6.635, "first picked {first} times, chi2 {chi2}");
    }

    #[test]
    fn eligibility_fixtures() {
        let codes = CodeTable::default();
        let idx = d(2021, 6, 1);
        let ev = |events| vec![imaging("P", idx, "71250", "R")].into_iter().chain(events).collect::<Vec<_>>();
        let mk = |birth, first, extra: Vec<CodedEvent>| {
            let mut t = timeline("P", birth, first, ev(extra));
            t.sort_events();
            t
        };

        let t = mk(d(2004, 1, 1), d(2015, 1, 1), vec![]);
        assert_eq!(eligibility(&t, idx, &codes), Eligibility::Excluded(ExclusionReason::Minor));

        let t = mk(d(1965, 1, 1), d(2020, 8, 1), vec![]);
        assert_eq!(eligibility(&t, idx, &codes), Eligibility::Excluded(ExclusionReason::InsufficientLookback));

        let t = mk(d(1965, 1, 1), d(2015, 1, 1), vec![CodedEvent::new("P", d(2020, 12, 1), CodeSystem::Icd10, "E04.1")]);
        assert_eq!(eligibility(&t, idx, &codes), Eligibility::Excluded(ExclusionReason::PriorThyroidHistory));

        let t = mk(d(1965, 1, 1), d(2019, 6, 1), vec![]);
        assert_eq!(age_years(t.birth_date, idx), 56);
        assert_eq!(eligibility(&t, idx, &codes), Eligibility::Eligible);

        // same-day exclusion code does not exclude
        let t = mk(d(1965, 1, 1), d(2015, 1, 1), vec![CodedEvent::new("P", idx, CodeSystem::Icd10, "C73")]);
        assert_eq!(eligibility(&t, idx, &codes), Eligibility::Eligible);
    }

    #[test]
    fn lookback_boundary_is_365_days() {
        let codes = CodeTable::default();
        let idx = d(2021, 6, 1);
        let ok = timeline("P", d(1960, 1, 1), idx - Days::new(365), vec![]);
        let short = timeline("P", d(1960, 1, 1), idx - Days::new(364), vec![]);
        assert_eq!(eligibility(&ok, idx, &codes), Eligibility::Eligible);
        assert_eq!(eligibility(&short, idx, &codes), Eligibility::Excluded(ExclusionReason::InsufficientLookback));
    }

    #[test]
    fn age_in_whole_years() {
        assert_eq!(age_years(d(2000, 6, 2), d(2018, 6, 1)), 17);
        assert_eq!(age_years(d(2000, 6, 1), d(2018, 6, 1)), 18);
    }

    #[test]
    fn eligibility_text_round_trip() {
        for e in [Eligibility::Eligible, Eligibility::Excluded(ExclusionReason::PriorThyroidHistory)] {
            assert_eq!(e.to_string().parse::<Eligibility>().unwrap(), e);
        }
        assert!("Excluded(Other)".parse::<Eligibility>().is_err());
    }

    #[test]
    fn timeline_validation() {
        let mut t = timeline(
            "P",
            d(1960, 1, 1),
            d(2015, 1, 1),
            vec![imaging("P", d(2021, 1, 1), "71250", "A"), imaging("P", d(2020, 1, 1), "71250", "B")],
        );
        assert_eq!(t.validate(), Err(TimelineError::Unsorted("P".into())));
        t.sort_events();
        assert_eq!(t.validate(), Ok(()));
        t.first_record_date = d(2020, 6, 1);
        assert_eq!(t.validate(), Err(TimelineError::EventBeforeFirstRecord("P".into())));
    }
}
