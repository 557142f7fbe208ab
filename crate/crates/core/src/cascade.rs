//! Links cohort rows to the downstream diagnostic cascade.

use std::collections::{BTreeSet, HashMap};

use chrono::{Days, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codes::{
    CodeTable, BIOPSY, PARTIAL_THYROIDECTOMY, THYROIDECTOMY, THYROID_CANCER, THYROID_NODULE, ULTRASOUND_THYROID,
};
use crate::cohort::{CohortRow, PatientTimeline};
use crate::labels::named_enum;

pub const WINDOW_DAYS: u64 = 180;

named_enum!(
    CancerBasis {
        PostSurgerySingleCode => "PostSurgerySingleCode",
        ThreeCodes => "ThreeCodes",
        None => "None",
    }
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeOutcomes {
    pub patient_id: String,
    pub had_itf: bool,
    pub ultrasound_date: Option<NaiveDate>,
    pub nodule_dx: bool,
    pub biopsy: bool,
    pub partial_thyroidectomy: bool,
    pub total_thyroidectomy: bool,
    pub cancer_confirmed: bool,
    pub cancer_basis: CancerBasis,
}

/// Half-open date window `(after, through]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub after: NaiveDate,
    pub through: NaiveDate,
}

impl Window {
    pub fn following(anchor: NaiveDate) -> Self {
        Self { after: anchor, through: anchor + Days::new(WINDOW_DAYS) }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        d > self.after && d <= self.through
    }
}

fn dates_in(timeline: &PatientTimeline, codes: &CodeTable, set: &str, window: Option<Window>) -> Vec<NaiveDate> {
    timeline
        .events
        .iter()
        .filter(|e| window.is_none_or(|w| w.contains(e.date)))
        .filter(|e| codes.in_set(set, e.system, &e.code))
        .map(|e| e.date)
        .collect()
}

/// Earliest thyroid ultrasound in `(index, index + 180]`.
pub fn link_ultrasound(timeline: &PatientTimeline, index_date: NaiveDate, codes: &CodeTable) -> Option<NaiveDate> {
    dates_in(timeline, codes, ULTRASOUND_THYROID, Some(Window::following(index_date))).into_iter().min()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DownstreamFlags {
    pub nodule_dx: bool,
    pub biopsy: bool,
    pub partial_thyroidectomy: bool,
    pub total_thyroidectomy: bool,
    /// Earliest thyroidectomy (partial or total) inside the window.
    pub surgery_date: Option<NaiveDate>,
}

/// Outcome flags inside `(ultrasound, ultrasound + 180]`; all false without
/// an ultrasound.
pub fn link_downstream(timeline: &PatientTimeline, ultrasound: Option<NaiveDate>, codes: &CodeTable) -> DownstreamFlags {
    let Some(us) = ultrasound else {
        return DownstreamFlags::default();
    };
    let w = Some(Window::following(us));
    let partial = dates_in(timeline, codes, PARTIAL_THYROIDECTOMY, w);
    let total = dates_in(timeline, codes, THYROIDECTOMY, w);
    DownstreamFlags {
        nodule_dx: !dates_in(timeline, codes, THYROID_NODULE, w).is_empty(),
        biopsy: !dates_in(timeline, codes, BIOPSY, w).is_empty(),
        partial_thyroidectomy: !partial.is_empty(),
        total_thyroidectomy: !total.is_empty(),
        surgery_date: partial.iter().chain(&total).min().copied(),
    }
}

/// Cancer confirmation: one code strictly after surgery, or codes on at
/// least three distinct dates when there was no surgery. Only codes inside
/// `window` are considered when one is given.
pub fn confirm_cancer(
    timeline: &PatientTimeline,
    surgery_date: Option<NaiveDate>,
    codes: &CodeTable,
    window: Option<Window>,
) -> (bool, CancerBasis) {
    let cancer = dates_in(timeline, codes, THYROID_CANCER, window);
    match surgery_date {
        Some(s) => {
            if cancer.iter().any(|d| *d > s) {
                (true, CancerBasis::PostSurgerySingleCode)
            } else {
                (false, CancerBasis::None)
            }
        }
        None => {
            let distinct: BTreeSet<NaiveDate> = cancer.into_iter().collect();
            if distinct.len() >= 3 {
                (true, CancerBasis::ThreeCodes)
            } else {
                (false, CancerBasis::None)
            }
        }
    }
}

pub fn link_patient(row: &CohortRow, timeline: &PatientTimeline, had_itf: bool, codes: &CodeTable) -> CascadeOutcomes {
    let us = link_ultrasound(timeline, row.index_date, codes);
    let flags = link_downstream(timeline, us, codes);
    let (cancer_confirmed, cancer_basis) = match us {
        Some(u) => confirm_cancer(timeline, flags.surgery_date, codes, Some(Window::following(u))),
        None => (false, CancerBasis::None),
    };
    CascadeOutcomes {
        patient_id: row.patient_id.clone(),
        had_itf,
        ultrasound_date: us,
        nodule_dx: flags.nodule_dx,
        biopsy: flags.biopsy,
        partial_thyroidectomy: flags.partial_thyroidectomy,
        total_thyroidectomy: flags.total_thyroidectomy,
        cancer_confirmed,
        cancer_basis,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkSummary {
    pub linked: usize,
    pub skipped_ineligible: usize,
    pub missing_timeline: usize,
    pub missing_finding: usize,
}

/// Links every eligible row. `itf_by_report` maps report id to whether the
/// report carried an incidental thyroid finding.
pub fn link_cohort(
    rows: &[CohortRow],
    timelines: &HashMap<String, PatientTimeline>,
    itf_by_report: &HashMap<String, bool>,
    codes: &CodeTable,
) -> (Vec<CascadeOutcomes>, LinkSummary) {
    let mut summary = LinkSummary::default();
    let mut work = Vec::new();
    for row in rows {
        if !row.eligibility.is_eligible() {
            summary.skipped_ineligible += 1;
            continue;
        }
        let Some(t) = timelines.get(&row.patient_id) else {
            summary.missing_timeline += 1;
            continue;
        };
        let itf = row.index_report_id.as_ref().and_then(|r| itf_by_report.get(r)).copied();
        if itf.is_none() {
            summary.missing_finding += 1;
        }
        work.push((row, t, itf.unwrap_or(false)));
    }
    let mut out: Vec<CascadeOutcomes> =
        work.par_iter().map(|(row, t, itf)| link_patient(row, t, *itf, codes)).collect();
    out.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    summary.linked = out.len();
    (out, summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::CodeSystem;
    use crate::cohort::CodedEvent;
    use crate::labels::Sex;
    use std::collections::BTreeMap;

    fn day(n: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 1, 1).unwrap() + chrono::Duration::days(n)
    }

    fn ev(n: i64, system: CodeSystem, code: &str) -> CodedEvent {
        CodedEvent::new("P", day(n), system, code)
    }

    fn tl(mut events: Vec<CodedEvent>) -> PatientTimeline {
        events.sort_by_key(|e| e.date);
        PatientTimeline {
            patient_id: "P".into(),
            birth_date: NaiveDate::from_ymd_opt(1960, 1, 1).unwrap(),
            sex: Sex::Male,
            bmi: None,
            demographics: BTreeMap::new(),
            events,
            first_record_date: day(-1000),
        }
    }

    const US: &str = "76536";

    #[test]
    fn ultrasound_window_edges() {
        let c = CodeTable::default();
        assert_eq!(link_ultrasound(&tl(vec![ev(180, CodeSystem::Cpt, US)]), day(0), &c), Some(day(180)));
        assert_eq!(link_ultrasound(&tl(vec![ev(181, CodeSystem::Cpt, US)]), day(0), &c), None);
        assert_eq!(link_ultrasound(&tl(vec![ev(0, CodeSystem::Cpt, US)]), day(0), &c), None);
        assert_eq!(link_ultrasound(&tl(vec![]), day(0), &c), None);
        let t = tl(vec![ev(50, CodeSystem::Cpt, US), ev(20, CodeSystem::Cpt, US)]);
        assert_eq!(link_ultrasound(&t, day(0), &c), Some(day(20)));
    }

    #[test]
    fn downstream_fixtures() {
        let c = CodeTable::default();
        let t = tl(vec![ev(30, CodeSystem::Cpt, "60100"), ev(200, CodeSystem::Cpt, "60240")]);
        let f = link_downstream(&t, Some(day(0)), &c);
        assert!(f.biopsy);
        assert!(!f.total_thyroidectomy);
        assert_eq!(link_downstream(&t, None, &c), DownstreamFlags::default());
    }

    #[test]
    fn cancer_fixtures() {
        let c = CodeTable::default();
        let t = tl(vec![ev(120, CodeSystem::Icd10, "C73")]);
        assert_eq!(confirm_cancer(&t, Some(day(100)), &c, None), (true, CancerBasis::PostSurgerySingleCode));
        let t = tl(vec![ev(10, CodeSystem::Icd10, "C73"), ev(40, CodeSystem::Icd10, "C73")]);
        assert_eq!(confirm_cancer(&t, None, &c, None), (false, CancerBasis::None));
        let t = tl(vec![ev(10, CodeSystem::Icd10, "C73"), ev(40, CodeSystem::Icd9, "193"), ev(90, CodeSystem::Icd10, "C73.9")]);
        assert_eq!(confirm_cancer(&t, None, &c, None), (true, CancerBasis::ThreeCodes));
        let t = tl(vec![ev(90, CodeSystem::Icd10, "C73")]);
        assert_eq!(confirm_cancer(&t, Some(day(100)), &c, None), (false, CancerBasis::None));
        let t = tl(vec![ev(10, CodeSystem::Icd10, "C73"), ev(10, CodeSystem::Icd10, "C73"), ev(10, CodeSystem::Icd10, "C73")]);
        assert_eq!(confirm_cancer(&t, None, &c, None), (false, CancerBasis::None));
        let t = tl(vec![ev(100, CodeSystem::Icd10, "C73")]);
        assert_eq!(confirm_cancer(&t, Some(day(100)), &c, None), (false, CancerBasis::None));
    }

    #[test]
    fn anchoring_removes_downstream() {
        let c = CodeTable::default();
        let events = vec![
            ev(10, CodeSystem::Cpt, US),
            ev(20, CodeSystem::Cpt, "60100"),
            ev(40, CodeSystem::Cpt, "60240"),
            ev(50, CodeSystem::Icd10, "C73"),
            ev(25, CodeSystem::Icd10, "E04.1"),
        ];
        let row_date = day(0);
        let with = tl(events.clone());
        let us = link_ultrasound(&with, row_date, &c);
        let f = link_downstream(&with, us, &c);
        assert!(f.biopsy && f.total_thyroidectomy && f.nodule_dx && !f.partial_thyroidectomy);
        assert_eq!(f.surgery_date, Some(day(40)));
        let without = tl(events.into_iter().filter(|e| e.code != US).collect());
        let us = link_ultrasound(&without, row_date, &c);
        assert_eq!(link_downstream(&without, us, &c), DownstreamFlags::default());
    }
}
