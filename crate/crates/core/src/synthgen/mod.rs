//! Seeded synthetic data: radiology reports with gold annotations and the
//! matching patient timelines, plus the ground truth each downstream stage
//! should recover.

mod report;
pub mod sizes;
mod timeline;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{Eligibility, ExclusionReason, PatientTimeline};
use crate::corpus::{AnnotatedReport, ReportDoc};
use crate::extract::{
    bin_size, round1, Attenuation, Density, Enhancement, FindingCount, Location, MetabolicActivity,
    MetabolicDistribution, RadiologyClass, Recommendation, SizeBin,
};
use crate::labels::{BodyGroup, EntityCategory, Modality, ReportLabel, Sex};
use crate::seed::indexed_rng;

use report::{Content, ItnPlan};
pub use sizes::{SizeParamError, SizeSampler};
pub use timeline::imaging_code;

pub const ANNOTATOR_ID: &str = "synthgen";
pub const REFERENCE_SPECIALTY: &str = "Emergency Medicine";

/// Presence rate of each attribute among nodular reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeaturePresence {
    pub location: f64,
    pub size: f64,
    pub recommendation: f64,
    pub density: f64,
    pub calcification: f64,
    pub attenuation: f64,
    pub metabolic_activity: f64,
    pub enhancement: f64,
}

impl Default for FeaturePresence {
    fn default() -> Self {
        Self {
            location: 0.772,
            size: 0.438,
            recommendation: 0.267,
            density: 0.140,
            calcification: 0.143,
            attenuation: 0.111,
            metabolic_activity: 0.089,
            enhancement: 0.038,
        }
    }
}

impl FeaturePresence {
    pub fn entries(&self) -> [(&'static str, f64); 8] {
        [
            ("location", self.location),
            ("size", self.size),
            ("recommendation", self.recommendation),
            ("density", self.density),
            ("calcification", self.calcification),
            ("attenuation", self.attenuation),
            ("metabolic_activity", self.metabolic_activity),
            ("enhancement", self.enhancement),
        ]
    }
}

/// Outcome rates within one arm (patients with or without a finding).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmRates {
    pub ultrasound: f64,
    pub nodule_dx: f64,
    pub biopsy: f64,
    pub partial_thyroidectomy: f64,
    pub total_thyroidectomy: f64,
    pub cancer: f64,
}

impl ArmRates {
    pub fn itf_default() -> Self {
        let n = 9077.0;
        Self {
            ultrasound: 1830.0 / n,
            nodule_dx: 2026.0 / n,
            biopsy: 555.0 / n,
            partial_thyroidectomy: 96.0 / n,
            total_thyroidectomy: 66.0 / n,
            cancer: 109.0 / n,
        }
    }

    pub fn no_itf_default() -> Self {
        let n = 106606.0;
        Self {
            ultrasound: 0.02,
            nodule_dx: 676.0 / n,
            biopsy: 148.0 / n,
            partial_thyroidectomy: 13.0 / n,
            total_thyroidectomy: 14.0 / n,
            cancer: 21.0 / n,
        }
    }

    fn entries(&self) -> [(&'static str, f64); 6] {
        [
            ("ultrasound", self.ultrasound),
            ("nodule_dx", self.nodule_dx),
            ("biopsy", self.biopsy),
            ("partial_thyroidectomy", self.partial_thyroidectomy),
            ("total_thyroidectomy", self.total_thyroidectomy),
            ("cancer", self.cancer),
        ]
    }

    /// Rates linkage can actually produce: every downstream outcome is
    /// anchored on an ultrasound, so none can exceed the ultrasound rate.
    pub fn attainable(&self) -> Self {
        let cap = |x: f64| x.min(self.ultrasound);
        Self {
            ultrasound: self.ultrasound,
            nodule_dx: cap(self.nodule_dx),
            biopsy: cap(self.biopsy),
            partial_thyroidectomy: cap(self.partial_thyroidectomy),
            total_thyroidectomy: cap(self.total_thyroidectomy),
            cancer: cap(self.cancer),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutcomeRates {
    pub itf: ArmRates,
    pub no_itf: ArmRates,
}

impl Default for OutcomeRates {
    fn default() -> Self {
        Self { itf: ArmRates::itf_default(), no_itf: ArmRates::no_itf_default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOdds {
    pub modality: Modality,
    pub body_group: BodyGroup,
    pub odds_ratio: f64,
}

/// Odds-ratio model for the probability that a report carries a finding.
/// The intercept is solved so that the mean probability equals the target
/// prevalence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ItfModel {
    pub female_or: f64,
    pub age_per5_or: f64,
    pub bmi_per5_or: f64,
    pub age_center: f64,
    pub bmi_center: f64,
    pub specialty_or: BTreeMap<String, f64>,
    /// Modality x body-region cells relative to CT chest; missing cells are 1.
    pub cell_or: Vec<CellOdds>,
}

/// (specialty, ordering share weight, odds ratio vs emergency medicine)
pub const SPECIALTIES: [(&str, f64, f64); 9] = [
    (REFERENCE_SPECIALTY, 613.0, 1.0),
    ("Cardiovascular", 666.0, 1.25),
    ("Internal Medicine", 841.0, 1.64),
    ("Family Medicine", 1074.0, 1.38),
    ("Medical Oncology", 294.0, 2.12),
    ("Hematology Oncology", 468.0, 2.05),
    ("Neurology", 676.0, 1.36),
    ("Pulmonary Medicine", 226.0, 1.44),
    ("Other", 3805.0, 1.92),
];

/// Modality x body cell odds ratios relative to CT chest.
pub const CELL_ODDS: [(Modality, BodyGroup, f64); 20] = [
    (Modality::Ct, BodyGroup::Chest, 1.0),
    (Modality::Ct, BodyGroup::Head, 0.59),
    (Modality::Ct, BodyGroup::Neck, 3.41),
    (Modality::Ct, BodyGroup::Mixed, 1.13),
    (Modality::Mri, BodyGroup::Chest, 0.25),
    (Modality::Mri, BodyGroup::Head, 0.12),
    (Modality::Mri, BodyGroup::Neck, 0.27),
    (Modality::Mri, BodyGroup::Mixed, 0.39),
    (Modality::NuclearMedicine, BodyGroup::Chest, 3.07),
    (Modality::NuclearMedicine, BodyGroup::Head, 0.49),
    (Modality::NuclearMedicine, BodyGroup::Neck, 25.54),
    (Modality::NuclearMedicine, BodyGroup::Mixed, 0.87),
    (Modality::Pet, BodyGroup::Chest, 5.90),
    (Modality::Pet, BodyGroup::Head, 0.14),
    (Modality::Pet, BodyGroup::Neck, 4.83),
    (Modality::Pet, BodyGroup::Mixed, 0.73),
    (Modality::Ultrasound, BodyGroup::Chest, 0.07),
    (Modality::Ultrasound, BodyGroup::Head, 0.17),
    (Modality::Ultrasound, BodyGroup::Neck, 0.12),
    (Modality::Ultrasound, BodyGroup::Mixed, 0.38),
];

impl Default for ItfModel {
    fn default() -> Self {
        Self {
            female_or: 1.83,
            age_per5_or: 1.095,
            bmi_per5_or: 1.03,
            age_center: 56.8,
            bmi_center: 29.1,
            specialty_or: SPECIALTIES.iter().map(|(s, _, or)| (s.to_string(), *or)).collect(),
            cell_or: CELL_ODDS
                .iter()
                .map(|(m, b, or)| CellOdds { modality: *m, body_group: *b, odds_ratio: *or })
                .collect(),
        }
    }
}

impl ItfModel {
    pub fn cell(&self, m: Modality, b: BodyGroup) -> f64 {
        self.cell_or.iter().find(|c| c.modality == m && c.body_group == b).map_or(1.0, |c| c.odds_ratio)
    }

    /// Log-odds without the intercept.
    fn linear_predictor(&self, b: &Baseline) -> f64 {
        let female = if b.sex == Sex::Female { self.female_or.ln() } else { 0.0 };
        let age = self.age_per5_or.ln() * (b.age as f64 - self.age_center) / 5.0;
        let bmi = self.bmi_per5_or.ln() * (b.bmi.unwrap_or(self.bmi_center) - self.bmi_center) / 5.0;
        let spec = self.specialty_or.get(&b.specialty).copied().unwrap_or(1.0).ln();
        female + age + bmi + spec + self.cell(b.modality, b.body).ln()
    }
}

fn normalized<K: Ord + Clone>(items: &[(K, f64)]) -> BTreeMap<K, f64> {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    items.iter().map(|(k, w)| (k.clone(), w / total)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub seed: u64,
    pub n_patients: usize,
    pub itf_prevalence: f64,
    pub itn_share: f64,
    pub feature_presence: FeaturePresence,
    pub size_mean_cm: f64,
    pub size_sd_cm: f64,
    pub modality_mix: BTreeMap<Modality, f64>,
    pub body_mix: BTreeMap<BodyGroup, f64>,
    pub specialty_mix: BTreeMap<String, f64>,
    /// Share of no-finding reports carrying a negated finding.
    pub negation_rate: f64,
    /// Share of no-finding reports with a normal thyroid next to a finding
    /// elsewhere.
    pub distractor_rate: f64,
    /// Share of negation and distractor reports written so that the
    /// lexicon rules get them wrong.
    pub hard_case_share: f64,
    pub duplicate_study_rate: f64,
    pub minor_rate: f64,
    pub short_lookback_rate: f64,
    pub prior_history_rate: f64,
    /// Eligible patients given a thyroid code on the index date itself.
    pub same_day_exclusion_rate: f64,
    pub bmi_missing_rate: f64,
    pub itf_model: ItfModel,
    pub outcomes: OutcomeRates,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_patients: 1000,
            itf_prevalence: 0.078,
            itn_share: 0.929,
            feature_presence: FeaturePresence::default(),
            size_mean_cm: 1.6,
            size_sd_cm: 1.2,
            modality_mix: normalized(&[
                (Modality::Ct, 72342.0),
                (Modality::Mri, 25438.0),
                (Modality::NuclearMedicine, 2742.0),
                (Modality::Pet, 8314.0),
                (Modality::Ultrasound, 6847.0),
            ]),
            body_mix: normalized(&[
                (BodyGroup::Head, 17183.0),
                (BodyGroup::Neck, 17926.0),
                (BodyGroup::Chest, 51973.0),
                (BodyGroup::Mixed, 28601.0),
            ]),
            specialty_mix: normalized(&SPECIALTIES.map(|(s, w, _)| (s.to_string(), w))),
            negation_rate: 0.15,
            distractor_rate: 0.10,
            hard_case_share: 0.02,
            duplicate_study_rate: 0.05,
            minor_rate: 0.01,
            short_lookback_rate: 0.02,
            prior_history_rate: 0.03,
            same_day_exclusion_rate: 0.01,
            bmi_missing_rate: 0.03,
            itf_model: ItfModel::default(),
            outcomes: OutcomeRates::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{field} must be a probability in [0, 1], got {value}")]
    Probability { field: String, value: f64 },
    #[error("{field} must sum to 1, got {sum}")]
    Distribution { field: String, sum: f64 },
    #[error("{field} must be positive, got {value}")]
    NonPositive { field: String, value: f64 },
    #[error(transparent)]
    Size(#[from] SizeParamError),
}

fn check_probability(field: &str, value: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ConfigError::Probability { field: field.to_string(), value })
    }
}

fn check_mix<K>(field: &str, mix: &BTreeMap<K, f64>) -> Result<(), ConfigError> {
    for v in mix.values() {
        check_probability(field, *v)?;
    }
    let sum: f64 = mix.values().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(ConfigError::Distribution { field: field.to_string(), sum });
    }
    Ok(())
}

fn check_positive(field: &str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::NonPositive { field: field.to_string(), value })
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let probs = [
            ("itf_prevalence", self.itf_prevalence),
            ("itn_share", self.itn_share),
            ("negation_rate", self.negation_rate),
            ("distractor_rate", self.distractor_rate),
            ("negation_rate + distractor_rate", self.negation_rate + self.distractor_rate),
            ("hard_case_share", self.hard_case_share),
            ("duplicate_study_rate", self.duplicate_study_rate),
            ("minor_rate", self.minor_rate),
            ("short_lookback_rate", self.short_lookback_rate),
            ("prior_history_rate", self.prior_history_rate),
            ("exclusion rates combined", self.minor_rate + self.short_lookback_rate + self.prior_history_rate),
            ("same_day_exclusion_rate", self.same_day_exclusion_rate),
            ("bmi_missing_rate", self.bmi_missing_rate),
        ];
        for (field, v) in probs {
            check_probability(field, v)?;
        }
        for (field, v) in self.feature_presence.entries() {
            check_probability(&format!("feature_presence.{field}"), v)?;
        }
        for (arm, rates) in [("itf", &self.outcomes.itf), ("no_itf", &self.outcomes.no_itf)] {
            for (field, v) in rates.entries() {
                check_probability(&format!("outcomes.{arm}.{field}"), v)?;
            }
        }
        check_mix("modality_mix", &self.modality_mix)?;
        check_mix("body_mix", &self.body_mix)?;
        check_mix("specialty_mix", &self.specialty_mix)?;
        let m = &self.itf_model;
        for (field, v) in [
            ("itf_model.female_or", m.female_or),
            ("itf_model.age_per5_or", m.age_per5_or),
            ("itf_model.bmi_per5_or", m.bmi_per5_or),
        ] {
            check_positive(field, v)?;
        }
        for (s, v) in &m.specialty_or {
            check_positive(&format!("itf_model.specialty_or.{s}"), *v)?;
        }
        for c in &m.cell_or {
            check_positive(&format!("itf_model.cell_or.{}/{}", c.modality, c.body_group), c.odds_ratio)?;
        }
        SizeSampler::new(self.size_mean_cm, self.size_sd_cm)?;
        Ok(())
    }
}

/// What the pipeline should recover for one patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientTruth {
    pub patient_id: String,
    pub label: ReportLabel,
    /// Index report first; a same-day second study follows when present.
    pub report_ids: Vec<String>,
    pub index_date: NaiveDate,
    pub eligibility: Eligibility,
    pub charlson_count: u32,
    pub ultrasound: bool,
    pub nodule_dx: bool,
    pub biopsy: bool,
    pub partial_thyroidectomy: bool,
    pub total_thyroidectomy: bool,
    pub cancer: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Synthetic {
    pub reports: Vec<ReportDoc>,
    pub gold: Vec<AnnotatedReport>,
    pub timelines: Vec<PatientTimeline>,
    pub truth: Vec<PatientTruth>,
}

/// Per-patient draws made before the finding model is calibrated.
pub(crate) struct Baseline {
    pub patient_id: String,
    pub index: usize,
    pub sex: Sex,
    pub age: u32,
    pub bmi: Option<f64>,
    pub modality: Modality,
    pub body: BodyGroup,
    pub specialty: String,
    pub demographics: BTreeMap<String, String>,
    pub exclusion: Option<ExclusionReason>,
    pub duplicate: Option<BodyGroup>,
}

/// Draws one key from a categorical distribution.
pub(crate) fn weighted<K: Clone, R: Rng + ?Sized>(rng: &mut R, items: impl IntoIterator<Item = (K, f64)>) -> K {
    let items: Vec<(K, f64)> = items.into_iter().collect();
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut u = rng.random::<f64>() * total;
    for (k, w) in &items {
        if u < *w {
            return k.clone();
        }
        u -= w;
    }
    items.iter().rev().find(|(_, w)| *w > 0.0).or(items.last()).expect("non-empty distribution").0.clone()
}

fn mix<K: Clone>(m: &BTreeMap<K, f64>) -> impl Iterator<Item = (K, f64)> + '_ {
    m.iter().map(|(k, v)| (k.clone(), *v))
}

const FEMALE_SHARE: f64 = 61213.0 / 115640.0;

impl Baseline {
    fn draw(cfg: &GenConfig, index: usize) -> (Self, ChaCha8Rng) {
        let mut rng = indexed_rng(cfg.seed, index as u64);
        let u: f64 = rng.random();
        let exclusion = if u < cfg.minor_rate {
            Some(ExclusionReason::Minor)
        } else if u < cfg.minor_rate + cfg.short_lookback_rate {
            Some(ExclusionReason::InsufficientLookback)
        } else if u < cfg.minor_rate + cfg.short_lookback_rate + cfg.prior_history_rate {
            Some(ExclusionReason::PriorThyroidHistory)
        } else {
            None
        };
        let sex = if rng.random_bool(FEMALE_SHARE) { Sex::Female } else { Sex::Male };
        let age = if exclusion == Some(ExclusionReason::Minor) {
            rng.random_range(16..=17)
        } else {
            let x: f64 = Normal::new(56.8, 17.2).unwrap().sample(&mut rng);
            x.clamp(18.0, 95.0).floor() as u32
        };
        let bmi = if rng.random_bool(cfg.bmi_missing_rate) {
            None
        } else {
            let x: f64 = Normal::new(29.1, 7.1).unwrap().sample(&mut rng);
            Some(round1(x.clamp(14.0, 70.0)))
        };
        let modality = weighted(&mut rng, mix(&cfg.modality_mix));
        let body = weighted(&mut rng, mix(&cfg.body_mix));
        let specialty = weighted(&mut rng, mix(&cfg.specialty_mix));
        let demographics = timeline::draw_demographics(&mut rng);
        let duplicate = rng.random_bool(cfg.duplicate_study_rate).then(|| {
            let others: Vec<(BodyGroup, f64)> =
                BodyGroup::ALL.iter().filter(|b| **b != body).map(|b| (*b, 1.0)).collect();
            weighted(&mut rng, others)
        });
        let b = Baseline {
            patient_id: format!("P{:07}", index + 1),
            index,
            sex,
            age,
            bmi,
            modality,
            body,
            specialty,
            demographics,
            exclusion,
            duplicate,
        };
        (b, rng)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Intercept making the mean predicted probability equal `target`.
fn solve_intercept(eta: &[f64], target: f64) -> f64 {
    if target <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if target >= 1.0 {
        return f64::INFINITY;
    }
    let mean_p = |b0: f64| eta.iter().map(|e| sigmoid(b0 + e)).sum::<f64>() / eta.len() as f64;
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_p(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

const LOCATION_WEIGHTS: [(Location, f64); 4] = [
    (Location::Bilateral, 1755.0),
    (Location::Isthmus, 9.0),
    (Location::Left, 2253.0),
    (Location::Right, 2487.0),
];
const DENSITY_WEIGHTS: [(Density, f64); 3] =
    [(Density::Low, 1095.0), (Density::Heterogeneous, 36.0), (Density::High, 28.0)];
const ATTENUATION_WEIGHTS: [(Attenuation, f64); 4] = [
    (Attenuation::Low, 849.0),
    (Attenuation::Heterogeneous, 43.0),
    (Attenuation::High, 12.0),
    (Attenuation::Unspecified, 31.0),
];
const ENHANCEMENT_WEIGHTS: [(Enhancement, f64); 4] = [
    (Enhancement::Low, 1.0),
    (Enhancement::High, 2.0),
    (Enhancement::Heterogeneous, 16.0),
    (Enhancement::Enhancing, 303.0),
];
const METABOLIC_WEIGHTS: [(MetabolicActivity, f64); 6] = [
    (MetabolicActivity::Ambiguous, 353.0),
    (MetabolicActivity::Hypermetabolic, 295.0),
    (MetabolicActivity::LowMetabolic, 55.0),
    (MetabolicActivity::MidMetabolic, 10.0),
    (MetabolicActivity::NonMetabolic, 31.0),
    (MetabolicActivity::Physiological, 9.0),
];
const DISTRIBUTION_WEIGHTS: [(MetabolicDistribution, f64); 3] = [
    (MetabolicDistribution::Diffuse, 145.0),
    (MetabolicDistribution::Focal, 107.0),
    (MetabolicDistribution::NotDescribed, 507.0),
];
const RECOMMENDATION_WEIGHTS: [(Recommendation, f64); 3] = [
    (Recommendation::Ultrasound, 1585.0),
    (Recommendation::NonUltrasoundImaging, 226.0),
    (Recommendation::Other, 438.0),
];
const CLASS_WEIGHTS: [(RadiologyClass, f64); 3] =
    [(RadiologyClass::Benign, 0.6), (RadiologyClass::Indeterminate, 0.3), (RadiologyClass::Malignant, 0.1)];

/// Run-wide quantities derived from the first pass over all patients.
struct Calibrated {
    intercept: f64,
    /// Metabolic-activity probability for PET and nuclear-medicine nodules.
    metabolic_given_functional: f64,
    sampler: SizeSampler,
}

fn is_functional(m: Modality) -> bool {
    matches!(m, Modality::Pet | Modality::NuclearMedicine)
}

fn draw_itn_plan<R: Rng + ?Sized>(rng: &mut R, cfg: &GenConfig, cal: &Calibrated, modality: Modality) -> ItnPlan {
    let fp = &cfg.feature_presence;
    let location = rng.random_bool(fp.location).then(|| weighted(rng, LOCATION_WEIGHTS));
    let size_cm = rng.random_bool(fp.size).then(|| cal.sampler.sample(rng));
    let qualitative_size = size_cm.is_none() && rng.random_bool(0.05);
    let density = rng.random_bool(fp.density).then(|| weighted(rng, DENSITY_WEIGHTS));
    let calcified = rng.random_bool(fp.calcification);
    let attenuation = rng.random_bool(fp.attenuation).then(|| weighted(rng, ATTENUATION_WEIGHTS));
    let enhancement = rng.random_bool(fp.enhancement).then(|| weighted(rng, ENHANCEMENT_WEIGHTS));
    let p_metabolic = if is_functional(modality) { cal.metabolic_given_functional } else { 0.0 };
    let metabolic = rng
        .random_bool(p_metabolic)
        .then(|| (weighted(rng, METABOLIC_WEIGHTS), weighted(rng, DISTRIBUTION_WEIGHTS)));
    let recommendation = rng.random_bool(fp.recommendation).then(|| weighted(rng, RECOMMENDATION_WEIGHTS));
    let count = if location == Some(Location::Bilateral) {
        rng.random_bool(0.1).then_some(FindingCount::Multiple)
    } else {
        match rng.random_range(0..100) {
            0..8 => Some(FindingCount::Single),
            8..15 => Some(FindingCount::Multiple),
            _ => None,
        }
    };
    let class = rng.random_bool(0.05).then(|| weighted(rng, CLASS_WEIGHTS));
    let associated = rng.random_bool(0.02);
    ItnPlan {
        location,
        size_cm,
        qualitative_size,
        density,
        attenuation,
        enhancement,
        calcified,
        metabolic,
        recommendation,
        count,
        class,
        associated,
    }
}

fn draw_content<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &GenConfig,
    cal: &Calibrated,
    label: ReportLabel,
    modality: Modality,
) -> Content {
    match label {
        ReportLabel::Itn => Content::Itn(draw_itn_plan(rng, cfg, cal, modality)),
        ReportLabel::NonNodular => Content::NonNodular,
        ReportLabel::NoFinding => {
            let u: f64 = rng.random();
            if u < cfg.negation_rate {
                Content::Negation { hard: rng.random_bool(cfg.hard_case_share) }
            } else if u < cfg.negation_rate + cfg.distractor_rate {
                Content::Distractor { hard: rng.random_bool(cfg.hard_case_share) }
            } else {
                Content::Clean { mention: rng.random_bool(0.5) }
            }
        }
    }
}

struct PatientOut {
    reports: Vec<ReportDoc>,
    gold: Vec<AnnotatedReport>,
    timeline: PatientTimeline,
    truth: PatientTruth,
}

fn build_patient(cfg: &GenConfig, cal: &Calibrated, b: Baseline, mut rng: ChaCha8Rng, eta: f64) -> PatientOut {
    let p = sigmoid(cal.intercept + eta);
    let label = if !rng.random_bool(p) {
        ReportLabel::NoFinding
    } else if rng.random_bool(cfg.itn_share) {
        ReportLabel::Itn
    } else {
        ReportLabel::NonNodular
    };
    let content = draw_content(&mut rng, cfg, cal, label, b.modality);
    let mut report_ids = vec![format!("R{:07}", b.index + 1)];
    if b.duplicate.is_some() {
        report_ids.push(format!("R{:07}b", b.index + 1));
    }
    let built = timeline::build(&mut rng, cfg, &b, label.is_itf(), &report_ids);

    let bodies = std::iter::once(b.body).chain(b.duplicate);
    let mut reports = Vec::new();
    let mut gold = Vec::new();
    for (id, body) in report_ids.iter().zip(bodies) {
        let (text, spans) = report::render(&mut rng, b.modality, body, &content);
        reports.push(ReportDoc {
            report_id: id.clone(),
            patient_id: b.patient_id.clone(),
            study_date: built.index_date,
            modality: b.modality,
            body_group: body,
            text,
        });
        gold.push(AnnotatedReport {
            report_id: id.clone(),
            annotator_id: ANNOTATOR_ID.to_string(),
            report_label: label,
            spans,
        });
    }
    let eligibility = b.exclusion.map_or(Eligibility::Eligible, Eligibility::Excluded);
    let truth = PatientTruth {
        patient_id: b.patient_id.clone(),
        label,
        report_ids,
        index_date: built.index_date,
        eligibility,
        charlson_count: built.charlson_count,
        ultrasound: built.planned.ultrasound,
        nodule_dx: built.planned.nodule_dx,
        biopsy: built.planned.biopsy,
        partial_thyroidectomy: built.planned.partial,
        total_thyroidectomy: built.planned.total,
        cancer: built.planned.cancer,
    };
    PatientOut { reports, gold, timeline: built.timeline, truth }
}

/// Generates the full synthetic data set. Each patient draws from its own
/// stream derived from `(seed, patient index)`, so output does not depend
/// on thread count.
pub fn generate(cfg: &GenConfig) -> Result<Synthetic, ConfigError> {
    cfg.validate()?;
    let sampler = SizeSampler::new(cfg.size_mean_cm, cfg.size_sd_cm)?;
    let baselines: Vec<(Baseline, ChaCha8Rng)> =
        (0..cfg.n_patients).into_par_iter().map(|i| Baseline::draw(cfg, i)).collect();
    let eta: Vec<f64> = baselines.iter().map(|(b, _)| cfg.itf_model.linear_predictor(b)).collect();
    let intercept = if eta.is_empty() { 0.0 } else { solve_intercept(&eta, cfg.itf_prevalence) };

    let (mut functional, mut all) = (0.0, 0.0);
    for ((b, _), e) in baselines.iter().zip(&eta) {
        let p = sigmoid(intercept + e);
        all += p;
        if is_functional(b.modality) {
            functional += p;
        }
    }
    let metabolic_given_functional =
        if functional > 0.0 { (cfg.feature_presence.metabolic_activity * all / functional).min(1.0) } else { 0.0 };
    let cal = Calibrated { intercept, metabolic_given_functional, sampler };

    let patients: Vec<PatientOut> = baselines
        .into_par_iter()
        .zip(eta)
        .map(|((b, rng), e)| build_patient(cfg, &cal, b, rng, e))
        .collect();
    let mut out = Synthetic::default();
    for p in patients {
        out.reports.extend(p.reports);
        out.gold.extend(p.gold);
        out.timelines.push(p.timeline);
        out.truth.push(p.truth);
    }
    Ok(out)
}

/// Empirical calibration of a generated set, read back from the gold
/// annotations of each patient's index report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub patients: usize,
    pub itf: usize,
    pub itn: usize,
    pub itf_prevalence: f64,
    pub itn_share: f64,
    /// Presence rate among nodular reports, keyed like `FeaturePresence`.
    pub feature_rates: BTreeMap<String, f64>,
    pub sized: usize,
    pub size_mean_cm: f64,
    pub size_sd_cm: f64,
    pub size_bins: BTreeMap<SizeBin, f64>,
}

fn has_prefix(a: &AnnotatedReport, cat: EntityCategory, prefix: &str) -> bool {
    a.spans.iter().any(|s| s.category == cat && s.subtype.as_deref().is_some_and(|t| t.starts_with(prefix)))
}

pub fn calibration(data: &Synthetic) -> Calibration {
    let gold: BTreeMap<&str, &AnnotatedReport> = data.gold.iter().map(|g| (g.report_id.as_str(), g)).collect();
    let index: Vec<&AnnotatedReport> = data.truth.iter().filter_map(|t| gold.get(t.report_ids[0].as_str()).copied()).collect();
    let itf = index.iter().filter(|a| a.report_label.is_itf()).count();
    let itns: Vec<&&AnnotatedReport> = index.iter().filter(|a| a.report_label == ReportLabel::Itn).collect();
    let rc = EntityCategory::RadiologicalCharacteristic;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut sizes = Vec::new();
    for a in &itns {
        let mut feature = |name: &str, present: bool| *counts.entry(name.to_string()).or_default() += present as usize;
        feature("location", a.spans.iter().any(|s| s.category == EntityCategory::Location));
        feature("recommendation", a.spans.iter().any(|s| s.category == EntityCategory::Recommendation));
        feature("density", has_prefix(a, rc, "density:"));
        feature("calcification", has_prefix(a, rc, "calcification:"));
        feature("attenuation", has_prefix(a, rc, "attenuation:"));
        feature("metabolic_activity", has_prefix(a, rc, "metabolic:"));
        feature("enhancement", has_prefix(a, rc, "enhancement:"));
        let size = a
            .spans
            .iter()
            .filter(|s| s.category == EntityCategory::Size)
            .filter_map(|s| s.subtype.as_deref()?.parse::<f64>().ok())
            .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
        feature("size", size.is_some());
        sizes.extend(size);
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let n = sizes.len();
    let mean = if n == 0 { 0.0 } else { sizes.iter().sum::<f64>() / n as f64 };
    let sd = if n < 2 { 0.0 } else { (sizes.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() };
    let mut size_bins: BTreeMap<SizeBin, f64> = SizeBin::ALL.iter().map(|b| (*b, 0.0)).collect();
    for s in &sizes {
        *size_bins.get_mut(&bin_size(*s).expect("positive")).unwrap() += 1.0 / n as f64;
    }
    Calibration {
        patients: index.len(),
        itf,
        itn: itns.len(),
        itf_prevalence: ratio(itf, index.len()),
        itn_share: ratio(itns.len(), itf),
        feature_rates: counts.into_iter().map(|(k, c)| (k, ratio(c, itns.len()))).collect(),
        sized: n,
        size_mean_cm: mean,
        size_sd_cm: sd,
        size_bins,
    }
}
