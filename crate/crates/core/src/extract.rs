//! Stage-2 attribute extraction for nodular reports.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{EntitySpan, ReportDoc};
use crate::detect::{is_negated, Classification, CompiledLexicon, ThyroidScan};
use crate::labels::{named_enum, EntityCategory, ReportLabel};
use crate::matcher::{TermMatch, TermMatcher};
use crate::text::{ByteToChar, Segmented};

named_enum!(
    Location {
        Right => "Right",
        Left => "Left",
        Bilateral => "Bilateral",
        Isthmus => "Isthmus",
    }
);

named_enum!(
    SizeBin {
        UpTo1 => "≤1.0",
        From1To2 => "1.1–2.0",
        From2To3 => "2.1–3.0",
        From3To4 => "3.1–4.0",
        Over4 => ">4.0",
    }
);

named_enum!(
    Density {
        Low => "Low",
        Heterogeneous => "Heterogeneous",
        High => "High",
    }
);

named_enum!(
    Enhancement {
        Low => "Low",
        High => "High",
        Heterogeneous => "Heterogeneous",
        Enhancing => "Enhancing",
    }
);

named_enum!(
    Attenuation {
        Low => "Low",
        Heterogeneous => "Heterogeneous",
        High => "High",
        Unspecified => "Unspecified",
    }
);

named_enum!(
    MetabolicActivity {
        Hypermetabolic => "Hypermetabolic",
        LowMetabolic => "LowMetabolic",
        MidMetabolic => "MidMetabolic",
        NonMetabolic => "NonMetabolic",
        Physiological => "Physiological",
        Ambiguous => "Ambiguous",
    }
);

impl MetabolicActivity {
    /// Higher wins when a report carries several descriptors.
    fn priority(self) -> u8 {
        match self {
            MetabolicActivity::Hypermetabolic => 5,
            MetabolicActivity::MidMetabolic => 4,
            MetabolicActivity::LowMetabolic => 3,
            MetabolicActivity::Physiological => 2,
            MetabolicActivity::NonMetabolic => 1,
            MetabolicActivity::Ambiguous => 0,
        }
    }
}

named_enum!(
    MetabolicDistribution {
        Diffuse => "Diffuse",
        Focal => "Focal",
        NotDescribed => "NotDescribed",
    }
);

named_enum!(
    Recommendation {
        Ultrasound => "Ultrasound",
        NonUltrasoundImaging => "NonUltrasoundImaging",
        Other => "Other",
    }
);

impl Recommendation {
    fn precedence(self) -> u8 {
        match self {
            Recommendation::Ultrasound => 2,
            Recommendation::NonUltrasoundImaging => 1,
            Recommendation::Other => 0,
        }
    }
}

named_enum!(
    FindingCount {
        Single => "Single",
        Multiple => "Multiple",
    }
);

named_enum!(
    RadiologyClass {
        Benign => "Benign",
        Malignant => "Malignant",
        Indeterminate => "Indeterminate",
    }
);

/// Normalized per-report output of the two-stage pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingResult {
    pub report_id: String,
    pub label: ReportLabel,
    pub location: Option<Location>,
    pub size_cm: Option<f64>,
    pub size_bin: Option<SizeBin>,
    pub density: Option<Density>,
    pub enhancement: Option<Enhancement>,
    pub calcified: Option<bool>,
    pub attenuation: Option<Attenuation>,
    pub metabolic_activity: Option<MetabolicActivity>,
    pub metabolic_distribution: Option<MetabolicDistribution>,
    pub recommendation: Option<Recommendation>,
    pub spans: Vec<EntitySpan>,
}

impl FindingResult {
    pub fn empty(report_id: &str, label: ReportLabel) -> Self {
        Self {
            report_id: report_id.to_string(),
            label,
            location: None,
            size_cm: None,
            size_bin: None,
            density: None,
            enhancement: None,
            calcified: None,
            attenuation: None,
            metabolic_activity: None,
            metabolic_distribution: None,
            recommendation: None,
            spans: Vec::new(),
        }
    }

    pub fn has_nodule_attributes(&self) -> bool {
        self.location.is_some()
            || self.size_cm.is_some()
            || self.size_bin.is_some()
            || self.density.is_some()
            || self.enhancement.is_some()
            || self.calcified.is_some()
            || self.attenuation.is_some()
            || self.metabolic_activity.is_some()
            || self.metabolic_distribution.is_some()
            || self.recommendation.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractWarning {
    pub report_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SizeError {
    #[error("size must be positive, got {0}")]
    NonPositive(f64),
}

/// Half-away-from-zero rounding to one decimal. The small guard absorbs
/// binary representation error so that 4.05 rounds to 4.1.
pub fn round1(x: f64) -> f64 {
    let scaled = x * 10.0;
    (scaled.abs() + 1e-9).round().copysign(scaled) / 10.0
}

pub fn bin_size(size_cm: f64) -> Result<SizeBin, SizeError> {
    if size_cm.is_nan() || size_cm <= 0.0 {
        return Err(SizeError::NonPositive(size_cm));
    }
    let tenths = (round1(size_cm) * 10.0).round() as i64;
    Ok(match tenths {
        ..=10 => SizeBin::UpTo1,
        11..=20 => SizeBin::From1To2,
        21..=30 => SizeBin::From2To3,
        31..=40 => SizeBin::From3To4,
        _ => SizeBin::Over4,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParsedSize {
    /// Largest dimension in centimetres, one decimal.
    Measured(f64),
    Qualitative,
}

const QUALITATIVE_SIZES: &[&str] = &["tiny", "small", "massive", "large", "subcentimeter"];

static SIZE_RE: LazyLock<Regex> = LazyLock::new(|| {
    let dim = r"\d+(?:\.\d+)?(?:\s*(?:cm|mm))?";
    Regex::new(&format!(r"(?i)\b{dim}(?:\s*[x×]\s*{dim}){{0,2}}\b")).unwrap()
});
static DIM_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)(\d+(?:\.\d+)?)\s*(cm|mm)?").unwrap());
static UNIT_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(?:cm|mm)\b").unwrap());
static QUAL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"(?i)\b(?:{})\b", QUALITATIVE_SIZES.join("|"))).unwrap());

/// Converts one size expression match to centimetres. A dimension without
/// its own unit borrows the next unit to its right; `None` when the
/// expression carries no unit at all.
fn measure(expr: &str) -> Option<f64> {
    let dims: Vec<(f64, Option<bool>)> = DIM_RE
        .captures_iter(expr)
        .map(|c| {
            let v: f64 = c[1].parse().unwrap();
            let mm = c.get(2).map(|u| u.as_str().eq_ignore_ascii_case("mm"));
            (v, mm)
        })
        .collect();
    let mut unit = None;
    let mut best: Option<f64> = None;
    for (v, u) in dims.iter().rev() {
        if u.is_some() {
            unit = *u;
        }
        let mm = unit?;
        let cm = if mm { v / 10.0 } else { *v };
        best = Some(best.map_or(cm, |b: f64| b.max(cm)));
    }
    best.map(round1)
}

/// Parses the first size expression in `fragment`.
pub fn parse_size(fragment: &str) -> Option<ParsedSize> {
    for m in SIZE_RE.find_iter(fragment) {
        if let Some(cm) = measure(m.as_str()) {
            return Some(ParsedSize::Measured(cm));
        }
    }
    QUAL_RE.is_match(fragment).then_some(ParsedSize::Qualitative)
}

/// Collapses location mentions to one value.
pub fn infer_bilaterality(locations: &[Location]) -> Option<Location> {
    if locations.is_empty() {
        return None;
    }
    let has = |l: Location| locations.contains(&l);
    if has(Location::Bilateral) || (has(Location::Right) && has(Location::Left)) {
        Some(Location::Bilateral)
    } else if has(Location::Right) {
        Some(Location::Right)
    } else if has(Location::Left) {
        Some(Location::Left)
    } else {
        Some(Location::Isthmus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tag {
    Location(Location),
    Density(Density),
    Attenuation(Attenuation),
    Enhancement(Enhancement),
    Calcification,
    Metabolic(MetabolicActivity),
    Distribution(MetabolicDistribution),
    Count(FindingCount),
    Class(RadiologyClass),
    Associated(&'static str),
    QualitativeSize,
}

impl Tag {
    fn negatable(self) -> bool {
        matches!(
            self,
            Tag::Density(_) | Tag::Attenuation(_) | Tag::Enhancement(_) | Tag::Calcification | Tag::Metabolic(_)
        )
    }

    fn category(self) -> EntityCategory {
        match self {
            Tag::Location(_) => EntityCategory::Location,
            Tag::Count(_) => EntityCategory::NumberOfFindings,
            Tag::Class(_) => EntityCategory::RadiologyClassification,
            Tag::Associated(_) => EntityCategory::AssociatedFinding,
            Tag::QualitativeSize => EntityCategory::Size,
            _ => EntityCategory::RadiologicalCharacteristic,
        }
    }

    fn subtype(self) -> String {
        match self {
            Tag::Location(l) => l.as_str().to_string(),
            Tag::Density(d) => format!("density:{d}"),
            Tag::Attenuation(a) => format!("attenuation:{a}"),
            Tag::Enhancement(e) => format!("enhancement:{e}"),
            Tag::Calcification => "calcification:Calcified".to_string(),
            Tag::Metabolic(m) => format!("metabolic:{m}"),
            Tag::Distribution(d) => format!("distribution:{d}"),
            Tag::Count(c) => c.as_str().to_string(),
            Tag::Class(c) => c.as_str().to_string(),
            Tag::Associated(a) => a.to_string(),
            Tag::QualitativeSize => "qualitative".to_string(),
        }
    }
}

fn extraction_terms() -> Vec<(&'static str, Tag)> {
    use Tag::*;
    let mut v: Vec<(&'static str, Tag)> = Vec::new();
    let mut add = |terms: &[&'static str], tag: Tag| v.extend(terms.iter().map(|t| (*t, tag)));
    add(&["right", "right lobe", "right thyroid lobe", "right thyroid"], Location(self::Location::Right));
    add(&["left", "left lobe", "left thyroid lobe", "left thyroid"], Location(self::Location::Left));
    add(&["isthmus", "thyroid isthmus"], Location(self::Location::Isthmus));
    add(
        &["bilateral", "bilaterally", "both lobes", "both thyroid lobes", "bilateral thyroid lobes"],
        Location(self::Location::Bilateral),
    );
    add(&["hypodense", "low dense", "low density"], Density(self::Density::Low));
    add(&["hyperdense", "high density", "high dense"], Density(self::Density::High));
    add(&["heterogeneous density", "heterogeneously dense", "mixed density"], Density(self::Density::Heterogeneous));
    add(
        &["hypoattenuating", "hypoattenuation", "low attenuating", "low attenuation"],
        Attenuation(self::Attenuation::Low),
    );
    add(
        &["hyperattenuating", "hyperattenuation", "high attenuating", "high attenuation"],
        Attenuation(self::Attenuation::High),
    );
    add(
        &["heterogeneous attenuation", "heterogeneously attenuating"],
        Attenuation(self::Attenuation::Heterogeneous),
    );
    add(&["attenuation", "attenuating"], Attenuation(self::Attenuation::Unspecified));
    add(&["hypoenhancing", "low enhancement"], Enhancement(self::Enhancement::Low));
    add(&["hyperenhancing", "high enhancement", "avidly enhancing"], Enhancement(self::Enhancement::High));
    add(
        &["heterogeneous enhancement", "heterogeneously enhancing"],
        Enhancement(self::Enhancement::Heterogeneous),
    );
    add(&["enhancing", "enhancement", "normal enhancement"], Enhancement(self::Enhancement::Enhancing));
    add(&["calcification", "calcifications", "calcified"], Calcification);
    add(&["hypermetabolic", "fdg avid", "increased fdg uptake"], Metabolic(MetabolicActivity::Hypermetabolic));
    add(
        &["moderately hypermetabolic", "moderately fdg avid", "intermediate metabolic activity"],
        Metabolic(MetabolicActivity::MidMetabolic),
    );
    add(
        &["low metabolic activity", "mildly fdg avid", "hypometabolic", "mildly hypermetabolic"],
        Metabolic(MetabolicActivity::LowMetabolic),
    );
    add(
        &["non avid", "non fdg avid", "nonmetabolic", "not fdg avid", "photopenic"],
        Metabolic(MetabolicActivity::NonMetabolic),
    );
    add(&["physiologic uptake", "physiological uptake"], Metabolic(MetabolicActivity::Physiological));
    add(
        &["fdg uptake", "fdg activity", "uptake", "suv", "suvmax", "radiotracer uptake", "metabolic activity"],
        Metabolic(MetabolicActivity::Ambiguous),
    );
    add(&["diffuse", "diffusely"], Distribution(MetabolicDistribution::Diffuse));
    add(&["focal", "focally", "focus", "localized"], Distribution(MetabolicDistribution::Focal));
    add(&["single", "solitary", "sole", "one", "unique"], Count(FindingCount::Single));
    add(&["multiple", "several", "numerous"], Count(FindingCount::Multiple));
    add(&["benign", "likely benign", "insignificant", "insignificant by size criteria"], Class(RadiologyClass::Benign));
    add(
        &[
            "malignant",
            "likely malignant",
            "pathological",
            "likely pathological",
            "likely cancer",
            "suspicious for malignancy",
        ],
        Class(RadiologyClass::Malignant),
    );
    add(&["indeterminate"], Class(RadiologyClass::Indeterminate));
    add(
        &["tracheal deviation", "tracheal narrowing", "narrowing of the upper trachea", "tracheal compression"],
        Associated("TracheaNonInvasion"),
    );
    add(&["tracheal invasion", "trachea invasion", "tracheal wall thickening"], Associated("TracheaInvasion"));
    add(&["esophageal narrowing", "esophagus deviation", "esophageal deviation"], Associated("EsophagusNonInvasion"));
    add(&["esophageal invasion", "esophagus invasion"], Associated("EsophagusInvasion"));
    add(&["vocal cord paralysis"], Associated("VocalCordsNonInvasion"));
    add(&["thoracic inlet", "substernal extension", "retrosternal extension"], Associated("Other"));
    add(QUALITATIVE_SIZES, QualitativeSize);
    v
}

const REC_MODIFIERS: &[&str] = &[
    "nonemergent",
    "non-emergent",
    "non emergent",
    "dedicated",
    "further",
    "additional",
    "outpatient",
    "elective",
    "follow-up",
    "follow up",
    "followup",
    "repeat",
    "targeted",
    "thyroid",
    "neck",
    "an",
    "a",
];

const REC_TARGETS: &[(&str, Recommendation)] = &[
    ("sonographic evaluation", Recommendation::Ultrasound),
    ("ultrasonography", Recommendation::Ultrasound),
    ("ultrasound", Recommendation::Ultrasound),
    ("sonography", Recommendation::Ultrasound),
    ("us", Recommendation::Ultrasound),
    ("nuclear medicine scan", Recommendation::NonUltrasoundImaging),
    ("nuclear medicine imaging", Recommendation::NonUltrasoundImaging),
    ("cross sectional imaging", Recommendation::NonUltrasoundImaging),
    ("radionuclide scan", Recommendation::NonUltrasoundImaging),
    ("scintigraphy", Recommendation::NonUltrasoundImaging),
    ("imaging", Recommendation::NonUltrasoundImaging),
    ("pet ct", Recommendation::NonUltrasoundImaging),
    ("pet", Recommendation::NonUltrasoundImaging),
    ("mri", Recommendation::NonUltrasoundImaging),
    ("ct", Recommendation::NonUltrasoundImaging),
    ("fine needle aspiration", Recommendation::Other),
    ("fna", Recommendation::Other),
    ("biopsy", Recommendation::Other),
    ("tissue sampling", Recommendation::Other),
    ("clinical correlation", Recommendation::Other),
    ("laboratory correlation", Recommendation::Other),
    ("correlation", Recommendation::Other),
    ("endocrine evaluation", Recommendation::Other),
    ("clinical evaluation", Recommendation::Other),
    ("evaluation", Recommendation::Other),
    ("endocrinology referral", Recommendation::Other),
    ("referral", Recommendation::Other),
    ("thyroid function tests", Recommendation::Other),
    ("follow up", Recommendation::Other),
    ("follow-up", Recommendation::Other),
    ("followup", Recommendation::Other),
];

fn phrase_pattern(p: &str) -> String {
    if p == "us" {
        return "(?-i:US)".to_string();
    }
    p.split([' ', '-']).map(regex::escape).collect::<Vec<_>>().join(r"[\s-]+")
}

fn normalize_phrase(p: &str) -> String {
    p.to_lowercase().split(|c: char| c.is_whitespace() || c == '-').filter(|s| !s.is_empty()).collect::<Vec<_>>().join(" ")
}

static REC_RES: LazyLock<[Regex; 2]> = LazyLock::new(|| {
    let mods = REC_MODIFIERS.iter().map(|m| phrase_pattern(m)).collect::<Vec<_>>().join("|");
    let targets = REC_TARGETS.iter().map(|(t, _)| phrase_pattern(t)).collect::<Vec<_>>().join("|");
    [
        Regex::new(&format!(r"(?i)\b(?:(?:{mods})\s+)*(?P<t>{targets})\s+(?:(?:is|are)\s+)?(?:also\s+)?recommended\b"))
            .unwrap(),
        Regex::new(&format!(r"(?i)\b(?:consider|recommend)\s+(?:(?:{mods})\s+)*(?P<t>{targets})\b")).unwrap(),
    ]
});

fn target_category(text: &str) -> Recommendation {
    let norm = normalize_phrase(text);
    REC_TARGETS
        .iter()
        .find(|(t, _)| normalize_phrase(t) == norm)
        .map(|(_, r)| *r)
        .unwrap_or(Recommendation::Other)
}

/// Extraction rules bound to a stage-1 lexicon (used to find the thyroid
/// context sentences and negation cues).
#[derive(Debug, Clone)]
pub struct Extractor {
    rules: CompiledLexicon,
    terms: TermMatcher<Tag>,
}

impl Extractor {
    pub fn new(rules: CompiledLexicon) -> Self {
        Self { rules, terms: TermMatcher::new(extraction_terms()) }
    }

    pub fn rules(&self) -> &CompiledLexicon {
        &self.rules
    }

    pub fn extract(&self, doc: &ReportDoc, stage1: &Classification) -> (FindingResult, Vec<ExtractWarning>) {
        let mut result = FindingResult::empty(&doc.report_id, stage1.label);
        result.spans = stage1.evidence.clone();
        let mut warnings = Vec::new();
        if stage1.label == ReportLabel::Itn {
            let scan = self.rules.scan(&doc.text);
            self.fill(doc, &scan, &mut result, &mut warnings);
        }
        result.spans.sort_by(|a, b| (a.start, a.end, a.category).cmp(&(b.start, b.end, b.category)));
        (result, warnings)
    }

    fn fill(&self, doc: &ReportDoc, scan: &ThyroidScan, out: &mut FindingResult, warnings: &mut Vec<ExtractWarning>) {
        let text = &doc.text;
        let seg: &Segmented = &scan.seg;
        let in_context = |s: usize| scan.context[s];
        let hits: Vec<(usize, TermMatch<Tag>)> = self
            .terms
            .find_all(seg)
            .into_iter()
            .map(|m| (sentence_index(seg, m.first), m))
            .filter(|(s, _)| in_context(*s))
            .filter(|(s, m)| !(m.tag.negatable() && is_negated(&scan.cue_ends, seg.sentences[*s].tokens.start, m.first)))
            .collect();

        let metabolic_sentences: BTreeSet<usize> =
            hits.iter().filter(|(_, m)| matches!(m.tag, Tag::Metabolic(_))).map(|(s, _)| *s).collect();

        let mut locations = Vec::new();
        for (s, m) in &hits {
            if matches!(m.tag, Tag::Distribution(_)) && !metabolic_sentences.contains(s) {
                continue;
            }
            let (start, end) = m.char_range(seg);
            out.spans.push(EntitySpan::from_text(text, start, end, m.tag.category(), Some(m.tag.subtype())));
            match m.tag {
                Tag::Location(l) => locations.push(l),
                Tag::Density(d) => {
                    out.density.get_or_insert(d);
                }
                Tag::Attenuation(a) => {
                    out.attenuation.get_or_insert(a);
                }
                Tag::Enhancement(e) => {
                    out.enhancement.get_or_insert(e);
                }
                Tag::Calcification => out.calcified = Some(true),
                Tag::Metabolic(a) => {
                    if out.metabolic_activity.is_none_or(|cur| a.priority() > cur.priority()) {
                        out.metabolic_activity = Some(a);
                    }
                }
                Tag::Distribution(d) => {
                    out.metabolic_distribution.get_or_insert(d);
                }
                _ => {}
            }
        }
        out.location = infer_bilaterality(&locations);
        if out.metabolic_activity.is_some() {
            out.metabolic_distribution.get_or_insert(MetabolicDistribution::NotDescribed);
        } else {
            out.metabolic_distribution = None;
        }

        let b2c = ByteToChar::new(text);
        let within = |start: usize, end: usize, allowed: &dyn Fn(usize) -> bool| {
            seg.sentences
                .iter()
                .enumerate()
                .any(|(i, s)| allowed(i) && s.start <= start && end <= s.end)
        };

        let mut covered_units = Vec::new();
        for m in SIZE_RE.find_iter(text) {
            let (start, end) = (b2c.get(m.start()), b2c.get(m.end()));
            if !within(start, end, &in_context) {
                continue;
            }
            let Some(cm) = measure(m.as_str()) else { continue };
            covered_units.push((start, end));
            if cm <= 0.0 {
                warnings.push(ExtractWarning {
                    report_id: doc.report_id.clone(),
                    reason: format!("non-positive size {:?}", m.as_str()),
                });
                continue;
            }
            out.spans.push(EntitySpan::from_text(text, start, end, EntityCategory::Size, Some(format!("{cm:.1}"))));
            if out.size_cm.is_none_or(|cur| cm > cur) {
                out.size_cm = Some(cm);
            }
        }
        for m in UNIT_RE.find_iter(text) {
            let (start, end) = (b2c.get(m.start()), b2c.get(m.end()));
            if within(start, end, &in_context) && !covered_units.iter().any(|&(s, e)| s <= start && end <= e) {
                warnings.push(ExtractWarning {
                    report_id: doc.report_id.clone(),
                    reason: format!("unparseable size expression near char {start}"),
                });
            }
        }
        out.size_bin = out.size_cm.map(|s| bin_size(s).expect("sizes are positive"));

        let rec_scope = |i: usize| scan.context[i] || (i > 0 && scan.context[i - 1]);
        let mut recs: Vec<(usize, usize, Recommendation)> = Vec::new();
        for re in REC_RES.iter() {
            for c in re.captures_iter(text) {
                let whole = c.get(0).unwrap();
                let (start, end) = (b2c.get(whole.start()), b2c.get(whole.end()));
                if within(start, end, &rec_scope) {
                    recs.push((start, end, target_category(&c["t"])));
                }
            }
        }
        recs.sort_by_key(|&(s, e, _)| (s, std::cmp::Reverse(e)));
        let mut last_end = 0;
        for (start, end, rec) in recs {
            if start < last_end {
                continue;
            }
            last_end = end;
            out.spans.push(EntitySpan::from_text(
                text,
                start,
                end,
                EntityCategory::Recommendation,
                Some(rec.as_str().to_string()),
            ));
            if out.recommendation.is_none_or(|cur| rec.precedence() > cur.precedence()) {
                out.recommendation = Some(rec);
            }
        }
    }
}

fn sentence_index(seg: &Segmented, tok: usize) -> usize {
    seg.sentences.iter().position(|s| s.tokens.contains(&tok)).expect("token inside a sentence")
}

impl Default for Extractor {
    fn default() -> Self {
        Self::new(CompiledLexicon::default())
    }
}

static DEFAULT_EXTRACTOR: LazyLock<Extractor> = LazyLock::new(Extractor::default);

/// Extraction with the default lexicon.
pub fn extract_entities(doc: &ReportDoc, stage1: &Classification) -> (FindingResult, Vec<ExtractWarning>) {
    DEFAULT_EXTRACTOR.extract(doc, stage1)
}
