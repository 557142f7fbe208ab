//! Report text assembled from lexicon terms. Gold spans are recorded while
//! the text is built, so they are exact by construction.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::corpus::EntitySpan;
use crate::extract::{
    round1, Attenuation, Density, Enhancement, FindingCount, Location, MetabolicActivity, MetabolicDistribution,
    RadiologyClass, Recommendation,
};
use crate::labels::{BodyGroup, EntityCategory, Modality, SUBTYPE_NODULAR, SUBTYPE_NON_NODULAR};

use EntityCategory as C;

/// Text fragment, possibly carrying one or more gold labels.
enum P {
    T(String),
    S(String, Vec<(EntityCategory, Option<String>)>),
    /// Labelled span wrapping other fragments.
    N(Vec<P>, EntityCategory, Option<String>),
}

fn t(s: impl Into<String>) -> P {
    P::T(s.into())
}

fn tag(s: impl Into<String>, cat: EntityCategory, sub: impl Into<String>) -> P {
    P::S(s.into(), vec![(cat, Some(sub.into()))])
}

fn thy(s: &str) -> P {
    P::S(s.into(), vec![(C::Thyroid, None)])
}

fn normal(s: &str) -> P {
    P::S(s.into(), vec![(C::NormalFinding, None)])
}

fn nod(s: &str) -> P {
    tag(s, C::TypeOfFinding, SUBTYPE_NODULAR)
}

fn non(s: &str) -> P {
    tag(s, C::TypeOfFinding, SUBTYPE_NON_NODULAR)
}

fn nest(inner: Vec<P>, cat: EntityCategory, sub: impl Into<String>) -> P {
    P::N(inner, cat, Some(sub.into()))
}

fn capitalize(ps: &mut [P]) {
    for p in ps {
        let s = match p {
            P::T(s) | P::S(s, _) => s,
            P::N(inner, _, _) => {
                capitalize(inner);
                return;
            }
        };
        if let Some(c) = s.chars().next() {
            *s = c.to_uppercase().chain(s.chars().skip(1)).collect();
            return;
        }
    }
}

#[derive(Default)]
struct Builder {
    text: String,
    chars: usize,
    spans: Vec<EntitySpan>,
}

impl Builder {
    fn push(&mut self, s: &str) {
        self.text.push_str(s);
        self.chars += s.chars().count();
    }

    fn render(&mut self, p: &P) {
        let (c0, b0) = (self.chars, self.text.len());
        match p {
            P::T(s) => self.push(s),
            P::S(s, tags) => {
                self.push(s);
                for (cat, sub) in tags {
                    self.spans.push(EntitySpan {
                        start: c0,
                        end: self.chars,
                        category: *cat,
                        subtype: sub.clone(),
                        raw_text: s.clone(),
                    });
                }
            }
            P::N(inner, cat, sub) => {
                for q in inner {
                    self.render(q);
                }
                self.spans.push(EntitySpan {
                    start: c0,
                    end: self.chars,
                    category: *cat,
                    subtype: sub.clone(),
                    raw_text: self.text[b0..].to_string(),
                });
            }
        }
    }

    fn finish(mut self) -> (String, Vec<EntitySpan>) {
        self.spans.sort_by(|a, b| (a.start, a.end, a.category).cmp(&(b.start, b.end, b.category)));
        (self.text, self.spans)
    }
}

/// Attributes of one injected nodular finding.
#[derive(Debug, Clone, Default, PartialEq)]
pub(super) struct ItnPlan {
    pub location: Option<Location>,
    pub size_cm: Option<f64>,
    pub qualitative_size: bool,
    pub density: Option<Density>,
    pub attenuation: Option<Attenuation>,
    pub enhancement: Option<Enhancement>,
    pub calcified: bool,
    pub metabolic: Option<(MetabolicActivity, MetabolicDistribution)>,
    pub recommendation: Option<Recommendation>,
    pub count: Option<FindingCount>,
    pub class: Option<RadiologyClass>,
    pub associated: bool,
}

impl ItnPlan {
    fn is_bare(&self) -> bool {
        *self == ItnPlan { recommendation: self.recommendation, ..Default::default() }
    }
}

/// Thyroid content of one report.
#[derive(Debug, Clone, PartialEq)]
pub(super) enum Content {
    /// No finding; optionally a normal thyroid mention.
    Clean { mention: bool },
    /// Negated finding. Hard cases put the cue out of the negation window.
    Negation { hard: bool },
    /// Normal thyroid next to a finding in another organ. Hard cases put
    /// both in one sentence.
    Distractor { hard: bool },
    NonNodular,
    Itn(ItnPlan),
}

fn modality_header(m: Modality) -> &'static str {
    match m {
        Modality::Ct => "CT",
        Modality::Mri => "MRI",
        Modality::NuclearMedicine => "NUCLEAR MEDICINE",
        Modality::Pet => "PET",
        Modality::Ultrasound => "CAROTID ULTRASOUND",
    }
}

fn body_header(b: BodyGroup) -> &'static str {
    match b {
        BodyGroup::Head => "HEAD",
        BodyGroup::Neck => "NECK",
        BodyGroup::Chest => "CHEST",
        BodyGroup::Mixed => "CHEST ABDOMEN PELVIS",
    }
}

fn background(b: BodyGroup) -> &'static [&'static str] {
    match b {
        BodyGroup::Head => &[
            "The ventricles and sulci are age appropriate.",
            "There is no acute intracranial hemorrhage.",
            "The paranasal sinuses are clear.",
            "The orbits are symmetric.",
        ],
        BodyGroup::Neck => &[
            "The airway is patent.",
            "There is no cervical lymphadenopathy.",
            "The salivary glands are symmetric.",
            "The visualized vessels are patent.",
        ],
        BodyGroup::Chest => &[
            "The lungs are clear.",
            "There is no pleural effusion or pneumothorax.",
            "The heart size is within limits.",
            "The mediastinum is midline.",
        ],
        BodyGroup::Mixed => &[
            "Degenerative changes of the spine are present.",
            "There is no acute osseous abnormality.",
            "The visualized soft tissues are symmetric.",
            "Vascular structures are patent.",
        ],
    }
}

fn pick<'a, R: Rng + ?Sized>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).expect("non-empty choice list")
}

fn clean_mention<R: Rng + ?Sized>(rng: &mut R) -> Vec<P> {
    match rng.random_range(0..4) {
        0 => vec![t("The "), thy("thyroid gland"), t(" is "), normal("unremarkable"), t(".")],
        1 => vec![t("The "), thy("thyroid"), t(" is "), normal("normal"), t(".")],
        2 => vec![thy("Thyroid"), t(": "), normal("unremarkable"), t(".")],
        _ => vec![normal("Normal"), t(" appearance of the "), thy("thyroid gland"), t(".")],
    }
}

fn negation<R: Rng + ?Sized>(rng: &mut R, hard: bool) -> Vec<P> {
    if hard {
        return match rng.random_range(0..2) {
            0 => vec![t("No evidence of a discrete suspicious "), thy("thyroid"), t(" nodule.")],
            _ => vec![t("No sonographic or CT evidence of a "), thy("thyroid"), t(" nodule.")],
        };
    }
    match rng.random_range(0..6) {
        0 => vec![t("No "), thy("thyroid"), t(" nodule is seen.")],
        1 => vec![t("The "), thy("thyroid gland"), t(" is "), normal("unremarkable"), t(", without nodules.")],
        2 => vec![thy("Thyroid"), t(": "), normal("normal"), t(", no nodules.")],
        3 => vec![t("The "), thy("thyroid"), t(" is "), normal("normal"), t(" in size without focal lesion.")],
        4 => vec![thy("Thyroid gland"), t(" "), normal("unremarkable"), t(", negative for mass.")],
        _ => vec![t("The "), thy("thyroid gland"), t(" is "), normal("normal"), t(" and free of cysts.")],
    }
}

fn distractor<R: Rng + ?Sized>(rng: &mut R, hard: bool) -> Vec<P> {
    if hard {
        return match rng.random_range(0..2) {
            0 => vec![
                t("The "),
                thy("thyroid"),
                t(" is "),
                normal("unremarkable"),
                t(", with a 4 mm nodule in the adjacent right lung apex."),
            ],
            _ => vec![normal("Normal"), t(" "), thy("thyroid gland"), t(" and a small cyst in the left kidney.")],
        };
    }
    match rng.random_range(0..3) {
        0 => vec![
            t("The "),
            thy("thyroid gland"),
            t(" is "),
            normal("unremarkable"),
            t(". A 6 mm nodule is present in the right lung base."),
        ],
        1 => vec![normal("Normal"), t(" "), thy("thyroid"), t(". Small cyst in the left kidney.")],
        _ => vec![t("The "), thy("thyroid"), t(" is "), normal("unremarkable"), t(". Subcentimeter lesion in the liver.")],
    }
}

fn non_nodular<R: Rng + ?Sized>(rng: &mut R) -> Vec<P> {
    match rng.random_range(0..10) {
        0 => vec![t("The "), thy("thyroid gland"), t(" is diffusely "), non("enlarged"), t(".")],
        1 => vec![t("Diffuse "), non("enlargement"), t(" of the "), thy("thyroid gland"), t(".")],
        2 => vec![non("Thyromegaly"), t(" is noted.")],
        3 => vec![t("Small "), non("atrophic"), t(" "), thy("thyroid gland"), t(".")],
        4 => vec![t("Coarse "), non("calcification"), t(" in the "), thy("thyroid gland"), t(".")],
        5 => vec![non("Goiter"), t(" with substernal extension.")],
        6 => vec![t("Heterogeneous "), non("enlarged"), t(" "), thy("thyroid"), t(".")],
        7 => vec![non("Atrophy"), t(" of the "), thy("thyroid gland"), t(".")],
        8 => vec![t("Postsurgical "), thy("thyroid"), t(" bed with a small "), non("remnant"), t(".")],
        _ => vec![thy("Thyroid"), t(" appears "), non("enlarged"), t(" with heterogeneous texture.")],
    }
}

fn size_piece<R: Rng + ?Sized>(rng: &mut R, cm: f64) -> P {
    let text = match rng.random_range(0..10) {
        0..=5 => format!("{cm:.1} cm"),
        6..=7 => format!("{} mm", (cm * 10.0).round() as i64),
        _ => {
            let other = round1((cm * rng.random_range(0.5..1.0)).max(0.1));
            format!("{cm:.1} x {other:.1} cm")
        }
    };
    tag(text, C::Size, format!("{cm:.1}"))
}

fn side_name(l: Location) -> &'static str {
    if l == Location::Right {
        "right"
    } else {
        "left"
    }
}

fn location_phrase<R: Rng + ?Sized>(rng: &mut R, loc: Option<Location>) -> Vec<P> {
    let sub = |l: Location| l.as_str();
    match loc {
        None => vec![t(" in the "), thy(pick(rng, &["thyroid gland", "thyroid"]))],
        Some(l @ (Location::Right | Location::Left)) => {
            let side = side_name(l);
            match rng.random_range(0..3) {
                0 => vec![t(" in the "), nest(vec![t(format!("{side} ")), thy("thyroid"), t(" lobe")], C::Location, sub(l))],
                1 => vec![t(" in the "), tag(format!("{side} lobe"), C::Location, sub(l)), t(" of the "), thy("thyroid gland")],
                _ => vec![t(" in the "), nest(vec![t(format!("{side} ")), thy("thyroid")], C::Location, sub(l))],
            }
        }
        Some(l @ Location::Isthmus) => match rng.random_range(0..2) {
            0 => vec![t(" in the "), nest(vec![thy("thyroid"), t(" isthmus")], C::Location, sub(l))],
            _ => vec![t(" in the "), tag("isthmus", C::Location, sub(l)), t(" of the "), thy("thyroid gland")],
        },
        Some(l @ Location::Bilateral) => match rng.random_range(0..2) {
            0 => vec![t(" in "), nest(vec![t("both "), thy("thyroid"), t(" lobes")], C::Location, sub(l))],
            _ => vec![
                t(" in the "),
                tag("right", C::Location, sub(Location::Right)),
                t(" and "),
                nest(vec![t("left "), thy("thyroid")], C::Location, sub(Location::Left)),
                t(" lobes"),
            ],
        },
    }
}

fn metabolic_phrase<R: Rng + ?Sized>(rng: &mut R, act: MetabolicActivity, dist: MetabolicDistribution) -> Vec<P> {
    let mut v = Vec::new();
    match dist {
        MetabolicDistribution::Diffuse => v.extend([tag("diffuse", C::RadiologicalCharacteristic, "distribution:Diffuse"), t(" ")]),
        MetabolicDistribution::Focal => v.extend([tag("focal", C::RadiologicalCharacteristic, "distribution:Focal"), t(" ")]),
        MetabolicDistribution::NotDescribed => {}
    }
    let options: &[(&str, &str)] = match act {
        MetabolicActivity::Hypermetabolic => &[("increased FDG uptake", ""), ("hypermetabolic", " activity")],
        MetabolicActivity::MidMetabolic => &[("intermediate metabolic activity", "")],
        MetabolicActivity::LowMetabolic => &[("low metabolic activity", ""), ("hypometabolic", " activity")],
        MetabolicActivity::NonMetabolic => &[("photopenic", " appearance"), ("nonmetabolic", " appearance")],
        MetabolicActivity::Physiological => &[("physiologic uptake", ""), ("physiological uptake", "")],
        MetabolicActivity::Ambiguous => &[("FDG uptake", ""), ("radiotracer uptake", ""), ("SUVmax", "")],
    };
    let (term, tail) = *options.choose(rng).unwrap();
    v.push(tag(term, C::RadiologicalCharacteristic, format!("metabolic:{act}")));
    if term == "SUVmax" {
        v.push(t(format!(" {:.1}", rng.random_range(1.5..6.0))));
    } else {
        v.push(t(tail));
    }
    v
}

fn itn_sentence<R: Rng + ?Sized>(rng: &mut R, plan: &ItnPlan) -> Vec<P> {
    if plan.is_bare() && rng.random_bool(0.3) {
        let mut v = match rng.random_range(0..3) {
            0 => vec![nod("multinodular goiter"), t(".")],
            1 => vec![nod("multinodular"), t(" "), thy("thyroid gland"), t(".")],
            _ => vec![thy("thyroid"), t(" "), nod("nodularity"), t(".")],
        };
        capitalize(&mut v);
        return v;
    }
    let plural = plan.count == Some(FindingCount::Multiple) || plan.location == Some(Location::Bilateral);
    let mut ps = Vec::new();
    if rng.random_bool(0.3) {
        ps.push(t("incidental "));
    }
    match plan.count {
        Some(FindingCount::Single) => {
            ps.extend([tag(pick(rng, &["solitary", "single"]), C::NumberOfFindings, "Single"), t(" ")])
        }
        Some(FindingCount::Multiple) => ps.extend([
            tag(pick(rng, &["multiple", "several", "numerous"]), C::NumberOfFindings, "Multiple"),
            t(" "),
        ]),
        None => {}
    }
    let size_before = !plural && rng.random_bool(0.7);
    if let (Some(cm), true) = (plan.size_cm, size_before) {
        ps.extend([size_piece(rng, cm), t(" ")]);
    }
    if plan.qualitative_size {
        ps.extend([tag(pick(rng, &["small", "tiny", "subcentimeter"]), C::Size, "qualitative"), t(" ")]);
    }
    let rc = C::RadiologicalCharacteristic;
    if let Some(d) = plan.density {
        let word = match d {
            Density::Low => pick(rng, &["hypodense", "low density"]),
            Density::High => "hyperdense",
            Density::Heterogeneous => "heterogeneously dense",
        };
        ps.extend([tag(word, rc, format!("density:{d}")), t(" ")]);
    }
    if let Some(a) = plan.attenuation {
        let word = match a {
            Attenuation::Low => Some(pick(rng, &["hypoattenuating", "low attenuation"])),
            Attenuation::High => Some("hyperattenuating"),
            Attenuation::Heterogeneous => Some("heterogeneously attenuating"),
            Attenuation::Unspecified => None,
        };
        if let Some(w) = word {
            ps.extend([tag(w, rc, format!("attenuation:{a}")), t(" ")]);
        }
    }
    if let Some(e) = plan.enhancement {
        let word = match e {
            Enhancement::Low => "hypoenhancing",
            Enhancement::High => pick(rng, &["hyperenhancing", "avidly enhancing"]),
            Enhancement::Heterogeneous => "heterogeneously enhancing",
            Enhancement::Enhancing => "enhancing",
        };
        ps.extend([tag(word, rc, format!("enhancement:{e}")), t(" ")]);
    }
    let calcified_before = plan.calcified && rng.random_bool(0.5);
    if calcified_before {
        ps.push(P::S(
            "calcified".into(),
            vec![
                (rc, Some("calcification:Calcified".into())),
                (C::TypeOfFinding, Some(SUBTYPE_NON_NODULAR.into())),
            ],
        ));
        ps.push(t(" "));
    }
    let noun = if plural {
        pick(rng, &["nodules", "nodules", "nodules", "lesions", "cysts"])
    } else {
        pick(rng, &["nodule", "nodule", "nodule", "nodule", "nodule", "lesion", "cyst", "mass"])
    };
    ps.push(nod(noun));
    ps.extend(location_phrase(rng, plan.location));
    if let (Some(cm), false) = (plan.size_cm, size_before) {
        ps.push(t(if plural { ", the largest measuring " } else { ", measuring " }));
        ps.push(size_piece(rng, cm));
    }

    let mut post: Vec<Vec<P>> = Vec::new();
    if plan.calcified && !calcified_before {
        let lead = pick(rng, &["", "coarse ", "punctate "]);
        post.push(vec![t(lead), tag("calcifications", rc, "calcification:Calcified")]);
    }
    if plan.attenuation == Some(Attenuation::Unspecified) {
        post.push(vec![t("mixed "), tag("attenuation", rc, "attenuation:Unspecified")]);
    }
    if let Some((act, dist)) = plan.metabolic {
        post.push(metabolic_phrase(rng, act, dist));
    }
    for (i, group) in post.into_iter().enumerate() {
        ps.push(t(if i == 0 { " with " } else { " and " }));
        ps.extend(group);
    }
    if let Some(c) = plan.class {
        let word = match c {
            RadiologyClass::Benign => pick(rng, &["likely benign", "benign"]),
            RadiologyClass::Malignant => pick(rng, &["suspicious for malignancy", "likely malignant"]),
            RadiologyClass::Indeterminate => "indeterminate",
        };
        ps.extend([t(", "), tag(word, C::RadiologyClassification, c.as_str())]);
    }
    if plan.associated {
        ps.extend([t(", causing "), tag("tracheal deviation", C::AssociatedFinding, "TracheaNonInvasion")]);
    }
    ps.push(t("."));
    capitalize(&mut ps);
    ps
}

fn recommendation_sentence<R: Rng + ?Sized>(rng: &mut R, rec: Recommendation) -> Vec<P> {
    let r = C::Recommendation;
    let sub = rec.as_str();
    let mut v = match rec {
        Recommendation::Ultrasound => match rng.random_range(0..4) {
            0 => vec![tag("Nonemergent ultrasound recommended", r, sub)],
            1 => vec![nest(vec![t("Recommend "), thy("thyroid"), t(" ultrasound")], r, sub)],
            2 => vec![nest(vec![t("Dedicated "), thy("thyroid"), t(" ultrasound is recommended")], r, sub)],
            _ => vec![tag("Recommend nonemergent US", r, sub)],
        },
        Recommendation::NonUltrasoundImaging => vec![tag(
            pick(rng, &["Consider MRI", "Consider dedicated neck CT", "Nuclear medicine scan is recommended"]),
            r,
            sub,
        )],
        Recommendation::Other => vec![tag(
            pick(
                rng,
                &[
                    "Clinical correlation is recommended",
                    "Consider biopsy",
                    "Recommend endocrinology referral",
                    "Follow-up is recommended",
                ],
            ),
            r,
            sub,
        )],
    };
    v.push(t("."));
    v
}

/// Full report text and gold spans.
pub(super) fn render<R: Rng + ?Sized>(
    rng: &mut R,
    modality: Modality,
    body: BodyGroup,
    content: &Content,
) -> (String, Vec<EntitySpan>) {
    let mut block: Vec<Vec<P>> = Vec::new();
    match content {
        Content::Clean { mention: true } => block.push(clean_mention(rng)),
        Content::Clean { mention: false } => {}
        Content::Negation { hard } => block.push(negation(rng, *hard)),
        Content::Distractor { hard } => block.push(distractor(rng, *hard)),
        Content::NonNodular => block.push(non_nodular(rng)),
        Content::Itn(plan) => {
            block.push(itn_sentence(rng, plan));
            if let Some(rec) = plan.recommendation {
                block.push(recommendation_sentence(rng, rec));
            }
        }
    }
    let filler: Vec<&str> = background(body).choose_multiple(rng, 2).copied().collect();
    let at = rng.random_range(0..=filler.len());

    let mut b = Builder::default();
    b.push(&format!("EXAM: {} {}\nFINDINGS:", modality_header(modality), body_header(body)));
    let emit_block = |b: &mut Builder| {
        for s in &block {
            b.push(" ");
            for p in s {
                b.render(p);
            }
        }
    };
    for (i, f) in filler.iter().enumerate() {
        if i == at {
            emit_block(&mut b);
        }
        b.push(" ");
        b.push(f);
    }
    if at == filler.len() {
        emit_block(&mut b);
    }
    b.push("\nIMPRESSION: ");
    match content {
        Content::NonNodular | Content::Itn(_) => {
            for p in [t("Incidental "), thy("thyroid"), t(" finding as described.")] {
                b.render(&p);
            }
        }
        _ => b.push("No acute abnormality."),
    }
    b.finish()
}
