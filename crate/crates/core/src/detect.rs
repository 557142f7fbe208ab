//! Stage-1 report classification: does the report describe any incidental
//! thyroid finding, and if so is it nodular.
//!
//! The positive/negative call is delegated to a [`DetectorBackend`]; the
//! nodular vs non-nodular split is a fixed rule over lexicon hits inside the
//! thyroid context.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{EntitySpan, ReportDoc};
use crate::labels::{EntityCategory, ReportLabel, SUBTYPE_NODULAR, SUBTYPE_NON_NODULAR};
use crate::matcher::{TermMatch, TermMatcher};
use crate::text::Segmented;

/// Maximum token distance between the end of a negation cue and the start of
/// the term it suppresses.
pub const NEGATION_WINDOW: usize = 5;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Term lists driving the thyroid gate, the finding split and negation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub gate_terms: Vec<String>,
    pub normal_terms: Vec<String>,
    pub nodular_terms: Vec<String>,
    pub nonnodular_terms: Vec<String>,
    pub standalone_nonnodular: Vec<String>,
    #[serde(default = "default_negation_cues")]
    pub negation_cues: Vec<String>,
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn default_negation_cues() -> Vec<String> {
    strings(&["no", "without", "absent", "negative for", "free of"])
}

impl Default for Lexicon {
    fn default() -> Self {
        Self {
            gate_terms: strings(&["thyroid", "thyroid gland"]),
            normal_terms: strings(&["normal", "unremarkable"]),
            nodular_terms: strings(&[
                "nodule",
                "nodules",
                "nodularity",
                "nodular",
                "multinodular",
                "multinodular goiter",
                "multinodular enlargement",
                "goitrous enlargement",
                "lesion",
                "lesions",
                "cyst",
                "cysts",
                "mass",
            ]),
            nonnodular_terms: strings(&[
                "atrophy",
                "atrophic",
                "foci",
                "focus",
                "congenitally absent",
                "remnant",
                "enlargement",
                "enlarged",
                "calcification",
                "calcified",
                "ectopic tissue",
                "thyroglossal duct",
                "thyromegaly",
            ]),
            standalone_nonnodular: strings(&["goiter", "thyromegaly"]),
            negation_cues: default_negation_cues(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("reading lexicon {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("parsing lexicon: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("terms listed as both nodular and non-nodular: {0:?}")]
    Overlap(Vec<String>),
    #[error("lexicon has no gate terms")]
    NoGate,
}

impl Lexicon {
    pub fn from_json(s: &str) -> Result<Self, LexiconError> {
        let lex: Lexicon = serde_json::from_str(s)?;
        lex.validate()?;
        Ok(lex)
    }

    pub fn from_file(path: &Path) -> Result<Self, LexiconError> {
        let s = std::fs::read_to_string(path).map_err(|e| LexiconError::Io(path.display().to_string(), e))?;
        Self::from_json(&s)
    }

    pub fn validate(&self) -> Result<(), LexiconError> {
        if self.gate_terms.is_empty() {
            return Err(LexiconError::NoGate);
        }
        let nodular: HashSet<String> = self.nodular_terms.iter().map(|t| normalize(t)).collect();
        let mut overlap: Vec<String> = self
            .nonnodular_terms
            .iter()
            .filter(|t| nodular.contains(&normalize(t)))
            .cloned()
            .collect();
        if !overlap.is_empty() {
            overlap.sort();
            return Err(LexiconError::Overlap(overlap));
        }
        Ok(())
    }
}

fn term_tokens(term: &str) -> Vec<String> {
    crate::text::tokenize(term).into_iter().map(|t| t.norm).collect()
}

fn normalize(term: &str) -> String {
    term_tokens(term).join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage1Tag {
    Gate,
    Normal,
    Nodular,
    NonNodular,
    Standalone,
    Cue,
}

impl Stage1Tag {
    fn is_finding(self) -> bool {
        matches!(self, Stage1Tag::Nodular | Stage1Tag::NonNodular | Stage1Tag::Standalone)
    }
}

/// Matcher payload: the term's role, and whether it names the thyroid by
/// itself ("goiter", "multinodular goiter").
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stage1Term {
    pub kind: Stage1Tag,
    pub opens_context: bool,
}

fn contains_seq(hay: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

/// A lexicon with its matcher built.
#[derive(Debug, Clone)]
pub struct CompiledLexicon {
    pub lexicon: Lexicon,
    matcher: TermMatcher<Stage1Term>,
}

impl CompiledLexicon {
    pub fn new(lexicon: Lexicon) -> Result<Self, LexiconError> {
        lexicon.validate()?;
        // Registration order decides ties between identical sequences:
        // standalone terms keep their standalone role.
        let terms = lexicon
            .standalone_nonnodular
            .iter()
            .map(|t| (t.as_str(), Stage1Tag::Standalone))
            .chain(lexicon.gate_terms.iter().map(|t| (t.as_str(), Stage1Tag::Gate)))
            .chain(lexicon.nodular_terms.iter().map(|t| (t.as_str(), Stage1Tag::Nodular)))
            .chain(lexicon.nonnodular_terms.iter().map(|t| (t.as_str(), Stage1Tag::NonNodular)))
            .chain(lexicon.normal_terms.iter().map(|t| (t.as_str(), Stage1Tag::Normal)))
            .chain(lexicon.negation_cues.iter().map(|t| (t.as_str(), Stage1Tag::Cue)));
        let standalone: Vec<Vec<String>> = lexicon.standalone_nonnodular.iter().map(|t| term_tokens(t)).collect();
        let matcher = TermMatcher::new(terms.map(|(t, kind)| {
            let toks = term_tokens(t);
            let opens_context = matches!(kind, Stage1Tag::Gate | Stage1Tag::Standalone)
                || (kind.is_finding() && standalone.iter().any(|s| contains_seq(&toks, s)));
            (t, Stage1Term { kind, opens_context })
        }));
        Ok(Self { lexicon, matcher })
    }

    pub fn scan(&self, text: &str) -> ThyroidScan {
        let seg = Segmented::new(text);
        let matches = self.matcher.find_all(&seg);
        ThyroidScan::build(seg, matches)
    }
}

impl Default for CompiledLexicon {
    fn default() -> Self {
        Self::new(Lexicon::default()).expect("default lexicon is valid")
    }
}

/// Returns the sentence index owning token `tok`.
fn sentence_of(seg: &Segmented, tok: usize) -> usize {
    seg.sentences
        .iter()
        .position(|s| s.tokens.contains(&tok))
        .expect("every token belongs to a sentence")
}

/// True when a negation cue ends at most [`NEGATION_WINDOW`] tokens before
/// `first` within the same sentence.
pub fn is_negated(cue_ends: &[usize], sentence_start_tok: usize, first: usize) -> bool {
    cue_ends
        .iter()
        .any(|&c| c >= sentence_start_tok && c < first && first - c <= NEGATION_WINDOW)
}

/// Result of scanning one report with the stage-1 lexicon.
#[derive(Debug, Clone)]
pub struct ThyroidScan {
    pub seg: Segmented,
    pub matches: Vec<TermMatch<Stage1Term>>,
    /// Sentence index for each match.
    pub match_sentence: Vec<usize>,
    /// Negation flag for each match (only meaningful for findings).
    pub negated: Vec<bool>,
    /// Per sentence: does it mention the thyroid (gate or standalone term)?
    pub context: Vec<bool>,
    /// Token index of the last token of every negation cue.
    pub cue_ends: Vec<usize>,
}

impl ThyroidScan {
    fn build(seg: Segmented, matches: Vec<TermMatch<Stage1Term>>) -> Self {
        let match_sentence: Vec<usize> = matches.iter().map(|m| sentence_of(&seg, m.first)).collect();
        let mut context = vec![false; seg.sentences.len()];
        for (m, &s) in matches.iter().zip(&match_sentence) {
            if m.tag.opens_context {
                context[s] = true;
            }
        }
        let cue_ends: Vec<usize> = matches.iter().filter(|m| m.tag.kind == Stage1Tag::Cue).map(|m| m.last).collect();
        let negated = matches
            .iter()
            .zip(&match_sentence)
            .map(|(m, &s)| m.tag.kind.is_finding() && is_negated(&cue_ends, seg.sentences[s].tokens.start, m.first))
            .collect();
        Self { seg, matches, match_sentence, negated, context, cue_ends }
    }

    pub fn has_thyroid_mention(&self) -> bool {
        self.context.iter().any(|&c| c)
    }

    fn live_findings(&self) -> impl Iterator<Item = (usize, &TermMatch<Stage1Term>)> {
        self.matches
            .iter()
            .enumerate()
            .filter(move |(i, m)| m.tag.kind.is_finding() && !self.negated[*i] && self.context[self.match_sentence[*i]])
    }

    pub fn has_live_nodular(&self) -> bool {
        self.live_findings().any(|(_, m)| m.tag.kind == Stage1Tag::Nodular)
    }

    pub fn has_live_finding(&self) -> bool {
        self.live_findings().next().is_some()
    }

    /// Index of the standalone match that stands in for the thyroid mention,
    /// when the report never writes a gate term.
    fn standalone_as_thyroid(&self) -> Option<usize> {
        if self.matches.iter().any(|m| m.tag.kind == Stage1Tag::Gate) {
            return None;
        }
        self.matches.iter().position(|m| m.tag.kind == Stage1Tag::Standalone)
    }

    fn span(&self, text: &str, m: &TermMatch<Stage1Term>, category: EntityCategory, subtype: Option<&str>) -> EntitySpan {
        let (s, e) = m.char_range(&self.seg);
        EntitySpan::from_text(text, s, e, category, subtype.map(str::to_string))
    }

    /// Evidence spans for `label`. Finding spans are emitted only for
    /// positive labels.
    pub fn evidence(&self, text: &str, label: ReportLabel) -> Vec<EntitySpan> {
        let thyroid_standin = self.standalone_as_thyroid();
        let mut out = Vec::new();
        for (i, m) in self.matches.iter().enumerate() {
            let in_context = self.context[self.match_sentence[i]];
            match m.tag.kind {
                Stage1Tag::Gate => out.push(self.span(text, m, EntityCategory::Thyroid, None)),
                Stage1Tag::Standalone if thyroid_standin == Some(i) => {
                    out.push(self.span(text, m, EntityCategory::Thyroid, None))
                }
                Stage1Tag::Normal if in_context => out.push(self.span(text, m, EntityCategory::NormalFinding, None)),
                tag if tag.is_finding() && in_context && !self.negated[i] && label.is_itf() => {
                    let subtype = if tag == Stage1Tag::Nodular { SUBTYPE_NODULAR } else { SUBTYPE_NON_NODULAR };
                    out.push(self.span(text, m, EntityCategory::TypeOfFinding, Some(subtype)));
                }
                _ => {}
            }
        }
        out
    }
}

/// Binary stage-1 decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage1Decision {
    NoFinding,
    Positive,
}

/// Pluggable stage-1 classifier. Implementations must be stateless after
/// construction.
pub trait DetectorBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Score in `[0, 1]`; higher means more likely to contain a finding.
    fn score(&self, doc: &ReportDoc) -> f64;

    fn threshold(&self) -> f64 {
        DEFAULT_THRESHOLD
    }

    fn classify(&self, doc: &ReportDoc) -> (Stage1Decision, f64) {
        let score = self.score(doc);
        let decision = if score >= self.threshold() { Stage1Decision::Positive } else { Stage1Decision::NoFinding };
        (decision, score)
    }
}

/// Deterministic lexicon baseline: positive iff a thyroid-context sentence
/// holds a non-negated finding term.
#[derive(Debug, Clone)]
pub struct LexiconBackend {
    lexicon: CompiledLexicon,
}

pub fn lexicon_backend(lexicon: Lexicon) -> Result<LexiconBackend, LexiconError> {
    Ok(LexiconBackend { lexicon: CompiledLexicon::new(lexicon)? })
}

impl Default for LexiconBackend {
    fn default() -> Self {
        Self { lexicon: CompiledLexicon::default() }
    }
}

impl DetectorBackend for LexiconBackend {
    fn name(&self) -> &str {
        "lexicon"
    }

    fn score(&self, doc: &ReportDoc) -> f64 {
        if self.lexicon.scan(&doc.text).has_live_finding() {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassifyFlag {
    /// Report text was empty.
    EmptyText,
    /// Backend said positive but no finding term was found in context.
    WeakEvidence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: ReportLabel,
    pub score: f64,
    pub evidence: Vec<EntitySpan>,
    pub flags: Vec<ClassifyFlag>,
}

/// Runs the backend, then splits positives into ITN vs non-nodular.
pub fn classify_report(doc: &ReportDoc, backend: &dyn DetectorBackend, rules: &CompiledLexicon) -> Classification {
    if doc.text.trim().is_empty() {
        return Classification {
            label: ReportLabel::NoFinding,
            score: 0.0,
            evidence: Vec::new(),
            flags: vec![ClassifyFlag::EmptyText],
        };
    }
    let (decision, score) = backend.classify(doc);
    let scan = rules.scan(&doc.text);
    let mut flags = Vec::new();
    let label = match decision {
        Stage1Decision::NoFinding => ReportLabel::NoFinding,
        Stage1Decision::Positive if scan.has_live_nodular() => ReportLabel::Itn,
        Stage1Decision::Positive => {
            if !scan.has_live_finding() {
                flags.push(ClassifyFlag::WeakEvidence);
            }
            ReportLabel::NonNodular
        }
    };
    let evidence = scan.evidence(&doc.text, label);
    Classification { label, score, evidence, flags }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{BodyGroup, Modality};
    use chrono::NaiveDate;

    fn doc(text: &str) -> ReportDoc {
        ReportDoc {
            report_id: "r".into(),
            patient_id: "p".into(),
            study_date: NaiveDate::from_ymd_opt(2021, 3, 4).unwrap(),
            modality: Modality::Ct,
            body_group: BodyGroup::Neck,
            text: text.into(),
        }
    }

    fn label(text: &str) -> ReportLabel {
        let rules = CompiledLexicon::default();
        classify_report(&doc(text), &LexiconBackend::default(), &rules).label
    }

    #[test]
    fn classify_fixtures() {
        assert_eq!(label("The thyroid gland is unremarkable."), ReportLabel::NoFinding);
        assert_eq!(label("1.2 cm hypodense nodule in the right thyroid lobe."), ReportLabel::Itn);
        assert_eq!(label("Thyromegaly without discrete nodule."), ReportLabel::NonNodular);
        assert_eq!(label("The lungs are clear. 4 mm nodule in the right lower lobe."), ReportLabel::NoFinding);
    }

    #[test]
    fn backend_fixtures() {
        let b = LexiconBackend::default();
        assert_eq!(b.classify(&doc("Goiter.")).0, Stage1Decision::Positive);
        assert_eq!(b.classify(&doc("No thyroid nodule identified.")).0, Stage1Decision::NoFinding);
        assert_eq!(b.classify(&doc("Thyroid: normal.")).0, Stage1Decision::NoFinding);
        assert_eq!(b.score(&doc("Goiter.")), 1.0);
        assert_eq!(b.name(), "lexicon");
    }

    #[test]
    fn negation_window_is_bounded() {
        // cue five tokens before the term: suppressed
        assert_eq!(label("No abnormality of the thyroid nodule."), ReportLabel::NoFinding);
        // six tokens: not suppressed
        assert_eq!(label("No abnormality of the left thyroid nodule."), ReportLabel::Itn);
        // a cue after the term does not negate it
        assert_eq!(label("Thyroid nodule, no change."), ReportLabel::Itn);
        // cue in another sentence does not negate
        assert_eq!(label("No effusion. Thyroid nodule."), ReportLabel::Itn);
    }

    #[test]
    fn multiword_cue_and_term_precedence() {
        assert_eq!(label("Thyroid negative for nodule."), ReportLabel::NoFinding);
        assert_eq!(label("Thyroid gland congenitally absent."), ReportLabel::NonNodular);
        assert_eq!(label("Multinodular goiter."), ReportLabel::Itn);
    }

    #[test]
    fn tie_prefers_itn() {
        assert_eq!(label("Enlarged thyroid with a dominant nodule."), ReportLabel::Itn);
    }

    #[test]
    fn empty_text_flagged() {
        let c = classify_report(&doc("  "), &LexiconBackend::default(), &CompiledLexicon::default());
        assert_eq!(c.label, ReportLabel::NoFinding);
        assert_eq!(c.flags, vec![ClassifyFlag::EmptyText]);
    }

    struct AlwaysPositive;
    impl DetectorBackend for AlwaysPositive {
        fn name(&self) -> &str {
            "always"
        }
        fn score(&self, _: &ReportDoc) -> f64 {
            0.7
        }
    }

    #[test]
    fn positive_without_terms_is_weak_non_nodular() {
        let c = classify_report(&doc("Lungs are clear."), &AlwaysPositive, &CompiledLexicon::default());
        assert_eq!(c.label, ReportLabel::NonNodular);
        assert_eq!(c.flags, vec![ClassifyFlag::WeakEvidence]);
    }

    #[test]
    fn evidence_spans() {
        let text = "Goiter. Goiter with atrophy.";
        let c = classify_report(&doc(text), &LexiconBackend::default(), &CompiledLexicon::default());
        let got: Vec<_> = c.evidence.iter().map(|s| (s.start, s.end, s.category, s.subtype.clone())).collect();
        assert_eq!(
            got,
            vec![
                (0, 6, EntityCategory::Thyroid, None),
                (8, 14, EntityCategory::TypeOfFinding, Some("NonNodular".into())),
                (20, 27, EntityCategory::TypeOfFinding, Some("NonNodular".into())),
            ]
        );
    }

    #[test]
    fn no_finding_emits_only_context_spans() {
        let text = "The thyroid gland is unremarkable.";
        let c = classify_report(&doc(text), &LexiconBackend::default(), &CompiledLexicon::default());
        let cats: Vec<_> = c.evidence.iter().map(|s| (s.category, s.raw_text.as_str())).collect();
        assert_eq!(cats, vec![(EntityCategory::Thyroid, "thyroid gland"), (EntityCategory::NormalFinding, "unremarkable")]);
    }

    #[test]
    fn lexicon_overlap_rejected() {
        let mut lex = Lexicon::default();
        lex.nonnodular_terms.push("Nodule".into());
        assert!(matches!(lex.validate(), Err(LexiconError::Overlap(_))));
        let json = serde_json::to_string(&Lexicon::default()).unwrap();
        assert_eq!(Lexicon::from_json(&json).unwrap(), Lexicon::default());
    }

    #[test]
    fn monotone_under_appended_nodule_sentence() {
        let base = "1.2 cm nodule in the thyroid.";
        for extra in ["No effusion.", "Thyroid otherwise unremarkable.", "Left thyroid cyst."] {
            assert_eq!(label(&format!("{base} {extra}")), ReportLabel::Itn);
        }
    }
}
