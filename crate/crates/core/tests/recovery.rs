//! The library stages recover what the generator planted.

use std::collections::HashMap;

use itf_core::cascade::link_cohort;
use itf_core::codes::CodeTable;
use itf_core::cohort::build_cohort;
use itf_core::corpus::{read_annotations, read_corpus, write_annotations, write_corpus};
use itf_core::detect::{classify_report, CompiledLexicon, LexiconBackend};
use itf_core::synthgen::{generate, GenConfig, Synthetic};

fn noise_free(n: usize) -> Synthetic {
    generate(&GenConfig { seed: 11, n_patients: n, negation_rate: 0.0, distractor_rate: 0.0, ..GenConfig::default() })
        .unwrap()
}

#[test]
fn lexicon_labels_match_gold_without_noise() {
    let data = noise_free(1500);
    let backend = LexiconBackend::default();
    let rules = CompiledLexicon::default();
    let gold: HashMap<&str, _> = data.gold.iter().map(|g| (g.report_id.as_str(), g.report_label)).collect();
    for doc in &data.reports {
        let c = classify_report(doc, &backend, &rules);
        assert_eq!(c.label, gold[doc.report_id.as_str()], "{}", doc.text);
    }
}

#[test]
fn cohort_and_cascade_match_truth() {
    let data = noise_free(3000);
    let codes = CodeTable::default();
    let reports: HashMap<String, _> = data.reports.iter().map(|r| (r.report_id.clone(), r.clone())).collect();
    let (rows, summary) = build_cohort(&data.timelines, &codes, 1, Some(&reports));
    assert_eq!(summary.missing_index_report, 0);
    let truth: HashMap<&str, _> = data.truth.iter().map(|t| (t.patient_id.as_str(), t)).collect();
    for row in &rows {
        let t = truth[row.patient_id.as_str()];
        assert_eq!(row.eligibility, t.eligibility, "{}", row.patient_id);
        assert_eq!(row.index_date, t.index_date, "{}", row.patient_id);
        if row.eligibility.is_eligible() {
            assert_eq!(row.charlson_count, t.charlson_count, "{}", row.patient_id);
        }
    }

    let timelines: HashMap<String, _> = data.timelines.iter().map(|t| (t.patient_id.clone(), t.clone())).collect();
    let itf: HashMap<String, bool> = data.gold.iter().map(|g| (g.report_id.clone(), g.report_label.is_itf())).collect();
    let (outcomes, link) = link_cohort(&rows, &timelines, &itf, &codes);
    assert_eq!((link.missing_timeline, link.missing_finding), (0, 0));
    assert_eq!(outcomes.len(), summary.eligible);
    for o in &outcomes {
        let t = truth[o.patient_id.as_str()];
        let got = (o.ultrasound_date.is_some(), o.nodule_dx, o.biopsy, o.partial_thyroidectomy, o.total_thyroidectomy, o.cancer_confirmed);
        let want = (t.ultrasound, t.nodule_dx, t.biopsy, t.partial_thyroidectomy, t.total_thyroidectomy, t.cancer);
        assert_eq!(got, want, "{}", o.patient_id);
        assert_eq!(o.had_itf, t.label.is_itf());
    }
}

#[test]
fn corpus_files_round_trip() {
    let data = noise_free(200);
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    let gold = dir.path().join("gold.jsonl");
    write_corpus(std::fs::File::create(&corpus).unwrap(), &data.reports).unwrap();
    write_annotations(std::fs::File::create(&gold).unwrap(), &data.gold).unwrap();
    assert_eq!(read_corpus(&corpus).unwrap(), data.reports);
    assert_eq!(read_annotations(&gold).unwrap(), data.gold);
}
