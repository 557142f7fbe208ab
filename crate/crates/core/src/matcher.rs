//! Token-sequence term matching with leftmost-longest semantics.

use std::collections::HashMap;

use crate::text::{tokenize, Segmented};

/// One term occurrence: token index range `[first, last]` inclusive plus the
/// tag the term was registered with.
#[derive(Debug, Clone, PartialEq)]
pub struct TermMatch<T> {
    pub first: usize,
    pub last: usize,
    pub tag: T,
}

impl<T> TermMatch<T> {
    pub fn char_range(&self, seg: &Segmented) -> (usize, usize) {
        (seg.tokens[self.first].start, seg.tokens[self.last].end)
    }
}

/// Terms are normalized through the same tokenizer as documents, so matching
/// is case- and punctuation-insensitive ("FDG-avid" == "fdg avid").
#[derive(Debug, Clone)]
pub struct TermMatcher<T> {
    by_head: HashMap<String, Vec<(Vec<String>, T)>>,
}

impl<T: Clone> TermMatcher<T> {
    pub fn new<'a>(terms: impl IntoIterator<Item = (&'a str, T)>) -> Self {
        let mut by_head: HashMap<String, Vec<(Vec<String>, T)>> = HashMap::new();
        for (term, tag) in terms {
            let toks: Vec<String> = tokenize(term).into_iter().map(|t| t.norm).collect();
            if toks.is_empty() {
                continue;
            }
            let entry = by_head.entry(toks[0].clone()).or_default();
            // First registration wins for duplicate token sequences.
            if !entry.iter().any(|(t, _)| *t == toks) {
                entry.push((toks, tag));
            }
        }
        for v in by_head.values_mut() {
            // stable: longer sequences first, registration order otherwise
            v.sort_by_key(|(t, _)| std::cmp::Reverse(t.len()));
        }
        Self { by_head }
    }

    /// Scans each sentence independently; at each position the longest
    /// registered term wins and matching resumes after it.
    pub fn find_all(&self, seg: &Segmented) -> Vec<TermMatch<T>> {
        let mut out = Vec::new();
        for sent in &seg.sentences {
            let mut i = sent.tokens.start;
            while i < sent.tokens.end {
                match self.longest_at(seg, i, sent.tokens.end) {
                    Some((len, tag)) => {
                        out.push(TermMatch { first: i, last: i + len - 1, tag: tag.clone() });
                        i += len;
                    }
                    None => i += 1,
                }
            }
        }
        out
    }

    fn longest_at(&self, seg: &Segmented, i: usize, limit: usize) -> Option<(usize, &T)> {
        let candidates = self.by_head.get(&seg.tokens[i].norm)?;
        candidates.iter().find_map(|(toks, tag)| {
            let end = i + toks.len();
            if end > limit {
                return None;
            }
            let hit = toks.iter().zip(&seg.tokens[i..end]).all(|(a, b)| *a == b.norm);
            hit.then_some((toks.len(), tag))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longest_match_wins() {
        let m = TermMatcher::new([("goiter", 1), ("multinodular goiter", 2), ("multinodular", 3)]);
        let seg = Segmented::new("Multinodular goiter. Goiter.");
        let hits = m.find_all(&seg);
        assert_eq!(hits.iter().map(|h| h.tag).collect::<Vec<_>>(), [2, 1]);
        assert_eq!(hits[0].char_range(&seg), (0, 19));
    }

    #[test]
    fn terms_do_not_cross_sentences() {
        let m = TermMatcher::new([("thyroid gland", 1)]);
        let seg = Segmented::new("Thyroid. Gland.");
        assert!(m.find_all(&seg).is_empty());
    }

    #[test]
    fn punctuation_insensitive() {
        let m = TermMatcher::new([("non fdg avid", 1)]);
        let seg = Segmented::new("Non-FDG-avid nodule");
        assert_eq!(m.find_all(&seg).len(), 1);
    }
}
