//! Character-offset text utilities shared by the corpus, detection and
//! extraction layers.
//!
//! All offsets are Unicode scalar-value indices (not byte offsets).

use std::ops::Range;

/// A lowercase alphanumeric token with its character range in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub start: usize,
    pub end: usize,
    pub norm: String,
}

/// A sentence as a character range plus the range of token indices it owns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub start: usize,
    pub end: usize,
    pub tokens: Range<usize>,
}

/// Number of Unicode scalar values in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Slice `text` by character offsets. Returns `None` when the range is out of
/// bounds or inverted.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let b_start = indices.nth(start)?;
    let b_end = if end == start {
        b_start
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[b_start..b_end])
}

/// Maps byte offsets of `text` to character offsets. Built once per document
/// so regex matches (which report bytes) can be converted cheaply.
pub struct ByteToChar {
    table: Vec<usize>,
}

impl ByteToChar {
    pub fn new(text: &str) -> Self {
        let mut table = vec![0; text.len() + 1];
        let mut ci = 0;
        for (b, ch) in text.char_indices() {
            for slot in table.iter_mut().skip(b).take(ch.len_utf8()) {
                *slot = ci;
            }
            ci += 1;
        }
        table[text.len()] = ci;
        Self { table }
    }

    pub fn get(&self, byte: usize) -> usize {
        self.table[byte]
    }
}

/// Splits text into lowercase alphanumeric tokens. Punctuation and whitespace
/// separate tokens and are otherwise ignored.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut current: Option<(usize, String)> = None;
    let mut idx = 0;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            match current.as_mut() {
                Some((_, s)) => s.extend(ch.to_lowercase()),
                None => current = Some((idx, ch.to_lowercase().collect())),
            }
        } else if let Some((start, norm)) = current.take() {
            out.push(Token { start, end: idx, norm });
        }
        idx += 1;
    }
    if let Some((start, norm)) = current {
        out.push(Token { start, end: idx, norm });
    }
    out
}

/// Sentence boundaries: a period, semicolon or newline followed by whitespace
/// (or end of text) closes a sentence. Decimal points ("1.2") never split.
pub fn sentences(text: &str, tokens: &[Token]) -> Vec<Sentence> {
    let chars: Vec<char> = text.chars().collect();
    let mut bounds = Vec::new();
    let mut start = 0;
    for (i, &ch) in chars.iter().enumerate() {
        let terminator = matches!(ch, '.' | ';' | '\n');
        if !terminator {
            continue;
        }
        let next_ws = chars.get(i + 1).is_none_or(|c| c.is_whitespace());
        if ch == '\n' || next_ws {
            bounds.push((start, i + 1));
            start = i + 1;
        }
    }
    if start < chars.len() {
        bounds.push((start, chars.len()));
    }

    let mut out = Vec::with_capacity(bounds.len());
    let mut t = 0;
    for (s, e) in bounds {
        let first = t;
        while t < tokens.len() && tokens[t].end <= e {
            t += 1;
        }
        if t == first && chars[s..e].iter().all(|c| !c.is_alphanumeric()) {
            continue;
        }
        out.push(Sentence { start: s, end: e, tokens: first..t });
    }
    out
}

/// Tokenized, sentence-segmented view of one document.
#[derive(Debug, Clone)]
pub struct Segmented {
    pub tokens: Vec<Token>,
    pub sentences: Vec<Sentence>,
}

impl Segmented {
    pub fn new(text: &str) -> Self {
        let tokens = tokenize(text);
        let sentences = sentences(text, &tokens);
        Self { tokens, sentences }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn char_slice_handles_multibyte() {
        let t = "2 × 3 cm nodule";
        assert_eq!(char_slice(t, 2, 3), Some("×"));
        assert_eq!(char_slice(t, 4, 8), Some("3 cm"));
        assert_eq!(char_slice(t, 0, 0), Some(""));
        assert_eq!(char_slice(t, 15, 15), Some(""));
        assert_eq!(char_slice(t, 10, 16), None);
        assert_eq!(char_slice(t, 3, 2), None);
    }

    #[test]
    fn byte_to_char_matches_char_indices() {
        let t = "a×b";
        let m = ByteToChar::new(t);
        assert_eq!(m.get(0), 0);
        assert_eq!(m.get(1), 1);
        assert_eq!(m.get(3), 2);
        assert_eq!(m.get(4), 3);
    }

    #[test]
    fn tokens_are_lowercase_and_split_on_punctuation() {
        let toks = tokenize("Non-FDG-avid Thyroid, 1.2 cm");
        let norms: Vec<_> = toks.iter().map(|t| t.norm.as_str()).collect();
        assert_eq!(norms, ["non", "fdg", "avid", "thyroid", "1", "2", "cm"]);
        assert_eq!((toks[3].start, toks[3].end), (13, 20));
    }

    #[test]
    fn sentence_split_ignores_decimal_points() {
        let text = "1.2 cm nodule in the thyroid. Ultrasound recommended.";
        let seg = Segmented::new(text);
        assert_eq!(seg.sentences.len(), 2);
        assert_eq!(char_slice(text, seg.sentences[0].start, seg.sentences[0].end), Some("1.2 cm nodule in the thyroid."));
        assert_eq!(seg.sentences[1].tokens, 7..9);
    }

    #[test]
    fn semicolon_and_newline_split() {
        let seg = Segmented::new("Thyroid normal; lungs clear\nNo effusion");
        assert_eq!(seg.sentences.len(), 3);
    }
}
