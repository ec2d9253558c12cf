use std::collections::HashMap;

/// A word token with its position in the source text.
///
/// `start` and `end` are character offsets (not byte offsets), half-open.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Splits `text` into lowercased alphanumeric word tokens with their
/// character spans. Apostrophes are kept only when they sit between two
/// alphanumeric characters (`it's`), and are normalized to `'`.
pub fn tokenize_spans(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < n {
        if !chars[i].is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = i;
        let mut j = i;
        loop {
            while j < n && chars[j].is_alphanumeric() {
                j += 1;
            }
            if j + 1 < n && is_apostrophe(chars[j]) && chars[j + 1].is_alphanumeric() {
                j += 1;
                continue;
            }
            break;
        }
        let mut word = String::with_capacity(j - start);
        for &c in &chars[start..j] {
            if is_apostrophe(c) {
                word.push('\'');
            } else {
                word.extend(c.to_lowercase());
            }
        }
        tokens.push(Token {
            text: word,
            start,
            end: j,
        });
        i = j;
    }
    tokens
}

/// Lowercased word tokens of `text`, in order. Punctuation is dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_spans(text).into_iter().map(|t| t.text).collect()
}

/// Unigram overlap F1 with clipped counts. Returns 0 when either side has no
/// tokens or nothing overlaps.
pub fn unigram_f1(candidate: &[String], reference: &[String]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    for tok in reference {
        *ref_counts.entry(tok.as_str()).or_default() += 1;
    }
    let mut overlap = 0usize;
    for tok in candidate {
        if let Some(c) = ref_counts.get_mut(tok.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / candidate.len() as f64;
    let recall = overlap as f64 / reference.len() as f64;
    2.0 * precision * recall / (precision + recall)
}
