use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{StopWords, TokenStream};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NgramRange {
    pub min_n: usize,
    pub max_n: usize,
}

impl NgramRange {
    pub const BIGRAM: NgramRange = NgramRange { min_n: 2, max_n: 2 };
    pub const TRIGRAM: NgramRange = NgramRange { min_n: 3, max_n: 3 };

    pub fn new(min_n: usize, max_n: usize) -> Result<Self> {
        let r = NgramRange { min_n, max_n };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if 1 <= self.min_n && self.min_n <= self.max_n && self.max_n <= 3 {
            Ok(())
        } else {
            Err(Error::Config(format!("ngram range ({}, {}) outside 1 <= min <= max <= 3", self.min_n, self.max_n)))
        }
    }
}

impl Default for NgramRange {
    fn default() -> Self {
        NgramRange::BIGRAM
    }
}

/// All contiguous n-grams for each n in `range`, ordered by n then position.
/// Stop words are dropped from unigrams only.
pub fn extract_ngrams(stream: &TokenStream, range: NgramRange, stop: Option<&StopWords>) -> Vec<String> {
    let toks = &stream.tokens;
    let mut out = Vec::new();
    for n in range.min_n..=range.max_n {
        if toks.len() < n {
            continue;
        }
        for w in toks.windows(n) {
            if n == 1 && stop.is_some_and(|s| s.contains(&w[0])) {
                continue;
            }
            out.push(w.join(" "));
        }
    }
    out
}

/// Raw within-document term counts.
pub fn term_counts(stream: &TokenStream, range: NgramRange, stop: Option<&StopWords>) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    for t in extract_ngrams(stream, range, stop) {
        *m.entry(t).or_insert(0.0) += 1.0;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textpipe::tokenize;

    fn stream(t: &[&str]) -> TokenStream {
        TokenStream { tokens: t.iter().map(|s| s.to_string()).collect() }
    }

    #[test]
    fn bigrams() {
        let s = stream(&["driver", "was", "distracted"]);
        assert_eq!(extract_ngrams(&s, NgramRange::BIGRAM, None), ["driver was", "was distracted"]);
        assert!(extract_ngrams(&stream(&["wet"]), NgramRange::BIGRAM, None).is_empty());
    }

    #[test]
    fn stopwords_only_hit_unigrams() {
        let stop = StopWords::from_words(["a"]);
        let s = stream(&["a", "b", "c"]);
        assert_eq!(extract_ngrams(&s, NgramRange::new(1, 2).unwrap(), Some(&stop)), ["b", "c", "a b", "b c"]);
    }

    #[test]
    fn range_validation() {
        assert!(NgramRange::new(0, 1).is_err());
        assert!(NgramRange::new(2, 1).is_err());
        assert!(NgramRange::new(1, 4).is_err());
    }

    #[test]
    fn counts_repeat_terms() {
        let c = term_counts(&tokenize("the car the car"), NgramRange::BIGRAM, None);
        assert_eq!(c["the car"], 2.0);
        assert_eq!(c["car the"], 1.0);
    }
}
