use std::collections::{BTreeMap, HashSet};

use super::{tokenize, TokenStream};
use crate::data;
use crate::error::Result;

/// Stop list applied to unigram features.
#[derive(Clone, Debug, Default)]
pub struct StopWords {
    words: HashSet<String>,
}

impl StopWords {
    pub fn parse(text: &str) -> Self {
        Self::from_words(
            text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self { words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect() }
    }

    pub fn builtin() -> Self {
        Self::parse(data::STOPWORDS)
    }

    pub fn contains(&self, w: &str) -> bool {
        self.words.contains(w)
    }

    /// Sorted word list.
    pub fn words(&self) -> Vec<String> {
        let mut w: Vec<String> = self.words.iter().cloned().collect();
        w.sort();
        w
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Weighted domain terms emitted as an auxiliary feature block, one feature
/// per term: `weight * occurrences`.
#[derive(Clone, Debug, Default)]
pub struct LexiconFeatures {
    terms: Vec<(Vec<String>, f64)>,
}

impl LexiconFeatures {
    pub fn parse(text: &str) -> Result<Self> {
        let mut terms: BTreeMap<String, f64> = BTreeMap::new();
        for (line, cols) in data::tsv_rows(text) {
            let w = match cols.get(1) {
                Some(w) => data::parse_weight(line, w)?,
                None => 1.0,
            };
            terms.insert(cols[0].to_lowercase(), w);
        }
        Ok(Self { terms: terms.into_iter().map(|(t, w)| (tokenize(&t).tokens, w)).collect() })
    }

    pub fn builtin() -> Self {
        Self::parse(data::LEXICON).expect("built-in lexicon parses")
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sparse `(offset, value)` pairs in increasing offset order.
    pub fn features(&self, stream: &TokenStream) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for (i, (pat, w)) in self.terms.iter().enumerate() {
            let hits = count_phrase(&stream.tokens, pat);
            if hits > 0 && *w != 0.0 {
                out.push((i, w * hits as f64));
            }
        }
        out
    }
}

pub(crate) fn count_phrase(tokens: &[String], pat: &[String]) -> usize {
    if pat.is_empty() || tokens.len() < pat.len() {
        return 0;
    }
    tokens.windows(pat.len()).filter(|w| *w == pat).count()
}
