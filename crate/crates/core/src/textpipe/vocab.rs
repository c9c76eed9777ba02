use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{term_counts, FeatureVector, NgramRange, StopWords, TokenStream};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VocabularyConfig {
    pub ngram_range: NgramRange,
    pub min_df: usize,
    pub max_features: usize,
}

impl Default for VocabularyConfig {
    fn default() -> Self {
        Self { ngram_range: NgramRange::BIGRAM, min_df: 2, max_features: 20_000 }
    }
}

/// Fitted n-gram index with document frequencies.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    config: VocabularyConfig,
    terms: Vec<String>,
    df: Vec<u32>,
    n_docs: usize,
    stopwords: Vec<String>,
    index: HashMap<String, u32>,
    idf: Vec<f64>,
    stop: StopWords,
    id: u64,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    config: VocabularyConfig,
    n_docs: usize,
    stopwords: Vec<String>,
    terms: Vec<String>,
    df: Vec<u32>,
}

fn smooth_idf(n_docs: usize, df: u32) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

impl Vocabulary {
    fn assemble(config: VocabularyConfig, n_docs: usize, mut stopwords: Vec<String>, terms: Vec<String>, df: Vec<u32>) -> Self {
        stopwords.sort();
        stopwords.dedup();
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        let idf = df.iter().map(|&d| smooth_idf(n_docs, d)).collect();
        let stop = StopWords::from_words(&stopwords);
        let mut v = Self { config, terms, df, n_docs, stopwords, index, idf, stop, id: 0 };
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&v.to_file()).expect("vocabulary serializes"));
        v.id = u64::from_le_bytes(h.finalize()[..8].try_into().unwrap());
        v
    }

    fn to_file(&self) -> VocabularyFile {
        VocabularyFile {
            config: self.config.clone(),
            n_docs: self.n_docs,
            stopwords: self.stopwords.clone(),
            terms: self.terms.clone(),
            df: self.df.clone(),
        }
    }

    pub fn config(&self) -> &VocabularyConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, i: u32) -> &str {
        &self.terms[i as usize]
    }

    pub fn index_of(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn df(&self, term: &str) -> Option<u32> {
        self.index_of(term).map(|i| self.df[i as usize])
    }

    pub fn idf(&self, i: u32) -> f64 {
        self.idf[i as usize]
    }

    /// Content hash of terms, frequencies and configuration.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn stopwords(&self) -> &StopWords {
        &self.stop
    }

    /// Term counts of `stream` under this vocabulary's n-gram policy (in- and out-of-vocabulary).
    pub fn counts(&self, stream: &TokenStream) -> BTreeMap<String, f64> {
        term_counts(stream, self.config.ngram_range, Some(&self.stop))
    }

    /// Unnormalized `tf * scale(term) * idf` pairs for in-vocabulary terms.
    pub fn weigh<F>(&self, counts: &BTreeMap<String, f64>, mut scale: F) -> Vec<(u32, f64)>
    where
        F: FnMut(&str) -> f64,
    {
        counts
            .iter()
            .filter_map(|(t, tf)| self.index_of(t).map(|i| (i, tf * scale(t) * self.idf(i))))
            .collect()
    }

    /// L2-normalized TF-IDF vector; out-of-vocabulary terms are dropped.
    pub fn vectorize(&self, stream: &TokenStream) -> FeatureVector {
        let pairs = self.weigh(&self.counts(stream), |_| 1.0);
        FeatureVector::from_pairs(pairs, self.len(), self.id).normalized()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("vocabulary serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: VocabularyFile = serde_json::from_str(s)?;
        if f.terms.len() != f.df.len() {
            return Err(Error::Format("vocabulary terms and df lengths differ".into()));
        }
        if f.terms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format("vocabulary terms not strictly sorted".into()));
        }
        Ok(Self::assemble(f.config, f.n_docs, f.stopwords, f.terms, f.df))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Keeps terms with `df >= min_df`; above `max_features` keeps the terms with
/// the largest corpus TF-IDF mass, ties broken by term order. Indices follow
/// lexicographic term order.
pub fn fit_vocabulary(corpus: &[TokenStream], config: &VocabularyConfig, stop: &StopWords) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    config.ngram_range.validate()?;
    let n_docs = corpus.len();
    let (df, tf): (HashMap<String, u32>, HashMap<String, f64>) = corpus
        .par_iter()
        .map(|s| term_counts(s, config.ngram_range, Some(stop)))
        .fold(
            || (HashMap::new(), HashMap::new()),
            |(mut df, mut tf), counts| {
                for (t, c) in counts {
                    *tf.entry(t.clone()).or_insert(0.0) += c;
                    *df.entry(t).or_insert(0u32) += 1;
                }
                (df, tf)
            },
        )
        .reduce(
            || (HashMap::new(), HashMap::new()),
            |(mut df, mut tf), (df2, tf2)| {
                for (t, d) in df2 {
                    *df.entry(t).or_insert(0) += d;
                }
                for (t, c) in tf2 {
                    *tf.entry(t).or_insert(0.0) += c;
                }
                (df, tf)
            },
        );
    let mut kept: Vec<(String, u32)> = df.into_iter().filter(|(_, d)| *d as usize >= config.min_df.max(1)).collect();
    if kept.len() > config.max_features {
        let mass = |t: &str, d: u32| tf[t] * smooth_idf(n_docs, d);
        kept.sort_by(|a, b| mass(&b.0, b.1).total_cmp(&mass(&a.0, a.1)).then_with(|| a.0.cmp(&b.0)));
        kept.truncate(config.max_features);
    }
    kept.sort_by(|a, b| a.0.cmp(&b.0));
    let (terms, dfs): (Vec<String>, Vec<u32>) = kept.into_iter().unzip();
    let mut stopwords: Vec<String> = Vec::new();
    if config.ngram_range.min_n == 1 {
        // only unigram extraction consults the stop list
        stopwords = stop.words();
    }
    Ok(Vocabulary::assemble(config.clone(), n_docs, stopwords, terms, dfs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textpipe::tokenize;

    fn docs(texts: &[&str]) -> Vec<TokenStream> {
        texts.iter().map(|t| tokenize(t)).collect()
    }

    #[test]
    fn min_df_threshold() {
        let v = fit_vocabulary(&docs(&["the car hit", "the car slid"]), &VocabularyConfig::default(), &StopWords::default()).unwrap();
        assert_eq!(v.terms(), ["the car"]);
    }

    #[test]
    fn min_df_one_is_union() {
        let cfg = VocabularyConfig { min_df: 1, ..Default::default() };
        let v = fit_vocabulary(&docs(&["a b", "c d", "e f"]), &cfg, &StopWords::default()).unwrap();
        assert_eq!(v.terms(), ["a b", "c d", "e f"]);
    }

    #[test]
    fn empty_corpus_errors() {
        assert!(matches!(fit_vocabulary(&[], &VocabularyConfig::default(), &StopWords::default()), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn smooth_idf_value() {
        // N = 2, df = 1
        let cfg = VocabularyConfig { min_df: 1, ..Default::default() };
        let v = fit_vocabulary(&docs(&["x y", "z w"]), &cfg, &StopWords::default()).unwrap();
        let i = v.index_of("x y").unwrap();
        assert!((v.idf(i) - (1.5f64.ln() + 1.0)).abs() < 1e-12);
        assert!((v.idf(i) - 1.4055).abs() < 1e-4);
    }

    #[test]
    fn max_features_keeps_heaviest() {
        let cfg = VocabularyConfig { min_df: 1, max_features: 1, ..Default::default() };
        let v = fit_vocabulary(&docs(&["a b a b a b", "c d"]), &cfg, &StopWords::default()).unwrap();
        assert_eq!(v.terms(), ["a b"]);
        // equal mass: lexicographic tie-break
        let v = fit_vocabulary(&docs(&["q r", "m n"]), &cfg, &StopWords::default()).unwrap();
        assert_eq!(v.terms(), ["m n"]);
    }

    #[test]
    fn vectorize_cases() {
        let cfg = VocabularyConfig { min_df: 1, ..Default::default() };
        let v = fit_vocabulary(&docs(&["a b c", "b c d"]), &cfg, &StopWords::default()).unwrap();
        let one = v.vectorize(&tokenize("a b"));
        assert_eq!(one.nnz(), 1);
        assert!((one.values[0] - 1.0).abs() < 1e-15);
        let none = v.vectorize(&tokenize("x y z"));
        assert!(none.is_zero());
        assert_eq!(none.norm(), 0.0);
        assert_eq!(none.space, v.id());
    }

    #[test]
    fn json_roundtrip_preserves_id() {
        let cfg = VocabularyConfig { ngram_range: NgramRange::new(1, 2).unwrap(), min_df: 1, ..Default::default() };
        let v = fit_vocabulary(&docs(&["the car hit a tree", "a car"]), &cfg, &StopWords::builtin()).unwrap();
        let back = Vocabulary::from_json(&v.to_json()).unwrap();
        assert_eq!(back.id(), v.id());
        assert_eq!(back.terms(), v.terms());
        let s = tokenize("the car hit");
        assert_eq!(back.vectorize(&s), v.vectorize(&s));
        assert!(v.index_of("the").is_none());
    }
}
