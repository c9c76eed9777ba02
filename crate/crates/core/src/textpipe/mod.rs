//! Tokenization, n-gram extraction, vocabulary fitting and TF-IDF vectors.

mod lexicon;
mod ngram;
mod tokenize;
mod vector;
mod vocab;

pub use lexicon::{LexiconFeatures, StopWords};
pub use ngram::{extract_ngrams, term_counts, NgramRange};
pub use tokenize::{tokenize, TokenStream};
pub use vector::FeatureVector;
pub use vocab::{fit_vocabulary, Vocabulary, VocabularyConfig};
