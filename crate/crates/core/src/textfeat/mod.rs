//! TF-IDF document-term matrix construction.
//!
//! The matrix is built once per project and never changes afterwards. Rows are
//! sparse, strictly positive and L2-normalized (or empty), which is what the
//! multinomial naive Bayes classifier requires.

mod matrix;
mod tokenize;
mod vocab;

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;

pub use matrix::{tfidf, FeatureMatrix, SparseRow};
pub use tokenize::{stopwords, tokenize};
pub use vocab::{fit_vocabulary, Vocabulary};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum FeatureError {
    #[error("no token survived tokenization; the vocabulary is empty")]
    EmptyVocabulary,
    #[error("invalid feature settings: {0}")]
    InvalidSpec(String),
}

/// Feature-extraction techniques. Only TF-IDF is built; the enum keeps the
/// classifier/feature compatibility check explicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    #[default]
    Tfidf,
}

impl FeatureKind {
    /// Whether every value produced by this technique is nonnegative.
    pub fn is_nonnegative(self) -> bool {
        match self {
            FeatureKind::Tfidf => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSpec {
    pub kind: FeatureKind,
    pub ngram_max: usize,
    pub split_title_abstract: bool,
    pub title_weight: f64,
    pub abstract_weight: f64,
    pub lowercase: bool,
    pub stopword_removal: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            kind: FeatureKind::Tfidf,
            ngram_max: 1,
            split_title_abstract: false,
            title_weight: 1.0,
            abstract_weight: 1.0,
            lowercase: true,
            stopword_removal: false,
        }
    }
}

impl FeatureSpec {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if !(1..=3).contains(&self.ngram_max) {
            return Err(FeatureError::InvalidSpec(format!(
                "ngram_max must be between 1 and 3, got {}",
                self.ngram_max
            )));
        }
        for (name, w) in [("title_weight", self.title_weight), ("abstract_weight", self.abstract_weight)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(FeatureError::InvalidSpec(format!("{name} must be a nonnegative number, got {w}")));
            }
        }
        if self.split_title_abstract && self.title_weight + self.abstract_weight <= 0.0 {
            return Err(FeatureError::InvalidSpec(
                "title_weight + abstract_weight must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The fixed feature representation of a project: one vocabulary per column
/// block (one block, or title then abstract in split mode) and the matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub vocabularies: Vec<Vocabulary>,
    pub matrix: FeatureMatrix,
}

pub fn build_features(dataset: &Dataset, spec: &FeatureSpec) -> Result<Features, FeatureError> {
    spec.validate()?;
    let records = dataset.records();
    if !spec.split_title_abstract {
        let docs: Vec<Vec<String>> = records.iter().map(|r| tokenize(&r.text(), spec)).collect();
        let vocab = fit_vocabulary(&docs)?;
        let matrix = tfidf(&docs, &vocab);
        return Ok(Features {
            vocabularies: vec![vocab],
            matrix,
        });
    }

    let titles: Vec<Vec<String>> = records.iter().map(|r| tokenize(&r.title, spec)).collect();
    let abstracts: Vec<Vec<String>> = records.iter().map(|r| tokenize(&r.abstract_text, spec)).collect();
    let title_vocab = vocab::fit_allow_empty(&titles);
    let abstract_vocab = vocab::fit_allow_empty(&abstracts);
    if title_vocab.len() + abstract_vocab.len() == 0 {
        return Err(FeatureError::EmptyVocabulary);
    }
    let title_block = tfidf(&titles, &title_vocab);
    let abstract_block = tfidf(&abstracts, &abstract_vocab);
    let offset = title_vocab.len();
    let rows = title_block
        .rows()
        .iter()
        .zip(abstract_block.rows())
        .map(|(t, a)| {
            let entries = t
                .iter()
                .map(|(c, v)| (c, v * spec.title_weight))
                .chain(a.iter().map(|(c, v)| (c + offset, v * spec.abstract_weight)))
                .filter(|&(_, v)| v > 0.0)
                .collect();
            SparseRow::normalized(entries)
        })
        .collect();
    let matrix = FeatureMatrix::new(offset + abstract_vocab.len(), rows);
    Ok(Features {
        vocabularies: vec![title_vocab, abstract_vocab],
        matrix,
    })
}
