use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::FeatureError;

/// Term to column mapping with document frequencies. Columns follow the
/// lexicographic order of the terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    document_frequencies: Vec<usize>,
    n_documents: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    n_documents: usize,
    terms: Vec<String>,
    document_frequencies: Vec<usize>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_parts(r.terms, r.document_frequencies, r.n_documents)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            n_documents: v.n_documents,
            terms: v.terms,
            document_frequencies: v.document_frequencies,
        }
    }
}

impl Vocabulary {
    pub(crate) fn from_parts(terms: Vec<String>, document_frequencies: Vec<usize>, n_documents: usize) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            terms,
            document_frequencies,
            n_documents,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_documents(&self) -> usize {
        self.n_documents
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn document_frequencies(&self) -> &[usize] {
        &self.document_frequencies
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn df(&self, term: &str) -> Option<usize> {
        self.column(term).map(|c| self.document_frequencies[c])
    }

    /// Smoothed inverse document frequency `ln((1 + N) / (1 + df)) + 1` per column.
    pub fn idf(&self) -> Vec<f64> {
        let n = self.n_documents as f64;
        self.document_frequencies
            .iter()
            .map(|&df| ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0)
            .collect()
    }

    /// Checks the structural invariants after deserialization.
    pub(crate) fn check(&self) -> Result<(), String> {
        if self.terms.len() != self.document_frequencies.len() {
            return Err("terms and document_frequencies differ in length".into());
        }
        if self.terms.windows(2).any(|w| w[0] >= w[1]) {
            return Err("terms are not strictly sorted".into());
        }
        if self.document_frequencies.iter().any(|&df| df == 0 || df > self.n_documents) {
            return Err("document frequency out of range".into());
        }
        Ok(())
    }
}

pub(crate) fn fit_allow_empty(corpus: &[Vec<String>]) -> Vocabulary {
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in corpus {
        let distinct: BTreeSet<&str> = doc.iter().map(String::as_str).collect();
        for term in distinct {
            *df.entry(term).or_default() += 1;
        }
    }
    let (terms, dfs) = df.into_iter().map(|(t, c)| (t.to_string(), c)).unzip();
    Vocabulary::from_parts(terms, dfs, corpus.len())
}

/// Collects every distinct token with its per-document presence count.
pub fn fit_vocabulary(corpus: &[Vec<String>]) -> Result<Vocabulary, FeatureError> {
    let vocab = fit_allow_empty(corpus);
    if vocab.is_empty() {
        return Err(FeatureError::EmptyVocabulary);
    }
    Ok(vocab)
}
