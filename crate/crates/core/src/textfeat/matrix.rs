use std::collections::BTreeMap;

use rayon::prelude::*;

use super::Vocabulary;

/// A sparse row: strictly increasing column indices with positive values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRow {
    entries: Vec<(usize, f64)>,
}

impl SparseRow {
    /// Builds a row from `(column, value)` pairs sorted by column. Zero values are dropped.
    pub fn new(mut entries: Vec<(usize, f64)>) -> Self {
        entries.retain(|&(_, v)| v != 0.0);
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        SparseRow { entries }
    }

    /// Like [`SparseRow::new`] but scaled to unit L2 norm.
    pub fn normalized(entries: Vec<(usize, f64)>) -> Self {
        let mut row = SparseRow::new(entries);
        let norm = row.norm();
        if norm > 0.0 {
            for (_, v) in &mut row.entries {
                *v /= norm;
            }
        }
        row
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v).sum()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(c, v)| v * dense[c]).sum()
    }

    pub fn max_column(&self) -> Option<usize> {
        self.entries.last().map(|&(c, _)| c)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    n_cols: usize,
    rows: Vec<SparseRow>,
}

impl FeatureMatrix {
    pub fn new(n_cols: usize, rows: Vec<SparseRow>) -> Self {
        debug_assert!(rows.iter().all(|r| r.max_column().is_none_or(|c| c < n_cols)));
        FeatureMatrix { n_cols, rows }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &SparseRow {
        &self.rows[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(SparseRow::nnz).sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.rows.iter().all(|r| r.iter().all(|(_, v)| v >= 0.0))
    }

    /// `(row, col, value)` triplets in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |(c, v)| (r, c, v)))
    }
}

/// Raw-count TF times smoothed IDF, each row L2-normalized. Tokens outside
/// the vocabulary are ignored.
pub fn tfidf(corpus: &[Vec<String>], vocab: &Vocabulary) -> FeatureMatrix {
    let idf = vocab.idf();
    let rows = corpus
        .par_iter()
        .map(|doc| {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for token in doc {
                if let Some(col) = vocab.column(token) {
                    *counts.entry(col).or_default() += 1;
                }
            }
            SparseRow::normalized(counts.into_iter().map(|(c, n)| (c, n as f64 * idf[c])).collect())
        })
        .collect();
    FeatureMatrix::new(vocab.len(), rows)
}
