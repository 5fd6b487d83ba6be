use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::textfeat::SparseRow;

/// Multinomial naive Bayes parameters, indexed by class (0 irrelevant, 1 relevant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesParams {
    pub log_prior: [f64; 2],
    pub log_likelihood: [Vec<f64>; 2],
}

impl NaiveBayesParams {
    /// Priors are class frequencies of the training multiset; term weights
    /// are `(alpha + count) / (alpha * V + total)` per class.
    pub(super) fn fit(rows: &[&SparseRow], labels: &[Label], n_features: usize, alpha: f64) -> Self {
        let mut counts = [vec![0.0; n_features], vec![0.0; n_features]];
        let mut n_class = [0usize; 2];
        for (row, label) in rows.iter().zip(labels) {
            let c = label.as_u8() as usize;
            n_class[c] += 1;
            for (col, v) in row.iter() {
                counts[c][col] += v;
            }
        }
        let n = rows.len() as f64;
        let log_prior = [(n_class[0] as f64 / n).ln(), (n_class[1] as f64 / n).ln()];
        let log_likelihood = counts.map(|class_counts| {
            let total: f64 = class_counts.iter().sum();
            let denom = (alpha * n_features as f64 + total).ln();
            class_counts.iter().map(|&c| (alpha + c).ln() - denom).collect()
        });
        NaiveBayesParams {
            log_prior,
            log_likelihood,
        }
    }

    /// Per-class joint log-likelihood of a row.
    pub fn joint_log_likelihood(&self, row: &SparseRow) -> [f64; 2] {
        [0, 1].map(|c| self.log_prior[c] + row.dot(&self.log_likelihood[c]))
    }

    /// `p(relevant | x)` computed from the log-likelihood difference.
    pub fn posterior(&self, row: &SparseRow) -> f64 {
        let [irrelevant, relevant] = self.joint_log_likelihood(row);
        super::sigmoid(relevant - irrelevant)
    }
}
