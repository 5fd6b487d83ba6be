use serde::{Deserialize, Serialize};

use crate::corpus::Label;

/// Slack for comparing a computed recall or screened count against a
/// user-supplied level, so that e.g. `0.1 * 30` counts as 3 records.
const LEVEL_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum MetricError {
    #[error("recall never reaches {level}")]
    LevelNeverReached { level: f64 },
    #[error("{name} must lie in (0, 1], got {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("there are no relevant records")]
    NoRelevant,
}

/// `recall[k - 1]` is the fraction of the `n_relevant` relevant records found
/// among the first `k` labels.
pub fn recall_curve(labels: impl IntoIterator<Item = Label>, n_relevant: usize) -> Result<Vec<f64>, MetricError> {
    if n_relevant == 0 {
        return Err(MetricError::NoRelevant);
    }
    let mut found = 0usize;
    Ok(labels
        .into_iter()
        .map(|l| {
            found += usize::from(l.is_relevant());
            found as f64 / n_relevant as f64
        })
        .collect())
}

fn check_unit(name: &'static str, value: f64) -> Result<(), MetricError> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(MetricError::OutOfRange { name, value })
    }
}

/// Smallest `k` (1-based) with `recall(k) >= level`.
pub fn records_to_reach(curve: &[f64], level: f64) -> Result<usize, MetricError> {
    check_unit("level", level)?;
    curve
        .iter()
        .position(|&r| r >= level - LEVEL_EPSILON)
        .map(|i| i + 1)
        .ok_or(MetricError::LevelNeverReached { level })
}

/// Work saved over sampling: `level - n*/N`, with `N` the curve length.
/// Negative when screening did worse than random order.
pub fn wss(curve: &[f64], level: f64) -> Result<f64, MetricError> {
    let n_star = records_to_reach(curve, level)?;
    Ok(level - n_star as f64 / curve.len() as f64)
}

/// Number of records screened at `fraction` of the curve, rounded up.
pub fn screened_at(n_total: usize, fraction: f64) -> usize {
    ((fraction * n_total as f64) - LEVEL_EPSILON).ceil().max(1.0) as usize
}

/// Relevant references found after screening `fraction` of the records.
pub fn rrf(curve: &[f64], fraction: f64) -> Result<f64, MetricError> {
    check_unit("fraction", fraction)?;
    let k = screened_at(curve.len(), fraction).min(curve.len());
    Ok(curve[k - 1])
}

/// The headline metrics of one run. `None` where the level was never reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub wss_85: Option<f64>,
    pub wss_95: Option<f64>,
    pub wss_100: Option<f64>,
    pub rrf_5: f64,
    pub rrf_10: f64,
}

impl RunMetrics {
    pub fn from_curve(curve: &[f64]) -> Self {
        RunMetrics {
            wss_85: wss(curve, 0.85).ok(),
            wss_95: wss(curve, 0.95).ok(),
            wss_100: wss(curve, 1.0).ok(),
            rrf_5: rrf(curve, 0.05).unwrap_or(0.0),
            rrf_10: rrf(curve, 0.10).unwrap_or(0.0),
        }
    }

    /// `(name, value)` pairs in display order.
    pub fn columns(&self) -> [(&'static str, Option<f64>); 5] {
        [
            ("WSS@85", self.wss_85),
            ("WSS@95", self.wss_95),
            ("WSS@100", self.wss_100),
            ("RRF@5", Some(self.rrf_5)),
            ("RRF@10", Some(self.rrf_10)),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Runs that contributed a value.
    pub n: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let values: Vec<f64> = values.into_iter().collect();
        if values.is_empty() {
            return None;
        }
        Some(Summary {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            n: values.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(bits: &[u8]) -> Vec<Label> {
        bits.iter().map(|&b| Label::try_from(b).unwrap()).collect()
    }

    /// Perfect ranking of R relevant among N.
    fn perfect(n: usize, r: usize) -> Vec<f64> {
        let bits: Vec<u8> = (0..n).map(|i| u8::from(i < r)).collect();
        recall_curve(labels(&bits), r).unwrap()
    }

    #[test]
    fn curve_by_hand() {
        assert_eq!(recall_curve(labels(&[1, 0, 1]), 2).unwrap(), vec![0.5, 0.5, 1.0]);
        assert_eq!(recall_curve(labels(&[0]), 0).unwrap_err(), MetricError::NoRelevant);
    }

    #[test]
    fn perfect_ranking() {
        let curve = perfect(100, 10);
        assert_eq!(records_to_reach(&curve, 0.95).unwrap(), 10);
        assert!((wss(&curve, 0.95).unwrap() - 0.85).abs() < 1e-15);
        assert_eq!(wss(&curve, 1.0).unwrap(), 1.0 - 10.0 / 100.0);
        assert_eq!(rrf(&curve, 0.10).unwrap(), 1.0);
    }

    #[test]
    fn worst_case_is_negative() {
        let bits: Vec<u8> = (0..20).map(|i| u8::from(i >= 16)).collect();
        let curve = recall_curve(labels(&bits), 4).unwrap();
        assert_eq!(records_to_reach(&curve, 0.95).unwrap(), 20);
        assert!((wss(&curve, 0.95).unwrap() + 0.05).abs() < 1e-15);
    }

    #[test]
    fn ceiling_rule() {
        assert_eq!(screened_at(10, 0.10), 1);
        assert_eq!(screened_at(30, 0.10), 3);
        assert_eq!(screened_at(31, 0.10), 4);
        assert_eq!(screened_at(100, 0.05), 5);
        let curve = recall_curve(labels(&[1, 0, 0, 0, 0, 0, 0, 0, 0, 1]), 2).unwrap();
        assert_eq!(rrf(&curve, 0.10).unwrap(), 0.5);
    }

    #[test]
    fn truncated_curve() {
        let curve = recall_curve(labels(&[0, 1, 0]), 3).unwrap();
        assert_eq!(wss(&curve, 0.95).unwrap_err(), MetricError::LevelNeverReached { level: 0.95 });
        assert!(matches!(wss(&curve, 0.0), Err(MetricError::OutOfRange { .. })));
    }

    proptest! {
        #[test]
        fn metric_monotonicity(bits in prop::collection::vec(0u8..2, 1..60)) {
            let r = bits.iter().filter(|&&b| b == 1).count();
            prop_assume!(r > 0);
            let curve = recall_curve(labels(&bits), r).unwrap();
            prop_assert!(curve.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(*curve.last().unwrap(), 1.0);
            let last_relevant = bits.iter().rposition(|&b| b == 1).unwrap() + 1;
            prop_assert_eq!(records_to_reach(&curve, 1.0).unwrap(), last_relevant);
            let levels = [0.1, 0.5, 0.85, 0.95, 1.0];
            let n_star: Vec<usize> = levels.iter().map(|&l| records_to_reach(&curve, l).unwrap()).collect();
            prop_assert!(n_star.windows(2).all(|w| w[0] <= w[1]));
            let fractions = [0.01, 0.05, 0.1, 0.5, 1.0];
            let found: Vec<f64> = fractions.iter().map(|&f| rrf(&curve, f).unwrap()).collect();
            prop_assert!(found.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
