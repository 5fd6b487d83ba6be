use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::StrategyError;
use crate::rng::ProjectRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    /// Certainty-based: highest relevance score first.
    #[default]
    Max,
    Uncertainty,
    Random,
    /// Random with probability `mixed_random_fraction`, otherwise max.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuerySpec {
    pub kind: QueryKind,
    pub mixed_random_fraction: f64,
}

impl Default for QuerySpec {
    fn default() -> Self {
        QuerySpec {
            kind: QueryKind::Max,
            mixed_random_fraction: 0.05,
        }
    }
}

impl QuerySpec {
    pub fn validate(&self) -> Result<(), StrategyError> {
        if !(0.0..=1.0).contains(&self.mixed_random_fraction) {
            return Err(StrategyError::InvalidSpec(format!(
                "mixed_random_fraction must lie in [0, 1], got {}",
                self.mixed_random_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub row_id: usize,
    /// The record was drawn at random rather than picked from the scores.
    pub random: bool,
}

/// First index minimizing `key` among unlabeled rows (ties go to the lower id).
fn best_by(scores: &[f64], labeled: &[bool], key: impl Fn(f64) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (id, &score) in scores.iter().enumerate() {
        if labeled[id] {
            continue;
        }
        let k = key(score);
        if best.is_none_or(|(_, b)| k < b) {
            best = Some((id, k));
        }
    }
    best.map(|(id, _)| id)
}

/// Picks the next record to present. Only `random` and `mixed` draw from `rng`;
/// a mixed fraction of exactly 0 or 1 behaves as `max` or `random` without the
/// extra coin flip.
pub fn select_next(
    scores: &[f64],
    labeled: &[bool],
    spec: &QuerySpec,
    rng: &mut ProjectRng,
) -> Result<Selection, StrategyError> {
    if scores.len() != labeled.len() {
        return Err(StrategyError::LengthMismatch);
    }
    let pool = labeled.iter().filter(|&&l| !l).count();
    if pool == 0 {
        return Err(StrategyError::PoolExhausted);
    }
    let random_pick = |rng: &mut ProjectRng| {
        let k = rng.below(pool);
        let row_id = labeled
            .iter()
            .enumerate()
            .filter(|(_, &l)| !l)
            .nth(k)
            .map(|(i, _)| i)
            .expect("k < pool size");
        Selection { row_id, random: true }
    };
    let from_model = |row_id: Option<usize>| Selection {
        row_id: row_id.expect("pool is not empty"),
        random: false,
    };
    let max = || from_model(best_by(scores, labeled, |s| -s));
    Ok(match spec.kind {
        QueryKind::Max => max(),
        QueryKind::Uncertainty => from_model(best_by(scores, labeled, |s| (s - 0.5).abs())),
        QueryKind::Random => random_pick(rng),
        QueryKind::Mixed => {
            let p = spec.mixed_random_fraction;
            if p >= 1.0 || (p > 0.0 && rng.unit() < p) {
                random_pick(rng)
            } else {
                max()
            }
        }
    })
}

/// Unlabeled ids ordered by descending score, ties by ascending id.
pub fn rank_pool(scores: &[f64], labeled: &[bool]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..scores.len()).filter(|&i| !labeled[i]).collect();
    ids.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
        Ordering::Equal => a.cmp(&b),
        other => other,
    });
    ids
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(kind: QueryKind) -> QuerySpec {
        QuerySpec {
            kind,
            ..Default::default()
        }
    }

    fn pick(scores: &[f64], labeled: &[bool], kind: QueryKind) -> usize {
        select_next(scores, labeled, &spec(kind), &mut ProjectRng::new(0, 0))
            .unwrap()
            .row_id
    }

    #[test]
    fn max_and_uncertainty() {
        let scores = [0.9, 0.5, 0.1];
        assert_eq!(pick(&scores, &[false; 3], QueryKind::Max), 0);
        assert_eq!(pick(&scores, &[false; 3], QueryKind::Uncertainty), 1);
        assert_eq!(pick(&scores, &[true, false, false], QueryKind::Max), 1);
    }

    #[test]
    fn ties_go_to_lower_id() {
        assert_eq!(pick(&[0.7, 0.7], &[false, false], QueryKind::Max), 0);
        assert_eq!(pick(&[0.4, 0.6], &[false, false], QueryKind::Uncertainty), 0);
    }

    #[test]
    fn exhausted_pool() {
        let err = select_next(&[0.1], &[true], &spec(QueryKind::Max), &mut ProjectRng::new(0, 0)).unwrap_err();
        assert_eq!(err, StrategyError::PoolExhausted);
    }

    #[test]
    fn ranking() {
        assert_eq!(rank_pool(&[0.2, 0.8, 0.5], &[false; 3]), vec![1, 2, 0]);
        assert_eq!(rank_pool(&[0.3; 4], &[false; 4]), vec![0, 1, 2, 3]);
        assert_eq!(rank_pool(&[0.2, 0.8, 0.5], &[false, true, false]), vec![2, 0]);
        assert!(rank_pool(&[0.2], &[true]).is_empty());
    }

    fn inputs() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (1usize..30).prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..=1.0, n),
                prop::collection::vec(any::<bool>(), n),
            )
                .prop_filter("needs an unlabeled row", |(_, l)| l.iter().any(|&x| !x))
        })
    }

    proptest! {
        #[test]
        fn never_returns_a_labeled_row((scores, labeled) in inputs(), seed: u64, kind in 0usize..4) {
            let kind = [QueryKind::Max, QueryKind::Uncertainty, QueryKind::Random, QueryKind::Mixed][kind];
            let s = select_next(&scores, &labeled, &spec(kind), &mut ProjectRng::new(seed, 0)).unwrap();
            prop_assert!(!labeled[s.row_id]);
        }

        #[test]
        fn ranking_head_is_max_choice((scores, labeled) in inputs()) {
            let ranking = rank_pool(&scores, &labeled);
            prop_assert_eq!(ranking.len(), labeled.iter().filter(|&&l| !l).count());
            let mut sorted = ranking.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), ranking.len());
            prop_assert_eq!(ranking[0], pick(&scores, &labeled, QueryKind::Max));
        }

        #[test]
        fn max_is_invariant_under_increasing_transforms((scores, labeled) in inputs()) {
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            prop_assert_eq!(pick(&scores, &labeled, QueryKind::Max), pick(&transformed, &labeled, QueryKind::Max));
        }

        #[test]
        fn degenerate_mixtures((scores, labeled) in inputs(), seed: u64) {
            let mixed = |p: f64| {
                let s = QuerySpec { kind: QueryKind::Mixed, mixed_random_fraction: p };
                select_next(&scores, &labeled, &s, &mut ProjectRng::new(seed, 0)).unwrap()
            };
            let plain = |k: QueryKind| select_next(&scores, &labeled, &spec(k), &mut ProjectRng::new(seed, 0)).unwrap();
            prop_assert_eq!(mixed(0.0), plain(QueryKind::Max));
            prop_assert_eq!(mixed(1.0), plain(QueryKind::Random));
        }

        #[test]
        fn mixed_is_reproducible((scores, labeled) in inputs(), seed: u64) {
            let s = QuerySpec { kind: QueryKind::Mixed, mixed_random_fraction: 0.5 };
            let a = select_next(&scores, &labeled, &s, &mut ProjectRng::new(seed, 0)).unwrap();
            let b = select_next(&scores, &labeled, &s, &mut ProjectRng::new(seed, 0)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
