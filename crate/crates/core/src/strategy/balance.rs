use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::StrategyError;
use crate::corpus::Label;
use crate::rng::ProjectRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceKind {
    /// Train on every labeled record as-is.
    Simple,
    Undersample,
    #[default]
    DynamicResample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalanceSpec {
    pub kind: BalanceKind,
    /// Target relevant:irrelevant ratio for undersampling.
    pub undersample_ratio: f64,
    /// Lower bound on the relevant share targeted by dynamic resampling.
    pub dr_floor: f64,
}

impl Default for BalanceSpec {
    fn default() -> Self {
        BalanceSpec {
            kind: BalanceKind::DynamicResample,
            undersample_ratio: 1.0,
            dr_floor: 0.1,
        }
    }
}

impl BalanceSpec {
    pub fn validate(&self) -> Result<(), StrategyError> {
        if !(self.undersample_ratio.is_finite() && self.undersample_ratio > 0.0) {
            return Err(StrategyError::InvalidSpec(format!(
                "undersample_ratio must be positive, got {}",
                self.undersample_ratio
            )));
        }
        if !(self.dr_floor > 0.0 && self.dr_floor <= 0.5) {
            return Err(StrategyError::InvalidSpec(format!(
                "dr_floor must lie in (0, 0.5], got {}",
                self.dr_floor
            )));
        }
        Ok(())
    }
}

/// Relevant share targeted by dynamic resampling.
///
/// Interpolates between a balanced 0.5 (nothing labeled yet) and the
/// observed relevant share (everything labeled), weighted by the labeled
/// fraction `n / n_total`, then clamps to `[max(floor, n1 / n), 0.5]`. When the
/// observed share already exceeds 0.5 the lower bound wins.
pub fn dynamic_resample_share(n_relevant: usize, n_labeled: usize, n_total: usize, floor: f64) -> f64 {
    let n = n_labeled as f64;
    let labeled_fraction = (n / n_total as f64).min(1.0);
    let natural = n_relevant as f64 / n;
    let share = 0.5 * (1.0 - labeled_fraction) + natural * labeled_fraction;
    let lower = floor.max(natural);
    share.min(0.5).max(lower)
}

/// Resamples the labeled rows into a training multiset of row ids.
///
/// Output order: relevant ids (cycled in ascending order when duplicated),
/// followed by the kept irrelevant ids in ascending order.
pub fn balance(
    labeled_row_ids: &[usize],
    labels: &[Label],
    n_total: usize,
    spec: &BalanceSpec,
    rng: &mut ProjectRng,
) -> Result<Vec<usize>, StrategyError> {
    if labeled_row_ids.len() != labels.len() {
        return Err(StrategyError::LengthMismatch);
    }
    let mut relevant: Vec<usize> = Vec::new();
    let mut irrelevant: Vec<usize> = Vec::new();
    for (&id, label) in labeled_row_ids.iter().zip(labels) {
        if label.is_relevant() {
            relevant.push(id);
        } else {
            irrelevant.push(id);
        }
    }
    if relevant.is_empty() || irrelevant.is_empty() {
        return Err(StrategyError::MissingClass);
    }
    relevant.sort_unstable();
    irrelevant.sort_unstable();
    let (n1, n0) = (relevant.len(), irrelevant.len());

    let (m1, m0) = match spec.kind {
        BalanceKind::Simple => (n1, n0),
        BalanceKind::Undersample => {
            let wanted = (n1 as f64 / spec.undersample_ratio).round() as usize;
            (n1, wanted.clamp(1, n0))
        }
        BalanceKind::DynamicResample => {
            let n = n1 + n0;
            let share = dynamic_resample_share(n1, n, n_total.max(n), spec.dr_floor);
            let m1 = ((share * n as f64).round() as usize).clamp(n1, n - 1);
            let m0 = n - m1;
            debug_assert!(m0 <= n0);
            (m1, m0)
        }
    };

    let mut out: Vec<usize> = relevant.iter().cycle().take(m1).copied().collect();
    if m0 == n0 {
        out.extend_from_slice(&irrelevant);
    } else {
        let mut picked: Vec<usize> = index::sample(rng, n0, m0).into_iter().map(|i| irrelevant[i]).collect();
        picked.sort_unstable();
        out.extend(picked);
    }
    Ok(out)
}
