use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::classify::ClassifierSpec;
use crate::strategy::{BalanceSpec, QuerySpec};
use crate::textfeat::FeatureSpec;

/// When the engine stops proposing records. Priors never count towards
/// `consecutive_irrelevant`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "k", rename_all = "snake_case")]
pub enum StopSpec {
    #[default]
    None,
    MaxScreened(usize),
    ConsecutiveIrrelevant(usize),
}

/// Full model configuration of a project.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub feature: FeatureSpec,
    pub classifier: ClassifierSpec,
    pub query: QuerySpec,
    pub balance: BalanceSpec,
    pub seed: u64,
    pub stopping: StopSpec,
}

impl Settings {
    pub fn validate(&self) -> Result<(), EngineError> {
        let invalid = |e: String| EngineError::InvalidSettings(e);
        self.feature.validate().map_err(|e| invalid(e.to_string()))?;
        self.classifier.validate().map_err(|e| invalid(e.to_string()))?;
        self.query.validate().map_err(|e| invalid(e.to_string()))?;
        self.balance.validate().map_err(|e| invalid(e.to_string()))?;
        match self.stopping {
            StopSpec::MaxScreened(0) | StopSpec::ConsecutiveIrrelevant(0) => {
                return Err(invalid("stopping threshold must be at least 1".into()))
            }
            _ => {}
        }
        if self.classifier.kind.requires_nonnegative_features() && !self.feature.kind.is_nonnegative() {
            return Err(EngineError::InvalidCombination(format!(
                "{:?} cannot be trained on {:?} features, which may be negative",
                self.classifier.kind, self.feature.kind
            )));
        }
        Ok(())
    }
}
