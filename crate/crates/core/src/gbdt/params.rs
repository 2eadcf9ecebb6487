use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    /// Split every frontier node level by level.
    #[default]
    DepthWise,
    /// Always split the frontier leaf with the largest gain.
    LeafWise,
}

/// Hyperparameters of one boosting run. Unset fields take the defaults
/// below when deserialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_estimators: usize,
    pub subsample: f64,
    pub colsample_bytree: f64,
    /// Minimum split gain.
    pub gamma: f64,
    /// L1 penalty on leaf gradient sums.
    pub reg_alpha: f64,
    /// L2 penalty on leaf weights.
    pub reg_lambda: f64,
    /// Patience on the validation metric; 0 disables early stopping.
    pub early_stopping_rounds: usize,
    pub num_leaves: usize,
    pub min_child_samples: usize,
    pub growth: Growth,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_depth: 6,
            n_estimators: 500,
            subsample: 1.0,
            colsample_bytree: 1.0,
            gamma: 0.0,
            reg_alpha: 0.0,
            reg_lambda: 1.0,
            early_stopping_rounds: 20,
            num_leaves: 31,
            min_child_samples: 5,
            growth: Growth::DepthWise,
            seed: 0,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(format!("invalid training parameter: {what}")))
            }
        };
        check(
            self.learning_rate > 0.0 && self.learning_rate <= 1.0,
            "learning_rate must lie in (0, 1]",
        )?;
        check(self.max_depth >= 1, "max_depth must be at least 1")?;
        check(self.n_estimators >= 1, "n_estimators must be at least 1")?;
        check(
            self.subsample > 0.0 && self.subsample <= 1.0,
            "subsample must lie in (0, 1]",
        )?;
        check(
            self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0,
            "colsample_bytree must lie in (0, 1]",
        )?;
        check(self.gamma >= 0.0, "gamma must be non-negative")?;
        check(self.reg_alpha >= 0.0, "reg_alpha must be non-negative")?;
        check(self.reg_lambda >= 0.0, "reg_lambda must be non-negative")?;
        check(self.num_leaves >= 2, "num_leaves must be at least 2")?;
        check(
            self.min_child_samples >= 1,
            "min_child_samples must be at least 1",
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        TrainParams::default().validate().unwrap();
    }

    #[test]
    fn partial_json_fills_defaults() {
        let p: TrainParams =
            serde_json::from_str(r#"{"max_depth": 7, "growth": "leaf_wise"}"#).unwrap();
        assert_eq!(p.max_depth, 7);
        assert_eq!(p.growth, Growth::LeafWise);
        assert_eq!(p.learning_rate, 0.1);
        assert!(serde_json::from_str::<TrainParams>(r#"{"bagging_temperature": 1}"#).is_err());
    }

    #[test]
    fn rejects_out_of_range() {
        let p = TrainParams {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = TrainParams {
            num_leaves: 1,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
