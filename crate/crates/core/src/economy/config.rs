use serde::{Deserialize, Serialize};

use crate::distortion::WeightingFunction;
use crate::economy::{no_side_payment_weights, Economy, UtilityFunction};
use crate::error::{Error, Result};

const AUTO_KEYWORD: &str = "auto_no_side_payment";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RduConfig {
    pub weighting: WeightingFunction,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EuConfig {
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Explicit(Vec<f64>),
    Keyword(String),
}

impl Default for LambdaSpec {
    fn default() -> Self {
        LambdaSpec::Keyword(AUTO_KEYWORD.into())
    }
}

/// Economy block as read from JSON, e.g.
/// `{"rdu":{"weighting":{"family":"prelec","alpha":0.8},"beta":0.5},
///   "eu":[{"beta":0.5},{"beta":2}],"lambda":"auto_no_side_payment","w":0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomyConfig {
    pub rdu: RduConfig,
    pub eu: Vec<EuConfig>,
    #[serde(default)]
    pub lambda: LambdaSpec,
    #[serde(default)]
    pub w: f64,
}

impl EconomyConfig {
    pub fn to_economy(&self) -> Result<Economy> {
        let betas: Vec<f64> = self.eu.iter().map(|e| e.beta).collect();
        let weights = match &self.lambda {
            LambdaSpec::Explicit(l) => l.clone(),
            LambdaSpec::Keyword(k) if k == AUTO_KEYWORD => {
                let mut all = vec![self.rdu.beta];
                all.extend(&betas);
                no_side_payment_weights(&all)?
            }
            LambdaSpec::Keyword(k) => {
                return Err(Error::Config(format!("unknown lambda keyword {k:?}, expected {AUTO_KEYWORD:?}")))
            }
        };
        let eu = betas.iter().map(|&b| UtilityFunction::cara(b)).collect::<Result<Vec<_>>>()?;
        Economy::new(self.rdu.weighting.clone(), UtilityFunction::cara(self.rdu.beta)?, eu, weights, self.w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_block() {
        let text = r#"{"rdu":{"weighting":{"family":"prelec","alpha":0.8},"beta":0.5},
                       "eu":[{"beta":0.5},{"beta":2}],"lambda":"auto_no_side_payment","w":0}"#;
        let cfg: EconomyConfig = serde_json::from_str(text).unwrap();
        let econ = cfg.to_economy().unwrap();
        assert_eq!(econ.n(), 3);
        assert_eq!(econ.weights, vec![1.0, 1.0]);
    }

    #[test]
    fn explicit_weights_and_errors() {
        let text = r#"{"rdu":{"weighting":{"family":"heu","gamma":0.5,"kappa":0.5},"beta":0.5},
                       "eu":[{"beta":2}],"lambda":[0.7]}"#;
        let cfg: EconomyConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.to_economy().unwrap().weights, vec![0.7]);

        let bad = r#"{"rdu":{"weighting":{"family":"prelec","alpha":-1},"beta":0.5},"eu":[{"beta":2}]}"#;
        let cfg: EconomyConfig = serde_json::from_str(bad).unwrap();
        assert!(cfg.to_economy().unwrap_err().is_config());

        let kw = r#"{"rdu":{"weighting":{"family":"linear"},"beta":0.5},"eu":[{"beta":2}],"lambda":"nope"}"#;
        let cfg: EconomyConfig = serde_json::from_str(kw).unwrap();
        assert!(cfg.to_economy().unwrap_err().is_config());
    }
}
