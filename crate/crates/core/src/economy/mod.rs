//! Agents, the representative EU aggregate and Pareto-optimal allocations.

pub mod aggregate;
pub mod allocation;
pub mod cara;
pub mod config;
pub mod utility;

pub use aggregate::{build_aggregate, build_aggregate_generic, AggregateEU};
pub use allocation::{borch_check, borch_deviation, solve_allocation, AgentLaw, AllocationDistribution, Atom, ContinuousPart, Segment};
pub use cara::{cara_closed_form, no_side_payment_weights, CaraClosedForm};
pub use config::{EconomyConfig, LambdaSpec};
pub use utility::UtilityFunction;

use crate::distortion::WeightingFunction;
use crate::error::{Error, Result};

/// One RDU agent (index 0) and `n - 1 >= 1` EU agents sharing an aggregate
/// endowment `w`.
#[derive(Debug, Clone)]
pub struct Economy {
    pub rdu_weighting: WeightingFunction,
    pub rdu_utility: UtilityFunction,
    pub eu_agents: Vec<UtilityFunction>,
    pub weights: Vec<f64>,
    pub endowment: f64,
}

impl Economy {
    pub fn new(
        rdu_weighting: WeightingFunction,
        rdu_utility: UtilityFunction,
        eu_agents: Vec<UtilityFunction>,
        weights: Vec<f64>,
        endowment: f64,
    ) -> Result<Self> {
        let econ = Economy { rdu_weighting, rdu_utility, eu_agents, weights, endowment };
        econ.validate()?;
        Ok(econ)
    }

    /// All-CARA economy.
    pub fn cara(weighting: WeightingFunction, beta1: f64, eu_betas: &[f64], weights: &[f64], w: f64) -> Result<Self> {
        let eu = eu_betas.iter().map(|&b| UtilityFunction::cara(b)).collect::<Result<Vec<_>>>()?;
        Economy::new(weighting, UtilityFunction::cara(beta1)?, eu, weights.to_vec(), w)
    }

    pub fn validate(&self) -> Result<()> {
        self.rdu_weighting.validate()?;
        if self.eu_agents.is_empty() {
            return Err(Error::Config("the economy needs at least one EU agent".into()));
        }
        if self.weights.len() != self.eu_agents.len() {
            return Err(Error::Config(format!(
                "{} EU agents but {} welfare weights",
                self.eu_agents.len(),
                self.weights.len()
            )));
        }
        if let Some(l) = self.weights.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::Config(format!("welfare weights must be positive, got {l}")));
        }
        if !self.endowment.is_finite() {
            return Err(Error::Config("aggregate endowment must be finite".into()));
        }
        Ok(())
    }

    /// Number of agents, RDU included.
    pub fn n(&self) -> usize {
        self.eu_agents.len() + 1
    }

    pub fn aggregate(&self) -> Result<AggregateEU> {
        build_aggregate(&self.eu_agents, &self.weights)
    }

    pub fn utility(&self, agent: usize) -> &UtilityFunction {
        if agent == 0 {
            &self.rdu_utility
        } else {
            &self.eu_agents[agent - 1]
        }
    }

    pub fn is_cara(&self) -> bool {
        self.rdu_utility.beta().is_some() && self.eu_agents.iter().all(|a| a.beta().is_some())
    }

    pub fn with_weighting(&self, weighting: WeightingFunction) -> Economy {
        Economy { rdu_weighting: weighting, ..self.clone() }
    }

    pub fn with_endowment(&self, w: f64) -> Economy {
        Economy { endowment: w, ..self.clone() }
    }
}
