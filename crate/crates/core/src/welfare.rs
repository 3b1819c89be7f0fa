//! Certainty equivalents and Kaldor-Hicks accounting.

use rayon::prelude::*;
use serde::Serialize;

use crate::distortion::WeightingFunction;
use crate::economy::{solve_allocation, AllocationDistribution, Economy, UtilityFunction};
use crate::envelope::build_envelope;
use crate::error::{Error, Result};
use crate::numeric::quadrature::{Measure, QuadConfig, QuadResult};

/// Error bound a CE integral must meet.
pub const CE_ABS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WelfareReport {
    pub ce_per_agent: Vec<f64>,
    pub ce_sum: f64,
    /// Kaldor-Hicks transfers paid by each agent; they sum to zero.
    pub side_payments: Option<Vec<f64>>,
    pub diagnostics: Vec<QuadResult>,
}

impl WelfareReport {
    /// CE of each agent after the Kaldor-Hicks transfers, using cash
    /// additivity of the certainty equivalent.
    pub fn post_transfer_ce(&self) -> Option<Vec<f64>> {
        self.side_payments.as_ref().map(|s| self.ce_per_agent.iter().zip(s).map(|(c, t)| c - t).collect())
    }
}

/// Default quadrature settings for CE integrals.
pub fn quad_cfg() -> QuadConfig {
    QuadConfig::with_abs_tol(CE_ABS_TOL * 1e-2)
}

fn invert(u: &UtilityFunction, value: QuadResult) -> Result<(f64, QuadResult)> {
    let value = value.require(CE_ABS_TOL)?;
    Ok((u.inverse(value.value)?, value))
}

/// `u_1^{-1}(∫ u_1(X_1(t)) dT̃(t))`, the RDU agent's certainty equivalent.
pub fn ce_rdu(alloc: &AllocationDistribution) -> Result<(f64, QuadResult)> {
    ce_rdu_with(alloc, &quad_cfg())
}

pub fn ce_rdu_with(alloc: &AllocationDistribution, cfg: &QuadConfig) -> Result<(f64, QuadResult)> {
    let econ = alloc.economy();
    let u = &econ.rdu_utility;
    let q = alloc.integrate_agent(0, Measure::Distorted(&econ.rdu_weighting), |x| u.value(x), cfg)?;
    invert(u, q)
}

/// `u_i^{-1}(E[u_i(X_i)])` for EU agent `agent >= 1`.
pub fn ce_eu(alloc: &AllocationDistribution, agent: usize) -> Result<(f64, QuadResult)> {
    ce_eu_with(alloc, agent, &quad_cfg())
}

pub fn ce_eu_with(alloc: &AllocationDistribution, agent: usize, cfg: &QuadConfig) -> Result<(f64, QuadResult)> {
    if agent == 0 || agent >= alloc.n() {
        return Err(Error::Config(format!("agent {agent} is not an EU agent")));
    }
    let u = alloc.economy().utility(agent);
    let q = alloc.integrate_agent(agent, Measure::Lebesgue, |x| u.value(x), cfg)?;
    invert(u, q)
}

/// Certainty equivalent of a discrete law under expected utility.
pub fn ce_discrete(u: &UtilityFunction, outcomes: &[f64], probs: &[f64]) -> Result<f64> {
    if outcomes.len() != probs.len() || outcomes.is_empty() {
        return Err(Error::Config("outcomes and probabilities must have equal nonzero length".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 || probs.iter().any(|p| *p < 0.0) {
        return Err(Error::Config(format!("probabilities must be nonnegative and sum to 1, got {total}")));
    }
    u.inverse(outcomes.iter().zip(probs).map(|(x, p)| p * u.value(*x)).sum())
}

/// Transfers `CE_i - CE/n`; after paying them each agent holds `CE/n`.
pub fn kaldor_hicks(ce: &[f64]) -> Vec<f64> {
    let share = ce.iter().sum::<f64>() / ce.len() as f64;
    ce.iter().map(|c| c - share).collect()
}

pub fn welfare_report(alloc: &AllocationDistribution) -> Result<WelfareReport> {
    let (c1, d1) = ce_rdu(alloc)?;
    let mut ce = vec![c1];
    let mut diagnostics = vec![d1];
    for agent in 1..alloc.n() {
        let (c, d) = ce_eu(alloc, agent)?;
        ce.push(c);
        diagnostics.push(d);
    }
    let ce_sum = ce.iter().sum();
    Ok(WelfareReport { side_payments: Some(kaldor_hicks(&ce)), ce_per_agent: ce, ce_sum, diagnostics })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CeRow {
    pub alpha: f64,
    pub ce: Vec<f64>,
    pub ce_sum: f64,
}

/// Certainty equivalents along a grid of Prelec parameters, the rest of
/// the economy held fixed.
pub fn ce_sweep(template: &Economy, alphas: &[f64]) -> Result<Vec<CeRow>> {
    alphas
        .par_iter()
        .map(|&alpha| {
            let w = WeightingFunction::prelec(alpha)?;
            let econ = template.with_weighting(w.clone());
            let alloc = solve_allocation(&econ, &build_envelope(&w)?)?;
            let report = welfare_report(&alloc)?;
            Ok(CeRow { alpha, ce: report.ce_per_agent, ce_sum: report.ce_sum })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn baseline() -> Economy {
        Economy::cara(WeightingFunction::Linear, 0.5, &[0.5, 2.0], &[1.0, 1.0], 0.0).unwrap()
    }

    #[test]
    fn two_point_law() {
        let u = UtilityFunction::cara(1.0).unwrap();
        let ce = ce_discrete(&u, &[-1.0, 1.0], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(ce, -(1.0_f64.cosh()).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(ce_discrete(&u, &[0.3], &[1.0]).unwrap(), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn linear_weighting_has_zero_ce() {
        let rows = ce_sweep(&baseline(), &[1.0]).unwrap();
        for c in &rows[0].ce {
            assert!(c.abs() < 1e-9);
        }
    }

    #[test]
    fn cash_additivity() {
        let w = WeightingFunction::prelec(0.4).unwrap();
        let env = build_envelope(&w).unwrap();
        let base = baseline().with_weighting(w);
        // raising w by c shifts X_1 by c β̄/(β_1+β̄) and X_j by c β̄/β_j
        let a = welfare_report(&solve_allocation(&base, &env).unwrap()).unwrap();
        let b = welfare_report(&solve_allocation(&base.with_endowment(0.7), &env).unwrap()).unwrap();
        let shifts = [0.7 * 0.4 / 0.9, 0.7 * 0.5 / 0.9 * 0.8, 0.7 * 0.5 / 0.9 * 0.2];
        for i in 0..3 {
            assert_abs_diff_eq!(b.ce_per_agent[i] - a.ce_per_agent[i], shifts[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn kaldor_hicks_equalizes() {
        let report = WelfareReport {
            ce_per_agent: vec![0.3, -0.1, 0.1],
            ce_sum: 0.3,
            side_payments: Some(kaldor_hicks(&[0.3, -0.1, 0.1])),
            diagnostics: Vec::new(),
        };
        let s: f64 = report.side_payments.as_ref().unwrap().iter().sum();
        assert!(s.abs() < 1e-15);
        for c in report.post_transfer_ce().unwrap() {
            assert_abs_diff_eq!(c, 0.1, epsilon = 1e-15);
        }
    }
}
