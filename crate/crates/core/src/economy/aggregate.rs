use crate::economy::utility::UtilityFunction;
use crate::error::{Error, Result};
use crate::numeric::roots::solve_increasing;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Path {
    /// All agents CARA: `u'_λ(x) = K e^{-β̄ x}` with
    /// `ln K = Σ (β̄/β_i) ln λ_i`.
    Cara { beta_bar: f64, ln_k: f64 },
    /// `I_λ` summed agent by agent and inverted by bisection.
    Generic,
}

/// Representative expected-utility agent for a set of weighted EU agents.
///
/// `I_λ(z) = Σ I_i(z / λ_i)`, `J_λ = I_λ^{-1}`, and `u'_λ = J_λ`.
#[derive(Debug, Clone)]
pub struct AggregateEU {
    agents: Vec<UtilityFunction>,
    lambdas: Vec<f64>,
    path: Path,
}

pub fn build_aggregate(agents: &[UtilityFunction], lambdas: &[f64]) -> Result<AggregateEU> {
    AggregateEU::new(agents, lambdas, true)
}

/// Same aggregate, but always through the bisection path.
pub fn build_aggregate_generic(agents: &[UtilityFunction], lambdas: &[f64]) -> Result<AggregateEU> {
    AggregateEU::new(agents, lambdas, false)
}

impl AggregateEU {
    fn new(agents: &[UtilityFunction], lambdas: &[f64], fast: bool) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::Config("at least one EU agent is required".into()));
        }
        if agents.len() != lambdas.len() {
            return Err(Error::Config(format!(
                "{} EU agents but {} welfare weights",
                agents.len(),
                lambdas.len()
            )));
        }
        if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::Config(format!("welfare weights must be positive, got {l}")));
        }
        let betas: Option<Vec<f64>> = agents.iter().map(|a| a.beta()).collect();
        let path = match betas {
            Some(b) if fast => {
                let beta_bar = 1.0 / b.iter().map(|x| 1.0 / x).sum::<f64>();
                let ln_k = b.iter().zip(lambdas).map(|(bi, l)| beta_bar / bi * l.ln()).sum();
                Path::Cara { beta_bar, ln_k }
            }
            _ => Path::Generic,
        };
        Ok(AggregateEU { agents: agents.to_vec(), lambdas: lambdas.to_vec(), path })
    }

    pub fn agents(&self) -> &[UtilityFunction] {
        &self.agents
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Harmonic aggregate `(Σ 1/β_i)^{-1}` when every agent is CARA.
    pub fn beta_bar(&self) -> Option<f64> {
        match self.path {
            Path::Cara { beta_bar, .. } => Some(beta_bar),
            Path::Generic => {
                let b: Option<Vec<f64>> = self.agents.iter().map(|a| a.beta()).collect();
                b.map(|b| 1.0 / b.iter().map(|x| 1.0 / x).sum::<f64>())
            }
        }
    }

    /// `ln K` of the CARA form `u'_λ(x) = K e^{-β̄ x}`.
    pub fn ln_scale(&self) -> Option<f64> {
        match self.path {
            Path::Cara { ln_k, .. } => Some(ln_k),
            Path::Generic => None,
        }
    }

    pub fn is_cara_fast_path(&self) -> bool {
        matches!(self.path, Path::Cara { .. })
    }

    /// `I_λ(e^{ln_z})`.
    pub fn inv_marginal_ln(&self, ln_z: f64) -> Result<f64> {
        match self.path {
            Path::Cara { beta_bar, ln_k } => Ok((ln_k - ln_z) / beta_bar),
            Path::Generic => {
                let mut total = 0.0;
                for (a, l) in self.agents.iter().zip(&self.lambdas) {
                    total += a.inv_marginal_ln(ln_z - l.ln())?;
                }
                Ok(total)
            }
        }
    }

    /// `ln J_λ(y) = ln u'_λ(y)`.
    pub fn ln_marginal(&self, y: f64) -> Result<f64> {
        match self.path {
            Path::Cara { beta_bar, ln_k } => Ok(ln_k - beta_bar * y),
            Path::Generic => {
                // I_λ is decreasing in ln z, so -I_λ is increasing
                let mut failure = None;
                let root = solve_increasing(
                    |lz| match self.inv_marginal_ln(lz) {
                        Ok(v) => -v,
                        Err(e) => {
                            failure = Some(e);
                            f64::NAN
                        }
                    },
                    -y,
                    -1.0,
                    1.0,
                    1e-14,
                );
                if let Some(e) = failure {
                    return Err(e);
                }
                root
            }
        }
    }

    pub fn marginal(&self, y: f64) -> Result<f64> {
        Ok(self.ln_marginal(y)?.exp())
    }

    /// `J_λ'(y) = u''_λ(y)`.
    pub fn marginal2(&self, y: f64) -> Result<f64> {
        match self.path {
            Path::Cara { beta_bar, .. } => Ok(-beta_bar * self.marginal(y)?),
            Path::Generic => {
                let ln_j = self.ln_marginal(y)?;
                // I_λ'(z) = Σ I_i'(z/λ_i)/λ_i with I_i'(v) = 1/u_i''(I_i(v))
                let mut di = 0.0;
                for (a, l) in self.agents.iter().zip(&self.lambdas) {
                    let x = a.inv_marginal_ln(ln_j - l.ln())?;
                    di += 1.0 / (l * a.marginal2(x));
                }
                Ok(1.0 / di)
            }
        }
    }

    /// `-u''_λ / u'_λ`.
    pub fn absolute_risk_aversion(&self, y: f64) -> Result<f64> {
        match self.path {
            Path::Cara { beta_bar, .. } => Ok(beta_bar),
            Path::Generic => Ok(-self.marginal2(y)? / self.marginal(y)?),
        }
    }

    /// Individual shares `x_i = I_i(J_λ(y) / λ_i)`; they sum to `y`.
    pub fn shares(&self, y: f64) -> Result<Vec<f64>> {
        let ln_j = self.ln_marginal(y)?;
        self.agents
            .iter()
            .zip(&self.lambdas)
            .map(|(a, l)| a.inv_marginal_ln(ln_j - l.ln()))
            .collect()
    }

    /// `u_λ(y) = Σ λ_i u_i(x_i)`.
    pub fn value(&self, y: f64) -> Result<f64> {
        match self.path {
            Path::Cara { beta_bar, ln_k } => Ok(-(ln_k - beta_bar * y).exp() / beta_bar),
            Path::Generic => {
                let shares = self.shares(y)?;
                Ok(self.agents.iter().zip(&self.lambdas).zip(&shares).map(|((a, l), x)| l * a.value(*x)).sum())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn roster() -> Vec<UtilityFunction> {
        vec![UtilityFunction::cara(0.5).unwrap(), UtilityFunction::cara(2.0).unwrap()]
    }

    #[test]
    fn harmonic_beta_bar() {
        let agg = build_aggregate(&roster(), &[0.3, 1.7]).unwrap();
        assert_abs_diff_eq!(agg.beta_bar().unwrap(), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn single_agent_collapses() {
        let u = UtilityFunction::cara(0.8).unwrap();
        let agg = build_aggregate(&[u.clone()], &[1.7]).unwrap();
        for &y in &[-1.0, 0.0, 2.0] {
            assert_abs_diff_eq!(agg.marginal(y).unwrap(), 1.7 * u.marginal(y), epsilon = 1e-14);
            assert_abs_diff_eq!(agg.value(y).unwrap(), 1.7 * u.value(y), epsilon = 1e-14);
        }
    }

    #[test]
    fn shares_sum_to_argument() {
        let agg = build_aggregate(&roster(), &[0.6, 1.4]).unwrap();
        let s = agg.shares(0.75).unwrap();
        assert_abs_diff_eq!(s.iter().sum::<f64>(), 0.75, epsilon = 1e-14);
    }

    #[test]
    fn generic_and_cara_paths_agree() {
        let lambdas = [0.6, 1.4];
        let fast = build_aggregate(&roster(), &lambdas).unwrap();
        let slow = build_aggregate_generic(&roster(), &lambdas).unwrap();
        for k in 0..101 {
            let y = -3.0 + 6.0 * k as f64 / 100.0;
            let (a, b) = (fast.marginal(y).unwrap(), slow.marginal(y).unwrap());
            assert!((a - b).abs() < 1e-8, "y = {y}: {a} vs {b}");
            assert_abs_diff_eq!(fast.value(y).unwrap(), slow.value(y).unwrap(), epsilon = 1e-10);
            assert_abs_diff_eq!(fast.marginal2(y).unwrap(), slow.marginal2(y).unwrap(), epsilon = 1e-8);
        }
    }

    #[test]
    fn cara_aggregate_uses_weighted_geometric_mean() {
        let lambdas = [0.5, 0.5];
        let agg = build_aggregate_generic(&roster(), &lambdas).unwrap();
        // β̄ = 0.4, weights β̄/β = (0.8, 0.2): K = 0.5^0.8 * 0.5^0.2 = 0.5
        for &y in &[-1.0_f64, 0.5] {
            let expected: f64 = -(0.5 / 0.4) * (-0.4 * y).exp();
            assert_abs_diff_eq!(agg.value(y).unwrap(), expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_nonpositive_weight() {
        assert!(build_aggregate(&roster(), &[1.0, 0.0]).is_err());
        assert!(build_aggregate(&roster(), &[1.0]).is_err());
    }
}
