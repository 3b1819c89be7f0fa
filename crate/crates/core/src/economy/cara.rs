use crate::economy::Economy;
use crate::error::{Error, Result};

/// Explicit allocation for an all-CARA economy.
///
/// With `ℓ = ln δ'(U)`:
/// `X_1 = (ℓ - ln K + β̄ w) / (β_1 + β̄)` and
/// `X_j = -(β̄/β_j) X_1 + (β̄ w + ln λ_j - ln K) / β_j`,
/// where `ln K = Σ (β̄/β_j) ln λ_j`. Each payoff splits into a random part
/// proportional to `ℓ` and a deterministic side payment.
#[derive(Debug, Clone, PartialEq)]
pub struct CaraClosedForm {
    pub beta1: f64,
    pub beta_bar: f64,
    pub ln_k: f64,
    pub w: f64,
    pub eu_betas: Vec<f64>,
    pub ln_lambdas: Vec<f64>,
}

pub fn cara_closed_form(econ: &Economy) -> Result<CaraClosedForm> {
    let beta1 = econ.rdu_utility.beta().ok_or(Error::UnsupportedFastPath)?;
    let eu_betas: Vec<f64> =
        econ.eu_agents.iter().map(|a| a.beta()).collect::<Option<Vec<_>>>().ok_or(Error::UnsupportedFastPath)?;
    Ok(CaraClosedForm::new(beta1, &eu_betas, &econ.weights, econ.endowment))
}

impl CaraClosedForm {
    pub fn new(beta1: f64, eu_betas: &[f64], lambdas: &[f64], w: f64) -> Self {
        let beta_bar = 1.0 / eu_betas.iter().map(|b| 1.0 / b).sum::<f64>();
        let ln_lambdas: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
        let ln_k = eu_betas.iter().zip(&ln_lambdas).map(|(b, l)| beta_bar / b * l).sum();
        CaraClosedForm { beta1, beta_bar, ln_k, w, eu_betas: eu_betas.to_vec(), ln_lambdas }
    }

    pub fn x1(&self, ln_slope: f64) -> f64 {
        (ln_slope - self.ln_k + self.beta_bar * self.w) / (self.beta1 + self.beta_bar)
    }

    /// `(X~_i, X•_i)` for every agent, RDU agent first.
    pub fn decompose(&self, ln_slope: f64) -> Vec<(f64, f64)> {
        let random1 = ln_slope / (self.beta1 + self.beta_bar);
        let side = self.side_payments();
        let mut out = vec![(random1, side[0])];
        for (j, b) in self.eu_betas.iter().enumerate() {
            out.push((-(self.beta_bar / b) * random1, side[j + 1]));
        }
        out
    }

    /// Deterministic parts `X•_i`; they sum to `w`.
    pub fn side_payments(&self) -> Vec<f64> {
        let s1 = (self.beta_bar * self.w - self.ln_k) / (self.beta1 + self.beta_bar);
        let mut out = vec![s1];
        for (b, ll) in self.eu_betas.iter().zip(&self.ln_lambdas) {
            out.push(-(self.beta_bar / b) * s1 + (self.beta_bar * self.w + ll - self.ln_k) / b);
        }
        out
    }

    /// All payoffs at `ln δ' = ln_slope`.
    pub fn payoffs(&self, ln_slope: f64) -> Vec<f64> {
        self.decompose(ln_slope).into_iter().map(|(r, s)| r + s).collect()
    }
}

/// Welfare weights under which no agent receives a side payment at `w = 0`.
///
/// `betas` lists every agent's CARA coefficient, RDU agent first. The
/// side payments all vanish exactly when `ln λ_j = 0` for every EU agent;
/// the result is checked against the closed form before returning.
pub fn no_side_payment_weights(betas: &[f64]) -> Result<Vec<f64>> {
    if betas.len() < 2 {
        return Err(Error::Config("need the RDU agent and at least one EU agent".into()));
    }
    if let Some(b) = betas.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
        return Err(Error::Config(format!("CARA coefficient must be positive, got {b}")));
    }
    let lambdas = vec![1.0; betas.len() - 1];
    let form = CaraClosedForm::new(betas[0], &betas[1..], &lambdas, 0.0);
    let worst = form.side_payments().iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    if worst >= 1e-8 {
        return Err(Error::NumericDomain(format!("side payments remain at {worst}")));
    }
    Ok(lambdas)
}
