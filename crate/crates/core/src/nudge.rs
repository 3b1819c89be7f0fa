//! The planner's nudging problem: spending `M` of the endowment moves the
//! RDU agent's weighting toward the identity.

use rayon::prelude::*;
use serde::Serialize;

use crate::distortion::WeightingFunction;
use crate::economy::{solve_allocation, AllocationDistribution, Economy};
use crate::envelope::{build_envelope, EnvelopeResult};
use crate::error::{Error, Result};
use crate::numeric::level::{log_add_exp, Level};
use crate::numeric::optimize::maximize;
use crate::numeric::quadrature::{Measure, QuadConfig};

/// Coarse scan size of the effort search.
pub const SCAN_POINTS: usize = 41;

#[derive(Debug, Clone)]
pub struct NudgeConfig {
    /// Economy at zero effort; its endowment is `w`.
    pub economy: Economy,
    /// Curvature of `f(M) = 1 - (1 - M/w)^k`.
    pub k: f64,
    /// Tolerance on `M*`.
    pub tol: f64,
    pub quad: QuadConfig,
    base_envelope: EnvelopeResult,
}

impl NudgeConfig {
    pub fn new(economy: Economy, k: f64) -> Result<Self> {
        economy.validate()?;
        if !(k.is_finite() && k > 1.0) {
            return Err(Error::Config(format!("cost curvature k must exceed 1, got {k}")));
        }
        if !(economy.endowment > 0.0) {
            return Err(Error::Config(format!("nudging needs a positive endowment, got {}", economy.endowment)));
        }
        let base_envelope = build_envelope(&economy.rdu_weighting)?;
        Ok(NudgeConfig { economy, k, tol: 1e-6, quad: QuadConfig::with_abs_tol(1e-11), base_envelope })
    }

    pub fn w(&self) -> f64 {
        self.economy.endowment
    }

    pub fn base_envelope(&self) -> &EnvelopeResult {
        &self.base_envelope
    }

    fn check_effort(&self, m: f64) -> Result<()> {
        if !(0.0..=self.w()).contains(&m) {
            return Err(Error::Config(format!("effort {m} outside [0, {}]", self.w())));
        }
        Ok(())
    }

    /// `f(M)`.
    pub fn effort_share(&self, m: f64) -> f64 {
        1.0 - (1.0 - m / self.w()).max(0.0).powf(self.k)
    }

    /// `f'(M)`.
    pub fn effort_share_prime(&self, m: f64) -> f64 {
        self.k / self.w() * (1.0 - m / self.w()).max(0.0).powf(self.k - 1.0)
    }
}

/// `T_M = (1 - f) T + f id`.
pub fn nudged_weighting(t: &WeightingFunction, f: f64) -> Result<WeightingFunction> {
    WeightingFunction::mixture(t.clone(), f)
}

/// `δ_M = (1 - f) δ + f id`.
pub fn nudged_envelope(e: &EnvelopeResult, f: f64) -> Result<EnvelopeResult> {
    e.nudged(f)
}

/// Optimal allocation of `w - M` under the nudged weighting.
pub fn allocation_at_effort(cfg: &NudgeConfig, m: f64) -> Result<AllocationDistribution> {
    cfg.check_effort(m)?;
    let f = cfg.effort_share(m);
    let econ = cfg
        .economy
        .with_weighting(nudged_weighting(&cfg.economy.rdu_weighting, f)?)
        .with_endowment(cfg.w() - m);
    solve_allocation(&econ, &nudged_envelope(&cfg.base_envelope, f)?)
}

/// `ln δ'_M(t)` from the base envelope.
fn ln_nudged_slope(cfg: &NudgeConfig, f: f64, lv: Level) -> f64 {
    let d = cfg.base_envelope.ln_delta_prime(lv);
    if f == 0.0 {
        d
    } else if f == 1.0 {
        0.0
    } else {
        log_add_exp((1.0 - f).ln() + d, f.ln())
    }
}

/// `x_M(t) = (ln δ'_M(t) - ln K + β̄ (w - M)) / (β_1 + β̄)` for CARA agents.
pub fn fast_path_x(cfg: &NudgeConfig, m: f64, lv: Level) -> Result<f64> {
    cfg.check_effort(m)?;
    let econ = &cfg.economy;
    let b1 = econ.rdu_utility.beta().ok_or(Error::UnsupportedFastPath)?;
    let betas: Vec<f64> = econ.eu_agents.iter().map(|a| a.beta()).collect::<Option<_>>().ok_or(Error::UnsupportedFastPath)?;
    let beta_bar = 1.0 / betas.iter().map(|b| 1.0 / b).sum::<f64>();
    let ln_k: f64 = betas.iter().zip(&econ.weights).map(|(b, l)| beta_bar / b * l.ln()).sum();
    let ls = ln_nudged_slope(cfg, cfg.effort_share(m), lv);
    Ok((ls - ln_k + beta_bar * (cfg.w() - m)) / (b1 + beta_bar))
}

/// `x'_M(t)` given the allocation at `M` and `x = x_M(t)`.
///
/// Dividing the Λ form through by `δ'_M` gives
/// `x' = [f'(1 - δ')/δ'_M - A_λ(y)] / (A_λ(y) + A_1(x))` with `y = w - M - x`
/// and `A` the absolute risk aversions; this stays finite where `δ'` overflows.
fn sensitivity_at(cfg: &NudgeConfig, alloc: &AllocationDistribution, m: f64, lv: Level, x: f64) -> Result<f64> {
    let f = cfg.effort_share(m);
    let fp = cfg.effort_share_prime(m);
    let d = cfg.base_envelope.ln_delta_prime(lv);
    let ratio = if d > 0.0 {
        let e = (-d).exp();
        (e - 1.0) / ((1.0 - f) + f * e)
    } else {
        let dp = d.exp();
        (1.0 - dp) / ((1.0 - f) * dp + f)
    };
    let y = cfg.w() - m - x;
    let a_agg = alloc.aggregate().absolute_risk_aversion(y)?;
    let lambda = a_agg + alloc.economy().rdu_utility.absolute_risk_aversion(x);
    if !(lambda.abs() > 1e-14) {
        return Err(Error::SingularSensitivity { effort: m, level: lv.t() });
    }
    // f' vanishes at M = w, where the ratio may be infinite
    let pull = if fp == 0.0 { 0.0 } else { fp * ratio };
    Ok((pull - a_agg) / lambda)
}

/// `∂x_M(t)/∂M`.
pub fn sensitivity(cfg: &NudgeConfig, m: f64, lv: Level) -> Result<f64> {
    let alloc = allocation_at_effort(cfg, m)?;
    let x = alloc.x1(lv)?;
    sensitivity_at(cfg, &alloc, m, lv, x)
}

/// `V(M) = ∫ u_1(x_M) dT̃_M + ∫ u_λ(w - M - x_M) dt`.
pub fn value(cfg: &NudgeConfig, m: f64) -> Result<f64> {
    let alloc = allocation_at_effort(cfg, m)?;
    value_of(cfg, &alloc, m)
}

fn value_of(cfg: &NudgeConfig, alloc: &AllocationDistribution, m: f64) -> Result<f64> {
    let econ = alloc.economy();
    let u1 = &econ.rdu_utility;
    let agg = alloc.aggregate();
    let rdu = alloc.integrate_agent(0, Measure::Distorted(&econ.rdu_weighting), |x| u1.value(x), &cfg.quad)?;
    let eu = alloc.integrate_levels_x1(Measure::Lebesgue, |_, x| agg.value(cfg.w() - m - x), &cfg.quad)?;
    Ok(rdu.require(1e-9)?.value + eu.require(1e-9)?.value)
}

/// `dV/dM`:
/// `∫ u_1'(x) x' dT̃_M + f' ∫ u_1(x) (dt - dT̃) - ∫ u_λ'(y)(1 + x') dt`.
pub fn foc_residual(cfg: &NudgeConfig, m: f64) -> Result<f64> {
    let alloc = allocation_at_effort(cfg, m)?;
    foc_of(cfg, &alloc, m)
}

fn foc_of(cfg: &NudgeConfig, alloc: &AllocationDistribution, m: f64) -> Result<f64> {
    let u1 = &alloc.economy().rdu_utility;
    let agg = alloc.aggregate();
    let fp = cfg.effort_share_prime(m);
    let nudged = &alloc.economy().rdu_weighting;
    let a = alloc.integrate_levels_x1(
        Measure::Distorted(nudged),
        |lv, x| Ok(u1.marginal(x) * sensitivity_at(cfg, alloc, m, lv, x)?),
        &cfg.quad,
    )?;
    let b = alloc.integrate_levels_x1(
        Measure::Lebesgue,
        |lv, x| {
            let xp = sensitivity_at(cfg, alloc, m, lv, x)?;
            Ok(fp * u1.value(x) - agg.marginal(cfg.w() - m - x)? * (1.0 + xp))
        },
        &cfg.quad,
    )?;
    let c = alloc.integrate_levels_x1(
        Measure::Distorted(&cfg.economy.rdu_weighting),
        |_, x| Ok(u1.value(x)),
        &cfg.quad,
    )?;
    Ok(a.require(1e-9)?.value + b.require(1e-9)?.value - fp * c.require(1e-9)?.value)
}

#[derive(Debug, Clone, Serialize)]
pub struct NudgeSolution {
    pub m_star: f64,
    pub value: f64,
    /// `f(M*)`.
    pub effort_share: f64,
    /// Mass of the full-insurance event under `δ_{M*}`.
    pub fi_mass: f64,
    /// `dV/dM` at `M*` (one-sided at the boundary).
    pub foc_residual: f64,
    pub boundary: bool,
    pub value_curve: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub allocation: Option<AllocationDistribution>,
}

/// Maximizes `V` over `[0, w]`: a coarse scan, then Brent refinement around
/// the best scan point. The FOC is evaluated at the result as a check.
pub fn optimal_effort(cfg: &NudgeConfig) -> Result<NudgeSolution> {
    let w = cfg.w();
    let grid: Vec<f64> = (0..SCAN_POINTS).map(|i| w * i as f64 / (SCAN_POINTS - 1) as f64).collect();
    let values = grid.par_iter().map(|&m| value(cfg, m)).collect::<Result<Vec<f64>>>()?;
    let value_curve: Vec<(f64, f64)> = grid.iter().cloned().zip(values.iter().cloned()).collect();

    let mut warnings = Vec::new();
    let peaks = (0..SCAN_POINTS)
        .filter(|&i| {
            let left = i == 0 || values[i] > values[i - 1];
            let right = i == SCAN_POINTS - 1 || values[i] >= values[i + 1];
            left && right
        })
        .count();
    if peaks > 1 {
        warnings.push(format!("V has {peaks} local maxima on the coarse scan; returning the global one"));
    }

    let best = (0..SCAN_POINTS).fold(0, |b, i| if values[i] > values[b] { i } else { b });
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(SCAN_POINTS - 1)];
    let mut failure = None;
    let (m_ref, v_ref) = maximize(
        |m| match value(cfg, m) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                f64::NEG_INFINITY
            }
        },
        lo,
        hi,
        cfg.tol,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let (mut m_star, mut v_star) = (grid[best], values[best]);
    if v_ref > v_star {
        m_star = m_ref;
        v_star = v_ref;
    }
    let boundary = m_star == 0.0 || m_star == w;
    let alloc = allocation_at_effort(cfg, m_star)?;
    let foc_residual = foc_of(cfg, &alloc, m_star)?;
    if boundary && m_star == 0.0 && foc_residual > 1e-6 {
        warnings.push(format!("V increases at M = 0 (slope {foc_residual}) yet the boundary was chosen"));
    }
    Ok(NudgeSolution {
        m_star,
        value: v_star,
        effort_share: cfg.effort_share(m_star),
        fi_mass: alloc.envelope().fi_mass(),
        foc_residual,
        boundary,
        value_curve,
        warnings,
        allocation: Some(alloc),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NudgeRow {
    pub alpha: f64,
    pub m_star: f64,
    pub v_at_star: f64,
    pub fi_mass_at_star: f64,
}

/// `M*` along a grid of Prelec parameters.
pub fn alpha_sweep(template: &Economy, k: f64, alphas: &[f64]) -> Result<Vec<NudgeRow>> {
    alphas
        .par_iter()
        .map(|&alpha| {
            let cfg = NudgeConfig::new(template.with_weighting(WeightingFunction::prelec(alpha)?), k)?;
            let sol = optimal_effort(&cfg)?;
            Ok(NudgeRow { alpha, m_star: sol.m_star, v_at_star: sol.value, fi_mass_at_star: sol.fi_mass })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::economy::UtilityFunction;
    use approx::assert_abs_diff_eq;

    fn config(alpha: f64) -> NudgeConfig {
        let econ = Economy::cara(WeightingFunction::prelec(alpha).unwrap(), 0.5, &[0.5, 2.0], &[1.0, 1.0], 1.0).unwrap();
        NudgeConfig::new(econ, 20.0).unwrap()
    }

    #[test]
    fn effort_share_shape() {
        let cfg = config(0.4);
        assert_eq!(cfg.effort_share(0.0), 0.0);
        assert_eq!(cfg.effort_share(1.0), 1.0);
        let h = 1e-6;
        let fd = (cfg.effort_share(0.3 + h) - cfg.effort_share(0.3 - h)) / (2.0 * h);
        assert_abs_diff_eq!(fd, cfg.effort_share_prime(0.3), epsilon = 1e-6);
        assert!(NudgeConfig::new(cfg.economy.clone(), 1.0).is_err());
    }

    #[test]
    fn zero_effort_matches_plain_allocation() {
        let cfg = config(0.4);
        let a = allocation_at_effort(&cfg, 0.0).unwrap();
        let b = solve_allocation(&cfg.economy, cfg.base_envelope()).unwrap();
        for k in 1..50 {
            let lv = Level::new(k as f64 / 50.0);
            assert_eq!(a.payoffs(lv).unwrap(), b.payoffs(lv).unwrap());
        }
    }

    #[test]
    fn fast_path_matches_generic() {
        let cfg = config(0.4);
        let generic = Economy::new(
            cfg.economy.rdu_weighting.clone(),
            UtilityFunction::cara_as_generic(0.5).unwrap(),
            vec![UtilityFunction::cara_as_generic(0.5).unwrap(), UtilityFunction::cara_as_generic(2.0).unwrap()],
            vec![1.0, 1.0],
            1.0,
        )
        .unwrap();
        let gcfg = NudgeConfig::new(generic, 20.0).unwrap();
        let alloc = allocation_at_effort(&gcfg, 0.05).unwrap();
        for k in 1..=100 {
            let lv = Level::new((k as f64 - 0.5) / 100.0);
            let (a, b) = (fast_path_x(&cfg, 0.05, lv).unwrap(), alloc.x1(lv).unwrap());
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn sensitivity_in_linear_region() {
        // where δ' = 1 the CARA sensitivity is -β̄/(β_1 + β̄)
        let econ = Economy::cara(WeightingFunction::Linear, 0.5, &[0.4], &[1.0], 1.0).unwrap();
        let cfg = NudgeConfig::new(econ, 20.0).unwrap();
        let x = sensitivity(&cfg, 0.1, Level::new(0.3)).unwrap();
        assert_abs_diff_eq!(x, -0.4 / 0.9, epsilon = 1e-12);
    }

    #[test]
    fn foc_defined_at_full_effort() {
        let cfg = config(0.4);
        assert!(foc_residual(&cfg, 1.0).unwrap().is_finite());
    }

    #[test]
    fn foc_matches_value_difference() {
        let cfg = config(0.4);
        let h = 1e-5;
        for &m in &[0.02, 0.1] {
            let fd = (value(&cfg, m + h).unwrap() - value(&cfg, m - h).unwrap()) / (2.0 * h);
            let foc = foc_residual(&cfg, m).unwrap();
            assert!((fd - foc).abs() < 1e-5 * (1.0 + fd.abs()), "M = {m}: {fd} vs {foc}");
        }
    }
}
