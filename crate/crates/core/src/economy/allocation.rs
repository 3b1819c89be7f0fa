use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::economy::aggregate::AggregateEU;
use crate::economy::utility::UtilityFunction;
use crate::economy::Economy;
use crate::envelope::{EnvelopeResult, PieceKind};
use crate::error::{Error, Result};
use crate::numeric::level::Level;
use crate::numeric::quadrature::{integrate_levels, Measure, QuadConfig, QuadResult};
use crate::numeric::roots::{bisect, solve_increasing};

/// Tolerance of the `m_λ` inversion.
const KERNEL_TOL: f64 = 1e-12;
/// Deepest `ln(1 - t)` searched when inverting on a contact piece.
const LN_Q_FLOOR: f64 = -1e6;

/// Piece of the uniform variate's range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    /// `δ'` is constant, so every payoff is deterministic here.
    Atom { lo: Level, hi: Level, ln_slope: f64 },
    /// `δ = T̃`; payoffs vary continuously with the level.
    Continuous { lo: Level, hi: Level },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousPart {
    /// Closure of the values taken on the piece, `lo <= hi`.
    pub support: (f64, f64),
    pub mass: f64,
}

/// Marginal law of one agent's payoff.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentLaw {
    pub atoms: Vec<Atom>,
    pub continuous: Vec<ContinuousPart>,
    /// Whether the payoff is nondecreasing in the uniform variate.
    pub increasing: bool,
}

impl AgentLaw {
    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    pub fn continuous_mass(&self) -> f64 {
        self.continuous.iter().map(|c| c.mass).sum()
    }
}

#[derive(Debug, Clone, Copy)]
enum Kernel {
    /// `X_1 = (ln δ' + offset) * scale`.
    Cara { scale: f64, offset: f64 },
    Generic,
}

/// Optimal allocation as deterministic maps of one uniform variate `U`:
/// `X_1 = m_λ^{-1}(δ'(U))`, `X_j = I_j(J_λ(w - X_1) / λ_j)`.
#[derive(Debug, Clone)]
pub struct AllocationDistribution {
    economy: Economy,
    aggregate: AggregateEU,
    envelope: EnvelopeResult,
    kernel: Kernel,
    segments: Vec<Segment>,
}

pub fn solve_allocation(econ: &Economy, envelope: &EnvelopeResult) -> Result<AllocationDistribution> {
    econ.validate()?;
    for k in 1..20 {
        let t = k as f64 / 20.0;
        let gap = (envelope.ttilde(t) - econ.rdu_weighting.conj_eval(t)).abs();
        if gap > 1e-9 {
            return Err(Error::Config(format!(
                "envelope was built for a different weighting (T̃ differs by {gap} at t = {t})"
            )));
        }
    }
    let aggregate = econ.aggregate()?;
    let kernel = match (econ.rdu_utility.beta(), aggregate.beta_bar(), aggregate.ln_scale()) {
        (Some(b1), Some(bb), Some(ln_k)) => Kernel::Cara { scale: 1.0 / (b1 + bb), offset: bb * econ.endowment - ln_k },
        _ => Kernel::Generic,
    };
    let segments = envelope
        .pieces()
        .into_iter()
        .filter(|p| p.lo.lt(&p.hi))
        .map(|p| match p.kind {
            PieceKind::Affine { slope } => Segment::Atom { lo: p.lo, hi: p.hi, ln_slope: slope.ln() },
            PieceKind::Contact => Segment::Continuous { lo: p.lo, hi: p.hi },
        })
        .collect();
    Ok(AllocationDistribution { economy: econ.clone(), aggregate, envelope: envelope.clone(), kernel, segments })
}

impl AllocationDistribution {
    pub fn economy(&self) -> &Economy {
        &self.economy
    }

    pub fn envelope(&self) -> &EnvelopeResult {
        &self.envelope
    }

    pub fn aggregate(&self) -> &AggregateEU {
        &self.aggregate
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn n(&self) -> usize {
        self.economy.n()
    }

    fn w(&self) -> f64 {
        self.economy.endowment
    }

    /// `ln m_λ(x) = ln u'_λ(w - x) - ln u'_1(x)`, increasing in `x`.
    pub fn ln_m(&self, x: f64) -> Result<f64> {
        Ok(self.aggregate.ln_marginal(self.w() - x)? - self.economy.rdu_utility.ln_marginal(x))
    }

    /// `(ln m_λ)'(x)`.
    pub fn ln_m_slope(&self, x: f64) -> Result<f64> {
        Ok(self.aggregate.absolute_risk_aversion(self.w() - x)?
            + self.economy.rdu_utility.absolute_risk_aversion(x))
    }

    /// `m_λ^{-1}(e^{ln_slope})`.
    pub fn x1_from_ln_slope(&self, ln_slope: f64) -> Result<f64> {
        if ln_slope.is_infinite() {
            return Ok(ln_slope);
        }
        if ln_slope.is_nan() {
            return Err(Error::NumericDomain("envelope slope is NaN".into()));
        }
        match self.kernel {
            Kernel::Cara { scale, offset } => Ok((ln_slope + offset) * scale),
            Kernel::Generic => {
                let mut failure = None;
                let x = solve_increasing(
                    |x| match self.ln_m(x) {
                        Ok(v) => v,
                        Err(e) => {
                            failure = Some(e);
                            f64::NAN
                        }
                    },
                    ln_slope,
                    -1.0,
                    1.0,
                    KERNEL_TOL,
                );
                if let Some(e) = failure {
                    return Err(e);
                }
                x.map_err(|e| Error::NumericDomain(format!("cannot invert m_λ at ln δ' = {ln_slope}: {e}")))
            }
        }
    }

    pub fn x1(&self, lv: Level) -> Result<f64> {
        self.x1_from_ln_slope(self.envelope.ln_delta_prime(lv))
    }

    /// EU payoffs given the RDU payoff.
    pub fn eu_payoffs(&self, x1: f64) -> Result<Vec<f64>> {
        if x1.is_infinite() {
            return Ok(vec![-x1; self.n() - 1]);
        }
        self.aggregate.shares(self.w() - x1)
    }

    fn payoffs_from_x1(&self, x1: f64) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.n());
        out.push(x1);
        out.extend(self.eu_payoffs(x1)?);
        Ok(out)
    }

    /// Every agent's payoff at level `U = t`, RDU agent first.
    pub fn payoffs(&self, lv: Level) -> Result<Vec<f64>> {
        self.payoffs_from_x1(self.x1(lv)?)
    }

    /// Payoffs on the midpoint grid `t_k = (k - 1/2)/m`, as an `n × m` matrix.
    pub fn payoff_matrix(&self, m: usize) -> Result<Vec<Vec<f64>>> {
        let cols = (1..=m)
            .into_par_iter()
            .map(|k| self.payoffs(Level::new((k as f64 - 0.5) / m as f64)))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..self.n()).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
    }

    /// Largest `|Σ_i X_i - w|` on the midpoint grid.
    pub fn feasibility_error(&self, m: usize) -> Result<f64> {
        let mat = self.payoff_matrix(m)?;
        Ok((0..m)
            .map(|k| (mat.iter().map(|row| row[k]).sum::<f64>() - self.w()).abs())
            .fold(0.0, f64::max))
    }

    /// Quantile of agent `i` at level `p`.
    pub fn quantile(&self, agent: usize, p: Level) -> Result<f64> {
        let lv = if agent == 0 { p } else { p.flip() };
        Ok(self.payoffs(lv)?[agent])
    }

    /// Payoffs for `draws` independent uniform variates from a seeded stream.
    pub fn monte_carlo(&self, draws: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let us: Vec<f64> = (0..draws).map(|_| rng.gen::<f64>()).collect();
        us.par_iter().map(|&u| self.payoffs(Level::new(u))).collect()
    }

    /// `X_1` at the right end of `lo` and the left end of `hi` on a contact piece.
    fn contact_range(&self, lo: Level, hi: Level) -> Result<(f64, f64)> {
        let w = self.envelope.weighting();
        Ok((self.x1_from_ln_slope(w.ln_deriv_ln(lo.ln_q()))?, self.x1_from_ln_slope(w.ln_deriv_ln(hi.ln_q()))?))
    }

    pub fn laws(&self) -> Result<Vec<AgentLaw>> {
        let n = self.n();
        let mut laws: Vec<AgentLaw> =
            (0..n).map(|i| AgentLaw { atoms: Vec::new(), continuous: Vec::new(), increasing: i == 0 }).collect();
        for seg in &self.segments {
            match *seg {
                Segment::Atom { lo, hi, ln_slope } => {
                    let mass = Measure::Lebesgue.mass(lo, hi);
                    let pay = self.payoffs_from_x1(self.x1_from_ln_slope(ln_slope)?)?;
                    for (law, x) in laws.iter_mut().zip(pay) {
                        law.atoms.push(Atom { location: x, mass });
                    }
                }
                Segment::Continuous { lo, hi } => {
                    let mass = Measure::Lebesgue.mass(lo, hi);
                    let (a, b) = self.contact_range(lo, hi)?;
                    let (pa, pb) = (self.payoffs_from_x1(a)?, self.payoffs_from_x1(b)?);
                    for (i, law) in laws.iter_mut().enumerate() {
                        let support = (pa[i].min(pb[i]), pa[i].max(pb[i]));
                        law.continuous.push(ContinuousPart { support, mass });
                    }
                }
            }
        }
        Ok(laws)
    }

    /// Level on a contact piece at which `X_1 = x1`.
    fn contact_level(&self, lo: Level, hi: Level, x1: f64) -> Result<Level> {
        let target = self.ln_m(x1)?;
        let w = self.envelope.weighting();
        let z_hi = lo.ln_q();
        let z_lo = hi.ln_q().max(LN_Q_FLOOR);
        // ln T'(e^z) falls as z rises on a contact piece
        let z = bisect(|z| w.ln_deriv_ln(z) - target, z_lo, z_hi, 1e-15 * (1.0 + z_lo.abs()))?;
        Ok(Level::from_ln_q(z))
    }

    /// `d ln T'(q) / d ln q` at `z = ln q`.
    fn elasticity(&self, z: f64) -> f64 {
        let w = self.envelope.weighting();
        let q = z.exp();
        if q > 1e-150 && q < 1.0 {
            if let (Ok(d1), Ok(d2)) = (w.deriv(q), w.deriv2(q)) {
                let e = q * d2 / d1;
                if e.is_finite() {
                    return e;
                }
            }
        }
        let h = 1e-5 * (1.0 + z.abs());
        (w.ln_deriv_ln(z + h) - w.ln_deriv_ln(z - h)) / (2.0 * h)
    }

    fn rdu_density(&self, x: f64) -> Result<f64> {
        let mut total = 0.0;
        for seg in &self.segments {
            if let Segment::Continuous { lo, hi } = *seg {
                let (a, b) = self.contact_range(lo, hi)?;
                if !(a < x && x < b) {
                    continue;
                }
                let lv = self.contact_level(lo, hi, x)?;
                let e = self.elasticity(lv.ln_q());
                if !(e < 0.0) {
                    return Err(Error::NumericDomain(format!(
                        "T'' vanishes inside the support at x = {x} (level {})",
                        lv.t()
                    )));
                }
                total += self.ln_m_slope(x)? * lv.q() / -e;
            }
        }
        Ok(total)
    }

    /// `x_1` with `X_j = x` for EU agent `agent >= 1`.
    fn x1_for_eu_value(&self, agent: usize, x: f64) -> Result<f64> {
        let u = &self.economy.eu_agents[agent - 1];
        let lam = self.economy.weights[agent - 1];
        Ok(self.w() - self.aggregate.inv_marginal_ln(lam.ln() + u.ln_marginal(x))?)
    }

    /// Density of the continuous part of agent `agent`'s payoff at `x`.
    pub fn density(&self, agent: usize, x: f64) -> Result<f64> {
        if agent == 0 {
            return self.rdu_density(x);
        }
        let x1 = self.x1_for_eu_value(agent, x)?;
        let f1 = self.rdu_density(x1)?;
        if f1 == 0.0 {
            return Ok(0.0);
        }
        let u = &self.economy.eu_agents[agent - 1];
        let lam = self.economy.weights[agent - 1];
        let y = self.w() - x1;
        let slope = self.aggregate.marginal2(y)? / (lam * u.marginal2(x));
        Ok(f1 / slope)
    }

    /// Defective CDF of the continuous part: `P(X_i <= x, U in a contact piece)`.
    pub fn continuous_cdf(&self, agent: usize, x: f64) -> Result<f64> {
        let x1 = if agent == 0 { x } else { self.x1_for_eu_value(agent, x)? };
        let mut total = 0.0;
        for seg in &self.segments {
            if let Segment::Continuous { lo, hi } = *seg {
                let (a, b) = self.contact_range(lo, hi)?;
                let mass = Measure::Lebesgue.mass(lo, hi);
                let below = if x1 <= a {
                    0.0
                } else if x1 >= b {
                    mass
                } else {
                    Measure::Lebesgue.mass(lo, self.contact_level(lo, hi, x1)?)
                };
                total += if agent == 0 { below } else { mass - below };
            }
        }
        Ok(total)
    }

    /// `∫ g(t, X_1(t)) dμ(t)`; atoms exactly, contact pieces by quadrature.
    ///
    /// On an atom `g` is evaluated at the piece's right end, where the
    /// left-continuous `δ'` equals the piece's slope.
    pub fn integrate_levels_x1<G>(&self, measure: Measure<'_>, g: G, cfg: &QuadConfig) -> Result<QuadResult>
    where
        G: Fn(Level, f64) -> Result<f64>,
    {
        let mut total = QuadResult::empty();
        for seg in &self.segments {
            match *seg {
                Segment::Atom { lo, hi, ln_slope } => {
                    let v = g(hi, self.x1_from_ln_slope(ln_slope)?)?;
                    total.value += v * measure.mass(lo, hi);
                }
                Segment::Continuous { lo, hi } => {
                    let w = self.envelope.weighting();
                    let part = integrate_levels(
                        lo,
                        hi,
                        measure,
                        |lv| {
                            let v = g(lv, self.x1_from_ln_slope(w.ln_deriv_ln(lv.ln_q()))?)?;
                            if v.is_nan() {
                                return Err(Error::NumericDomain(format!("integrand is NaN at level {}", lv.t())));
                            }
                            Ok(v)
                        },
                        cfg,
                    )?;
                    total.absorb(part);
                }
            }
        }
        Ok(total)
    }

    /// `∫ g(X_i(t)) dμ(t)`.
    pub fn integrate_agent<G>(&self, agent: usize, measure: Measure<'_>, g: G, cfg: &QuadConfig) -> Result<QuadResult>
    where
        G: Fn(f64) -> f64,
    {
        self.integrate_levels_x1(
            measure,
            |_, x1| Ok(g(if agent == 0 { x1 } else { self.eu_payoffs(x1)?[agent - 1] })),
            cfg,
        )
    }
}

/// Largest relative gap `|λ_i u'_i(x_i) - λ_j u'_j(x_j)| / max` over states
/// and EU pairs. Rows of `eu_payoffs` are agents, columns states.
pub fn borch_deviation(eu_payoffs: &[Vec<f64>], agents: &[UtilityFunction], lambdas: &[f64]) -> f64 {
    let states = eu_payoffs.first().map_or(0, |r| r.len());
    let mut worst = 0.0_f64;
    for k in 0..states {
        let ln_v: Vec<f64> =
            agents.iter().zip(lambdas).zip(eu_payoffs).map(|((a, l), row)| l.ln() + a.ln_marginal(row[k])).collect();
        let hi = ln_v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = ln_v.iter().cloned().fold(f64::INFINITY, f64::min);
        worst = worst.max(-(lo - hi).exp_m1());
    }
    worst
}

/// Borch-rule deviation of a solved allocation on a 1,001-point midpoint grid.
pub fn borch_check(alloc: &AllocationDistribution) -> Result<f64> {
    let mat = alloc.payoff_matrix(1001)?;
    let econ = alloc.economy();
    Ok(borch_deviation(&mat[1..], &econ.eu_agents, &econ.weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distortion::WeightingFunction;
    use crate::economy::cara::cara_closed_form;
    use crate::envelope::build_envelope;
    use approx::assert_abs_diff_eq;

    fn baseline(alpha: f64) -> (Economy, EnvelopeResult) {
        let w = WeightingFunction::prelec(alpha).unwrap();
        let econ = Economy::cara(w.clone(), 0.5, &[0.5, 2.0], &[1.0, 1.0], 0.0).unwrap();
        (econ, build_envelope(&w).unwrap())
    }

    #[test]
    fn matches_closed_form() {
        let (econ, env) = baseline(0.8);
        let alloc = solve_allocation(&econ, &env).unwrap();
        let form = cara_closed_form(&econ).unwrap();
        for k in 1..100 {
            let lv = Level::new(k as f64 / 100.0);
            let a = alloc.payoffs(lv).unwrap();
            let b = form.payoffs(env.ln_delta_prime(lv));
            for (x, y) in a.iter().zip(&b) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-12);
            }
            assert_abs_diff_eq!(a[1], -0.8 * a[0], epsilon = 1e-12);
            assert_abs_diff_eq!(a[2], -0.2 * a[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn generic_kernel_agrees_with_cara() {
        let w = WeightingFunction::prelec(0.5).unwrap();
        let env = build_envelope(&w).unwrap();
        let fast = Economy::cara(w.clone(), 0.7, &[0.5, 2.0], &[0.8, 1.3], 0.4).unwrap();
        let slow = Economy::new(
            w,
            UtilityFunction::cara_as_generic(0.7).unwrap(),
            vec![UtilityFunction::cara_as_generic(0.5).unwrap(), UtilityFunction::cara_as_generic(2.0).unwrap()],
            vec![0.8, 1.3],
            0.4,
        )
        .unwrap();
        let (a, b) = (solve_allocation(&fast, &env).unwrap(), solve_allocation(&slow, &env).unwrap());
        for k in 1..40 {
            let lv = Level::new(k as f64 / 40.0);
            for (x, y) in a.payoffs(lv).unwrap().iter().zip(&b.payoffs(lv).unwrap()) {
                assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn law_masses_and_atom() {
        let (econ, env) = baseline(0.8);
        let alloc = solve_allocation(&econ, &env).unwrap();
        let laws = alloc.laws().unwrap();
        let p = env.pstar().unwrap();
        assert_abs_diff_eq!(laws[0].atom_mass(), p, epsilon = 1e-15);
        assert_abs_diff_eq!(laws[0].atom_mass() + laws[0].continuous_mass(), 1.0, epsilon = 1e-15);
        assert!(laws[1].continuous[0].support.1 <= laws[1].atoms[0].location + 1e-12);
    }

    #[test]
    fn density_is_derivative_of_cdf() {
        let (econ, env) = baseline(0.8);
        let alloc = solve_allocation(&econ, &env).unwrap();
        let laws = alloc.laws().unwrap();
        for agent in 0..3 {
            let (a, b) = laws[agent].continuous[0].support;
            let b = if b.is_finite() { b } else { a + 5.0 };
            let a = if a.is_finite() { a } else { b - 5.0 };
            for k in 1..8 {
                let x = a + (b - a) * k as f64 / 8.0;
                let h = 1e-5;
                let fd = (alloc.continuous_cdf(agent, x + h).unwrap() - alloc.continuous_cdf(agent, x - h).unwrap())
                    / (2.0 * h);
                let d = alloc.density(agent, x).unwrap();
                assert!((fd - d).abs() < 1e-5 * (1.0 + d), "agent {agent} x {x}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn borch_and_feasibility() {
        let w = WeightingFunction::hurwicz(0.5, 0.5).unwrap();
        let econ = Economy::cara(w.clone(), 0.5, &[0.5, 2.0], &[0.4, 1.7], 1.3).unwrap();
        let alloc = solve_allocation(&econ, &build_envelope(&w).unwrap()).unwrap();
        assert!(borch_check(&alloc).unwrap() < 1e-8);
        assert!(alloc.feasibility_error(1001).unwrap() < 1e-8);
    }

    #[test]
    fn perturbation_breaks_borch() {
        let (econ, env) = baseline(0.8);
        let alloc = solve_allocation(&econ, &env).unwrap();
        let mut mat = alloc.payoff_matrix(11).unwrap();
        let eps = 1e-4;
        for k in 0..11 {
            mat[1][k] += eps;
            mat[2][k] -= eps;
        }
        let dev = borch_deviation(&mat[1..], &econ.eu_agents, &econ.weights);
        // λ u' moves by about ε(β_2 + β_3) in relative terms
        assert!((dev / (eps * 2.5) - 1.0).abs() < 0.01, "{dev}");
    }

    #[test]
    fn rejects_mismatched_envelope() {
        let (econ, _) = baseline(0.8);
        let other = build_envelope(&WeightingFunction::prelec(0.5).unwrap()).unwrap();
        assert!(solve_allocation(&econ, &other).unwrap_err().is_config());
    }
}
