//! Convex envelope `δ` of the conjugate distortion `T̃`, the tangent point
//! `p*` and the mass of the full-insurance event.

use serde::Serialize;

use crate::distortion::{Shape, ShapeReport, WeightingFunction};
use crate::error::{Error, Result};
use crate::numeric::hull::lower_hull;
use crate::numeric::level::Level;
use crate::numeric::roots::bisect;

/// Samples used by the hull fallback.
pub const HULL_RESOLUTION: usize = 10_001;
/// Refined resolution used to check hull convergence.
pub const HULL_REFINED_RESOLUTION: usize = 40_001;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Representation {
    /// `δ(t) = slope * t` on `[0, p*]`, `δ = T̃` after.
    AnalyticInverseS { pstar: f64, slope: f64 },
    /// `δ = T̃` on `[0, p*]`, affine with `slope` after.
    AnalyticS { pstar: f64, slope: f64 },
    Identity,
    CoincidesWithTtilde,
    PiecewiseLinearHull { knots: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PieceKind {
    Affine { slope: f64 },
    /// `δ = T̃` on the piece.
    Contact,
}

/// A sub-interval of `[0, 1]` on which `δ` is either affine or equal to `T̃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: Level,
    pub hi: Level,
    pub kind: PieceKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeSummary {
    pub shape: Shape,
    pub pstar: Option<f64>,
    pub fi_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeResult {
    weighting: WeightingFunction,
    shape: ShapeReport,
    representation: Representation,
    tangent: Option<Level>,
    fi_mass: f64,
    slopes: Vec<f64>,
    detached: Vec<bool>,
}

fn degenerate<T>(msg: String) -> Result<T> {
    Err(Error::DegenerateEnvelope(msg))
}

/// Tangent point of `T̃` for inverse-S `T`: the root of
/// `T̃'(p) p - T̃(p)` on `[p̄, 1)`, where `p̄ = 1 - inflection`.
///
/// Works in `z = ln(1 - p)` so that points extremely close to 1 stay
/// distinguishable; the bracket's right end is pushed toward 1
/// geometrically until the sign changes.
pub fn tangent_point_inverse_s(w: &WeightingFunction, inflection: f64) -> Result<Level> {
    let g = |z: f64| {
        let t_prime = w.ln_deriv_ln(z).exp();
        t_prime * (-z.exp_m1()) - (1.0 - w.eval_ln(z))
    };
    let z_hi = inflection.ln();
    let g_hi = g(z_hi);
    if g_hi > 0.0 {
        return degenerate(format!("g(p̄) = {g_hi} > 0 at the inflection point"));
    }
    let mut step = 0.5;
    let mut z_lo = z_hi - step;
    while g(z_lo) <= 0.0 {
        step *= 2.0;
        z_lo = z_hi - step;
        if z_lo < -700.0 {
            return degenerate("no sign change of T̃'(p)p - T̃(p) before 1 - 1e-300".into());
        }
    }
    let z = bisect(g, z_lo, z_hi, 1e-15)?;
    let residual = g(z);
    if residual.abs() > 1e-12 {
        return degenerate(format!("tangency residual {residual} exceeds 1e-12"));
    }
    Ok(Level::from_ln_q(z))
}

/// Tangent point of `T̃` for S-shaped `T`: the root of
/// `T̃'(p)(1 - p) - (1 - T̃(p))` on `(0, p̄]`.
pub fn tangent_point_s(w: &WeightingFunction, inflection: f64) -> Result<Level> {
    // with q = 1 - p the condition reads T'(q) q - T(q) = 0 on [inflection, 1)
    let g = |q: f64| w.deriv(q).unwrap_or(f64::INFINITY) * q - w.eval(q);
    let q_lo = inflection;
    let g_lo = g(q_lo);
    if g_lo < 0.0 {
        return degenerate(format!("g(p̄) = {g_lo} < 0 at the inflection point"));
    }
    let mut gap = 0.5 * (1.0 - q_lo);
    let mut q_hi = 1.0 - gap;
    while g(q_hi) >= 0.0 {
        gap *= 0.5;
        q_hi = 1.0 - gap;
        if gap < 1e-15 {
            return degenerate("no sign change of T̃'(p)(1-p) - (1-T̃(p)) above 1e-15".into());
        }
    }
    let q = bisect(g, q_lo, q_hi, 1e-16)?;
    let residual = g(q);
    if residual.abs() > 1e-12 {
        return degenerate(format!("tangency residual {residual} exceeds 1e-12"));
    }
    Ok(Level::from_ln_q(q.ln()))
}

/// Families for which the single-crossing tangent search is used.
fn analytic_family(w: &WeightingFunction) -> bool {
    match w {
        WeightingFunction::Prelec { .. }
        | WeightingFunction::Hurwicz { .. }
        | WeightingFunction::TverskyKahneman { .. } => true,
        WeightingFunction::Mixture { base, weight } => *weight < 1.0 && analytic_family(base),
        _ => false,
    }
}

/// Families known to cross once, where a failed search is an error rather
/// than a reason to fall back. Hurwicz is not among them: when
/// `T̃'(1-) <= 1` no chord from the origin touches `T̃`.
fn strict_family(w: &WeightingFunction) -> bool {
    matches!(w, WeightingFunction::Prelec { .. })
}

pub fn build_envelope(w: &WeightingFunction) -> Result<EnvelopeResult> {
    w.validate()?;
    let shape = w.classify();
    match shape.shape {
        Shape::Linear | Shape::Convex => Ok(EnvelopeResult::identity(w.clone(), shape)),
        Shape::Concave => Ok(EnvelopeResult {
            weighting: w.clone(),
            shape,
            representation: Representation::CoincidesWithTtilde,
            tangent: None,
            fi_mass: 0.0,
            slopes: Vec::new(),
            detached: Vec::new(),
        }),
        Shape::InverseSShaped | Shape::SShaped if analytic_family(w) => {
            let attempt = EnvelopeResult::analytic(w, shape);
            match attempt {
                Ok(env) => Ok(env),
                Err(e) if strict_family(w) => Err(e),
                Err(_) => build_hull(w, HULL_RESOLUTION),
            }
        }
        _ => build_hull(w, HULL_RESOLUTION),
    }
}

/// Lower convex hull of `T̃` sampled on a uniform grid of `n` points.
pub fn build_hull(w: &WeightingFunction, n: usize) -> Result<EnvelopeResult> {
    if n < 2 {
        return Err(Error::Config("hull needs at least two samples".into()));
    }
    let ts: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    build_hull_on_points(w, &ts)
}

/// Lower convex hull of `T̃` sampled at the given increasing points, which
/// must start at 0 and end at 1.
pub fn build_hull_on_points(w: &WeightingFunction, ts: &[f64]) -> Result<EnvelopeResult> {
    w.validate()?;
    if ts.len() < 2 || ts[0] != 0.0 || ts[ts.len() - 1] != 1.0 || ts.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Config("hull sample points must increase from 0 to 1".into()));
    }
    let pts: Vec<(f64, f64)> = ts.iter().map(|&t| (t, w.conj_eval(t))).collect();
    let idx = lower_hull(&pts);
    let knots: Vec<(f64, f64)> = idx.iter().map(|&i| pts[i]).collect();
    let slopes: Vec<f64> = knots.windows(2).map(|k| (k[1].1 - k[0].1) / (k[1].0 - k[0].0)).collect();
    let detached: Vec<bool> = idx.windows(2).map(|i| i[1] - i[0] > 1).collect();
    let fi_mass = knots
        .windows(2)
        .zip(&detached)
        .filter(|(_, d)| **d)
        .map(|(k, _)| k[1].0 - k[0].0)
        .sum();
    let detached_segments: Vec<usize> = (0..detached.len()).filter(|&i| detached[i]).collect();
    let tangent = match detached_segments.as_slice() {
        [i] if *i == 0 => Some(Level::new(knots[1].0)),
        [i] if *i == knots.len() - 2 => Some(Level::new(knots[*i].0)),
        _ => None,
    };
    Ok(EnvelopeResult {
        weighting: w.clone(),
        shape: w.classify(),
        representation: Representation::PiecewiseLinearHull { knots },
        tangent,
        fi_mass,
        slopes,
        detached,
    })
}

impl EnvelopeResult {
    fn identity(weighting: WeightingFunction, shape: ShapeReport) -> Self {
        EnvelopeResult {
            weighting,
            shape,
            representation: Representation::Identity,
            tangent: None,
            fi_mass: 1.0,
            slopes: Vec::new(),
            detached: Vec::new(),
        }
    }

    fn analytic(w: &WeightingFunction, shape: ShapeReport) -> Result<Self> {
        let inflection = shape
            .inflection
            .ok_or_else(|| Error::DegenerateEnvelope("missing inflection point".into()))?;
        let (representation, tangent, fi_mass) = if shape.shape == Shape::InverseSShaped {
            let pstar = tangent_point_inverse_s(w, inflection)?;
            let slope = (1.0 - w.eval_ln(pstar.ln_q())) / pstar.t();
            (Representation::AnalyticInverseS { pstar: pstar.t(), slope }, pstar, pstar.t())
        } else {
            let pstar = tangent_point_s(w, inflection)?;
            let slope = w.eval_ln(pstar.ln_q()) / pstar.q();
            (Representation::AnalyticS { pstar: pstar.t(), slope }, pstar, pstar.q())
        };
        let env = EnvelopeResult {
            weighting: w.clone(),
            shape,
            representation,
            tangent: Some(tangent),
            fi_mass,
            slopes: Vec::new(),
            detached: Vec::new(),
        };
        let worst = (0..=1000)
            .map(|k| {
                let t = k as f64 / 1000.0;
                env.delta(t) - w.conj_eval(t)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        if worst > 1e-10 {
            return degenerate(format!("two-piece envelope exceeds T̃ by {worst}"));
        }
        Ok(env)
    }

    pub fn weighting(&self) -> &WeightingFunction {
        &self.weighting
    }

    pub fn shape(&self) -> ShapeReport {
        self.shape
    }

    pub fn representation(&self) -> &Representation {
        &self.representation
    }

    pub fn fi_mass(&self) -> f64 {
        self.fi_mass
    }

    pub fn pstar(&self) -> Option<f64> {
        self.tangent.map(|l| l.t())
    }

    pub fn tangent_level(&self) -> Option<Level> {
        self.tangent
    }

    pub fn summary(&self) -> EnvelopeSummary {
        EnvelopeSummary { shape: self.shape.shape, pstar: self.pstar(), fi_mass: self.fi_mass }
    }

    pub fn contact_set_description(&self) -> String {
        match &self.representation {
            Representation::AnalyticInverseS { pstar, .. } => format!("[{pstar}, 1]"),
            Representation::AnalyticS { pstar, .. } => format!("[0, {pstar}]"),
            Representation::Identity => "{0, 1}".into(),
            Representation::CoincidesWithTtilde => "[0, 1]".into(),
            Representation::PiecewiseLinearHull { knots } => {
                format!("{} hull knots, detached mass {}", knots.len(), self.fi_mass)
            }
        }
    }

    /// `T̃(t)`.
    pub fn ttilde(&self, t: f64) -> f64 {
        self.weighting.conj_eval(t)
    }

    /// `δ(t)`.
    pub fn delta(&self, t: f64) -> f64 {
        match &self.representation {
            Representation::Identity => t,
            Representation::CoincidesWithTtilde => self.ttilde(t),
            Representation::AnalyticInverseS { pstar, slope } => {
                if t <= *pstar {
                    slope * t
                } else {
                    self.ttilde(t)
                }
            }
            Representation::AnalyticS { pstar, slope } => {
                if t < *pstar {
                    self.ttilde(t)
                } else {
                    1.0 - slope * (1.0 - t)
                }
            }
            Representation::PiecewiseLinearHull { knots } => {
                let i = self.hull_segment(t);
                knots[i].1 + self.slopes[i] * (t - knots[i].0)
            }
        }
    }

    /// `δ'(t)`, left-continuous at kinks.
    pub fn delta_prime(&self, t: f64) -> f64 {
        self.ln_delta_prime(Level::new(t)).exp()
    }

    /// `ln δ'` at a level; finite far into the tail where `δ'` overflows.
    pub fn ln_delta_prime(&self, lv: Level) -> f64 {
        match &self.representation {
            Representation::Identity => 0.0,
            Representation::CoincidesWithTtilde => self.weighting.ln_deriv_ln(lv.ln_q()),
            Representation::AnalyticInverseS { slope, .. } => {
                let star = self.tangent.expect("analytic envelope has a tangent point");
                if lv.le(&star) {
                    slope.ln()
                } else {
                    self.weighting.ln_deriv_ln(lv.ln_q())
                }
            }
            Representation::AnalyticS { slope, .. } => {
                let star = self.tangent.expect("analytic envelope has a tangent point");
                if lv.lt(&star) {
                    self.weighting.ln_deriv_ln(lv.ln_q())
                } else {
                    slope.ln()
                }
            }
            Representation::PiecewiseLinearHull { .. } => self.slopes[self.hull_segment(lv.t())].ln(),
        }
    }

    /// Segment `i` with `t` in `(t_i, t_{i+1}]`.
    fn hull_segment(&self, t: f64) -> usize {
        match &self.representation {
            Representation::PiecewiseLinearHull { knots } => {
                let idx = knots.partition_point(|k| k.0 < t);
                idx.saturating_sub(1).min(knots.len() - 2)
            }
            _ => 0,
        }
    }

    /// Decomposition of `[0, 1]` into affine and contact pieces, in order.
    pub fn pieces(&self) -> Vec<Piece> {
        let zero = Level::zero();
        let one = Level::one();
        match &self.representation {
            Representation::Identity => vec![Piece { lo: zero, hi: one, kind: PieceKind::Affine { slope: 1.0 } }],
            Representation::CoincidesWithTtilde => vec![Piece { lo: zero, hi: one, kind: PieceKind::Contact }],
            Representation::AnalyticInverseS { slope, .. } => {
                let star = self.tangent.expect("analytic envelope has a tangent point");
                vec![
                    Piece { lo: zero, hi: star, kind: PieceKind::Affine { slope: *slope } },
                    Piece { lo: star, hi: one, kind: PieceKind::Contact },
                ]
            }
            Representation::AnalyticS { slope, .. } => {
                let star = self.tangent.expect("analytic envelope has a tangent point");
                vec![
                    Piece { lo: zero, hi: star, kind: PieceKind::Contact },
                    Piece { lo: star, hi: one, kind: PieceKind::Affine { slope: *slope } },
                ]
            }
            Representation::PiecewiseLinearHull { knots } => knots
                .windows(2)
                .zip(&self.slopes)
                .map(|(k, s)| Piece {
                    lo: Level::new(k[0].0),
                    hi: Level::new(k[1].0),
                    kind: PieceKind::Affine { slope: *s },
                })
                .collect(),
        }
    }

    /// Whether hull segment `i` spans more than one sample.
    pub fn hull_detached(&self) -> &[bool] {
        &self.detached
    }

    /// Envelope of the mixture `(1 - f) T + f id`, obtained as
    /// `(1 - f) δ + f id`.
    pub fn nudged(&self, f: f64) -> Result<EnvelopeResult> {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::Config(format!("nudging share must lie in [0, 1], got {f}")));
        }
        if f == 0.0 {
            return Ok(self.clone());
        }
        if f == 1.0 {
            return Ok(EnvelopeResult::identity(
                WeightingFunction::Linear,
                ShapeReport { shape: Shape::Linear, inflection: None },
            ));
        }
        let weighting = WeightingFunction::mixture(self.weighting.clone(), f)?;
        let mix = |s: f64| (1.0 - f) * s + f;
        let representation = match &self.representation {
            Representation::AnalyticInverseS { pstar, slope } => {
                Representation::AnalyticInverseS { pstar: *pstar, slope: mix(*slope) }
            }
            Representation::AnalyticS { pstar, slope } => Representation::AnalyticS { pstar: *pstar, slope: mix(*slope) },
            Representation::PiecewiseLinearHull { knots } => Representation::PiecewiseLinearHull {
                knots: knots.iter().map(|&(t, d)| (t, (1.0 - f) * d + f * t)).collect(),
            },
            other => other.clone(),
        };
        Ok(EnvelopeResult {
            weighting,
            shape: self.shape,
            representation,
            tangent: self.tangent,
            fi_mass: self.fi_mass,
            slopes: self.slopes.iter().map(|&s| mix(s)).collect(),
            detached: self.detached.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_is_identity() {
        let env = build_envelope(&WeightingFunction::Linear).unwrap();
        assert_eq!(env.representation(), &Representation::Identity);
        assert_eq!(env.fi_mass(), 1.0);
        assert_eq!(env.delta_prime(0.3), 1.0);
    }

    #[test]
    fn prelec_two_closed_form() {
        let env = build_envelope(&WeightingFunction::Prelec { alpha: 2.0 }).unwrap();
        assert_abs_diff_eq!(env.pstar().unwrap(), 1.0 - (-0.5f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(env.fi_mass(), (-0.5f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn prelec_one_point_two_closed_form() {
        let env = build_envelope(&WeightingFunction::Prelec { alpha: 1.2 }).unwrap();
        let closed = 1.0 - (-(1.2f64).powf(-5.0)).exp();
        assert_abs_diff_eq!(env.pstar().unwrap(), closed, epsilon = 1e-12);
        assert_abs_diff_eq!(env.pstar().unwrap(), 0.33094, epsilon = 1e-5);
    }

    #[test]
    fn prelec_point_eight_near_nine_tenths() {
        let env = build_envelope(&WeightingFunction::Prelec { alpha: 0.8 }).unwrap();
        assert!(matches!(env.representation(), Representation::AnalyticInverseS { .. }));
        assert!((env.pstar().unwrap() - 0.9).abs() < 0.02);
        assert_eq!(env.fi_mass(), env.pstar().unwrap());
    }

    #[test]
    fn left_continuous_at_kink() {
        let env = build_envelope(&WeightingFunction::Prelec { alpha: 0.5 }).unwrap();
        let p = env.pstar().unwrap();
        if let Representation::AnalyticInverseS { slope, .. } = env.representation() {
            assert_abs_diff_eq!(env.delta_prime(p), *slope, epsilon = 1e-15);
        }
    }

    #[test]
    fn hull_derivative_is_step_function() {
        let w = WeightingFunction::Prelec { alpha: 0.5 };
        let env = build_hull(&w, 1001).unwrap();
        let mut prev = 0.0;
        for k in 1..1000 {
            let d = env.delta_prime(k as f64 / 1000.0 + 5e-4);
            assert!(d >= prev - 1e-12);
            prev = d;
        }
    }

    #[test]
    fn nudged_slope_is_mixed() {
        let env = build_envelope(&WeightingFunction::Prelec { alpha: 0.4 }).unwrap();
        let nudged = env.nudged(0.5).unwrap();
        assert_eq!(nudged.pstar(), env.pstar());
        assert_abs_diff_eq!(nudged.delta_prime(0.2), 0.5 * env.delta_prime(0.2) + 0.5, epsilon = 1e-14);
        assert_eq!(env.nudged(1.0).unwrap().representation(), &Representation::Identity);
    }

    #[test]
    fn heu_without_origin_tangent_uses_hull() {
        // T̃'(1-) = 0.795 * 0.559 + 0.205 * 1.788 < 1
        let w = WeightingFunction::Hurwicz { gamma: 0.7953778373864252, kappa: 0.28270149697174385 };
        let env = build_envelope(&w).unwrap();
        assert!(matches!(env.representation(), Representation::PiecewiseLinearHull { .. }));
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            assert!(env.delta(t) <= w.conj_eval(t) + 1e-12);
        }
    }
}
