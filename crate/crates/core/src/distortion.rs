//! Probability weighting functions, their conjugates and shape analysis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::level::{ln_complement, log_add_exp};
use crate::numeric::roots::bisect;

/// Below this `ln p` the probability underflows and tail asymptotics are used.
const LN_TINY: f64 = -700.0;

/// Grid used by the generic shape classifier.
pub const CLASSIFY_GRID: usize = 10_001;
const CLASSIFY_THRESHOLD: f64 = 1e-10;

/// An increasing map of `[0, 1]` onto itself applied to cumulative probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WeightingFunction {
    /// `exp(-(-ln p)^alpha)`.
    Prelec { alpha: f64 },
    /// `p^g / (p^g + (1-p)^g)^(1/g)`.
    #[serde(rename = "tk", alias = "tversky_kahneman")]
    TverskyKahneman { gamma: f64 },
    /// Weighting induced by Hurwicz expected utility.
    #[serde(rename = "heu", alias = "hurwicz")]
    Hurwicz { gamma: f64, kappa: f64 },
    Linear,
    /// `(1 - weight) * base(p) + weight * p`.
    Mixture { base: Box<WeightingFunction>, weight: f64 },
    /// `1 - base(1 - p)`.
    Conjugate { base: Box<WeightingFunction> },
    /// `base(scale * p) / base(scale)`.
    Rescaled { base: Box<WeightingFunction>, scale: f64 },
    /// Piecewise-linear interpolation of `(p, value)` knots.
    Tabulated { p: Vec<f64>, value: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Convex,
    Concave,
    Linear,
    SShaped,
    InverseSShaped,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub shape: Shape,
    /// Inflection point of `T` (that of the conjugate is `1 - inflection`).
    pub inflection: Option<f64>,
}

fn config<T>(msg: String) -> Result<T> {
    Err(Error::Config(msg))
}

/// `a p / (b (1 - p) + a p)`, one of the two Hurwicz components.
fn heu_part(p: f64, a: f64, b: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    a * p / (b * (1.0 - p) + a * p)
}

fn heu_part_d1(p: f64, a: f64, b: f64) -> f64 {
    let d = b * (1.0 - p) + a * p;
    a * b / (d * d)
}

fn heu_part_d2(p: f64, a: f64, b: f64) -> f64 {
    let d = b * (1.0 - p) + a * p;
    -2.0 * a * b * (a - b) / (d * d * d)
}

impl WeightingFunction {
    pub fn prelec(alpha: f64) -> Result<Self> {
        let w = WeightingFunction::Prelec { alpha };
        w.validate()?;
        Ok(w)
    }

    pub fn tversky_kahneman(gamma: f64) -> Result<Self> {
        let w = WeightingFunction::TverskyKahneman { gamma };
        w.validate()?;
        Ok(w)
    }

    pub fn hurwicz(gamma: f64, kappa: f64) -> Result<Self> {
        let w = WeightingFunction::Hurwicz { gamma, kappa };
        w.validate()?;
        Ok(w)
    }

    pub fn mixture(base: WeightingFunction, weight: f64) -> Result<Self> {
        let w = WeightingFunction::Mixture { base: Box::new(base), weight };
        w.validate()?;
        Ok(w)
    }

    pub fn rescaled(base: WeightingFunction, scale: f64) -> Result<Self> {
        let w = WeightingFunction::Rescaled { base: Box::new(base), scale };
        w.validate()?;
        Ok(w)
    }

    pub fn tabulated(p: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        let w = WeightingFunction::Tabulated { p, value };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        use WeightingFunction::*;
        match self {
            Prelec { alpha } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return config(format!("prelec alpha must be positive, got {alpha}"));
                }
            }
            TverskyKahneman { gamma } => {
                if !(gamma.is_finite() && *gamma > 0.0) {
                    return config(format!("tk gamma must be positive, got {gamma}"));
                }
            }
            Hurwicz { gamma, kappa } => {
                if !(0.0..=1.0).contains(gamma) {
                    return config(format!("heu gamma must lie in [0, 1], got {gamma}"));
                }
                if !(0.0..1.0).contains(kappa) {
                    return config(format!("heu kappa must lie in [0, 1), got {kappa}"));
                }
            }
            Linear => {}
            Mixture { base, weight } => {
                if !(0.0..=1.0).contains(weight) {
                    return config(format!("mixture weight must lie in [0, 1], got {weight}"));
                }
                base.validate()?;
            }
            Conjugate { base } => base.validate()?,
            Rescaled { base, scale } => {
                if !(*scale > 0.0 && *scale <= 1.0) {
                    return config(format!("rescale factor must lie in (0, 1], got {scale}"));
                }
                base.validate()?;
            }
            Tabulated { p, value } => {
                if p.len() < 2 || p.len() != value.len() {
                    return config("tabulated weighting needs matching p/value lists of length >= 2".into());
                }
                if p[0] != 0.0 || p[p.len() - 1] != 1.0 || value[0] != 0.0 || value[value.len() - 1] != 1.0 {
                    return config("tabulated weighting must run from (0, 0) to (1, 1)".into());
                }
                if p.windows(2).any(|w| w[1] <= w[0]) {
                    return config("tabulated p must be strictly increasing".into());
                }
                if value.windows(2).any(|w| w[1] < w[0]) {
                    return config("tabulated values must be nondecreasing".into());
                }
            }
        }
        Ok(())
    }

    /// `T(p)`.
    pub fn eval(&self, p: f64) -> f64 {
        use WeightingFunction::*;
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return 1.0;
        }
        match self {
            Prelec { alpha } => (-(-p.ln()).powf(*alpha)).exp(),
            TverskyKahneman { gamma } => {
                let g = *gamma;
                let d = p.powf(g) + (1.0 - p).powf(g);
                (g * p.ln() - d.ln() / g).exp()
            }
            Hurwicz { gamma, kappa } => {
                let (a, b) = (1.0 - kappa, 1.0 + kappa);
                gamma * heu_part(p, a, b) + (1.0 - gamma) * heu_part(p, b, a)
            }
            Linear => p,
            Mixture { base, weight } => (1.0 - weight) * base.eval(p) + weight * p,
            Conjugate { base } => 1.0 - base.eval(1.0 - p),
            Rescaled { base, scale } => base.eval(scale * p) / base.eval(*scale),
            Tabulated { p: xs, value } => {
                let i = segment_index(xs, p);
                let s = (p - xs[i]) / (xs[i + 1] - xs[i]);
                value[i] + s * (value[i + 1] - value[i])
            }
        }
    }

    /// `T(p)` given `ln p`; stays accurate when `p` underflows.
    pub fn eval_ln(&self, ln_p: f64) -> f64 {
        use WeightingFunction::*;
        if ln_p >= 0.0 {
            return 1.0;
        }
        match self {
            Prelec { alpha } => (-(-ln_p).powf(*alpha)).exp(),
            TverskyKahneman { gamma } if ln_p < LN_TINY => (gamma * ln_p).exp(),
            Mixture { base, weight } => (1.0 - weight) * base.eval_ln(ln_p) + weight * ln_p.exp(),
            Rescaled { base, scale } => base.eval_ln(ln_p + scale.ln()) / base.eval(*scale),
            _ => self.eval(ln_p.exp()),
        }
    }

    /// `T̃(t) = 1 - T(1 - t)`.
    pub fn conj_eval(&self, t: f64) -> f64 {
        1.0 - self.eval(1.0 - t)
    }

    /// `T'(p)`. Unbounded one-sided limits at 0 or 1 are reported as errors.
    pub fn deriv(&self, p: f64) -> Result<f64> {
        use WeightingFunction::*;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::NumericDomain(format!("probability {p} outside [0, 1]")));
        }
        let singular = || Err(Error::EndpointSingularity { p });
        let endpoint = p == 0.0 || p == 1.0;
        match self {
            Prelec { alpha } => {
                let a = *alpha;
                if a == 1.0 {
                    return Ok(1.0);
                }
                if endpoint {
                    return if a > 1.0 { Ok(0.0) } else { singular() };
                }
                let s = -p.ln();
                Ok(a * s.powf(a - 1.0) * (-s.powf(a)).exp() / p)
            }
            TverskyKahneman { gamma } => {
                let g = *gamma;
                if endpoint {
                    return if g == 1.0 {
                        Ok(1.0)
                    } else if g < 1.0 {
                        singular()
                    } else if p == 0.0 {
                        Ok(0.0)
                    } else {
                        Ok(g - 1.0)
                    };
                }
                let d = p.powf(g) + (1.0 - p).powf(g);
                let d1 = g * (p.powf(g - 1.0) - (1.0 - p).powf(g - 1.0));
                Ok(self.eval(p) * (g / p - d1 / (g * d)))
            }
            Hurwicz { gamma, kappa } => {
                let (a, b) = (1.0 - kappa, 1.0 + kappa);
                Ok(gamma * heu_part_d1(p, a, b) + (1.0 - gamma) * heu_part_d1(p, b, a))
            }
            Linear => Ok(1.0),
            Mixture { base, weight } => {
                if *weight == 1.0 {
                    return Ok(1.0);
                }
                Ok((1.0 - weight) * base.deriv(p)? + weight)
            }
            Conjugate { base } => base.deriv(1.0 - p).map_err(|_| Error::EndpointSingularity { p }),
            Rescaled { base, scale } => Ok(scale * base.deriv(scale * p)? / base.eval(*scale)),
            Tabulated { p: xs, value } => {
                let i = segment_index(xs, p);
                Ok((value[i + 1] - value[i]) / (xs[i + 1] - xs[i]))
            }
        }
    }

    /// `T''(p)`. Endpoints are rejected unless the family is smooth there.
    pub fn deriv2(&self, p: f64) -> Result<f64> {
        use WeightingFunction::*;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::NumericDomain(format!("probability {p} outside [0, 1]")));
        }
        let endpoint = p == 0.0 || p == 1.0;
        match self {
            Prelec { alpha } => {
                let a = *alpha;
                if a == 1.0 {
                    return Ok(0.0);
                }
                if endpoint {
                    return Err(Error::EndpointSingularity { p });
                }
                let s = -p.ln();
                let d1 = self.deriv(p)?;
                Ok(d1 / p * (a * s.powf(a - 1.0) - (a - 1.0) / s - 1.0))
            }
            TverskyKahneman { gamma } => {
                let g = *gamma;
                if g == 1.0 {
                    return Ok(0.0);
                }
                if endpoint {
                    return Err(Error::EndpointSingularity { p });
                }
                let r = 1.0 - p;
                let d = p.powf(g) + r.powf(g);
                let d1 = g * (p.powf(g - 1.0) - r.powf(g - 1.0));
                let d2 = g * (g - 1.0) * (p.powf(g - 2.0) + r.powf(g - 2.0));
                let l = g / p - d1 / (g * d);
                let l1 = -g / (p * p) - (d2 * d - d1 * d1) / (g * d * d);
                Ok(self.eval(p) * (l * l + l1))
            }
            Hurwicz { gamma, kappa } => {
                let (a, b) = (1.0 - kappa, 1.0 + kappa);
                Ok(gamma * heu_part_d2(p, a, b) + (1.0 - gamma) * heu_part_d2(p, b, a))
            }
            Linear => Ok(0.0),
            Mixture { base, weight } => {
                if *weight == 1.0 {
                    return Ok(0.0);
                }
                Ok((1.0 - weight) * base.deriv2(p)?)
            }
            Conjugate { base } => Ok(-base.deriv2(1.0 - p).map_err(|_| Error::EndpointSingularity { p })?),
            Rescaled { base, scale } => Ok(scale * scale * base.deriv2(scale * p)? / base.eval(*scale)),
            Tabulated { .. } => Ok(0.0),
        }
    }

    /// `ln T'(p)` given `ln p`. Infinite derivatives map to `+inf`.
    pub fn ln_deriv_ln(&self, ln_p: f64) -> f64 {
        use WeightingFunction::*;
        let ln_p = ln_p.min(0.0);
        match self {
            Prelec { alpha } => {
                let a = *alpha;
                if a == 1.0 {
                    return 0.0;
                }
                let s = -ln_p;
                if s == 0.0 || s == f64::INFINITY {
                    return if a < 1.0 { f64::INFINITY } else { f64::NEG_INFINITY };
                }
                a.ln() + (a - 1.0) * s.ln() - s.powf(a) + s
            }
            TverskyKahneman { gamma } if ln_p < LN_TINY => {
                if *gamma == 1.0 {
                    0.0
                } else {
                    gamma.ln() + (gamma - 1.0) * ln_p
                }
            }
            Hurwicz { .. } if ln_p < LN_TINY => self.deriv(0.0).map(f64::ln).unwrap_or(f64::INFINITY),
            Linear => 0.0,
            Mixture { base, weight } => {
                let f = *weight;
                if f == 0.0 {
                    base.ln_deriv_ln(ln_p)
                } else if f == 1.0 {
                    0.0
                } else {
                    log_add_exp((1.0 - f).ln() + base.ln_deriv_ln(ln_p), f.ln())
                }
            }
            Conjugate { base } => base.ln_deriv_ln(ln_complement(ln_p)),
            Rescaled { base, scale } => {
                scale.ln() + base.ln_deriv_ln(ln_p + scale.ln()) - base.eval(*scale).ln()
            }
            _ => match self.deriv(ln_p.exp()) {
                Ok(d) => d.ln(),
                Err(_) => f64::INFINITY,
            },
        }
    }

    /// The conjugate `T̃(t) = 1 - T(1 - t)` as a weighting function.
    pub fn conjugate(&self) -> WeightingFunction {
        match self {
            WeightingFunction::Linear => WeightingFunction::Linear,
            WeightingFunction::Conjugate { base } => (**base).clone(),
            other => WeightingFunction::Conjugate { base: Box::new(other.clone()) },
        }
    }

    pub fn classify(&self) -> ShapeReport {
        use WeightingFunction::*;
        let inv_e = (-1.0f64).exp();
        match self {
            Prelec { alpha } => {
                if (alpha - 1.0).abs() < 1e-9 {
                    ShapeReport { shape: Shape::Linear, inflection: None }
                } else if *alpha < 1.0 {
                    ShapeReport { shape: Shape::InverseSShaped, inflection: Some(inv_e) }
                } else {
                    ShapeReport { shape: Shape::SShaped, inflection: Some(inv_e) }
                }
            }
            Linear => ShapeReport { shape: Shape::Linear, inflection: None },
            Mixture { weight, .. } if *weight == 1.0 => ShapeReport { shape: Shape::Linear, inflection: None },
            Tabulated { .. } => ShapeReport { shape: Shape::Other, inflection: None },
            _ => self.classify_on_grid(CLASSIFY_GRID),
        }
    }

    /// Sign pattern of `T''` on a uniform grid; a sign change counts only
    /// when `|T''|` exceeds the threshold on both sides.
    pub fn classify_on_grid(&self, n: usize) -> ShapeReport {
        let step = 1.0 / (n - 1) as f64;
        let mut signs: Vec<(f64, bool)> = Vec::new();
        for k in 0..n {
            let p = k as f64 * step;
            if let Ok(d2) = self.deriv2(p) {
                if d2.is_finite() && d2.abs() > CLASSIFY_THRESHOLD {
                    signs.push((p, d2 > 0.0));
                }
            }
        }
        if signs.is_empty() {
            return ShapeReport { shape: Shape::Linear, inflection: None };
        }
        let changes: Vec<usize> = (1..signs.len()).filter(|&i| signs[i].1 != signs[i - 1].1).collect();
        match changes.len() {
            0 => ShapeReport {
                shape: if signs[0].1 { Shape::Convex } else { Shape::Concave },
                inflection: None,
            },
            1 => {
                let i = changes[0];
                let (a, b) = (signs[i - 1].0, signs[i].0);
                let inflection = bisect(|p| self.deriv2(p).unwrap_or(0.0), a, b, 1e-14).unwrap_or(0.5 * (a + b));
                let shape = if signs[0].1 { Shape::SShaped } else { Shape::InverseSShaped };
                ShapeReport { shape, inflection: Some(inflection) }
            }
            _ => ShapeReport { shape: Shape::Other, inflection: None },
        }
    }

    /// Checks `T(0) = 0`, `T(1) = 1` and strict increase on a uniform grid.
    pub fn is_increasing_on_grid(&self, n: usize) -> bool {
        let vals: Vec<f64> = (0..n).map(|k| self.eval(k as f64 / (n - 1) as f64)).collect();
        vals[0] == 0.0 && vals[n - 1] == 1.0 && vals.windows(2).all(|w| w[1] > w[0] - 1e-12)
    }
}

/// Index `i` with `p` in `(xs[i], xs[i+1]]`, or 0 for `p <= xs[0]`.
fn segment_index(xs: &[f64], p: f64) -> usize {
    let idx = xs.partition_point(|&x| x < p);
    idx.saturating_sub(1).min(xs.len() - 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn prelec_identity_at_one() {
        let w = WeightingFunction::prelec(1.0).unwrap();
        assert_abs_diff_eq!(w.eval(0.3), 0.3, epsilon = 1e-15);
        assert_eq!(w.deriv(0.3).unwrap(), 1.0);
        assert_eq!(w.deriv2(0.3).unwrap(), 0.0);
    }

    #[test]
    fn prelec_value_at_inverse_e() {
        let w = WeightingFunction::prelec(2.0).unwrap();
        assert_abs_diff_eq!(w.eval((-1.0f64).exp()), (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn heu_midpoint_by_substitution() {
        let w = WeightingFunction::hurwicz(0.5, 0.5).unwrap();
        let by_hand = 0.5 * (0.5 * 0.5) / (1.5 * 0.5 + 0.5 * 0.5) + 0.5 * (1.5 * 0.5) / (0.5 * 0.5 + 1.5 * 0.5);
        assert_abs_diff_eq!(w.eval(0.5), by_hand, epsilon = 1e-15);
        assert_abs_diff_eq!(w.eval(0.5), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn endpoint_singularity_is_signalled() {
        let w = WeightingFunction::prelec(0.5).unwrap();
        assert!(matches!(w.deriv(0.0), Err(Error::EndpointSingularity { .. })));
        assert!(matches!(w.deriv(1.0), Err(Error::EndpointSingularity { .. })));
        let s = WeightingFunction::prelec(2.0).unwrap();
        assert_eq!(s.deriv(0.0).unwrap(), 0.0);
    }

    #[test]
    fn conjugate_of_linear_is_linear() {
        assert_eq!(WeightingFunction::Linear.conjugate(), WeightingFunction::Linear);
    }

    #[test]
    fn conjugate_prelec_matches_closed_form() {
        let w = WeightingFunction::prelec(0.7).unwrap().conjugate();
        for &t in &[0.05, 0.3, 0.8, 0.99] {
            let direct = 1.0 - (-(-(1.0f64 - t).ln()).powf(0.7)).exp();
            assert_abs_diff_eq!(w.eval(t), direct, epsilon = 1e-14);
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(WeightingFunction::prelec(2.0).unwrap().classify().shape, Shape::SShaped);
        assert_eq!(WeightingFunction::prelec(1.0).unwrap().classify().shape, Shape::Linear);
        assert_eq!(WeightingFunction::tversky_kahneman(0.5).unwrap().classify().shape, Shape::InverseSShaped);
        assert_eq!(WeightingFunction::hurwicz(0.5, 0.5).unwrap().classify().shape, Shape::InverseSShaped);
    }

    #[test]
    fn prelec_inflection_found_by_grid_matches_analytic() {
        let w = WeightingFunction::prelec(0.6).unwrap();
        let grid = w.classify_on_grid(CLASSIFY_GRID);
        assert_eq!(grid.shape, Shape::InverseSShaped);
        assert_abs_diff_eq!(grid.inflection.unwrap(), (-1.0f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn json_round_trip() {
        let w: WeightingFunction = serde_json::from_str(r#"{"family":"mixture","base":{"family":"prelec","alpha":0.8},"weight":0.25}"#).unwrap();
        assert_eq!(w, WeightingFunction::mixture(WeightingFunction::Prelec { alpha: 0.8 }, 0.25).unwrap());
        let h: WeightingFunction = serde_json::from_str(r#"{"family":"heu","gamma":0.5,"kappa":0.5}"#).unwrap();
        assert_eq!(h, WeightingFunction::Hurwicz { gamma: 0.5, kappa: 0.5 });
        let back: WeightingFunction = serde_json::from_str(&serde_json::to_string(&h).unwrap()).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn tabulated_interpolates() {
        let w = WeightingFunction::tabulated(vec![0.0, 0.5, 1.0], vec![0.0, 0.2, 1.0]).unwrap();
        assert_abs_diff_eq!(w.eval(0.25), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(w.deriv(0.5).unwrap(), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(w.deriv(0.75).unwrap(), 1.6, epsilon = 1e-15);
        assert!(WeightingFunction::tabulated(vec![0.0, 1.0], vec![0.0, 0.9]).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(WeightingFunction::prelec(0.0).is_err());
        assert!(WeightingFunction::hurwicz(1.5, 0.2).is_err());
        assert!(WeightingFunction::mixture(WeightingFunction::Linear, 1.2).is_err());
    }

    #[test]
    fn ln_deriv_agrees_with_deriv() {
        let fams = [
            WeightingFunction::Prelec { alpha: 0.4 },
            WeightingFunction::Prelec { alpha: 2.5 },
            WeightingFunction::TverskyKahneman { gamma: 0.6 },
            WeightingFunction::Hurwicz { gamma: 0.3, kappa: 0.7 },
            WeightingFunction::mixture(WeightingFunction::Prelec { alpha: 0.4 }, 0.3).unwrap(),
            WeightingFunction::Prelec { alpha: 0.4 }.conjugate(),
            WeightingFunction::rescaled(WeightingFunction::Prelec { alpha: 0.5 }, 0.25).unwrap(),
        ];
        for w in &fams {
            for &p in &[1e-6, 0.01, 0.3, 0.7, 0.999] {
                let d = w.deriv(p).unwrap();
                assert_abs_diff_eq!(w.ln_deriv_ln(p.ln()).exp() / d, 1.0, epsilon = 1e-9);
                assert_abs_diff_eq!(w.eval_ln(p.ln()), w.eval(p), epsilon = 1e-14);
            }
        }
    }
}
