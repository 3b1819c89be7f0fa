use crate::distortion::WeightingFunction;
use crate::error::{Error, Result};
use crate::numeric::level::Level;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Subdivision budget per panel.
    pub max_subdivisions: usize,
    /// Bound on the neglected mass times integrand in an infinite tail.
    pub tail_tol: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { abs_tol: 1e-11, rel_tol: 1e-12, max_subdivisions: 200, tail_tol: 1e-13 }
    }
}

impl QuadConfig {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        QuadConfig { abs_tol, tail_tol: (abs_tol * 1e-2).min(1e-13), ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub evals: usize,
    pub converged: bool,
}

impl QuadResult {
    pub fn empty() -> Self {
        QuadResult { value: 0.0, abs_err: 0.0, evals: 0, converged: true }
    }

    pub fn absorb(&mut self, other: QuadResult) {
        self.value += other.value;
        self.abs_err += other.abs_err;
        self.evals += other.evals;
        self.converged &= other.converged;
    }

    /// Fails with the current estimate when the error target was missed.
    pub fn require(self, abs_tol: f64) -> Result<QuadResult> {
        if self.value.is_finite() && (self.converged || self.abs_err <= abs_tol) {
            Ok(self)
        } else {
            Err(Error::Quadrature { estimate: self.value, error: self.abs_err })
        }
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut res_g = fc * WG[3];
    let mut res_k = fc * WGK[7];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x)?;
        let f2 = f(center + x)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    if !result.is_finite() {
        return Err(Error::NumericDomain(format!("non-finite integrand on [{a}, {b}]")));
    }
    Ok((result, err))
}

/// Globally adaptive Gauss-Kronrod (7/15) quadrature on a finite interval.
pub fn adaptive<F>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(QuadResult::empty());
    }
    let (value, err) = gk15(&mut f, a, b)?;
    let mut segments = vec![Segment { a, b, value, err }];
    let mut evals = 15;
    loop {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let total_err: f64 = segments.iter().map(|s| s.err).sum();
        let target = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if total_err <= target || segments.len() >= cfg.max_subdivisions {
            return Ok(QuadResult {
                value: total,
                abs_err: total_err,
                evals,
                converged: total_err <= target,
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            segments.push(seg);
            let total: f64 = segments.iter().map(|s| s.value).sum();
            let total_err: f64 = segments.iter().map(|s| s.err).sum();
            return Ok(QuadResult { value: total, abs_err: total_err, evals, converged: false });
        }
        let (v1, e1) = gk15(&mut f, seg.a, mid)?;
        let (v2, e2) = gk15(&mut f, mid, seg.b)?;
        evals += 30;
        segments.push(Segment { a: seg.a, b: mid, value: v1, err: e1 });
        segments.push(Segment { a: mid, b: seg.b, value: v2, err: e2 });
    }
}

/// Measure on the unit interval against which quantile integrals are taken.
#[derive(Debug, Clone, Copy)]
pub enum Measure<'a> {
    /// Plain `dt`.
    Lebesgue,
    /// `dT̃(t)` where `T̃` is the conjugate of the given weighting, so the
    /// density at `t` is `T'(1 - t)`.
    Distorted(&'a WeightingFunction),
}

impl Measure<'_> {
    pub fn ln_density(&self, lv: Level) -> f64 {
        match self {
            Measure::Lebesgue => 0.0,
            Measure::Distorted(w) => w.ln_deriv_ln(lv.ln_q()),
        }
    }

    /// Mass of the interval between two levels.
    pub fn mass(&self, lo: Level, hi: Level) -> f64 {
        match self {
            Measure::Lebesgue => {
                if hi.t() <= 0.5 {
                    hi.t() - lo.t()
                } else {
                    lo.q() - hi.q()
                }
            }
            Measure::Distorted(w) => w.eval_ln(lo.ln_q()) - w.eval_ln(hi.ln_q()),
        }
    }
}

/// Integrates `f(t) dμ(t)` between two levels.
///
/// The lower half is integrated in `ln t` and the upper half in
/// `-ln(1 - t)`, in panels of doubling width, so that integrable
/// singularities at either end and mass lying within `1e-16` of 1 are
/// both resolved. Infinite tails stop once the remaining mass times the
/// integrand falls below `cfg.tail_tol`.
pub fn integrate_levels<F>(
    lo: Level,
    hi: Level,
    measure: Measure<'_>,
    mut f: F,
    cfg: &QuadConfig,
) -> Result<QuadResult>
where
    F: FnMut(Level) -> Result<f64>,
{
    let mut total = QuadResult::empty();
    if !lo.lt(&hi) {
        return Ok(total);
    }
    let mid = Level::new(0.5);
    let panel_cfg = QuadConfig { abs_tol: cfg.abs_tol / 8.0, ..*cfg };

    if lo.t() < 0.5 {
        let top = if hi.t() < 0.5 { hi } else { mid };
        let r_a = lo.ln_t();
        let mut edge = top.ln_t();
        let mut width = 0.5;
        let mut quiet = 0;
        loop {
            let next = (edge - width).max(r_a);
            let part = adaptive(
                |r| {
                    let lv = Level::from_ln_t(r);
                    let v = f(lv)?;
                    Ok(weighted(v, measure.ln_density(lv) + r))
                },
                next,
                edge,
                &panel_cfg,
            )?;
            total.absorb(part);
            if next <= r_a {
                break;
            }
            let lv = Level::from_ln_t(next);
            let tail = measure.mass(Level::zero(), lv).abs() * f(lv)?.abs().max(1e-300);
            quiet = if tail < cfg.tail_tol { quiet + 1 } else { 0 };
            if quiet >= 2 || next < -740.0 {
                total.abs_err += tail;
                break;
            }
            edge = next;
            width *= 2.0;
        }
    }

    if mid.lt(&hi) {
        let bottom = if mid.lt(&lo) { lo } else { mid };
        let s_b = -hi.ln_q();
        let mut edge = -bottom.ln_q();
        let mut width = 0.5;
        let mut quiet = 0;
        loop {
            let next = (edge + width).min(s_b);
            let part = adaptive(
                |s| {
                    let lv = Level::from_ln_q(-s);
                    let v = f(lv)?;
                    Ok(weighted(v, measure.ln_density(lv) - s))
                },
                edge,
                next,
                &panel_cfg,
            )?;
            total.absorb(part);
            if next >= s_b {
                break;
            }
            let lv = Level::from_ln_q(-next);
            let tail = measure.mass(lv, Level::one()).abs() * f(lv)?.abs().max(1e-300);
            quiet = if tail < cfg.tail_tol { quiet + 1 } else { 0 };
            if quiet >= 2 || next > 1e15 {
                total.abs_err += tail;
                if quiet < 2 {
                    total.converged = false;
                }
                break;
            }
            edge = next;
            width *= 2.0;
        }
    }
    Ok(total)
}

fn weighted(v: f64, ln_weight: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * ln_weight.exp()
    }
}
