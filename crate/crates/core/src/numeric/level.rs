use std::f64::consts::LN_2;

/// A point of the unit interval that keeps both `ln t` and `ln(1 - t)`.
///
/// Points within a few ulps of 1 cannot be told apart as `f64`, yet the
/// tail of a Prelec conjugate carries real mass there. Carrying the logs
/// lets integrals reach far past `1 - 1e-16`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    t: f64,
    ln_t: f64,
    ln_q: f64,
}

impl Level {
    pub fn new(t: f64) -> Level {
        let t = t.clamp(0.0, 1.0);
        let ln_q = if t < 0.5 { (-t).ln_1p() } else { (1.0 - t).ln() };
        Level { t, ln_t: t.ln(), ln_q }
    }

    /// Level with `ln(1 - t) = ln_q`.
    pub fn from_ln_q(ln_q: f64) -> Level {
        let ln_q = ln_q.min(0.0);
        let t = -ln_q.exp_m1();
        Level { t, ln_t: ln_complement(ln_q), ln_q }
    }

    /// Level with `ln t = ln_t`.
    pub fn from_ln_t(ln_t: f64) -> Level {
        let ln_t = ln_t.min(0.0);
        Level { t: ln_t.exp(), ln_t, ln_q: ln_complement(ln_t) }
    }

    pub fn zero() -> Level {
        Level::new(0.0)
    }

    pub fn one() -> Level {
        Level::new(1.0)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn ln_t(&self) -> f64 {
        self.ln_t
    }

    pub fn q(&self) -> f64 {
        self.ln_q.exp()
    }

    pub fn ln_q(&self) -> f64 {
        self.ln_q
    }

    /// The mirrored level `1 - t`.
    pub fn flip(&self) -> Level {
        Level { t: self.q(), ln_t: self.ln_q, ln_q: self.ln_t }
    }

    /// Ordering that stays exact in both tails.
    pub fn le(&self, other: &Level) -> bool {
        if self.t < 0.5 || other.t < 0.5 {
            self.ln_t <= other.ln_t
        } else {
            self.ln_q >= other.ln_q
        }
    }

    pub fn lt(&self, other: &Level) -> bool {
        self.le(other) && self != other
    }
}

/// `ln(1 - e^x)` for `x <= 0`.
pub fn ln_complement(x: f64) -> f64 {
    if x < -LN_2 {
        (-x.exp()).ln_1p()
    } else {
        (-x.exp_m1()).ln()
    }
}

/// `ln(e^a + e^b)`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if hi == f64::INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
