use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::roots::solve_increasing;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied utility with its first two derivatives on a working domain.
#[derive(Clone)]
pub struct GenericUtility {
    pub name: String,
    u: ScalarFn,
    du: ScalarFn,
    d2u: ScalarFn,
    domain: (f64, f64),
}

impl fmt::Debug for GenericUtility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericUtility").field("name", &self.name).field("domain", &self.domain).finish()
    }
}

#[derive(Clone, Debug)]
pub enum UtilityFunction {
    /// `u(x) = -exp(-beta x) / beta`.
    Cara { beta: f64 },
    Generic(GenericUtility),
}

impl UtilityFunction {
    pub fn cara(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Config(format!("CARA coefficient must be positive, got {beta}")));
        }
        Ok(UtilityFunction::Cara { beta })
    }

    /// Builds a generic utility and checks `u' > 0`, `u'' < 0` on a grid of
    /// the declared domain.
    pub fn generic(
        name: impl Into<String>,
        u: ScalarFn,
        du: ScalarFn,
        d2u: ScalarFn,
        domain: (f64, f64),
    ) -> Result<Self> {
        if !(domain.0 < domain.1) {
            return Err(Error::Config("utility domain must be a nonempty interval".into()));
        }
        let util = UtilityFunction::Generic(GenericUtility { name: name.into(), u, du, d2u, domain });
        util.check_concavity(201)?;
        Ok(util)
    }

    /// A generic wrapper around CARA, used to exercise the bisection paths.
    pub fn cara_as_generic(beta: f64) -> Result<Self> {
        UtilityFunction::generic(
            format!("cara({beta})"),
            Arc::new(move |x: f64| -(-beta * x).exp() / beta),
            Arc::new(move |x: f64| (-beta * x).exp()),
            Arc::new(move |x: f64| -beta * (-beta * x).exp()),
            (-50.0 / beta, 50.0 / beta),
        )
    }

    pub fn beta(&self) -> Option<f64> {
        match self {
            UtilityFunction::Cara { beta } => Some(*beta),
            UtilityFunction::Generic(_) => None,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            UtilityFunction::Cara { beta } => -(-beta * x).exp() / beta,
            UtilityFunction::Generic(g) => (g.u)(x),
        }
    }

    pub fn marginal(&self, x: f64) -> f64 {
        match self {
            UtilityFunction::Cara { beta } => (-beta * x).exp(),
            UtilityFunction::Generic(g) => (g.du)(x),
        }
    }

    pub fn marginal2(&self, x: f64) -> f64 {
        match self {
            UtilityFunction::Cara { beta } => -beta * (-beta * x).exp(),
            UtilityFunction::Generic(g) => (g.d2u)(x),
        }
    }

    pub fn ln_marginal(&self, x: f64) -> f64 {
        match self {
            UtilityFunction::Cara { beta } => -beta * x,
            UtilityFunction::Generic(g) => (g.du)(x).ln(),
        }
    }

    /// `-u''(x) / u'(x)`.
    pub fn absolute_risk_aversion(&self, x: f64) -> f64 {
        match self {
            UtilityFunction::Cara { beta } => *beta,
            UtilityFunction::Generic(g) => -(g.d2u)(x) / (g.du)(x),
        }
    }

    /// Inverse marginal utility `I(z)` evaluated at `z = exp(ln_z)`.
    pub fn inv_marginal_ln(&self, ln_z: f64) -> Result<f64> {
        match self {
            UtilityFunction::Cara { beta } => Ok(-ln_z / beta),
            UtilityFunction::Generic(g) => {
                solve_increasing(|x| -(g.du)(x).ln(), -ln_z, g.domain.0, g.domain.1, 1e-13)
            }
        }
    }

    /// `u^{-1}(v)`.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        match self {
            UtilityFunction::Cara { beta } => {
                if v >= 0.0 {
                    return Err(Error::NumericDomain(format!("CARA utility takes only negative values, got {v}")));
                }
                Ok(-(-beta * v).ln() / beta)
            }
            UtilityFunction::Generic(g) => solve_increasing(|x| (g.u)(x), v, g.domain.0, g.domain.1, 1e-13),
        }
    }

    /// Grid check of `u' > 0`, `u'' < 0` and `I(u'(x)) = x` on the working domain.
    pub fn check_concavity(&self, n: usize) -> Result<()> {
        let (lo, hi) = match self {
            UtilityFunction::Cara { beta } => (-10.0 / beta, 10.0 / beta),
            UtilityFunction::Generic(g) => g.domain,
        };
        for k in 0..n {
            let x = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            let (d1, d2) = (self.marginal(x), self.marginal2(x));
            if !(d1 > 0.0 && d2 < 0.0) {
                return Err(Error::Config(format!("utility is not increasing and strictly concave at x = {x}")));
            }
            let back = self.inv_marginal_ln(d1.ln())?;
            if (back - x).abs() > 1e-9 * (1.0 + x.abs()) {
                return Err(Error::Config(format!("inverse marginal fails to round-trip at x = {x}")));
            }
        }
        Ok(())
    }
}
