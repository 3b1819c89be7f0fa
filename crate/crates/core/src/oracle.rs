//! Brute-force checks on finite, equiprobable state spaces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distortion::WeightingFunction;
use crate::economy::{borch_deviation, solve_allocation, Economy, UtilityFunction};
use crate::envelope::build_hull_on_points;
use crate::error::{Error, Result};

/// Choquet integral of `u(X)` under `T` for `m` equiprobable outcomes.
pub fn discrete_rdu(outcomes: &[f64], u: &UtilityFunction, t: &WeightingFunction) -> f64 {
    let m = outcomes.len();
    let mut sorted = outcomes.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut prev = 0.0;
    let mut total = 0.0;
    for (k, x) in sorted.iter().enumerate() {
        let next = t.conj_eval((k + 1) as f64 / m as f64);
        total += u.value(*x) * (next - prev);
        prev = next;
    }
    total
}

/// An allocation on `m` equiprobable states; rows are agents, RDU first.
#[derive(Debug, Clone)]
pub struct DiscreteEconomy {
    pub m: usize,
    pub economy: Economy,
    pub allocation: Vec<Vec<f64>>,
}

impl DiscreteEconomy {
    pub fn new(economy: Economy, allocation: Vec<Vec<f64>>) -> Result<Self> {
        let m = allocation.first().map_or(0, |r| r.len());
        if m < 2 {
            return Err(Error::Config("need at least two states".into()));
        }
        if allocation.len() != economy.n() || allocation.iter().any(|r| r.len() != m) {
            return Err(Error::Config("allocation must be an n × m matrix".into()));
        }
        let d = DiscreteEconomy { m, economy, allocation };
        let err = d.feasibility_error();
        if err > 1e-9 {
            return Err(Error::Config(format!("state sums miss the endowment by {err}")));
        }
        Ok(d)
    }

    /// `U_1(X_1) + Σ λ_j E[u_j(X_j)]`.
    pub fn welfare(&self) -> f64 {
        welfare_of(&self.economy, &self.allocation)
    }

    pub fn feasibility_error(&self) -> f64 {
        (0..self.m)
            .map(|k| (self.allocation.iter().map(|r| r[k]).sum::<f64>() - self.economy.endowment).abs())
            .fold(0.0, f64::max)
    }

    pub fn borch_deviation(&self) -> f64 {
        borch_deviation(&self.allocation[1..], &self.economy.eu_agents, &self.economy.weights)
    }
}

fn welfare_of(econ: &Economy, alloc: &[Vec<f64>]) -> f64 {
    let mut total = discrete_rdu(&alloc[0], &econ.rdu_utility, &econ.rdu_weighting);
    for ((u, l), row) in econ.eu_agents.iter().zip(&econ.weights).zip(&alloc[1..]) {
        total += l * row.iter().map(|x| u.value(*x)).sum::<f64>() / row.len() as f64;
    }
    total
}

/// Exact optimum on `m` equiprobable states: the envelope is the hull of
/// `T̃` at `k/m`, and payoffs are read off at the midpoints `(k - 1/2)/m`.
pub fn discretized_closed_form(econ: &Economy, m: usize) -> Result<DiscreteEconomy> {
    let ts: Vec<f64> = (0..=m).map(|k| k as f64 / m as f64).collect();
    let env = build_hull_on_points(&econ.rdu_weighting, &ts)?;
    let alloc = solve_allocation(econ, &env)?;
    DiscreteEconomy::new(econ.clone(), alloc.payoff_matrix(m)?)
}

/// All pairwise products of state-ordered increments are `>= -1e-12`.
pub fn comonotone_check(rows: &[Vec<f64>]) -> bool {
    for (i, a) in rows.iter().enumerate() {
        for b in &rows[i + 1..] {
            for k in 0..a.len() {
                for l in k + 1..a.len() {
                    if (a[l] - a[k]) * (b[l] - b[k]) < -1e-12 {
                        return false;
                    }
                }
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub starts: usize,
    /// Per-state wealth levels of the starting grid.
    pub grid_levels: usize,
    /// Starting payoffs lie in `[-range, range]` before rebalancing.
    pub range: f64,
    /// Smallest transfer tried by the polish.
    pub min_step: f64,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { starts: 8, grid_levels: 41, range: 2.0, min_step: 1e-9, seed: 42 }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub best: DiscreteEconomy,
    pub welfare: f64,
}

/// Multi-start local search over feasible allocations.
///
/// Moves shift wealth between two agents, either in one state or in every
/// state at once; the step starts at one grid spacing and halves whenever
/// no move improves.
pub fn brute_force_welfare(econ: &Economy, m: usize, opts: &OracleOptions) -> Result<OracleResult> {
    if m < 2 || m > 12 || econ.n() > 3 {
        return Err(Error::Config("the oracle handles m in 2..=12 states and at most 3 agents".into()));
    }
    if opts.grid_levels < 2 || opts.starts == 0 {
        return Err(Error::Config("oracle needs at least one start and two grid levels".into()));
    }
    let n = econ.n();
    let w = econ.endowment;
    let spacing = 2.0 * opts.range / (opts.grid_levels - 1) as f64;
    let snap = |x: f64| (((x + opts.range) / spacing).round() * spacing - opts.range).clamp(-opts.range, opts.range);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts: Vec<Vec<Vec<f64>>> = Vec::with_capacity(opts.starts);
    starts.push((0..n).map(|_| vec![w / n as f64; m]).collect());
    while starts.len() < opts.starts {
        let mut a: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| snap(rng.gen_range(-opts.range..=opts.range))).collect()).collect();
        for k in 0..m {
            let others: f64 = a[..n - 1].iter().map(|r| r[k]).sum();
            a[n - 1][k] = w - others;
        }
        starts.push(a);
    }

    let polished: Vec<(f64, Vec<Vec<f64>>)> = starts
        .into_par_iter()
        .map(|mut a| {
            let mut best = welfare_of(econ, &a);
            let mut step = spacing;
            while step >= opts.min_step {
                let mut improved = false;
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        for state in 0..=m {
                            let cols: Vec<usize> = if state == m { (0..m).collect() } else { vec![state] };
                            for &c in &cols {
                                a[i][c] += step;
                                a[j][c] -= step;
                            }
                            let v = welfare_of(econ, &a);
                            if v > best {
                                best = v;
                                improved = true;
                            } else {
                                for &c in &cols {
                                    a[i][c] -= step;
                                    a[j][c] += step;
                                }
                            }
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            (best, a)
        })
        .collect();

    let (welfare, allocation) = polished
        .into_iter()
        .fold(None::<(f64, Vec<Vec<f64>>)>, |acc, cand| match acc {
            Some(b) if b.0 >= cand.0 => Some(b),
            _ => Some(cand),
        })
        .expect("at least one start");
    Ok(OracleResult { best: DiscreteEconomy { m, economy: econ.clone(), allocation }, welfare })
}

/// A random small CARA instance: `m ∈ {6, 8, 10}`, coefficients and
/// weights in `[0.3, 3]`, Prelec `α ∈ {0.4, 0.8, 1.2, 2}`.
pub fn random_instance(rng: &mut impl Rng) -> Result<(Economy, usize)> {
    let m = [6, 8, 10][rng.gen_range(0..3)];
    let alpha = [0.4, 0.8, 1.2, 2.0][rng.gen_range(0..4)];
    let mut draw = || rng.gen_range(0.3..=3.0);
    let (b1, b2, b3, l2, l3) = (draw(), draw(), draw(), draw(), draw());
    let econ = Economy::cara(WeightingFunction::prelec(alpha)?, b1, &[b2, b3], &[l2, l3], 0.0)?;
    Ok((econ, m))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleVerdict {
    pub m: usize,
    pub alpha: Option<f64>,
    pub closed_form_welfare: f64,
    pub oracle_welfare: f64,
    pub borch: f64,
    pub comonotone: bool,
    pub feasibility: f64,
    pub pass: bool,
}

/// Compares the discretized closed form with the oracle on one instance.
pub fn verify_instance(econ: &Economy, m: usize, opts: &OracleOptions) -> Result<OracleVerdict> {
    let closed = discretized_closed_form(econ, m)?;
    let oracle = brute_force_welfare(econ, m, opts)?;
    let closed_form_welfare = closed.welfare();
    let borch = closed.borch_deviation();
    let comonotone = comonotone_check(&closed.allocation[1..]);
    let feasibility = closed.feasibility_error();
    let pass = closed_form_welfare >= oracle.welfare - 1e-4 && borch < 1e-8 && comonotone && feasibility < 1e-8;
    let alpha = match econ.rdu_weighting {
        WeightingFunction::Prelec { alpha } => Some(alpha),
        _ => None,
    };
    Ok(OracleVerdict { m, alpha, closed_form_welfare, oracle_welfare: oracle.welfare, borch, comonotone, feasibility, pass })
}
