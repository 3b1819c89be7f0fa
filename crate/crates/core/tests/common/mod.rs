#![allow(dead_code)]

use riskshare::economy::{solve_allocation, AllocationDistribution, Economy};
use riskshare::envelope::build_envelope;
use riskshare::WeightingFunction;

/// `x ↦ [ln(α x^{α-1} e^x (1 - e^{-x}) + 1)]^{1/α}`, whose fixed point is
/// `-ln(1 - p*)` for an inverse-S Prelec weighting.
pub fn prelec_fixed_point_map(alpha: f64, x: f64) -> f64 {
    (alpha * x.powf(alpha - 1.0) * x.exp() * (-(-x).exp_m1()) + 1.0).ln().powf(1.0 / alpha)
}

/// Nontrivial fixed point of the map. Plain iteration is repelled from it
/// toward 0, so scan `[0.01, 60]` for a sign change of `x - map(x)` and
/// bisect.
pub fn prelec_fixed_point(alpha: f64) -> f64 {
    let g = |x: f64| x - prelec_fixed_point_map(alpha, x);
    let mut lo = 0.01;
    while g(lo) * g(lo + 0.01) > 0.0 {
        lo += 0.01;
        assert!(lo < 60.0, "no fixed point below 60");
    }
    let mut hi = lo + 0.01;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) * g(lo) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Closed-form S-shaped Prelec tangent point.
pub fn prelec_s_tangent(alpha: f64) -> f64 {
    -(-alpha.powf(-1.0 / (alpha - 1.0))).exp_m1()
}

pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// CARA roster `β = (0.5, 0.5, 2)` with unit weights and `w = 0`.
pub fn baseline_economy(w: WeightingFunction) -> Economy {
    Economy::cara(w, 0.5, &[0.5, 2.0], &[1.0, 1.0], 0.0).unwrap()
}

pub fn baseline_allocation(w: WeightingFunction) -> AllocationDistribution {
    let env = build_envelope(&w).unwrap();
    solve_allocation(&baseline_economy(w), &env).unwrap()
}

/// Two-agent nudging economy: `β_1 = 0.5`, one EU agent with `β_2 = 0.4`.
pub fn nudge_economy(alpha: f64) -> Economy {
    Economy::cara(WeightingFunction::prelec(alpha).unwrap(), 0.5, &[0.4], &[1.0], 1.0).unwrap()
}

/// Composite Simpson rule on `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Kolmogorov-Smirnov distance between the empirical defective CDF of the
/// continuous part of agent `agent`'s payoff and the CDF obtained by
/// integrating the analytic density, checked at every 50th order statistic.
pub fn ks_distance(alloc: &AllocationDistribution, agent: usize, draws: usize, seed: u64) -> f64 {
    let laws = alloc.laws().unwrap();
    let law = &laws[agent];
    let (a, b) = law.continuous[0].support;
    let atoms: Vec<f64> = law.atoms.iter().map(|x| x.location).collect();
    let samples = alloc.monte_carlo(draws, seed).unwrap();
    let mut cont: Vec<f64> = samples
        .iter()
        .map(|p| p[agent])
        .filter(|x| atoms.iter().all(|l| (x - l).abs() > 1e-12) && *x > a && *x < b)
        .collect();
    cont.sort_by(|x, y| x.total_cmp(y));
    let n = draws as f64;

    let mut worst = 0.0_f64;
    let mut acc = 0.0;
    let mut prev = a.max(cont[0] - 1.0);
    // mass below the first checkpoint that lies left of `prev`
    if prev > a {
        acc = alloc.continuous_cdf(agent, prev).unwrap();
    }
    for (i, x) in cont.iter().enumerate().step_by(50) {
        acc += simpson(|s| alloc.density(agent, s).unwrap(), prev, *x, 64);
        prev = *x;
        let below = i as f64 / n;
        let upto = (i + 1) as f64 / n;
        worst = worst.max((acc - below).abs()).max((acc - upto).abs());
    }
    worst
}
