//! One recipe per figure; each writes the tables the figure plots.

use rayon::prelude::*;
use riskshare::nudge::nudged_envelope;
use riskshare::welfare::ce_sweep;
use riskshare::{build_envelope, solve_allocation, Economy, WeightingFunction};
use serde::Serialize;

use crate::table::{Output, Table};
use crate::tables::*;
use crate::{baseline, nudge_baseline, nudge_sweep, nudge_table, Failure, Global, Outcome};

pub const NAMES: [&str; 14] = [
    "fig1", "fig2a", "fig2b", "fig3", "fig4a", "fig4b", "fig5a", "fig5b", "fig5c", "fig6", "fig7", "fig8", "fig9",
    "fig10",
];

fn prelec(alpha: f64) -> WeightingFunction {
    WeightingFunction::Prelec { alpha }
}

/// `start + k step` for `k = 0..count`.
fn steps(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start + k as f64 * step).collect()
}

pub fn run(name: &str, g: &Global, out: &mut Output) -> Outcome<()> {
    match name {
        "fig1" => envelopes(g, out),
        "fig2a" => fi_curve(out, name, "alpha", &steps(0.05, 0.05, 200), prelec),
        "fig2b" => fi_curve(out, name, "gamma", &steps(0.05, 0.05, 200), |g| WeightingFunction::TverskyKahneman {
            gamma: g,
        }),
        "fig3" => allocation(g, out, name, baseline(prelec(0.8))?),
        "fig4a" => allocation(g, out, name, Economy::cara(prelec(0.8), 0.5, &[0.5, 0.7], &[1.0, 1.0], 0.0)?),
        "fig4b" => allocation(g, out, name, Economy::cara(prelec(0.8), 2.0, &[0.5, 2.0], &[1.0, 1.0], 0.0)?),
        "fig5a" => {
            let t2 = WeightingFunction::rescaled(prelec(0.5), 0.25)?;
            allocation(g, out, name, baseline(t2)?)
        }
        "fig5b" => {
            let t1 = WeightingFunction::rescaled(prelec(0.5).conjugate(), 0.25)?.conjugate();
            allocation(g, out, name, baseline(t1)?)
        }
        "fig5c" => allocation(g, out, name, baseline(prelec(1.2))?),
        "fig6" => heu_fi(out),
        "fig7" => allocation(g, out, name, baseline(WeightingFunction::hurwicz(0.5, 0.5)?)?),
        "fig8" => {
            let rows = ce_sweep(&baseline(WeightingFunction::Linear)?, &steps(0.1, 0.05, 59))?;
            let mut t = Table::new(["alpha", "ce1", "ce2", "ce3", "ce_sum"]);
            for r in rows {
                t.push(vec![r.alpha, r.ce[0], r.ce[1], r.ce[2], r.ce_sum]);
            }
            Ok(out.table(name, &t)?)
        }
        "fig9" => nudged_densities(g, out),
        "fig10" => {
            let rows = nudge_sweep(&nudge_baseline(WeightingFunction::Linear)?, 20.0, g.tol, &steps(0.1, 0.02, 46))?;
            Ok(out.table(name, &nudge_table(&rows))?)
        }
        _ => Err(Failure::Config(format!("unknown recipe {name:?}; available: {}", NAMES.join(", ")))),
    }
}

#[derive(Serialize)]
struct TangentInfo {
    alpha: f64,
    pstar: Option<f64>,
    inflection: Option<f64>,
    fi_mass: f64,
}

fn envelopes(g: &Global, out: &mut Output) -> Outcome<()> {
    let mut t = Table::new(["t", "Ttilde_a0.5", "delta_a0.5", "Ttilde_a2", "delta_a2"]);
    let a = build_envelope(&prelec(0.5))?;
    let b = build_envelope(&prelec(2.0))?;
    for k in 0..g.grid {
        let x = (k as f64 + 0.5) / g.grid as f64;
        t.push(vec![x, a.ttilde(x), a.delta(x), b.ttilde(x), b.delta(x)]);
    }
    out.table("fig1", &t)?;
    let info: Vec<TangentInfo> = [(0.5, &a), (2.0, &b)]
        .iter()
        .map(|(alpha, env)| TangentInfo {
            alpha: *alpha,
            pstar: env.pstar(),
            // inflection of T̃ is 1 minus that of T
            inflection: env.shape().inflection.map(|p| 1.0 - p),
            fi_mass: env.fi_mass(),
        })
        .collect();
    Ok(out.json("fig1", &info)?)
}

fn fi_curve(
    out: &mut Output,
    name: &str,
    param: &str,
    values: &[f64],
    family: impl Fn(f64) -> WeightingFunction + Sync,
) -> Outcome<()> {
    let fi = values
        .par_iter()
        .map(|&v| build_envelope(&family(v)).map(|e| e.fi_mass()))
        .collect::<riskshare::Result<Vec<f64>>>()?;
    let mut t = Table::new([param, "fi_mass"]);
    for (v, f) in values.iter().zip(fi) {
        t.push(vec![*v, f]);
    }
    Ok(out.table(name, &t)?)
}

fn heu_fi(out: &mut Output) -> Outcome<()> {
    let kappas = [0.1, 0.3, 0.5, 0.7, 0.9];
    let gammas = steps(0.0, 0.02, 51);
    let pairs: Vec<(f64, f64)> = kappas.iter().flat_map(|&k| gammas.iter().map(move |&g| (k, g))).collect();
    let fi = pairs
        .par_iter()
        .map(|&(kappa, gamma)| build_envelope(&WeightingFunction::hurwicz(gamma, kappa)?).map(|e| e.fi_mass()))
        .collect::<riskshare::Result<Vec<f64>>>()?;
    let mut t = Table::new(["kappa", "gamma", "fi_mass"]);
    for ((k, g), f) in pairs.iter().zip(fi) {
        t.push(vec![*k, *g, f]);
    }
    Ok(out.table("fig6", &t)?)
}

fn allocation(g: &Global, out: &mut Output, name: &str, econ: Economy) -> Outcome<()> {
    let alloc = solve_allocation(&econ, &build_envelope(&econ.rdu_weighting)?)?;
    let agents: Vec<usize> = (0..alloc.n()).collect();
    let mut dens = Table::new(density_header(None));
    density_rows(&alloc, &agents, g.grid, None, &mut dens)?;
    let mut atoms = Table::new(atom_header(None));
    atom_rows(&alloc, &agents, None, &mut atoms)?;
    out.table(&format!("{name}_payoffs"), &payoff_table(&alloc, g.grid)?)?;
    out.table(&format!("{name}_density"), &dens)?;
    Ok(out.table(&format!("{name}_atoms"), &atoms)?)
}

/// Density of `X_1` for `f(M) ∈ {0, 0.25, 0.5, 0.75, 1}`, Prelec `α = 0.4`.
fn nudged_densities(g: &Global, out: &mut Output) -> Outcome<()> {
    let econ = baseline(prelec(0.4))?;
    let base = build_envelope(&econ.rdu_weighting)?;
    let mut dens = Table::new(density_header(Some("f")));
    let mut atoms = Table::new(atom_header(Some("f")));
    for f in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let env = nudged_envelope(&base, f)?;
        let alloc = solve_allocation(&econ.with_weighting(env.weighting().clone()), &env)?;
        density_rows(&alloc, &[0], g.grid, Some(f), &mut dens)?;
        atom_rows(&alloc, &[0], Some(f), &mut atoms)?;
    }
    out.table("fig9_density", &dens)?;
    Ok(out.table("fig9_atoms", &atoms)?)
}
