use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use riskshare::economy::{borch_check, EconomyConfig};
use riskshare::nudge::{optimal_effort, NudgeConfig, NudgeRow};
use riskshare::welfare::{ce_sweep, welfare_report};
use riskshare::{build_envelope, solve_allocation, Economy, WeightingFunction};
use serde::Serialize;

mod recipes;
mod spec;
mod table;
mod tables;

use table::{Output, Table};
use tables::*;

#[derive(Parser)]
#[command(name = "riskshare", version, about = "Risk sharing with a rank-dependent utility agent")]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// Economy JSON file
    #[arg(long, global = true, env = "RISKSHARE_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true, default_value = ".", env = "RISKSHARE_OUT")]
    out: PathBuf,

    /// Rows per table
    #[arg(long, global = true, default_value_t = 1001, env = "RISKSHARE_GRID")]
    grid: usize,

    /// Seed for Monte Carlo draws
    #[arg(long, global = true, default_value_t = 42, env = "RISKSHARE_SEED")]
    seed: u64,

    /// Tolerance on the optimal effort M*
    #[arg(long, global = true, env = "RISKSHARE_TOL")]
    tol: Option<f64>,

    /// Weighting override, e.g. prelec:0.5, tk:0.6, heu:0.5,0.5, linear
    #[arg(long, global = true)]
    weighting: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Convex envelope of the conjugate weighting
    Envelope,
    /// Optimal payoffs on a grid of the uniform variate
    Allocate {
        /// Also write this many Monte Carlo payoff draws
        #[arg(long, default_value_t = 0)]
        draws: usize,
    },
    /// Atoms and densities of every agent's payoff
    Density,
    /// Certainty equivalents, optionally along alpha=start:stop:step
    Ce {
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Optimal nudging effort
    Nudge {
        /// Curvature of the effort share f(M) = 1 - (1 - M/w)^k
        #[arg(long, default_value_t = 20.0)]
        k: f64,
        /// Prelec alphas as start:stop:step
        #[arg(long)]
        alpha_sweep: Option<String>,
    },
    /// Data behind a figure
    Sweep {
        #[arg(long, required_unless_present = "list")]
        recipe: Option<String>,
        /// List the available recipes
        #[arg(long)]
        list: bool,
    },
}

pub enum Failure {
    Config(String),
    Numeric(String),
}

impl From<riskshare::Error> for Failure {
    fn from(e: riskshare::Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numeric(format!("i/o error: {e}"))
    }
}

pub type Outcome<T> = std::result::Result<T, Failure>;

fn config_err<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Config(msg.into()))
}

/// Economy from `--config`, else `fallback`; `--weighting` overrides either.
fn economy(g: &Global, fallback: impl FnOnce() -> riskshare::Result<Economy>) -> Outcome<Economy> {
    let econ = match &g.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .or_else(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
            let cfg: EconomyConfig =
                serde_json::from_str(&text).or_else(|e| config_err(format!("bad config {}: {e}", path.display())))?;
            cfg.to_economy()?
        }
        None => fallback()?,
    };
    Ok(match weighting(g)? {
        Some(w) => econ.with_weighting(w),
        None => econ,
    })
}

fn weighting(g: &Global) -> Outcome<Option<WeightingFunction>> {
    g.weighting.as_deref().map(spec::parse_weighting).transpose().map_err(Failure::Config)
}

/// Roster `β = (0.5, 0.5, 2)` with unit weights and `w = 0`.
pub fn baseline(w: WeightingFunction) -> riskshare::Result<Economy> {
    Economy::cara(w, 0.5, &[0.5, 2.0], &[1.0, 1.0], 0.0)
}

/// Two agents, `β_1 = 0.5`, `β_2 = 0.4`, `w = 1`.
pub fn nudge_baseline(w: WeightingFunction) -> riskshare::Result<Economy> {
    Economy::cara(w, 0.5, &[0.4], &[1.0], 1.0)
}

#[derive(Serialize)]
struct AllocationSummary {
    weighting: WeightingFunction,
    fi_mass: f64,
    pstar: Option<f64>,
    borch_deviation: f64,
    feasibility_error: f64,
    atom_mass: Vec<f64>,
}

fn check_grid(g: &Global) -> Outcome<()> {
    if g.grid < 2 {
        return config_err(format!("--grid must be at least 2, got {}", g.grid));
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome<Vec<PathBuf>> {
    let g = &cli.global;
    check_grid(g)?;
    if let Some(tol) = g.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return config_err(format!("--tol must be positive, got {tol}"));
        }
    }
    if let Command::Sweep { list: true, .. } = cli.command {
        for name in recipes::NAMES {
            println!("{name}");
        }
        return Ok(Vec::new());
    }
    let mut out = Output::new(&g.out)?;
    match &cli.command {
        Command::Envelope => {
            let w = match weighting(g)? {
                Some(w) => w,
                None => economy(g, || baseline(WeightingFunction::Prelec { alpha: 0.8 }))?.rdu_weighting,
            };
            let env = build_envelope(&w)?;
            out.table("envelope", &envelope_table(&env, g.grid))?;
            out.json("envelope", &env.summary())?;
        }
        Command::Allocate { draws } => {
            let econ = economy(g, || baseline(WeightingFunction::Prelec { alpha: 0.8 }))?;
            let env = build_envelope(&econ.rdu_weighting)?;
            let alloc = solve_allocation(&econ, &env)?;
            out.table("allocation", &payoff_table(&alloc, g.grid)?)?;
            if *draws > 0 {
                let samples = alloc.monte_carlo(*draws, g.seed)?;
                let mut t = Table::new((1..=alloc.n()).map(|i| format!("x{i}")));
                for row in samples {
                    t.push(row);
                }
                out.table("samples", &t)?;
            }
            let summary = AllocationSummary {
                weighting: econ.rdu_weighting.clone(),
                fi_mass: env.fi_mass(),
                pstar: env.pstar(),
                borch_deviation: borch_check(&alloc)?,
                feasibility_error: alloc.feasibility_error(g.grid)?,
                atom_mass: alloc.laws()?.iter().map(|l| l.atom_mass()).collect(),
            };
            out.json("allocation", &summary)?;
        }
        Command::Density => {
            let econ = economy(g, || baseline(WeightingFunction::Prelec { alpha: 0.8 }))?;
            let alloc = solve_allocation(&econ, &build_envelope(&econ.rdu_weighting)?)?;
            let agents: Vec<usize> = (0..alloc.n()).collect();
            let mut dens = Table::new(density_header(None));
            density_rows(&alloc, &agents, g.grid, None, &mut dens)?;
            let mut atoms = Table::new(atom_header(None));
            atom_rows(&alloc, &agents, None, &mut atoms)?;
            out.table("density", &dens)?;
            out.table("atoms", &atoms)?;
        }
        Command::Ce { sweep } => {
            let econ = economy(g, || baseline(WeightingFunction::Prelec { alpha: 0.8 }))?;
            let n = econ.n();
            let mut header = Vec::new();
            if sweep.is_some() {
                header.push("alpha".to_string());
            }
            header.extend((1..=n).map(|i| format!("ce{i}")));
            header.push("ce_sum".into());
            let mut t = Table::new(header);
            match sweep {
                Some(s) => {
                    let alphas = spec::parse_sweep(s).map_err(Failure::Config)?;
                    for row in ce_sweep(&econ, &alphas)? {
                        let mut r = vec![row.alpha];
                        r.extend(row.ce);
                        r.push(row.ce_sum);
                        t.push(r);
                    }
                }
                None => {
                    let alloc = solve_allocation(&econ, &build_envelope(&econ.rdu_weighting)?)?;
                    let report = welfare_report(&alloc)?;
                    let mut r = report.ce_per_agent.clone();
                    r.push(report.ce_sum);
                    t.push(r);
                    out.json("ce", &report)?;
                }
            }
            out.table("ce", &t)?;
        }
        Command::Nudge { k, alpha_sweep } => {
            let econ = economy(g, || nudge_baseline(WeightingFunction::Prelec { alpha: 0.4 }))?;
            match alpha_sweep {
                Some(s) => {
                    let alphas = spec::parse_range(s).map_err(Failure::Config)?;
                    let rows = nudge_sweep(&econ, *k, g.tol, &alphas)?;
                    out.table("nudge", &nudge_table(&rows))?;
                }
                None => {
                    let mut cfg = NudgeConfig::new(econ, *k)?;
                    if let Some(tol) = g.tol {
                        cfg.tol = tol;
                    }
                    let sol = optimal_effort(&cfg)?;
                    for w in &sol.warnings {
                        eprintln!("warning: {w}");
                    }
                    let mut curve = Table::new(["M", "V"]);
                    for (m, v) in &sol.value_curve {
                        curve.push(vec![*m, *v]);
                    }
                    out.table("nudge_value", &curve)?;
                    out.json("nudge", &sol)?;
                }
            }
        }
        Command::Sweep { recipe, .. } => {
            let name = recipe.as_deref().expect("clap requires --recipe without --list");
            recipes::run(name, g, &mut out)?;
        }
    }
    Ok(out.written().to_vec())
}

pub fn nudge_sweep(econ: &Economy, k: f64, tol: Option<f64>, alphas: &[f64]) -> Outcome<Vec<NudgeRow>> {
    let rows = alphas
        .par_iter()
        .map(|&alpha| {
            let mut cfg = NudgeConfig::new(econ.with_weighting(WeightingFunction::prelec(alpha)?), k)?;
            if let Some(tol) = tol {
                cfg.tol = tol;
            }
            let sol = optimal_effort(&cfg)?;
            Ok(NudgeRow { alpha, m_star: sol.m_star, v_at_star: sol.value, fi_mass_at_star: sol.fi_mass })
        })
        .collect::<riskshare::Result<Vec<_>>>()?;
    Ok(rows)
}

pub fn nudge_table(rows: &[NudgeRow]) -> Table {
    let mut t = Table::new(["alpha", "M_star", "V_at_star", "fi_mass_at_star"]);
    for r in rows {
        t.push(vec![r.alpha, r.m_star, r.v_at_star, r.fi_mass_at_star]);
    }
    t
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
