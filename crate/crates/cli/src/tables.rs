//! Tables shared by the subcommands and the figure recipes.

use riskshare::envelope::EnvelopeResult;
use riskshare::numeric::level::Level;
use riskshare::{AllocationDistribution, Result};

use crate::table::Table;

/// Quantile levels used to cut off unbounded density supports.
const TAIL: f64 = 1e-4;

/// `(t, Ttilde, delta, delta_prime)` on `n` midpoints of `[0, 1]`.
pub fn envelope_table(env: &EnvelopeResult, n: usize) -> Table {
    let mut t = Table::new(["t", "Ttilde", "delta", "delta_prime"]);
    for k in 0..n {
        let x = (k as f64 + 0.5) / n as f64;
        t.push(vec![x, env.ttilde(x), env.delta(x), env.delta_prime(x)]);
    }
    t
}

/// `(t, x1, ..., xn)` on `n` midpoints.
pub fn payoff_table(alloc: &AllocationDistribution, n: usize) -> Result<Table> {
    let mat = alloc.payoff_matrix(n)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=alloc.n()).map(|i| format!("x{i}")));
    let mut t = Table::new(header);
    for k in 0..n {
        let mut row = vec![(k as f64 + 0.5) / n as f64];
        row.extend(mat.iter().map(|r| r[k]));
        t.push(row);
    }
    Ok(t)
}

/// Density samples of the continuous parts, one block per agent; `tag`
/// fills a leading column when several allocations share a table.
pub fn density_rows(alloc: &AllocationDistribution, agents: &[usize], n: usize, tag: Option<f64>, out: &mut Table) -> Result<()> {
    let laws = alloc.laws()?;
    for &agent in agents {
        let q_lo = alloc.quantile(agent, Level::new(TAIL))?;
        let q_hi = alloc.quantile(agent, Level::new(1.0 - TAIL))?;
        for part in &laws[agent].continuous {
            let (a, b) = part.support;
            let (a, b) = (a.max(q_lo), b.min(q_hi));
            if !(b > a) {
                continue;
            }
            for k in 0..n {
                let x = a + (k as f64 + 0.5) * (b - a) / n as f64;
                let mut row: Vec<f64> = tag.into_iter().collect();
                row.extend([(agent + 1) as f64, x, alloc.density(agent, x)?]);
                out.push(row);
            }
        }
    }
    Ok(())
}

pub fn atom_rows(alloc: &AllocationDistribution, agents: &[usize], tag: Option<f64>, out: &mut Table) -> Result<()> {
    let laws = alloc.laws()?;
    for &agent in agents {
        for atom in &laws[agent].atoms {
            let mut row: Vec<f64> = tag.into_iter().collect();
            row.extend([(agent + 1) as f64, atom.location, atom.mass]);
            out.push(row);
        }
    }
    Ok(())
}

pub fn density_header(tag: Option<&str>) -> Vec<String> {
    tag.into_iter().chain(["agent", "x", "density"]).map(String::from).collect()
}

pub fn atom_header(tag: Option<&str>) -> Vec<String> {
    tag.into_iter().chain(["agent", "location", "mass"]).map(String::from).collect()
}
