use std::io::{BufWriter, Write};

use serde::Serialize;

use super::config::{ExperimentConfig, Solver};
use super::io::Header;
use super::run::{run_seed, SummaryMetrics};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::phy::PerItem;

/// One (sweep point, solver) cell pooled over the configured seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub solver: Solver,
    pub wsr: f64,
    pub avg_per_vu_reward: f64,
    pub success_probability: f64,
}

fn ascending(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() || values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config(format!("{what} must be a nonempty strictly ascending list")));
    }
    Ok(())
}

/// Runs every (point, solver, seed) combination in parallel and pools seeds
/// per (point, solver). Rows come out in point-major, solver-minor order.
fn sweep(
    base: &ExperimentConfig,
    values: &[f64],
    solvers: &[Solver],
    mode: Parallelism,
    apply: impl Fn(&mut ExperimentConfig, f64) + Sync + Send,
) -> Result<Vec<SweepRow>> {
    let configs: Vec<ExperimentConfig> = values
        .iter()
        .map(|&v| {
            let mut c = base.clone();
            apply(&mut c, v);
            c.validate().map(|_| c)
        })
        .collect::<Result<_>>()?;
    let seeds = &base.seeds;
    let jobs = values.len() * solvers.len() * seeds.len();
    let runs = par::map_range(jobs, mode, |k| {
        let (p, rest) = (k / (solvers.len() * seeds.len()), k % (solvers.len() * seeds.len()));
        run_seed(&configs[p], solvers[rest / seeds.len()], seeds[rest % seeds.len()])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    runs.chunks(seeds.len())
        .enumerate()
        .map(|(cell, group)| {
            let m = SummaryMetrics::from_logs(group.iter().map(|r| &r.log))?;
            Ok(SweepRow {
                value: values[cell / solvers.len()],
                solver: solvers[cell % solvers.len()],
                wsr: m.wsr,
                avg_per_vu_reward: m.avg_per_vu_reward,
                success_probability: m.success_probability,
            })
        })
        .collect()
}

/// SINR floor sweep: every vehicle's threshold set to each value in dB.
pub fn sweep_sinr_threshold(
    base: &ExperimentConfig,
    thresholds_db: &[f64],
    solvers: &[Solver],
    mode: Parallelism,
) -> Result<Vec<SweepRow>> {
    ascending(thresholds_db, "thresholds")?;
    sweep(base, thresholds_db, solvers, mode, |c, t| c.phy.gamma_min_db = PerItem::Uniform(t))
}

/// Coverage radius sweep in meters. Channels depend only on the seed and
/// geometry, so they stay fixed across radii.
pub fn sweep_coverage_radius(
    base: &ExperimentConfig,
    radii: &[f64],
    solvers: &[Solver],
    mode: Parallelism,
) -> Result<Vec<SweepRow>> {
    ascending(radii, "radii")?;
    sweep(base, radii, solvers, mode, |c, r| c.scenario.aps.coverage_radius = r)
}

/// Columns: `parameter` (named by `column`), solver, wsr, avg_per_vu_reward,
/// success_probability.
pub fn write_sweep_csv(w: impl Write, header: &Header, column: &str, rows: &[SweepRow]) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "# config_hash={}", header.config_hash)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([column, "solver", "wsr", "avg_per_vu_reward", "success_probability"])?;
    for r in rows {
        csv.write_record([
            r.value.to_string(),
            r.solver.name().to_string(),
            r.wsr.to_string(),
            r.avg_per_vu_reward.to_string(),
            r.success_probability.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
