use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vcell::actionspace::Environment;
use vcell::baselines::GenieTable;
use vcell::harness::{
    aggregate, fairness_report, read_episode_log, run, sweep_coverage_radius, sweep_sinr_threshold, write_genie_table,
    write_json, write_run, write_sweep_csv, ExperimentConfig, Header, Solver,
};
use vcell::par::Parallelism;
use vcell::{Error, Result};

#[derive(Parser)]
#[command(name = "vcell", version, about = "Vehicular virtual-cell downlink simulator and tabular RL solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults apply to every missing key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run only this seed instead of the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run seeds and sweep points one after another.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn mode(&self) -> Parallelism {
        if self.sequential {
            Parallelism::Sequential
        } else {
            Parallelism::Parallel
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a learning solver, evaluate it greedily, and write logs and tables.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        solver: Option<Solver>,
    },
    /// Evaluate any solver (learning solvers are trained first).
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        solver: Option<Solver>,
    },
    /// Write the genie optimum of every state.
    Genie {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep the SINR threshold (dB).
    SweepSinr {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "6,8,10,12,14")]
        thresholds: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "genie,sarl,random,equal")]
        solvers: Vec<Solver>,
    },
    /// Sweep the AP coverage radius (m).
    SweepRadius {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "100,150,200,250,300")]
        radii: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "genie,sarl")]
        solvers: Vec<Solver>,
    },
    /// Per-vehicle rate summary of an episode log.
    Fairness {
        #[arg(long)]
        log: PathBuf,
    },
}

fn write_runs(cfg: &ExperimentConfig, solver: Solver, common: &Common) -> Result<()> {
    let runs = run(cfg, solver, common.mode())?;
    for r in &runs {
        write_run(&common.out, r)?;
    }
    let pooled = aggregate(&runs)?;
    write_json(File::create(common.out.join("summary.json"))?, &pooled)?;
    write_json(std::io::stdout(), &pooled)
}

fn sweep_out(common: &Common, cfg: &ExperimentConfig, name: &str, column: &str, rows: &[vcell::harness::SweepRow]) -> Result<()> {
    std::fs::create_dir_all(&common.out)?;
    let header = Header {
        config_hash: cfg.hash(),
        seed: None,
        action_space: None,
    };
    write_sweep_csv(File::create(common.out.join(name))?, &header, column, rows)?;
    write_sweep_csv(std::io::stdout(), &header, column, rows)
}

fn genie(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    std::fs::create_dir_all(&common.out)?;
    for &seed in &cfg.seeds {
        let env = Environment::new(&cfg.scenario, &cfg.channel, &cfg.phy, seed)?;
        let table = GenieTable::build(&env, cfg.baselines.genie_samples, common.mode())?;
        let header = Header {
            config_hash: cfg.hash(),
            seed: Some(seed),
            action_space: Some(env.actions().descriptor()),
        };
        let path = common.out.join(format!("genie_seed{seed}.csv"));
        write_genie_table(File::create(&path)?, &header, &table)?;
        println!(
            "seed {seed}: genie avg per-VU reward {:.6} -> {}",
            table.result(env.vu_count()).avg_per_vu_reward,
            path.display()
        );
    }
    Ok(())
}

fn fairness(log: &Path) -> Result<()> {
    write_json(std::io::stdout(), &fairness_report(&read_episode_log(log)?)?)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, solver } => {
            let cfg = common.load()?;
            let solver = solver.unwrap_or(cfg.solver);
            if !solver.is_learning() {
                return Err(Error::Config(format!("'{solver}' does not learn; use evaluate")));
            }
            write_runs(&cfg, solver, &common)
        }
        Command::Evaluate { common, solver } => {
            let cfg = common.load()?;
            write_runs(&cfg, solver.unwrap_or(cfg.solver), &common)
        }
        Command::Genie { common } => genie(&common),
        Command::SweepSinr {
            common,
            thresholds,
            solvers,
        } => {
            let cfg = common.load()?;
            let rows = sweep_sinr_threshold(&cfg, &thresholds, &solvers, common.mode())?;
            sweep_out(&common, &cfg, "sweep_sinr.csv", "gamma_min_db", &rows)
        }
        Command::SweepRadius { common, radii, solvers } => {
            let cfg = common.load()?;
            let rows = sweep_coverage_radius(&cfg, &radii, &solvers, common.mode())?;
            sweep_out(&common, &cfg, "sweep_radius.csv", "coverage_radius", &rows)
        }
        Command::Fairness { log } => fairness(&log),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Validation(fields)) => {
            let body = serde_json::json!({ "error": "validation", "fields": fields });
            eprintln!("{body}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
