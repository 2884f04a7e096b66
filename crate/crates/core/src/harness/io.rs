use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::run::{EpisodeLog, EpisodeRow, RunOutput, SummaryMetrics};
use crate::actionspace::ActionSpaceDescriptor;
use crate::agents::TrainingLog;
use crate::baselines::GenieTable;
use crate::error::{Error, Result};

/// Provenance written as `#` comment lines above every CSV table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Header {
    pub config_hash: String,
    pub seed: Option<u64>,
    pub action_space: Option<ActionSpaceDescriptor>,
}

impl Header {
    pub fn of(run: &RunOutput) -> Self {
        Self {
            config_hash: run.config_hash.clone(),
            seed: Some(run.seed),
            action_space: Some(run.descriptor.clone()),
        }
    }

    fn write(&self, w: &mut dyn Write) -> Result<()> {
        writeln!(w, "# config_hash={}", self.config_hash)?;
        if let Some(s) = self.seed {
            writeln!(w, "# seed={s}")?;
        }
        if let Some(d) = &self.action_space {
            writeln!(w, "# action_space={}", serde_json::to_string(d)?)?;
        }
        Ok(())
    }
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Columns: episode, step, state, action, reward, violation, then
/// `sinr_db_i`, `rate_i`, `serving_aps_i`, `backhaul_i` for every vehicle.
pub fn write_episode_log(w: impl Write, header: &Header, log: &EpisodeLog) -> Result<()> {
    let mut w = BufWriter::new(w);
    header.write(&mut w)?;
    let u = log.vu_count;
    let mut csv = csv::Writer::from_writer(w);
    let mut cols: Vec<String> = ["episode", "step", "state", "action", "reward", "violation"]
        .map(String::from)
        .to_vec();
    for prefix in ["sinr_db", "rate", "serving_aps", "backhaul"] {
        cols.extend((0..u).map(|i| format!("{prefix}_{i}")));
    }
    csv.write_record(&cols)?;
    for r in &log.rows {
        let mut rec = vec![
            r.episode.to_string(),
            r.step.to_string(),
            r.state.to_string(),
            fmt_opt(r.action),
            r.reward.to_string(),
            (r.violation as u8).to_string(),
        ];
        rec.extend(r.sinr_db.iter().map(f64::to_string));
        rec.extend(r.rate.iter().map(f64::to_string));
        rec.extend(r.serving_aps.iter().map(usize::to_string));
        rec.extend(r.backhaul.iter().map(f64::to_string));
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::Domain(format!("bad {what} value '{field}' in episode log")))
}

pub fn read_episode_log(path: &Path) -> Result<EpisodeLog> {
    let mut csv = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(BufReader::new(File::open(path)?));
    let width = csv.headers()?.len();
    if width < 6 || (width - 6) % 4 != 0 {
        return Err(Error::Domain(format!("unexpected episode log width {width}")));
    }
    let u = (width - 6) / 4;
    let mut log = EpisodeLog {
        vu_count: u,
        rows: Vec::new(),
    };
    for rec in csv.records() {
        let rec = rec?;
        let col = |k: usize| &rec[k];
        let block = |b: usize| (0..u).map(move |i| 6 + b * u + i);
        log.rows.push(EpisodeRow {
            episode: parse(col(0), "episode")?,
            step: parse(col(1), "step")?,
            state: parse(col(2), "state")?,
            action: if col(3).is_empty() { None } else { Some(parse(col(3), "action")?) },
            reward: parse(col(4), "reward")?,
            violation: parse::<u8>(col(5), "violation")? != 0,
            sinr_db: block(0).map(|k| parse(col(k), "sinr_db")).collect::<Result<_>>()?,
            rate: block(1).map(|k| parse(col(k), "rate")).collect::<Result<_>>()?,
            serving_aps: block(2).map(|k| parse(col(k), "serving_aps")).collect::<Result<_>>()?,
            backhaul: block(3).map(|k| parse(col(k), "backhaul")).collect::<Result<_>>()?,
        });
    }
    Ok(log)
}

/// Reads the `# key=value` provenance lines of a CSV file.
pub fn read_header_lines(path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        let Some(rest) = line.strip_prefix("# ") else { break };
        if let Some((k, v)) = rest.split_once('=') {
            out.push((k.to_string(), v.to_string()));
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct SummaryFile<'a> {
    config_hash: &'a str,
    seed: u64,
    solver: &'a str,
    action_space: &'a ActionSpaceDescriptor,
    genie_total: Option<f64>,
    summary: &'a SummaryMetrics,
}

pub fn write_summary_json(w: impl Write, run: &RunOutput) -> Result<()> {
    let file = SummaryFile {
        config_hash: &run.config_hash,
        seed: run.seed,
        solver: run.solver.name(),
        action_space: &run.descriptor,
        genie_total: run.training.as_ref().and_then(|t| t.genie_total),
        summary: &run.summary,
    };
    let mut w = BufWriter::new(w);
    serde_json::to_writer_pretty(&mut w, &file)?;
    writeln!(w)?;
    Ok(())
}

/// Columns: episode, episode_reward, greedy_reward (empty when untracked).
pub fn write_training_curve(w: impl Write, header: &Header, log: &TrainingLog) -> Result<()> {
    let mut w = BufWriter::new(w);
    header.write(&mut w)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["episode", "episode_reward", "greedy_reward"])?;
    for (e, r) in log.episode_rewards.iter().enumerate() {
        csv.write_record([e.to_string(), r.to_string(), fmt_opt(log.greedy_rewards.get(e))])?;
    }
    csv.flush()?;
    Ok(())
}

/// Columns: state, action, reward.
pub fn write_genie_table(w: impl Write, header: &Header, table: &GenieTable) -> Result<()> {
    let mut w = BufWriter::new(w);
    header.write(&mut w)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["state", "action", "reward"])?;
    for (s, (a, r)) in table.actions.iter().zip(&table.rewards).enumerate() {
        csv.write_record([s.to_string(), a.0.to_string(), r.to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

/// Writes `log_seed{S}.csv` and `summary_seed{S}.json` (plus the training
/// curve for learning solvers) under `dir`.
pub fn write_run(dir: &Path, run: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let header = Header::of(run);
    let s = run.seed;
    write_episode_log(File::create(dir.join(format!("log_seed{s}.csv")))?, &header, &run.log)?;
    write_summary_json(File::create(dir.join(format!("summary_seed{s}.json")))?, run)?;
    if let Some(t) = &run.training {
        write_training_curve(File::create(dir.join(format!("training_seed{s}.csv")))?, &header, &t.log)?;
        let tables = File::create(dir.join(format!("tables_seed{s}.json")))?;
        serde_json::to_writer(BufWriter::new(tables), &t.tables)?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(w: impl Write, value: &T) -> Result<()> {
    let mut w = BufWriter::new(w);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}
