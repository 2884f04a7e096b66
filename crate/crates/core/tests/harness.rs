use num_complex::Complex64;
use tempfile::tempdir;

use vcell::actionspace::{build_action_space, ActionConfig, Environment, Granularity};
use vcell::channel::{ChannelRealization, Coverage, PairChannel};
use vcell::harness::{
    aggregate, fairness_report, read_episode_log, read_header_lines, run, run_seed, sweep_coverage_radius,
    sweep_sinr_threshold, write_run, EpisodeLog, EpisodeRow, ExperimentConfig, Solver,
};
use vcell::par::Parallelism;
use vcell::phy::{link_metrics, BeamAssignment, LinkGains, PhyConfig};
use vcell::Error;

fn quick() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::small();
    cfg.learning.episodes = 300;
    cfg.test_episodes = 2;
    cfg.seeds = vec![1, 2];
    cfg
}

#[test]
fn reruns_write_identical_files() {
    let cfg = quick();
    let (a, b) = (tempdir().unwrap(), tempdir().unwrap());
    for dir in [&a, &b] {
        for r in run(&cfg, Solver::SarlMarl, Parallelism::Parallel).unwrap() {
            write_run(dir.path(), &r).unwrap();
        }
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 8);
    for n in names {
        let x = std::fs::read(a.path().join(&n)).unwrap();
        let y = std::fs::read(b.path().join(&n)).unwrap();
        assert_eq!(x, y, "{n:?} differs");
    }
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let cfg = quick();
    let a = run(&cfg, Solver::Sarl, Parallelism::Sequential).unwrap();
    let b = run(&cfg, Solver::Sarl, Parallelism::Parallel).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.log, y.log);
        assert_eq!(x.summary, y.summary);
    }
}

#[test]
fn csv_log_round_trips_with_provenance() {
    let cfg = quick();
    let out = run_seed(&cfg, Solver::Random, 2).unwrap();
    let dir = tempdir().unwrap();
    write_run(dir.path(), &out).unwrap();
    let path = dir.path().join("log_seed2.csv");
    assert_eq!(read_episode_log(&path).unwrap(), out.log);
    let header = read_header_lines(&path).unwrap();
    assert_eq!(header[0], ("config_hash".into(), cfg.hash()));
    assert_eq!(header[1], ("seed".into(), "2".into()));
    let desc: serde_json::Value = serde_json::from_str(&header[2].1).unwrap();
    assert_eq!(desc["feasible_count"], 16);
}

#[test]
fn summary_follows_from_the_log() {
    let cfg = quick();
    let out = run_seed(&cfg, Solver::Equal, 1).unwrap();
    let rows = &out.log.rows;
    let u = out.log.vu_count as f64;
    let total: f64 = rows.iter().map(|r| r.reward).sum();
    assert_eq!(out.summary.steps, rows.len());
    assert_eq!(out.summary.avg_per_vu_reward, total / (rows.len() as f64 * u));
    let ok = rows.iter().filter(|r| !r.violation).count() as f64;
    assert_eq!(out.summary.success_probability, ok / rows.len() as f64);
    assert!((0.0..=1.0).contains(&out.summary.success_probability));
}

#[test]
fn genie_run_succeeds_wherever_success_is_possible() {
    let cfg = quick();
    let out = run_seed(&cfg, Solver::Genie, 1).unwrap();
    let env = Environment::new(&cfg.scenario, &cfg.channel, &cfg.phy, 1).unwrap();
    for row in &out.log.rows {
        let possible = (0..env.actions().len()).any(|c| env.score_at(row.state, env.actions().action(c)).success);
        assert_eq!(!row.violation, possible, "state {}", row.state);
    }
}

#[test]
fn pooled_summary_spans_all_seeds() {
    let cfg = quick();
    let runs = run(&cfg, Solver::Genie, Parallelism::Parallel).unwrap();
    let pooled = aggregate(&runs).unwrap();
    assert_eq!(pooled.steps, runs.iter().map(|r| r.log.rows.len()).sum::<usize>());
    let mean = runs.iter().map(|r| r.summary.avg_per_vu_reward).sum::<f64>() / runs.len() as f64;
    assert!((pooled.avg_per_vu_reward - mean).abs() < 1e-12);
}

#[test]
fn invalid_config_lists_fields() {
    let mut cfg = quick();
    cfg.seeds.clear();
    cfg.learning.agents = 0;
    let Err(Error::Validation(fields)) = run(&cfg, Solver::Sarl, Parallelism::Sequential) else {
        panic!("expected validation error")
    };
    assert!(fields.iter().any(|f| f.field == "seeds"));
    assert!(fields.iter().any(|f| f.field == "learning.agents"));
}

#[test]
fn fairness_needs_a_rewarded_step() {
    let row = EpisodeRow {
        episode: 0,
        step: 0,
        state: 0,
        action: None,
        reward: 0.0,
        violation: true,
        sinr_db: vec![0.0, 0.0],
        rate: vec![0.5, 0.5],
        serving_aps: vec![1, 1],
        backhaul: vec![0.5, 0.5],
    };
    let log = EpisodeLog {
        vu_count: 2,
        rows: vec![row.clone(), row],
    };
    assert!(matches!(fairness_report(&log), Err(Error::EmptyLog(_))));
}

#[test]
fn fairness_reports_only_rewarded_steps() {
    let cfg = quick();
    let out = run_seed(&cfg, Solver::Genie, 2).unwrap();
    let rep = fairness_report(&out.log).unwrap();
    assert_eq!(rep.steps, out.log.rows.iter().filter(|r| r.reward > 0.0).count());
    let floor = 0.9 * 11f64.log2();
    assert!(rep.per_vu_min.iter().all(|&m| m >= floor));
    assert!(rep.jain_index > 0.0 && rep.jain_index <= 1.0 + 1e-12);
}

#[test]
fn symmetric_instance_gives_equal_rates_under_enumeration() {
    // one AP, two antennas, two vehicles with orthogonal equal-gain channels
    let g = 1e-9f64;
    let pair = |v: [f64; 2]| PairChannel::compose(g, 1.0, v.iter().map(|&x| Complex64::new(x, 0.0)).collect());
    let ch = ChannelRealization {
        vu_count: 2,
        ap_count: 1,
        pairs: vec![pair([1.0, 0.0]), pair([0.0, 1.0])],
    };
    let params = PhyConfig::default().params(1, 2).unwrap();
    let config = ActionConfig {
        power_levels_dbm: vec![5.0, 10.0, 15.0, 20.0],
        granularity: Granularity::PerPair,
        association_search: false,
    };
    let set = build_action_space(&config, 1, 2, &params).unwrap();
    let cov = Coverage::full(2, 1);
    let gains = LinkGains::from_channel(&ch);
    let noise = 10f64.powf(-9.5);
    let best = (0..set.len())
        .map(|c| {
            let p = set.powers(set.action(c)).unwrap();
            (c, gains.score(&p.mw, &params, noise, &cov).reward)
        })
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    assert!(best.1 > 0.0);
    let p = set.powers(set.action(best.0)).unwrap();
    let beams = BeamAssignment::from_powers(&ch, &p, &cov).unwrap();
    let m = link_metrics(&ch, &beams, &params, noise);
    assert!((m.rate[0] - m.rate[1]).abs() <= 0.01 * m.rate[0]);
}

#[test]
fn sweeps_reject_unsorted_points() {
    let cfg = quick();
    assert!(sweep_sinr_threshold(&cfg, &[10.0, 6.0], &[Solver::Genie], Parallelism::Sequential).is_err());
    assert!(sweep_coverage_radius(&cfg, &[], &[Solver::Genie], Parallelism::Sequential).is_err());
}

#[test]
fn huge_threshold_kills_all_reward() {
    let cfg = quick();
    let rows = sweep_sinr_threshold(&cfg, &[10.0, 60.0], &[Solver::Genie], Parallelism::Parallel).unwrap();
    assert!(rows[0].wsr > 0.0);
    assert_eq!(rows[1].wsr, 0.0);
    assert_eq!(rows[1].success_probability, 0.0);
}

#[test]
fn radius_limits() {
    let mut cfg = quick();
    cfg.scenario.actions.association_search = true;
    let rows = sweep_coverage_radius(&cfg, &[0.01, 2_000.0], &[Solver::Genie], Parallelism::Parallel).unwrap();
    assert_eq!(rows[0].wsr, 0.0);
    assert!(rows[1].wsr > 0.0);

    cfg.scenario.aps.coverage_radius = 2_000.0;
    cfg.scenario.actions.association_search = false;
    let env = Environment::new(&cfg.scenario, &cfg.channel, &cfg.phy, 1).unwrap();
    assert_eq!(env.actions().raw_count(), 2usize.pow(2 * 2));
    for b in 0..env.state_count() {
        assert!(env.link_at(b).coverage.covered.iter().all(|&c| c));
    }
}
