use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use vcell::actionspace::{Environment, Granularity};
use vcell::baselines::{genie_optimal, GenieTable};
use vcell::harness::{run, ExperimentConfig, Solver};
use vcell::par::Parallelism;

const MODES: [(&str, Parallelism); 2] = [
    ("sequential", Parallelism::Sequential),
    ("parallel", Parallelism::Parallel),
];

fn genie_single_state(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::default();
    cfg.scenario.actions.granularity = Granularity::PerPair;
    let env = Environment::new(&cfg.scenario, &cfg.channel, &cfg.phy, 1).unwrap();
    let mut g = c.benchmark_group("genie_per_pair_one_state");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &m| {
            b.iter(|| genie_optimal(black_box(&env), 40, 1, m).unwrap())
        });
    }
    g.finish();
}

fn genie_table(c: &mut Criterion) {
    let cfg = ExperimentConfig::default();
    let env = Environment::new(&cfg.scenario, &cfg.channel, &cfg.phy, 1).unwrap();
    let mut g = c.benchmark_group("genie_per_ap_all_states");
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &m| {
            b.iter(|| GenieTable::build(black_box(&env), 1, m).unwrap())
        });
    }
    g.finish();
}

fn seed_fan_out(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::default();
    cfg.seeds = vec![1, 2, 3, 4];
    cfg.learning.episodes = 200;
    cfg.test_episodes = 5;
    let mut g = c.benchmark_group("sarl_four_seeds");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &m| {
            b.iter(|| run(black_box(&cfg), Solver::Sarl, m).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, genie_single_state, genie_table, seed_fan_out);
criterion_main!(benches);
