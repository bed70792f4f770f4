use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dutchbook::cps::{lcps_to_cps_with, validate_complete_cps_with};
use dutchbook::fixtures;
use dutchbook::generate::{random_beliefs, random_environment, random_lcps};
use dutchbook::odds::build_coherence_graph_with;
use dutchbook::simulate::run_rounds_with;
use dutchbook::{Execution, SimConfig, SimMode, StateId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn simulation(c: &mut Criterion) {
    let env = fixtures::env_larry();
    let mu = fixtures::bel_regret(&env);
    let g = fixtures::larry_book(&env);
    let cfg = SimConfig {
        rounds: 100_000,
        seed: 1,
        mode: SimMode::FixedState(StateId(0)),
    };
    let mut group = c.benchmark_group("run_rounds");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| run_rounds_with(&env, &mu, &g, black_box(&cfg), exec).unwrap()));
    }
    group.finish();
}

fn cps(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut group = c.benchmark_group("cps");
    group.sample_size(20);
    for n in [8, 12] {
        let lcps = random_lcps(&mut rng, n, 12);
        let cps = lcps_to_cps_with(&lcps, Execution::Sequential).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(format!("lcps_to_cps/{name}"), n), &lcps, |b, l| {
                b.iter(|| lcps_to_cps_with(l, exec).unwrap())
            });
            group.bench_with_input(BenchmarkId::new(format!("validate/{name}"), n), &cps, |b, x| {
                b.iter(|| validate_complete_cps_with(x, exec))
            });
        }
    }
    group.finish();
}

fn coherence_graph(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let env = random_environment(&mut rng, 12, 60, 24);
    let mu = random_beliefs(&mut rng, &env, 24);
    let mut group = c.benchmark_group("coherence_graph");
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| build_coherence_graph_with(black_box(&env), &mu, exec)));
    }
    group.finish();
}

criterion_group!(benches, simulation, cps, coherence_graph);
criterion_main!(benches);
