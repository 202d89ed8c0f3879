use criterion::{black_box, criterion_group, criterion_main, Criterion};

use bellspace_core::feasibility::{fine_feasible, min_negativity_joint};
use bellspace_core::models::{pr_table, Model, QuantumPairModel};
use bellspace_core::rational::{ratio, RATIONALIZE_PRECISION};
use bellspace_core::sim::{estimate_table, run_experiment, RunConfig};
use bellspace_core::spaces::Settings;
use bellspace_core::table::CorrelationTable;

fn feasibility(c: &mut Criterion) {
    let h = ratio(1, 2);
    let coins = CorrelationTable::product(Settings::default(), [h.clone(), h.clone()], [h.clone(), h]).unwrap();
    let edge = coins.mix(&pr_table(Settings::default()), &ratio(1, 2));
    let quantum = QuantumPairModel { settings: Settings::tsirelson() }.table().rationalize(RATIONALIZE_PRECISION).unwrap();
    c.bench_function("fine_feasible/boundary", |b| b.iter(|| fine_feasible(black_box(&edge)).unwrap()));
    c.bench_function("fine_feasible/quantum", |b| b.iter(|| fine_feasible(black_box(&quantum)).unwrap()));
    c.bench_function("min_negativity/quantum", |b| b.iter(|| min_negativity_joint(black_box(&quantum)).unwrap()));
}

fn simulation(c: &mut Criterion) {
    let model = Model::Quantum(QuantumPairModel { settings: Settings::tsirelson() });
    let cfg = RunConfig::new(100_000, 1);
    c.bench_function("run_experiment/1e5", |b| {
        b.iter(|| estimate_table(&run_experiment(black_box(&model), &cfg).unwrap()).unwrap())
    });
}

criterion_group!(benches, feasibility, simulation);
criterion_main!(benches);
