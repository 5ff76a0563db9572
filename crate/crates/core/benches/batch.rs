use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qbayes_core::par::Execution;
use qbayes_core::problem::{random_problem, run_batch, RandomKind};
use qbayes_core::Tolerances;

fn batch(c: &mut Criterion) {
    let problems: Vec<_> = (0..32)
        .map(|seed| {
            let (kind, dims) = match seed % 4 {
                0 => (RandomKind::Product, "2->4"),
                1 => (RandomKind::Nonproduct, "2,1->4,2"),
                2 => (RandomKind::Rankdef, "3->6"),
                _ => (RandomKind::Kraus, "2->3"),
            };
            random_problem(kind, dims, seed).expect("valid generator arguments")
        })
        .collect();
    let base = Tolerances::default();
    let mut group = c.benchmark_group("run_batch");
    group.sample_size(20);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_batch(&problems, base, exec));
        });
    }
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
