use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tetrabft::checker::check_all;
use tetrabft::checker::explore::{explore, ExploreConfig};
use tetrabft::sim::{run, Mode, Scenario};

fn single_shot(c: &mut Criterion) {
    let mut g = c.benchmark_group("single_shot");
    for (n, f) in [(4, 1), (16, 5), (64, 21)] {
        let good = Scenario::new(n, f);
        g.bench_with_input(BenchmarkId::new("good_case", n), &good, |b, s| {
            b.iter(|| run(s))
        });
        let vc = Scenario {
            byzantine: vec![0],
            ..Scenario::new(n, f)
        };
        g.bench_with_input(BenchmarkId::new("silent_leader", n), &vc, |b, s| {
            b.iter(|| run(s))
        });
    }
    g.finish();
}

fn multi_shot(c: &mut Criterion) {
    let s = Scenario {
        mode: Mode::Multi,
        slots: Some(100),
        horizon: 400,
        ..Scenario::new(4, 1)
    };
    c.bench_function("multi_shot/100_slots", |b| b.iter(|| run(&s)));
    let trace = run(&s);
    c.bench_function("check_all/100_slots", |b| b.iter(|| check_all(&trace)));
}

fn exploration(c: &mut Criterion) {
    c.bench_function("explore/one_view", |b| {
        b.iter(|| explore(ExploreConfig::new(4, 1, 1)).unwrap())
    });
}

criterion_group!(benches, single_shot, multi_shot, exploration);
criterion_main!(benches);
