use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use paco_bench::meeting;
use paco_core::attributes::{measure_all, Providers};
use paco_core::policy::{rule_editor, ScriptedPolicy};
use paco_core::reward::{degree, RewardConfig};
use paco_core::search::{run_search, SearchConfig};

fn search(c: &mut Criterion) {
    let providers = Providers::fallback();
    let doc = meeting(40);
    let mut group = c.benchmark_group("search");
    for simulations in [8usize, 32, 128] {
        let cfg = SearchConfig {
            simulations,
            ..SearchConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(simulations), &cfg, |b, cfg| {
            b.iter(|| {
                let policy = ScriptedPolicy::from_generator(rule_editor());
                run_search(&doc, &policy, &providers, cfg).unwrap()
            })
        });
    }
    group.finish();
}

fn measurement(c: &mut Criterion) {
    let providers = Providers::fallback();
    let cfg = RewardConfig::default();
    for turns in [10usize, 100] {
        let doc = meeting(turns);
        let summary = "Ben said steel prices pushed the library budget up, so the cafe wing may wait until June.";
        c.bench_function(&format!("measure_and_score/{turns}"), |b| {
            b.iter(|| {
                let m = measure_all(summary, &doc, &providers).unwrap();
                degree(&m, &doc.targets, &cfg).unwrap()
            })
        });
    }
}

criterion_group!(benches, search, measurement);
criterion_main!(benches);
