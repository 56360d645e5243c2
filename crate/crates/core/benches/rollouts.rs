use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sbmsm::harness::gap_instance;
use sbmsm::harness::generate::{random_tabular, Family, Limits};
use sbmsm::oracle::{oracle2_seeded, RolloutPolicy};

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let mut sizes = vec![1, rayon::current_num_threads()];
    sizes.dedup();
    sizes
        .into_iter()
        .map(|k| (format!("{k}-thread"), rayon::ThreadPoolBuilder::new().num_threads(k).build().unwrap()))
        .collect()
}

fn oracle2_rollouts(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let limits = Limits { max_rounds: 1, max_items: 4, max_states: 8, max_budget: 3 };
    let tabular = random_tabular(Family::CorrelatedCoverage, &limits, &mut rng).unwrap();
    let gap = gap_instance(16).unwrap();

    let mut group = c.benchmark_group("oracle2");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("tabular_exact_greedy", &name), |b| {
            b.iter(|| pool.install(|| oracle2_seeded(4096, &tabular, 0, RolloutPolicy::ExactGreedy, 7).unwrap()))
        });
        group.bench_function(BenchmarkId::new("gap_sampled_greedy", &name), |b| {
            b.iter(|| {
                pool.install(|| oracle2_seeded(256, &gap, 0, RolloutPolicy::SampledGreedy { q1: 64 }, 7).unwrap())
            })
        });
    }
    group.finish();
}

criterion_group!(benches, oracle2_rollouts);
criterion_main!(benches);
