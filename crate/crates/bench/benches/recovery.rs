use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use turbocs::model::noise_variance_from_db;
use turbocs::{recover, Algorithm, Prior, ProblemInstance, RecoveryConfig};

fn recovery(c: &mut Criterion) {
    let prior = Prior::ternary(258, 12).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let inst =
        ProblemInstance::generate(129, &prior, noise_variance_from_db(17.0), &mut rng).unwrap();
    let mut group = c.benchmark_group("recover 258x129 s=12 17dB");
    group.sample_size(10);
    for alg in Algorithm::ALL {
        let config = RecoveryConfig::new(alg);
        group.bench_function(alg.name(), |b| {
            b.iter(|| recover(black_box(&inst), &config))
        });
    }
    group.finish();
}

criterion_group!(benches, recovery);
criterion_main!(benches);
