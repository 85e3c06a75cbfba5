//! Single-thread pool versus the default rayon pool on the data-parallel
//! kernels. Build with `--no-default-features` to time the sequential
//! fallback instead; both pools then run the same sequential code.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPool;

use intrasplit::datasets::{minmax_scale, synthetic, ImageSet};
use intrasplit::experiment::Method;
use intrasplit::losses::PairLayout;
use intrasplit::nn::{self, init_params, LossSpec};
use intrasplit::ocsvm::{self, OcsvmParams};
use intrasplit::pipeline::{extract_features, TrainConfig};
use intrasplit::ssim::{score_dataset, SsimConfig};
use intrasplit::{baselines, rng};

fn pools() -> Vec<(String, ThreadPool)> {
    let default = rayon::current_num_threads();
    let mut sizes = vec![1];
    if default > 1 {
        sizes.push(default);
    }
    sizes
        .into_iter()
        .map(|n| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            (format!("{n}-threads"), pool)
        })
        .collect()
}

fn digits(n: usize) -> ImageSet {
    let set = minmax_scale(&synthetic::digits(n.div_ceil(10), 3).unwrap());
    set.subset(&(0..n).collect::<Vec<_>>())
}

fn bench(c: &mut Criterion) {
    let cfg = TrainConfig::default();
    let set = digits(256);
    let params = init_params(&cfg.architecture(set.shape()).unwrap(), 0).unwrap();
    let batch = &set.pixels()[..128 * set.shape().pixels()];
    let layout = PairLayout::sample(64, 64, &mut rng::stream(0, "bench")).unwrap();
    let spec = LossSpec {
        weights: cfg.weights,
        pairs: Some(&layout),
        l2: cfg.l2,
    };
    let features = extract_features(&params, &digits(1000)).unwrap();
    let raw = baselines::original_features(&digits(1000));

    let mut group = c.benchmark_group("parallel");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("batch_backward_128", &name), |b| {
            b.iter(|| pool.install(|| nn::backward(&params, batch, &spec).unwrap()))
        });
        group.bench_function(BenchmarkId::new("ssim_scores_256", &name), |b| {
            b.iter(|| pool.install(|| score_dataset(&params, &set, &SsimConfig::default()).unwrap()))
        });
        group.bench_function(BenchmarkId::new("ocsvm_fit_latent_1000", &name), |b| {
            b.iter(|| pool.install(|| ocsvm::fit(&features, &OcsvmParams::default()).unwrap()))
        });
        group.bench_function(BenchmarkId::new(format!("ocsvm_fit_{}_1000", Method::Original), &name), |b| {
            b.iter(|| pool.install(|| ocsvm::fit(&raw, &OcsvmParams::default()).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
