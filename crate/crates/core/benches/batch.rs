use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tfn_core::nn::{assemble_model, softmax_cross_entropy, Backbone, ModelMode, TfConvConfig};
use tfn_core::{par, Tensor};

fn batch(n: usize, len: usize) -> (Tensor, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = (0..n * len).map(|_| rng.random_range(-1.0..1.0)).collect();
    (Tensor::from_vec(n, 1, len, data).unwrap(), (0..n).map(|i| i % 5).collect())
}

fn train_step(c: &mut Criterion) {
    let (x, labels) = batch(16, 1024);
    let mut group = c.benchmark_group("train_step");
    group.sample_size(10);
    for (name, sequential) in [("parallel", false), ("sequential", true)] {
        let mut model = assemble_model(ModelMode::TfnAdd, Backbone::PaperCnn, TfConvConfig::default(), 5, 1).unwrap();
        group.bench_function(BenchmarkId::new("tfn-add", name), |b| {
            par::set_sequential(sequential);
            b.iter(|| {
                model.zero_grad();
                let logits = model.forward(&x, true).unwrap();
                let (_, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
                model.backward(&grad).unwrap();
            });
            par::set_sequential(false);
        });
    }
    group.finish();
}

fn inference(c: &mut Criterion) {
    let (x, _) = batch(64, 1024);
    let mut group = c.benchmark_group("inference");
    group.sample_size(10);
    for (name, sequential) in [("parallel", false), ("sequential", true)] {
        let mut model = assemble_model(ModelMode::TfnAdd, Backbone::PaperCnn, TfConvConfig::default(), 5, 1).unwrap();
        group.bench_function(BenchmarkId::new("tfn-add", name), |b| {
            par::set_sequential(sequential);
            b.iter(|| model.forward(&x, false).unwrap());
            par::set_sequential(false);
        });
    }
    group.finish();
}

criterion_group!(benches, train_step, inference);
criterion_main!(benches);
