use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use medalrank::diagnostics::{log_grid, variance_band_grid};
use medalrank::model::{HyperParams, PriorFamily, PriorSpec};
use medalrank::par::Execution;
use medalrank::ranking::{summarize_ranks, OrderStatistic};
use medalrank::sampler::{run_sampler, SamplerConfig};
use medalrank::simulate::{draw_ln_p, simulate_dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn games(c: usize) -> medalrank::data::GamesDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let nocs: Vec<(String, u64)> = (0..c).map(|i| (format!("B{i:03}"), rng.random_range(11.0f64..21.0).exp() as u64)).collect();
    let hyper = HyperParams::Beta { alpha: 0.6, beta: 4e6 };
    let p: Vec<f64> = nocs.iter().map(|_| draw_ln_p(&hyper, PriorFamily::Beta, &mut rng).exp()).collect();
    simulate_dataset(&nocs, &p, [0.2, 0.25, 0.3], 2024, &mut rng).unwrap()
}

fn config(execution: Execution) -> SamplerConfig {
    SamplerConfig { chains: 4, adapt_iters: 500, burn_in: 250, keep_iters: 1000, thin: 2, execution, ..Default::default() }
}

fn sampler(c: &mut Criterion) {
    let data = games(200);
    let spec = PriorSpec::new(PriorFamily::Beta);
    let mut group = c.benchmark_group("sampler");
    group.sample_size(10);
    for mode in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| run_sampler(black_box(&data), &spec, &config(mode)).unwrap())
        });
    }
    group.finish();
}

fn ranking(c: &mut Criterion) {
    let data = games(200);
    let spec = PriorSpec::new(PriorFamily::Beta);
    let mut group = c.benchmark_group("summarize_ranks");
    for mode in MODES {
        let (mut draws, _) = run_sampler(&data, &spec, &config(mode)).unwrap();
        draws.config.execution = mode;
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, _| {
            b.iter(|| summarize_ranks(black_box(&draws), &data, OrderStatistic::Mean).unwrap())
        });
    }
    group.finish();
}

fn variance_band(c: &mut Criterion) {
    let grid = log_grid(0.1, 100.0, 20);
    let mut group = c.benchmark_group("variance_band");
    group.sample_size(10);
    for mode in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| variance_band_grid(black_box(&grid), 7, 0.9, 20_000, 2, mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sampler, ranking, variance_band);
criterion_main!(benches);
