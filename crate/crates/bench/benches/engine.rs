use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use fxvg_core::calibration::{fit_weekly_risk_neutral, FitVariant, SimplexConfig, WeeklyQuote};
use fxvg_core::marketdata::{generate_chain, GenerateConfig};
use fxvg_core::pricing::{price_gk, price_vg_closed, price_vg_mc, OptionSpec};
use fxvg_core::specfun::{bessel_k, psi_mixture, QuadratureSpec};
use fxvg_core::vgcore::{vg_density, DensityParams, GkParams, MarketEnv, VgParams};

fn weekly_params() -> VgParams {
    VgParams {
        sigma: 0.116,
        nu: 0.099,
        theta: 0.0026,
    }
}

fn env50() -> MarketEnv {
    MarketEnv {
        spot: 50.0,
        r_d: 0.065,
        r_f: 0.015,
    }
}

fn bench_specfun(c: &mut Criterion) {
    c.bench_function("bessel_k order 1.2 x 3.5", |b| {
        b.iter(|| bessel_k(black_box(1.2), black_box(3.5)).unwrap())
    });
    let quad = QuadratureSpec::default();
    c.bench_function("psi_mixture atm shape 0.83", |b| {
        b.iter(|| psi_mixture(black_box(0.021), black_box(0.31), black_box(0.83), &quad).unwrap())
    });
}

fn bench_density(c: &mut Criterion) {
    let params = DensityParams {
        vg: weekly_params(),
        horizon_t: 1.0,
        drift_m: 0.0,
    };
    c.bench_function("vg_density 101-point sweep", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for i in 0..101 {
                let x = -0.7 + 1.4 * (i as f64) / 100.0;
                acc += vg_density(black_box(x), &params).unwrap();
            }
            acc
        })
    });
}

fn bench_pricers(c: &mut Criterion) {
    let env = env50();
    let vg = weekly_params();
    let gk = GkParams { sigma: 0.116 };
    let opt = OptionSpec::call(48.0, 45.0 / 365.0);
    let quad = QuadratureSpec::default();

    c.bench_function("price_gk", |b| {
        b.iter(|| price_gk(&env, &gk, black_box(&opt)).unwrap())
    });
    c.bench_function("price_vg_closed atm-ish 45d", |b| {
        b.iter(|| price_vg_closed(&env, &vg, black_box(&opt), &quad).unwrap())
    });
    c.bench_function("price_vg_mc 10k paths", |b| {
        b.iter(|| price_vg_mc(&env, &vg, black_box(&opt), 10_000, 42).unwrap())
    });
}

fn bench_weekly_fit(c: &mut Criterion) {
    let cfg = GenerateConfig {
        weeks: 1,
        quotes_per_week: 24,
        noise_level: 0.0,
        drift_amplitude: 0.0,
        ..GenerateConfig::default()
    };
    let quad = QuadratureSpec::default();
    let chain: Vec<WeeklyQuote> = generate_chain(&cfg, 1, &quad)
        .unwrap()
        .iter()
        .map(|q| q.to_weekly())
        .collect();
    let initial = VgParams {
        sigma: 0.12,
        nu: 0.15,
        theta: 0.0,
    };
    let simplex = SimplexConfig::default();

    let mut group = c.benchmark_group("calibration");
    group.sample_size(10);
    group.bench_function("fit_weekly vg 24 quotes", |b| {
        b.iter_batched(
            || chain.clone(),
            |chain| {
                fit_weekly_risk_neutral(&chain, FitVariant::Vg, &initial, &simplex, &quad).unwrap()
            },
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_specfun,
    bench_density,
    bench_pricers,
    bench_weekly_fit
);
criterion_main!(benches);
