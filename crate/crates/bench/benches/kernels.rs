use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use smallcell_core::channel::{draw_system_channels, PathLoss};
use smallcell_core::experiments::draw_trial;
use smallcell_core::numerics::{svd, ComplexMatrix};
use smallcell_core::rate::{sumrate_mc, Scheme};
use smallcell_core::{ArrayGeometry, ScenarioConfig, SimRng};

fn bench_svd(c: &mut Criterion) {
    let mut rng = SimRng::new(1);
    for (rows, cols) in [(6, 6), (150, 6)] {
        let a = ComplexMatrix::from_fn(rows, cols, |_, _| rng.complex_normal());
        c.bench_function(&format!("svd_{rows}x{cols}"), |b| {
            b.iter(|| svd(black_box(&a)).unwrap())
        });
    }
}

fn bench_channel_draw(c: &mut Criterion) {
    let cfg = ScenarioConfig::default();
    let model = cfg.cluster_model();
    let sbs = ArrayGeometry::new(cfg.m_sbs, cfg.spacing_ratio).unwrap();
    let user = ArrayGeometry::new(cfg.p_user, cfg.spacing_ratio).unwrap();
    let mut rng = SimRng::new(2);
    c.bench_function("draw_system_channels_default", |b| {
        b.iter(|| {
            draw_system_channels(
                &mut rng,
                cfg.n_sbs,
                cfg.k_users,
                sbs,
                user,
                &model,
                &PathLoss::Uniform(1.0),
            )
            .unwrap()
        })
    });
}

fn bench_trial(c: &mut Criterion) {
    let cfg = ScenarioConfig::default();
    let budget = cfg.budget().unwrap();
    let noise = cfg.noise_var();
    let mut rng = SimRng::new(3);
    c.bench_function("monte_carlo_trial_default", |b| {
        b.iter(|| {
            let sys = draw_trial(&cfg, &mut rng).unwrap();
            let d = sumrate_mc(&sys, Scheme::DistributedHybrid, &budget, noise).unwrap();
            let m = sumrate_mc(&sys, Scheme::CollocatedDigital, &budget, noise).unwrap();
            black_box(d + m)
        })
    });
}

criterion_group!(benches, bench_svd, bench_channel_draw, bench_trial);
criterion_main!(benches);
