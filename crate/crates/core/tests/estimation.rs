use smallcell_core::beamforming::{stacked_equivalent_channel, Association, BeamformerSet, Side};
use smallcell_core::channel::{
    assemble_channel, draw_system_channels, Path, PathLoss, PathSet, UserAoaMode,
};
use smallcell_core::estimation::{
    beam_sweep, beamformers_from_reports, dft_codebook, estimate_stacked_channel, estimation_mse,
    orthogonal_pilots,
};
use smallcell_core::numerics::{ComplexMatrix, C64};
use smallcell_core::{ArrayGeometry, ClusterModel, SimRng, SystemChannels};

fn geom(n: usize) -> ArrayGeometry {
    ArrayGeometry::half_wavelength(n).unwrap()
}

fn system(seed: u64, n: usize, k: usize, m: usize, p: usize) -> SystemChannels {
    let model = ClusterModel {
        n_cl: 4,
        power_ratio: 5.0,
        user_aoa: UserAoaMode::PerCluster,
    };
    draw_system_channels(
        &mut SimRng::new(seed),
        n,
        k,
        geom(m),
        geom(p),
        &model,
        &PathLoss::Uniform(1.0),
    )
    .unwrap()
}

/// Single-path link whose angles sit on the codebook grid.
fn grid_link(
    m: usize,
    p: usize,
    sbs_idx: usize,
    user_idx: usize,
) -> smallcell_core::ChannelRealization {
    let cos_s = -1.0 + 2.0 * sbs_idx as f64 / m as f64;
    let cos_u = -1.0 + 2.0 * user_idx as f64 / p as f64;
    let ps = PathSet::new(
        vec![Path {
            aoa_sbs: cos_s.acos(),
            aoa_user: cos_u.acos(),
            gain: C64::new(1.0, 0.0),
        }],
        1.0,
    )
    .unwrap();
    assemble_channel(ps, geom(m), geom(p), 1.0).unwrap()
}

#[test]
fn noiseless_estimate_is_exact_and_reciprocal() {
    let ch = system(1, 3, 2, 20, 6);
    let beams = BeamformerSet::strongest_path(&ch, Association::full(3, 2)).unwrap();
    let (up_sbs, up_user) = beams.uplink_weights();
    let pilots = orthogonal_pilots(6).unwrap();
    let est = estimate_stacked_channel(
        &ch,
        &up_sbs,
        &up_user,
        &pilots,
        2.0,
        0.0,
        &mut SimRng::new(0),
    )
    .unwrap();
    let truth = stacked_equivalent_channel(&ch, &up_sbs, &up_user).unwrap();
    assert!(est.matrix.max_abs_diff(&truth.matrix) < 1e-10);
    let down = beams.downlink_effective_channel(&ch).unwrap();
    assert!(est.matrix.transpose().max_abs_diff(&down) < 1e-10);
}

fn monte_carlo_mse(energy: f64, trials: usize) -> (f64, ComplexMatrix, ComplexMatrix) {
    let ch = system(2, 3, 2, 12, 6);
    let beams = BeamformerSet::strongest_path(&ch, Association::full(3, 2)).unwrap();
    let truth = stacked_equivalent_channel(&ch, &beams.sbs, &beams.users)
        .unwrap()
        .matrix;
    let pilots = orthogonal_pilots(6).unwrap();
    let mut rng = SimRng::new(77);
    let mut mse = 0.0;
    let mut bias = ComplexMatrix::zeros(truth.rows(), truth.cols());
    for _ in 0..trials {
        let est = estimate_stacked_channel(
            &ch,
            &beams.sbs,
            &beams.users,
            &pilots,
            energy,
            0.5,
            &mut rng,
        )
        .unwrap();
        let err = est.matrix.sub(&truth).unwrap();
        mse += err.frobenius_norm_sqr();
        bias = bias.add(&err).unwrap();
    }
    (mse / trials as f64, bias.scale(1.0 / trials as f64), truth)
}

#[test]
fn estimation_mse_matches_least_squares_variance() {
    let trials = 10_000;
    let (mse1, bias, truth) = monte_carlo_mse(1.0, trials);
    let expect1 = estimation_mse(6, 6, 6, 1.0, 0.5);
    assert!((expect1 - 0.5 * 36.0 / 6.0).abs() < 1e-15);
    assert!((mse1 / expect1 - 1.0).abs() < 0.05, "{mse1} vs {expect1}");

    let (mse2, _, _) = monte_carlo_mse(2.0, trials);
    assert!((mse2 / mse1 - 0.5).abs() < 0.05 * 0.5, "{mse2} vs {mse1}");

    // Unbiased: each entry's error is CN(0, σ²/(L·E)); its mean stays within
    // 3 standard errors.
    let se = (0.5 / 6.0 / trials as f64).sqrt();
    for r in 0..truth.rows() {
        for c in 0..truth.cols() {
            let b = bias[(r, c)];
            assert!(b.norm() < 3.0 * se, "{b}");
        }
    }
}

#[test]
fn noiseless_sweep_finds_on_grid_beams() {
    let (m, p) = (16, 8);
    let targets = [(3usize, 5usize), (11, 1), (7, 6), (0, 2)];
    let links: Vec<_> = targets
        .iter()
        .map(|&(s, u)| grid_link(m, p, s, u))
        .collect();
    let ch = SystemChannels::new(2, 2, links).unwrap();
    let sbs_cb = dft_codebook(&geom(m), 1, Side::Sbs).unwrap();
    let user_cb = dft_codebook(&geom(p), 1, Side::User).unwrap();
    let reports = beam_sweep(&ch, &sbs_cb, &user_cb, 2, 2, 1.0, 0.0, &mut SimRng::new(3)).unwrap();
    for r in &reports {
        assert_eq!(r.links.len(), 2);
        for l in &r.links {
            let (s, u) = targets[l.sbs * 2 + r.user];
            assert_eq!((l.sbs_beam, l.user_beam), (s, u));
            // Matched-filter gain M·P on a unit path gain.
            assert!((l.energy - (m * p) as f64).abs() < 1e-9);
        }
    }
    let beams = beamformers_from_reports(&reports, &sbs_cb, &user_cb, 2, 2).unwrap();
    let genie = BeamformerSet::strongest_path(&ch, Association::full(2, 2)).unwrap();
    let a = beams.downlink_effective_channel(&ch).unwrap();
    let b = genie.downlink_effective_channel(&ch).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-9);
}

#[test]
fn single_sbs_single_stream_reports_one_pair() {
    let ch = system(4, 1, 1, 8, 4);
    let sbs_cb = dft_codebook(&geom(8), 2, Side::Sbs).unwrap();
    let user_cb = dft_codebook(&geom(4), 2, Side::User).unwrap();
    let reports = beam_sweep(&ch, &sbs_cb, &user_cb, 1, 1, 1.0, 0.1, &mut SimRng::new(5)).unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0].links.len(), 1);
    assert!(reports[0].links[0].energy >= 0.0);
}

#[test]
fn noise_dominated_sweep_is_uniform() {
    let ch = system(6, 1, 1, 4, 2);
    let sbs_cb = dft_codebook(&geom(4), 2, Side::Sbs).unwrap();
    let user_cb = dft_codebook(&geom(2), 1, Side::User).unwrap();
    let mut rng = SimRng::new(8);
    let mut counts = [0usize; 8];
    let trials = 1000;
    for _ in 0..trials {
        let r = beam_sweep(&ch, &sbs_cb, &user_cb, 1, 1, 1.0, 1e12, &mut rng).unwrap();
        counts[r[0].links[0].sbs_beam] += 1;
    }
    let entropy: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / trials as f64;
            -q * q.ln()
        })
        .sum();
    assert!(entropy > 0.97 * (8f64).ln(), "{entropy} {counts:?}");
}

#[test]
fn sweep_association_respects_budgets() {
    let ch = system(9, 3, 3, 10, 6);
    let sbs_cb = dft_codebook(&geom(10), 1, Side::Sbs).unwrap();
    let user_cb = dft_codebook(&geom(6), 1, Side::User).unwrap();
    let reports = beam_sweep(&ch, &sbs_cb, &user_cb, 2, 2, 1.0, 0.01, &mut SimRng::new(1)).unwrap();
    let beams = beamformers_from_reports(&reports, &sbs_cb, &user_cb, 3, 2).unwrap();
    for i in 0..3 {
        assert_eq!(beams.association.served(i).len(), 2);
    }
    for r in &reports {
        assert_eq!(r.links.len(), 2);
        assert!(r.links.iter().all(|l| l.sbs_beam < 10 && l.user_beam < 6));
    }
}
