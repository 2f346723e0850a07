use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use smallcell_core::numerics::{
    log2_det_hpd, log_det_capacity, log_det_capacity_svd, pseudo_inverse, svd, water_filling,
    ComplexMatrix, C64,
};
use smallcell_core::SimRng;

fn random_matrix(rng: &mut SimRng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| rng.complex_normal())
}

/// Eigenvalues of a Hermitian matrix through its real symmetric embedding
/// `[[Re, −Im], [Im, Re]]`, where every eigenvalue appears twice.
fn hermitian_eigenvalues_oracle(a: &ComplexMatrix) -> Vec<f64> {
    let n = a.rows();
    let real = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = a[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let mut ev: Vec<f64> = SymmetricEigen::new(real)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev.into_iter().step_by(2).collect()
}

fn rel_reconstruction_error(a: &ComplexMatrix) -> f64 {
    let r = svd(a).unwrap();
    r.reconstruct().sub(a).unwrap().frobenius_norm() / a.frobenius_norm().max(1e-300)
}

fn unitarity_residual(q: &ComplexMatrix) -> f64 {
    q.adjoint_matmul(q)
        .unwrap()
        .max_abs_diff(&ComplexMatrix::identity(q.cols()))
}

#[test]
fn svd_matches_gram_eigenvalue_oracle() {
    let mut rng = SimRng::new(2024);
    for _ in 0..20 {
        let a = random_matrix(&mut rng, 4, 3);
        let gram = a.adjoint_matmul(&a).unwrap();
        let oracle: Vec<f64> = hermitian_eigenvalues_oracle(&gram)
            .into_iter()
            .map(|e| e.max(0.0).sqrt())
            .collect();
        let s = svd(&a).unwrap().singular_values;
        assert_eq!(s.len(), 3);
        for (x, y) in s.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-8, "{s:?} vs {oracle:?}");
        }
    }
}

#[test]
fn rank_one_outer_product() {
    // ‖a‖ = √M, ‖b‖ = √P with unit-modulus entries: σ₁ = √(MP).
    let mut rng = SimRng::new(5);
    let (m, p) = (7, 3);
    let a: Vec<C64> = (0..m).map(|_| C64::from_polar(1.0, rng.phase())).collect();
    let b: Vec<C64> = (0..p).map(|_| C64::from_polar(1.0, rng.phase())).collect();
    let h = ComplexMatrix::from_fn(m, p, |i, j| a[i] * b[j].conj());
    let s = svd(&h).unwrap().singular_values;
    assert!((s[0] - ((m * p) as f64).sqrt()).abs() < 1e-10);
    for &x in &s[1..] {
        assert!(x < 1e-10);
    }
}

#[test]
fn svd_factors_are_unitary_for_rank_deficient_input() {
    let mut rng = SimRng::new(6);
    let b = random_matrix(&mut rng, 9, 2);
    let c = random_matrix(&mut rng, 2, 5);
    let a = b.matmul(&c).unwrap();
    let r = svd(&a).unwrap();
    assert!(unitarity_residual(&r.left_vectors) < 1e-10);
    assert!(unitarity_residual(&r.right_vectors) < 1e-10);
    assert_eq!(r.rank(1e-10), 2);
    assert!(rel_reconstruction_error(&a) < 1e-10);
}

#[test]
fn pinv_penrose_conditions() {
    let mut rng = SimRng::new(7);
    let a = random_matrix(&mut rng, 4, 2);
    let x = pseudo_inverse(&a).unwrap();
    let xa = x.matmul(&a).unwrap();
    assert!(xa.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-8);
    let axa = a.matmul(&xa).unwrap();
    assert!(axa.max_abs_diff(&a) < 1e-8);
    let ax = a.matmul(&x).unwrap();
    assert!(ax.max_abs_diff(&ax.adjoint()) < 1e-8);
    let xax = x.matmul(&ax).unwrap();
    assert!(xax.max_abs_diff(&x) < 1e-8);
}

#[test]
fn rank_one_capacity_closed_form() {
    let mut rng = SimRng::new(8);
    let (m, p, loss) = (50, 6, 0.3);
    let a: Vec<C64> = (0..m).map(|_| C64::from_polar(1.0, rng.phase())).collect();
    let b: Vec<C64> = (0..p).map(|_| C64::from_polar(1.0, rng.phase())).collect();
    let h = ComplexMatrix::from_fn(m, p, |i, j| a[i] * b[j].conj() * f64::sqrt(loss));
    let snr = 2.5;
    let expect = (1.0 + loss * (m * p) as f64 * snr).log2();
    let got = log_det_capacity(&h, snr, 1.0).unwrap();
    assert!((got - expect).abs() < 1e-9 * expect);
}

fn matrix_strategy() -> impl Strategy<Value = ComplexMatrix> {
    (1usize..7, 1usize..7, any::<u64>()).prop_map(|(r, c, seed)| {
        let mut rng = SimRng::new(seed);
        random_matrix(&mut rng, r, c)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svd_invariants(a in matrix_strategy()) {
        let r = svd(&a).unwrap();
        prop_assert_eq!(r.singular_values.len(), a.rows().min(a.cols()));
        prop_assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(r.singular_values.iter().all(|&s| s >= 0.0));
        prop_assert!(rel_reconstruction_error(&a) < 1e-10);
        prop_assert!(unitarity_residual(&r.left_vectors) < 1e-10);
        prop_assert!(unitarity_residual(&r.right_vectors) < 1e-10);
    }

    #[test]
    fn cholesky_and_svd_capacity_routes_agree(a in matrix_strategy(), e in 0.0f64..50.0) {
        let chol = log_det_capacity(&a, e, 1.3).unwrap();
        let sv = log_det_capacity_svd(&a, e, 1.3).unwrap();
        prop_assert!((chol - sv).abs() < 1e-9 * sv.max(1.0));
        prop_assert!(chol >= 0.0);
    }

    #[test]
    fn capacity_monotone_in_energy(a in matrix_strategy(), e in 0.0f64..20.0, de in 0.0f64..20.0) {
        let lo = log_det_capacity(&a, e, 1.0).unwrap();
        let hi = log_det_capacity(&a, e + de, 1.0).unwrap();
        prop_assert!(hi >= lo - 1e-12);
    }
}

#[test]
fn log2_det_of_scaled_identity() {
    let a = ComplexMatrix::identity(3).scale(2.0);
    assert!((log2_det_hpd(&a).unwrap() - 3.0).abs() < 1e-14);
    let mut b = ComplexMatrix::identity(2);
    b[(0, 1)] = C64::new(0.5, 0.5);
    b[(1, 0)] = C64::new(0.5, -0.5);
    // det = 1 − |0.5+0.5i|² = 0.5
    assert!((log2_det_hpd(&b).unwrap() + 1.0).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn water_filling_kkt(
        gains in proptest::collection::vec(0.0f64..10.0, 1..8),
        total in 0.0f64..20.0,
        noise in 0.01f64..5.0,
    ) {
        let p = water_filling(&gains, total, noise).unwrap();
        let sum: f64 = p.iter().sum();
        prop_assert!((sum - total).abs() <= 1e-9 * total.max(1.0) || gains.iter().all(|&g| g == 0.0));
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        // Active channels share one water level; inactive floors sit above it.
        let level = p
            .iter()
            .zip(&gains)
            .find(|(x, _)| **x > 0.0)
            .map(|(x, g)| x + noise / g);
        if let Some(mu) = level {
            for (x, g) in p.iter().zip(&gains) {
                if *x > 0.0 {
                    prop_assert!((x + noise / g - mu).abs() < 1e-9 * mu);
                } else if *g > 0.0 {
                    prop_assert!(noise / g >= mu - 1e-9 * mu);
                }
            }
        }
    }
}
