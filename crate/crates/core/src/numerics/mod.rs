//! Dense complex linear algebra used by every other module.

mod matrix;
mod svd;

pub use matrix::{dot_h, dot_t, norm, norm_sqr, ComplexMatrix, C64, ONE, ZERO};
pub use svd::{singular_values, svd, sweep_cap, SvdResult};

use crate::error::{Error, Result};

/// Relative cutoff (w.r.t. σ₁) below which singular values count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// `log₂ det(I + (E/σ²)·H·Hᴴ)` in bits/s/Hz.
///
/// Evaluated through a Cholesky factorization of the smaller Gram form
/// `I + c·HᴴH` (or `I + c·HHᴴ`); both share the same determinant.
pub fn log_det_capacity(h: &ComplexMatrix, symbol_energy: f64, noise_var: f64) -> Result<f64> {
    check_capacity_args(symbol_energy, noise_var)?;
    let c = symbol_energy / noise_var;
    let gram = if h.rows() >= h.cols() {
        h.adjoint_matmul(h)?
    } else {
        h.matmul(&h.adjoint())?
    };
    let mut a = gram.scale(c);
    for i in 0..a.rows() {
        a[(i, i)] += ONE;
    }
    Ok(log2_det_hpd(&a)?.max(0.0))
}

/// Same quantity as [`log_det_capacity`] computed from singular values:
/// `Σ log₂(1 + (E/σ²)·σᵢ²)`.
pub fn log_det_capacity_svd(h: &ComplexMatrix, symbol_energy: f64, noise_var: f64) -> Result<f64> {
    check_capacity_args(symbol_energy, noise_var)?;
    let c = symbol_energy / noise_var;
    Ok(singular_values(h)?
        .iter()
        .map(|s| (c * s * s).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2)
}

fn check_capacity_args(symbol_energy: f64, noise_var: f64) -> Result<()> {
    if !(noise_var > 0.0) || !noise_var.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be positive, got {noise_var}"
        )));
    }
    if !(symbol_energy >= 0.0) || !symbol_energy.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "symbol energy must be non-negative, got {symbol_energy}"
        )));
    }
    Ok(())
}

/// Lower Cholesky factor of a Hermitian positive-definite matrix.
pub fn cholesky(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Dimension(format!("cholesky of {:?}", a.shape())));
    }
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let d = d.sqrt();
        l[(j, j)] = C64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// `log₂ det(A)` for Hermitian positive-definite `A`.
pub fn log2_det_hpd(a: &ComplexMatrix) -> Result<f64> {
    let l = cholesky(a)?;
    Ok(2.0 * (0..l.rows()).map(|i| l[(i, i)].re.log2()).sum::<f64>())
}

/// Moore–Penrose pseudo-inverse via the SVD, with singular values below
/// `RANK_TOL · σ₁` treated as zero.
pub fn pseudo_inverse(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let r = svd(a)?;
    let s1 = r.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = s1 * RANK_TOL;
    let u = &r.left_vectors;
    let v = &r.right_vectors;
    let inv: Vec<f64> = r
        .singular_values
        .iter()
        .map(|&s| if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 })
        .collect();
    Ok(ComplexMatrix::from_fn(a.cols(), a.rows(), |i, j| {
        inv.iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(p, &w)| v[(i, p)] * w * u[(j, p)].conj())
            .sum()
    }))
}

/// Water-filling over parallel channels with power gains `gains`:
/// `p_i = max(0, μ − noise/g_i)` with `Σ p_i = total`.
pub fn water_filling(gains: &[f64], total: f64, noise_var: f64) -> Result<Vec<f64>> {
    if !(total >= 0.0) || !(noise_var > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "water-filling power {total}, noise {noise_var}"
        )));
    }
    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    let mut power = vec![0.0; gains.len()];
    if order.is_empty() || total == 0.0 {
        return Ok(power);
    }
    // Largest active set whose weakest member still gets positive power.
    let mut active = order.len();
    let mut level = 0.0;
    while active > 0 {
        let floor: f64 = order[..active].iter().map(|&i| noise_var / gains[i]).sum();
        level = (total + floor) / active as f64;
        if level > noise_var / gains[order[active - 1]] {
            break;
        }
        active -= 1;
    }
    for &i in &order[..active] {
        power[i] = level - noise_var / gains[i];
    }
    Ok(power)
}
