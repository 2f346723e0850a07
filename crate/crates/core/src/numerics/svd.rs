//! One-sided (Hestenes) Jacobi SVD for dense complex matrices.
//!
//! The working matrix is orthogonalized column by column with complex Jacobi
//! rotations applied from the right, so singular values come from column
//! norms and small singular values keep full relative accuracy. Wide inputs
//! are handled through their adjoint.

use serde::{Deserialize, Serialize};

use super::matrix::{ComplexMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Thin SVD `A = U · diag(σ) · Vᴴ` with `min(rows, cols)` singular values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvdResult {
    pub left_vectors: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub right_vectors: ComplexMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let u = &self.left_vectors;
        let v = &self.right_vectors;
        let k = self.singular_values.len();
        ComplexMatrix::from_fn(u.rows(), v.rows(), |i, j| {
            (0..k)
                .map(|p| u[(i, p)] * self.singular_values[p] * v[(j, p)].conj())
                .sum()
        })
    }

    /// Number of singular values above `rel_tol · σ₁`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let cutoff = self.singular_values.first().copied().unwrap_or(0.0) * rel_tol;
        self.singular_values
            .iter()
            .filter(|&&s| s > cutoff && s > 0.0)
            .count()
    }
}

/// Convergence threshold on |aₚᴴaₑ| / (‖aₚ‖‖aₑ‖).
const ORTHO_TOL: f64 = 1e-15;

/// Sweep cap: 100 · min(rows, cols).
pub fn sweep_cap(rows: usize, cols: usize) -> usize {
    100 * rows.min(cols)
}

pub fn svd(a: &ComplexMatrix) -> Result<SvdResult> {
    if !a.is_finite() {
        return Err(Error::NonFinite("svd input".into()));
    }
    if a.rows() >= a.cols() {
        jacobi_tall(a)
    } else {
        let t = jacobi_tall(&a.adjoint())?;
        Ok(SvdResult {
            left_vectors: t.right_vectors,
            singular_values: t.singular_values,
            right_vectors: t.left_vectors,
        })
    }
}

/// Singular values only, sorted non-increasing.
pub fn singular_values(a: &ComplexMatrix) -> Result<Vec<f64>> {
    svd(a).map(|r| r.singular_values)
}

fn jacobi_tall(a: &ComplexMatrix) -> Result<SvdResult> {
    let (m, n) = a.shape();
    // Column-major working copies.
    let mut w: Vec<Vec<C64>> = a.columns();
    let mut v: Vec<Vec<C64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { ONE } else { ZERO }).collect())
        .collect();
    let mut norms: Vec<f64> = w.iter().map(|c| col_norm_sqr(c)).collect();
    let total: f64 = norms.iter().sum();
    // Columns below this energy are numerically zero and are left alone.
    let negligible = (f64::EPSILON * f64::EPSILON) * total;

    let cap = sweep_cap(m, n);
    let mut sweeps = 0;
    let mut residual = 0.0;
    loop {
        if sweeps == cap {
            return Err(Error::SvdNonConvergence { sweeps, residual });
        }
        sweeps += 1;
        residual = 0.0f64;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let gamma: C64 = w[p].iter().zip(&w[q]).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                let rel = g / (alpha * beta).sqrt();
                residual = residual.max(rel);
                if rel <= ORTHO_TOL {
                    continue;
                }
                rotated = true;
                // Rotate (aₚ, e^{-iφ}·a_q) as a real pair.
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let pq = phase.conj();
                rotate(&mut w, p, q, c, s, pq);
                rotate(&mut v, p, q, c, s, pq);
                norms[p] = col_norm_sqr(&w[p]);
                norms[q] = col_norm_sqr(&w[q]);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let mut singular_values = Vec::with_capacity(n);
    let mut u_cols: Vec<Option<Vec<C64>>> = Vec::with_capacity(n);
    let mut v_cols = Vec::with_capacity(n);
    for &j in &order {
        let sigma = norms[j].sqrt();
        singular_values.push(sigma);
        if norms[j] > negligible && sigma > 0.0 {
            u_cols.push(Some(w[j].iter().map(|z| z / sigma).collect()));
        } else {
            u_cols.push(None);
        }
        v_cols.push(v[j].clone());
    }
    let u_cols = complete_orthonormal(m, u_cols);

    Ok(SvdResult {
        left_vectors: ComplexMatrix::from_columns(&u_cols)?,
        singular_values,
        right_vectors: ComplexMatrix::from_columns(&v_cols)?,
    })
}

#[inline]
fn col_norm_sqr(c: &[C64]) -> f64 {
    c.iter().map(|z| z.norm_sqr()).sum()
}

/// aₚ ← c·aₚ − s·e^{-iφ}·a_q,  a_q ← s·aₚ + c·e^{-iφ}·a_q.
#[inline]
fn rotate(cols: &mut [Vec<C64>], p: usize, q: usize, c: f64, s: f64, phase_conj: C64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let yq = *y * phase_conj;
        let xp = *x;
        *x = xp * c - yq * s;
        *y = xp * s + yq * c;
    }
}

/// Fills `None` slots with unit vectors orthogonal to everything else, using
/// Gram–Schmidt against the standard basis.
fn complete_orthonormal(m: usize, cols: Vec<Option<Vec<C64>>>) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = cols.iter().flatten().cloned().collect();
    let mut candidate = 0;
    cols.into_iter()
        .map(|c| match c {
            Some(c) => c,
            None => loop {
                assert!(candidate < m, "cannot complete orthonormal basis");
                let mut e = vec![ZERO; m];
                e[candidate] = ONE;
                candidate += 1;
                // Two passes of modified Gram–Schmidt.
                for _ in 0..2 {
                    for b in &basis {
                        let proj: C64 = b.iter().zip(&e).map(|(x, y)| x.conj() * y).sum();
                        for (ei, bi) in e.iter_mut().zip(b) {
                            *ei -= proj * bi;
                        }
                    }
                }
                let nrm = col_norm_sqr(&e).sqrt();
                if nrm > 1e-8 {
                    e.iter_mut().for_each(|z| *z /= nrm);
                    basis.push(e.clone());
                    break e;
                }
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unitarity_residual(q: &ComplexMatrix) -> f64 {
        let g = q.adjoint_matmul(q).unwrap();
        g.max_abs_diff(&ComplexMatrix::identity(q.cols()))
    }

    #[test]
    fn identity_singular_values() {
        let r = svd(&ComplexMatrix::identity(3)).unwrap();
        for s in &r.singular_values {
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_matrix_has_orthonormal_factors() {
        let r = svd(&ComplexMatrix::zeros(4, 3)).unwrap();
        assert_eq!(r.singular_values, vec![0.0; 3]);
        assert!(unitarity_residual(&r.left_vectors) < 1e-12);
        assert!(unitarity_residual(&r.right_vectors) < 1e-12);
    }

    #[test]
    fn wide_matrix_goes_through_adjoint() {
        let a = ComplexMatrix::from_fn(2, 5, |i, j| C64::new((i + j) as f64, (i * j) as f64 - 1.0));
        let r = svd(&a).unwrap();
        assert_eq!(r.left_vectors.shape(), (2, 2));
        assert_eq!(r.right_vectors.shape(), (5, 2));
        let err = r.reconstruct().sub(&a).unwrap().frobenius_norm() / a.frobenius_norm();
        assert!(err < 1e-12);
    }

    #[test]
    fn rank_counts_nonzero_values() {
        let a = ComplexMatrix::from_diag(&[C64::new(3.0, 0.0), ZERO, C64::new(0.0, 1.0)]);
        let r = svd(&a).unwrap();
        assert_eq!(r.rank(1e-10), 2);
        assert!((r.singular_values[0] - 3.0).abs() < 1e-15);
        assert!((r.singular_values[1] - 1.0).abs() < 1e-15);
    }
}
