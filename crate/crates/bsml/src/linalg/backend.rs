//! Thin wrappers around `faer` factorizations.
//!
//! The public surface of this crate speaks `ndarray`; everything here is
//! crate-internal plumbing that converts at the boundary and keeps the
//! factorizations single-threaded (parallelism lives at the replicate
//! level, see `sim::run_study`).

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt;
use faer::linalg::triangular_solve::{
    solve_lower_triangular_in_place, solve_upper_triangular_in_place,
};
use faer::prelude::ReborrowMut;
use faer::{Mat, MatMut, Par, Spec};
use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

pub(crate) fn to_faer(a: ArrayView2<'_, f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn to_ndarray(m: &Mat<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

pub(crate) fn col_vec_mut(v: &mut [f64]) -> MatMut<'_, f64> {
    let n = v.len();
    MatMut::from_column_major_slice_mut(v, n, 1)
}

/// Cholesky factor of a symmetric positive definite matrix, computed in
/// place. `rebuild` must fill the full lower triangle (diagonal included);
/// on a failed factorization it is invoked again and retried once with
/// jitter `1e-10 * mean(diag)` added to the diagonal. A second failure is
/// a hard error.
pub(crate) struct SpdFactor {
    l: Mat<f64>,
}

impl SpdFactor {
    pub(crate) fn new_with_rebuild(
        dim: usize,
        rebuild: impl Fn(&mut Mat<f64>),
    ) -> Result<Self> {
        let mut m = Mat::<f64>::zeros(dim, dim);
        rebuild(&mut m);
        let mut stack_buf = MemBuffer::new(llt::factor::cholesky_in_place_scratch::<f64>(
            dim,
            Par::Seq,
            Spec::default(),
        ));
        let ok = llt::factor::cholesky_in_place(
            m.as_mut(),
            Default::default(),
            Par::Seq,
            MemStack::new(&mut stack_buf),
            Spec::default(),
        )
        .is_ok();
        if !ok {
            rebuild(&mut m);
            let jitter = 1e-10 * mean_diag(&m);
            for i in 0..dim {
                m[(i, i)] += jitter;
            }
            llt::factor::cholesky_in_place(
                m.as_mut(),
                Default::default(),
                Par::Seq,
                MemStack::new(&mut stack_buf),
                Spec::default(),
            )
            .map_err(|e| {
                let idx = match e {
                    faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index } => {
                        index
                    }
                };
                Error::numerical(
                    format!("cholesky failed after jitter retry (pivot {idx})"),
                    idx as f64,
                )
            })?;
        }
        Ok(SpdFactor { l: m })
    }

    pub(crate) fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `(L Lᵀ) x = rhs` in place.
    pub(crate) fn solve_in_place(&self, rhs: &mut [f64]) {
        assert_eq!(rhs.len(), self.dim(), "spd solve dimension mismatch");
        let mut v = col_vec_mut(rhs);
        solve_lower_triangular_in_place(self.l.as_ref(), v.rb_mut(), Par::Seq);
        solve_upper_triangular_in_place(self.l.transpose(), v, Par::Seq);
    }

    /// Solves `L x = rhs` in place (forward substitution only).
    pub(crate) fn solve_lower_in_place(&self, rhs: &mut [f64]) {
        solve_lower_triangular_in_place(self.l.as_ref(), col_vec_mut(rhs), Par::Seq);
    }

    /// Solves `Lᵀ x = rhs` in place (back substitution only).
    pub(crate) fn solve_upper_in_place(&self, rhs: &mut [f64]) {
        solve_upper_triangular_in_place(self.l.transpose(), col_vec_mut(rhs), Par::Seq);
    }

    pub(crate) fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    /// Lower Cholesky factor as an `ndarray` matrix (upper part zeroed).
    pub(crate) fn lower(&self) -> Array2<f64> {
        let n = self.dim();
        Array2::from_shape_fn((n, n), |(i, j)| if j <= i { self.l[(i, j)] } else { 0.0 })
    }
}

fn mean_diag(m: &Mat<f64>) -> f64 {
    let n = m.nrows();
    (0..n).map(|i| m[(i, i)]).sum::<f64>() / n as f64
}

/// Cholesky of a small SPD `ndarray` matrix (noise covariances and the
/// A-step gram). Jitter-free: failure maps straight to a numerical error.
pub(crate) fn spd_factor_dense(a: ArrayView2<'_, f64>) -> Result<SpdFactor> {
    if a.nrows() != a.ncols() {
        return Err(Error::contract(format!(
            "spd factor needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let m = to_faer(a);
    SpdFactor::new_with_rebuild(a.nrows(), move |dst| dst.copy_from(&m))
}

/// Matrix inverse through the Cholesky factor (symmetric positive definite
/// input only).
pub(crate) fn spd_inverse(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let f = spd_factor_dense(a)?;
    let n = f.dim();
    let mut inv = Array2::<f64>::zeros((n, n));
    let mut col = vec![0.0; n];
    for j in 0..n {
        col.fill(0.0);
        col[j] = 1.0;
        f.solve_in_place(&mut col);
        for i in 0..n {
            inv[[i, j]] = col[i];
        }
    }
    Ok(inv)
}

/// Singular values of a rectangular matrix, descending, padded with zeros
/// to `a.ncols()` entries when the row count is the limiting dimension.
pub(crate) fn singular_values_padded(a: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    let m = to_faer(a);
    let mut s = m
        .singular_values()
        .map_err(|_| Error::numerical("svd failed to converge", f64::NAN))?;
    s.resize(a.ncols(), 0.0);
    Ok(s)
}

/// Thin SVD `(u, s, vt)` of a rectangular matrix.
pub(crate) fn thin_svd(a: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Vec<f64>, Array2<f64>)> {
    let m = to_faer(a);
    let svd = m
        .thin_svd()
        .map_err(|_| Error::numerical("svd failed to converge", f64::NAN))?;
    let k = svd.S().dim();
    let s = (0..k).map(|i| svd.S()[i]).collect();
    let u = Array2::from_shape_fn((a.nrows(), k), |(i, j)| svd.U()[(i, j)]);
    let vt = Array2::from_shape_fn((k, a.ncols()), |(i, j)| svd.V()[(j, i)]);
    Ok((u, s, vt))
}

/// Row-major flattening, the vec(Zᵀ) convention used throughout the
/// sampler (observation-major for an n x q response block).
pub(crate) fn flatten_rm(a: Array2<f64>) -> Array1<f64> {
    let a = if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().to_owned()
    };
    let (v, _) = a.into_raw_vec_and_offset();
    Array1::from_vec(v)
}
