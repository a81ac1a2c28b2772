//! Dense and Kronecker-structured linear operators plus the two exact
//! Gaussian samplers used by the Gibbs block updates.
//!
//! The central object is [`LinearMap`], an `m x d` operator exposing
//! `forward`/`adjoint` products without necessarily storing the matrix.
//! The Kronecker variant represents `L ⊗ R` through its factors, so the
//! structured sampler can draw from a `d`-dimensional Gaussian while only
//! ever factorizing the `m x m` system `(X̃ Λ X̃ᵀ + I)` — auxiliary storage
//! stays `O(m² + d)` no matter how large `d` grows.
//!
//! Vectorization convention: `vec(Zᵀ)` for an `n x q` matrix `Z` is the
//! row-major flattening of `Z`, i.e. entry `(i, h)` lands at `i*q + h`.

mod backend;
mod sampler;

pub use sampler::{
    sample_gaussian_chol, sample_gaussian_chol_from_parts, sample_gaussian_chol_with_noise,
    sample_structured_gaussian, sample_structured_gaussian_with_noise,
};

pub(crate) use backend::{
    flatten_rm, singular_values_padded, spd_factor_dense, spd_inverse, thin_svd, SpdFactor,
};

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, Par};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{ensure_finite, Error, Result};

/// Largest `rows * cols` product for which a structured operator may be
/// densified; beyond it [`LinearMap::to_dense`] refuses.
pub const MATERIALIZATION_BUDGET: usize = 1 << 22;

/// Diagonal matrix with strictly positive entries, `Λ` in the structured
/// sampler and `Σ̃^{-1/2}` when the noise is diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalScale {
    entries: Array1<f64>,
}

impl DiagonalScale {
    pub fn new(entries: Array1<f64>) -> Result<Self> {
        for (k, v) in entries.iter().enumerate() {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::contract(format!(
                    "diagonal scale entry {k} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(DiagonalScale { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> ArrayView1<'_, f64> {
        self.entries.view()
    }
}

/// An `m x d` real linear operator with an exact adjoint.
///
/// `Kron { left, right }` is `left ⊗ right`, applied through the identity
/// `(L ⊗ R) vec(V) = vec(R V Lᵀ)` so the product is never expanded.
#[derive(Debug, Clone)]
pub enum LinearMap {
    Dense(Array2<f64>),
    Kron {
        left: Array2<f64>,
        right: Array2<f64>,
    },
}

/// The operator `(M ⊗ I_q)`: `forward(vec(V)) = vec(V Mᵀ)` for `V` with
/// `q` rows.
pub fn kron_identity_left(m: ArrayView2<'_, f64>, q: usize) -> Result<LinearMap> {
    if q == 0 {
        return Err(Error::contract("identity block size q must be >= 1"));
    }
    ensure_finite("kron factor", m.iter().cloned().collect::<Vec<_>>().as_slice())?;
    Ok(LinearMap::Kron {
        left: m.to_owned(),
        right: Array2::eye(q),
    })
}

/// The operator `(X ⊗ A)`: with `β = vec(Bᵀ)` for `B` of shape `p x k`,
/// `forward(β) = vec((X B Aᵀ)ᵀ)`.
pub fn kron_right_identity(x: ArrayView2<'_, f64>, a: ArrayView2<'_, f64>) -> Result<LinearMap> {
    ensure_finite("kron left factor", x.iter().cloned().collect::<Vec<_>>().as_slice())?;
    ensure_finite("kron right factor", a.iter().cloned().collect::<Vec<_>>().as_slice())?;
    Ok(LinearMap::Kron {
        left: x.to_owned(),
        right: a.to_owned(),
    })
}

impl LinearMap {
    pub fn dense(m: Array2<f64>) -> Self {
        LinearMap::Dense(m)
    }

    pub fn rows(&self) -> usize {
        match self {
            LinearMap::Dense(m) => m.nrows(),
            LinearMap::Kron { left, right } => left.nrows() * right.nrows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            LinearMap::Dense(m) => m.ncols(),
            LinearMap::Kron { left, right } => left.ncols() * right.ncols(),
        }
    }

    /// `y = op · x`.
    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.cols() {
            return Err(Error::contract(format!(
                "forward expects a vector of length {}, got {}",
                self.cols(),
                x.len()
            )));
        }
        Ok(match self {
            LinearMap::Dense(m) => m.dot(&x),
            LinearMap::Kron { left, right } => {
                // x is vec(V) with V : right.ncols() x left.ncols() in
                // column-major terms; as row-major data it is Vᵀ.
                let vt = x
                    .to_owned()
                    .into_shape_with_order((left.ncols(), right.ncols()))
                    .expect("length checked");
                flatten_rm(left.dot(&vt).dot(&right.t()))
            }
        })
    }

    /// `x = opᵀ · y`.
    pub fn adjoint(&self, y: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if y.len() != self.rows() {
            return Err(Error::contract(format!(
                "adjoint expects a vector of length {}, got {}",
                self.rows(),
                y.len()
            )));
        }
        Ok(match self {
            LinearMap::Dense(m) => m.t().dot(&y),
            LinearMap::Kron { left, right } => {
                let wt = y
                    .to_owned()
                    .into_shape_with_order((left.nrows(), right.nrows()))
                    .expect("length checked");
                flatten_rm(left.t().dot(&wt).dot(&right.view()))
            }
        })
    }

    /// Densified operator, refused when `rows * cols` exceeds `budget`
    /// (see [`MATERIALIZATION_BUDGET`]).
    pub fn to_dense(&self, budget: usize) -> Result<Array2<f64>> {
        let (r, c) = (self.rows(), self.cols());
        if r.saturating_mul(c) > budget {
            return Err(Error::contract(format!(
                "materializing a {r}x{c} operator exceeds the budget of {budget} entries"
            )));
        }
        Ok(match self {
            LinearMap::Dense(m) => m.clone(),
            LinearMap::Kron { left, right } => {
                let (lr, lc) = (left.nrows(), left.ncols());
                let (rr, rc) = (right.nrows(), right.ncols());
                let mut out = Array2::zeros((lr * rr, lc * rc));
                for i in 0..lr {
                    for j in 0..lc {
                        let lij = left[[i, j]];
                        for a in 0..rr {
                            for b in 0..rc {
                                out[[i * rr + a, j * rc + b]] = lij * right[[a, b]];
                            }
                        }
                    }
                }
                out
            }
        })
    }

    /// Factorization of `op Λ opᵀ + I_m`, the system solved once per draw
    /// of the structured sampler.
    pub(crate) fn gram_factor(&self, scale: &DiagonalScale) -> Result<GramFactor> {
        if scale.len() != self.cols() {
            return Err(Error::contract(format!(
                "scale has {} entries, operator has {} columns",
                scale.len(),
                self.cols()
            )));
        }
        match self {
            LinearMap::Dense(m) => {
                let rows = m.nrows();
                let f = SpdFactor::new_with_rebuild(rows, |dst| {
                    dense_gram(m.view(), scale.entries(), dst);
                })?;
                Ok(GramFactor::Direct(f))
            }
            LinearMap::Kron { left, right } => {
                let (n, q) = (left.nrows(), right.nrows());
                let f = SpdFactor::new_with_rebuild(n * q, |dst| {
                    kron_gram_block_major(left.view(), right.view(), scale.entries(), dst);
                })?;
                Ok(GramFactor::Permuted { factor: f, n, q })
            }
        }
    }
}

/// `dst = A diag(s) Aᵀ + I`, full lower triangle written.
fn dense_gram(a: ArrayView2<'_, f64>, s: ArrayView1<'_, f64>, dst: &mut Mat<f64>) {
    let (m, d) = (a.nrows(), a.ncols());
    let mut scaled = backend::to_faer(a);
    for k in 0..d {
        let sq = s[k].sqrt();
        for i in 0..m {
            scaled[(i, k)] *= sq;
        }
    }
    let sc = scaled.as_ref();
    matmul(dst.as_mut(), Accum::Replace, sc, sc.transpose(), 1.0, Par::Seq);
    for i in 0..m {
        dst[(i, i)] += 1.0;
    }
}

/// Lower triangle of `(L ⊗ R) Λ (L ⊗ R)ᵀ + I` in *component-major* order
/// (entry `(a, i)` of the row space at index `a*n + i`).
///
/// With `Λ = blockdiag(D_1, ..., D_p)` over the columns of `L`, the gram
/// splits as `Σ_h (L Λ_h Lᵀ) ⊗ (r_h r_hᵀ)` over the columns `r_h` of `R`,
/// which is assembled as one flat product `Hmat · Γ` per block column so
/// the inner dimension stays the number of `R` columns.
fn kron_gram_block_major(
    left: ArrayView2<'_, f64>,
    right: ArrayView2<'_, f64>,
    s: ArrayView1<'_, f64>,
    dst: &mut Mat<f64>,
) {
    let (n, p) = (left.nrows(), left.ncols());
    let (q, k) = (right.nrows(), right.ncols());
    let x = backend::to_faer(left);

    // Hmat column h holds vec(L Λ_h Lᵀ); Λ_h = diag over j of s[j*k + h].
    let mut f_buf = Mat::<f64>::zeros(n, p);
    let mut hmat = Mat::<f64>::zeros(n * n, k);
    for h in 0..k {
        for j in 0..p {
            let w = s[j * k + h].sqrt();
            for i in 0..n {
                f_buf[(i, j)] = x[(i, j)] * w;
            }
        }
        let col = hmat.col_mut(h);
        let hv = MatMut::from_column_major_slice_mut(
            col.try_as_col_major_mut().expect("freshly allocated").as_slice_mut(),
            n,
            n,
        );
        matmul(hv, Accum::Replace, &f_buf, f_buf.transpose(), 1.0, Par::Seq);
    }

    // Block column b of the component-major gram: for a >= b the n x n
    // block (a, b) is Σ_h R[a,h] R[b,h] (L Λ_h Lᵀ).
    let mut gamma = Mat::<f64>::zeros(k, q);
    let mut panel = Mat::<f64>::zeros(n * n, q);
    for b in 0..q {
        let w = q - b;
        for h in 0..k {
            let rb = right[[b, h]];
            for a in b..q {
                gamma[(h, a - b)] = right[[a, h]] * rb;
            }
        }
        matmul(
            panel.get_mut(.., ..w),
            Accum::Replace,
            &hmat,
            gamma.get(.., ..w),
            1.0,
            Par::Seq,
        );
        for off in 0..w {
            let a = b + off;
            let src = panel.col(off);
            let src = src.try_as_col_major().expect("col major").as_slice();
            for i2 in 0..n {
                let col = dst.col_mut(b * n + i2);
                let dstc = col.try_as_col_major_mut().expect("col major").as_slice_mut();
                dstc[a * n..(a + 1) * n].copy_from_slice(&src[i2 * n..(i2 + 1) * n]);
            }
        }
    }
    for i in 0..n * q {
        dst[(i, i)] += 1.0;
    }
}

/// Factorized `op Λ opᵀ + I`, solving right-hand sides given in the
/// operator's own row ordering.
pub(crate) enum GramFactor {
    Direct(SpdFactor),
    /// Factor held in component-major order; right-hand sides arrive
    /// observation-major and are permuted on the way in and out.
    Permuted { factor: SpdFactor, n: usize, q: usize },
}

impl GramFactor {
    pub(crate) fn solve_in_place(&self, rhs: &mut [f64]) {
        match self {
            GramFactor::Direct(f) => f.solve_in_place(rhs),
            GramFactor::Permuted { factor, n, q } => {
                let (n, q) = (*n, *q);
                let mut perm = vec![0.0; rhs.len()];
                for i in 0..n {
                    for a in 0..q {
                        perm[a * n + i] = rhs[i * q + a];
                    }
                }
                factor.solve_in_place(&mut perm);
                for i in 0..n {
                    for a in 0..q {
                        rhs[i * q + a] = perm[a * n + i];
                    }
                }
            }
        }
    }
}
