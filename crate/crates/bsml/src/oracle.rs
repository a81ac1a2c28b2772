//! Brute-force reference implementations used only by unit tests. These
//! deliberately avoid the optimized code paths they are checked against.

use ndarray::{Array1, Array2, ArrayView2};

/// Dense Kronecker product by definition.
pub(crate) fn kron_dense(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = a[[i, j]] * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Unblocked textbook Cholesky, returning the lower factor.
pub(crate) fn naive_cholesky(a: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                assert!(s > 0.0, "naive cholesky: non-positive pivot {s}");
                l[[i, j]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    l
}

/// SPD inverse through the naive Cholesky factor.
pub(crate) fn naive_spd_inverse(a: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = a.nrows();
    let l = naive_cholesky(a);
    let mut inv = Array2::<f64>::zeros((n, n));
    for col in 0..n {
        // forward substitution L y = e_col
        let mut y = Array1::<f64>::zeros(n);
        for i in 0..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[[i, k]] * y[k];
            }
            y[i] = s / l[[i, i]];
        }
        // back substitution Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[[k, i]] * inv[[k, col]];
            }
            inv[[i, col]] = s / l[[i, i]];
        }
    }
    inv
}

/// Sample mean of a collection of equal-length draws.
pub(crate) fn sample_mean(draws: &[Array1<f64>]) -> Array1<f64> {
    let d = draws[0].len();
    let mut m = Array1::<f64>::zeros(d);
    for x in draws {
        m += x;
    }
    m / draws.len() as f64
}

/// Sample covariance (denominator `n`).
pub(crate) fn sample_cov(draws: &[Array1<f64>]) -> Array2<f64> {
    let d = draws[0].len();
    let mean = sample_mean(draws);
    let mut c = Array2::<f64>::zeros((d, d));
    for x in draws {
        let e = x - &mean;
        for i in 0..d {
            for j in 0..d {
                c[[i, j]] += e[i] * e[j];
            }
        }
    }
    c / draws.len() as f64
}

/// Asserts every entry of `got` is within `tol` of `want`.
pub(crate) fn assert_close2(got: ArrayView2<'_, f64>, want: ArrayView2<'_, f64>, tol: f64) {
    assert_eq!(got.shape(), want.shape());
    for (g, w) in got.iter().zip(want.iter()) {
        assert!(
            (g - w).abs() <= tol,
            "entries differ: got {g}, want {w} (tol {tol})"
        );
    }
}
