//! Deterministic post-processing of the posterior mean: group-lasso row
//! selection via one-pass soft thresholding, automatic penalty choice,
//! rank estimation by singular-value thresholding, and assembly of the
//! final row-sparse, rank-reduced estimate.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{singular_values_padded, thin_svd};

/// Row-sparse estimate produced by [`select_rows`].
#[derive(Debug, Clone)]
pub struct SparseEstimate {
    /// `p x q` matrix whose surviving rows are shrunk copies of the
    /// posterior-mean rows.
    pub c_r: Array2<f64>,
    /// Indices of nonzero rows, ascending.
    pub selected: Vec<usize>,
    /// Penalties used, one per predictor (`+∞` marks a row whose
    /// posterior-mean norm was numerically zero).
    pub mu: Array1<f64>,
}

/// Output of [`estimate_rank`].
#[derive(Debug, Clone)]
pub struct RankEstimate {
    /// Number of singular values of `X Ĉ_R` strictly above the threshold.
    pub rank_hat: usize,
    /// Threshold `ω`, the largest singular value of `Y - X Ĉ_R`.
    pub omega: f64,
    /// Singular values of `X Ĉ_R`, descending, padded to `q` entries.
    pub singular_values: Vec<f64>,
}

/// Final estimate: the nonzero rows of `Ĉ_R` replaced by their best
/// rank-`r̂` approximation.
#[derive(Debug, Clone)]
pub struct BsmlEstimate {
    pub c_rr: Array2<f64>,
    pub rank_hat: usize,
    pub singular_values: Vec<f64>,
    pub omega: f64,
}

/// Default penalties `μ_j = ‖C̄⁽ʲ⁾‖₂⁻²` (the inverse squared row norm of
/// the posterior mean); rows with norm below `1e-14` get `+∞`.
pub fn default_penalties(c_mean: ArrayView2<'_, f64>) -> Array1<f64> {
    Array1::from_shape_fn(c_mean.nrows(), |j| {
        let norm = row_norm(c_mean, j);
        if norm < 1e-14 {
            f64::INFINITY
        } else {
            1.0 / (norm * norm)
        }
    })
}

/// One parallel pass of the group-lasso soft threshold: every row is
/// computed from the posterior mean alone,
/// `Ĉ_R⁽ʲ⁾ = (1 − μ_j / (2‖X_j‖²‖C̄⁽ʲ⁾‖))₊ · C̄⁽ʲ⁾`,
/// with rows zeroed when `‖X_j‖ = 0` or `‖C̄⁽ʲ⁾‖ = 0`.
pub fn select_rows(
    c_mean: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    mu: ArrayView1<'_, f64>,
) -> Result<SparseEstimate> {
    let (p, q) = c_mean.dim();
    if x.ncols() != p || mu.len() != p {
        return Err(Error::contract(format!(
            "shape mismatch: C̄ is {p}x{q}, X has {} columns, mu has {} entries",
            x.ncols(),
            mu.len()
        )));
    }
    let mut c_r = Array2::zeros((p, q));
    let mut selected = Vec::new();
    for j in 0..p {
        let xn2 = x.column(j).iter().map(|v| v * v).sum::<f64>();
        let cn = row_norm(c_mean, j);
        if xn2 <= 0.0 || cn <= 0.0 {
            continue;
        }
        let shrink = 1.0 - mu[j] / (2.0 * xn2 * cn);
        if shrink > 0.0 {
            for h in 0..q {
                c_r[[j, h]] = shrink * c_mean[[j, h]];
            }
            selected.push(j);
        }
    }
    Ok(SparseEstimate {
        c_r,
        selected,
        mu: mu.to_owned(),
    })
}

/// Rank estimate: `r̂ = #{h : s_h > ω}` where `s_h` are the singular
/// values of `X Ĉ_R` and `ω` is the largest singular value of
/// `Y − X Ĉ_R`. Singular values below the floating-point rank tolerance
/// of `X Ĉ_R` never count, so an exactly reproduced `Y` yields the
/// numerical rank.
pub fn estimate_rank(
    c_r: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
) -> Result<RankEstimate> {
    let (p, q) = c_r.dim();
    if x.ncols() != p || y.nrows() != x.nrows() || y.ncols() != q {
        return Err(Error::contract("estimate_rank: inconsistent shapes"));
    }
    let fitted = x.dot(&c_r);
    let s = singular_values_padded(fitted.view())?;
    let resid = &y.to_owned() - &fitted;
    let omega = singular_values_padded(resid.view())?
        .first()
        .copied()
        .unwrap_or(0.0);
    let tol = s.first().copied().unwrap_or(0.0)
        * x.nrows().max(q) as f64
        * f64::EPSILON;
    let rank_hat = s.iter().filter(|v| **v > omega.max(tol)).count();
    Ok(RankEstimate {
        rank_hat,
        omega,
        singular_values: s,
    })
}

/// Truncates the nonzero-row submatrix of `Ĉ_R` to the first `r̂` singular
/// triplets and reinserts the zero rows.
pub fn reduce_rank(sparse: &SparseEstimate, rank: &RankEstimate) -> Result<BsmlEstimate> {
    let (p, q) = sparse.c_r.dim();
    let k = sparse.selected.len();
    let cap = rank.rank_hat.min(k.min(q));
    let mut c_rr = Array2::zeros((p, q));
    if cap > 0 {
        let mut sub = Array2::zeros((k, q));
        for (r, &j) in sparse.selected.iter().enumerate() {
            for h in 0..q {
                sub[[r, h]] = sparse.c_r[[j, h]];
            }
        }
        let (u, s, vt) = thin_svd(sub.view())?;
        let mut trunc = Array2::zeros((k, q));
        for t in 0..cap.min(s.len()) {
            for r in 0..k {
                for h in 0..q {
                    trunc[[r, h]] += s[t] * u[[r, t]] * vt[[t, h]];
                }
            }
        }
        for (r, &j) in sparse.selected.iter().enumerate() {
            for h in 0..q {
                c_rr[[j, h]] = trunc[[r, h]];
            }
        }
    }
    Ok(BsmlEstimate {
        c_rr,
        rank_hat: cap,
        singular_values: rank.singular_values.clone(),
        omega: rank.omega,
    })
}

/// Full pipeline from a posterior mean: automatic penalties, one-pass row
/// selection, rank estimation and rank reduction.
pub fn postprocess(
    c_mean: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
) -> Result<(SparseEstimate, RankEstimate, BsmlEstimate)> {
    let mu = default_penalties(c_mean);
    let sparse = select_rows(c_mean, x, mu.view())?;
    let rank = estimate_rank(sparse.c_r.view(), x, y)?;
    let bsml = reduce_rank(&sparse, &rank)?;
    Ok((sparse, rank, bsml))
}

/// Per-row selection frequency across stored coefficient draws: each draw
/// is pushed through the automatic-penalty selection and the fraction of
/// draws keeping each row is reported.
pub fn selection_frequencies(
    draws: &[Array2<f64>],
    x: ArrayView2<'_, f64>,
) -> Result<Array1<f64>> {
    if draws.is_empty() {
        return Err(Error::contract("selection frequencies need at least one draw"));
    }
    let p = draws[0].nrows();
    let mut freq = Array1::<f64>::zeros(p);
    for draw in draws {
        let mu = default_penalties(draw.view());
        let sel = select_rows(draw.view(), x, mu.view())?;
        for j in sel.selected {
            freq[j] += 1.0;
        }
    }
    Ok(freq / draws.len() as f64)
}

fn row_norm(m: ArrayView2<'_, f64>, j: usize) -> f64 {
    m.row(j).iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests;
