//! Exact samplers for the two Gaussian full conditionals.
//!
//! `sample_structured_gaussian` draws from `N(Ω⁻¹ X̃ᵀ ỹ, Ω⁻¹)` with
//! `Ω = X̃ᵀ X̃ + Λ⁻¹` by data augmentation: the only factorization is of
//! the `m x m` system `(X̃ Λ X̃ᵀ + I)`, so the cost is governed by the row
//! dimension even when the column dimension is much larger.
//!
//! `sample_gaussian_chol` draws from `N(Ω⁻¹ Xᵀ ỹ, Ω⁻¹)` with
//! `Ω = Xᵀ X + I` through a Cholesky factorization and three triangular
//! solves; intended for blocks whose dimension is modest.
//!
//! Both samplers have `_with_noise` variants taking a closure that fills
//! the standard normal input noise, which lets tests force it to zero and
//! recover conditional means exactly.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DiagonalScale, LinearMap};
use crate::error::{ensure_finite, Error, Result};

fn fill_standard<R: Rng + ?Sized>(rng: &mut R, buf: &mut [f64]) {
    for v in buf.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

/// One draw from `N(Ω⁻¹ X̃ᵀ ỹ, Ω⁻¹)`, `Ω = X̃ᵀ X̃ + Λ⁻¹`.
pub fn sample_structured_gaussian<R: Rng + ?Sized>(
    op: &LinearMap,
    scale: &DiagonalScale,
    ytilde: ArrayView1<'_, f64>,
    rng: &mut R,
) -> Result<Array1<f64>> {
    sample_structured_gaussian_with_noise(op, scale, ytilde, &mut |buf| fill_standard(rng, buf))
}

/// As [`sample_structured_gaussian`], with the standard normal noise
/// `(u, δ)` supplied by `fill` (called once for each buffer).
pub fn sample_structured_gaussian_with_noise(
    op: &LinearMap,
    scale: &DiagonalScale,
    ytilde: ArrayView1<'_, f64>,
    fill: &mut dyn FnMut(&mut [f64]),
) -> Result<Array1<f64>> {
    let (m, d) = (op.rows(), op.cols());
    if m == 0 || d == 0 {
        return Err(Error::contract("structured sampler needs m >= 1 and d >= 1"));
    }
    if ytilde.len() != m {
        return Err(Error::contract(format!(
            "target has length {}, operator has {m} rows",
            ytilde.len()
        )));
    }
    ensure_finite("target", ytilde.as_slice().unwrap_or(&ytilde.to_vec()))?;

    // u ~ N(0, Λ)
    let mut u = Array1::zeros(d);
    fill(u.as_slice_mut().expect("owned"));
    for (uk, sk) in u.iter_mut().zip(scale.entries()) {
        *uk *= sk.sqrt();
    }

    // v = X̃ u + δ,  δ ~ N(0, I_m)
    let mut v = op.forward(u.view())?;
    let mut delta = vec![0.0; m];
    fill(&mut delta);
    for (vi, di) in v.iter_mut().zip(delta.iter()) {
        *vi += *di;
    }

    // (X̃ Λ X̃ᵀ + I) w = ỹ - v
    let factor = op.gram_factor(scale)?;
    let mut w: Vec<f64> = ytilde
        .iter()
        .zip(v.iter())
        .map(|(y, vi)| *y - *vi)
        .collect();
    factor.solve_in_place(&mut w);

    // β = u + Λ X̃ᵀ w
    let t = op.adjoint(ArrayView1::from(&w))?;
    for ((uk, tk), sk) in u.iter_mut().zip(t.iter()).zip(scale.entries()) {
        *uk += sk * tk;
    }
    Ok(u)
}

/// One draw from `N(Ω⁻¹ Xᵀ ỹ, Ω⁻¹)`, `Ω = Xᵀ X + I_d`, via Cholesky.
pub fn sample_gaussian_chol<R: Rng + ?Sized>(
    xstar: ArrayView2<'_, f64>,
    ytilde: ArrayView1<'_, f64>,
    rng: &mut R,
) -> Result<Array1<f64>> {
    sample_gaussian_chol_with_noise(xstar, ytilde, &mut |buf| fill_standard(rng, buf))
}

/// As [`sample_gaussian_chol`], with the `N(0, I_d)` input supplied by
/// `fill`.
pub fn sample_gaussian_chol_with_noise(
    xstar: ArrayView2<'_, f64>,
    ytilde: ArrayView1<'_, f64>,
    fill: &mut dyn FnMut(&mut [f64]),
) -> Result<Array1<f64>> {
    let (m, d) = (xstar.nrows(), xstar.ncols());
    if m != ytilde.len() {
        return Err(Error::contract(format!(
            "target has length {}, design has {m} rows",
            ytilde.len()
        )));
    }
    let mut gram = xstar.t().dot(&xstar);
    for i in 0..d {
        gram[[i, i]] += 1.0;
    }
    let xty = xstar.t().dot(&ytilde);
    sample_gaussian_chol_from_parts(gram, xty.view(), fill)
}

/// Draws from `N(Ω⁻¹ b, Ω⁻¹)` given `Ω = gram` (already including the
/// `+ I` prior term) and `b = Xᵀ ỹ`: factor `Ω = L Lᵀ`, solve
/// `L v = b`, `Lᵀ m = v`, `Lᵀ w = z` with `z ~ N(0, I)`, return `m + w`.
pub fn sample_gaussian_chol_from_parts(
    gram: Array2<f64>,
    xty: ArrayView1<'_, f64>,
    fill: &mut dyn FnMut(&mut [f64]),
) -> Result<Array1<f64>> {
    let d = gram.nrows();
    if gram.ncols() != d || xty.len() != d || d == 0 {
        return Err(Error::contract(format!(
            "gram must be square and match the target: {}x{} vs {}",
            gram.nrows(),
            gram.ncols(),
            xty.len()
        )));
    }
    let factor = super::spd_factor_dense(gram.view())?;
    let mut mean: Vec<f64> = xty.to_vec();
    factor.solve_lower_in_place(&mut mean);
    factor.solve_upper_in_place(&mut mean);

    let mut w = vec![0.0; d];
    fill(&mut w);
    factor.solve_upper_in_place(&mut w);

    for (mk, wk) in mean.iter_mut().zip(w.iter()) {
        *mk += *wk;
    }
    Ok(Array1::from_vec(mean))
}

