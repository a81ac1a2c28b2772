//! Inverse-Wishart sampling through the Bartlett decomposition.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{spd_factor_dense, spd_inverse};

/// One draw `Σ ~ inverse-Wishart(ν, Ψ)` (density ∝ |Σ|^{-(ν+q+1)/2}
/// exp(-tr(Ψ Σ⁻¹)/2)). Fractional degrees of freedom are fine as long as
/// `ν > q - 1`.
pub fn inverse_wishart<R: Rng + ?Sized>(
    nu: f64,
    psi: ArrayView2<'_, f64>,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let q = psi.nrows();
    if psi.ncols() != q || q == 0 {
        return Err(Error::contract("scale matrix must be square and non-empty"));
    }
    if nu <= q as f64 - 1.0 {
        return Err(Error::contract(format!(
            "inverse-Wishart needs nu > q - 1, got nu = {nu}, q = {q}"
        )));
    }
    // Σ⁻¹ = W ~ Wishart(ν, Ψ⁻¹): with Ψ = L Lᵀ, T = L⁻ᵀ satisfies
    // T Tᵀ = Ψ⁻¹, and W = (T A)(T A)ᵀ for a Bartlett factor A.
    let chol = spd_factor_dense(psi)?;
    let mut bartlett = Array2::<f64>::zeros((q, q));
    for i in 0..q {
        let df = nu - i as f64;
        let g = Gamma::new(df / 2.0, 2.0)
            .map_err(|_| Error::numerical("bartlett chi-square shape invalid", df))?;
        bartlett[[i, i]] = g.sample(rng).sqrt();
        for j in 0..i {
            bartlett[[i, j]] = StandardNormal.sample(rng);
        }
    }
    // T A: solve Lᵀ (TA) = A column by column
    let mut ta = bartlett;
    for mut col in ta.columns_mut() {
        let mut buf: Vec<f64> = col.iter().copied().collect();
        chol.solve_upper_in_place(&mut buf);
        for (dst, src) in col.iter_mut().zip(buf.iter()) {
            *dst = *src;
        }
    }
    let w = ta.dot(&ta.t());
    let mut sigma = spd_inverse(w.view())?;
    // symmetrize against accumulated round-off
    for i in 0..q {
        for j in 0..i {
            let s = 0.5 * (sigma[[i, j]] + sigma[[j, i]]);
            sigma[[i, j]] = s;
            sigma[[j, i]] = s;
        }
    }
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substream;
    use ndarray::arr2;

    #[test]
    fn inverse_wishart_mean_matches_formula() {
        // E[Σ] = Ψ / (ν - q - 1) for ν > q + 1
        let mut rng = substream(71, 0);
        let psi = arr2(&[[2.0, 0.3], [0.3, 1.0]]);
        let nu = 12.0;
        let q = 2;
        let n = 20_000;
        let mut mean = Array2::<f64>::zeros((q, q));
        let mut sq = Array2::<f64>::zeros((q, q));
        for _ in 0..n {
            let s = inverse_wishart(nu, psi.view(), &mut rng).unwrap();
            mean = mean + &s;
            sq = sq + &s.mapv(|v| v * v);
        }
        mean /= n as f64;
        sq /= n as f64;
        let want = &psi / (nu - q as f64 - 1.0);
        for i in 0..q {
            for j in 0..q {
                let var = (sq[[i, j]] - mean[[i, j]] * mean[[i, j]]).max(0.0);
                let se = (var / n as f64).sqrt();
                assert!(
                    (mean[[i, j]] - want[[i, j]]).abs() < 4.0 * se,
                    "entry ({i},{j}): {} vs {}",
                    mean[[i, j]],
                    want[[i, j]]
                );
            }
        }
    }

    #[test]
    fn inverse_wishart_rejects_low_dof() {
        let psi = Array2::eye(3);
        assert!(inverse_wishart(1.5, psi.view(), &mut substream(1, 0)).is_err());
    }
}
