//! Slice moves for the horseshoe scale parameters.
//!
//! Working on the precision scale `η = t⁻²`, the half-Cauchy prior on `t`
//! becomes `p(η) ∝ η^{-1/2} / (1 + η)`. The auxiliary slice variable
//! `u | η ~ Unif(0, 1/(1+η))` turns the conditional of `η` into a
//! truncated exponential (local scales) or truncated Gamma (global
//! scales) on `(0, (1-u)/u)`, both drawn here by inverse CDF so no
//! rejection loop is ever needed and every draw lands strictly inside the
//! slice.

use rand::Rng;
use rand_distr::{Distribution, Open01};
use statrs::function::gamma::gamma_lr;

/// Rate floor standing in for an exactly-zero coefficient.
pub(crate) const RATE_FLOOR: f64 = 1e-12;

/// Inverse-CDF draw from Exp(`rate`) truncated to `(0, bound)`;
/// `bound = +∞` degrades to the untruncated draw.
pub(crate) fn truncated_exponential<R: Rng + ?Sized>(rate: f64, bound: f64, rng: &mut R) -> f64 {
    debug_assert!(rate > 0.0 && bound > 0.0);
    let u: f64 = Open01.sample(rng);
    // F(bound) = 1 - exp(-rate*bound), kept accurate through expm1/ln_1p
    let neg_f = (-rate * bound).exp_m1(); // in (-1, 0]
    let x = if neg_f == 0.0 {
        // rate*bound underflowed: the density is flat on the slice
        u * bound
    } else {
        -(u * neg_f).ln_1p() / rate
    };
    clamp_open(x, bound)
}

/// Inverse-CDF draw from Gamma(`shape`, `rate`) truncated to `(0, bound)`.
///
/// The regularized incomplete gamma is inverted by bisection; when the
/// truncated mass is too small for f64 (bound deep in the left tail) the
/// draw falls back to inverting the log-density `(shape-1)·ln x - rate·x`
/// directly, which is exact in that regime.
pub(crate) fn truncated_gamma<R: Rng + ?Sized>(
    shape: f64,
    rate: f64,
    bound: f64,
    rng: &mut R,
) -> f64 {
    debug_assert!(shape > 0.0 && rate > 0.0 && bound > 0.0);
    if shape == 1.0 {
        return truncated_exponential(rate, bound, rng);
    }
    let u: f64 = Open01.sample(rng);

    // beyond mean + 40 sd the remaining mass is below f64 resolution
    let cap = (shape + 40.0 * shape.sqrt().max(1.0)) / rate;
    let hi = bound.min(cap);
    let z_hi = rate * hi;
    let mass = if z_hi > 0.0 { gamma_lr(shape, z_hi) } else { 0.0 };
    if mass > 1e-280 {
        let target = u * mass;
        // bisection on P(shape, rate*x) = target over (0, hi]
        let (mut lo, mut up) = (0.0_f64, hi);
        for _ in 0..90 {
            let mid = 0.5 * (lo + up);
            let z = rate * mid;
            let cdf = if z > 0.0 { gamma_lr(shape, z) } else { 0.0 };
            if cdf < target {
                lo = mid;
            } else {
                up = mid;
            }
        }
        clamp_open(0.5 * (lo + up), bound)
    } else {
        left_tail_gamma(shape, rate, bound, u)
    }
}

/// Inverts the lower incomplete gamma ratio `γ(a, rate·x)/γ(a, rate·bound)
/// = u` in log space, for bounds deep in the left tail where the ratio
/// underflows f64. Uses the exact series
/// `γ(a, z) = z^a e^{-z} Σ_k z^k / (a (a+1) ... (a+k))`, whose log is
/// strictly increasing in `z` on the whole axis.
fn left_tail_gamma(shape: f64, rate: f64, bound: f64, u: f64) -> f64 {
    let target = log_gamma_series(shape, rate * bound) + u.ln();
    // power-law start: CDF ≈ (x/bound)^shape near zero
    let mut t = bound.ln() + u.ln() / shape;
    for _ in 0..100 {
        let z = rate * t.exp();
        let (h, dh_dlnz) = log_gamma_series_with_slope(shape, z);
        if dh_dlnz <= 0.0 {
            break;
        }
        let step = (target - h) / dh_dlnz;
        t += step.clamp(-30.0, 30.0);
        if step.abs() < 1e-13 {
            break;
        }
    }
    clamp_open(t.exp(), bound)
}

/// `ln γ(shape, z)` up to a constant, through the series above.
fn log_gamma_series(shape: f64, z: f64) -> f64 {
    log_gamma_series_with_slope(shape, z).0
}

/// Returns `(ln γ(shape, z) + const, d ln γ / d ln z)`.
fn log_gamma_series_with_slope(shape: f64, z: f64) -> (f64, f64) {
    // S = Σ_k c_k z^k with c_0 = 1, c_k = c_{k-1} / (shape + k)
    let mut term = 1.0;
    let mut s = 1.0;
    let mut ds = 0.0; // Σ_k k c_k z^k
    for k in 1..500 {
        term *= z / (shape + k as f64);
        s += term;
        ds += k as f64 * term;
        if term < 1e-18 * s {
            break;
        }
    }
    let val = shape * z.ln() - z + s.ln();
    let slope = shape - z + ds / s;
    (val, slope)
}

/// Keeps an inverse-CDF draw strictly inside `(0, bound)` against
/// floating-point rounding at the ends.
fn clamp_open(x: f64, bound: f64) -> f64 {
    let lo = f64::MIN_POSITIVE;
    let hi = if bound.is_finite() {
        bound * (1.0 - 1e-15)
    } else {
        f64::MAX
    };
    x.clamp(lo, hi)
}

/// One slice move for a local scale: given the coefficient `b`, the
/// global variance `tau2` and the current `lambda2 = λ²`, returns the
/// updated `λ²`.
pub(crate) fn local_scale_move<R: Rng + ?Sized>(
    b: f64,
    tau2: f64,
    lambda2: f64,
    rng: &mut R,
) -> f64 {
    let eta = 1.0 / lambda2;
    let u_raw: f64 = Open01.sample(rng);
    let u = u_raw / (1.0 + eta);
    let slice_bound = (1.0 - u) / u;
    let rate = (b * b / (2.0 * tau2)).max(RATE_FLOOR);
    let eta_new = truncated_exponential(rate, slice_bound, rng);
    debug_assert!(eta_new > 0.0 && eta_new < slice_bound);
    1.0 / eta_new
}

/// One slice move for a global scale: `sum_sq` is `Σ_j b_{jh}²/λ_{jh}²`,
/// `p` the number of predictors; returns the updated `τ²`.
pub(crate) fn global_scale_move<R: Rng + ?Sized>(
    sum_sq: f64,
    p: usize,
    tau2: f64,
    rng: &mut R,
) -> f64 {
    let eta = 1.0 / tau2;
    let u_raw: f64 = Open01.sample(rng);
    let u = u_raw / (1.0 + eta);
    let slice_bound = (1.0 - u) / u;
    let shape = (p as f64 + 1.0) / 2.0;
    let rate = (sum_sq / 2.0).max(RATE_FLOOR);
    let eta_new = truncated_gamma(shape, rate, slice_bound, rng);
    debug_assert!(eta_new > 0.0 && eta_new < slice_bound);
    1.0 / eta_new
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substream;

    #[test]
    fn truncated_exponential_respects_bound_and_distribution() {
        let mut rng = substream(61, 0);
        let (rate, bound) = (0.7, 2.5);
        let n = 200_000;
        let mut below_one = 0usize;
        for _ in 0..n {
            let x = truncated_exponential(rate, bound, &mut rng);
            assert!(x > 0.0 && x < bound);
            if x < 1.0 {
                below_one += 1;
            }
        }
        // P(X < 1) = (1 - e^{-0.7}) / (1 - e^{-0.7*2.5})
        let want = (1.0 - (-rate).exp()) / (1.0 - (-rate * bound).exp());
        let got = below_one as f64 / n as f64;
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((got - want).abs() < 4.0 * se, "got {got}, want {want}");
    }

    #[test]
    fn truncated_gamma_matches_cdf_ratio() {
        let mut rng = substream(62, 0);
        let (shape, rate, bound) = (3.5, 1.2, 2.0);
        let n = 200_000;
        let probe = 1.0;
        let mut below = 0usize;
        for _ in 0..n {
            let x = truncated_gamma(shape, rate, bound, &mut rng);
            assert!(x > 0.0 && x < bound);
            if x < probe {
                below += 1;
            }
        }
        let want = gamma_lr(shape, rate * probe) / gamma_lr(shape, rate * bound);
        let got = below as f64 / n as f64;
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((got - want).abs() < 4.0 * se, "got {got}, want {want}");
    }

    #[test]
    fn truncated_gamma_left_tail_fallback_stays_in_slice() {
        let mut rng = substream(63, 0);
        // shape 500, tiny rate: any finite slice bound is deep left tail
        for _ in 0..2000 {
            let x = truncated_gamma(500.5, RATE_FLOOR, 3.0, &mut rng);
            assert!(x > 0.0 && x < 3.0);
        }
        // concentrated near the bound: CDF ∝ (x/bound)^shape
        let draws: Vec<f64> = (0..2000)
            .map(|_| truncated_gamma(500.5, RATE_FLOOR, 3.0, &mut rng))
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        // E[X/bound] = shape/(shape+1) under the power law
        assert!((mean / 3.0 - 500.5 / 501.5).abs() < 1e-3, "mean {mean}");
    }

    #[test]
    fn left_tail_matches_bisection_at_the_crossover() {
        // both branches must agree where the truncated mass is still
        // representable: compare quantiles at matched u
        let (shape, rate, bound) = (40.0, 1.0, 4.0); // z = 4, far left of mode 39
        let mass = gamma_lr(shape, rate * bound);
        assert!(mass > 1e-280 && mass < 1e-20, "mass {mass}");
        for &u in &[0.1, 0.5, 0.9] {
            let target = u * mass;
            let (mut lo, mut up) = (0.0_f64, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + up);
                if gamma_lr(shape, rate * mid) < target {
                    lo = mid;
                } else {
                    up = mid;
                }
            }
            let via_bisect = 0.5 * (lo + up);
            let via_newton = left_tail_gamma(shape, rate, bound, u);
            assert!(
                ((via_bisect - via_newton) / via_bisect).abs() < 1e-9,
                "u={u}: {via_bisect} vs {via_newton}"
            );
        }
    }

    #[test]
    fn scale_moves_stay_positive_and_inside_slice() {
        let mut rng = substream(64, 0);
        let mut lambda2 = 1.0;
        for _ in 0..5000 {
            lambda2 = local_scale_move(0.0, 1.0, lambda2, &mut rng);
            assert!(lambda2.is_finite() && lambda2 > 0.0);
        }
        let mut tau2 = 1.0;
        for _ in 0..5000 {
            tau2 = global_scale_move(0.0, 1000, tau2, &mut rng);
            assert!(tau2.is_finite() && tau2 > 0.0);
        }
    }
}
