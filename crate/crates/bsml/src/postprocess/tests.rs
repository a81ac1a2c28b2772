use super::*;
use crate::substream;
use ndarray::{arr1, arr2, Array2};
use rand_distr::{Distribution, StandardNormal};

#[test]
fn default_penalties_power_rule() {
    let c = arr2(&[[1.0, 0.0], [0.06, 0.08], [0.0, 0.0]]);
    let mu = default_penalties(c.view());
    assert!((mu[0] - 1.0).abs() < 1e-12);
    assert!((mu[1] - 100.0).abs() < 1e-9); // row norm 0.1
    assert!(mu[2].is_infinite());
}

#[test]
fn default_penalty_zeroes_null_rows_at_the_claimed_rate() {
    // ‖X_j‖² = n = 10⁴, log q = 2.5, ‖C̄⁽ʲ⁾‖ = √(log q / n):
    // the shrink test statistic μ/(2‖X_j‖²‖C̄⁽ʲ⁾‖) is ≈ 12.6 > 1.
    let n = 1e4;
    let logq = 2.5f64;
    let norm = (logq / n).sqrt();
    let mu = 1.0 / (norm * norm);
    let stat = mu / (2.0 * n * norm);
    assert!((stat - 0.5 * n.sqrt() / logq.powf(1.5)).abs() < 1e-9);
    assert!(stat > 1.0, "irrelevant row must be zeroed, stat = {stat}");

    // end to end through select_rows
    let rows = 100;
    let mut x = Array2::zeros((rows, 1));
    for i in 0..rows {
        x[[i, 0]] = 10.0; // ‖X_1‖² = 100 * 100 = 10⁴
    }
    let c = Array2::from_shape_fn((1, 2), |_| norm / 2f64.sqrt());
    let sel = select_rows(c.view(), x.view(), arr1(&[mu]).view()).unwrap();
    assert!(sel.selected.is_empty());
}

#[test]
fn select_rows_zero_mean_selects_nothing() {
    let c = Array2::zeros((3, 2));
    let x = Array2::ones((4, 3));
    let mu = default_penalties(c.view());
    let sel = select_rows(c.view(), x.view(), mu.view()).unwrap();
    assert!(sel.selected.is_empty());
    assert!(sel.c_r.iter().all(|v| *v == 0.0));
}

#[test]
fn select_rows_hand_computed_shrinkage() {
    // ‖X_1‖² = 4, C̄⁽¹⁾ = (1, 0), μ = 1 → factor 1 - 1/8 = 0.875
    let x = arr2(&[[2.0], [0.0]]);
    let c = arr2(&[[1.0, 0.0]]);
    let sel = select_rows(c.view(), x.view(), arr1(&[1.0]).view()).unwrap();
    assert_eq!(sel.selected, vec![0]);
    assert_eq!(sel.c_r[[0, 0]], 0.875);
    assert_eq!(sel.c_r[[0, 1]], 0.0);
}

#[test]
fn select_rows_kills_weak_rows() {
    // ‖X_j‖² = 100, ‖C̄⁽ʲ⁾‖ = 0.1, μ = 100 → factor (1 - 5)₊ = 0
    let x = arr2(&[[10.0], [0.0]]);
    let c = arr2(&[[0.1, 0.0]]);
    let sel = select_rows(c.view(), x.view(), arr1(&[100.0]).view()).unwrap();
    assert!(sel.selected.is_empty());
    assert_eq!(sel.c_r[[0, 0]], 0.0);
}

#[test]
fn subgradient_optimality_on_random_instances() {
    let mut rng = substream(41, 0);
    for _ in 0..100 {
        let (n, p, q) = (12, 6, 3);
        let x = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
        let scale: f64 = {
            let z: f64 = StandardNormal.sample(&mut rng);
            z.abs() + 0.1
        };
        let c = Array2::from_shape_fn((p, q), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        });
        let mu = default_penalties(c.view());
        let sel = select_rows(c.view(), x.view(), mu.view()).unwrap();
        for j in 0..p {
            let xn2 = x.column(j).iter().map(|v| v * v).sum::<f64>();
            let crow = c.row(j);
            let cn = crow.iter().map(|v| v * v).sum::<f64>().sqrt();
            if sel.selected.contains(&j) {
                let srow = sel.c_r.row(j);
                let sn = srow.iter().map(|v| v * v).sum::<f64>().sqrt();
                for h in 0..q {
                    // 2X_jᵀ(X_j Ĉ⁽ʲ⁾ - R_j) + μ_j Ĉ⁽ʲ⁾/‖Ĉ⁽ʲ⁾‖, R_j = X_j C̄⁽ʲ⁾
                    let g = 2.0 * xn2 * (srow[h] - crow[h]) + mu[j] * srow[h] / sn;
                    assert!(g.abs() < 1e-8, "subgradient residual {g}");
                }
            } else {
                assert!(2.0 * xn2 * cn <= mu[j] + 1e-8);
            }
        }
    }
}

#[test]
fn raising_a_penalty_only_shrinks_its_own_row() {
    let mut rng = substream(42, 0);
    let (n, p, q) = (10, 5, 3);
    let x = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
    let c = Array2::from_shape_fn((p, q), |_| StandardNormal.sample(&mut rng));
    let mut mu = default_penalties(c.view());
    let base = select_rows(c.view(), x.view(), mu.view()).unwrap();
    for j in 0..p {
        let old = mu[j];
        for factor in [2.0, 10.0, 100.0] {
            mu[j] = old * factor;
            let bumped = select_rows(c.view(), x.view(), mu.view()).unwrap();
            let norm = |m: &Array2<f64>, r: usize| -> f64 {
                m.row(r).iter().map(|v| v * v).sum::<f64>().sqrt()
            };
            assert!(norm(&bumped.c_r, j) <= norm(&base.c_r, j) + 1e-12);
            for other in 0..p {
                if other != j {
                    for h in 0..q {
                        assert_eq!(bumped.c_r[[other, h]], base.c_r[[other, h]]);
                    }
                }
            }
        }
        mu[j] = old;
    }
}

#[test]
fn shrink_statistic_is_scale_equivariant() {
    let c = arr2(&[[0.3, -0.4], [1.0, 2.0]]);
    let x = arr2(&[[1.0, 0.5], [2.0, -1.0], [0.0, 1.5]]);
    let mu = arr1(&[0.8, 1.7]);
    let stat = |cm: &Array2<f64>, j: usize| {
        let xn2 = x.column(j).iter().map(|v| v * v).sum::<f64>();
        let cn = cm.row(j).iter().map(|v| v * v).sum::<f64>().sqrt();
        2.0 * xn2 * cn / mu[j]
    };
    let scale = 3.5;
    let scaled = &c * scale;
    for j in 0..2 {
        let ratio = stat(&scaled, j) / stat(&c, j);
        assert!((ratio - scale).abs() < 1e-12);
    }
}

#[test]
fn estimate_rank_noiseless_recovers_rank() {
    let mut rng = substream(43, 0);
    let (n, p, q, r) = (20, 6, 4, 2);
    let b = Array2::from_shape_fn((p, r), |_| StandardNormal.sample(&mut rng));
    let a = Array2::from_shape_fn((q, r), |_| StandardNormal.sample(&mut rng));
    let c_r = b.dot(&a.t());
    let x = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
    let y = x.dot(&c_r);
    let est = estimate_rank(c_r.view(), x.view(), y.view()).unwrap();
    assert!(est.omega < 1e-10);
    assert_eq!(est.rank_hat, r);
}

#[test]
fn estimate_rank_zero_estimate_gives_zero() {
    let c_r = Array2::zeros((4, 3));
    let x = Array2::ones((5, 4));
    let y = Array2::ones((5, 3));
    let est = estimate_rank(c_r.view(), x.view(), y.view()).unwrap();
    assert_eq!(est.rank_hat, 0);
    assert!(est.singular_values.iter().all(|s| *s == 0.0));
}

#[test]
fn reduce_rank_is_identity_when_rank_not_binding() {
    let mut rng = substream(44, 0);
    let c_r = Array2::from_shape_fn((5, 3), |_| StandardNormal.sample(&mut rng));
    let sparse = SparseEstimate {
        c_r: c_r.clone(),
        selected: (0..5).collect(),
        mu: Array1::ones(5),
    };
    let rank = RankEstimate {
        rank_hat: 3,
        omega: 0.0,
        singular_values: vec![0.0; 3],
    };
    let est = reduce_rank(&sparse, &rank).unwrap();
    for (g, w) in est.c_rr.iter().zip(c_r.iter()) {
        assert!((g - w).abs() < 1e-10);
    }
}

#[test]
fn reduce_rank_matches_closed_form_rank_one_oracle() {
    // rank-1 truncation of a 2 x q matrix, checked against the analytic
    // eigendecomposition of the 2x2 gram matrix
    let s_r = arr2(&[[3.0, 0.0, 1.0], [1.0, 2.0, -1.0]]);
    let sparse = SparseEstimate {
        c_r: s_r.clone(),
        selected: vec![0, 1],
        mu: Array1::ones(2),
    };
    let rank = RankEstimate {
        rank_hat: 1,
        omega: 0.0,
        singular_values: vec![0.0; 3],
    };
    let est = reduce_rank(&sparse, &rank).unwrap();

    // oracle: G = S Sᵀ (2x2); top eigenvector analytically
    let g00 = s_r.row(0).dot(&s_r.row(0));
    let g01 = s_r.row(0).dot(&s_r.row(1));
    let g11 = s_r.row(1).dot(&s_r.row(1));
    let tr = g00 + g11;
    let det = g00 * g11 - g01 * g01;
    let l1 = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
    let (mut u0, mut u1) = if g01.abs() > 1e-14 {
        (l1 - g11, g01)
    } else if g00 >= g11 {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let nrm = (u0 * u0 + u1 * u1).sqrt();
    u0 /= nrm;
    u1 /= nrm;
    // best rank-1: u uᵀ S
    for h in 0..3 {
        let proj = u0 * s_r[[0, h]] + u1 * s_r[[1, h]];
        let want0 = u0 * proj;
        let want1 = u1 * proj;
        assert!((est.c_rr[[0, h]] - want0).abs() < 1e-10);
        assert!((est.c_rr[[1, h]] - want1).abs() < 1e-10);
    }
}

#[test]
fn reduce_rank_empty_selection_gives_zero() {
    let sparse = SparseEstimate {
        c_r: Array2::zeros((4, 3)),
        selected: vec![],
        mu: Array1::ones(4),
    };
    let rank = RankEstimate {
        rank_hat: 2,
        omega: 1.0,
        singular_values: vec![0.0; 3],
    };
    let est = reduce_rank(&sparse, &rank).unwrap();
    assert!(est.c_rr.iter().all(|v| *v == 0.0));
    assert_eq!(est.rank_hat, 0);
}

#[test]
fn eckart_young_identity() {
    let mut rng = substream(45, 0);
    for _ in 0..20 {
        let (k, q) = (5, 4);
        let s_r = Array2::from_shape_fn((k, q), |_| StandardNormal.sample(&mut rng));
        let sparse = SparseEstimate {
            c_r: s_r.clone(),
            selected: (0..k).collect(),
            mu: Array1::ones(k),
        };
        for cap in 1..q {
            let rank = RankEstimate {
                rank_hat: cap,
                omega: 0.0,
                singular_values: vec![0.0; q],
            };
            let est = reduce_rank(&sparse, &rank).unwrap();
            let err2 = (&s_r - &est.c_rr).iter().map(|v| v * v).sum::<f64>();
            let s = crate::linalg::singular_values_padded(s_r.view()).unwrap();
            let tail2: f64 = s.iter().skip(cap).map(|v| v * v).sum();
            assert!(
                (err2 - tail2).abs() < 1e-8,
                "cap {cap}: err² {err2} vs discarded {tail2}"
            );
        }
    }
}

#[test]
fn zero_rows_stay_zero_through_rank_reduction() {
    let mut rng = substream(46, 0);
    let (n, p, q) = (15, 8, 4);
    let x = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
    let y = Array2::from_shape_fn((n, q), |_| StandardNormal.sample(&mut rng));
    let mut c = Array2::from_shape_fn((p, q), |_| StandardNormal.sample(&mut rng));
    for j in [1usize, 4, 6] {
        c.row_mut(j).fill(0.0);
    }
    let (sparse, _, bsml) = postprocess(c.view(), x.view(), y.view()).unwrap();
    for j in 0..p {
        if !sparse.selected.contains(&j) {
            assert!(bsml.c_rr.row(j).iter().all(|v| *v == 0.0));
        }
    }
    assert!(bsml.rank_hat <= sparse.selected.len().min(q));
}

#[test]
fn selection_frequencies_counts_rows() {
    let x = arr2(&[[2.0, 2.0], [0.0, 0.0]]);
    let strong = arr2(&[[5.0, 0.0], [4.0, 1.0]]);
    let weak = arr2(&[[5.0, 0.0], [0.0, 0.0]]);
    let freq = selection_frequencies(&[strong, weak], x.view()).unwrap();
    assert!((freq[0] - 1.0).abs() < 1e-12);
    assert!((freq[1] - 0.5).abs() < 1e-12);
}
