#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ris_xmedia::alloc::SlotWeights;
use ris_xmedia::link::LinkRates;

/// Optimal value of the delay-constrained rate LP by enumerating every vertex.
///
/// Variables x = (R1U, R2U, R1D, R2D, t); all 14 constraints are written as a·x ≤ b.
pub fn lp_vertex_value(caps: &LinkRates, s: SlotWeights) -> f64 {
    let (t1, t2) = (s.t1, s.t2);
    let c = caps.to_array();
    let mut rows: Vec<([f64; 5], f64)> = vec![
        ([-t2, 0.0, 0.0, 0.0, 1.0], 0.0),
        ([0.0, -t1, 0.0, 0.0, 1.0], 0.0),
        ([0.0, 0.0, -t1, 0.0, 1.0], 0.0),
        ([0.0, 0.0, 0.0, -t2, 1.0], 0.0),
        ([t1, 0.0, 0.0, -t2, 0.0], 0.0),
        ([0.0, t2, -t1, 0.0, 0.0], 0.0),
    ];
    for k in 0..4 {
        let mut up = [0.0; 5];
        up[k] = 1.0;
        rows.push((up, c[k]));
        let mut lo = [0.0; 5];
        lo[k] = -1.0;
        rows.push((lo, 0.0));
    }
    assert_eq!(rows.len(), 14);

    let mut best = f64::NEG_INFINITY;
    let m = rows.len();
    let mut idx = [0usize, 1, 2, 3, 4];
    loop {
        let a = DMatrix::from_fn(5, 5, |i, j| rows[idx[i]].0[j]);
        let b = DVector::from_fn(5, |i, _| rows[idx[i]].1);
        if let Some(x) = a.lu().solve(&b) {
            let scale = c.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let feasible = rows
                .iter()
                .all(|(r, rhs)| r.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() <= rhs + 1e-9 * scale);
            if feasible && x.iter().all(|v| v.is_finite()) {
                best = best.max(x[4]);
            }
        }
        // Next 5-combination of 0..m.
        let mut i = 5;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < m - 5 + i {
                idx[i] += 1;
                for j in i + 1..5 {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// One-sided exact sign test: P(X ≥ wins) for X ~ Binomial(n, 1/2).
pub fn sign_test_p(wins: usize, n: usize) -> f64 {
    let mut total = 0.0;
    let mut coef = 1.0f64;
    for i in 0..=n {
        if i > 0 {
            coef = coef * (n - i + 1) as f64 / i as f64;
        }
        if i >= wins {
            total += coef;
        }
    }
    total / 2f64.powi(n as i32)
}
