//! SVD-backed least squares and pseudo-inverse.

use nalgebra::{DMatrix, DVector};

/// Default relative singular-value cutoff.
pub const SVD_CUTOFF: f64 = 1e-12;

/// Moore-Penrose pseudo-inverse together with the effective rank.
#[derive(Clone, Debug)]
pub struct PseudoInverse {
    pub pinv: DMatrix<f64>,
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

/// Pseudo-inverse via SVD; singular values below `cutoff * s_max` are
/// treated as zero.
pub fn pseudo_inverse(a: &DMatrix<f64>, cutoff: f64) -> PseudoInverse {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return PseudoInverse {
            pinv: DMatrix::zeros(cols, rows),
            rank: 0,
            singular_values: vec![],
        };
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let s = &svd.singular_values;
    let s_max = s.iter().cloned().fold(0.0, f64::max);
    let thresh = cutoff * s_max;
    let mut pinv = DMatrix::zeros(cols, rows);
    let mut rank = 0;
    for (k, &sk) in s.iter().enumerate() {
        if sk <= thresh || sk == 0.0 {
            continue;
        }
        rank += 1;
        let inv = 1.0 / sk;
        // pinv += v_k * inv * u_k^T
        for i in 0..cols {
            let vi = vt[(k, i)] * inv;
            if vi == 0.0 {
                continue;
            }
            for j in 0..rows {
                pinv[(i, j)] += vi * u[(j, k)];
            }
        }
    }
    let mut singular_values: Vec<f64> = s.iter().cloned().collect();
    singular_values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    PseudoInverse {
        pinv,
        rank,
        singular_values,
    }
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, cutoff: f64) -> DVector<f64> {
    pseudo_inverse(a, cutoff).pinv * b
}
