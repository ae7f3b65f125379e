//! Least squares with sign constraints on some unknowns (Lawson-Hanson).

use nalgebra::{DMatrix, DVector};

/// Minimizes `|a z - b|` subject to `z[j] >= 0` for `j >= n_free`.
pub(super) fn solve(a: &DMatrix<f64>, b: &DVector<f64>, n_free: usize) -> DVector<f64> {
    let q = a.ncols();
    let mut z = DVector::zeros(q);
    let mut passive: Vec<bool> = (0..q).map(|j| j < n_free).collect();
    let tol = 1e-12 * (a.amax() * b.amax()).max(f64::MIN_POSITIVE);
    if n_free > 0 {
        z = restricted_lsq(a, b, &passive);
    }
    for _ in 0..3 * q + 3 {
        let w = a.transpose() * (b - a * &z);
        let Some(enter) = (n_free..q)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]))
        else {
            break;
        };
        passive[enter] = true;
        loop {
            let s = restricted_lsq(a, b, &passive);
            let blocking = (n_free..q).filter(|&j| passive[j] && s[j] <= 0.0);
            let alpha = blocking
                .map(|j| z[j] / (z[j] - s[j]))
                .fold(f64::INFINITY, f64::min);
            if alpha == f64::INFINITY {
                z = s;
                break;
            }
            z += (s - &z) * alpha;
            for j in n_free..q {
                if passive[j] && z[j] <= tol {
                    passive[j] = false;
                    z[j] = 0.0;
                }
            }
        }
    }
    z
}

/// Least squares over the passive columns; the others are zero.
fn restricted_lsq(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..a.ncols()).filter(|&j| passive[j]).collect();
    let mut out = DVector::zeros(a.ncols());
    if cols.is_empty() {
        return out;
    }
    let sub = a.select_columns(&cols);
    if let Ok(sol) = sub.svd(true, true).solve(b, 1e-12) {
        for (k, &j) in cols.iter().enumerate() {
            out[j] = sol[k];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_active_set_gets_nonnegative_multipliers() {
        // columns: -e0, -e1, (1, 1); target makes the first column useless
        let a = DMatrix::from_row_slice(2, 3, &[-1.0, 0.0, 1.0, 0.0, -1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 8.0]);
        let z = solve(&a, &b, 0);
        assert!(z.iter().all(|v| *v >= 0.0), "{z}");
        assert!((a * &z - b).amax() < 1e-9);
    }

    #[test]
    fn free_columns_may_be_negative() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![-3.0, 1.0]);
        let z = solve(&a, &b, 1);
        assert!((z[0] + 4.0).abs() < 1e-9 && (z[1] - 1.0).abs() < 1e-9, "{z}");
    }

    #[test]
    fn sign_constraint_binds() {
        let a = DMatrix::from_row_slice(1, 1, &[1.0]);
        let z = solve(&a, &DVector::from_vec(vec![-2.0]), 0);
        assert_eq!(z[0], 0.0);
    }
}
