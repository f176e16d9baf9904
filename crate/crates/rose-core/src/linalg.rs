//! Small dense symmetric linear algebra used by the solvers.
//!
//! The Newton systems and sandwich covariances of this crate are symmetric
//! positive definite in-model (convex losses), and the parameter dimension
//! is small, so an unblocked Cholesky factorization is all that is needed.
//! Singularity is surfaced as an error and never repaired with a ridge.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Condition-estimate gate for symmetric solves. Systems whose estimated
/// condition number exceeds this are reported as singular.
pub const COND_LIMIT: f64 = 1e12;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub struct SpdFactor {
    l: Array2<f64>,
    cond: f64,
}

/// Factor a symmetric positive definite matrix, reading the lower triangle.
///
/// Fails with `SingularHessian` when a pivot is non-positive or non-finite,
/// or when the diagonal-ratio condition estimate exceeds [`COND_LIMIT`].
pub fn factor_spd(a: &Array2<f64>) -> Result<SpdFactor> {
    let p = a.nrows();
    if p == 0 || a.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: a.ncols(),
        });
    }
    let mut l = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::SingularHessian { cond: f64::INFINITY });
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..p {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    let mut dmax = f64::MIN;
    let mut dmin = f64::MAX;
    for j in 0..p {
        dmax = dmax.max(l[(j, j)]);
        dmin = dmin.min(l[(j, j)]);
    }
    let cond = (dmax / dmin).powi(2);
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(Error::SingularHessian { cond });
    }
    Ok(SpdFactor { l, cond })
}

impl SpdFactor {
    pub fn cond_estimate(&self) -> f64 {
        self.cond
    }

    /// Solve `A x = b`.
    pub fn solve_vec(&self, b: &Array1<f64>) -> Array1<f64> {
        let p = self.l.nrows();
        debug_assert_eq!(b.len(), p);
        let mut x = b.clone();
        // forward: L y = b
        for i in 0..p {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[(i, k)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        // backward: L' x = y
        for i in (0..p).rev() {
            let mut s = x[i];
            for k in (i + 1)..p {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solve `A X = B` column by column.
    pub fn solve_mat(&self, b: &Array2<f64>) -> Array2<f64> {
        let p = self.l.nrows();
        let cols = b.ncols();
        let mut out = Array2::<f64>::zeros((p, cols));
        for c in 0..cols {
            let col = b.column(c).to_owned();
            let x = self.solve_vec(&col);
            out.column_mut(c).assign(&x);
        }
        out
    }

    /// Dense inverse `A^{-1}`, symmetrized.
    pub fn inverse(&self) -> Array2<f64> {
        let p = self.l.nrows();
        let mut inv = self.solve_mat(&Array2::<f64>::eye(p));
        symmetrize(&mut inv);
        inv
    }
}

/// Solve the symmetric positive definite system `A x = b` with the
/// condition gate applied.
pub fn solve_spd(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    Ok(factor_spd(a)?.solve_vec(b))
}

/// Force exact symmetry by averaging with the transpose.
pub fn symmetrize(m: &mut Array2<f64>) {
    let p = m.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `H^{-1} M H^{-1}` for symmetric `M`, symmetrized against rounding.
pub fn sandwich_with(factor: &SpdFactor, middle: &Array2<f64>) -> Array2<f64> {
    // A = H^{-1} M, then (H^{-1} A')' = A H^{-1}
    let a = factor.solve_mat(middle);
    let at = a.t().to_owned();
    let mut out = factor.solve_mat(&at).t().to_owned();
    symmetrize(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn solves_small_spd_system() {
        let a = arr2(&[[4.0, 1.0], [1.0, 3.0]]);
        let b = Array1::from(vec![1.0, 2.0]);
        let x = solve_spd(&a, &b).unwrap();
        // solution of [[4,1],[1,3]] x = [1,2]
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let a = arr2(&[[1.0, 2.0], [2.0, 1.0]]);
        assert!(matches!(
            factor_spd(&a),
            Err(Error::SingularHessian { .. })
        ));
    }

    #[test]
    fn rejects_ill_conditioned_matrix() {
        let a = arr2(&[[1.0, 0.0], [0.0, 1e-14]]);
        assert!(matches!(
            factor_spd(&a),
            Err(Error::SingularHessian { .. })
        ));
    }

    #[test]
    fn inverse_matches_hand_computation() {
        let a = arr2(&[[2.0, 1.0], [1.0, 2.0]]);
        let inv = factor_spd(&a).unwrap().inverse();
        let expect = arr2(&[[2.0 / 3.0, -1.0 / 3.0], [-1.0 / 3.0, 2.0 / 3.0]]);
        for i in 0..2 {
            for j in 0..2 {
                assert!((inv[(i, j)] - expect[(i, j)]).abs() < 1e-14);
            }
        }
    }
}
