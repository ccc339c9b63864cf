//! Equality-constraint reduction: orthonormal row basis, consistency check,
//! minimum-norm particular solution and an orthonormal null-space basis.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const DEPENDENT_TOL: f64 = 1e-10;
const CONSISTENCY_TOL: f64 = 1e-9;

/// Removes from `r` its component in the span of `columns`. Dependent
/// columns are skipped.
pub(crate) fn project_out(r: &mut DVector<f64>, columns: Vec<DVector<f64>>) {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(columns.len());
    for mut c in columns {
        let norm = c.norm();
        orthogonalize(&mut c, &basis);
        let rest = c.norm();
        if rest > DEPENDENT_TOL * norm.max(f64::MIN_POSITIVE) {
            basis.push(c / rest);
        }
    }
    orthogonalize(r, &basis);
}

/// Affine parameterization `p = p0 + Z y` of `{p : A p = b}`.
#[derive(Debug, Clone)]
pub(crate) struct AffineHull {
    pub p0: DVector<f64>,
    /// `m x d`, orthonormal columns.
    pub z: DMatrix<f64>,
}

fn orthogonalize(v: &mut DVector<f64>, basis: &[DVector<f64>]) -> DVector<f64> {
    // two passes of modified Gram-Schmidt
    let mut coeffs = DVector::zeros(basis.len());
    for _ in 0..2 {
        for (j, q) in basis.iter().enumerate() {
            let c = q.dot(v);
            coeffs[j] += c;
            v.axpy(-c, q, 1.0);
        }
    }
    coeffs
}

impl AffineHull {
    /// `p0 + Z y`, reading `y` from the leading entries of `z`.
    pub fn point(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.p0 + &self.z * z.rows(0, self.z.ncols())
    }
}

/// `rows[k]` is a dense constraint row with right-hand side `rhs[k]`.
pub(crate) fn affine_hull(m: usize, rows: &[DVector<f64>], rhs: &[f64]) -> Result<AffineHull> {
    let mut q_rows: Vec<DVector<f64>> = Vec::new();
    let mut c: Vec<f64> = Vec::new();
    for (row, &b) in rows.iter().zip(rhs) {
        let scale = row.norm();
        if scale == 0.0 {
            if b.abs() > CONSISTENCY_TOL {
                return Err(Error::Infeasible(format!("empty constraint with value {b}")));
            }
            continue;
        }
        let mut v = row.clone();
        let coeffs = orthogonalize(&mut v, &q_rows);
        let resid_b = b - coeffs.iter().zip(&c).map(|(a, cj)| a * cj).sum::<f64>();
        let norm = v.norm();
        if norm <= DEPENDENT_TOL * scale {
            if resid_b.abs() > CONSISTENCY_TOL * scale.max(1.0) {
                return Err(Error::Infeasible(format!(
                    "inconsistent equality constraints (residual {resid_b:e})"
                )));
            }
            continue;
        }
        q_rows.push(v / norm);
        c.push(resid_b / norm);
    }

    let mut p0 = DVector::zeros(m);
    for (q, &cj) in q_rows.iter().zip(&c) {
        p0.axpy(cj, q, 1.0);
    }

    let mut basis = q_rows;
    let k = basis.len();
    for i in 0..m {
        if basis.len() == m {
            break;
        }
        let mut e = DVector::zeros(m);
        e[i] = 1.0;
        orthogonalize(&mut e, &basis);
        let norm = e.norm();
        if norm > 1e-6 {
            basis.push(e / norm);
        }
    }
    let d = m - k;
    let mut z = DMatrix::zeros(m, d);
    for (j, col) in basis[k..].iter().enumerate() {
        z.set_column(j, col);
    }
    Ok(AffineHull { p0, z })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    #[test]
    fn simplex_hull() {
        let h = affine_hull(3, &[row(&[1.0, 1.0, 1.0])], &[1.0]).unwrap();
        assert_eq!(h.z.ncols(), 2);
        for i in 0..3 {
            assert!((h.p0[i] - 1.0 / 3.0).abs() < 1e-15);
        }
        let ones = row(&[1.0, 1.0, 1.0]);
        assert!((h.z.transpose() * ones).norm() < 1e-14);
        let gram = h.z.transpose() * &h.z;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn dependent_rows_are_dropped_or_rejected() {
        let rows = [row(&[1.0, 1.0, 1.0]), row(&[1.0, 0.0, 0.0]), row(&[0.0, 1.0, 1.0])];
        let h = affine_hull(3, &rows, &[1.0, 0.3, 0.7]).unwrap();
        assert_eq!(h.z.ncols(), 1);
        assert!((h.p0[0] - 0.3).abs() < 1e-14);
        assert!(matches!(affine_hull(3, &rows, &[1.0, 0.3, 0.6]), Err(Error::Infeasible(_))));
    }

    #[test]
    fn fully_determined() {
        let rows = [row(&[1.0, 1.0]), row(&[1.0, 0.0])];
        let h = affine_hull(2, &rows, &[1.0, 0.9]).unwrap();
        assert_eq!(h.z.ncols(), 0);
        assert!((h.p0[1] - 0.1).abs() < 1e-14);
    }

    #[test]
    fn projection_leaves_an_orthogonal_residual() {
        let a = DVector::from_vec(vec![1.0, 2.0, 0.0, -1.0]);
        let b = DVector::from_vec(vec![0.0, 1.0, 3.0, 1.0]);
        let mut r = DVector::from_vec(vec![0.5, -1.0, 2.0, 4.0]);
        let coeffs = DVector::from_vec(vec![0.3, -0.7]);
        let target = &r - (&a * coeffs[0] + &b * coeffs[1]);
        // a dependent copy must not disturb the result
        project_out(&mut r, vec![a.clone(), b.clone(), &a * 2.0 - &b]);
        assert!(r.dot(&a).abs() < 1e-14 && r.dot(&b).abs() < 1e-14);
        let mut t = target;
        project_out(&mut t, vec![a, b]);
        assert!((r - t).amax() < 1e-14);

        let mut exact = DVector::from_vec(vec![1.0, 3.0, 3.0, 0.0]);
        project_out(&mut exact, vec![DVector::from_vec(vec![1.0, 2.0, 0.0, -1.0]), DVector::from_vec(vec![0.0, 1.0, 3.0, 1.0])]);
        assert!(exact.amax() < 1e-14);
    }
}
