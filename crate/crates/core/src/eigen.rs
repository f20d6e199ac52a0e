//! Cyclic Jacobi eigensolver for small dense symmetric matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Maximum number of full cyclic sweeps before giving up.
pub const MAX_SWEEPS: usize = 50;
/// Convergence threshold on the off-diagonal Frobenius norm, relative to the full norm.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;
/// Allowed asymmetry, relative to the largest entry (absolute below 1).
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Eigen-decomposition `a = V diag(values) Vᵀ`, values sorted ascending.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: DVector<f64>,
    /// Columns are unit eigenvectors matching `values`.
    pub vectors: DMatrix<f64>,
    pub sweeps: usize,
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return invalid(format!("matrix is {}x{}, expected square", a.nrows(), a.ncols()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return invalid("matrix has non-finite entries");
    }
    let scale = a.amax().max(1.0);
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return invalid(format!(
                    "matrix not symmetric at ({}, {}): {} vs {}",
                    i + 1,
                    j + 1,
                    a[(i, j)],
                    a[(j, i)]
                ));
            }
        }
    }
    Ok(())
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Full symmetric eigen-decomposition by cyclic Jacobi rotations.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen> {
    check_symmetric(a)?;
    let n = a.nrows();
    // Work on the exactly symmetrized copy.
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let target = OFF_DIAGONAL_TOL * m.norm();

    let mut sweeps = 0;
    while off_diagonal_norm(&m) > target {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NumericFailure(format!(
                "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let vectors = DMatrix::from_fn(n, n, |row, col| v[(row, order[col])]);
    Ok(SymmetricEigen { values, vectors, sweeps })
}

/// Smallest eigenvalue and its unit eigenvector.
pub fn min_eigenpair(f: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let eig = jacobi_eigen(f)?;
    Ok((eig.values[0], eig.vectors.column(0).into_owned()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(f: &DMatrix<f64>) -> Result<f64> {
    Ok(jacobi_eigen(f)?.values[0])
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(f: &DMatrix<f64>) -> Result<f64> {
    let eig = jacobi_eigen(f)?;
    Ok(eig.values[eig.values.len() - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_and_diagonal() {
        assert_eq!(min_eigenvalue(&DMatrix::identity(3, 3)).unwrap(), 1.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        assert_eq!(min_eigenvalue(&d).unwrap(), 2.0);
    }

    #[test]
    fn two_by_two_roots() {
        // characteristic polynomial (2-x)^2 - 1 has roots 1 and 3
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let eig = jacobi_eigen(&a).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn scaled_identity_prior() {
        let f = DMatrix::<f64>::identity(10, 10) * (1.0 / 100.0);
        assert!((min_eigenvalue(&f).unwrap() - 0.01).abs() < 1e-18);
    }

    #[test]
    fn rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(min_eigenvalue(&a), Err(Error::InvalidArgument(_))));
        let b = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(min_eigenvalue(&b), Err(Error::InvalidArgument(_))));
    }

    fn random_spd(n: usize, entries: &[f64]) -> DMatrix<f64> {
        let g = DMatrix::from_iterator(n, n, entries.iter().copied().take(n * n));
        &g * g.transpose() + DMatrix::identity(n, n) * 1e-3
    }

    proptest! {
        #[test]
        fn diagonal_min_is_exact(d in prop::collection::vec(-1e3f64..1e3, 1..9)) {
            let m = DMatrix::from_diagonal(&DVector::from_vec(d.clone()));
            let expected = d.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(min_eigenvalue(&m).unwrap(), expected);
        }

        #[test]
        fn rayleigh_quotient_matches(n in 1usize..9, entries in prop::collection::vec(-2.0f64..2.0, 64)) {
            let a = random_spd(n, &entries);
            let (lambda, v) = min_eigenpair(&a).unwrap();
            let rq = v.dot(&(&a * &v)) / v.dot(&v);
            prop_assert!((rq - lambda).abs() <= 1e-8 * lambda.abs().max(1.0));
            // independent oracle: nalgebra's symmetric QR solver
            let oracle = a.clone().symmetric_eigen().eigenvalues.min();
            prop_assert!((oracle - lambda).abs() <= 1e-8 * a.norm());
        }
    }
}
