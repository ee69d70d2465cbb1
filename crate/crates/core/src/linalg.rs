//! Real symmetric eigendecomposition.

use faer::{Mat, Side};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Eigenvalues in ascending order and the matching orthonormal eigenvectors
/// as columns. Only the lower triangle of `m` is read.
pub(crate) fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Contract(format!("eigendecomposition of a {n}x{} matrix", m.ncols())));
    }
    let a = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("symmetric eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values = (0..n).map(|i| s[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| u[(i, j)]);
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructs_nearly_degenerate_matrix() {
        // diagonal with repeated entries plus a tiny off-diagonal perturbation
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 1.5, 1.5, 2.5, 2.5]));
        let w = [(0, 1, 2.0), (0, 2, 1.732), (1, 3, 1.732), (1, 4, 1.414), (2, 3, 1.414), (2, 4, 1.0)];
        for a in [1e-7, 5e-4, 8e-4, 1e-2, 1e-1] {
            let mut h = m.clone();
            for &(i, j, v) in &w {
                h[(i, j)] = a * v;
                h[(j, i)] = a * v;
            }
            let (vals, vecs) = symmetric_eigen(&h).unwrap();
            let back = &vecs * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals.clone())) * vecs.transpose();
            assert!((back - &h).norm() < 1e-13, "a = {a}");
            assert!((vecs.transpose() * &vecs - DMatrix::identity(5, 5)).norm() < 1e-13);
            assert!(vals.windows(2).all(|p| p[0] <= p[1]));
        }
        assert!(symmetric_eigen(&DMatrix::zeros(2, 3)).is_err());
    }
}
