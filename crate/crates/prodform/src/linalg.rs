//! Dense helpers: sign-aware Gram-Schmidt, null spaces, symmetric spectra.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Orthonormalize `vectors` with respect to the bilinear form `inner`,
/// assuming the span is spacelike (positive-definite restriction). With
/// `pivot` the vector with largest remaining self-inner-product is taken
/// first, which makes the output deterministic and numerically stable;
/// without it the input order is kept (used for smooth local gauges).
pub fn gram_schmidt<F>(vectors: &[DVector<f64>], inner: F, pivot: bool) -> Result<Vec<DVector<f64>>>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let mut pool: Vec<DVector<f64>> = vectors.to_vec();
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(pool.len());
    let scale = pool.iter().map(|v| inner(v, v).abs()).fold(0.0, f64::max).max(1e-300);
    while out.len() < vectors.len() && !pool.is_empty() {
        let idx = if pivot {
            let mut best = 0;
            let mut best_val = f64::NEG_INFINITY;
            for (i, v) in pool.iter().enumerate() {
                let q = inner(v, v);
                if q > best_val {
                    best_val = q;
                    best = i;
                }
            }
            best
        } else {
            0
        };
        let mut v = pool.remove(idx);
        for e in &out {
            let c = inner(&v, e);
            v -= e * c;
        }
        let q = inner(&v, &v);
        if q <= 1e-24 * scale {
            if pivot {
                // Remaining vectors are dependent on the output; done.
                break;
            }
            return Err(Error::GeometryInconsistency(
                "gram_schmidt: dependent vector in fixed-order orthonormalization".to_string(),
            ));
        }
        if q < 0.0 {
            return Err(Error::GeometryInconsistency(format!(
                "gram_schmidt: non-spacelike direction (<v,v> = {q:.3e})"
            )));
        }
        out.push(v / q.sqrt());
    }
    Ok(out)
}

/// Null space with the threshold floored at `rel_tol * floor`: for matrices
/// of unit-vector pairings, a floor of 1 makes the cut effectively absolute,
/// so an all-noise matrix reads as entirely null.
pub fn nullspace_with_floor(a: &DMatrix<f64>, rel_tol: f64, floor: f64) -> Vec<DVector<f64>> {
    let svals = a.clone().svd(false, false).singular_values;
    let smax = svals.iter().cloned().fold(0.0, f64::max);
    if smax <= rel_tol * floor {
        let n = a.ncols();
        return (0..n)
            .map(|i| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
    }
    nullspace(a, rel_tol * floor.max(smax) / smax)
}

/// Right null space of `a` (Euclidean), with singular values below
/// `rel_tol * sigma_max` treated as zero. Returns an orthonormal basis.
pub fn nullspace(a: &DMatrix<f64>, rel_tol: f64) -> Vec<DVector<f64>> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return (0..n).map(|i| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })).collect();
    }
    // nalgebra's SVD is thin; pad with zero rows so V^t spans all of R^n.
    let a = if a.nrows() < n {
        let mut padded = DMatrix::zeros(n, n);
        padded.rows_mut(0, a.nrows()).copy_from(a);
        padded
    } else {
        a.clone()
    };
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested V^t");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = rel_tol * smax.max(1e-300);
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    (rank..vt.nrows()).map(|r| vt.row(r).transpose()).collect()
}

/// Eigenvalues and eigenvectors of a symmetric matrix, sorted ascending.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = idx.iter().map(|&i| eig.eigenvectors.column(i).clone_owned()).collect();
    (vals, vecs)
}

/// Numerical rank of the singular values at a relative threshold.
pub fn rank_at(svals: &[f64], rel_tol: f64) -> usize {
    let smax = svals.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svals.iter().filter(|s| **s > rel_tol * smax).count()
}

/// Frobenius norm of the difference of two matrices.
pub fn frob_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_schmidt_euclidean() {
        let vs = vec![
            DVector::from_column_slice(&[2.0, 0.0, 0.0]),
            DVector::from_column_slice(&[1.0, 1.0, 0.0]),
            DVector::from_column_slice(&[1.0, 1.0, 1.0]),
        ];
        let on = gram_schmidt(&vs, |a, b| a.dot(b), true).unwrap();
        assert_eq!(on.len(), 3);
        for i in 0..3 {
            for j in 0..3 {
                let d = on[i].dot(&on[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gram_schmidt_detects_dependence_with_pivot() {
        let vs = vec![
            DVector::from_column_slice(&[1.0, 0.0]),
            DVector::from_column_slice(&[2.0, 0.0]),
        ];
        let on = gram_schmidt(&vs, |a, b| a.dot(b), true).unwrap();
        assert_eq!(on.len(), 1);
    }

    #[test]
    fn nullspace_of_row() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let ns = nullspace(&a, 1e-10);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            assert!((v[0] + v[1] + v[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_sorted() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (vals, _) = sym_eigen(&m);
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
    }
}
