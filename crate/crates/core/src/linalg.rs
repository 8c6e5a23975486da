//! Shared symmetric-eigendecomposition helper with the crate's
//! deterministic ordering: eigenvalues descending, each eigenvector's
//! first non-negligible component made positive.

use nalgebra::{DMatrix, DVector};

/// Sorted symmetric eigendecomposition. Returns `(values, vectors)` with
/// `values` descending and `vectors` holding the matching eigenvectors as
/// columns, sign-normalized.
pub(crate) fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues of a finite symmetric matrix are finite")
    });
    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        let flip = match col.iter().find(|v| v.abs() > 1e-12) {
            Some(v) => v.is_sign_negative(),
            None => false,
        };
        for r in 0..n {
            vectors[(r, dst)] = if flip { -col[r] } else { col[r] };
        }
    }
    (values, vectors)
}
