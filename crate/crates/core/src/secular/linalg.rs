//! Singular values and null spaces of complex matrices through the real
//! `2n x 2n` embedding `[[Re M, -Im M], [Im M, Re M]]`, whose real SVD is
//! used in place of a complex one. Each complex singular value appears
//! twice in the embedding.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

fn real_embedding(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    DMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let z = m[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Singular values in ascending order.
pub fn singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut sv: Vec<f64> = real_embedding(m).singular_values().iter().copied().collect();
    sv.sort_by(f64::total_cmp);
    sv.into_iter().step_by(2).collect()
}

/// Orthonormal basis of the span of the right singular vectors belonging to
/// the `count` smallest singular values.
pub fn null_basis(m: &DMatrix<Complex64>, count: usize) -> Option<Vec<DVector<Complex64>>> {
    let n = m.ncols();
    let svd = real_embedding(m).try_svd(false, true, 1e-15, 10_000)?;
    let v_t = svd.v_t?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));

    let mut basis: Vec<DVector<Complex64>> = Vec::with_capacity(count);
    for &i in order.iter().take(2 * count) {
        let row = v_t.row(i);
        let mut z = DVector::from_fn(n, |j, _| Complex64::new(row[j], row[n + j]));
        for b in &basis {
            let overlap = b.dotc(&z);
            z -= b * overlap;
        }
        let norm = z.norm();
        // the partner vector `i z` of an accepted one projects to nearly nothing
        if norm > 0.5 {
            basis.push(z / Complex64::new(norm, 0.0));
        }
        if basis.len() == count {
            return Some(basis);
        }
    }
    None
}
