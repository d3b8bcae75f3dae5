//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Taylor degree of the scaled exponential; with `‖A‖₁ ≤ 1/2` the truncation
/// remainder is below `1e-22`.
const TAYLOR_DEGREE: usize = 18;
const SCALED_NORM: f64 = 0.5;

/// Matrix exponential by scaling and squaring around a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::InvalidInput(format!(
            "expm needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite matrix entry".into()));
    }
    let n = a.nrows();
    let norm = norm_one(a);
    let squarings = if norm > SCALED_NORM {
        (norm / SCALED_NORM).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * 2f64.powi(-squarings);

    // Horner form of I + A(I + A/2(I + A/3(...)))
    let identity = DMatrix::<f64>::identity(n, n);
    let mut acc = identity.clone();
    for k in (1..=TAYLOR_DEGREE).rev() {
        acc = &identity + (&scaled * acc) / k as f64;
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    Ok(acc)
}

/// Maximum absolute column sum.
pub fn norm_one(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `max |A_ij + A_ji|`.
pub fn antisymmetry_defect(a: &DMatrix<f64>) -> f64 {
    max_abs(&(a + a.transpose()))
}

/// `max |A_ij - A_ji|`.
pub fn symmetry_defect(a: &DMatrix<f64>) -> f64 {
    max_abs(&(a - a.transpose()))
}

/// Numerical rank: singular values above `rel_tol × σ_max`.
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Lower-triangular square root of a symmetric positive-semidefinite matrix.
///
/// Tries Cholesky first; on failure falls back to `V √max(Λ, floor) Vᵀ`, which
/// is a (non-triangular) square root satisfying `S Sᵀ ≈ A`.
pub fn psd_sqrt(a: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    if let Some(chol) = a.clone().cholesky() {
        return chol.l();
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let roots = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.max(floor).sqrt()),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Orthonormal basis of `ker A` from the SVD, as columns.
pub fn null_space(a: &DMatrix<f64>, rel_tol: f64) -> Vec<DVector<f64>> {
    let n = a.ncols();
    // Pad to square so the SVD returns a full set of right singular vectors.
    let mut padded = DMatrix::<f64>::zeros(n.max(a.nrows()), n);
    padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = if smax == 0.0 { 0.0 } else { rel_tol * smax };
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= cut)
        .map(|(i, _)| vt.row(i).transpose().into_owned())
        .collect()
}
