//! Small dense linear-algebra helpers shared by the design and verification code.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{invalid, Result};

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn max_eig_sym(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::NEG_INFINITY;
    }
    symmetrize(m).symmetric_eigenvalues().max()
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eig_sym(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    symmetrize(m).symmetric_eigenvalues().min()
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if m.is_empty() {
        return Vec::new();
    }
    m.complex_eigenvalues().iter().copied().collect()
}

/// Maximum real part over the spectrum; `-inf` for an empty matrix.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// `[C; CA; CA²; ...]`
pub fn observability_matrix(a: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let p = c.nrows();
    let mut out = DMatrix::zeros(n * p, n);
    let mut row = c.clone();
    for k in 0..n {
        out.view_mut((k * p, 0), (p, n)).copy_from(&row);
        row = &row * a;
    }
    out
}

/// `[B, AB, A²B, ...]`
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = DMatrix::zeros(n, n * m);
    let mut col = b.clone();
    for k in 0..n {
        out.view_mut((0, k * m), (n, m)).copy_from(&col);
        col = a * &col;
    }
    out
}

/// Solves `AᵀP + PA = -Q` for symmetric `P` by vectorisation.
///
/// Meant for the small design blocks (dimension ≤ ~20); cost is O(n⁶).
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(invalid("solve_lyapunov: A and Q must be square and of equal size"));
    }
    // vec(AᵀP + PA) = (I ⊗ Aᵀ + Aᵀ ⊗ I) vec(P) in column-major order.
    let nn = n * n;
    let mut k = DMatrix::zeros(nn, nn);
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            for l in 0..n {
                // (AᵀP)_{ij} = Σ_l A_{li} P_{lj}
                k[(row, j * n + l)] += a[(l, i)];
                // (PA)_{ij} = Σ_l P_{il} A_{lj}
                k[(row, l * n + i)] += a[(l, j)];
            }
        }
    }
    let rhs = DVector::from_iterator(nn, (-q).iter().copied());
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| invalid("solve_lyapunov: singular operator (A has eigenvalues summing to zero)"))?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok(symmetrize(&p))
}
