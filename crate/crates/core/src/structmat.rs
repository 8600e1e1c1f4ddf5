//! Checkerboard matrix predicates and Pfaffian computation.
//!
//! A square matrix is *checkerboard* when every entry at odd index parity
//! `i + j` (1-based) vanishes. Checkerboard matrices form an algebra, so
//! inverses stay checkerboard; combined with a sign condition along the odd
//! anti-diagonals this forces two corner entries of the inverse to be
//! positive, which is what drives the curvature sign of the limit
//! certificate for convolution kernels. The positivity proof runs through
//! the Pfaffian of a skew-symmetric submatrix, so a Pfaffian routine lives
//! here as well.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StructMatError {
    #[error("matrix is not square: {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("pfaffian undefined: odd dimension {n}")]
    OddDimension { n: usize },
    #[error("matrix is not skew-symmetric: |A + A^T| = {defect:.3e} exceeds {tol:.3e}")]
    NotSkewSymmetric { defect: f64, tol: f64 },
    #[error("matrix size {n} is even, hypothesis requires odd size 2n+1")]
    EvenSize { n: usize },
    #[error("matrix is not symmetric: |A - A^T| = {defect:.3e}")]
    NotSymmetric { defect: f64 },
    #[error("matrix is not positive-definite (Cholesky failed)")]
    NotPositiveDefinite,
    #[error("matrix is not checkerboard: odd-parity entry of magnitude {magnitude:.3e}")]
    NotCheckerboard { magnitude: f64 },
    #[error(
        "alternating anti-diagonal pattern violated at ({i}, {j}): \
         {got:.6e} vs expected {expected:.6e}"
    )]
    AlternatingPattern { i: usize, j: usize, got: f64, expected: f64 },
}

/// Default checkerboard tolerance: `1e-10 * max|entry|`.
pub fn checkerboard_tol(a: &DMatrix<f64>) -> f64 {
    1e-10 * a.amax()
}

/// Outcome of a checkerboard test.
#[derive(Debug, Clone)]
pub struct CheckerboardReport {
    pub is_checkerboard: bool,
    /// Magnitude of the largest entry at odd parity `i + j` (1-based).
    pub max_odd_parity_entry: f64,
    pub tol: f64,
}

/// Test the checkerboard property: entries at odd `i + j` (1-based indices)
/// must vanish up to `tol`.
pub fn is_checkerboard(a: &DMatrix<f64>, tol: f64) -> CheckerboardReport {
    let mut max_odd = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            // 0-based (i + j) odd  <=>  1-based (i+1 + j+1) odd
            if (i + j) % 2 == 1 {
                max_odd = max_odd.max(a[(i, j)].abs());
            }
        }
    }
    CheckerboardReport { is_checkerboard: max_odd <= tol, max_odd_parity_entry: max_odd, tol }
}

/// Anti-diagonals `d_1, …, d_{2n-1}` of a square matrix, `d_i` collecting the
/// entries with `k + j = i + 1` (1-based). `d_i` has the standard dimension
/// `min(i, n, 2n - i)`.
pub fn anti_diagonals(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = a.nrows();
    (0..2 * n - 1)
        .map(|s| {
            // 0-based: entries (k, j) with k + j = s
            let lo = s.saturating_sub(n - 1);
            let hi = s.min(n - 1);
            (lo..=hi).map(|k| a[(k, s - k)]).collect()
        })
        .collect()
}

/// Pfaffian of an even-dimensional skew-symmetric matrix, with `pf(A)² = det(A)`.
///
/// Dimensions up to 8 use the Laplace-style recursion along the first row;
/// larger even dimensions go through a Householder tridiagonalization
/// (a congruence `Q^T A Q`, with `det(Q)` tracked sign-exactly).
pub fn pfaffian(a: &DMatrix<f64>) -> Result<f64, StructMatError> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(StructMatError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    if n % 2 == 1 {
        return Err(StructMatError::OddDimension { n });
    }
    let scale = a.amax();
    let defect = (a + a.transpose()).amax();
    let tol = 1e-10 * scale.max(1e-300);
    if defect > tol {
        return Err(StructMatError::NotSkewSymmetric { defect, tol });
    }
    if n == 0 {
        return Ok(1.0);
    }
    if n <= 8 {
        Ok(pfaffian_recursive(a))
    } else {
        Ok(pfaffian_tridiag(a.clone()))
    }
}

fn pfaffian_recursive(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 1.0;
    }
    if n == 2 {
        return a[(0, 1)];
    }
    let mut sum = 0.0;
    for j in 1..n {
        if a[(0, j)] == 0.0 {
            continue;
        }
        // sign (-1)^j in 1-based column index j+1 -> (-1)^(j+1) 0-based
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        let keep: Vec<usize> = (1..n).filter(|&k| k != j).collect();
        let minor = DMatrix::from_fn(n - 2, n - 2, |r, c| a[(keep[r], keep[c])]);
        sum += sign * a[(0, j)] * pfaffian_recursive(&minor);
    }
    sum
}

/// Householder reduction to skew-symmetric tridiagonal form; the Pfaffian is
/// the product of the odd superdiagonal entries times `det(Q)`.
fn pfaffian_tridiag(mut a: DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut det_q = 1.0;
    for k in 0..n - 2 {
        let mut x: Vec<f64> = (k + 1..n).map(|i| a[(i, k)]).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        x[0] -= alpha;
        let vnorm2: f64 = x.iter().map(|v| v * v).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        det_q = -det_q; // one reflection
        // apply P = I - 2 v v^T / |v|^2 on both sides of the trailing block
        let m = n - (k + 1);
        // w = A[k+1.., ..] v restricted to the trailing principal block rows
        for col in 0..n {
            let mut dot = 0.0;
            for r in 0..m {
                dot += a[(k + 1 + r, col)] * x[r];
            }
            let f = 2.0 * dot / vnorm2;
            for r in 0..m {
                a[(k + 1 + r, col)] -= f * x[r];
            }
        }
        for row in 0..n {
            let mut dot = 0.0;
            for c in 0..m {
                dot += a[(row, k + 1 + c)] * x[c];
            }
            let f = 2.0 * dot / vnorm2;
            for c in 0..m {
                a[(row, k + 1 + c)] -= f * x[c];
            }
        }
    }
    let mut pf = det_q;
    let mut i = 0;
    while i + 1 < n {
        pf *= a[(i, i + 1)];
        i += 2;
    }
    pf
}

/// Corner entries `(b_{1,2n+1}, b_{2n+1,2n+1})` of the inverse of a
/// symmetric positive-definite checkerboard matrix of odd size whose even
/// anti-diagonals alternate as `a_{i,j} = (-1)^{(i-j)/2} a_{(i+j)/2,(i+j)/2}`.
/// Under those hypotheses both entries are strictly positive; each
/// precondition violation is reported by name.
pub fn inverse_corner_signs(a: &DMatrix<f64>) -> Result<(f64, f64), StructMatError> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(StructMatError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    if n % 2 == 0 {
        return Err(StructMatError::EvenSize { n });
    }
    let scale = a.amax().max(1e-300);
    let sym_defect = (a - a.transpose()).amax();
    if sym_defect > 1e-10 * scale {
        return Err(StructMatError::NotSymmetric { defect: sym_defect });
    }
    let report = is_checkerboard(a, checkerboard_tol(a));
    if !report.is_checkerboard {
        return Err(StructMatError::NotCheckerboard { magnitude: report.max_odd_parity_entry });
    }
    // alternating pattern on even-parity entries, checked entrywise with a
    // tolerance relative to the diagonal entry it references
    for i in 1..=n {
        for j in 1..=n {
            if (i + j) % 2 != 0 {
                continue;
            }
            let mid = (i + j) / 2;
            let sign = if ((i as i64 - j as i64) / 2).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let expected = sign * a[(mid - 1, mid - 1)];
            let got = a[(i - 1, j - 1)];
            if (got - expected).abs() > 1e-8 * expected.abs().max(scale * 1e-12) {
                return Err(StructMatError::AlternatingPattern { i, j, got, expected });
            }
        }
    }
    let chol = a.clone().cholesky().ok_or(StructMatError::NotPositiveDefinite)?;
    let inv = chol.inverse();
    Ok((inv[(0, n - 1)], inv[(n - 1, n - 1)]))
}
