//! Vandermonde and Hermite interpolation matrices, Lagrange/Hermite
//! coefficients, and their behavior when the nodes are scaled by `t → 0`.
//!
//! The central objects are the Vandermonde matrix `V_p^x` with entries
//! `x_i^{j-1}`, the stacked Hermite matrix `H_p^x = [V_p^x; (V_p^x)']`, and
//! their inverses expressed through Lagrange polynomials `ℓ_j` and Hermite
//! polynomials `μ_j, ν_j`. Scaling the nodes as `t·x` scales the inverse
//! coefficients by exact powers of `t` (`ℓ_{i,j}^{tx} = ℓ_{i,j}^x t^{-(i-1)}`
//! and similarly for `μ, ν`), which pins down the `t → 0` limits
//! [`asymptotic_vinv`] and [`asymptotic_hinv`] used throughout the crate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative node-coincidence tolerance: nodes with gap below
/// `NODE_GAP_TOL * (1 + max|x|)` are rejected as non-distinct.
pub const NODE_GAP_TOL: f64 = 1e-12;

/// Condition estimates above this attach a warning to coefficient matrices.
pub const COND_WARN_THRESHOLD: f64 = 1e10;

#[derive(Debug, Error)]
pub enum InterpError {
    #[error("node list is empty")]
    Empty,
    #[error("node {i} is not finite")]
    NonFinite { i: usize },
    #[error("nodes {i} and {j} coincide: gap {gap:.3e} below tolerance {tol:.3e}")]
    CoincidentNodes { i: usize, j: usize, gap: f64, tol: f64 },
}

/// Pairwise-distinct real positions `x_1, …, x_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nodes {
    values: Vec<f64>,
}

impl Nodes {
    pub fn new(values: Vec<f64>) -> Result<Self, InterpError> {
        if values.is_empty() {
            return Err(InterpError::Empty);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(InterpError::NonFinite { i });
        }
        let scale = 1.0 + values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = NODE_GAP_TOL * scale;
        for i in 0..values.len() {
            for j in (i + 1)..values.len() {
                let gap = (values[i] - values[j]).abs();
                if gap < tol {
                    return Err(InterpError::CoincidentNodes { i, j, gap, tol });
                }
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Nodes scaled by `t > 0`. Distinctness is preserved up to the relative
    /// tolerance, which is why the constructor is re-run.
    pub fn scaled(&self, t: f64) -> Result<Self, InterpError> {
        Self::new(self.values.iter().map(|v| v * t).collect())
    }

    pub fn min_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for i in 0..self.values.len() {
            for j in (i + 1)..self.values.len() {
                gap = gap.min((self.values[i] - self.values[j]).abs());
            }
        }
        gap
    }
}

/// Polynomial bases used by the interpolation matrices.
///
/// `Monomial` is `(1, X, X², …)`; `Factorial` is `(1, X, X²/2!, …)`, the
/// basis in which the small-cluster Hermite matrix [`scaled_hermite`] is
/// written. Conversion is explicit, never implicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Monomial,
    Factorial,
}

/// Dense univariate polynomial in a declared basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
    basis: Basis,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>, basis: Basis) -> Self {
        let mut p = Self { coeffs, basis };
        p.trim();
        p
    }

    pub fn zero(basis: Basis) -> Self {
        Self { coeffs: vec![0.0], basis }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c], basis: Basis::Monomial }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    fn trim(&mut self) {
        while self.coeffs.len() > 1 && *self.coeffs.last().unwrap() == 0.0 {
            self.coeffs.pop();
        }
    }

    /// Coefficient of the basis element of index `i`, zero beyond the degree.
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    pub fn to_basis(&self, basis: Basis) -> Self {
        if self.basis == basis {
            return self.clone();
        }
        let mut fact = 1.0;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if i > 0 {
                    fact *= i as f64;
                }
                match basis {
                    // monomial -> factorial: X^i = i! * (X^i / i!)
                    Basis::Factorial => c * fact,
                    Basis::Monomial => c / fact,
                }
            })
            .collect();
        Self::new(coeffs, basis)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.basis {
            Basis::Monomial => {
                // Horner
                self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
            }
            Basis::Factorial => {
                let mut term = 1.0;
                let mut sum = 0.0;
                for (i, &c) in self.coeffs.iter().enumerate() {
                    if i > 0 {
                        term *= x / i as f64;
                    }
                    sum += c * term;
                }
                sum
            }
        }
    }

    pub fn derivative(&self) -> Self {
        let p = self.to_basis(Basis::Monomial);
        if p.coeffs.len() == 1 {
            return Self::zero(Basis::Monomial);
        }
        let coeffs = p
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| c * i as f64)
            .collect();
        Self::new(coeffs, Basis::Monomial).to_basis(self.basis)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let a = self.to_basis(Basis::Monomial);
        let b = other.to_basis(Basis::Monomial);
        let mut coeffs = vec![0.0; a.coeffs.len() + b.coeffs.len() - 1];
        for (i, &ca) in a.coeffs.iter().enumerate() {
            for (j, &cb) in b.coeffs.iter().enumerate() {
                coeffs[i + j] += ca * cb;
            }
        }
        Self::new(coeffs, Basis::Monomial).to_basis(self.basis)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect(), self.basis)
    }

    pub fn add(&self, other: &Self) -> Self {
        let b = other.to_basis(self.basis);
        let n = self.coeffs.len().max(b.coeffs.len());
        let mut coeffs = vec![0.0; n];
        for (i, c) in coeffs.iter_mut().enumerate() {
            *c = self.coeff(i) + b.coeff(i);
        }
        Self::new(coeffs, self.basis)
    }
}

/// What a structured matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixKind {
    Vandermonde,
    VandermondeDeriv(usize),
    HermiteStack,
    ScaledHermite,
}

/// A dense matrix tagged with the interpolation structure it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMatrix {
    pub entries: DMatrix<f64>,
    pub kind: MatrixKind,
}

impl StructuredMatrix {
    pub fn vandermonde(nodes: &Nodes, p: usize) -> Self {
        Self { entries: vandermonde(nodes, p), kind: MatrixKind::Vandermonde }
    }

    pub fn vandermonde_deriv(nodes: &Nodes, p: usize, l: usize) -> Self {
        Self { entries: vandermonde_deriv(nodes, p, l), kind: MatrixKind::VandermondeDeriv(l) }
    }

    pub fn hermite_stack(nodes: &Nodes, p: usize) -> Self {
        Self { entries: hermite_stack(nodes, p), kind: MatrixKind::HermiteStack }
    }

    pub fn scaled_hermite(nodes: &Nodes, t: f64) -> Self {
        Self { entries: scaled_hermite(nodes, t), kind: MatrixKind::ScaledHermite }
    }
}

/// Vandermonde matrix of order `p`: entry `(i, j) = x_i^{j-1}` (1-based),
/// shape `n × p`.
pub fn vandermonde(nodes: &Nodes, p: usize) -> DMatrix<f64> {
    assert!(p >= 1, "vandermonde order must be >= 1");
    let n = nodes.len();
    DMatrix::from_fn(n, p, |i, j| nodes.values[i].powi(j as i32))
}

/// Derivative of order `l` of the Vandermonde matrix: entry
/// `(i, j) = (d/dx)^l x^{j-1}` evaluated at `x_i`.
pub fn vandermonde_deriv(nodes: &Nodes, p: usize, l: usize) -> DMatrix<f64> {
    assert!(p >= 1, "vandermonde order must be >= 1");
    let n = nodes.len();
    DMatrix::from_fn(n, p, |i, j| {
        if j < l {
            return 0.0;
        }
        // falling factorial j * (j-1) * ... * (j-l+1)
        let mut c = 1.0;
        for k in 0..l {
            c *= (j - k) as f64;
        }
        c * nodes.values[i].powi((j - l) as i32)
    })
}

/// Stacked Hermite matrix `H_p^x = [V_p^x; (V_p^x)']`, shape `2n × p`.
pub fn hermite_stack(nodes: &Nodes, p: usize) -> DMatrix<f64> {
    let v = vandermonde(nodes, p);
    let dv = vandermonde_deriv(nodes, p, 1);
    let n = nodes.len();
    let mut h = DMatrix::zeros(2 * n, p);
    h.view_mut((0, 0), (n, p)).copy_from(&v);
    h.view_mut((n, 0), (n, p)).copy_from(&dv);
    h
}

/// Coefficient matrix plus a conditioning report. The warning is metadata:
/// scans at tiny scales still run, callers can inspect `ill_conditioned`.
#[derive(Debug, Clone)]
pub struct CoeffMatrix {
    pub matrix: DMatrix<f64>,
    pub cond_estimate: f64,
    pub ill_conditioned: bool,
}

/// The Lagrange basis polynomials `ℓ_j` (monomial basis), built by expanding
/// `∏_{k≠j}(X - x_k) / ∏_{k≠j}(x_j - x_k)` rather than by matrix inversion.
pub fn lagrange_basis(nodes: &Nodes) -> Vec<Polynomial> {
    let xs = nodes.values();
    xs.iter()
        .enumerate()
        .map(|(j, &xj)| {
            let mut num = Polynomial::constant(1.0);
            let mut den = 1.0;
            for (k, &xk) in xs.iter().enumerate() {
                if k != j {
                    num = num.mul(&Polynomial::new(vec![-xk, 1.0], Basis::Monomial));
                    den *= xj - xk;
                }
            }
            num.scale(1.0 / den)
        })
        .collect()
}

/// Monomial coefficients of the Lagrange polynomials, column `j` holding
/// `ℓ_j`. The matrix equals `(V_n^x)^{-1}`; row `n` is
/// `1 / ∏_{k≠j}(x_j - x_k)`.
pub fn lagrange_coeffs(nodes: &Nodes) -> CoeffMatrix {
    let n = nodes.len();
    let basis = lagrange_basis(nodes);
    let matrix = DMatrix::from_fn(n, n, |i, j| basis[j].coeff(i));
    let v = vandermonde(nodes, n);
    let cond_estimate = norm_inf(&v) * norm_inf(&matrix);
    CoeffMatrix { ill_conditioned: cond_estimate > COND_WARN_THRESHOLD, matrix, cond_estimate }
}

/// Hermite basis polynomials `(μ_j, ν_j)` in monomial coefficients
/// (each column of length `2n`), so that `(μ | ν)` is `(H_{2n}^x)^{-1}`.
#[derive(Debug, Clone)]
pub struct HermiteCoeffs {
    pub mu: DMatrix<f64>,
    pub nu: DMatrix<f64>,
    pub cond_estimate: f64,
    pub ill_conditioned: bool,
}

impl HermiteCoeffs {
    /// The full inverse `(μ | ν)` as one `2n × 2n` matrix.
    pub fn stacked(&self) -> DMatrix<f64> {
        let n = self.mu.ncols();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (2 * n, n)).copy_from(&self.mu);
        m.view_mut((0, n), (2 * n, n)).copy_from(&self.nu);
        m
    }
}

/// `μ_j = (1 - 2(X - x_j) ℓ_j'(x_j)) ℓ_j²` and `ν_j = (X - x_j) ℓ_j²`.
pub fn hermite_coeffs(nodes: &Nodes) -> HermiteCoeffs {
    let n = nodes.len();
    let xs = nodes.values();
    let lag = lagrange_basis(nodes);
    let mut mu = DMatrix::zeros(2 * n, n);
    let mut nu = DMatrix::zeros(2 * n, n);
    for j in 0..n {
        let lj2 = lag[j].mul(&lag[j]);
        // ℓ_j'(x_j) = Σ_{k≠j} 1/(x_j - x_k)
        let dj: f64 = xs
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != j)
            .map(|(_, &xk)| 1.0 / (xs[j] - xk))
            .sum();
        let affine = Polynomial::new(vec![1.0 + 2.0 * xs[j] * dj, -2.0 * dj], Basis::Monomial);
        let mu_j = affine.mul(&lj2);
        let nu_j = Polynomial::new(vec![-xs[j], 1.0], Basis::Monomial).mul(&lj2);
        for i in 0..2 * n {
            mu[(i, j)] = mu_j.coeff(i);
            nu[(i, j)] = nu_j.coeff(i);
        }
    }
    let h = hermite_stack(nodes, 2 * n);
    let mut inv = DMatrix::zeros(2 * n, 2 * n);
    inv.view_mut((0, 0), (2 * n, n)).copy_from(&mu);
    inv.view_mut((0, n), (2 * n, n)).copy_from(&nu);
    let cond_estimate = norm_inf(&h) * norm_inf(&inv);
    HermiteCoeffs { mu, nu, cond_estimate, ill_conditioned: cond_estimate > COND_WARN_THRESHOLD }
}

/// `t → 0` limit of `t^{n-1} (V_n^{tx})^{-1}`: all rows zero except row `n`,
/// which holds the leading Lagrange coefficients.
pub fn asymptotic_vinv(nodes: &Nodes) -> DMatrix<f64> {
    let n = nodes.len();
    let lag = lagrange_coeffs(nodes);
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        m[(n - 1, j)] = lag.matrix[(n - 1, j)];
    }
    m
}

/// `t → 0` limit of `t^{2n-1} (H_{2n}^{tx})^{-1}`: all rows zero except row
/// `2n`, which holds `(μ_{2n,1}, …, μ_{2n,n}, 0, …, 0)`.
pub fn asymptotic_hinv(nodes: &Nodes) -> DMatrix<f64> {
    let n = nodes.len();
    let herm = hermite_coeffs(nodes);
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        m[(2 * n - 1, j)] = herm.mu[(2 * n - 1, j)];
    }
    m
}

/// Small-cluster Hermite matrix in the factorial basis, shape `2N × 2N`:
/// column `j ≤ N` holds `((t z_j)^i / i!)_{i=0..2N-1}`, column `N + j` its
/// derivative in the position. Satisfies exactly
/// `H_{tz} = diag(1, t, …, t^{2N-1}) · H_z · diag(1, …, 1, 1/t, …, 1/t)`.
pub fn scaled_hermite(nodes: &Nodes, t: f64) -> DMatrix<f64> {
    assert!(t > 0.0, "scale must be positive");
    let n = nodes.len();
    let xs = nodes.values();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if j < n {
            pow_over_factorial(t * xs[j], i)
        } else if i == 0 {
            0.0
        } else {
            pow_over_factorial(t * xs[j - n], i - 1)
        }
    })
}

/// `H_z`, the unit-scale case of [`scaled_hermite`].
pub fn hz_matrix(nodes: &Nodes) -> DMatrix<f64> {
    scaled_hermite(nodes, 1.0)
}

/// Exact inverse of `H_z` assembled from the Hermite polynomials: row `j`
/// (resp. `N + j`) of the inverse holds the factorial-basis coefficients of
/// `μ_j` (resp. `ν_j`). Avoids inverting the graded matrix numerically.
pub fn hz_inverse(nodes: &Nodes) -> DMatrix<f64> {
    let n = nodes.len();
    let herm = hermite_coeffs(nodes);
    // factorial-basis coefficient k = monomial coefficient k * k!
    let mut fact = vec![1.0; 2 * n];
    for k in 1..2 * n {
        fact[k] = fact[k - 1] * k as f64;
    }
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i < n {
            herm.mu[(j, i)] * fact[j]
        } else {
            herm.nu[(j, i - n)] * fact[j]
        }
    })
}

/// Inverse of [`scaled_hermite`] through the exact diagonal grading
/// `H_{tz}^{-1} = diag(1,…,1, t,…,t) · H_z^{-1} · diag(t^{-i})_{i=0..2N-1}`.
///
/// This stays accurate for tiny `t` where direct inversion loses digits.
pub fn scaled_hermite_inverse(nodes: &Nodes, t: f64) -> DMatrix<f64> {
    assert!(t > 0.0, "scale must be positive");
    let n = nodes.len();
    let hz_inv = hz_inverse(nodes);
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let row_scale = if i < n { 1.0 } else { t };
        row_scale * hz_inv[(i, j)] * t.powi(-(j as i32))
    })
}

fn pow_over_factorial(x: f64, k: usize) -> f64 {
    let mut v = 1.0;
    for i in 1..=k {
        v *= x / i as f64;
    }
    v
}

pub(crate) fn norm_inf(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Least-squares slope of `log(y)` against `log(x)`.
pub fn loglog_slope(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
