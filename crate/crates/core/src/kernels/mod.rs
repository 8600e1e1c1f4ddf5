//! Measurement kernels with exact correlation calculus.
//!
//! A kernel `φ` maps a position to an element of the measurement space; all
//! computations go through the correlation function
//! `K(x, y) = ⟨φ(x), φ(y)⟩` and its partial derivatives — measurement-space
//! elements are never materialized as functions. Shipped kernels:
//!
//! * `dirichlet:fc=F` — ideal low-pass filter on the torus, correlation
//!   `1 + 2 Σ_{k≤F} cos(2πk(x-y))`;
//! * `gaussian:sigma=S` — Gaussian filter on the line, correlation
//!   `S√π · exp(-(x-y)²/(4S²))`;
//! * `fourier:coeffs=[…]` — trigonometric filter with a user-supplied
//!   nonnegative Fourier magnitude profile indexed `-fc..fc`.
//!
//! Only the Dirichlet kernel exposes explicit coordinate vectors (dimension
//! `2fc+1`, realized as real/imaginary pairs); they back the factorization
//! diagnostics and the finite-dimensional noise model.

pub mod atoms;
pub mod gram;
pub mod quad;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub use atoms::{Atom, AtomCombo, DualVector};
pub use gram::{factorization_residual, gamma_gram, gram_fk, injectivity_check, FactorizationReport, GramBundle, InjectivityReport};

const SQRT_PI: f64 = 1.772453850905516;

/// Cramér's constant: `|He_m(v)| e^{-v²/4} ≤ K √(m!)`.
const CRAMER_K: f64 = 1.086435;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error(
        "correlation order {a} + {b} exceeds 2 * max_deriv = {max}; \
         raise max_deriv on the kernel"
    )]
    OrderOverflow { a: usize, b: usize, max: usize },
    #[error("gram order {k} exceeds max_deriv = {max}")]
    GramOrderOverflow { k: usize, max: usize },
    #[error("kernel spec parse error: {0}")]
    Parse(String),
    #[error("operation requires explicit coordinates, unsupported for {kernel} kernel")]
    NoCoordinates { kernel: String },
    #[error("numerically singular Gram matrix (condition estimate {cond:.3e})")]
    SingularGram { cond: f64 },
    #[error(
        "injectivity condition iota_{k} fails: derivatives phi^(0)..phi^({k}) \
         of the kernel at 0 are linearly dependent"
    )]
    Injectivity { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Torus,
    Line,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KernelKind {
    Dirichlet { fc: u32 },
    Gaussian { sigma: f64 },
    /// Fourier magnitude profile, indexed `-fc..fc` (odd length).
    Fourier { magnitudes: Vec<f64> },
}

/// An immutable measurement kernel. Queries are pure, the type is `Send +
/// Sync`, and all derivative orders `a + b ≤ 2 * max_deriv` are available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "KernelSerde", into = "KernelSerde")]
pub struct Kernel {
    kind: KernelKind,
    max_deriv: usize,
    /// Symmetrized power spectrum for torus kernels: `weights[j]` is the
    /// power at frequency `±j`, so `K(u) = w_0 + 2 Σ_{j≥1} w_j cos(2πju)`.
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct KernelSerde {
    kind: KernelKind,
    max_deriv: usize,
}

impl From<KernelSerde> for Kernel {
    fn from(s: KernelSerde) -> Self {
        Kernel::from_parts(s.kind, s.max_deriv)
    }
}

impl From<Kernel> for KernelSerde {
    fn from(k: Kernel) -> Self {
        KernelSerde { kind: k.kind, max_deriv: k.max_deriv }
    }
}

impl Kernel {
    pub fn dirichlet(fc: u32) -> Result<Self, KernelError> {
        if fc == 0 {
            return Err(KernelError::Parse("dirichlet cutoff fc must be >= 1".into()));
        }
        let max_deriv = 12usize.max(2 * fc as usize + 4);
        Ok(Self::from_parts(KernelKind::Dirichlet { fc }, max_deriv))
    }

    pub fn gaussian(sigma: f64) -> Result<Self, KernelError> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(KernelError::Parse(format!("gaussian sigma must be positive, got {sigma}")));
        }
        Ok(Self::from_parts(KernelKind::Gaussian { sigma }, 12))
    }

    /// Trigonometric kernel from a nonnegative magnitude profile indexed
    /// `-fc..fc`. The correlation uses the symmetrized power spectrum
    /// `(|c_j|² + |c_{-j}|²)/2`, which is what a real filter produces.
    pub fn fourier(magnitudes: Vec<f64>) -> Result<Self, KernelError> {
        if magnitudes.is_empty() || magnitudes.len() % 2 == 0 {
            return Err(KernelError::Parse(format!(
                "fourier profile must have odd length 2*fc+1, got {}",
                magnitudes.len()
            )));
        }
        if magnitudes.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(KernelError::Parse("fourier magnitudes must be nonnegative".into()));
        }
        if magnitudes.iter().all(|&c| c == 0.0) {
            return Err(KernelError::Parse("fourier profile is identically zero".into()));
        }
        let fc = (magnitudes.len() - 1) / 2;
        let max_deriv = 12usize.max(2 * fc + 4);
        Ok(Self::from_parts(KernelKind::Fourier { magnitudes }, max_deriv))
    }

    /// Low-pass profile with exponentially weighted extreme frequencies:
    /// magnitude `exp(gamma (|j|/fc)²)` at frequency `j`. `gamma = 0` is the
    /// ideal low-pass filter; large `gamma` concentrates energy at the band
    /// edges and the limit certificate degenerates (around `gamma ≈ 4` for
    /// `fc = 10`, `N = 2`).
    pub fn fourier_ramp(fc: u32, gamma: f64) -> Result<Self, KernelError> {
        if fc == 0 {
            return Err(KernelError::Parse("ramp profile needs fc >= 1".into()));
        }
        let magnitudes = (-(fc as i32)..=fc as i32)
            .map(|j| (gamma * (j.abs() as f64 / fc as f64).powi(2)).exp())
            .collect();
        Self::fourier(magnitudes)
    }

    fn from_parts(kind: KernelKind, max_deriv: usize) -> Self {
        let weights = match &kind {
            KernelKind::Dirichlet { fc } => vec![1.0; *fc as usize + 1],
            KernelKind::Fourier { magnitudes } => {
                let fc = (magnitudes.len() - 1) / 2;
                (0..=fc)
                    .map(|j| {
                        let plus = magnitudes[fc + j];
                        let minus = magnitudes[fc - j];
                        if j == 0 {
                            plus * plus
                        } else {
                            0.5 * (plus * plus + minus * minus)
                        }
                    })
                    .collect()
            }
            KernelKind::Gaussian { .. } => Vec::new(),
        };
        Self { kind, max_deriv, weights }
    }

    /// Ensure derivative coverage for `n` spikes (orders up to `2n + 2`).
    pub fn for_spikes(mut self, n: usize) -> Self {
        self.max_deriv = self.max_deriv.max(2 * n + 2);
        self
    }

    pub fn with_max_deriv(mut self, max_deriv: usize) -> Self {
        self.max_deriv = max_deriv;
        self
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn max_deriv(&self) -> usize {
        self.max_deriv
    }

    pub fn domain(&self) -> Domain {
        match self.kind {
            KernelKind::Gaussian { .. } => Domain::Line,
            _ => Domain::Torus,
        }
    }

    /// Characteristic length of the kernel: `σ` for the Gaussian, `1/fc`
    /// (the Rayleigh length) for torus kernels. Grid defaults derive from it.
    pub fn scale(&self) -> f64 {
        match &self.kind {
            KernelKind::Gaussian { sigma } => *sigma,
            KernelKind::Dirichlet { fc } => 1.0 / *fc as f64,
            KernelKind::Fourier { magnitudes } => {
                let fc = (magnitudes.len() - 1) / 2;
                1.0 / fc.max(1) as f64
            }
        }
    }

    /// `∂_x^a ∂_y^b K(x, y)`, i.e. `⟨φ^{(a)}(x), φ^{(b)}(y)⟩`, exactly.
    pub fn correlation_deriv(&self, a: usize, b: usize, x: f64, y: f64) -> Result<f64, KernelError> {
        if a + b > 2 * self.max_deriv {
            return Err(KernelError::OrderOverflow { a, b, max: self.max_deriv });
        }
        Ok(self.corr_unchecked(a, b, x, y))
    }

    pub(crate) fn corr_unchecked(&self, a: usize, b: usize, x: f64, y: f64) -> f64 {
        let m = a + b;
        let u = x - y;
        match &self.kind {
            KernelKind::Gaussian { sigma } => {
                // K(x,y) = σ√π e^{-u²/(4σ²)}; m-th derivative via probabilists'
                // Hermite values: G^{(m)}(u) = σ√π (-c)^m He_m(cu) e^{-(cu)²/2}
                let c = 1.0 / (sigma * std::f64::consts::SQRT_2);
                let v = c * u;
                let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
                sign * sigma * SQRT_PI * c.powi(m as i32) * hermite_value(m, v) * (-0.5 * v * v).exp()
            }
            _ => {
                // torus: K(u) = w_0 + 2 Σ_j w_j cos(2πju)
                // d^m/du^m cos(θ) picks the phase-shifted trig by m mod 4
                let sign_b = if b % 2 == 0 { 1.0 } else { -1.0 };
                let mut sum = 0.0;
                for (j, &w) in self.weights.iter().enumerate().skip(1) {
                    if w == 0.0 {
                        continue;
                    }
                    let omega = 2.0 * std::f64::consts::PI * j as f64;
                    let theta = omega * u;
                    let trig = match m % 4 {
                        0 => theta.cos(),
                        1 => -theta.sin(),
                        2 => -theta.cos(),
                        _ => theta.sin(),
                    };
                    sum += 2.0 * w * omega.powi(m as i32) * trig;
                }
                if m == 0 {
                    sum += self.weights[0];
                }
                sign_b * sum
            }
        }
    }

    /// Squared measurement-space norm of `φ^{(d)}(x)` (position-independent
    /// for these convolution kernels).
    pub fn phi_deriv_norm_sq(&self, d: usize) -> Result<f64, KernelError> {
        self.correlation_deriv(d, d, 0.0, 0.0)
    }

    /// Dimension of the explicit coordinate representation, when one exists.
    pub fn coords_dim(&self) -> Option<usize> {
        match &self.kind {
            KernelKind::Dirichlet { fc } => Some(2 * *fc as usize + 1),
            _ => None,
        }
    }

    /// Explicit coordinates of `φ^{(d)}(x)` in the orthonormal basis
    /// `(1, √2 cos(2πk·), √2 sin(2πk·))_{k=1..fc}`, Dirichlet only.
    pub fn phi_coords(&self, d: usize, x: f64) -> Result<DVector<f64>, KernelError> {
        let KernelKind::Dirichlet { fc } = self.kind else {
            return Err(KernelError::NoCoordinates { kernel: self.name().into() });
        };
        let fc = fc as usize;
        let mut v = DVector::zeros(2 * fc + 1);
        v[0] = if d == 0 { 1.0 } else { 0.0 };
        let sqrt2 = std::f64::consts::SQRT_2;
        for k in 1..=fc {
            let omega = 2.0 * std::f64::consts::PI * k as f64;
            let theta = omega * x + d as f64 * std::f64::consts::FRAC_PI_2;
            let amp = sqrt2 * omega.powi(d as i32);
            v[2 * k - 1] = amp * theta.cos();
            v[2 * k] = amp * theta.sin();
        }
        Ok(v)
    }

    /// Decreasing envelope for `|⟨φ(x), φ^{(m)}(y)⟩|` at distance
    /// `|x - y| ≥ dist`, available on the line (Gaussian) only. Uses
    /// Cramér's bound on Hermite functions.
    pub fn tail_envelope(&self, m: usize, dist: f64) -> Option<f64> {
        let KernelKind::Gaussian { sigma } = self.kind else {
            return None;
        };
        let c = 1.0 / (sigma * std::f64::consts::SQRT_2);
        let v = c * dist.abs();
        let sqrt_fact = (1..=m).map(|k| k as f64).product::<f64>().sqrt();
        Some(sigma * SQRT_PI * c.powi(m as i32) * CRAMER_K * sqrt_fact * (-0.25 * v * v).exp())
    }

    /// Power per nonnegative frequency for torus kernels (empty on the line).
    pub(crate) fn power_spectrum(&self) -> &[f64] {
        &self.weights
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            KernelKind::Dirichlet { .. } => "dirichlet",
            KernelKind::Gaussian { .. } => "gaussian",
            KernelKind::Fourier { .. } => "fourier",
        }
    }
}

/// Probabilists' Hermite value `He_m(v)` by the three-term recurrence
/// `He_{k+1}(v) = v·He_k(v) - k·He_{k-1}(v)`.
pub fn hermite_value(m: usize, v: f64) -> f64 {
    let mut prev = 1.0;
    if m == 0 {
        return prev;
    }
    let mut cur = v;
    for k in 1..m {
        let next = v * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            KernelKind::Dirichlet { fc } => write!(f, "dirichlet:fc={fc}"),
            KernelKind::Gaussian { sigma } => write!(f, "gaussian:sigma={sigma}"),
            KernelKind::Fourier { magnitudes } => {
                write!(f, "fourier:coeffs=[")?;
                for (i, c) in magnitudes.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, "]")
            }
        }
    }
}

impl FromStr for Kernel {
    type Err = KernelError;

    /// Parse `dirichlet:fc=10`, `gaussian:sigma=1.0` or
    /// `fourier:coeffs=[c_-fc,…,c_fc]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, rest) = s
            .split_once(':')
            .ok_or_else(|| KernelError::Parse(format!("missing ':' in kernel spec '{s}'")))?;
        match name.trim() {
            "dirichlet" => {
                let fc = parse_kv(rest, "fc")?;
                let fc: u32 = fc
                    .parse()
                    .map_err(|_| KernelError::Parse(format!("bad fc value '{fc}'")))?;
                Kernel::dirichlet(fc)
            }
            "gaussian" => {
                let sigma = parse_kv(rest, "sigma")?;
                let sigma: f64 = sigma
                    .parse()
                    .map_err(|_| KernelError::Parse(format!("bad sigma value '{sigma}'")))?;
                Kernel::gaussian(sigma)
            }
            "fourier" => {
                let coeffs = parse_kv(rest, "coeffs")?;
                let inner = coeffs
                    .strip_prefix('[')
                    .and_then(|c| c.strip_suffix(']'))
                    .ok_or_else(|| {
                        KernelError::Parse(format!("coeffs must be a bracketed list, got '{coeffs}'"))
                    })?;
                let magnitudes: Result<Vec<f64>, _> =
                    inner.split(',').map(|v| v.trim().parse::<f64>()).collect();
                let magnitudes = magnitudes
                    .map_err(|e| KernelError::Parse(format!("bad fourier coefficient: {e}")))?;
                Kernel::fourier(magnitudes)
            }
            other => Err(KernelError::Parse(format!("unknown kernel kind '{other}'"))),
        }
    }
}

fn parse_kv<'a>(rest: &'a str, key: &str) -> Result<&'a str, KernelError> {
    let (k, v) = rest
        .split_once('=')
        .ok_or_else(|| KernelError::Parse(format!("expected {key}=<value>, got '{rest}'")))?;
    if k.trim() != key {
        return Err(KernelError::Parse(format!("expected key '{key}', got '{k}'")));
    }
    Ok(v.trim())
}
