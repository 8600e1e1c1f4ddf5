//! Dual certificates for sparse spike recovery.
//!
//! Three certificates matter here. The *vanishing-derivatives*
//! precertificate `η_V,t` is the minimal-norm dual element interpolating
//! value 1 and slope 0 at every spike `t·z_i`. Its cluster limit `η_W`
//! interpolates value 1 at the origin with `2N-1` vanishing derivatives.
//! The *λ-certificate* `η_λ = Φ*(y + w - Φm)/λ` certifies optimality of a
//! candidate solution. Each is an atom combination in measurement space, so
//! evaluation anywhere is quadrature-free correlation calculus.
//!
//! Construction of `η_V,t` solves the spike Gram `Γ*Γ` directly only while
//! the cluster is separated enough for that to be accurate; once it
//! collapses, squaring the collapsing singular values would lose every digit,
//! so the solve switches to the exact Taylor factorization `Γ = F̃ · H_tz`
//! with `F̃ = F_2N + Λ_t H_z^{-1} D_t`: `H_tz` inverts exactly through its
//! diagonal grading, the corrected frame Gram `F̃*F̃` stays uniformly
//! conditioned as `t → 0`, and the interpolation right-hand side transforms
//! to `δ_2N` exactly (interpolating the constant 1 is exact at any scale).
//! The remainder columns `Λ` are integrals of `φ^{(2N)}` along the segment
//! `[0, t z_i]`, evaluated by Gauss–Legendre panels on the correlation
//! function.

pub mod asymptotics;
pub mod nondegen;

pub use asymptotics::{convergence_report, second_deriv_asymptotics, ConvergenceReport, SecondDerivComparison};
pub use nondegen::{check_nondegeneracy, necessary_condition_check, GridSpec, NondegeneracyReport, Verdict};

use crate::interp::{hz_inverse, scaled_hermite_inverse, InterpError, Nodes};
use crate::kernels::gram::solve_sym_equilibrated;
use crate::kernels::quad::gauss_legendre;
use crate::kernels::{gram_fk, injectivity_check, AtomCombo, DualVector, Kernel, KernelError};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(
        "injectivity condition iota_{k} fails for this kernel: \
         phi^(0)(0)..phi^({k})(0) are linearly dependent"
    )]
    Injectivity { k: usize },
    #[error("singular spike Gram (condition estimate {cond:.3e})")]
    SingularGram { cond: f64 },
    #[error("grid step {step:.3e} too coarse for the kernel bandwidth; need step < {required:.3e}")]
    GridTooCoarse { step: f64, required: f64 },
    #[error("lambda must be strictly positive, got {0}")]
    LambdaNotPositive(f64),
}

/// What a certificate certifies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CertMeta {
    /// `η_V,t`: value 1, slope 0 at the spikes `t·z_i`.
    Vanishing { t: f64, spikes: Vec<f64> },
    /// `η_W`: value 1 at 0, derivatives 1..2N-1 vanish.
    Limit { spike_count: usize },
    /// `η_λ` of a candidate solution with the given spike positions.
    Lambda { lambda: f64, spikes: Vec<f64> },
}

/// A dual element `p` with its evaluation `η(x) = ⟨φ(x), p⟩`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    kernel: Kernel,
    source: DualVector,
    meta: CertMeta,
}

impl Certificate {
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn source(&self) -> &DualVector {
        &self.source
    }

    pub fn meta(&self) -> &CertMeta {
        &self.meta
    }

    /// `η(x)`.
    pub fn eval(&self, x: f64) -> Result<f64, CertificateError> {
        self.eval_deriv(0, x)
    }

    /// `η^{(l)}(x) = ⟨φ^{(l)}(x), p⟩`.
    pub fn eval_deriv(&self, l: usize, x: f64) -> Result<f64, CertificateError> {
        Ok(self.source.correlate(&self.kernel, l, x)?)
    }

    /// Spike positions the certificate interpolates at (0 for the limit).
    pub fn spike_positions(&self) -> Vec<f64> {
        match &self.meta {
            CertMeta::Vanishing { spikes, .. } | CertMeta::Lambda { spikes, .. } => spikes.clone(),
            CertMeta::Limit { .. } => vec![0.0],
        }
    }

    /// Number of spikes `N` the certificate refers to.
    pub fn spike_count(&self) -> usize {
        match &self.meta {
            CertMeta::Vanishing { spikes, .. } | CertMeta::Lambda { spikes, .. } => spikes.len(),
            CertMeta::Limit { spike_count } => *spike_count,
        }
    }
}

/// One Taylor-remainder column `weight · ∫ φ^{(2N)}(s·t·z) ω(s) ds`.
struct RemainderColumn {
    weight: f64,
    center: f64,
    /// exponent of `(1-s)` in the smoothing weight, normalized by its factorial
    smooth_order: usize,
}

/// The corrected frame `F̃ = Γ_tz H_tz^{-1}` together with the pieces needed
/// to assemble certificates: its Gram (uniformly conditioned in `t`) and the
/// exact graded inverse of `H_tz`.
struct CorrectedFrame {
    gram: DMatrix<f64>,
    htz_inv: DMatrix<f64>,
}

fn corrected_frame(kernel: &Kernel, t: f64, z: &Nodes) -> Result<CorrectedFrame, CertificateError> {
    let n = z.len();
    let two_n = 2 * n;
    let order = two_n; // Taylor order 2N
    let gram_f = gram_fk(kernel, two_n - 1)?.matrix;

    // remainder columns of Λ_{t,z}
    let cols: Vec<RemainderColumn> = (0..two_n)
        .map(|m| {
            let (zi, p) = if m < n {
                (z.values()[m], two_n)
            } else {
                (z.values()[m - n], two_n - 1)
            };
            RemainderColumn { weight: zi.powi(p as i32), center: zi, smooth_order: p - 1 }
        })
        .collect();

    // Ĥ = H_z^{-1} diag(t^{2N-j}), so that F̃ = F + Λ Ĥ exactly
    let hz_inv = hz_inverse(z);
    let h_hat = DMatrix::from_fn(two_n, two_n, |i, j| hz_inv[(i, j)] * t.powi((two_n - j) as i32));

    // quadrature rule sized to the phase excursion of φ^{(2N)} over [0, tz]
    let reach = t * z.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let panels = quad_panels(kernel, reach);
    let rule = gauss_legendre(16);
    let nodes01: Vec<(f64, f64)> =
        rule.iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();

    let smooth = |q: usize, s: f64| {
        let mut v = 1.0;
        for i in 1..=q {
            v *= (1.0 - s) / i as f64;
        }
        v
    };

    // P[m][b] = ⟨λ_m, φ^{(b)}(0)⟩
    let mut p = DMatrix::zeros(two_n, two_n);
    for (m, col) in cols.iter().enumerate() {
        for b in 0..two_n {
            let mut acc = 0.0;
            for panel in 0..panels {
                for &(s01, w01) in &nodes01 {
                    let s = (panel as f64 + s01) / panels as f64;
                    acc += w01 / panels as f64
                        * smooth(col.smooth_order, s)
                        * kernel.correlation_deriv(order, b, s * t * col.center, 0.0)?;
                }
            }
            p[(m, b)] = col.weight * acc;
        }
    }

    // Q[m][m'] = ⟨λ_m, λ_{m'}⟩
    let mut q = DMatrix::zeros(two_n, two_n);
    for (m, cm) in cols.iter().enumerate() {
        for (mp, cmp) in cols.iter().enumerate().skip(m) {
            let mut acc = 0.0;
            for pa in 0..panels {
                for &(sa, wa) in &nodes01 {
                    let s = (pa as f64 + sa) / panels as f64;
                    let ws = wa / panels as f64 * smooth(cm.smooth_order, s);
                    for pb in 0..panels {
                        for &(sb, wb) in &nodes01 {
                            let sp = (pb as f64 + sb) / panels as f64;
                            acc += ws
                                * wb / panels as f64
                                * smooth(cmp.smooth_order, sp)
                                * kernel.correlation_deriv(
                                    order,
                                    order,
                                    s * t * cm.center,
                                    sp * t * cmp.center,
                                )?;
                        }
                    }
                }
            }
            let v = cm.weight * cmp.weight * acc;
            q[(m, mp)] = v;
            q[(mp, m)] = v;
        }
    }

    let gram = &gram_f
        + p.transpose() * &h_hat
        + h_hat.transpose() * &p
        + h_hat.transpose() * q * &h_hat;
    // symmetrize against roundoff
    let gram = 0.5 * (&gram + gram.transpose());

    Ok(CorrectedFrame { gram, htz_inv: scaled_hermite_inverse(z, t) })
}

fn quad_panels(kernel: &Kernel, reach: f64) -> usize {
    let phase = match kernel.domain() {
        crate::kernels::Domain::Torus => {
            let fc = (kernel.power_spectrum().len() - 1) as f64;
            2.0 * std::f64::consts::PI * fc * reach
        }
        crate::kernels::Domain::Line => 2.0 * reach / kernel.scale(),
    };
    ((phase / 3.0).ceil() as usize).max(1)
}

/// Equilibrated Gram condition below which the direct spike-Gram solve is
/// accurate; above it the cluster has collapsed enough for the factored
/// construction, whose conditioning is uniform in `t`.
const DIRECT_ROUTE_COND: f64 = 1e6;

/// The vanishing-derivatives precertificate `η_V,t` for spikes at `t·z`:
/// minimal-norm dual element with `η(t z_i) = 1`, `η'(t z_i) = 0`.
///
/// Returned as an atom combination over `{φ(t z_i), φ'(t z_i)}`. Solves the
/// spike Gram directly while it is well conditioned (separated spikes) and
/// switches to the Taylor-factored frame once the cluster collapses; the
/// two constructions agree to machine precision in the handoff region.
pub fn vanishing_precert(kernel: &Kernel, t: f64, z: &Nodes) -> Result<Certificate, CertificateError> {
    assert!(t > 0.0, "scale must be positive");
    let kernel = kernel.clone().for_spikes(z.len());
    let n = z.len();
    let tz = z.scaled(t)?;
    let gamma = crate::kernels::gamma_gram(&kernel, &tz)?;

    let coeffs = if gamma.cond_estimate <= DIRECT_ROUTE_COND {
        let mut rhs = DVector::zeros(2 * n);
        for i in 0..n {
            rhs[i] = 1.0;
        }
        let (c, _cond) = solve_sym_equilibrated(&gamma.matrix, &rhs).map_err(|e| match e {
            KernelError::SingularGram { cond } => CertificateError::SingularGram { cond },
            other => CertificateError::Kernel(other),
        })?;
        c
    } else {
        let frame = corrected_frame(&kernel, t, z)?;
        let mut rhs = DVector::zeros(2 * n);
        rhs[0] = 1.0;
        let (v, _cond) = solve_sym_equilibrated(&frame.gram, &rhs).map_err(|e| match e {
            KernelError::SingularGram { cond } => CertificateError::SingularGram { cond },
            other => CertificateError::Kernel(other),
        })?;
        &frame.htz_inv * v
    };

    let mut atoms = AtomCombo::empty();
    for (i, &zi) in z.values().iter().enumerate() {
        atoms.push(t * zi, 0, coeffs[i]);
    }
    for (i, &zi) in z.values().iter().enumerate() {
        atoms.push(t * zi, 1, coeffs[n + i]);
    }
    let spikes = z.values().iter().map(|&zi| t * zi).collect();
    Ok(Certificate { kernel, source: DualVector::Atoms(atoms), meta: CertMeta::Vanishing { t, spikes } })
}

/// The `(2N-1)`-vanishing-derivatives precertificate `η_W`: value 1 at the
/// origin, derivatives `1..2N-1` vanish. Atom combination over
/// `{φ^{(i)}(0)}_{i<2N}`. Requires the injectivity of that derivative family.
pub fn limit_precert(kernel: &Kernel, spike_count: usize) -> Result<Certificate, CertificateError> {
    assert!(spike_count >= 1);
    let kernel = kernel.clone().for_spikes(spike_count);
    let two_n = 2 * spike_count;
    let inj = injectivity_check(&kernel, two_n - 1)?;
    if !inj.holds {
        return Err(CertificateError::Injectivity { k: two_n - 1 });
    }
    let gram = gram_fk(&kernel, two_n - 1)?.matrix;
    let mut rhs = DVector::zeros(two_n);
    rhs[0] = 1.0;
    let (v, _cond) = solve_sym_equilibrated(&gram, &rhs).map_err(|e| match e {
        KernelError::SingularGram { cond } => CertificateError::SingularGram { cond },
        other => CertificateError::Kernel(other),
    })?;
    let mut atoms = AtomCombo::empty();
    for i in 0..two_n {
        atoms.push(0.0, i, v[i]);
    }
    Ok(Certificate {
        kernel,
        source: DualVector::Atoms(atoms),
        meta: CertMeta::Limit { spike_count },
    })
}

/// Closed form of `η_W` for the unit Gaussian kernel:
/// `e^{-x²/4} Σ_{k=0}^{N-1} x^{2k} / (4^k k!)`.
///
/// The summation range starts at `k = 0` so that `η_W(0) = 1` (the defining
/// constraint) and the `N = 1` case reduces to `e^{-x²/4}`; it is pinned
/// against the linear-system solve in the tests.
pub fn gaussian_etaw_closed_form(spike_count: usize, x: f64) -> f64 {
    assert!(spike_count >= 1);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..spike_count {
        term *= x * x / (4.0 * k as f64);
        sum += term;
    }
    (-x * x / 4.0).exp() * sum
}

/// `η_W^{(2N)}(0)`, the curvature order that controls the recovery scaling.
/// Strictly negative for the shipped convolution kernels; for the unit
/// Gaussian it equals `-(2N)!/(2^{2N} N!)`.
pub fn etaw_curvature(kernel: &Kernel, spike_count: usize) -> Result<f64, CertificateError> {
    let cert = limit_precert(kernel, spike_count)?;
    cert.eval_deriv(2 * spike_count, 0.0)
}

/// The λ-certificate `η_λ = Φ*(y + w - Φ m)/λ` of a candidate measure with
/// the given amplitudes and positions. `observation` is `y + w`.
pub fn lambda_certificate(
    kernel: &Kernel,
    observation: &DualVector,
    lambda: f64,
    amplitudes: &[f64],
    positions: &[f64],
) -> Result<Certificate, CertificateError> {
    if !(lambda > 0.0) {
        return Err(CertificateError::LambdaNotPositive(lambda));
    }
    assert_eq!(amplitudes.len(), positions.len());
    let source = match observation {
        DualVector::Coords(coords) => {
            let mut v = DVector::from_column_slice(coords);
            for (&a, &x) in amplitudes.iter().zip(positions) {
                v -= kernel.phi_coords(0, x)? * a;
            }
            DualVector::Coords((v / lambda).iter().copied().collect())
        }
        DualVector::Atoms(combo) => {
            let mut atoms = combo.clone();
            for (&a, &x) in amplitudes.iter().zip(positions) {
                atoms.push(x, 0, -a);
            }
            DualVector::Atoms(atoms.scaled(1.0 / lambda))
        }
    };
    Ok(Certificate {
        kernel: kernel.clone(),
        source,
        meta: CertMeta::Lambda { lambda, spikes: positions.to_vec() },
    })
}

/// Oracle construction of `η_V,t` by direct inversion of the spike Gram
/// `Γ*Γ`. Accurate only while that Gram is numerically far from singular;
/// kept as an independent cross-check of [`vanishing_precert`].
pub fn vanishing_precert_direct(
    kernel: &Kernel,
    t: f64,
    z: &Nodes,
) -> Result<Certificate, CertificateError> {
    let kernel = kernel.clone().for_spikes(z.len());
    let n = z.len();
    let tz = z.scaled(t)?;
    let gram = crate::kernels::gamma_gram(&kernel, &tz)?;
    let mut rhs = DVector::zeros(2 * n);
    for i in 0..n {
        rhs[i] = 1.0;
    }
    let coeffs = gram
        .matrix
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(CertificateError::SingularGram { cond: gram.cond_estimate })?;
    let mut atoms = AtomCombo::empty();
    for (i, &xi) in tz.values().iter().enumerate() {
        atoms.push(xi, 0, coeffs[i]);
    }
    for (i, &xi) in tz.values().iter().enumerate() {
        atoms.push(xi, 1, coeffs[n + i]);
    }
    let spikes = tz.values().to_vec();
    Ok(Certificate { kernel, source: DualVector::Atoms(atoms), meta: CertMeta::Vanishing { t, spikes } })
}

/// Eighth-order central finite difference of `η^{(l-1)}` as an independent
/// check on `η^{(l)}`.
pub fn finite_difference_deriv(
    cert: &Certificate,
    l: usize,
    x: f64,
    h: f64,
) -> Result<f64, CertificateError> {
    assert!(l >= 1);
    const STENCIL: [(i32, f64); 8] = [
        (-4, 1.0 / 280.0),
        (-3, -4.0 / 105.0),
        (-2, 1.0 / 5.0),
        (-1, -4.0 / 5.0),
        (1, 4.0 / 5.0),
        (2, -1.0 / 5.0),
        (3, 4.0 / 105.0),
        (4, -1.0 / 280.0),
    ];
    let mut acc = 0.0;
    for &(k, w) in &STENCIL {
        acc += w * cert.eval_deriv(l - 1, x + k as f64 * h)?;
    }
    Ok(acc / h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nodes(v: &[f64]) -> Nodes {
        Nodes::new(v.to_vec()).unwrap()
    }

    #[test]
    fn single_spike_gaussian_is_normalized_autocorrelation() {
        let k = Kernel::gaussian(1.0).unwrap();
        let cert = vanishing_precert(&k, 0.7, &nodes(&[0.0])).unwrap();
        for &x in &[0.0f64, 0.5, -1.3, 2.0] {
            let expect = (-x * x / 4.0).exp();
            let got = cert.eval(x).unwrap();
            assert!((got - expect).abs() < 1e-10, "x={x}: {got} vs {expect}");
        }
    }

    #[test]
    fn vanishing_constraints_hold_at_spikes() {
        let k = Kernel::dirichlet(10).unwrap();
        let z = nodes(&[-1.0, 0.0, 1.0]);
        for &t in &[0.3, 0.05] {
            let cert = vanishing_precert(&k, t, &z).unwrap();
            for &zi in z.values() {
                let v = cert.eval(t * zi).unwrap();
                let d = cert.eval_deriv(1, t * zi).unwrap();
                assert!((v - 1.0).abs() < 1e-8, "t={t} z={zi}: eta={v}");
                // slope residual is relative to the derivative scale of the kernel
                let dscale = k.phi_deriv_norm_sq(1).unwrap().sqrt();
                assert!(d.abs() < 1e-8 * dscale, "t={t} z={zi}: eta'={d}");
            }
        }
    }

    #[test]
    fn factored_construction_matches_direct_solve_at_benign_scale() {
        // oracle: direct Gram inversion, trustworthy at moderate t
        let k = Kernel::dirichlet(8).unwrap();
        let z = nodes(&[-1.0, 0.6]);
        let t = 0.3;
        let fast = vanishing_precert(&k, t, &z).unwrap();
        let direct = vanishing_precert_direct(&k, t, &z).unwrap();
        for &x in &[-0.45, -0.2, 0.0, 0.13, 0.4] {
            let a = fast.eval(x).unwrap();
            let b = direct.eval(x).unwrap();
            assert!((a - b).abs() < 1e-9, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn gaussian_factored_matches_direct_solve() {
        let k = Kernel::gaussian(1.0).unwrap();
        let z = nodes(&[-1.0, 1.0]);
        let t = 0.4;
        let fast = vanishing_precert(&k, t, &z).unwrap();
        let direct = vanishing_precert_direct(&k, t, &z).unwrap();
        for &x in &[-2.0, -0.4, 0.0, 0.7, 3.0] {
            let a = fast.eval(x).unwrap();
            let b = direct.eval(x).unwrap();
            assert!((a - b).abs() < 1e-9, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn corrected_frame_gram_matches_coordinate_route() {
        // oracle: the same Gram computed in explicit Dirichlet coordinates,
        // F̃ = Γ H_tz^{-1} formed exactly
        let k = Kernel::dirichlet(10).unwrap().for_spikes(3);
        let z = nodes(&[-1.0, 0.0, 1.0]);
        let n = 3;
        for &t in &[0.05, 0.01] {
            let dim = k.coords_dim().unwrap();
            let mut gamma = DMatrix::zeros(dim, 2 * n);
            for (i, &zi) in z.values().iter().enumerate() {
                gamma.set_column(i, &k.phi_coords(0, t * zi).unwrap());
                gamma.set_column(n + i, &k.phi_coords(1, t * zi).unwrap());
            }
            let ftilde = &gamma * crate::interp::scaled_hermite_inverse(&z, t);
            let exact = ftilde.transpose() * &ftilde;
            let frame = corrected_frame(&k, t, &z).unwrap();
            for i in 0..2 * n {
                for j in 0..2 * n {
                    let scale = (exact[(i, i)] * exact[(j, j)]).sqrt();
                    let diff = (frame.gram[(i, j)] - exact[(i, j)]).abs();
                    assert!(diff < 1e-10 * scale, "t={t} ({i},{j}): diff {diff:.3e}");
                }
            }
        }
    }

    #[test]
    fn limit_precert_constraints() {
        for kernel in [Kernel::dirichlet(10).unwrap(), Kernel::gaussian(1.0).unwrap()] {
            for n in 1..=3usize {
                let cert = limit_precert(&kernel, n).unwrap();
                assert!((cert.eval(0.0).unwrap() - 1.0).abs() < 1e-8, "{} n={n}", kernel.name());
                for i in 1..2 * n {
                    let d = cert.eval_deriv(i, 0.0).unwrap();
                    let scale = kernel.phi_deriv_norm_sq(i).unwrap().sqrt();
                    assert!(d.abs() < 1e-8 * scale, "{} n={n} order {i}: {d}", kernel.name());
                }
            }
        }
    }

    #[test]
    fn dirichlet_single_spike_is_normalized_dirichlet_ratio() {
        // N = 1: η_W(x) = K(x,0)/K(0,0) = sin((2fc+1)πx) / ((2fc+1) sin(πx))
        let fc = 10u32;
        let k = Kernel::dirichlet(fc).unwrap();
        let cert = limit_precert(&k, 1).unwrap();
        let m = 2.0 * fc as f64 + 1.0;
        for &x in &[0.013, 0.2, -0.37, 0.49] {
            let expect = (m * std::f64::consts::PI * x).sin()
                / (m * (std::f64::consts::PI * x).sin());
            let got = cert.eval(x).unwrap();
            assert!((got - expect).abs() < 1e-12, "x={x}: {got} vs {expect}");
        }
    }

    #[test]
    fn limit_precert_orthogonality() {
        // ⟨p_W, φ^{(i)}(0)⟩ = δ_{i0} for i ≤ 2N-1
        let k = Kernel::gaussian(1.0).unwrap();
        let cert = limit_precert(&k, 3).unwrap();
        for i in 0..6 {
            let v = cert.eval_deriv(i, 0.0).unwrap();
            let expect = if i == 0 { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-8);
        }
    }

    #[test]
    fn wrapped_torus_spikes_give_singular_gram() {
        // z = (-1, 1) at t = 0.5 puts both spikes on the same torus point
        let k = Kernel::dirichlet(8).unwrap();
        let z = nodes(&[-1.0, 1.0]);
        match vanishing_precert(&k, 0.5, &z) {
            Err(CertificateError::SingularGram { cond }) => assert!(cond > 1e14),
            other => panic!("expected singular Gram, got {other:?}"),
        }
    }

    #[test]
    fn limit_precert_requires_injectivity() {
        // fc=1 supports only 2fc+1 = 3 independent derivatives; N=2 needs 4
        let k = Kernel::dirichlet(1).unwrap();
        match limit_precert(&k, 2) {
            Err(CertificateError::Injectivity { k: 3 }) => {}
            other => panic!("expected injectivity failure, got {other:?}"),
        }
    }

    #[test]
    fn closed_form_resolved_index_range() {
        // the summation must start at k=0: η_W(0) = 1 and N=1 is e^{-x²/4}
        assert_eq!(gaussian_etaw_closed_form(1, 0.0), 1.0);
        let x = 1.3f64;
        assert!((gaussian_etaw_closed_form(1, x) - (-x * x / 4.0).exp()).abs() < 1e-15);
        // oracle: linear-system solve for N = 2 and 3
        let k = Kernel::gaussian(1.0).unwrap();
        for n in 2..=3usize {
            let cert = limit_precert(&k, n).unwrap();
            for &x in &[0.0, 0.35, 1.1, 2.0, 4.5, -3.2] {
                let solve = cert.eval(x).unwrap();
                let closed = gaussian_etaw_closed_form(n, x);
                assert!((solve - closed).abs() < 1e-9, "n={n} x={x}: {solve} vs {closed}");
            }
        }
    }

    #[test]
    fn limit_precert_matches_qr_oracle_in_coordinates() {
        // independent oracle: minimal-norm dual via thin QR of the explicit
        // coordinate frame, p = Q R^{-T} δ
        let k = Kernel::dirichlet(10).unwrap();
        for n in 1..=3usize {
            let cert = limit_precert(&k, n).unwrap();
            let dim = k.coords_dim().unwrap();
            let two_n = 2 * n;
            let mut f = DMatrix::zeros(dim, two_n);
            for i in 0..two_n {
                f.set_column(i, &k.phi_coords(i, 0.0).unwrap());
            }
            let qr = f.qr();
            let mut delta = DVector::zeros(two_n);
            delta[0] = 1.0;
            let w = qr.r().transpose().lu().solve(&delta).unwrap();
            let p = qr.q() * w;
            for i in 0..=100 {
                let x = -0.5 + i as f64 / 100.0;
                let via_qr = k.phi_coords(0, x).unwrap().dot(&p);
                let via_atoms = cert.eval(x).unwrap();
                assert!((via_qr - via_atoms).abs() < 1e-12, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn vanishing_precert_matches_qr_oracle_in_coordinates() {
        let k = Kernel::dirichlet(10).unwrap();
        let z = nodes(&[-1.0, 0.4, 1.0]);
        let n = 3;
        for &t in &[0.2, 0.05] {
            let cert = vanishing_precert(&k, t, &z).unwrap();
            let dim = k.coords_dim().unwrap();
            let mut gamma = DMatrix::zeros(dim, 2 * n);
            for (i, &zi) in z.values().iter().enumerate() {
                gamma.set_column(i, &k.phi_coords(0, t * zi).unwrap());
                gamma.set_column(n + i, &k.phi_coords(1, t * zi).unwrap());
            }
            let qr = gamma.qr();
            let mut rhs = DVector::zeros(2 * n);
            for i in 0..n {
                rhs[i] = 1.0;
            }
            let w = qr.r().transpose().lu().solve(&rhs).unwrap();
            let p = qr.q() * w;
            for i in 0..=100 {
                let x = -0.5 + i as f64 / 100.0;
                let via_qr = k.phi_coords(0, x).unwrap().dot(&p);
                let via_atoms = cert.eval(x).unwrap();
                assert!(
                    (via_qr - via_atoms).abs() < 1e-9,
                    "t={t} x={x}: {via_qr} vs {via_atoms}"
                );
            }
        }
    }

    #[test]
    fn closed_form_holds_through_seven_spikes() {
        let k = Kernel::gaussian(1.0).unwrap();
        for n in [5usize, 7] {
            let cert = limit_precert(&k, n).unwrap();
            for i in 0..=100 {
                let x = -10.0 + 20.0 * i as f64 / 100.0;
                let solve = cert.eval(x).unwrap();
                let closed = gaussian_etaw_closed_form(n, x);
                assert!((solve - closed).abs() < 1e-10, "n={n} x={x}: {solve} vs {closed}");
            }
        }
    }

    #[test]
    fn closed_form_bounded_and_decaying() {
        for n in 1..=4usize {
            for &x in &[0.3, 1.0, 2.7, 6.0, 12.0, 19.9] {
                let v = gaussian_etaw_closed_form(n, x);
                assert!(v > 0.0 && v < 1.0, "n={n} x={x}: {v}");
                assert!((gaussian_etaw_closed_form(n, -x) - v).abs() < 1e-15);
            }
            assert!(gaussian_etaw_closed_form(n, 60.0) < 1e-100);
        }
    }

    #[test]
    fn gaussian_curvature_closed_form() {
        let k = Kernel::gaussian(1.0).unwrap();
        for n in 1..=4usize {
            let got = etaw_curvature(&k, n).unwrap();
            let mut expect = -1.0;
            for i in 1..=2 * n {
                expect *= i as f64;
            }
            for _ in 0..2 * n {
                expect /= 2.0;
            }
            for i in 1..=n {
                expect /= i as f64;
            }
            assert!(
                (got - expect).abs() < 1e-6 * expect.abs(),
                "n={n}: {got} vs {expect}"
            );
        }
        // N=1: η_W''(0) = -1/2
        let v = etaw_curvature(&k, 1).unwrap();
        assert!((v + 0.5).abs() < 1e-9);
    }

    #[test]
    fn dirichlet_curvature_is_negative() {
        let k = Kernel::dirichlet(10).unwrap();
        let v = etaw_curvature(&k, 3).unwrap();
        assert!(v < 0.0, "eta_W^(6)(0) = {v}");
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let k = Kernel::dirichlet(6).unwrap();
        let cert = vanishing_precert(&k, 0.2, &nodes(&[-0.8, 0.9])).unwrap();
        let h = 1e-3;
        for l in 1..=4usize {
            for &x in &[0.03, -0.21, 0.4] {
                let fd = finite_difference_deriv(&cert, l, x, h).unwrap();
                let an = cert.eval_deriv(l, x).unwrap();
                let scale = an.abs().max(k.phi_deriv_norm_sq(l).unwrap().sqrt());
                assert!((fd - an).abs() < 1e-5 * scale, "l={l} x={x}: fd={fd} vs {an}");
            }
        }
        // same check on a limit certificate over the line
        let g = Kernel::gaussian(1.0).unwrap();
        let cert = limit_precert(&g, 2).unwrap();
        let h = 5e-3;
        for l in 1..=4usize {
            for &x in &[0.0, 0.6, -1.7, 3.1] {
                let fd = finite_difference_deriv(&cert, l, x, h).unwrap();
                let an = cert.eval_deriv(l, x).unwrap();
                let scale = an.abs().max(1.0);
                assert!((fd - an).abs() < 1e-5 * scale, "gauss l={l} x={x}: fd={fd} vs {an}");
            }
        }
    }

    #[test]
    fn lambda_certificate_unrolls_definition() {
        // measure = 0, y = Φm₀: η_λ = Φ*Φm₀ / λ
        let k = Kernel::gaussian(1.0).unwrap();
        let mut y = AtomCombo::empty();
        y.push(0.4, 0, 2.0);
        y.push(-0.3, 0, 1.0);
        let lam = 0.25;
        let cert = lambda_certificate(&k, &DualVector::Atoms(y.clone()), lam, &[], &[]).unwrap();
        for &x in &[0.0, 0.4, -1.0] {
            let direct = y.correlate(&k, 0, x).unwrap() / lam;
            let got = cert.eval(x).unwrap();
            assert!((got - direct).abs() < 1e-12);
        }
        assert!(matches!(
            lambda_certificate(&k, &DualVector::Atoms(y), 0.0, &[], &[]),
            Err(CertificateError::LambdaNotPositive(_))
        ));
    }

    #[test]
    fn certificate_serializes_to_json() {
        let k = Kernel::gaussian(1.0).unwrap();
        let cert = limit_precert(&k, 2).unwrap();
        let json = serde_json::to_string(&cert).unwrap();
        let back: Certificate = serde_json::from_str(&json).unwrap();
        assert!((back.eval(0.7).unwrap() - cert.eval(0.7).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn hermite_at_zero_closed_form_integer_identity() {
        // He_{2k+2}(0) · 2^k · k! = (-1)^{k+1} (2k+1)!  exactly, k ≤ 8
        let mut he_even: i128 = 1; // He_0(0)
        for k in 0..=8i32 {
            // He_{2k+2}(0) = -(2k+1) He_{2k}(0)
            let he_next = -(2 * k as i128 + 1) * he_even;
            let mut lhs = he_next;
            for _ in 0..k {
                lhs *= 2;
            }
            for i in 1..=k as i128 {
                lhs *= i;
            }
            let mut rhs: i128 = if (k + 1) % 2 == 0 { 1 } else { -1 };
            for i in 1..=(2 * k as i128 + 1) {
                rhs *= i;
            }
            assert_eq!(lhs, rhs, "k={k}");
            // and the float recurrence agrees
            let v = crate::kernels::hermite_value(2 * k as usize + 2, 0.0);
            assert_eq!(v, he_next as f64, "k={k}");
            he_even = he_next;
        }
    }
}
