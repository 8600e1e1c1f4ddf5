//! Non-degeneracy verdicts for certificates.
//!
//! A vanishing certificate is non-degenerate when `|η| < 1` away from the
//! spikes and `η'' < 0` at each spike; the limit certificate requires
//! `|η_W| < 1` away from the origin and `η_W^{(2N)}(0) ≠ 0`. The check
//! samples a grid finer than the kernel bandwidth, excludes small balls
//! around the spikes where the curvature sign certifies local behavior, and
//! on the line adds an analytic tail bound beyond the grid.

use super::{CertMeta, Certificate, CertificateError};
use crate::kernels::{Domain, DualVector, Kernel};
use serde::{Deserialize, Serialize};

/// Margin against grid-resolution false positives: "non-degenerate" needs
/// `sup |η| ≤ 1 - 1e-6` off the spikes; values within the margin of 1 are
/// inconclusive rather than true/false.
pub const SUP_MARGIN: f64 = 1e-6;

/// Curvature must clear this magnitude to count as a sign.
pub const CURVATURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub step: f64,
    /// Radius of the balls around spikes excluded from the sup; `None`
    /// picks half the minimal spike gap (or a curvature-scaled radius for
    /// the limit certificate).
    pub exclusion_radius: Option<f64>,
}

impl GridSpec {
    /// Defaults: full torus at step `1/(16 fc)`, or `[-10σ, 10σ]` stretched
    /// to cover the spikes at step `σ/50`.
    pub fn default_for(kernel: &Kernel, spikes: &[f64]) -> Self {
        match kernel.domain() {
            Domain::Torus => {
                GridSpec { start: -0.5, end: 0.5, step: kernel.scale() / 16.0, exclusion_radius: None }
            }
            Domain::Line => {
                let sigma = kernel.scale();
                let lo = spikes.iter().copied().fold(0.0f64, f64::min) - 10.0 * sigma;
                let hi = spikes.iter().copied().fold(0.0f64, f64::max) + 10.0 * sigma;
                GridSpec { start: lo, end: hi, step: sigma / 50.0, exclusion_radius: None }
            }
        }
    }

    pub fn points(&self) -> usize {
        ((self.end - self.start) / self.step).round() as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    NonDegenerate,
    Degenerate,
    Inconclusive,
}

impl Verdict {
    pub fn as_bool(self) -> bool {
        self == Verdict::NonDegenerate
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    /// `sup |η|` over the grid outside the exclusion balls.
    pub sup_off_spike: f64,
    /// `1 - sup_off_spike`.
    pub off_spike_margin: f64,
    /// `η''` at each spike, or the single value `η_W^{(2N)}(0)` for a limit
    /// certificate.
    pub curvature_at_spikes: Vec<f64>,
    pub verdict: Verdict,
    pub grid: GridSpec,
    /// Analytic bound on `|η|` beyond the grid ends (line kernels).
    pub tail_bound: Option<f64>,
}

fn torus_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Scan `|η|` on the grid, certify concavity at the spikes, and return the
/// verdict. Refuses grids coarser than an eighth of the kernel scale, where
/// a peak could slip between samples.
pub fn check_nondegeneracy(
    cert: &Certificate,
    grid: &GridSpec,
) -> Result<NondegeneracyReport, CertificateError> {
    let kernel = cert.kernel();
    let required = kernel.scale() / 8.0;
    if !(grid.step > 0.0) || grid.step >= required {
        return Err(CertificateError::GridTooCoarse { step: grid.step, required });
    }
    let spikes = cert.spike_positions();
    let is_torus = kernel.domain() == Domain::Torus;
    let dist = |a: f64, b: f64| if is_torus { torus_dist(a, b) } else { (a - b).abs() };

    // curvature at the spikes: η'' for interpolating certificates, the
    // 2N-th derivative at 0 for the limit
    let (curvatures, curvature_ok): (Vec<f64>, bool) = match cert.meta() {
        CertMeta::Limit { spike_count } => {
            let c = cert.eval_deriv(2 * spike_count, 0.0)?;
            (vec![c], c.abs() > CURVATURE_TOL)
        }
        _ => {
            let mut cs = Vec::with_capacity(spikes.len());
            for &s in &spikes {
                cs.push(cert.eval_deriv(2, s)?);
            }
            let ok = cs.iter().all(|&c| c < -CURVATURE_TOL);
            (cs, ok)
        }
    };

    let exclusion = grid.exclusion_radius.unwrap_or_else(|| {
        let min_gap = if spikes.len() >= 2 {
            let mut g = f64::INFINITY;
            for i in 0..spikes.len() {
                for j in i + 1..spikes.len() {
                    g = g.min(dist(spikes[i], spikes[j]));
                }
            }
            g
        } else {
            kernel.scale()
        };
        match cert.meta() {
            // radius where the dominant Taylor term of 1 - η clears the
            // sup margin, so grid points just outside the ball are safe
            CertMeta::Limit { spike_count } => {
                let n2 = 2 * spike_count;
                let c = curvatures[0].abs().max(CURVATURE_TOL);
                let mut fact = 1.0;
                for i in 1..=n2 {
                    fact *= i as f64;
                }
                let r = (10.0 * SUP_MARGIN * fact / c).powf(1.0 / n2 as f64);
                r.clamp(2.0 * grid.step, 0.45 * (grid.end - grid.start))
            }
            _ => (0.5 * min_gap).max(2.0 * grid.step),
        }
    });

    let mut sup_off = 0.0f64;
    let mut exceed_near_spike = 0.0f64;
    let n_points = grid.points();
    for i in 0..n_points {
        let x = grid.start + i as f64 * grid.step;
        let v = cert.eval(x)?.abs();
        if spikes.iter().any(|&s| dist(x, s) < exclusion) {
            // inside an exclusion ball the value may approach 1 but must
            // not overshoot it
            exceed_near_spike = exceed_near_spike.max(v - 1.0);
        } else {
            sup_off = sup_off.max(v);
        }
    }

    // analytic tail domination beyond the grid (line kernels, atom duals)
    let tail_bound = match (kernel.domain(), cert.source()) {
        (Domain::Line, DualVector::Atoms(combo)) => {
            let mut bound = 0.0f64;
            for side in [grid.start, grid.end] {
                let mut b = 0.0;
                for a in combo.atoms() {
                    let d = (side - a.position).abs();
                    b += a.coefficient.abs()
                        * kernel.tail_envelope(a.deriv_order, d).unwrap_or(f64::INFINITY);
                }
                bound = bound.max(b);
            }
            Some(bound)
        }
        _ => None,
    };
    let tail_ok = tail_bound.map_or(true, |b| b < 1.0 - SUP_MARGIN);

    let clearly_exceeds = sup_off > 1.0 + SUP_MARGIN || exceed_near_spike > SUP_MARGIN;
    let clearly_wrong_curvature = match cert.meta() {
        CertMeta::Limit { .. } => !curvature_ok,
        _ => curvatures.iter().any(|&c| c > CURVATURE_TOL),
    };
    let verdict = if clearly_exceeds || clearly_wrong_curvature {
        Verdict::Degenerate
    } else if sup_off <= 1.0 - SUP_MARGIN
        && exceed_near_spike <= 1e-9
        && curvature_ok
        && tail_ok
    {
        Verdict::NonDegenerate
    } else {
        Verdict::Inconclusive
    };

    Ok(NondegeneracyReport {
        sup_off_spike: sup_off,
        off_spike_margin: 1.0 - sup_off,
        curvature_at_spikes: curvatures,
        verdict,
        grid: GridSpec { exclusion_radius: Some(exclusion), ..*grid },
        tail_bound,
    })
}

/// Necessary condition for recovery in the cluster limit: `‖η_W‖∞ ≤ 1`
/// (within `1e-8`), checked on the default grid with no exclusions.
pub fn necessary_condition_check(
    kernel: &Kernel,
    spike_count: usize,
) -> Result<bool, CertificateError> {
    let cert = super::limit_precert(kernel, spike_count)?;
    let grid = GridSpec::default_for(kernel, &[0.0]);
    let mut sup = 0.0f64;
    for i in 0..grid.points() {
        let x = grid.start + i as f64 * grid.step;
        sup = sup.max(cert.eval(x)?.abs());
    }
    Ok(sup <= 1.0 + 1e-8)
}
