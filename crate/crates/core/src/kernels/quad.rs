//! Gauss–Legendre quadrature used for the Taylor-remainder correlations and
//! as an independent numerical oracle for the analytic correlation calculus.

use super::{Domain, Kernel, KernelKind};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_deriv(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
    }
    rule
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `∫_a^b f` with a composite `points`-point Gauss–Legendre rule on `panels`
/// equal subintervals.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, points: usize) -> f64 {
    let rule = gauss_legendre(points);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for &(x, w) in &rule {
            total += w * f(mid + 0.5 * h * x);
        }
    }
    total * 0.5 * h
}

/// Numerical oracle for `⟨φ^{(a)}(x), φ^{(b)}(y)⟩`: quadrature of the
/// position-derivative translates `(-1)^{a+b} ∫ φ̃^{(a)}(u-x) φ̃^{(b)}(u-y) du`
/// over the torus or the line.
pub fn integrate_correlation(kernel: &Kernel, a: usize, b: usize, x: f64, y: f64) -> f64 {
    let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
    match kernel.domain() {
        Domain::Torus => {
            let f = |u: f64| filter_deriv(kernel, a, u - x) * filter_deriv(kernel, b, u - y);
            sign * integrate(f, 0.0, 1.0, 64, 16)
        }
        Domain::Line => {
            let KernelKind::Gaussian { sigma } = *kernel.kind() else { unreachable!() };
            let lo = x.min(y) - 14.0 * sigma;
            let hi = x.max(y) + 14.0 * sigma;
            let f = |u: f64| filter_deriv(kernel, a, u - x) * filter_deriv(kernel, b, u - y);
            sign * integrate(f, lo, hi, 128, 16)
        }
    }
}

/// `φ̃^{(d)}(u)`: d-th derivative of the filter itself.
fn filter_deriv(kernel: &Kernel, d: usize, u: f64) -> f64 {
    match kernel.kind() {
        KernelKind::Gaussian { sigma } => {
            // φ̃ = e^{-u²/(2σ²)} = h(u/σ) with h = e^{-v²/2}
            let v = u / sigma;
            let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
            sign * sigma.powi(-(d as i32))
                * super::hermite_value(d, v)
                * (-0.5 * v * v).exp()
        }
        KernelKind::Dirichlet { fc } => {
            let mut s = if d == 0 { 1.0 } else { 0.0 };
            for k in 1..=*fc {
                let omega = 2.0 * std::f64::consts::PI * k as f64;
                let theta = omega * u;
                let trig = match d % 4 {
                    0 => theta.cos(),
                    1 => -theta.sin(),
                    2 => -theta.cos(),
                    _ => theta.sin(),
                };
                s += 2.0 * omega.powi(d as i32) * trig;
            }
            s
        }
        KernelKind::Fourier { magnitudes } => {
            let fc = (magnitudes.len() - 1) / 2;
            // symmetrized real filter with the same power spectrum
            let mut s = if d == 0 { magnitudes[fc] } else { 0.0 };
            for k in 1..=fc {
                // amplitude 2√w_k puts power w_k at each of ±k
                let w = 0.5 * (magnitudes[fc + k].powi(2) + magnitudes[fc - k].powi(2));
                let c = 2.0 * w.sqrt();
                let omega = 2.0 * std::f64::consts::PI * k as f64;
                let theta = omega * u;
                let trig = match d % 4 {
                    0 => theta.cos(),
                    1 => -theta.sin(),
                    2 => -theta.cos(),
                    _ => theta.sin(),
                };
                s += c * omega.powi(d as i32) * trig;
            }
            s
        }
    }
}
