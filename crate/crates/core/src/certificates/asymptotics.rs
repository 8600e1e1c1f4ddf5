//! Quantitative convergence of the vanishing precertificate toward its
//! cluster limit, and the curvature expansion at the spikes.

use super::nondegen::GridSpec;
use super::{etaw_curvature, limit_precert, vanishing_precert, CertificateError};
use crate::interp::Nodes;
use crate::kernels::Kernel;
use serde::{Deserialize, Serialize};

/// Sup-norm gaps `sup_x |η_V,t^{(l)} - η_W^{(l)}|` per scale and derivative
/// order. Gaps shrink linearly in `t`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub t_values: Vec<f64>,
    pub max_order: usize,
    /// `gaps[i][l]` is the gap at `t_values[i]`, derivative order `l`.
    pub gaps: Vec<Vec<f64>>,
}

impl ConvergenceReport {
    /// Fitted log-log slope of the order-`l` gap against `t`.
    pub fn slope_for_order(&self, l: usize) -> f64 {
        let pairs: Vec<(f64, f64)> =
            self.t_values.iter().zip(&self.gaps).map(|(&t, g)| (t, g[l])).collect();
        crate::interp::loglog_slope(&pairs)
    }
}

/// Measure the uniform gaps between `η_V,t` and `η_W` for each `t` and each
/// derivative order up to `max_order`, on the default verification grid.
pub fn convergence_report(
    kernel: &Kernel,
    z: &Nodes,
    t_values: &[f64],
    max_order: usize,
) -> Result<ConvergenceReport, CertificateError> {
    let n = z.len();
    let limit = limit_precert(kernel, n)?;
    let grid = GridSpec::default_for(kernel, &z.values().iter().map(|&zi| zi.abs()).collect::<Vec<_>>());
    let mut gaps = Vec::with_capacity(t_values.len());
    for &t in t_values {
        assert!(t >= 0.0, "scales must be nonnegative");
        // t = 0 identifies the vanishing certificate with the limit
        if t == 0.0 {
            gaps.push(vec![0.0; max_order + 1]);
            continue;
        }
        let vanish = vanishing_precert(kernel, t, z)?;
        let mut row = vec![0.0f64; max_order + 1];
        for i in 0..grid.points() {
            let x = grid.start + i as f64 * grid.step;
            for (l, slot) in row.iter_mut().enumerate() {
                let gap = (vanish.eval_deriv(l, x)? - limit.eval_deriv(l, x)?).abs();
                if gap > *slot {
                    *slot = gap;
                }
            }
        }
        gaps.push(row);
    }
    Ok(ConvergenceReport { t_values: t_values.to_vec(), max_order, gaps })
}

/// Curvature of `η_V,t` at the spikes against the predicted expansion
/// `t^{2N-2} · η_W^{(2N)}(0) · ρ_i` with `ρ_i = (2/(2N)!) Π_{j≠i}(z_i-z_j)²`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecondDerivComparison {
    pub measured: Vec<f64>,
    pub predicted: Vec<f64>,
}

impl SecondDerivComparison {
    /// Largest relative deviation `|measured/predicted - 1|`.
    pub fn max_relative_gap(&self) -> f64 {
        self.measured
            .iter()
            .zip(&self.predicted)
            .map(|(&m, &p)| (m / p - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub fn second_deriv_asymptotics(
    kernel: &Kernel,
    z: &Nodes,
    t: f64,
) -> Result<SecondDerivComparison, CertificateError> {
    let n = z.len();
    let cert = vanishing_precert(kernel, t, z)?;
    let curvature = etaw_curvature(kernel, n)?;
    let mut fact = 1.0;
    for i in 1..=2 * n {
        fact *= i as f64;
    }
    let mut measured = Vec::with_capacity(n);
    let mut predicted = Vec::with_capacity(n);
    for (i, &zi) in z.values().iter().enumerate() {
        measured.push(cert.eval_deriv(2, t * zi)?);
        let prod: f64 = z
            .values()
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &zj)| (zi - zj) * (zi - zj))
            .product();
        predicted.push(t.powi(2 * n as i32 - 2) * curvature * (2.0 / fact) * prod);
    }
    Ok(SecondDerivComparison { measured, predicted })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaps_decrease_and_scale_linearly() {
        // generic (non-mirror-symmetric) nodes exhibit the O(t) rate of the
        // expansion, in the value and in the first derivative
        let k = Kernel::dirichlet(10).unwrap();
        let z = Nodes::new(vec![-1.0, 0.5]).unwrap();
        let ts = [2e-2, 1e-2, 5e-3, 2e-3, 1e-3];
        let rep = convergence_report(&k, &z, &ts, 1).unwrap();
        for l in 0..=1 {
            for w in rep.gaps.windows(2) {
                assert!(w[1][l] < w[0][l], "order {l}: {:?}", rep.gaps);
            }
        }
        for l in 0..=1 {
            let slope = rep.slope_for_order(l);
            assert!((slope - 1.0).abs() < 0.2, "order {l} slope {slope}");
        }
    }

    #[test]
    fn single_offset_spike_gap_is_linear() {
        let k = Kernel::dirichlet(10).unwrap();
        let z = Nodes::new(vec![1.0]).unwrap();
        let ts = [3e-2, 2e-2, 1e-2, 5e-3, 3e-3];
        let rep = convergence_report(&k, &z, &ts, 0).unwrap();
        let slope = rep.slope_for_order(0);
        assert!((slope - 1.0).abs() < 0.2, "slope {slope}: gaps {:?}", rep.gaps);
    }

    #[test]
    fn mirror_symmetric_nodes_converge_quadratically() {
        // for an even kernel and z = -z the linear term cancels by parity,
        // so the gap shrinks strictly faster than the O(t) guarantee
        let k = Kernel::dirichlet(10).unwrap();
        let z = Nodes::new(vec![-1.0, 1.0]).unwrap();
        let ts = [3e-2, 1e-2, 3e-3, 1e-3];
        let rep = convergence_report(&k, &z, &ts, 0).unwrap();
        let slope = rep.slope_for_order(0);
        assert!((slope - 2.0).abs() < 0.2, "slope {slope}: gaps {:?}", rep.gaps);
    }

    #[test]
    fn single_origin_spike_has_zero_gap() {
        // z = {0}: η_V,t and η_W coincide for every t
        let k = Kernel::gaussian(1.0).unwrap();
        let z = Nodes::new(vec![0.0]).unwrap();
        let rep = convergence_report(&k, &z, &[0.5, 0.1], 0).unwrap();
        for row in &rep.gaps {
            assert!(row[0] < 1e-9, "{row:?}");
        }
    }

    #[test]
    fn zero_scale_is_the_limit_itself() {
        let k = Kernel::dirichlet(6).unwrap();
        let z = Nodes::new(vec![-1.0, 1.0]).unwrap();
        let rep = convergence_report(&k, &z, &[0.1, 0.0], 1).unwrap();
        assert_eq!(rep.gaps[1], vec![0.0, 0.0]);
        assert!(rep.gaps[0][0] > 0.0);
    }

    #[test]
    fn second_deriv_expansion_single_spike() {
        // N=1, z={0}: ρ₁ = 1, predicted = η_W''(0), measured equals it exactly
        let k = Kernel::gaussian(1.0).unwrap();
        let z = Nodes::new(vec![0.0]).unwrap();
        let cmp = second_deriv_asymptotics(&k, &z, 0.3).unwrap();
        assert!((cmp.predicted[0] + 0.5).abs() < 1e-9);
        assert!(cmp.max_relative_gap() < 1e-8, "{cmp:?}");
    }

    #[test]
    fn second_deriv_expansion_two_spikes() {
        for k in [Kernel::gaussian(1.0).unwrap(), Kernel::dirichlet(10).unwrap()] {
            let z = Nodes::new(vec![-1.0, 1.0]).unwrap();
            let cmp = second_deriv_asymptotics(&k, &z, 1e-2).unwrap();
            let gap = cmp.max_relative_gap();
            assert!(gap < 0.05, "{} gap {gap}: {cmp:?}", k.name());
            // halving t shrinks the gap at least linearly; for this
            // symmetric configuration the first-order term cancels by
            // parity and the decay is in fact quadratic
            let gap_half = second_deriv_asymptotics(&k, &z, 5e-3).unwrap().max_relative_gap();
            let ratio = gap_half / gap;
            assert!(ratio <= 0.5 * 1.3, "{} ratio {ratio}", k.name());
        }
    }

    #[test]
    fn second_deriv_gap_halves_for_offset_spikes() {
        // a cluster not centered at the origin keeps the O(t) term alive,
        // so halving t roughly halves the relative gap
        let k = Kernel::gaussian(1.0).unwrap();
        let z = Nodes::new(vec![0.0, 1.0]).unwrap();
        let gap = second_deriv_asymptotics(&k, &z, 1e-2).unwrap().max_relative_gap();
        let gap_half = second_deriv_asymptotics(&k, &z, 5e-3).unwrap().max_relative_gap();
        let ratio = gap_half / gap;
        assert!((ratio - 0.5).abs() < 0.3 * 0.5, "ratio {ratio}");
    }
}
