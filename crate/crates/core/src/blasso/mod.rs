//! Forward operator, noise models, a desk-scale solver for
//! total-variation-regularized recovery of positive spike trains, and the
//! support-recovery experiment harness.

pub mod experiment;
pub mod solver;

pub use experiment::{recovery_experiment, ExperimentConfig, ExperimentRow, ExperimentTable};
pub use solver::{refine_first_order, solve_blasso, RecoveryResult, SolverConfig};

use crate::certificates::CertificateError;
use crate::kernels::{AtomCombo, Domain, DualVector, Kernel, KernelError};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BlassoError {
    #[error("amplitudes ({amplitudes}) and positions ({positions}) differ in length")]
    LengthMismatch { amplitudes: usize, positions: usize },
    #[error("positions {i} and {j} coincide")]
    CoincidentPositions { i: usize, j: usize },
    #[error("position {i} is not finite")]
    NonFinitePosition { i: usize },
    #[error("ground-truth amplitude {i} is not strictly positive: {value}")]
    NonPositiveAmplitude { i: usize, value: f64 },
    #[error("gaussian_iid noise needs explicit coordinates, unsupported for {kernel} kernel; use a fixed direction")]
    NoiseUnsupported { kernel: String },
    #[error("noise direction has zero norm")]
    ZeroNoiseDirection,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error("singular first-order Jacobian after {iterations} Newton steps")]
    SingularJacobian { iterations: usize },
    #[error("spike positions collided twice during refinement")]
    CollidingSpikes,
    #[error("Newton refinement diverged after {iterations} steps (residual {residual:.3e})")]
    RefinementDiverged { iterations: usize, residual: f64 },
    #[error("kernel fails the non-degeneracy gate: {detail}")]
    DegenerateKernel { detail: String },
    #[error("experiment config invalid: {0}")]
    BadConfig(String),
}

/// A finite positive combination of Dirac masses `Σ a_i δ_{x_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    amplitudes: Vec<f64>,
    positions: Vec<f64>,
}

impl SpikeTrain {
    pub fn new(amplitudes: Vec<f64>, positions: Vec<f64>) -> Result<Self, BlassoError> {
        if amplitudes.len() != positions.len() {
            return Err(BlassoError::LengthMismatch {
                amplitudes: amplitudes.len(),
                positions: positions.len(),
            });
        }
        if let Some(i) = positions.iter().position(|p| !p.is_finite()) {
            return Err(BlassoError::NonFinitePosition { i });
        }
        let scale = 1.0 + positions.iter().fold(0.0f64, |m, p| m.max(p.abs()));
        for i in 0..positions.len() {
            for j in (i + 1)..positions.len() {
                if (positions[i] - positions[j]).abs() < 1e-12 * scale {
                    return Err(BlassoError::CoincidentPositions { i, j });
                }
            }
        }
        Ok(Self { amplitudes, positions })
    }

    /// The zero measure.
    pub fn empty() -> Self {
        Self { amplitudes: Vec::new(), positions: Vec::new() }
    }

    /// Ground-truth inputs additionally require strictly positive amplitudes.
    pub fn validate_ground_truth(&self) -> Result<(), BlassoError> {
        for (i, &a) in self.amplitudes.iter().enumerate() {
            if !(a > 0.0) {
                return Err(BlassoError::NonPositiveAmplitude { i, value: a });
            }
        }
        Ok(())
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn as_atoms(&self) -> AtomCombo {
        let mut combo = AtomCombo::empty();
        for (&a, &x) in self.amplitudes.iter().zip(&self.positions) {
            combo.push(x, 0, a);
        }
        combo
    }
}

/// A measurement `y ∈ H`, possibly noisy. Dirichlet observations live in
/// explicit coordinates; other kernels keep the atom representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Observation {
    pub data: DualVector,
    /// Norm of the injected noise component (exact: noise is rescaled to
    /// hit the requested norm).
    pub noise_norm: f64,
}

impl Observation {
    /// `⟨φ^{(d)}(x), y⟩`.
    pub fn correlate(&self, kernel: &Kernel, d: usize, x: f64) -> Result<f64, KernelError> {
        self.data.correlate(kernel, d, x)
    }

    pub fn norm_sq(&self, kernel: &Kernel) -> Result<f64, KernelError> {
        self.data.norm_sq(kernel)
    }
}

/// `Φ m = Σ a_i φ(x_i)`.
pub fn forward(kernel: &Kernel, m: &SpikeTrain) -> Result<Observation, BlassoError> {
    let data = match kernel.domain() {
        Domain::Torus if kernel.coords_dim().is_some() => {
            let dim = kernel.coords_dim().unwrap();
            let mut v = DVector::zeros(dim);
            for (&a, &x) in m.amplitudes.iter().zip(&m.positions) {
                v += kernel.phi_coords(0, x)? * a;
            }
            DualVector::Coords(v.iter().copied().collect())
        }
        _ => DualVector::Atoms(m.as_atoms()),
    };
    Ok(Observation { data, noise_norm: 0.0 })
}

/// Noise models: isotropic coordinate noise (finite-dimensional kernels
/// only), or a fixed direction spanned by kernel atoms.
#[derive(Debug, Clone)]
pub enum NoiseModel {
    GaussianIid { norm: f64 },
    FixedDirection { direction: AtomCombo, norm: f64 },
}

/// Add noise of exactly the requested norm. Deterministic in `seed`.
pub fn add_noise(
    kernel: &Kernel,
    obs: &Observation,
    model: &NoiseModel,
    seed: u64,
) -> Result<Observation, BlassoError> {
    let norm = match model {
        NoiseModel::GaussianIid { norm } | NoiseModel::FixedDirection { norm, .. } => *norm,
    };
    assert!(norm >= 0.0, "noise norm must be nonnegative");
    if norm == 0.0 {
        return Ok(obs.clone());
    }
    match model {
        NoiseModel::GaussianIid { .. } => {
            let DualVector::Coords(coords) = &obs.data else {
                return Err(BlassoError::NoiseUnsupported { kernel: kernel.name().into() });
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut w: Vec<f64> = (0..coords.len()).map(|_| standard_normal(&mut rng)).collect();
            let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = norm / wn;
            for (c, wi) in w.iter_mut().enumerate() {
                *wi = coords[c] + *wi * scale;
            }
            Ok(Observation { data: DualVector::Coords(w), noise_norm: obs.noise_norm + norm })
        }
        NoiseModel::FixedDirection { direction, .. } => {
            let dir_norm = direction.norm_sq(kernel)?.max(0.0).sqrt();
            if dir_norm == 0.0 {
                return Err(BlassoError::ZeroNoiseDirection);
            }
            let w = direction.scaled(norm / dir_norm);
            let data = match &obs.data {
                DualVector::Coords(coords) => {
                    let wc = w.coords(kernel)?;
                    let v: Vec<f64> = coords.iter().zip(wc.iter()).map(|(a, b)| a + b).collect();
                    DualVector::Coords(v)
                }
                DualVector::Atoms(atoms) => DualVector::Atoms(atoms.plus(&w)),
            };
            Ok(Observation { data, noise_norm: obs.noise_norm + norm })
        }
    }
}

/// Box–Muller standard normal draw.
fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Errors of a recovered train against a declared truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportMatch {
    pub position_error_inf: f64,
    pub amplitude_error_inf: f64,
    pub matched: bool,
}

/// Match recovered spikes to the truth and report sup-norm errors. With
/// equal counts the optimal bijection for 1-D transport costs is the
/// order-preserving one, so both sides are sorted by position and paired;
/// different counts report `matched = false` with infinite errors.
/// Positions compare on the real line (torus positions are canonical in
/// `[-0.5, 0.5)`, so clusters away from the seam match correctly).
pub fn match_support(recovered: &SpikeTrain, truth: &SpikeTrain) -> SupportMatch {
    if recovered.len() != truth.len() {
        return SupportMatch {
            position_error_inf: f64::INFINITY,
            amplitude_error_inf: f64::INFINITY,
            matched: false,
        };
    }
    let order = |train: &SpikeTrain| {
        let mut idx: Vec<usize> = (0..train.len()).collect();
        idx.sort_by(|&i, &j| train.positions[i].total_cmp(&train.positions[j]));
        idx
    };
    let ri = order(recovered);
    let ti = order(truth);
    let mut pos_err = 0.0f64;
    let mut amp_err = 0.0f64;
    for (&r, &t) in ri.iter().zip(&ti) {
        pos_err = pos_err.max((recovered.positions[r] - truth.positions[t]).abs());
        amp_err = amp_err.max((recovered.amplitudes[r] - truth.amplitudes[t]).abs());
    }
    SupportMatch { position_error_inf: pos_err, amplitude_error_inf: amp_err, matched: true }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirichlet10() -> Kernel {
        Kernel::dirichlet(10).unwrap()
    }

    #[test]
    fn forward_zero_measure_is_zero() {
        let k = dirichlet10();
        let y = forward(&k, &SpikeTrain::empty()).unwrap();
        assert!(y.norm_sq(&k).unwrap() < 1e-15);
    }

    #[test]
    fn forward_is_linear() {
        let k = dirichlet10();
        let m1 = SpikeTrain::new(vec![1.0, 2.0], vec![-0.1, 0.2]).unwrap();
        let m2 = SpikeTrain::new(vec![1.0, 2.0 + 3.0], vec![-0.1, 0.2]).unwrap();
        let e2 = SpikeTrain::new(vec![3.0], vec![0.2]).unwrap();
        let (y1, y2, ye) =
            (forward(&k, &m1).unwrap(), forward(&k, &m2).unwrap(), forward(&k, &e2).unwrap());
        for &x in &[0.0, 0.13, -0.4] {
            let lhs = y2.correlate(&k, 0, x).unwrap();
            let rhs = y1.correlate(&k, 0, x).unwrap() + ye.correlate(&k, 0, x).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn dirac_observation_norm_counts_frequencies() {
        let k = dirichlet10();
        let y = forward(&k, &SpikeTrain::new(vec![1.0], vec![0.3]).unwrap()).unwrap();
        let n2 = y.norm_sq(&k).unwrap();
        assert!((n2 - 21.0).abs() < 1e-10, "{n2}");
        // and the two representations of <y, phi(x)> agree
        let atoms = SpikeTrain::new(vec![1.0], vec![0.3]).unwrap().as_atoms();
        for &x in &[0.0, 0.21] {
            let via_coords = y.correlate(&k, 0, x).unwrap();
            let via_atoms = atoms.correlate(&k, 0, x).unwrap();
            assert!((via_coords - via_atoms).abs() < 1e-10 * via_atoms.abs().max(1.0));
        }
    }

    #[test]
    fn noise_norm_is_exact_and_seeded() {
        let k = dirichlet10();
        let y = forward(&k, &SpikeTrain::new(vec![1.0], vec![0.0]).unwrap()).unwrap();
        let model = NoiseModel::GaussianIid { norm: 0.01 };
        let y1 = add_noise(&k, &y, &model, 7).unwrap();
        let y2 = add_noise(&k, &y, &model, 7).unwrap();
        let y3 = add_noise(&k, &y, &model, 8).unwrap();
        assert_eq!(y1.data, y2.data, "same seed must give identical noise");
        assert_ne!(y1.data, y3.data, "different seed must differ");
        assert!((y1.noise_norm - 0.01).abs() < 1e-12);
        // measured norm of the injected noise matches the request
        let (DualVector::Coords(a), DualVector::Coords(b)) = (&y.data, &y1.data) else {
            panic!()
        };
        let wn: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        assert!((wn - 0.01).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_is_identity() {
        let k = dirichlet10();
        let y = forward(&k, &SpikeTrain::new(vec![1.0], vec![0.1]).unwrap()).unwrap();
        let y0 = add_noise(&k, &y, &NoiseModel::GaussianIid { norm: 0.0 }, 3).unwrap();
        assert_eq!(y.data, y0.data);
    }

    #[test]
    fn gaussian_kernel_requires_fixed_direction() {
        let k = Kernel::gaussian(1.0).unwrap();
        let y = forward(&k, &SpikeTrain::new(vec![1.0], vec![0.0]).unwrap()).unwrap();
        assert!(matches!(
            add_noise(&k, &y, &NoiseModel::GaussianIid { norm: 0.1 }, 1),
            Err(BlassoError::NoiseUnsupported { .. })
        ));
        let mut dir = AtomCombo::empty();
        dir.push(0.4, 0, 1.0);
        dir.push(-0.2, 1, 0.5);
        let noisy = add_noise(
            &k,
            &y,
            &NoiseModel::FixedDirection { direction: dir.clone(), norm: 0.05 },
            1,
        )
        .unwrap();
        assert!((noisy.noise_norm - 0.05).abs() < 1e-12);
        // the injected component is dir rescaled to norm exactly 0.05
        let injected = dir.scaled(0.05 / dir.norm_sq(&k).unwrap().sqrt());
        let wn = injected.norm_sq(&k).unwrap().sqrt();
        assert!((wn - 0.05).abs() < 1e-12);
        let DualVector::Atoms(na) = &noisy.data else { panic!() };
        assert_eq!(na.atoms().len(), 3);
    }

    #[test]
    fn match_support_basics() {
        let a = SpikeTrain::new(vec![1.0, 2.0], vec![0.1, -0.2]).unwrap();
        let same = match_support(&a, &a);
        assert_eq!(same.position_error_inf, 0.0);
        assert_eq!(same.amplitude_error_inf, 0.0);
        assert!(same.matched);

        // permuted spike order matches identically
        let b = SpikeTrain::new(vec![2.0, 1.0], vec![-0.2, 0.1]).unwrap();
        let perm = match_support(&b, &a);
        assert_eq!(perm.position_error_inf, 0.0);
        assert_eq!(perm.amplitude_error_inf, 0.0);

        let c = SpikeTrain::new(vec![1.0, 1.0, 1.0], vec![0.0, 0.1, 0.2]).unwrap();
        let off = match_support(&c, &a);
        assert!(!off.matched);
        assert!(off.position_error_inf.is_infinite());
    }

    #[test]
    fn spike_train_validation() {
        assert!(matches!(
            SpikeTrain::new(vec![1.0], vec![0.0, 1.0]),
            Err(BlassoError::LengthMismatch { .. })
        ));
        assert!(matches!(
            SpikeTrain::new(vec![1.0, 1.0], vec![0.3, 0.3]),
            Err(BlassoError::CoincidentPositions { .. })
        ));
        let gt = SpikeTrain::new(vec![1.0, -0.5], vec![0.0, 0.4]).unwrap();
        assert!(matches!(
            gt.validate_ground_truth(),
            Err(BlassoError::NonPositiveAmplitude { i: 1, .. })
        ));
    }
}
