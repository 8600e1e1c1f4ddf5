//! Measurement-space elements written as finite combinations
//! `Σ c_j φ^{(d_j)}(x_j)` of kernel translates and their derivatives.
//!
//! Dual elements (certificates) and Gaussian-kernel observations live here;
//! every inner product reduces to [`Kernel::correlation_deriv`] calls, so no
//! function-space vector is ever formed.

use super::{Kernel, KernelError};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// One term `coefficient · φ^{(deriv_order)}(position)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: f64,
    pub deriv_order: usize,
    pub coefficient: f64,
}

/// A finite combination of kernel atoms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AtomCombo {
    atoms: Vec<Atom>,
}

impl AtomCombo {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Self { atoms }
    }

    pub fn empty() -> Self {
        Self { atoms: Vec::new() }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn push(&mut self, position: f64, deriv_order: usize, coefficient: f64) {
        self.atoms.push(Atom { position, deriv_order, coefficient });
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom { coefficient: a.coefficient * s, ..*a })
                .collect(),
        }
    }

    /// Concatenation `self + other` (no term merging; evaluation is linear).
    pub fn plus(&self, other: &Self) -> Self {
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        Self { atoms }
    }

    /// `⟨φ^{(d)}(x), p⟩ = Σ_j c_j ⟨φ^{(d)}(x), φ^{(d_j)}(x_j)⟩`.
    pub fn correlate(&self, kernel: &Kernel, d: usize, x: f64) -> Result<f64, KernelError> {
        let mut sum = 0.0;
        for a in &self.atoms {
            sum += a.coefficient * kernel.correlation_deriv(d, a.deriv_order, x, a.position)?;
        }
        Ok(sum)
    }

    pub fn dot(&self, kernel: &Kernel, other: &Self) -> Result<f64, KernelError> {
        let mut sum = 0.0;
        for a in &self.atoms {
            for b in &other.atoms {
                sum += a.coefficient
                    * b.coefficient
                    * kernel.correlation_deriv(a.deriv_order, b.deriv_order, a.position, b.position)?;
            }
        }
        Ok(sum)
    }

    /// Squared measurement-space norm; PSD up to roundoff.
    pub fn norm_sq(&self, kernel: &Kernel) -> Result<f64, KernelError> {
        self.dot(kernel, self)
    }

    /// Explicit coordinates when the kernel supports them.
    pub fn coords(&self, kernel: &Kernel) -> Result<DVector<f64>, KernelError> {
        let dim = kernel
            .coords_dim()
            .ok_or_else(|| KernelError::NoCoordinates { kernel: kernel.name().into() })?;
        let mut v = DVector::zeros(dim);
        for a in &self.atoms {
            v += kernel.phi_coords(a.deriv_order, a.position)? * a.coefficient;
        }
        Ok(v)
    }
}

/// A measurement-space element in whichever representation is exact for the
/// kernel: a finite atom combination, or explicit coordinates (Dirichlet).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DualVector {
    Atoms(AtomCombo),
    Coords(Vec<f64>),
}

impl DualVector {
    /// `⟨φ^{(d)}(x), p⟩` in either representation.
    pub fn correlate(&self, kernel: &Kernel, d: usize, x: f64) -> Result<f64, KernelError> {
        match self {
            DualVector::Atoms(c) => c.correlate(kernel, d, x),
            DualVector::Coords(v) => {
                let phi = kernel.phi_coords(d, x)?;
                Ok(phi.iter().zip(v.iter()).map(|(a, b)| a * b).sum())
            }
        }
    }

    pub fn norm_sq(&self, kernel: &Kernel) -> Result<f64, KernelError> {
        match self {
            DualVector::Atoms(c) => c.norm_sq(kernel),
            DualVector::Coords(v) => Ok(v.iter().map(|x| x * x).sum()),
        }
    }
}
