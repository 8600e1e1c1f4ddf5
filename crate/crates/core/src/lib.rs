//! Certificate machinery and a desk-scale solver for sparse spike recovery
//! with positive amplitudes.
//!
//! A spike train `m = Σ aᵢ δ_{xᵢ}` is observed through a smooth measurement
//! kernel (ideal low-pass on the torus, Gaussian on the line, or a custom
//! trigonometric profile) and recovered by total-variation-regularized least
//! squares over measures. The crate provides:
//!
//! * [`interp`] — Vandermonde/Hermite matrices, Lagrange and Hermite
//!   interpolation coefficients, and their scaling asymptotics as the node
//!   cluster shrinks.
//! * [`structmat`] — checkerboard matrix predicates and Pfaffians, the sign
//!   machinery behind the curvature results for convolution kernels.
//! * [`kernels`] — measurement kernels with exact correlation calculus,
//!   Gram matrices and injectivity checks.
//! * [`certificates`] — the vanishing-derivatives precertificate, its
//!   cluster limit, the λ-certificate of a candidate solution, and
//!   non-degeneracy verdicts.
//! * [`blasso`] — forward operator, noise models, a two-stage solver
//!   (grid proximal gradient + Newton refinement on the optimality system),
//!   and a reproducible support-recovery experiment harness.

pub mod blasso;
pub mod certificates;
pub mod interp;
pub mod kernels;
pub mod seed;
pub mod structmat;
