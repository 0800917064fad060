//! Spectral observability analysis and source reconstruction for viscoelastic
//! systems with memory, whose modal amplitudes obey
//!
//! ```text
//!     z_n''(t) + λ_n² z_n(t) = −λ_n² ∫₀ᵗ M(t−s) z_n(s) ds,
//! ```
//!
//! realized on the one-dimensional Dirichlet operator `A = −d²/dx² + q` on
//! `[0, L]` with Neumann-trace observation at one or both endpoints.
//!
//! The pipeline is:
//!
//! 1. [`spectral_model`]: eigenpairs, branch values `λ_n` and observed traces `ψ_n`.
//! 2. [`modal_ode`]: the modal Volterra integro-differential equations for `z_n`, `w_n`.
//! 3. [`riesz_frame`]: Gram matrices, Riesz bounds and biorthogonal duals of modal families.
//! 4. [`forward_solver`]: boundary traces of the homogeneous and the source problem.
//! 5. [`inverse_source`]: reconstruction of the spatial source from `Bu′`.
//!
//! [`volterra_calculus`] supplies the time grid, the discrete Volterra operator
//! `V_ρ`, its exact discrete adjoint and the resolvent kernel.

pub mod error;
pub mod forward_solver;
pub mod inverse_source;
pub mod modal_ode;
pub mod riesz_frame;
pub mod spectral_model;
pub mod volterra_calculus;

pub use error::{Error, Result};
pub use num_complex::Complex64;
