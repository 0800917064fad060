//! Spectral data of `A = −d²/dx² + q` on `[0, L]` with Dirichlet conditions,
//! observed through the Neumann trace `Bφ = φ′` at selected endpoints.
//!
//! Eigenpairs are closed form:
//!
//! ```text
//!     φ_n(x) = √(2/L) sin(nπx/L),    μ_n = (nπ/L)² + q,    n ≥ 1.
//! ```
//!
//! Every eigenvalue is simple, so the index bookkeeping over repeated
//! eigenvalues needed in higher dimensions does not arise here.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{Error, Result};

/// Boundary point of `[0, L]` at which the Neumann trace is observed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSpec {
    pub length: f64,
    pub potential_shift: f64,
    observed_endpoints: Vec<Endpoint>,
}

impl OperatorSpec {
    /// Duplicate endpoints are dropped; the observation space is ordered left, right.
    pub fn new(length: f64, potential_shift: f64, observed: &[Endpoint]) -> Result<Self> {
        if length <= 0.0 || !length.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "domain length must be positive, got {length}"
            )));
        }
        if !potential_shift.is_finite() {
            return Err(Error::InvalidParameter(
                "potential shift must be finite".into(),
            ));
        }
        if observed.is_empty() {
            return Err(Error::EmptyObservation);
        }
        let mut observed_endpoints = observed.to_vec();
        observed_endpoints.sort();
        observed_endpoints.dedup();
        Ok(Self {
            length,
            potential_shift,
            observed_endpoints,
        })
    }

    pub fn observed_endpoints(&self) -> &[Endpoint] {
        &self.observed_endpoints
    }

    /// Dimension `m` of the observation space `G = ℝ^m`.
    pub fn observation_dim(&self) -> usize {
        self.observed_endpoints.len()
    }

    /// `μ_n` for `n ≥ 1`.
    pub fn eigenvalue(&self, n: usize) -> f64 {
        let k = n as f64 * PI / self.length;
        k * k + self.potential_shift
    }

    /// `φ_n(x)`.
    pub fn eigenfunction(&self, n: usize, x: f64) -> f64 {
        (2.0 / self.length).sqrt() * (n as f64 * PI * x / self.length).sin()
    }

    /// `Bφ_n`: the derivative `φ_n′` at each observed endpoint.
    pub fn trace(&self, n: usize) -> Vec<f64> {
        let slope = (2.0 / self.length).sqrt() * n as f64 * PI / self.length;
        self.observed_endpoints
            .iter()
            .map(|e| match e {
                Endpoint::Left => slope,
                Endpoint::Right if n.is_multiple_of(2) => slope,
                Endpoint::Right => -slope,
            })
            .collect()
    }

    /// Semiboundedness constant `c = max(0, −μ_1)`.
    pub fn semibound(&self) -> f64 {
        (-self.eigenvalue(1)).max(0.0)
    }

    /// Minimal horizon for which the classical 1D observability inequality holds:
    /// `2L` from a single endpoint, `L` from both.
    pub fn observability_threshold(&self) -> f64 {
        if self.observed_endpoints.len() == 2 {
            self.length
        } else {
            2.0 * self.length
        }
    }

    fn zero_threshold(&self) -> f64 {
        1e-12 * self.potential_shift.abs().max(1.0)
    }
}

/// `J0` collects the modes with `λ_n = 0`, `J1` the rest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    J0,
    J1,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    /// Nonzero signed index `n`.
    pub index: i64,
    /// `μ_{|n|}`.
    pub mu: f64,
    /// `λ_n = sgn(n)·√μ_{|n|}` with the principal square root.
    pub lambda: Complex64,
    /// `ψ_n ∈ G`.
    pub psi: Vec<Complex64>,
    pub branch: Branch,
}

impl Mode {
    pub fn sign(&self) -> f64 {
        self.index.signum() as f64
    }

    pub fn is_stationary(&self) -> bool {
        self.branch == Branch::J0
    }

    /// `|λ_n|²`, which equals `|μ_{|n|}|`.
    pub fn lambda_sq_norm(&self) -> f64 {
        self.lambda.norm_sqr()
    }
}

#[derive(Clone, Debug)]
pub struct SpectralModel {
    pub spec: OperatorSpec,
    truncation: usize,
    modes: Vec<Mode>,
}

/// Builds the `2N` modes `n = −N, …, −1, 1, …, N`.
pub fn build_spectral_model(spec: OperatorSpec, truncation: usize) -> Result<SpectralModel> {
    if truncation == 0 {
        return Err(Error::InvalidParameter(
            "truncation must be at least 1".into(),
        ));
    }
    let zero = spec.zero_threshold();
    let mut modes = Vec::with_capacity(2 * truncation);
    for index in (-(truncation as i64)..=truncation as i64).filter(|&n| n != 0) {
        let k = index.unsigned_abs() as usize;
        let sign = index.signum() as f64;
        let mu = spec.eigenvalue(k);
        let trace = spec.trace(k);
        let (lambda, psi, branch) = if mu.abs() < zero {
            let psi = trace
                .iter()
                .map(|&b| Complex64::new(sign * b, 0.0))
                .collect();
            (Complex64::new(0.0, 0.0), psi, Branch::J0)
        } else {
            let root = if mu > 0.0 {
                Complex64::new(mu.sqrt(), 0.0)
            } else {
                Complex64::new(0.0, (-mu).sqrt())
            };
            let lambda = root * sign;
            let psi = trace
                .iter()
                .map(|&b| Complex64::new(b, 0.0) / lambda)
                .collect();
            (lambda, psi, Branch::J1)
        };
        modes.push(Mode {
            index,
            mu,
            lambda,
            psi,
            branch,
        });
    }
    Ok(SpectralModel {
        spec,
        truncation,
        modes,
    })
}

impl SpectralModel {
    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn observation_dim(&self) -> usize {
        self.spec.observation_dim()
    }

    /// All `2N` modes ordered by signed index.
    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Modes `n = 1, …, N`.
    pub fn positive_modes(&self) -> &[Mode] {
        &self.modes[self.truncation..]
    }

    pub fn mode(&self, index: i64) -> Option<&Mode> {
        let n = self.truncation as i64;
        if index == 0 || index.abs() > n {
            return None;
        }
        let pos = if index < 0 { index + n } else { index + n - 1 };
        self.modes.get(pos as usize)
    }

    pub fn has_stationary_modes(&self) -> bool {
        self.modes.iter().any(Mode::is_stationary)
    }
}

/// `(‖w₀‖₁, ‖w₁‖)` for `w₀ = Σ ξ_n φ_n`, `w₁ = Σ η_n φ_n`, where
/// `‖x‖₁² = ‖x‖² + ‖|A|^{1/2} x‖²`.
pub fn hilbert_norms(xi: &[f64], eta: &[f64], model: &SpectralModel) -> Result<(f64, f64)> {
    let n = model.truncation();
    for len in [xi.len(), eta.len()] {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: len,
            });
        }
    }
    let h1 = model
        .positive_modes()
        .iter()
        .zip(xi)
        .map(|(m, x)| (1.0 + m.mu.abs()) * x * x)
        .sum::<f64>()
        .sqrt();
    let l2 = eta.iter().map(|e| e * e).sum::<f64>().sqrt();
    Ok((h1, l2))
}
