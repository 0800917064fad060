//! Boundary traces by modal synthesis.
//!
//! The homogeneous system is represented through the `z_n` profiles,
//!
//! ```text
//!     Bw = ½ Σ_{n≠0} a_n z_n ψ_n,
//!     a_n = sgn(n)·λ_{|n|} ξ_{|n|} − i η_{|n|}   (J1),
//!     a_n = sgn(n)·ξ_{|n|} − i η_{|n|}           (J0),
//! ```
//!
//! and the source system through `u = V_σ w` with `w₀ = 0`, `w₁ = f`, so that
//! `Bu = Σ f_n (V_σ w_n) ψ_n` and `Bu′ = Σ f_n (σ(0) + V_σ′) w_n ψ_n`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::modal_ode::{solve_w_all, solve_z_all};
use crate::spectral_model::SpectralModel;
use crate::volterra_calculus::{convolve, KernelSpec, Modulation, TimeGrid, TraceSignal};
use crate::{Error, Result};

/// Coefficients of `w₀` and `w₁` on `{φ_n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
}

/// Coefficients `⟨f, φ_n⟩`, `n = 1, …, N`.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceCoefficients {
    pub values: Vec<f64>,
}

impl SourceCoefficients {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// The `k`-th unit vector (1-based) of length `n`.
    pub fn unit(n: usize, k: usize) -> Self {
        let mut values = vec![0.0; n];
        values[k - 1] = 1.0;
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn check_len(model: &SpectralModel, len: usize) -> Result<()> {
    if len != model.truncation() {
        return Err(Error::LengthMismatch {
            expected: model.truncation(),
            found: len,
        });
    }
    Ok(())
}

/// `Bw` for initial data `(w₀, w₁)`.
pub fn boundary_trace_homogeneous(
    data: &InitialData,
    model: &SpectralModel,
    kernel: &KernelSpec,
    grid: &TimeGrid,
) -> Result<TraceSignal> {
    check_len(model, data.xi.len())?;
    check_len(model, data.eta.len())?;
    let trajectories = solve_z_all(model, kernel, grid)?;
    let mut trace = TraceSignal::zeros(*grid, model.observation_dim());
    for t in &trajectories {
        let mode = &t.mode;
        let k = mode.index.unsigned_abs() as usize - 1;
        let (xi, eta) = (data.xi[k], data.eta[k]);
        // sgn(n)·λ_{|n|} = λ_n on J1
        let position = if mode.is_stationary() {
            Complex64::new(mode.sign() * xi, 0.0)
        } else {
            mode.lambda * xi
        };
        let a = position - Complex64::new(0.0, eta);
        if a.norm() == 0.0 {
            continue;
        }
        trace.add_scaled(0.5 * a, &TraceSignal::from_profile(&t.z, &mode.psi))?;
    }
    Ok(trace)
}

/// Per-mode traces `(V_σ w_n ψ_n, (σ(0) + V_σ′) w_n ψ_n)` for `n = 1, …, N`.
pub(crate) fn source_mode_traces(
    model: &SpectralModel,
    kernel: &KernelSpec,
    modulation: &Modulation,
    grid: &TimeGrid,
) -> Result<Vec<(TraceSignal, TraceSignal)>> {
    let trajectories = solve_w_all(model, kernel, grid)?;
    let s0 = modulation.origin();
    trajectories
        .par_iter()
        .map(|t| {
            let w = TraceSignal::from_profile(&t.z, &t.mode.psi);
            let bu = convolve(&modulation.value, &w)?;
            let mut bu_prime = convolve(&modulation.derivative, &w)?;
            bu_prime.add_scaled(s0, &w)?;
            Ok((bu, bu_prime))
        })
        .collect()
}

/// `(Bu, Bu′)` for the source `σ(t) f`.
pub fn boundary_trace_source(
    source: &SourceCoefficients,
    modulation: &Modulation,
    model: &SpectralModel,
    kernel: &KernelSpec,
    grid: &TimeGrid,
) -> Result<(TraceSignal, TraceSignal)> {
    check_len(model, source.len())?;
    if modulation.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let per_mode = source_mode_traces(model, kernel, modulation, grid)?;
    Ok(superpose(
        &per_mode,
        &source.values,
        grid,
        model.observation_dim(),
    ))
}

pub(crate) fn superpose(
    per_mode: &[(TraceSignal, TraceSignal)],
    coefficients: &[f64],
    grid: &TimeGrid,
    dim: usize,
) -> (TraceSignal, TraceSignal) {
    let mut bu = TraceSignal::zeros(*grid, dim);
    let mut bu_prime = TraceSignal::zeros(*grid, dim);
    for ((a, b), &f) in per_mode.iter().zip(coefficients) {
        if f == 0.0 {
            continue;
        }
        let f = Complex64::new(f, 0.0);
        // grids and dimensions agree by construction
        bu.add_scaled(f, a).expect("consistent mode traces");
        bu_prime.add_scaled(f, b).expect("consistent mode traces");
    }
    (bu, bu_prime)
}

/// Sup-norm distance between `Bu` from [`boundary_trace_source`] and `V_σ Bw`
/// with `(w₀, w₁) = (0, f)`; the two coincide when `u = V_σ w`.
pub fn verify_convolution_relation(
    source: &SourceCoefficients,
    modulation: &Modulation,
    model: &SpectralModel,
    kernel: &KernelSpec,
    grid: &TimeGrid,
) -> Result<f64> {
    let (bu, _) = boundary_trace_source(source, modulation, model, kernel, grid)?;
    let data = InitialData {
        xi: vec![0.0; model.truncation()],
        eta: source.values.clone(),
    };
    let bw = boundary_trace_homogeneous(&data, model, kernel, grid)?;
    let via_w = convolve(&modulation.value, &bw)?;
    bu.sup_distance(&via_w)
}
