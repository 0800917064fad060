//! Recovery of the spatial source `f` from the boundary measurement.
//!
//! With `p_k` the dual of `{w_n ψ_n}` and `K` the resolvent kernel of
//! `σ′/σ(0)`, the reconstruction kernels are
//!
//! ```text
//!     θ_k = σ(0)⁻¹ (I + V_K*) p_k,      so that   (σ(0) + V_σ′*) θ_k ≈ p_k,
//! ```
//!
//! and `⟨f, φ_k⟩ = ⟨Bu′, θ_k⟩_{L²(0,T;G)}`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::forward_solver::{source_mode_traces, superpose, SourceCoefficients};
use crate::riesz_frame::{
    dual_family, frame_bounds, gram, w_family, y_family, DualFamily, FrameBounds, ModalFamily,
};
use crate::spectral_model::SpectralModel;
use crate::volterra_calculus::{
    convolve_adjoint, differentiate, h1_norm, l2_inner, resolvent_kernel, KernelSpec, Modulation,
    ScalarSignal, Signal, TimeGrid, TraceSignal,
};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct ReconstructionKernels {
    pub thetas: Vec<TraceSignal>,
    pub labels: Vec<i64>,
    pub duals: DualFamily,
    pub resolvent: ScalarSignal,
    pub sigma0: Complex64,
    /// `max_k ‖(σ(0) + V_σ′*) θ_k − p_k‖_{L²}`.
    pub residual: f64,
}

impl ReconstructionKernels {
    pub fn frame_bounds(&self) -> FrameBounds {
        self.duals.source_bounds
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }
}

/// `θ_k = conj(σ(0))⁻¹ (p_k + V_K* p_k)`; for real `σ` the conjugate is moot.
pub fn build_thetas(
    duals: &DualFamily,
    modulation: &Modulation,
    grid: &TimeGrid,
) -> Result<ReconstructionKernels> {
    if modulation.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let resolvent = resolvent_kernel(modulation)?;
    let sigma0 = modulation.origin();
    let inv = 1.0 / sigma0.conj();
    let pairs = duals
        .duals
        .par_iter()
        .map(|p| {
            let mut theta = convolve_adjoint(&resolvent, p)?;
            theta.add_scaled(Complex64::new(1.0, 0.0), p)?;
            let theta = theta.scale(inv);
            // (conj σ(0) + V_σ′*) θ − p
            let mut check = convolve_adjoint(&modulation.derivative, &theta)?;
            check.add_scaled(sigma0.conj(), &theta)?;
            check.add_scaled(Complex64::new(-1.0, 0.0), p)?;
            Ok((theta, check.l2_norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    let residual = pairs.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    Ok(ReconstructionKernels {
        thetas: pairs.into_iter().map(|(t, _)| t).collect(),
        labels: duals.labels.clone(),
        duals: duals.clone(),
        resolvent,
        sigma0,
        residual,
    })
}

/// Full kernel preparation: `{w_n ψ_n}`, its Gram matrix and dual, then `θ_k`.
pub fn prepare_kernels(
    model: &SpectralModel,
    kernel: &KernelSpec,
    modulation: &Modulation,
    grid: &TimeGrid,
) -> Result<ReconstructionKernels> {
    let family = w_family(model, kernel, grid)?;
    let duals = dual_family(&family, &gram(&family)?)?;
    build_thetas(&duals, modulation, grid)
}

/// Recovered coefficients with the largest discarded imaginary part.
#[derive(Clone, Debug)]
pub struct Recovered {
    pub source: SourceCoefficients,
    pub max_imag: f64,
}

/// `f_k = Re ⟨Bu′, θ_k⟩`, `k = 1, …, N`.
pub fn reconstruct(
    bu_prime: &TraceSignal,
    kernels: &ReconstructionKernels,
    model: &SpectralModel,
) -> Result<Recovered> {
    if kernels.len() != model.truncation() {
        return Err(Error::TruncationMismatch {
            kernels: kernels.len(),
            model: model.truncation(),
        });
    }
    let values = kernels
        .thetas
        .par_iter()
        .map(|theta| l2_inner(bu_prime, theta))
        .collect::<Result<Vec<_>>>()?;
    let max_imag = values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    Ok(Recovered {
        source: SourceCoefficients::new(values.iter().map(|v| v.re).collect()),
        max_imag,
    })
}

/// Reconstruction from `Bu` itself, differentiated by finite differences.
pub fn reconstruct_from_trace(
    bu: &TraceSignal,
    kernels: &ReconstructionKernels,
    model: &SpectralModel,
) -> Result<Recovered> {
    reconstruct(&differentiate(bu)?, kernels, model)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityScan {
    pub min: f64,
    pub max: f64,
    pub ratios: Vec<f64>,
}

/// Standard normal coefficients for one trial. Each trial draws from its own
/// stream, so a longer vector extends a shorter one with the same seed.
pub fn random_source(n: usize, seed: u64, trial: u64) -> SourceCoefficients {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let mut values: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        values.iter_mut().for_each(|v| *v /= norm);
    }
    SourceCoefficients::new(values)
}

/// `(min, max)` of `‖Bu‖_{H¹} / ‖f‖` over random unit `f`. Meaningful for
/// horizons beyond the observability threshold.
pub fn stability_scan(
    model: &SpectralModel,
    kernel: &KernelSpec,
    modulation: &Modulation,
    grid: &TimeGrid,
    trials: usize,
    seed: u64,
) -> Result<StabilityScan> {
    if trials < 1 {
        return Err(Error::NoTrials);
    }
    let per_mode = source_mode_traces(model, kernel, modulation, grid)?;
    let dim = model.observation_dim();
    let ratios = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let f = random_source(model.truncation(), seed, trial);
            let (bu, _) = superpose(&per_mode, &f.values, grid, dim);
            Ok(h1_norm(&bu)? / f.norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(0.0, f64::max);
    Ok(StabilityScan { min, max, ratios })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CounterexampleRow {
    pub n: usize,
    pub lambda: f64,
    /// `|λ_n|·‖y_n ψ_n‖_{L²}`.
    pub scaled_norm: f64,
    /// Smallest Gram eigenvalue of `{y_k ψ_k}_{k ≤ n}`.
    pub min_gram_eigenvalue: f64,
}

/// Without memory, `{y_n ψ_n}` with `y_n = V_σ w_n` decays like `1/|λ_n|`, so
/// its Gram matrix degenerates and an `L²` lower stability bound fails.
pub fn l2_only_counterexample(
    model: &SpectralModel,
    modulation: &Modulation,
    grid: &TimeGrid,
    nmax: usize,
) -> Result<Vec<CounterexampleRow>> {
    if nmax == 0 || nmax > model.truncation() {
        return Err(Error::InvalidParameter(format!(
            "nmax must lie in 1..={}, got {nmax}",
            model.truncation()
        )));
    }
    let family = y_family(model, &KernelSpec::Zero, modulation, grid)?.leading(nmax)?;
    let gm = gram(&family)?;
    let modes = model.positive_modes();
    (1..=nmax)
        .into_par_iter()
        .map(|n| {
            let mode = &modes[n - 1];
            let min = gm.leading(n).eigenvalues()?[0];
            Ok(CounterexampleRow {
                n,
                lambda: mode.lambda.norm(),
                scaled_norm: mode.lambda.norm() * family.members()[n - 1].l2_norm(),
                min_gram_eigenvalue: min,
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ReconstructionReport {
    pub recovered: SourceCoefficients,
    pub truth: Option<SourceCoefficients>,
    pub per_mode_error: Vec<f64>,
    pub relative_l2_error: Option<f64>,
    pub frame_bounds_used: FrameBounds,
    pub noise_level: f64,
    pub max_imag: f64,
}

impl ReconstructionReport {
    fn new(
        recovered: Recovered,
        truth: Option<&SourceCoefficients>,
        bounds: FrameBounds,
        noise_level: f64,
    ) -> Result<Self> {
        let (per_mode_error, relative_l2_error) = match truth {
            Some(t) => {
                if t.len() != recovered.source.len() {
                    return Err(Error::LengthMismatch {
                        expected: recovered.source.len(),
                        found: t.len(),
                    });
                }
                let errs: Vec<f64> = recovered
                    .source
                    .values
                    .iter()
                    .zip(&t.values)
                    .map(|(a, b)| (a - b).abs())
                    .collect();
                let abs = errs.iter().map(|e| e * e).sum::<f64>().sqrt();
                let rel = if t.norm() > 0.0 { abs / t.norm() } else { abs };
                (errs, Some(rel))
            }
            None => (vec![], None),
        };
        Ok(Self {
            recovered: recovered.source,
            truth: truth.cloned(),
            per_mode_error,
            relative_l2_error,
            frame_bounds_used: bounds,
            noise_level,
            max_imag: recovered.max_imag,
        })
    }
}

/// Reconstruction report without perturbing the measurement.
pub fn report(
    bu_prime: &TraceSignal,
    kernels: &ReconstructionKernels,
    model: &SpectralModel,
    truth: Option<&SourceCoefficients>,
) -> Result<ReconstructionReport> {
    let recovered = reconstruct(bu_prime, kernels, model)?;
    ReconstructionReport::new(recovered, truth, kernels.frame_bounds(), 0.0)
}

/// Adds seeded white Gaussian noise scaled to `noise_level·‖Bu′‖_{H¹}` in the
/// `H¹` norm, then reconstructs.
pub fn noisy_reconstruction(
    bu_prime: &TraceSignal,
    noise_level: f64,
    seed: u64,
    kernels: &ReconstructionKernels,
    model: &SpectralModel,
    truth: Option<&SourceCoefficients>,
) -> Result<ReconstructionReport> {
    if noise_level.is_nan() || noise_level < 0.0 {
        return Err(Error::NegativeNoise(noise_level));
    }
    if noise_level == 0.0 {
        let recovered = reconstruct(bu_prime, kernels, model)?;
        return ReconstructionReport::new(recovered, truth, kernels.frame_bounds(), 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = *bu_prime.grid();
    let channels: Vec<Vec<Complex64>> = (0..bu_prime.dim())
        .map(|_| {
            (0..grid.len())
                .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
                .collect()
        })
        .collect();
    let noise = TraceSignal::new(grid, channels)?;
    let scale = noise_level * h1_norm(bu_prime)? / h1_norm(&noise)?;
    let mut noisy = bu_prime.clone();
    noisy.add_scaled(Complex64::new(scale, 0.0), &noise)?;
    let recovered = reconstruct(&noisy, kernels, model)?;
    ReconstructionReport::new(recovered, truth, kernels.frame_bounds(), noise_level)
}

/// `{θ_k}` as a modal family, e.g. to check its Riesz bounds.
pub fn theta_family(kernels: &ReconstructionKernels) -> Result<ModalFamily> {
    ModalFamily::new(kernels.labels.clone(), kernels.thetas.clone())
}

/// Riesz bounds of `{θ_k}`.
pub fn theta_bounds(kernels: &ReconstructionKernels) -> Result<FrameBounds> {
    frame_bounds(&gram(&theta_family(kernels)?)?)
}
