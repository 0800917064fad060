//! Frame analysis of modal families `{g_n ψ_n}` in `L²(0, T; G)`.
//!
//! For a truncated family the sharp Riesz constants are the extreme
//! eigenvalues of its Gram matrix, and the biorthogonal family inside the span
//! is obtained by inverting the Gram matrix (finite-section method).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::modal_ode::{solve_w_all, solve_z_all};
use crate::spectral_model::SpectralModel;
use crate::volterra_calculus::{
    convolve, l2_inner, KernelSpec, Modulation, Signal, TimeGrid, TraceSignal,
};
use crate::{Error, Result};

/// Relative eigenvalue floor below which a Gram matrix counts as singular.
pub const SINGULAR_GRAM_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct ModalFamily {
    labels: Vec<i64>,
    members: Vec<TraceSignal>,
}

impl ModalFamily {
    pub fn new(labels: Vec<i64>, members: Vec<TraceSignal>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidParameter("modal family is empty".into()));
        }
        if labels.len() != members.len() {
            return Err(Error::LengthMismatch {
                expected: members.len(),
                found: labels.len(),
            });
        }
        let (grid, dim) = (*members[0].grid(), members[0].dim());
        for m in &members[1..] {
            if *m.grid() != grid {
                return Err(Error::GridMismatch);
            }
            if m.dim() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    found: m.dim(),
                });
            }
        }
        Ok(Self { labels, members })
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn members(&self) -> &[TraceSignal] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn grid(&self) -> &TimeGrid {
        self.members[0].grid()
    }

    /// `Σ a_n member_n`.
    pub fn combine(&self, coefficients: &[Complex64]) -> Result<TraceSignal> {
        if coefficients.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: coefficients.len(),
            });
        }
        let mut out = TraceSignal::zeros(*self.grid(), self.members[0].dim());
        for (a, m) in coefficients.iter().zip(&self.members) {
            out.add_scaled(*a, m)?;
        }
        Ok(out)
    }

    /// The first `count` members.
    pub fn leading(&self, count: usize) -> Result<Self> {
        let count = count.min(self.len());
        Self::new(
            self.labels[..count].to_vec(),
            self.members[..count].to_vec(),
        )
    }
}

/// `{z_n ψ_n}` over all `2N` modes.
pub fn z_family(
    model: &SpectralModel,
    kernel: &KernelSpec,
    grid: &TimeGrid,
) -> Result<ModalFamily> {
    let trajectories = solve_z_all(model, kernel, grid)?;
    let members = trajectories
        .iter()
        .map(|t| TraceSignal::from_profile(&t.z, &t.mode.psi))
        .collect();
    ModalFamily::new(model.modes().iter().map(|m| m.index).collect(), members)
}

/// `{w_n ψ_n}` for `n = 1, …, N`.
pub fn w_family(
    model: &SpectralModel,
    kernel: &KernelSpec,
    grid: &TimeGrid,
) -> Result<ModalFamily> {
    let trajectories = solve_w_all(model, kernel, grid)?;
    let members = trajectories
        .iter()
        .map(|t| TraceSignal::from_profile(&t.z, &t.mode.psi))
        .collect();
    ModalFamily::new(
        model.positive_modes().iter().map(|m| m.index).collect(),
        members,
    )
}

/// `{y_n ψ_n}` with `y_n = V_σ w_n`, for `n = 1, …, N`.
pub fn y_family(
    model: &SpectralModel,
    kernel: &KernelSpec,
    modulation: &Modulation,
    grid: &TimeGrid,
) -> Result<ModalFamily> {
    let w = w_family(model, kernel, grid)?;
    let members = w
        .members
        .par_iter()
        .map(|m| convolve(&modulation.value, m))
        .collect::<Result<Vec<_>>>()?;
    ModalFamily::new(w.labels, members)
}

/// Hermitian Gram matrix `G_{kn} = ⟨member_n, member_k⟩`.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    pub entries: DMatrix<Complex64>,
    pub horizon: f64,
}

impl GramMatrix {
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let scale = self.entries.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let deviation = (&self.entries - self.entries.adjoint())
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        if deviation > 1e-10 * scale.max(1e-300) {
            return Err(Error::NotHermitian(deviation));
        }
        let mut values: Vec<f64> = SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        values.sort_by(f64::total_cmp);
        Ok(values)
    }

    /// Gram matrix of the first `count` members.
    pub fn leading(&self, count: usize) -> Self {
        let count = count.min(self.size());
        Self {
            entries: self.entries.view((0, 0), (count, count)).into_owned(),
            horizon: self.horizon,
        }
    }
}

pub fn gram(family: &ModalFamily) -> Result<GramMatrix> {
    let n = family.len();
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            (k..n)
                .map(|j| l2_inner(&family.members[j], &family.members[k]))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut entries = DMatrix::zeros(n, n);
    for (k, row) in rows.iter().enumerate() {
        for (offset, &v) in row.iter().enumerate() {
            let j = k + offset;
            entries[(k, j)] = v;
            entries[(j, k)] = v.conj();
        }
        entries[(k, k)] = Complex64::new(entries[(k, k)].re, 0.0);
    }
    Ok(GramMatrix {
        entries,
        horizon: family.grid().horizon(),
    })
}

/// Sharp Riesz constants of a truncated family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameBounds {
    pub lower: f64,
    pub upper: f64,
    /// Number of family members.
    pub members: usize,
    pub horizon: f64,
}

impl FrameBounds {
    pub fn condition(&self) -> f64 {
        self.upper / self.lower
    }

    pub fn is_singular(&self) -> bool {
        self.lower <= SINGULAR_GRAM_THRESHOLD * self.upper
    }
}

/// `(c, C)` = extreme Gram eigenvalues; `c` is clamped at zero against rounding.
pub fn frame_bounds(gram: &GramMatrix) -> Result<FrameBounds> {
    let values = gram.eigenvalues()?;
    let upper = *values.last().unwrap_or(&0.0);
    let lower = values.first().copied().unwrap_or(0.0).max(0.0);
    Ok(FrameBounds {
        lower,
        upper: upper.max(lower),
        members: gram.size(),
        horizon: gram.horizon,
    })
}

/// Biorthogonal family `{p_k}` inside the span of a modal family.
#[derive(Clone, Debug)]
pub struct DualFamily {
    pub duals: Vec<TraceSignal>,
    pub labels: Vec<i64>,
    /// Riesz bounds of the source family.
    pub source_bounds: FrameBounds,
}

/// `p_k = Σ_m conj((G⁻¹)_{km}) member_m`, so that `⟨member_n, p_k⟩ = δ_{nk}`.
pub fn dual_family(family: &ModalFamily, gram: &GramMatrix) -> Result<DualFamily> {
    if gram.size() != family.len() {
        return Err(Error::LengthMismatch {
            expected: family.len(),
            found: gram.size(),
        });
    }
    let bounds = frame_bounds(gram)?;
    if bounds.is_singular() {
        return Err(Error::SingularGram {
            min: bounds.lower,
            max: bounds.upper,
        });
    }
    let inverse = gram
        .entries
        .clone()
        .cholesky()
        .ok_or(Error::SingularGram {
            min: bounds.lower,
            max: bounds.upper,
        })?
        .inverse();
    let duals = (0..family.len())
        .into_par_iter()
        .map(|k| {
            let coeffs: Vec<Complex64> =
                (0..family.len()).map(|m| inverse[(k, m)].conj()).collect();
            family.combine(&coeffs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DualFamily {
        duals,
        labels: family.labels.clone(),
        source_bounds: bounds,
    })
}

/// `max_{n,k} |⟨member_n, p_k⟩ − δ_{nk}|`.
pub fn biorthogonality_defect(family: &ModalFamily, duals: &DualFamily) -> Result<f64> {
    let rows = family
        .members
        .par_iter()
        .enumerate()
        .map(|(n, member)| {
            let mut worst: f64 = 0.0;
            for (k, p) in duals.duals.iter().enumerate() {
                let target = if n == k { 1.0 } else { 0.0 };
                worst = worst.max((l2_inner(member, p)? - target).norm());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(rows.into_iter().fold(0.0, f64::max))
}

/// `‖Σ a_n ψ_n‖²_G / (ε⁻¹ Σ|a_n|² + ε Σ|λ_n a_n|²)` over all `2N` modes.
pub fn bessel_ratio(model: &SpectralModel, coefficients: &[Complex64], eps: f64) -> Result<f64> {
    let modes = model.modes();
    if coefficients.len() != modes.len() {
        return Err(Error::LengthMismatch {
            expected: modes.len(),
            found: coefficients.len(),
        });
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {eps}"
        )));
    }
    if coefficients.iter().all(|a| a.norm() == 0.0) {
        return Err(Error::DegenerateCoefficients);
    }
    let mut sum = vec![Complex64::new(0.0, 0.0); model.observation_dim()];
    let (mut plain, mut weighted) = (0.0, 0.0);
    for (a, mode) in coefficients.iter().zip(modes) {
        for (s, p) in sum.iter_mut().zip(&mode.psi) {
            *s += a * p;
        }
        plain += a.norm_sqr();
        weighted += mode.lambda_sq_norm() * a.norm_sqr();
    }
    let numerator: f64 = sum.iter().map(|s| s.norm_sqr()).sum();
    Ok(numerator / (plain / eps + eps * weighted))
}

/// Number of logarithmically spaced `ε ∈ [10⁻³T, T]` tried per trial.
const EPS_SAMPLES: usize = 25;

/// Monte-Carlo maximum of [`bessel_ratio`] over random coefficients uniform on
/// the complex unit disc and `ε ∈ (0, T]`.
pub fn bessel_defect(model: &SpectralModel, horizon: f64, trials: usize, seed: u64) -> Result<f64> {
    if trials < 1 {
        return Err(Error::NoTrials);
    }
    if horizon.is_nan() || horizon <= 0.0 {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let coeffs: Vec<Complex64> = (0..model.modes().len())
            .map(|_| unit_disc(&mut rng))
            .collect();
        if coeffs.iter().all(|a| a.norm() == 0.0) {
            continue;
        }
        for s in 0..EPS_SAMPLES {
            let eps = horizon * 10f64.powf(-3.0 * s as f64 / (EPS_SAMPLES - 1) as f64);
            worst = worst.max(bessel_ratio(model, &coeffs, eps)?);
        }
    }
    Ok(worst)
}

pub(crate) fn unit_disc(rng: &mut impl Rng) -> Complex64 {
    let r = rng.random::<f64>().sqrt();
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    Complex64::from_polar(r, phi)
}
