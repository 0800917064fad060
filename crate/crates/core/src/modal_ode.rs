//! Modal Volterra integro-differential equations
//!
//! ```text
//!     y″(t) + λ² y(t) = −λ² ∫₀ᵗ M(t−s) y(s) ds
//! ```
//!
//! with `(y, y′)(0) = (1, iλ_n)` for `z_n` and `(0, λ_n)` for `w_n`.
//!
//! The integrator is the implicit trapezoid rule in `(y, y′)` with the memory
//! integral evaluated by the trapezoid rule over the stored history. Only the
//! newest sample enters the memory sum implicitly, so each step is a 2×2 linear
//! solve done in closed form. The history sum costs `O(J)` per step, except for
//! exponential kernels whose trapezoid sum obeys a one-term recursion.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::spectral_model::{Mode, SpectralModel};
use crate::volterra_calculus::{KernelSpec, ScalarSignal, TimeGrid};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// A modal time profile and its derivative. Used for both `z_n` and `w_n`.
#[derive(Clone, Debug)]
pub struct ModalTrajectory {
    pub mode: Mode,
    pub z: ScalarSignal,
    pub z_prime: ScalarSignal,
    pub kernel: KernelSpec,
}

enum Memory {
    None,
    /// `M_k = β r^k` with `r = e^{−α dt}`.
    Geometric {
        beta: f64,
        ratio: f64,
    },
    General(Vec<f64>),
}

impl Memory {
    fn new(kernel: &KernelSpec, grid: &TimeGrid) -> Result<Self> {
        Ok(match kernel {
            k if k.is_zero() => {
                // still validates sampled kernels against the grid
                k.sample(grid)?;
                Memory::None
            }
            KernelSpec::Exponential { beta, alpha } => Memory::Geometric {
                beta: *beta,
                ratio: (-alpha * grid.dt()).exp(),
            },
            k => Memory::General(k.sample(grid)?),
        })
    }

    fn origin(&self) -> f64 {
        match self {
            Memory::None => 0.0,
            Memory::Geometric { beta, .. } => *beta,
            Memory::General(m) => m[0],
        }
    }
}

/// Integrates `y″ + μ y = −μ ∫₀ᵗ M(t−s) y(s) ds` from `(y0, v0)`.
fn integrate(
    mu: f64,
    y0: Complex64,
    v0: Complex64,
    memory: &Memory,
    grid: &TimeGrid,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let n = grid.len();
    let dt = grid.dt();
    let h = 0.5 * dt;
    let m0 = memory.origin();
    // F_{j+1} = −a·y_{j+1} − μ·H_{j+1}
    let a = mu * (1.0 + h * m0);
    let denom = 1.0 + h * h * a;
    if denom.abs() < 1e-12 {
        return Err(Error::SingularStep(mu));
    }

    let mut y = vec![ZERO; n];
    let mut v = vec![ZERO; n];
    y[0] = y0;
    v[0] = v0;
    let mut force = -mu * y0;
    // Σ_{i=1}^{j} r^{j+1−i} y_i for the geometric kernel
    let mut tail = ZERO;
    let mut power = 1.0;

    for j in 0..n - 1 {
        let history = match memory {
            Memory::None => ZERO,
            Memory::Geometric { beta, ratio } => {
                if j >= 1 {
                    tail = (tail + y[j]) * *ratio;
                }
                power *= ratio;
                (0.5 * power * y[0] + tail) * (beta * dt)
            }
            Memory::General(m) => {
                let mut acc = 0.5 * m[j + 1] * y[0];
                for i in 1..=j {
                    acc += m[j + 1 - i] * y[i];
                }
                acc * dt
            }
        };
        let rhs = y[j] + 2.0 * h * v[j] + h * h * (force - mu * history);
        let next = rhs / denom;
        let next_force = -a * next - mu * history;
        y[j + 1] = next;
        v[j + 1] = v[j] + h * (force + next_force);
        force = next_force;
    }
    Ok((y, v))
}

fn trajectory(
    mode: &Mode,
    kernel: &KernelSpec,
    grid: &TimeGrid,
    values: Vec<Complex64>,
    derivative: Vec<Complex64>,
) -> Result<ModalTrajectory> {
    Ok(ModalTrajectory {
        mode: mode.clone(),
        z: ScalarSignal::new(*grid, values)?,
        z_prime: ScalarSignal::new(*grid, derivative)?,
        kernel: kernel.clone(),
    })
}

/// `z_n`: the modal solution with `z_n(0) = 1`, `z_n′(0) = iλ_n`, or
/// `1 + i·sgn(n)·t` on `J0`.
pub fn solve_z(mode: &Mode, kernel: &KernelSpec, grid: &TimeGrid) -> Result<ModalTrajectory> {
    let memory = Memory::new(kernel, grid)?;
    if mode.is_stationary() {
        let s = mode.sign();
        let z = grid.nodes().map(|t| Complex64::new(1.0, s * t)).collect();
        let dz = vec![Complex64::new(0.0, s); grid.len()];
        return trajectory(mode, kernel, grid, z, dz);
    }
    let (z, dz) = integrate(
        mode.mu,
        Complex64::new(1.0, 0.0),
        I * mode.lambda,
        &memory,
        grid,
    )?;
    trajectory(mode, kernel, grid, z, dz)
}

/// `w_n = (z_n − z_{−n})/(2i)`: initial data `(0, λ_n)`, or `sgn(n)·t` on `J0`.
pub fn solve_w(mode: &Mode, kernel: &KernelSpec, grid: &TimeGrid) -> Result<ModalTrajectory> {
    let memory = Memory::new(kernel, grid)?;
    if mode.is_stationary() {
        let s = mode.sign();
        let w = grid.nodes().map(|t| Complex64::new(s * t, 0.0)).collect();
        let dw = vec![Complex64::new(s, 0.0); grid.len()];
        return trajectory(mode, kernel, grid, w, dw);
    }
    let (w, dw) = integrate(mode.mu, ZERO, mode.lambda, &memory, grid)?;
    trajectory(mode, kernel, grid, w, dw)
}

/// `z_n` for every mode of the model, in model order.
pub fn solve_z_all(
    model: &SpectralModel,
    kernel: &KernelSpec,
    grid: &TimeGrid,
) -> Result<Vec<ModalTrajectory>> {
    model
        .modes()
        .par_iter()
        .map(|m| solve_z(m, kernel, grid))
        .collect()
}

/// `w_n` for `n = 1, …, N`.
pub fn solve_w_all(
    model: &SpectralModel,
    kernel: &KernelSpec,
    grid: &TimeGrid,
) -> Result<Vec<ModalTrajectory>> {
    model
        .positive_modes()
        .par_iter()
        .map(|m| solve_w(m, kernel, grid))
        .collect()
}

/// `t ↦ e^{(γ + iλ_n)t}` with `γ = M(0)/2`; `1 + i·sgn(n)·t` when `λ_n = 0`.
pub fn comparison_exponential(
    mode: &Mode,
    kernel: &KernelSpec,
    grid: &TimeGrid,
) -> Result<ScalarSignal> {
    let gamma = 0.5 * kernel.origin()?;
    if mode.is_stationary() {
        let s = mode.sign();
        return Ok(ScalarSignal::from_fn(*grid, |t| Complex64::new(1.0, s * t)));
    }
    let rate = gamma + I * mode.lambda;
    Ok(ScalarSignal::from_fn(*grid, |t| (rate * t).exp()))
}

/// `|λ_n|² ∫₀ᵀ |z_n(t) − e^{(γ+iλ_n)t}|² dt`, which stays bounded in `n`.
pub fn zest_defect(mode: &Mode, kernel: &KernelSpec, grid: &TimeGrid) -> Result<f64> {
    if mode.is_stationary() {
        return Err(Error::ZeroBranch(mode.index));
    }
    let reference = comparison_exponential(mode, kernel, grid)?;
    let z = solve_z(mode, kernel, grid)?;
    let diff: Vec<Complex64> =
        z.z.values()
            .iter()
            .zip(reference.values())
            .map(|(a, b)| a - b)
            .collect();
    let defect = ScalarSignal::new(*grid, diff)?.l2_norm();
    Ok(mode.lambda_sq_norm() * defect * defect)
}
