//! Time discretization and the Volterra convolution calculus on `[0, T]`.
//!
//! All signals are sampled on a uniform [`TimeGrid`] and integrated with the
//! composite trapezoid rule. The Volterra operator
//!
//! ```text
//!     (V_ρ v)(t) = ∫₀ᵗ ρ(t−s) v(s) ds
//! ```
//!
//! is discretized as a lower-triangular quadrature matrix. Its adjoint
//! [`convolve_adjoint`] is the adjoint of that matrix with respect to the
//! trapezoid inner product, so `⟨V_ρ u, v⟩ = ⟨u, V_ρ* v⟩` holds to rounding.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Uniform grid `t_j = j·T/J`, `j = 0..=J`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if horizon <= 0.0 || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if steps < 2 {
            return Err(Error::GridTooCoarse { steps, required: 2 });
        }
        Ok(Self { horizon, steps })
    }

    /// Smallest grid whose step does not exceed `dt`.
    pub fn with_max_step(horizon: f64, dt: f64) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step must be positive, got {dt}"
            )));
        }
        let ratio = horizon / dt;
        let steps = (ratio - 1e-9).ceil().max(1.0) as usize;
        Self::new(horizon, steps)
    }

    /// Grid with exactly the step `dt`; `T/dt` must be an integer to within `1e-9`.
    pub fn with_exact_step(horizon: f64, dt: f64) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step must be positive, got {dt}"
            )));
        }
        let ratio = horizon / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "T/dt = {ratio} is not an integer"
            )));
        }
        Self::new(horizon, steps as usize)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of intervals `J`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of nodes `J + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.steps {
            self.horizon
        } else {
            j as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|j| self.node(j))
    }

    /// Composite trapezoid weight of node `j`.
    pub fn weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.steps {
            0.5 * self.dt()
        } else {
            self.dt()
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.weight(j)).collect()
    }

    /// Same grid with every interval split in two.
    pub fn refined(&self) -> Self {
        Self {
            horizon: self.horizon,
            steps: 2 * self.steps,
        }
    }

    fn check(&self, other: &TimeGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Common surface of scalar and `G`-valued signals.
pub trait Signal: Sized {
    fn grid(&self) -> &TimeGrid;

    fn channels(&self) -> Vec<&[Complex64]>;

    /// Applies `f` to every channel, producing a signal of the same shape.
    fn map_channels<F>(&self, f: F) -> Self
    where
        F: Fn(&[Complex64]) -> Vec<Complex64>;
}

/// A complex function sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSignal {
    grid: TimeGrid,
    values: Vec<Complex64>,
}

impl ScalarSignal {
    pub fn new(grid: TimeGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            values: vec![ZERO; grid.len()],
            grid,
        }
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { grid, values }
    }

    pub fn from_real_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |t| Complex64::new(f(t), 0.0))
    }

    pub fn from_real(grid: TimeGrid, values: &[f64]) -> Result<Self> {
        Self::new(
            grid,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn scale(&self, a: Complex64) -> Self {
        self.map_channels(|c| c.iter().map(|v| v * a).collect())
    }

    /// `max_j |self_j − other_j|`.
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        self.grid.check(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        weighted_norm_sqr(&self.grid, &self.values).sqrt()
    }
}

impl Signal for ScalarSignal {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn channels(&self) -> Vec<&[Complex64]> {
        vec![&self.values]
    }

    fn map_channels<F>(&self, f: F) -> Self
    where
        F: Fn(&[Complex64]) -> Vec<Complex64>,
    {
        Self {
            grid: self.grid,
            values: f(&self.values),
        }
    }
}

/// A `G = ℂ^m` valued signal stored channel by channel.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSignal {
    grid: TimeGrid,
    channels: Vec<Vec<Complex64>>,
}

impl TraceSignal {
    pub fn new(grid: TimeGrid, channels: Vec<Vec<Complex64>>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidParameter(
                "trace needs at least one channel".into(),
            ));
        }
        for c in &channels {
            if c.len() != grid.len() {
                return Err(Error::LengthMismatch {
                    expected: grid.len(),
                    found: c.len(),
                });
            }
        }
        Ok(Self { grid, channels })
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        Self {
            channels: vec![vec![ZERO; grid.len()]; dim.max(1)],
            grid,
        }
    }

    /// `t ↦ g(t)·ψ`.
    pub fn from_profile(profile: &ScalarSignal, direction: &[Complex64]) -> Self {
        let channels = direction
            .iter()
            .map(|&d| profile.values.iter().map(|&v| v * d).collect())
            .collect();
        Self {
            grid: profile.grid,
            channels,
        }
    }

    pub fn dim(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, k: usize) -> &[Complex64] {
        &self.channels[k]
    }

    /// The `G`-vector at node `j`.
    pub fn at(&self, j: usize) -> Vec<Complex64> {
        self.channels.iter().map(|c| c[j]).collect()
    }

    /// `self += a·other`.
    pub fn add_scaled(&mut self, a: Complex64, other: &TraceSignal) -> Result<()> {
        self.grid.check(&other.grid)?;
        if self.dim() != other.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        for (mine, theirs) in self.channels.iter_mut().zip(&other.channels) {
            for (x, y) in mine.iter_mut().zip(theirs) {
                *x += a * y;
            }
        }
        Ok(())
    }

    pub fn scale(&self, a: Complex64) -> Self {
        self.map_channels(|c| c.iter().map(|v| v * a).collect())
    }

    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        self.grid.check(&other.grid)?;
        if self.dim() != other.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .channels
            .iter()
            .zip(&other.channels)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max))
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.channels
            .iter()
            .flatten()
            .map(|v| v.im.abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.channels
            .iter()
            .flatten()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| weighted_norm_sqr(&self.grid, c))
            .sum::<f64>()
            .sqrt()
    }
}

impl Signal for TraceSignal {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn channels(&self) -> Vec<&[Complex64]> {
        self.channels.iter().map(Vec::as_slice).collect()
    }

    fn map_channels<F>(&self, f: F) -> Self
    where
        F: Fn(&[Complex64]) -> Vec<Complex64>,
    {
        Self {
            grid: self.grid,
            channels: self.channels.iter().map(|c| f(c)).collect(),
        }
    }
}

fn weighted_norm_sqr(grid: &TimeGrid, values: &[Complex64]) -> f64 {
    values
        .iter()
        .enumerate()
        .map(|(j, v)| grid.weight(j) * v.norm_sqr())
        .sum()
}

/// Memory kernel `M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum KernelSpec {
    Zero,
    /// `M(t) = β·e^{−αt}`.
    Exponential {
        beta: f64,
        alpha: f64,
    },
    /// `M(t) = Σ c_k t^k`.
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// Values on the simulation grid together with an explicitly declared `M(0)`.
    Sampled {
        values: Vec<f64>,
        #[serde(default)]
        origin: Option<f64>,
    },
}

impl KernelSpec {
    /// `M(0)`.
    pub fn origin(&self) -> Result<f64> {
        match self {
            KernelSpec::Zero => Ok(0.0),
            KernelSpec::Exponential { beta, .. } => Ok(*beta),
            KernelSpec::Polynomial { coefficients } => {
                Ok(coefficients.first().copied().unwrap_or(0.0))
            }
            KernelSpec::Sampled { origin, .. } => origin.ok_or(Error::MissingKernelOrigin),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            KernelSpec::Zero => true,
            KernelSpec::Exponential { beta, .. } => *beta == 0.0,
            KernelSpec::Polynomial { coefficients } => coefficients.iter().all(|&c| c == 0.0),
            KernelSpec::Sampled { values, .. } => values.iter().all(|&v| v == 0.0),
        }
    }

    /// `M(t_j)` on every node.
    pub fn sample(&self, grid: &TimeGrid) -> Result<Vec<f64>> {
        match self {
            KernelSpec::Zero => Ok(vec![0.0; grid.len()]),
            KernelSpec::Exponential { beta, alpha } => {
                Ok(grid.nodes().map(|t| beta * (-alpha * t).exp()).collect())
            }
            KernelSpec::Polynomial { coefficients } => Ok(grid
                .nodes()
                .map(|t| coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c))
                .collect()),
            KernelSpec::Sampled { values, .. } => {
                if values.len() != grid.len() {
                    return Err(Error::LengthMismatch {
                        expected: grid.len(),
                        found: values.len(),
                    });
                }
                Ok(values.clone())
            }
        }
    }

    pub fn to_signal(&self, grid: &TimeGrid) -> Result<ScalarSignal> {
        ScalarSignal::from_real(*grid, &self.sample(grid)?)
    }
}

/// Closed-form time modulations `σ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModulationForm {
    /// `σ ≡ a`.
    Constant { a: f64 },
    /// `σ(t) = e^{at}`.
    Exponential { a: f64 },
    /// `σ(t) = a + b t`.
    Affine { a: f64, b: f64 },
}

impl ModulationForm {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            ModulationForm::Constant { a } => a,
            ModulationForm::Exponential { a } => (a * t).exp(),
            ModulationForm::Affine { a, b } => a + b * t,
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            ModulationForm::Constant { .. } => 0.0,
            ModulationForm::Exponential { a } => a * (a * t).exp(),
            ModulationForm::Affine { b, .. } => b,
        }
    }
}

/// The source modulation `σ` together with `σ′` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Modulation {
    pub value: ScalarSignal,
    pub derivative: ScalarSignal,
}

impl Modulation {
    pub fn closed_form(form: ModulationForm, grid: TimeGrid) -> Self {
        Self {
            value: ScalarSignal::from_real_fn(grid, |t| form.value(t)),
            derivative: ScalarSignal::from_real_fn(grid, |t| form.derivative(t)),
        }
    }

    /// `σ′` by second-order finite differences, adding an `O(dt²)` error.
    pub fn sampled(value: ScalarSignal) -> Result<Self> {
        let derivative = differentiate(&value)?;
        Ok(Self { value, derivative })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.value.grid()
    }

    /// `σ(0)`.
    pub fn origin(&self) -> Complex64 {
        self.value.values[0]
    }

    pub fn scaled(&self, a: f64) -> Self {
        let a = Complex64::new(a, 0.0);
        Self {
            value: self.value.scale(a),
            derivative: self.derivative.scale(a),
        }
    }
}

// Below this length the direct O(n²) sum beats the FFT.
const DIRECT_LIMIT: usize = 96;

/// First `n = a.len()` terms of the linear convolution `c_j = Σ_{i≤j} a_{j−i} b_i`.
fn causal_convolution(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len();
    debug_assert_eq!(n, b.len());
    if n <= DIRECT_LIMIT {
        return (0..n)
            .map(|j| (0..=j).map(|i| a[j - i] * b[i]).sum())
            .collect();
    }
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);
    let mut fa = vec![ZERO; size];
    let mut fb = vec![ZERO; size];
    fa[..n].copy_from_slice(a);
    fb[..n].copy_from_slice(b);
    forward.process(&mut fa);
    forward.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inverse.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa.truncate(n);
    fa.iter_mut().for_each(|v| *v *= scale);
    fa
}

/// Discrete `V_ρ v` on raw samples.
fn volterra_apply(rho: &[Complex64], v: &[Complex64], dt: f64) -> Vec<Complex64> {
    let full = causal_convolution(rho, v);
    full.iter()
        .enumerate()
        .map(|(j, &c)| {
            if j == 0 {
                ZERO
            } else {
                (c - 0.5 * rho[j] * v[0] - 0.5 * rho[0] * v[j]) * dt
            }
        })
        .collect()
}

/// Discrete `V_ρ* z`: the adjoint of [`volterra_apply`] in the trapezoid inner product.
fn volterra_adjoint_apply(rho: &[Complex64], z: &[Complex64], grid: &TimeGrid) -> Vec<Complex64> {
    let n = z.len();
    let dt = grid.dt();
    let rho_conj: Vec<Complex64> = rho.iter().map(|r| r.conj()).collect();
    // y_j = w_j z_j, reversed so that the correlation becomes a causal convolution
    let y: Vec<Complex64> = z
        .iter()
        .enumerate()
        .map(|(j, &v)| v * grid.weight(j))
        .collect();
    let y_rev: Vec<Complex64> = y.iter().rev().copied().collect();
    let corr = causal_convolution(&rho_conj, &y_rev);
    (0..n)
        .map(|i| {
            let r = corr[n - 1 - i];
            let tail = 0.5 * rho_conj[0] * y[i];
            let vh = if i == 0 { 0.5 * r - tail } else { r - tail };
            vh * dt / grid.weight(i)
        })
        .collect()
}

/// `V_ρ v` for a scalar or trace signal. `(V_ρ v)(t_0) = 0` exactly.
pub fn convolve<S: Signal>(rho: &ScalarSignal, v: &S) -> Result<S> {
    rho.grid.check(v.grid())?;
    let dt = rho.grid.dt();
    Ok(v.map_channels(|c| volterra_apply(&rho.values, c, dt)))
}

/// `V_ρ* z`, approximating `∫_t^T ρ(s−t) z(s) ds`.
pub fn convolve_adjoint<S: Signal>(rho: &ScalarSignal, z: &S) -> Result<S> {
    rho.grid.check(z.grid())?;
    let grid = rho.grid;
    Ok(z.map_channels(|c| volterra_adjoint_apply(&rho.values, c, &grid)))
}

/// Resolvent kernel `K` of `σ′/σ(0)`:
///
/// ```text
///     K(t) + σ′(t)/σ(0) + (1/σ(0)) ∫₀ᵗ K(t−s) σ′(s) ds = 0,
/// ```
///
/// solved by forward substitution of the trapezoid discretization. Then
/// `(I + V_K)(σ(0) + V_σ′) = σ(0)·I` up to `O(dt²)`.
pub fn resolvent_kernel(modulation: &Modulation) -> Result<ScalarSignal> {
    let sigma = modulation.value.values();
    let dsigma = modulation.derivative.values();
    let grid = *modulation.grid();
    modulation.derivative.grid.check(&grid)?;
    let s0 = sigma[0];
    let scale = sigma.iter().map(|v| v.norm()).fold(1.0, f64::max);
    if s0.norm() <= 1e-12 * scale {
        return Err(Error::VanishingModulation(s0.norm()));
    }
    let dt = grid.dt();
    let n = grid.len();
    let pivot = 1.0 + 0.5 * dt * dsigma[0] / s0;
    if pivot.norm() < 1e-14 {
        return Err(Error::InvalidParameter(
            "resolvent step is singular; refine the grid".into(),
        ));
    }
    let mut k = vec![ZERO; n];
    k[0] = -dsigma[0] / s0;
    for j in 1..n {
        let mut acc = 0.5 * k[0] * dsigma[j];
        for i in 1..j {
            acc += k[j - i] * dsigma[i];
        }
        k[j] = (-dsigma[j] - acc * dt) / s0 / pivot;
    }
    ScalarSignal::new(grid, k)
}

/// `⟨u, v⟩ = ∫₀ᵀ Σ_k u_k(t) conj(v_k(t)) dt` by the trapezoid rule.
pub fn l2_inner<S: Signal>(u: &S, v: &S) -> Result<Complex64> {
    u.grid().check(v.grid())?;
    let (cu, cv) = (u.channels(), v.channels());
    if cu.len() != cv.len() {
        return Err(Error::LengthMismatch {
            expected: cu.len(),
            found: cv.len(),
        });
    }
    let grid = u.grid();
    let mut acc = ZERO;
    for (a, b) in cu.iter().zip(&cv) {
        let mut inner: Complex64 = a[1..a.len() - 1]
            .iter()
            .zip(&b[1..b.len() - 1])
            .map(|(x, y)| x * y.conj())
            .sum();
        let last = a.len() - 1;
        inner += 0.5 * (a[0] * b[0].conj() + a[last] * b[last].conj());
        acc += inner;
    }
    Ok(acc * grid.dt())
}

/// Second-order finite-difference derivative, one-sided at the endpoints.
pub fn differentiate<S: Signal>(u: &S) -> Result<S> {
    let grid = *u.grid();
    if grid.steps() < 3 {
        return Err(Error::GridTooCoarse {
            steps: grid.steps(),
            required: 3,
        });
    }
    let h = grid.dt();
    Ok(u.map_channels(|c| {
        let n = c.len();
        (0..n)
            .map(|j| {
                if j == 0 {
                    (-3.0 * c[0] + 4.0 * c[1] - c[2]) / (2.0 * h)
                } else if j == n - 1 {
                    (3.0 * c[n - 1] - 4.0 * c[n - 2] + c[n - 3]) / (2.0 * h)
                } else {
                    (c[j + 1] - c[j - 1]) / (2.0 * h)
                }
            })
            .collect()
    }))
}

/// `(‖u‖² + ‖u′‖²)^{1/2}` in `H¹(0, T; G)`.
pub fn h1_norm<S: Signal>(u: &S) -> Result<f64> {
    let du = differentiate(u)?;
    let a = l2_inner(u, u)?.re;
    let b = l2_inner(&du, &du)?.re;
    Ok((a + b).sqrt())
}
