use std::path::PathBuf;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use visco_core::spectral_model::{Endpoint, OperatorSpec};
use visco_core::volterra_calculus::{
    KernelSpec, Modulation, ModulationForm, ScalarSignal, TimeGrid,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    Simulate,
    Reconstruct,
    FrameBounds,
    StabilityScan,
    ZestDecay,
    L2Counterexample,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Simulate => "simulate",
            Study::Reconstruct => "reconstruct",
            Study::FrameBounds => "frame-bounds",
            Study::StabilityScan => "stability-scan",
            Study::ZestDecay => "zest-decay",
            Study::L2Counterexample => "l2-counterexample",
        }
    }

    fn needs_sigma(self) -> bool {
        matches!(
            self,
            Study::Simulate | Study::Reconstruct | Study::StabilityScan | Study::L2Counterexample
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub length: f64,
    #[serde(default)]
    pub potential_shift: f64,
    #[serde(default = "default_endpoints")]
    pub observed_endpoints: Vec<Endpoint>,
}

fn default_endpoints() -> Vec<Endpoint> {
    vec![Endpoint::Left]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SigmaConfig {
    Constant {
        a: f64,
    },
    Exponential {
        a: f64,
    },
    Affine {
        a: f64,
        b: f64,
    },
    /// One value per grid node; `σ′` by finite differences.
    Sampled {
        values: Vec<f64>,
    },
}

impl Default for SigmaConfig {
    fn default() -> Self {
        SigmaConfig::Constant { a: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    /// `T/dt` must be an integer to within 1e-9.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

/// Which trace the reconstruction consumes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measurement {
    /// `Bu′` straight from the forward solver.
    #[default]
    Derivative,
    /// `Bu`, differentiated numerically.
    Trace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialDataConfig {
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
}

/// The configuration file as written by the user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operator: OperatorConfig,
    #[serde(default = "default_kernel")]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub sigma: SigmaConfig,
    pub grid: GridConfig,
    pub modes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<Study>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise_level: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Source coefficients; a seeded random unit vector when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_data: Option<InitialDataConfig>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub measurement: Measurement,
    /// Largest acceptable `‖(σ(0) + V_σ′*)θ_k − p_k‖ / ‖p_k‖`.
    #[serde(default = "default_residual_tolerance")]
    pub residual_tolerance: f64,
}

fn default_kernel() -> KernelSpec {
    KernelSpec::Zero
}

fn default_trials() -> usize {
    50
}

fn default_residual_tolerance() -> f64 {
    1e-4
}

/// Everything a study needs, validated.
pub struct Resolved {
    pub study: Study,
    pub spec: OperatorSpec,
    pub grid: TimeGrid,
    pub kernel: KernelSpec,
    pub modulation: Modulation,
    pub effective: ExperimentConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        serde_json::from_str(text).context("malformed configuration")
    }

    /// Applies command-line overrides and checks every field. The returned
    /// `effective` config has all defaults filled in.
    pub fn resolve(
        mut self,
        study: Study,
        seed: Option<u64>,
        out: Option<PathBuf>,
    ) -> anyhow::Result<Resolved> {
        if let Some(s) = self.study {
            if s != study {
                bail!(
                    "config names study '{}' but '{}' was requested",
                    s.name(),
                    study.name()
                );
            }
        }
        self.study = Some(study);
        if let Some(seed) = seed {
            self.seed = seed;
        }
        if let Some(out) = out {
            self.output = Some(out);
        }
        if self.output.is_none() {
            self.output = Some(PathBuf::from(format!("{}.csv", study.name())));
        }
        if self.modes < 1 {
            bail!("modes must be at least 1");
        }
        if self.noise_level.is_nan() || self.noise_level < 0.0 {
            bail!("noise_level must be non-negative, got {}", self.noise_level);
        }
        if self.trials < 1 {
            bail!("trials must be at least 1");
        }
        if self.residual_tolerance.is_nan() || self.residual_tolerance <= 0.0 {
            bail!("residual_tolerance must be positive");
        }

        let spec = OperatorSpec::new(
            self.operator.length,
            self.operator.potential_shift,
            &self.operator.observed_endpoints,
        )?;
        self.operator.observed_endpoints = spec.observed_endpoints().to_vec();

        let grid = match (self.grid.dt, self.grid.steps) {
            (Some(dt), None) => {
                if dt.is_nan() || dt <= 0.0 {
                    bail!("dt must be positive, got {dt}");
                }
                TimeGrid::with_exact_step(self.grid.horizon, dt)?
            }
            (None, Some(steps)) => TimeGrid::new(self.grid.horizon, steps)?,
            (Some(dt), Some(steps)) => {
                let grid = TimeGrid::new(self.grid.horizon, steps)?;
                if (grid.dt() - dt).abs() > 1e-9 * dt {
                    bail!("grid dt and steps disagree");
                }
                grid
            }
            (None, None) => bail!("grid needs dt or steps"),
        };
        self.grid.dt = Some(grid.dt());
        self.grid.steps = Some(grid.steps());

        if let KernelSpec::Sampled { values, .. } = &self.kernel {
            if values.len() != grid.len() {
                bail!(
                    "sampled kernel has {} values for {} grid nodes",
                    values.len(),
                    grid.len()
                );
            }
        }
        self.kernel.origin()?;

        let modulation = match &self.sigma {
            SigmaConfig::Constant { a } => {
                Modulation::closed_form(ModulationForm::Constant { a: *a }, grid)
            }
            SigmaConfig::Exponential { a } => {
                Modulation::closed_form(ModulationForm::Exponential { a: *a }, grid)
            }
            SigmaConfig::Affine { a, b } => {
                Modulation::closed_form(ModulationForm::Affine { a: *a, b: *b }, grid)
            }
            SigmaConfig::Sampled { values } => {
                Modulation::sampled(ScalarSignal::from_real(grid, values)?)?
            }
        };
        if study.needs_sigma() && modulation.origin().norm() == 0.0 {
            bail!("sigma(0) must be nonzero");
        }

        if let Some(source) = &self.source {
            if source.len() != self.modes {
                bail!(
                    "source has {} coefficients, expected {}",
                    source.len(),
                    self.modes
                );
            }
        }
        if let Some(data) = &self.initial_data {
            if data.xi.len() != self.modes || data.eta.len() != self.modes {
                bail!("initial data must have {} coefficients", self.modes);
            }
        }
        if study == Study::L2Counterexample && !self.kernel.is_zero() {
            bail!("l2-counterexample requires the zero kernel");
        }

        Ok(Resolved {
            study,
            spec,
            grid,
            kernel: self.kernel.clone(),
            modulation,
            effective: self,
        })
    }
}
