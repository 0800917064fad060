use serde_json::{json, Value};
use visco_core::forward_solver::{
    boundary_trace_homogeneous, boundary_trace_source, verify_convolution_relation, InitialData,
    SourceCoefficients,
};
use visco_core::inverse_source::{
    l2_only_counterexample, noisy_reconstruction, prepare_kernels, random_source, stability_scan,
};
use visco_core::modal_ode::zest_defect;
use visco_core::riesz_frame::{frame_bounds, gram, z_family, FrameBounds, SINGULAR_GRAM_THRESHOLD};
use visco_core::spectral_model::{build_spectral_model, Endpoint, SpectralModel};
use visco_core::volterra_calculus::{differentiate, h1_norm, TraceSignal};
use visco_core::Error;

use crate::config::{Measurement, Resolved, Study};

pub enum Failure {
    /// Bad input: exit code 2.
    Validation(String),
    /// The computation itself broke down: exit code 3.
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SingularGram { .. } | Error::NotHermitian(_) | Error::SingularStep(_) => {
                Failure::Numerical(e.to_string())
            }
            _ => Failure::Validation(e.to_string()),
        }
    }
}

/// A CSV table plus the scalar results for the JSON summary. A study that
/// detects a numerical failure still returns its data, with `failure` set.
pub struct StudyOutput {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub results: Value,
    pub failure: Option<String>,
}

pub enum Cell {
    Int(i64),
    Real(f64),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format!("{v:e}"),
        }
    }
}

fn real(v: f64) -> Cell {
    Cell::Real(v)
}

pub fn run(cfg: &Resolved) -> Result<StudyOutput, Failure> {
    let model = build_spectral_model(cfg.spec.clone(), cfg.effective.modes)?;
    match cfg.study {
        Study::Simulate => simulate(cfg, &model),
        Study::Reconstruct => reconstruct(cfg, &model),
        Study::FrameBounds => frame_bounds_study(cfg, &model),
        Study::StabilityScan => stability(cfg, &model),
        Study::ZestDecay => zest(cfg, &model),
        Study::L2Counterexample => counterexample(cfg, &model),
    }
}

fn source(cfg: &Resolved) -> SourceCoefficients {
    match &cfg.effective.source {
        Some(v) => SourceCoefficients::new(v.clone()),
        None => random_source(cfg.effective.modes, cfg.effective.seed, 0),
    }
}

fn endpoint_name(e: Endpoint) -> &'static str {
    match e {
        Endpoint::Left => "left",
        Endpoint::Right => "right",
    }
}

fn bounds_json(b: &FrameBounds) -> Value {
    json!({
        "lower": b.lower,
        "upper": b.upper,
        "condition": b.condition(),
        "members": b.members,
    })
}

fn simulate(cfg: &Resolved, model: &SpectralModel) -> Result<StudyOutput, Failure> {
    let f = source(cfg);
    let (bu, bu_prime) = boundary_trace_source(&f, &cfg.modulation, model, &cfg.kernel, &cfg.grid)?;
    let bw = match &cfg.effective.initial_data {
        Some(d) => {
            let data = InitialData {
                xi: d.xi.clone(),
                eta: d.eta.clone(),
            };
            Some(boundary_trace_homogeneous(
                &data,
                model,
                &cfg.kernel,
                &cfg.grid,
            )?)
        }
        None => None,
    };
    let relation = verify_convolution_relation(&f, &cfg.modulation, model, &cfg.kernel, &cfg.grid)?;

    let names: Vec<&str> = model
        .spec
        .observed_endpoints()
        .iter()
        .map(|&e| endpoint_name(e))
        .collect();
    let mut header = vec!["t".to_string()];
    let mut series: Vec<&TraceSignal> = vec![&bu, &bu_prime];
    let mut prefixes = vec!["bu", "bu_prime"];
    if let Some(bw) = &bw {
        series.push(bw);
        prefixes.push("bw");
    }
    for p in &prefixes {
        for n in &names {
            header.push(format!("{p}_{n}"));
        }
    }
    let rows = (0..cfg.grid.len())
        .map(|j| {
            let mut row = vec![real(cfg.grid.node(j))];
            for s in &series {
                for k in 0..s.dim() {
                    row.push(real(s.channel(k)[j].re));
                }
            }
            row
        })
        .collect();
    let max_imag = series.iter().map(|s| s.max_abs_imag()).fold(0.0, f64::max);
    Ok(StudyOutput {
        header,
        rows,
        results: json!({
            "source": f.values,
            "bu_h1_norm": h1_norm(&bu)?,
            "bu_prime_l2_norm": bu_prime.l2_norm(),
            "convolution_relation_defect": relation,
            "max_imag": max_imag,
        }),
        failure: None,
    })
}

fn reconstruct(cfg: &Resolved, model: &SpectralModel) -> Result<StudyOutput, Failure> {
    let truth = source(cfg);
    let kernels = prepare_kernels(model, &cfg.kernel, &cfg.modulation, &cfg.grid)?;
    let p_min = kernels
        .duals
        .duals
        .iter()
        .map(|p| p.l2_norm())
        .fold(f64::INFINITY, f64::min);
    let relative_residual = kernels.residual / p_min;
    let (bu, bu_prime) =
        boundary_trace_source(&truth, &cfg.modulation, model, &cfg.kernel, &cfg.grid)?;
    let trace = match cfg.effective.measurement {
        Measurement::Derivative => bu_prime,
        Measurement::Trace => differentiate(&bu)?,
    };
    let report = noisy_reconstruction(
        &trace,
        cfg.effective.noise_level,
        cfg.effective.seed,
        &kernels,
        model,
        Some(&truth),
    )?;
    let rows = (0..truth.len())
        .map(|k| {
            vec![
                Cell::Int(k as i64 + 1),
                real(truth.values[k]),
                real(report.recovered.values[k]),
                real(report.per_mode_error[k]),
            ]
        })
        .collect();
    let failure = (relative_residual > cfg.effective.residual_tolerance).then(|| {
        format!(
            "resolvent residual {relative_residual:e} exceeds tolerance {:e}",
            cfg.effective.residual_tolerance
        )
    });
    Ok(StudyOutput {
        header: ["k", "truth", "recovered", "abs_error"]
            .map(String::from)
            .to_vec(),
        rows,
        results: json!({
            "recovered": report.recovered.values,
            "relative_l2_error": report.relative_l2_error,
            "max_imag": report.max_imag,
            "noise_level": report.noise_level,
            "frame_bounds": bounds_json(&report.frame_bounds_used),
            "theta_residual": kernels.residual,
            "theta_relative_residual": relative_residual,
        }),
        failure,
    })
}

fn frame_bounds_study(cfg: &Resolved, model: &SpectralModel) -> Result<StudyOutput, Failure> {
    let family = z_family(model, &cfg.kernel, &cfg.grid)?;
    let g = gram(&family)?;
    let eigenvalues = g.eigenvalues()?;
    let bounds = frame_bounds(&g)?;
    let threshold = model.spec.observability_threshold();
    let failure = bounds.is_singular().then(|| {
        format!(
            "singular Gram: min eigenvalue {:e} <= {SINGULAR_GRAM_THRESHOLD:e} x max {:e}",
            bounds.lower, bounds.upper
        )
    });
    Ok(StudyOutput {
        header: ["index", "eigenvalue"].map(String::from).to_vec(),
        rows: eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &v)| vec![Cell::Int(i as i64 + 1), real(v)])
            .collect(),
        results: json!({
            "frame_bounds": bounds_json(&bounds),
            "horizon": cfg.grid.horizon(),
            "observability_threshold": threshold,
            "above_threshold": cfg.grid.horizon() > threshold,
        }),
        failure,
    })
}

fn stability(cfg: &Resolved, model: &SpectralModel) -> Result<StudyOutput, Failure> {
    let threshold = model.spec.observability_threshold();
    if cfg.grid.horizon() <= threshold {
        return Err(Failure::Validation(format!(
            "stability-scan needs T > {threshold}, got {}",
            cfg.grid.horizon()
        )));
    }
    let scan = stability_scan(
        model,
        &cfg.kernel,
        &cfg.modulation,
        &cfg.grid,
        cfg.effective.trials,
        cfg.effective.seed,
    )?;
    Ok(StudyOutput {
        header: ["trial", "ratio"].map(String::from).to_vec(),
        rows: scan
            .ratios
            .iter()
            .enumerate()
            .map(|(i, &r)| vec![Cell::Int(i as i64), real(r)])
            .collect(),
        results: json!({ "min": scan.min, "max": scan.max, "trials": scan.ratios.len() }),
        failure: None,
    })
}

fn zest(cfg: &Resolved, model: &SpectralModel) -> Result<StudyOutput, Failure> {
    use rayon::prelude::*;
    let modes: Vec<_> = model
        .positive_modes()
        .iter()
        .filter(|m| !m.is_stationary())
        .collect();
    let defects = modes
        .par_iter()
        .map(|m| zest_defect(m, &cfg.kernel, &cfg.grid))
        .collect::<Result<Vec<f64>, Error>>()?;
    let max = defects.iter().copied().fold(0.0, f64::max);
    Ok(StudyOutput {
        header: ["n", "lambda", "defect"].map(String::from).to_vec(),
        rows: modes
            .iter()
            .zip(&defects)
            .map(|(m, &d)| vec![Cell::Int(m.index), real(m.lambda.norm()), real(d)])
            .collect(),
        results: json!({
            "gamma": cfg.kernel.origin()? / 2.0,
            "max_defect": max,
            "skipped_stationary": model.truncation() - modes.len(),
        }),
        failure: None,
    })
}

fn counterexample(cfg: &Resolved, model: &SpectralModel) -> Result<StudyOutput, Failure> {
    let rows = l2_only_counterexample(model, &cfg.modulation, &cfg.grid, model.truncation())?;
    let last = rows.last().map(|r| r.min_gram_eigenvalue);
    Ok(StudyOutput {
        header: ["n", "lambda", "scaled_norm", "min_gram_eigenvalue"]
            .map(String::from)
            .to_vec(),
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    Cell::Int(r.n as i64),
                    real(r.lambda),
                    real(r.scaled_norm),
                    real(r.min_gram_eigenvalue),
                ]
            })
            .collect(),
        results: json!({
            "scaled_norm_min": rows.iter().map(|r| r.scaled_norm).fold(f64::INFINITY, f64::min),
            "scaled_norm_max": rows.iter().map(|r| r.scaled_norm).fold(0.0, f64::max),
            "min_gram_eigenvalue_first": rows[0].min_gram_eigenvalue,
            "min_gram_eigenvalue_last": last,
        }),
        failure: None,
    })
}
