//! `visco-inverse <study> --config <path> [--out <path>] [--seed <int>]`
//!
//! Writes a CSV table to the output path and a JSON summary next to it
//! (same stem, `.json`). Exit codes: 0 success, 2 invalid input, 3 numerical
//! failure such as a singular Gram matrix.

mod config;
mod studies;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::Parser;
use serde_json::json;

use config::{ExperimentConfig, Study};
use studies::{Failure, StudyOutput};

#[derive(Parser, Debug)]
#[command(
    name = "visco-inverse",
    version,
    about = "Viscoelastic inverse source experiments"
)]
struct Cli {
    study: Study,
    #[arg(long)]
    config: PathBuf,
    /// CSV output path; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}

fn configure_threads() -> anyhow::Result<usize> {
    if let Ok(v) = std::env::var("VISCO_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("VISCO_THREADS must be a positive integer, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(rayon::current_num_threads())
}

/// Validation problems surface as `Err`; numerical ones as exit code 3.
fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let threads = configure_threads()?;
    let text = fs::read_to_string(&cli.config)
        .with_context(|| format!("cannot read config {}", cli.config.display()))?;
    let resolved = ExperimentConfig::parse(&text)?.resolve(cli.study, cli.seed, cli.out)?;
    let csv_path = resolved
        .effective
        .output
        .clone()
        .expect("resolved output path");
    let json_path = csv_path.with_extension("json");
    if csv_path == json_path {
        anyhow::bail!("output path must not end in .json");
    }
    for p in [&csv_path, &json_path] {
        if same_file(p, &cli.config) {
            anyhow::bail!("output {} would overwrite the config", p.display());
        }
    }
    // fail before the computation if the outputs cannot be written
    let csv_file = create(&csv_path)?;
    let json_file = create(&json_path)?;

    let started = Instant::now();
    let outcome = studies::run(&resolved);
    let elapsed = started.elapsed().as_secs_f64();
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut diagnostics = json!({
        "generated_at_unix": stamp,
        "elapsed_seconds": elapsed,
        "threads": threads,
        "csv": csv_path.display().to_string(),
    });

    let (output, failure) = match outcome {
        Ok(out) => {
            let failure = out.failure.clone();
            (Some(out), failure)
        }
        Err(Failure::Validation(msg)) => {
            let _ = fs::remove_file(&csv_path);
            let _ = fs::remove_file(&json_path);
            anyhow::bail!(msg)
        }
        Err(Failure::Numerical(msg)) => (None, Some(msg)),
    };
    if let Some(msg) = &failure {
        diagnostics["failure"] = json!(msg);
    }

    let results = match &output {
        Some(out) => {
            write_csv(csv_file, out).with_context(|| format!("writing {}", csv_path.display()))?;
            out.results.clone()
        }
        None => {
            drop(csv_file);
            let _ = fs::remove_file(&csv_path);
            json!(null)
        }
    };
    let summary = json!({
        "study": resolved.study.name(),
        "config": resolved.effective,
        "results": results,
        "diagnostics": diagnostics,
    });
    let mut w = BufWriter::new(json_file);
    serde_json::to_writer_pretty(&mut w, &summary)?;
    w.write_all(b"\n")?;
    w.flush()?;

    match failure {
        Some(msg) => {
            println!("{}: numerical failure: {msg}", resolved.study.name());
            Ok(ExitCode::from(EXIT_NUMERICAL))
        }
        None => {
            println!(
                "{}: ok, {} rows -> {} ({elapsed:.2}s)",
                resolved.study.name(),
                output.as_ref().map_or(0, |o| o.rows.len()),
                csv_path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn create(path: &Path) -> anyhow::Result<File> {
    File::create(path).with_context(|| format!("output path {} is not writable", path.display()))
}

fn write_csv(file: File, out: &StudyOutput) -> std::io::Result<()> {
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", out.header.join(","))?;
    for row in &out.rows {
        let cells: Vec<String> = row.iter().map(|c| c.render()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()
}
