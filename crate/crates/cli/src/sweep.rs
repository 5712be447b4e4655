//! One-axis parameter sweeps producing an aggregate CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rayon::prelude::*;

use volterra::matrix::MatrixDescriptor;
use volterra::simplex::{PointFamily, PointLiteral};

use crate::config::{prepare, ExperimentConfig, Overrides, PreparedJob};
use crate::error::CliError;
use crate::runner::{evaluate, pool};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Axis {
    /// Seed support length of a `geometric` or `uniform` family.
    Truncation,
    /// Seed of every random matrix descriptor.
    Seed,
    MaxSteps,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Truncation => "truncation",
            Axis::Seed => "seed",
            Axis::MaxSteps => "max_steps",
        }
    }
}

fn reseed(desc: &mut MatrixDescriptor, value: u64) -> bool {
    match desc {
        MatrixDescriptor::Random { seed, .. } => {
            *seed = value;
            true
        }
        MatrixDescriptor::Tilde { b, .. } => reseed(b, value),
        MatrixDescriptor::Shifted { inner, .. } => reseed(inner, value),
        _ => false,
    }
}

/// The config with `axis = value` applied to every job.
pub fn apply_axis(
    config: &ExperimentConfig,
    axis: Axis,
    value: u64,
    overrides: Overrides,
) -> Result<(ExperimentConfig, Overrides), CliError> {
    let mut cfg = config.clone();
    let mut ov = overrides;
    for (j, job) in cfg.jobs.iter_mut().enumerate() {
        match axis {
            Axis::Truncation => match &mut job.x0 {
                PointLiteral::Family(PointFamily::Geometric { len }) => *len = value as usize,
                PointLiteral::Family(PointFamily::Uniform { to, .. }) => *to = value as usize,
                _ => {
                    return Err(CliError::config(
                        format!("jobs[{j}].x0"),
                        "truncation axis needs a geometric or uniform family seed",
                    ))
                }
            },
            Axis::Seed => {
                if !reseed(&mut job.matrix, value) {
                    return Err(CliError::config(
                        format!("jobs[{j}].matrix"),
                        "seed axis needs a random matrix descriptor",
                    ));
                }
            }
            Axis::MaxSteps => ov.max_steps = Some(value as usize),
        }
    }
    // per-job seed offsets would shift the swept seed
    if axis == Axis::Seed {
        cfg.global.seed_offset = 0;
    }
    Ok((cfg, ov))
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

struct Row {
    job: String,
    value: u64,
    cells: Vec<String>,
    phis: Vec<f64>,
}

fn evaluate_row(job: &PreparedJob, value: u64) -> Result<Row, CliError> {
    let report = evaluate(job)
        .map_err(|e| CliError::runtime(format!("job {} at value {value}: {e}", job.def.name)))?;
    let last = report.trajectory.last();
    let probe = job.budget.probe();
    let final_mass = last.mass();
    let escaped = final_mass - last.window_mass(probe);
    let ev = &report.omega.evidence;
    let vertex = match report.omega.verdict {
        volterra::Verdict::VertexLimit { index } => index.to_string(),
        _ => String::new(),
    };
    Ok(Row {
        job: job.def.name.clone(),
        value,
        cells: vec![
            report.omega.verdict.kind().to_string(),
            vertex,
            ev.steps.to_string(),
            fmt_f(ev.final_l1),
            fmt_f(ev.final_rho),
            job.def.record_steps.to_string(),
            fmt_f(final_mass),
            fmt_f(escaped),
        ],
        phis: report
            .functionals
            .iter()
            .map(|f| f.report.last_value)
            .collect(),
    })
}

/// Runs every job once per axis value and writes `sweep_<axis>.csv`.
/// Mass, escaped mass and φ columns refer to the last recorded step.
pub fn sweep(
    config: &ExperimentConfig,
    axis: Axis,
    values: &[u64],
    overrides: Overrides,
    out: &Path,
    threads: Option<usize>,
) -> Result<PathBuf, CliError> {
    if values.is_empty() {
        return Err(CliError::config("--values", "no sweep values"));
    }
    // validate every point of the sweep before running any
    let mut plan: Vec<(u64, PreparedJob)> = Vec::new();
    for &value in values {
        let (cfg, ov) = apply_axis(config, axis, value, overrides)?;
        let jobs = prepare(&cfg, ov).map_err(|e| match e {
            CliError::Config { path, message } => {
                CliError::config(path, format!("{} = {value}: {message}", axis.name()))
            }
            other => other,
        })?;
        plan.extend(jobs.into_iter().map(|j| (value, j)));
    }
    let rows: Vec<Result<Row, CliError>> =
        pool(threads)?.install(|| plan.par_iter().map(|(v, j)| evaluate_row(j, *v)).collect());
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;

    let n_phi = rows.iter().map(|r| r.phis.len()).max().unwrap_or(0);
    let mut csv = String::from("job,axis,value,verdict,vertex,steps,final_l1,final_rho,record_step,final_mass,escaped_mass");
    for f in 1..=n_phi {
        let _ = write!(csv, ",phi_{f}");
    }
    csv.push('\n');
    for r in &rows {
        let _ = write!(
            csv,
            "{},{},{},{}",
            r.job,
            axis.name(),
            r.value,
            r.cells.join(",")
        );
        for f in 0..n_phi {
            csv.push(',');
            if let Some(p) = r.phis.get(f) {
                csv.push_str(&fmt_f(*p));
            }
        }
        csv.push('\n');
    }
    fs::create_dir_all(out).map_err(|e| CliError::runtime(format!("{}: {e}", out.display())))?;
    let path = out.join(format!("sweep_{}.csv", axis.name()));
    fs::write(&path, csv).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    Ok(path)
}
