//! Job evaluation and artifact writing.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use volterra::analysis::{
    ergodicity_verdict, estimate_omega, Budget, ErgodicReport, Evidence, Mode, OmegaEstimate,
    Verdict,
};
use volterra::lyapunov::{
    admissibility, monotonicity_report, Admissibility, FunctionalDescriptor, MonotonicityReport,
    Trend,
};
use volterra::matrix::{MatrixClass, MatrixDescriptor};
use volterra::operator::{Trajectory, VolterraOperator};
use volterra::simplex::SimplexPoint;

use crate::config::PreparedJob;
use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct FunctionalRecord {
    pub descriptor: FunctionalDescriptor,
    pub admissibility: Admissibility,
    /// Trend guaranteed by the admissibility conditions, if any.
    pub predicted: Option<Trend>,
    pub report: MonotonicityReport,
    pub agrees: Option<bool>,
}

/// Everything computed for one job, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct JobReport {
    pub name: String,
    pub class: MatrixClass,
    pub trajectory: Trajectory,
    pub omega: OmegaEstimate,
    pub functionals: Vec<FunctionalRecord>,
    pub ergodic: Option<ErgodicReport>,
}

#[derive(Serialize)]
struct VerdictRecord<'a> {
    matrix_descriptor: &'a MatrixDescriptor,
    class: &'a MatrixClass,
    x0: &'a SimplexPoint,
    mode: Mode,
    verdict: &'a Verdict,
    evidence: &'a Evidence,
    budget: &'a Budget,
}

pub fn evaluate(job: &PreparedJob) -> volterra::Result<JobReport> {
    let v = VolterraOperator::new(job.matrix.clone());
    let class = v.class_hint().clone();
    let trajectory = v.iterate(&job.x0, job.def.record_steps)?;
    let omega = estimate_omega(&v, &job.x0, job.def.analysis.mode, &job.budget)?;
    let scan = class.scan_dim.max(job.x0.dim()).max(2);
    let functionals = job
        .functionals
        .iter()
        .zip(&job.def.functionals)
        .map(|(f, d)| {
            let adm = admissibility(f, &job.matrix, scan)?;
            let predicted = adm.predicted_trend();
            let report = monotonicity_report(f, &trajectory);
            Ok(FunctionalRecord {
                descriptor: d.clone(),
                agrees: predicted.map(|t| report.verdict.agrees_with(t)),
                admissibility: adm,
                predicted,
                report,
            })
        })
        .collect::<volterra::Result<Vec<_>>>()?;
    let ergodic = if job.def.analysis.ergodic {
        Some(ergodicity_verdict(&v, &job.x0, &job.budget)?)
    } else {
        None
    };
    Ok(JobReport {
        name: job.def.name.clone(),
        class,
        trajectory,
        omega,
        functionals,
        ergodic,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()
}

/// Writes the job artifacts into `dir`, returning the file names.
pub fn write_artifacts(
    job: &PreparedJob,
    report: &JobReport,
    dir: &Path,
) -> io::Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let names = &job.def.outputs;
    let mut files = Vec::new();

    let mut csv = BufWriter::new(fs::File::create(dir.join(&names.trajectory))?);
    report.trajectory.write_csv(&mut csv)?;
    csv.flush()?;
    files.push(names.trajectory.clone());

    write_json(&dir.join(&names.summary), &report.trajectory.summary())?;
    files.push(names.summary.clone());

    let record = VerdictRecord {
        matrix_descriptor: &job.descriptor,
        class: &report.class,
        x0: &job.x0,
        mode: report.omega.mode,
        verdict: &report.omega.verdict,
        evidence: &report.omega.evidence,
        budget: &job.budget,
    };
    write_json(&dir.join(&names.verdict), &record)?;
    files.push(names.verdict.clone());

    write_json(&dir.join(&names.monotonicity), &report.functionals)?;
    files.push(names.monotonicity.clone());

    if let Some(erg) = &report.ergodic {
        write_json(&dir.join(&names.ergodic), erg)?;
        files.push(names.ergodic.clone());
    }
    Ok(files)
}

/// Short human-readable verdict, e.g. `vertex_limit(8)`.
pub fn verdict_label(v: &Verdict) -> String {
    match v {
        Verdict::VertexLimit { index } => format!("vertex_limit({index})"),
        Verdict::PointOnSphere { r, .. } => format!("point_on_sphere(r={r:.6})"),
        other => other.kind().to_string(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JobEntry {
    pub name: String,
    pub status: &'static str,
    pub verdict: Option<String>,
    pub error: Option<String>,
    pub wall_ms: f64,
    pub files: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: String,
    config_sha256: String,
    jobs: &'a [JobEntry],
}

pub struct RunOptions {
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub quiet: bool,
}

pub fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(CliError::runtime)
}

fn run_one(job: &PreparedJob, out: &Path) -> JobEntry {
    let start = Instant::now();
    let result = evaluate(job).map_err(|e| e.to_string()).and_then(|report| {
        let files = write_artifacts(job, &report, &out.join(&job.def.name))
            .map_err(|e| format!("writing artifacts: {e}"))?;
        Ok((report, files))
    });
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    match result {
        Ok((report, files)) => JobEntry {
            name: job.def.name.clone(),
            status: "ok",
            verdict: Some(verdict_label(&report.omega.verdict)),
            error: None,
            wall_ms,
            files,
        },
        Err(e) => JobEntry {
            name: job.def.name.clone(),
            status: "error",
            verdict: None,
            error: Some(e),
            wall_ms,
            files: Vec::new(),
        },
    }
}

/// Runs every job on a worker pool, writes per-job artifacts and, last,
/// the manifest. Failed jobs do not stop the others.
pub fn run(
    jobs: &[PreparedJob],
    config_path: &Path,
    config_bytes: &[u8],
    opts: &RunOptions,
) -> Result<Vec<JobEntry>, CliError> {
    fs::create_dir_all(&opts.out)
        .map_err(|e| CliError::runtime(format!("{}: {e}", opts.out.display())))?;
    let entries: Vec<JobEntry> =
        pool(opts.threads)?.install(|| jobs.par_iter().map(|j| run_one(j, &opts.out)).collect());

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: config_path.display().to_string(),
        config_sha256: format!("{:x}", Sha256::digest(config_bytes)),
        jobs: &entries,
    };
    write_json(&opts.out.join("manifest.json"), &manifest)
        .map_err(|e| CliError::runtime(format!("manifest: {e}")))?;

    if !opts.quiet {
        for e in &entries {
            match (&e.verdict, &e.error) {
                (Some(v), _) => println!("{:<24} {v} ({:.1} ms)", e.name, e.wall_ms),
                (_, Some(err)) => println!("{:<24} failed: {err}", e.name),
                _ => {}
            }
        }
    }
    Ok(entries)
}

/// Per-job status table for failed runs.
pub fn error_table(entries: &[JobEntry]) -> String {
    let mut s = format!("{:<24} {:<7} detail\n", "job", "status");
    for e in entries {
        let detail = e
            .error
            .clone()
            .or_else(|| e.verdict.clone())
            .unwrap_or_default();
        s.push_str(&format!("{:<24} {:<7} {detail}\n", e.name, e.status));
    }
    s
}
