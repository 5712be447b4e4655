//! Experiment configuration: schema, parsing and up-front validation.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use volterra::analysis::{Budget, Mode};
use volterra::lyapunov::{FunctionalDescriptor, LinearFunctional};
use volterra::matrix::{MatrixDescriptor, SkewMatrix};
use volterra::simplex::{PointLiteral, SimplexPoint};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub global: GlobalSettings,
    pub jobs: Vec<JobDef>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalSettings {
    /// Added to every random matrix seed.
    pub seed_offset: u64,
    pub tol_conv: Option<f64>,
    pub max_steps: Option<usize>,
    pub eps_mass: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobDef {
    pub name: String,
    pub matrix: MatrixDescriptor,
    pub x0: PointLiteral,
    #[serde(default)]
    pub functionals: Vec<FunctionalDescriptor>,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    /// Steps written to the trajectory CSV and fed to the functionals.
    #[serde(default = "default_record_steps")]
    pub record_steps: usize,
    #[serde(default)]
    pub outputs: OutputPaths,
}

fn default_record_steps() -> usize {
    100
}

fn default_mode() -> Mode {
    Mode::Norm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSettings {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    pub budget: Budget,
    /// Also compute Cesàro averages and an ergodicity verdict.
    pub ergodic: bool,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            mode: Mode::Norm,
            budget: Budget::default(),
            ergodic: false,
        }
    }
}

/// File names inside the job directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub trajectory: String,
    pub summary: String,
    pub verdict: String,
    pub monotonicity: String,
    pub ergodic: String,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            trajectory: "trajectory.csv".into(),
            summary: "trajectory.json".into(),
            verdict: "verdict.json".into(),
            monotonicity: "monotonicity.json".into(),
            ergodic: "ergodic.json".into(),
        }
    }
}

impl OutputPaths {
    fn all(&self) -> [&str; 5] {
        [
            &self.trajectory,
            &self.summary,
            &self.verdict,
            &self.monotonicity,
            &self.ergodic,
        ]
    }
}

/// Command-line tolerance overrides; they win over the global block.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub tol_conv: Option<f64>,
    pub max_steps: Option<usize>,
}

/// A job whose descriptors have all been built and checked.
#[derive(Debug, Clone)]
pub struct PreparedJob {
    pub def: JobDef,
    /// Descriptor after the seed offset was applied.
    pub descriptor: MatrixDescriptor,
    pub matrix: SkewMatrix,
    pub x0: SimplexPoint,
    pub functionals: Vec<LinearFunctional>,
    pub budget: Budget,
}

pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config {
            path,
            message: e.into_inner().to_string(),
        }
    })
}

pub fn load(path: &Path) -> Result<(ExperimentConfig, Vec<u8>), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok((parse(text)?, bytes))
}

fn offset_seeds(desc: &MatrixDescriptor, offset: u64) -> MatrixDescriptor {
    match desc {
        MatrixDescriptor::Random { seed, lo, hi } => MatrixDescriptor::Random {
            seed: seed.wrapping_add(offset),
            lo: *lo,
            hi: *hi,
        },
        MatrixDescriptor::Tilde { a, b } => MatrixDescriptor::Tilde {
            a: a.clone(),
            b: Box::new(offset_seeds(b, offset)),
        },
        MatrixDescriptor::Shifted { offset: o, inner } => MatrixDescriptor::Shifted {
            offset: *o,
            inner: Box::new(offset_seeds(inner, offset)),
        },
        other => other.clone(),
    }
}

fn valid_file_name(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Builds every descriptor of every job, so that nothing runs unless the
/// whole config is valid.
pub fn prepare(
    config: &ExperimentConfig,
    overrides: Overrides,
) -> Result<Vec<PreparedJob>, CliError> {
    if config.jobs.is_empty() {
        return Err(CliError::config("jobs", "no jobs defined"));
    }
    let mut names = BTreeSet::new();
    let mut out = Vec::with_capacity(config.jobs.len());
    for (j, def) in config.jobs.iter().enumerate() {
        let at = |field: &str| format!("jobs[{j}].{field}");
        if !valid_file_name(&def.name) {
            return Err(CliError::config(
                at("name"),
                format!("{:?} is not a usable directory name", def.name),
            ));
        }
        if !names.insert(def.name.as_str()) {
            return Err(CliError::config(
                at("name"),
                format!("duplicate job name {:?}", def.name),
            ));
        }
        for file in def.outputs.all() {
            if !valid_file_name(file) {
                return Err(CliError::config(
                    at("outputs"),
                    format!("{file:?} is not a plain file name"),
                ));
            }
        }
        let descriptor = offset_seeds(&def.matrix, config.global.seed_offset);
        let matrix = SkewMatrix::from_descriptor(&descriptor)
            .map_err(|e| CliError::config(at("matrix"), e))?;
        let x0 = def
            .x0
            .to_point()
            .map_err(|e| CliError::config(at("x0"), e))?;
        if !x0.is_on_simplex() {
            return Err(CliError::config(
                at("x0"),
                format!("mass {} is not 1", x0.mass()),
            ));
        }
        let functionals = def
            .functionals
            .iter()
            .enumerate()
            .map(|(f, d)| {
                LinearFunctional::from_descriptor(d)
                    .map_err(|e| CliError::config(at(&format!("functionals[{f}]")), e))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut budget = def.analysis.budget;
        if let Some(eps) = overrides.tol_conv.or(config.global.tol_conv) {
            budget.eps_conv = eps;
        }
        if let Some(n) = overrides.max_steps.or(config.global.max_steps) {
            budget.max_steps = n;
        }
        if let Some(eps) = config.global.eps_mass {
            budget.eps_mass = eps;
        }
        budget
            .validate()
            .map_err(|e| CliError::config(at("analysis.budget"), e))?;
        out.push(PreparedJob {
            def: def.clone(),
            descriptor,
            matrix,
            x0,
            functionals,
            budget: budget.resolved(),
        });
    }
    Ok(out)
}
