//! Run configuration: a single TOML file plus flag overrides (flags win).
//! Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::CliError;
use dgtime::{BasisKind, SolveMethod, SolverOptions};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub study: Option<StudyConfig>,
    #[serde(default)]
    pub benchmark: Option<BenchmarkConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub source: ProblemSource,
    #[serde(default)]
    pub wave1d: Option<Wave1dConfig>,
    #[serde(default)]
    pub matrix_market: Option<MatrixMarketConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemSource {
    #[serde(rename = "builtin-scalar")]
    BuiltinScalar,
    #[serde(rename = "builtin-wave1d")]
    BuiltinWave1d,
    #[serde(rename = "matrix-market")]
    MatrixMarket,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wave1dConfig {
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_n_elements")]
    pub n_elements: usize,
    #[serde(default = "default_one")]
    pub rho: f64,
    #[serde(default = "default_one")]
    pub mu: f64,
    #[serde(default = "default_one")]
    pub zeta: f64,
}

impl Default for Wave1dConfig {
    fn default() -> Self {
        Wave1dConfig {
            length: 1.0,
            n_elements: 200,
            rho: 1.0,
            mu: 1.0,
            zeta: 1.0,
        }
    }
}

fn default_length() -> f64 {
    1.0
}
fn default_n_elements() -> usize {
    200
}
fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixMarketConfig {
    pub p: PathBuf,
    pub l: PathBuf,
    pub k: PathBuf,
    #[serde(default)]
    pub u0: Option<PathBuf>,
    #[serde(default)]
    pub u1: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub n_slabs: Option<usize>,
    pub degree: usize,
    #[serde(default = "default_basis")]
    pub basis: BasisChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisChoice {
    #[serde(rename = "shifted-legendre")]
    ShiftedLegendre,
    #[serde(rename = "lagrange-gauss-lobatto")]
    LagrangeGaussLobatto,
}

fn default_basis() -> BasisChoice {
    BasisChoice::ShiftedLegendre
}

impl BasisChoice {
    pub fn to_kind(self) -> BasisKind {
        match self {
            BasisChoice::ShiftedLegendre => BasisKind::ShiftedLegendre,
            BasisChoice::LagrangeGaussLobatto => BasisKind::LagrangeGaussLobatto,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_method")]
    pub method: MethodChoice,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// 0 keeps GMRES unrestarted.
    #[serde(default)]
    pub restart: usize,
    #[serde(default)]
    pub extrapolate_guess: bool,
    #[serde(default = "default_quad_extra")]
    pub forcing_quad_extra: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: MethodChoice::Direct,
            tol: 1e-12,
            max_iter: 2000,
            restart: 0,
            extrapolate_guess: false,
            forcing_quad_extra: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MethodChoice {
    #[serde(rename = "direct")]
    Direct,
    #[serde(rename = "gmres")]
    Gmres,
}

fn default_method() -> MethodChoice {
    MethodChoice::Direct
}
fn default_tol() -> f64 {
    1e-12
}
fn default_max_iter() -> usize {
    2000
}
fn default_quad_extra() -> usize {
    5
}

impl SolverConfig {
    pub fn to_options(&self) -> SolverOptions {
        SolverOptions {
            method: match self.method {
                MethodChoice::Direct => SolveMethod::DirectDense,
                MethodChoice::Gmres => SolveMethod::Gmres,
            },
            gmres_rel_tol: self.tol,
            gmres_max_iter: self.max_iter,
            gmres_restart: if self.restart == 0 {
                None
            } else {
                Some(self.restart)
            },
            extrapolate_guess: self.extrapolate_guess,
            forcing_quad_extra: self.forcing_quad_extra,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub kind: StudyKindChoice,
    /// Number of halvings of `time.dt` for dt-refinement studies.
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Degrees to run dt-refinement studies for; defaults to `time.degree`.
    #[serde(default)]
    pub degrees: Option<Vec<usize>>,
    #[serde(default = "default_r_min")]
    pub r_min: usize,
    #[serde(default = "default_r_max")]
    pub r_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StudyKindChoice {
    #[serde(rename = "dt-refinement")]
    DtRefinement,
    #[serde(rename = "r-refinement")]
    RRefinement,
}

fn default_levels() -> usize {
    4
}
fn default_r_min() -> usize {
    1
}
fn default_r_max() -> usize {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    #[serde(default = "default_cond_mode")]
    pub mode: CondModeChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CondModeChoice {
    #[serde(rename = "dense-exact")]
    DenseExact,
    #[serde(rename = "iterative")]
    Iterative,
}

fn default_cond_mode() -> CondModeChoice {
    CondModeChoice::DenseExact
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            mode: CondModeChoice::DenseExact,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            samples: 101,
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_samples() -> usize {
    101
}

/// Flag overrides; flags win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub solver: Option<MethodChoice>,
    pub tol: Option<f64>,
    pub degree: Option<usize>,
    pub dt: Option<f64>,
    pub levels: Option<usize>,
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
    let mut config: RunConfig = toml::from_str(&text)
        .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;

    if let Some(out) = &overrides.out {
        config.output.dir = out.clone();
    }
    if let Some(method) = overrides.solver {
        config.solver.method = method;
    }
    if let Some(tol) = overrides.tol {
        config.solver.tol = tol;
    }
    if let Some(degree) = overrides.degree {
        config.time.degree = degree;
    }
    if let Some(dt) = overrides.dt {
        config.time.dt = Some(dt);
        config.time.n_slabs = None;
    }
    if let Some(levels) = overrides.levels {
        if let Some(study) = &mut config.study {
            study.levels = levels;
        }
    }
    validate(&config)?;
    Ok(config)
}

fn validate(config: &RunConfig) -> Result<(), CliError> {
    // Exactly one problem source: the sub-table must match the source tag.
    match config.problem.source {
        ProblemSource::BuiltinScalar => {
            if config.problem.wave1d.is_some() || config.problem.matrix_market.is_some() {
                return Err(CliError::config(
                    "builtin-scalar takes no wave1d or matrix_market tables".into(),
                ));
            }
        }
        ProblemSource::BuiltinWave1d => {
            if config.problem.matrix_market.is_some() {
                return Err(CliError::config(
                    "builtin-wave1d conflicts with a matrix_market table".into(),
                ));
            }
        }
        ProblemSource::MatrixMarket => {
            if config.problem.wave1d.is_some() {
                return Err(CliError::config(
                    "matrix-market conflicts with a wave1d table".into(),
                ));
            }
            if config.problem.matrix_market.is_none() {
                return Err(CliError::config(
                    "matrix-market source needs a [problem.matrix_market] table".into(),
                ));
            }
        }
    }

    let time = &config.time;
    if !(time.t_end > 0.0) {
        return Err(CliError::config(format!("t_end must be positive, got {}", time.t_end)));
    }
    match (time.dt, time.n_slabs) {
        (Some(dt), None) => {
            if !(dt > 0.0) {
                return Err(CliError::config(format!("dt must be positive, got {dt}")));
            }
            let ratio = time.t_end / dt;
            if (ratio - ratio.round()).abs() > 1e-8 * ratio.max(1.0) {
                return Err(CliError::config(format!(
                    "t_end = {} is not an integer multiple of dt = {dt}; use time.n_slabs instead",
                    time.t_end
                )));
            }
        }
        (None, Some(n)) => {
            if n == 0 {
                return Err(CliError::config("n_slabs must be at least 1".into()));
            }
        }
        (Some(_), Some(_)) => {
            return Err(CliError::config("set exactly one of time.dt and time.n_slabs".into()))
        }
        (None, None) => {
            return Err(CliError::config("set one of time.dt or time.n_slabs".into()))
        }
    }
    if time.degree > dgtime::MAX_DEGREE {
        return Err(CliError::config(format!(
            "degree {} exceeds the supported maximum {}",
            time.degree,
            dgtime::MAX_DEGREE
        )));
    }
    if !(config.solver.tol > 0.0) {
        return Err(CliError::config(format!(
            "solver tolerance must be positive, got {}",
            config.solver.tol
        )));
    }
    if config.solver.max_iter == 0 {
        return Err(CliError::config("solver max_iter must be at least 1".into()));
    }
    if let Some(study) = &config.study {
        match study.kind {
            StudyKindChoice::DtRefinement => {
                if study.levels < 3 {
                    return Err(CliError::config(format!(
                        "a refinement study needs at least 3 levels, got {}",
                        study.levels
                    )));
                }
            }
            StudyKindChoice::RRefinement => {
                if study.r_max < study.r_min || study.r_max - study.r_min + 1 < 3 {
                    return Err(CliError::config(format!(
                        "an r-refinement study needs at least 3 degrees, got {}..{}",
                        study.r_min, study.r_max
                    )));
                }
                if study.r_max > dgtime::MAX_DEGREE {
                    return Err(CliError::config(format!(
                        "r_max {} exceeds the supported maximum {}",
                        study.r_max,
                        dgtime::MAX_DEGREE
                    )));
                }
            }
        }
    }
    if config.output.samples < 2 {
        return Err(CliError::config("output.samples must be at least 2".into()));
    }
    Ok(())
}

/// The resolved configuration as a single-line fingerprint for CSV headers.
pub fn fingerprint(config: &RunConfig) -> String {
    serde_json::to_string(config).expect("config serializes")
}

/// Number of slabs implied by the time section.
pub fn resolve_n_slabs(time: &TimeConfig) -> usize {
    match (time.dt, time.n_slabs) {
        (Some(dt), None) => (time.t_end / dt).round().max(1.0) as usize,
        (None, Some(n)) => n,
        _ => unreachable!("validated"),
    }
}
