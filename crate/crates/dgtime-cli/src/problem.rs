//! Problem resolution: turn the configured source into a validated system
//! and, for the builtin cases, its exact solution.

use crate::config::{ProblemConfig, ProblemSource, Wave1dConfig};
use crate::CliError;
use dgtime::{
    assemble_wave_1d, build_system, manufactured_case, read_matrix_market, scalar_exact_solution,
    scalar_test_system, ExactSolution, Forcing, ManufacturedChoice, SecondOrderSystem,
    DEFAULT_SPARSE_THRESHOLD,
};
use dgtime::nalgebra::DVector;

pub struct ResolvedProblem {
    pub system: SecondOrderSystem,
    pub exact: Option<ExactSolution>,
    pub label: String,
}

pub fn resolve_problem(problem: &ProblemConfig) -> Result<ResolvedProblem, CliError> {
    match problem.source {
        ProblemSource::BuiltinScalar => Ok(ResolvedProblem {
            system: scalar_test_system(),
            exact: Some(scalar_exact_solution()),
            label: "builtin-scalar".into(),
        }),
        ProblemSource::BuiltinWave1d => {
            let w = problem.wave1d.clone().unwrap_or_default();
            let Wave1dConfig {
                length,
                n_elements,
                rho,
                mu,
                zeta,
            } = w;
            let model = dgtime::WaveModel1D::new(length, n_elements, rho, mu, zeta)
                .map_err(CliError::from)?;
            let mats = assemble_wave_1d(&model).map_err(CliError::from)?;
            let case = manufactured_case(&model, ManufacturedChoice::DecayingSine);
            let system = case.build_system(&mats).map_err(CliError::from)?;
            let exact = case.exact_solution(&mats).map_err(CliError::from)?;
            Ok(ResolvedProblem {
                system,
                exact: Some(exact),
                label: format!("builtin-wave1d(n={n_elements})"),
            })
        }
        ProblemSource::MatrixMarket => {
            let mm = problem.matrix_market.as_ref().expect("validated");
            let load = |path: &std::path::Path, what: &str| {
                read_matrix_market(path).map_err(|e| {
                    CliError::from(e).with_context(format!("loading {what} from {}", path.display()))
                })
            };
            let p = load(&mm.p, "P")?
                .to_sym_matrix(DEFAULT_SPARSE_THRESHOLD)
                .map_err(|e| CliError::from(e).with_context(format!("matrix P ({})", mm.p.display())))?;
            let l = load(&mm.l, "L")?
                .to_sym_matrix(DEFAULT_SPARSE_THRESHOLD)
                .map_err(|e| CliError::from(e).with_context(format!("matrix L ({})", mm.l.display())))?;
            let k = load(&mm.k, "K")?
                .to_sym_matrix(DEFAULT_SPARSE_THRESHOLD)
                .map_err(|e| CliError::from(e).with_context(format!("matrix K ({})", mm.k.display())))?;
            let d = p.dim();
            let vector = |path: &Option<std::path::PathBuf>, what: &str| -> Result<DVector<f64>, CliError> {
                match path {
                    Some(pth) => {
                        let v = load(pth, what)?
                            .to_vector()
                            .map_err(|e| CliError::from(e).with_context(format!("vector {what} ({})", pth.display())))?;
                        Ok(v)
                    }
                    None => Ok(DVector::zeros(d)),
                }
            };
            let u0 = vector(&mm.u0, "u0")?;
            let u1 = vector(&mm.u1, "u1")?;
            let mismatch: Option<(String, usize)> = if l.dim() != d {
                Some((mm.l.display().to_string(), l.dim()))
            } else if k.dim() != d {
                Some((mm.k.display().to_string(), k.dim()))
            } else if u0.len() != d {
                Some((mm.u0.as_ref().unwrap().display().to_string(), u0.len()))
            } else if u1.len() != d {
                Some((mm.u1.as_ref().unwrap().display().to_string(), u1.len()))
            } else {
                None
            };
            if let Some((file, dim)) = mismatch {
                return Err(CliError::config(format!(
                    "dimension mismatch: {file} has dimension {dim} but P ({}) has dimension {d}",
                    mm.p.display()
                )));
            }
            let system =
                build_system(p, l, k, Forcing::Zero, u0, u1).map_err(CliError::from)?;
            Ok(ResolvedProblem {
                system,
                exact: None,
                label: "matrix-market".into(),
            })
        }
    }
}
