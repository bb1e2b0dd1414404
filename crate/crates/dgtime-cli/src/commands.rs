//! The four subcommands: solve, convergence, benchmark, export-matrices.
//! Each validates and computes before touching the output directory, so a
//! rejected configuration leaves no partial files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dgtime::nalgebra::DVector;

use crate::config::{
    fingerprint, resolve_n_slabs, CondModeChoice, RunConfig, StudyKindChoice,
};
use crate::problem::resolve_problem;
use crate::CliError;
use dgtime::{
    assemble_slab_operators, assemble_slab_rhs, assemble_time_matrices, condition_estimate,
    convergence_study, energy_norm, gauss_rule, march, write_matrix_market,
    write_matrix_market_vector, ConditionMode, ReferenceBasis, StudyKind, StudyOptions, TimeMesh,
};

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("cannot create output directory {}: {e}", dir.display())))
}

fn write_file(path: &PathBuf, content: &[u8]) -> Result<(), CliError> {
    fs::write(path, content)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn build_mesh(config: &RunConfig) -> Result<TimeMesh, CliError> {
    let n = resolve_n_slabs(&config.time);
    TimeMesh::uniform(0.0, config.time.t_end, n, config.time.degree).map_err(CliError::from)
}

fn sample_times(t_end: f64, samples: usize) -> Vec<f64> {
    (0..samples)
        .map(|k| t_end * k as f64 / (samples - 1) as f64)
        .collect()
}

/// March the configured problem and emit `trajectory.csv`, `diagnostics.csv`,
/// and `energy.csv`.
pub fn cmd_solve(config: &RunConfig) -> Result<(), CliError> {
    let problem = resolve_problem(&config.problem)?;
    let mesh = build_mesh(config)?;
    let options = config.solver.to_options();
    let trajectory = march(
        &problem.system,
        &mesh,
        config.time.basis.to_kind(),
        &options,
    )
    .map_err(CliError::from)?;
    let breakdown = energy_norm(
        &trajectory,
        &problem.system,
        &mesh,
        mesh.max_degree() + 10,
    )
    .map_err(CliError::from)?;

    let fp = fingerprint(config);
    ensure_out_dir(&config.output.dir)?;

    let mut traj_csv = Vec::new();
    writeln!(traj_csv, "# config: {fp}").unwrap();
    trajectory
        .write_csv(
            &mut traj_csv,
            &sample_times(config.time.t_end, config.output.samples),
        )
        .map_err(CliError::from)?;
    write_file(&config.output.dir.join("trajectory.csv"), &traj_csv)?;

    let mut diag_csv = Vec::new();
    writeln!(diag_csv, "# config: {fp}").unwrap();
    writeln!(diag_csv, "slab,iterations,final_residual,wall_time_s").unwrap();
    for (n, d) in trajectory.diagnostics.iter().enumerate() {
        writeln!(
            diag_csv,
            "{},{},{:.16e},{:.6e}",
            n + 1,
            d.iterations,
            d.final_residual,
            d.wall_time_s
        )
        .unwrap();
    }
    write_file(&config.output.dir.join("diagnostics.csv"), &diag_csv)?;

    let mut energy_csv = Vec::new();
    breakdown
        .write_csv(&mut energy_csv, Some(&format!("config: {fp}")))
        .map_err(CliError::from)?;
    write_file(&config.output.dir.join("energy.csv"), &energy_csv)?;

    println!(
        "solved {} over {} slabs; |||z_DG||| = {:.6e}; outputs in {}",
        problem.label,
        mesh.num_slabs(),
        breakdown.norm(),
        config.output.dir.display()
    );
    Ok(())
}

/// Run the configured refinement study and emit one CSV per report.
pub fn cmd_convergence(config: &RunConfig) -> Result<(), CliError> {
    let study = config
        .study
        .as_ref()
        .ok_or_else(|| CliError::config("convergence needs a [study] table".into()))?;
    let problem = resolve_problem(&config.problem)?;
    let exact = problem.exact.as_ref().ok_or_else(|| {
        CliError::config(format!(
            "convergence studies need an exact solution; source {} has none",
            problem.label
        ))
    })?;

    let mut opts = StudyOptions::new(match study.kind {
        StudyKindChoice::DtRefinement => StudyKind::DtRefinement,
        StudyKindChoice::RRefinement => StudyKind::RRefinement,
    });
    opts.basis = config.time.basis.to_kind();
    opts.solver = config.solver.to_options();
    if matches!(config.problem.source, crate::config::ProblemSource::BuiltinWave1d) {
        // The wave reference is a nodal interpolant; its ODE residual is the
        // spatial truncation error rather than a data mistake.
        opts.consistency_tol = 1e-4;
    }

    let fp = fingerprint(config);
    let t_end = config.time.t_end;
    let mut outputs: Vec<(String, Vec<u8>)> = Vec::new();

    match study.kind {
        StudyKindChoice::DtRefinement => {
            let dt0 = config
                .time
                .dt
                .unwrap_or(t_end / resolve_n_slabs(&config.time) as f64);
            let degrees = study
                .degrees
                .clone()
                .unwrap_or_else(|| vec![config.time.degree]);
            for &r in &degrees {
                let meshes: Result<Vec<TimeMesh>, _> = (0..study.levels)
                    .map(|k| {
                        let dt = dt0 / (1u64 << k) as f64;
                        TimeMesh::uniform(0.0, t_end, (t_end / dt).round() as usize, r)
                    })
                    .collect();
                let report = convergence_study(&problem.system, exact, &meshes?, &opts)
                    .map_err(CliError::from)?;
                let mut csv = Vec::new();
                report
                    .write_csv(&mut csv, Some(&format!("degree={r} config: {fp}")))
                    .map_err(CliError::from)?;
                outputs.push((format!("convergence_r{r}.csv"), csv));
                println!(
                    "dt study at r = {r}: fitted rate {} (theoretical {:.2})",
                    report
                        .fitted_rate
                        .map(|f| format!("{f:.4}"))
                        .unwrap_or_else(|| "n/a".into()),
                    report.expected_rate
                );
            }
        }
        StudyKindChoice::RRefinement => {
            let dt = config
                .time
                .dt
                .unwrap_or(t_end / resolve_n_slabs(&config.time) as f64);
            let n = (t_end / dt).round().max(1.0) as usize;
            let meshes: Result<Vec<TimeMesh>, _> = (study.r_min..=study.r_max)
                .map(|r| TimeMesh::uniform(0.0, t_end, n, r))
                .collect();
            let report =
                convergence_study(&problem.system, exact, &meshes?, &opts).map_err(CliError::from)?;
            let mut csv = Vec::new();
            report
                .write_csv(&mut csv, Some(&format!("config: {fp}")))
                .map_err(CliError::from)?;
            outputs.push(("convergence_r_study.csv".into(), csv));
            println!(
                "r study over {}..{}: fitted log10 decrement {} per degree",
                study.r_min,
                study.r_max,
                report
                    .fitted_rate
                    .map(|f| format!("{f:.4}"))
                    .unwrap_or_else(|| "n/a".into())
            );
        }
    }

    ensure_out_dir(&config.output.dir)?;
    for (name, csv) in outputs {
        write_file(&config.output.dir.join(name), &csv)?;
    }
    Ok(())
}

/// Conditioning and iteration-count report for one slab of the configured
/// problem, written to `benchmark.csv`.
pub fn cmd_benchmark(config: &RunConfig, seed: u64) -> Result<(), CliError> {
    let problem = resolve_problem(&config.problem)?;
    let mesh = build_mesh(config)?;
    let r = config.time.degree;
    let dt = mesh.slab_length(0);
    let basis =
        ReferenceBasis::new(r, config.time.basis.to_kind()).map_err(CliError::from)?;
    let tm = assemble_time_matrices(&basis, dt).map_err(CliError::from)?;
    let ops = assemble_slab_operators(&problem.system, &tm).map_err(CliError::from)?;

    let mode = config.benchmark.clone().unwrap_or_default().mode;
    let full = |x: &DVector<f64>| ops.m_full_apply(x);
    let full_t = |x: &DVector<f64>| ops.m_full_apply_transpose(x);
    let hat = |x: &DVector<f64>| ops.m_hat_apply(x);
    let hat_t = |x: &DVector<f64>| ops.m_hat_apply_transpose(x);
    let (cond_full, cond_hat) = match mode {
        CondModeChoice::DenseExact => {
            let cf = condition_estimate(&full, None, ops.full_size(), ConditionMode::DenseExact)
                .map_err(CliError::from)?;
            let ch = condition_estimate(&hat, None, ops.hat_size(), ConditionMode::DenseExact)
                .map_err(CliError::from)?;
            (cf, ch)
        }
        CondModeChoice::Iterative => {
            let cf = condition_estimate(
                &full,
                Some(&full_t),
                ops.full_size(),
                ConditionMode::Iterative,
            )
            .map_err(CliError::from)?;
            let ch = condition_estimate(&hat, Some(&hat_t), ops.hat_size(), ConditionMode::Iterative)
                .map_err(CliError::from)?;
            (cf, ch)
        }
    };

    // Unpreconditioned GMRES at the configured tolerance, once on the
    // physical first-slab right-hand side and once on a seeded random one.
    let quad = gauss_rule(r + config.solver.forcing_quad_extra.max(1)).map_err(CliError::from)?;
    let z0 = problem.system.first_order_view().z0();
    let rhs = assemble_slab_rhs(&problem.system, &tm, &basis, &z0, mesh.slab(0), &quad)
        .map_err(CliError::from)?;
    let timer = Instant::now();
    let physical = dgtime::gmres::gmres(
        &hat,
        &rhs.g_hat,
        None,
        config.solver.tol,
        config.solver.max_iter,
        None,
    );
    let physical_time = timer.elapsed().as_secs_f64();

    // Simple deterministic xorshift fill for the random right-hand side.
    let mut state = seed ^ 0x9E3779B97F4A7C15;
    let random_rhs = DVector::from_fn(ops.hat_size(), |_, _| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    });
    let timer = Instant::now();
    let random = dgtime::gmres::gmres(
        &hat,
        &random_rhs,
        None,
        config.solver.tol,
        config.solver.max_iter,
        None,
    );
    let random_time = timer.elapsed().as_secs_f64();

    let fp = fingerprint(config);
    let mut csv = Vec::new();
    writeln!(csv, "# config: {fp} seed={seed}").unwrap();
    writeln!(csv, "metric,value").unwrap();
    writeln!(csv, "size_full,{}", ops.full_size()).unwrap();
    writeln!(csv, "size_hat,{}", ops.hat_size()).unwrap();
    writeln!(csv, "cond_m,{:.16e}", cond_full.value).unwrap();
    writeln!(csv, "cond_m_low_confidence,{}", cond_full.low_confidence).unwrap();
    writeln!(csv, "cond_mhat,{:.16e}", cond_hat.value).unwrap();
    writeln!(csv, "cond_mhat_low_confidence,{}", cond_hat.low_confidence).unwrap();
    writeln!(csv, "gmres_tol,{:.3e}", config.solver.tol).unwrap();
    writeln!(csv, "gmres_iterations_physical,{}", physical.iterations).unwrap();
    writeln!(csv, "gmres_residual_physical,{:.16e}", physical.residual).unwrap();
    writeln!(csv, "gmres_wall_time_physical_s,{physical_time:.6e}").unwrap();
    writeln!(csv, "gmres_iterations_random,{}", random.iterations).unwrap();
    writeln!(csv, "gmres_residual_random,{:.16e}", random.residual).unwrap();
    writeln!(csv, "gmres_wall_time_random_s,{random_time:.6e}").unwrap();

    ensure_out_dir(&config.output.dir)?;
    write_file(&config.output.dir.join("benchmark.csv"), &csv)?;
    println!(
        "benchmark: cond(M) = {:.3e}, cond(Mhat) = {:.3e}, GMRES iterations = {} (physical) / {} (random)",
        cond_full.value, cond_hat.value, physical.iterations, random.iterations
    );
    Ok(())
}

/// Write the resolved system matrices (and initial data) as Matrix Market
/// files.
pub fn cmd_export_matrices(config: &RunConfig) -> Result<(), CliError> {
    let problem = resolve_problem(&config.problem)?;
    ensure_out_dir(&config.output.dir)?;
    let dir = &config.output.dir;
    write_matrix_market(dir.join("P.mtx"), problem.system.p(), true).map_err(CliError::from)?;
    write_matrix_market(dir.join("L.mtx"), problem.system.l(), true).map_err(CliError::from)?;
    write_matrix_market(dir.join("K.mtx"), problem.system.k(), true).map_err(CliError::from)?;
    write_matrix_market_vector(dir.join("u0.mtx"), problem.system.u0()).map_err(CliError::from)?;
    write_matrix_market_vector(dir.join("u1.mtx"), problem.system.u1()).map_err(CliError::from)?;
    println!(
        "exported P, L, K, u0, u1 for {} (dim {}) to {}",
        problem.label,
        problem.system.dim(),
        dir.display()
    );
    Ok(())
}

