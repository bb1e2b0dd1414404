//! Slab-by-slab time marching. Each slab is solved through the reduced
//! velocity system `Mhat W = Ghat` (dense LU or unpreconditioned GMRES)
//! followed by the local displacement update; the right trace of one slab
//! feeds the next.

use nalgebra::{DMatrix, DVector, Dyn};
use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use crate::basis::{gauss_rule, BasisKind, ReferenceBasis};
use crate::error::{Error, Result};
use crate::gmres::gmres;
use crate::mesh::{Side, TimeMesh};
use crate::slab::{assemble_slab_operators, assemble_slab_rhs, SlabOperators, SlabRhs};
use crate::system::SecondOrderSystem;
use crate::timemat::{assemble_time_matrices, TimeMatrixSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Materialize `Mhat` and factor it with dense LU. On uniform meshes the
    /// factorization is shared across slabs.
    DirectDense,
    /// Matrix-free unpreconditioned GMRES.
    Gmres,
}

/// Options controlling the per-slab solves.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub method: SolveMethod,
    /// GMRES convergence threshold on `|b - Ax| / |b|`.
    pub gmres_rel_tol: f64,
    pub gmres_max_iter: usize,
    /// `None` keeps the Krylov basis unrestarted.
    pub gmres_restart: Option<usize>,
    /// Seed slab `n > 1` GMRES with the previous terminal velocity held
    /// constant in time. Never changes the solution; disable for cold-start
    /// iteration counts.
    pub extrapolate_guess: bool,
    /// Forcing integrals use a Gauss rule with `degree + forcing_quad_extra`
    /// nodes, keeping quadrature error below discretization error.
    pub forcing_quad_extra: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: SolveMethod::DirectDense,
            gmres_rel_tol: 1e-12,
            gmres_max_iter: 2000,
            gmres_restart: None,
            extrapolate_guess: true,
            forcing_quad_extra: 5,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.gmres_rel_tol > 0.0) {
            return Err(Error::Config(format!(
                "GMRES tolerance must be positive, got {}",
                self.gmres_rel_tol
            )));
        }
        if self.gmres_max_iter < 1 {
            return Err(Error::Config("GMRES needs at least one iteration".into()));
        }
        if self.gmres_restart == Some(0) {
            return Err(Error::Config("GMRES restart length must be at least 1".into()));
        }
        Ok(())
    }

    /// Effective relative accuracy of the slab solves, used for floor
    /// detection in convergence studies.
    pub fn effective_tolerance(&self) -> f64 {
        match self.method {
            SolveMethod::DirectDense => 1e-14,
            SolveMethod::Gmres => self.gmres_rel_tol,
        }
    }
}

/// Per-slab solver record.
#[derive(Debug, Clone)]
pub struct SlabDiagnostics {
    pub iterations: usize,
    pub final_residual: f64,
    pub residual_history: Vec<f64>,
    pub wall_time_s: f64,
}

/// Polynomial solution on one slab: `d x (r + 1)` coefficient arrays for
/// displacement and velocity in the assembly basis.
#[derive(Debug, Clone)]
pub struct SlabSolution {
    pub coeffs_u: DMatrix<f64>,
    pub coeffs_w: DMatrix<f64>,
    pub t_start: f64,
    pub t_end: f64,
    basis: Arc<ReferenceBasis>,
}

impl SlabSolution {
    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn basis(&self) -> &ReferenceBasis {
        &self.basis
    }

    /// Evaluate `(u, w)` at reference coordinate `tau` in `[0, 1]`.
    pub fn eval_at_tau(&self, tau: f64) -> (DVector<f64>, DVector<f64>) {
        let vals = self.basis.values_at(tau);
        (&self.coeffs_u * &vals, &self.coeffs_w * &vals)
    }

    /// Time derivatives `(u', w')` at reference coordinate `tau`.
    pub fn deriv_at_tau(&self, tau: f64) -> (DVector<f64>, DVector<f64>) {
        let dt = self.t_end - self.t_start;
        let ders = self.basis.derivs_at(tau) / dt;
        (&self.coeffs_u * &ders, &self.coeffs_w * &ders)
    }

    /// Stacked `z = [u, w]` at reference coordinate `tau`.
    pub fn state_at_tau(&self, tau: f64) -> DVector<f64> {
        let (u, w) = self.eval_at_tau(tau);
        stack(&u, &w)
    }
}

fn stack(u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let d = u.len();
    let mut z = DVector::zeros(2 * d);
    z.rows_mut(0, d).copy_from(u);
    z.rows_mut(d, d).copy_from(w);
    z
}

/// The discontinuous-in-time solution across all slabs, with one-sided
/// evaluation at the slab boundaries. Evaluation inside slab `n` uses only
/// slab `n`'s coefficients; nothing is averaged at the nodes.
#[derive(Debug, Clone)]
pub struct Trajectory {
    slabs: Vec<SlabSolution>,
    pub diagnostics: Vec<SlabDiagnostics>,
    mesh: TimeMesh,
}

impl Trajectory {
    /// Build a discrete function in the trial space from raw per-slab
    /// coefficients (`d x (r_n + 1)` pairs for u and w).
    pub fn from_coefficients(
        mesh: &TimeMesh,
        kind: BasisKind,
        coeffs: Vec<(DMatrix<f64>, DMatrix<f64>)>,
    ) -> Result<Self> {
        if coeffs.len() != mesh.num_slabs() {
            return Err(Error::Validation(format!(
                "{} coefficient pairs for {} slabs",
                coeffs.len(),
                mesh.num_slabs()
            )));
        }
        let d = coeffs[0].0.nrows();
        let mut bases: HashMap<usize, Arc<ReferenceBasis>> = HashMap::new();
        let mut slabs = Vec::with_capacity(coeffs.len());
        for (n, (cu, cw)) in coeffs.into_iter().enumerate() {
            let modes = mesh.degree(n) + 1;
            if cu.nrows() != d || cw.nrows() != d || cu.ncols() != modes || cw.ncols() != modes {
                return Err(Error::Validation(format!(
                    "slab {} coefficients have shape {}x{} / {}x{}, expected {d}x{modes}",
                    n + 1,
                    cu.nrows(),
                    cu.ncols(),
                    cw.nrows(),
                    cw.ncols()
                )));
            }
            let basis = match bases.entry(mesh.degree(n)) {
                std::collections::hash_map::Entry::Occupied(e) => e.get().clone(),
                std::collections::hash_map::Entry::Vacant(e) => {
                    let b = Arc::new(ReferenceBasis::new(mesh.degree(n), kind)?);
                    e.insert(b.clone());
                    b
                }
            };
            let (t0, t1) = mesh.slab(n);
            slabs.push(SlabSolution {
                coeffs_u: cu,
                coeffs_w: cw,
                t_start: t0,
                t_end: t1,
                basis,
            });
        }
        Ok(Trajectory {
            slabs,
            diagnostics: Vec::new(),
            mesh: mesh.clone(),
        })
    }

    pub fn mesh(&self) -> &TimeMesh {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.slabs[0].coeffs_u.nrows()
    }

    pub fn num_slabs(&self) -> usize {
        self.slabs.len()
    }

    pub fn slab(&self, n: usize) -> &SlabSolution {
        &self.slabs[n]
    }

    /// One-sided evaluation `(u, w)` at `t`; the side matters only at slab
    /// boundaries.
    pub fn evaluate(&self, t: f64, side: Side) -> Result<(DVector<f64>, DVector<f64>)> {
        let (n, tau) = self.mesh.locate(t, side)?;
        Ok(self.slabs[n].eval_at_tau(tau))
    }

    /// One-sided time derivatives `(u', w')` at `t`.
    pub fn evaluate_deriv(&self, t: f64, side: Side) -> Result<(DVector<f64>, DVector<f64>)> {
        let (n, tau) = self.mesh.locate(t, side)?;
        Ok(self.slabs[n].deriv_at_tau(tau))
    }

    /// Jump `[z]_n = z(t_n^+) - z(t_n^-)` at interior node `n` (1-based,
    /// `1 <= n <= N - 1`).
    pub fn jump(&self, n: usize) -> Result<DVector<f64>> {
        if n == 0 || n >= self.num_slabs() {
            return Err(Error::Range(format!(
                "jump index {n} outside the interior nodes 1..{}",
                self.num_slabs().saturating_sub(1)
            )));
        }
        let right = self.slabs[n].state_at_tau(0.0);
        let left = self.slabs[n - 1].state_at_tau(1.0);
        Ok(right - left)
    }

    /// The terminal trace `z(t_N^-)`.
    pub fn final_state(&self) -> DVector<f64> {
        self.slabs.last().unwrap().state_at_tau(1.0)
    }

    /// Write sampled states as CSV with columns `t,side,u_1..u_d,w_1..w_d`.
    /// Samples landing on an interior slab boundary produce two rows (left
    /// and right limits); other samples produce one row with side `-`.
    pub fn write_csv<W: Write>(&self, out: &mut W, times: &[f64]) -> Result<()> {
        let d = self.dim();
        write!(out, "t,side")?;
        for i in 1..=d {
            write!(out, ",u_{i}")?;
        }
        for i in 1..=d {
            write!(out, ",w_{i}")?;
        }
        writeln!(out)?;

        let span = self.mesh.end() - self.mesh.start();
        let tol = 1e-12 * span.abs().max(1.0);
        for &t in times {
            let boundary = self
                .mesh
                .boundaries()
                .iter()
                .position(|&b| (t - b).abs() <= tol);
            let sides: Vec<(&str, Side)> = match boundary {
                Some(0) => vec![("right", Side::Right)],
                Some(k) if k == self.num_slabs() => vec![("left", Side::Left)],
                Some(_) => vec![("left", Side::Left), ("right", Side::Right)],
                None => vec![("-", Side::Left)],
            };
            for (label, side) in sides {
                let (u, w) = self.evaluate(t, side)?;
                write!(out, "{t:.16e},{label}")?;
                for v in u.iter().chain(w.iter()) {
                    write!(out, ",{v:.16e}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// Solve one slab: `W` from `Mhat W = Ghat` to the requested tolerance, then
/// `U = (I (x) N5) W + (I (x) N4) Gbar_u`.
pub fn solve_slab(
    ops: &SlabOperators<'_>,
    rhs: &SlabRhs,
    basis: &Arc<ReferenceBasis>,
    slab: (f64, f64),
    options: &SolverOptions,
) -> Result<(SlabSolution, SlabDiagnostics)> {
    options.validate()?;
    solve_slab_inner(ops, rhs, basis, slab, options, None, &mut None)
}

type LuFactor = nalgebra::linalg::LU<f64, Dyn, Dyn>;
type LuCache = HashMap<(usize, u64), Arc<LuFactor>>;

fn solve_slab_inner(
    ops: &SlabOperators<'_>,
    rhs: &SlabRhs,
    basis: &Arc<ReferenceBasis>,
    slab: (f64, f64),
    options: &SolverOptions,
    guess: Option<&DVector<f64>>,
    lu_cache: &mut Option<&mut LuCache>,
) -> Result<(SlabSolution, SlabDiagnostics)> {
    let start = Instant::now();
    let d = ops.dim();
    let modes = ops.time_mats().modes();

    let (w, iterations, final_residual, residual_history) = match options.method {
        SolveMethod::DirectDense => {
            let factor = cached_lu(ops, lu_cache)?;
            let w = factor.solve(&rhs.g_hat).ok_or_else(|| {
                Error::solver("dense factorization of Mhat is singular", None)
            })?;
            let scale = rhs.g_hat.norm();
            let res = if scale > 0.0 {
                (ops.m_hat_apply(&w) - &rhs.g_hat).norm() / scale
            } else {
                0.0
            };
            (w, 0usize, res, Vec::new())
        }
        SolveMethod::Gmres => {
            let apply = |x: &DVector<f64>| ops.m_hat_apply(x);
            let out = gmres(
                &apply,
                &rhs.g_hat,
                guess,
                options.gmres_rel_tol,
                options.gmres_max_iter,
                options.gmres_restart,
            );
            if !out.converged {
                return Err(Error::Solver {
                    message: format!(
                        "GMRES did not converge within {} iterations (relative residual {:.3e})",
                        options.gmres_max_iter, out.residual
                    ),
                    relative_residual: Some(out.residual),
                });
            }
            (out.x, out.iterations, out.residual, out.history)
        }
    };

    let u = ops.displacement_update(&w, rhs);
    let reshape = |v: &DVector<f64>| DMatrix::from_fn(d, modes, |i, m| v[i * modes + m]);
    let solution = SlabSolution {
        coeffs_u: reshape(&u),
        coeffs_w: reshape(&w),
        t_start: slab.0,
        t_end: slab.1,
        basis: basis.clone(),
    };
    let diag = SlabDiagnostics {
        iterations,
        final_residual,
        residual_history,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((solution, diag))
}

fn cached_lu(ops: &SlabOperators<'_>, cache: &mut Option<&mut LuCache>) -> Result<Arc<LuFactor>> {
    let key = (ops.degree(), ops.time_mats().slab_length.to_bits());
    if let Some(cache) = cache {
        if let Some(f) = cache.get(&key) {
            return Ok(f.clone());
        }
        let f = Arc::new(ops.m_hat_dense()?.lu());
        cache.insert(key, f.clone());
        Ok(f)
    } else {
        Ok(Arc::new(ops.m_hat_dense()?.lu()))
    }
}

/// March across the whole mesh: slab `n` takes its incoming trace from slab
/// `n - 1` (the initial data for the first slab) and the trajectory is
/// assembled in order.
pub fn march(
    system: &SecondOrderSystem,
    mesh: &TimeMesh,
    kind: BasisKind,
    options: &SolverOptions,
) -> Result<Trajectory> {
    options.validate()?;
    if let Some((lo, hi)) = system.forcing().sample_span() {
        if mesh.start() < lo - 1e-12 || mesh.end() > hi + 1e-12 {
            return Err(Error::Config(format!(
                "sampled forcing covers [{lo}, {hi}] but the mesh spans [{}, {}]",
                mesh.start(),
                mesh.end()
            )));
        }
    }

    let mut bases: HashMap<usize, Arc<ReferenceBasis>> = HashMap::new();
    let mut tms: HashMap<(usize, u64), Arc<TimeMatrixSet>> = HashMap::new();
    let mut lus: LuCache = HashMap::new();

    let view = system.first_order_view();
    let mut z_minus = view.z0();
    let mut slabs = Vec::with_capacity(mesh.num_slabs());
    let mut diagnostics = Vec::with_capacity(mesh.num_slabs());

    for n in 0..mesh.num_slabs() {
        let annotate = |e: Error| match e {
            Error::Solver {
                message,
                relative_residual,
            } => Error::Solver {
                message: format!("slab {}: {message}", n + 1),
                relative_residual,
            },
            other => other,
        };

        let r = mesh.degree(n);
        let (t0, t1) = mesh.slab(n);
        let dt = t1 - t0;

        let basis = match bases.entry(r) {
            std::collections::hash_map::Entry::Occupied(e) => e.get().clone(),
            std::collections::hash_map::Entry::Vacant(e) => {
                let b = Arc::new(ReferenceBasis::new(r, kind)?);
                e.insert(b.clone());
                b
            }
        };
        let tm = match tms.entry((r, dt.to_bits())) {
            std::collections::hash_map::Entry::Occupied(e) => e.get().clone(),
            std::collections::hash_map::Entry::Vacant(e) => {
                let t = Arc::new(assemble_time_matrices(&basis, dt)?);
                e.insert(t.clone());
                t
            }
        };

        let ops = assemble_slab_operators(system, &tm)?;
        let quad = gauss_rule((r + options.forcing_quad_extra).max(r + 1))?;
        let rhs = assemble_slab_rhs(system, &tm, &basis, &z_minus, (t0, t1), &quad)?;

        let guess = if options.extrapolate_guess && n > 0 && options.method == SolveMethod::Gmres {
            let d = system.dim();
            let w_minus = z_minus.rows(d, d).into_owned();
            let cc = basis.constant_coefficients();
            let modes = r + 1;
            Some(DVector::from_fn(d * modes, |idx, _| {
                w_minus[idx / modes] * cc[idx % modes]
            }))
        } else {
            None
        };

        let (solution, diag) = solve_slab_inner(
            &ops,
            &rhs,
            &basis,
            (t0, t1),
            options,
            guess.as_ref(),
            &mut Some(&mut lus),
        )
        .map_err(annotate)?;

        z_minus = solution.state_at_tau(1.0);
        slabs.push(solution);
        diagnostics.push(diag);
    }

    Ok(Trajectory {
        slabs,
        diagnostics,
        mesh: mesh.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::scalar_test_system;
    use approx::assert_relative_eq;

    fn scalar_slab1() -> (f64, f64) {
        // Hand-solved first slab of the scalar problem with r = 0, dt = 0.25:
        // W1 = -8 / 2.625, U1 = 0.25 W1 + 2.
        let w = -8.0 / 2.625;
        (w, 0.25 * w + 2.0)
    }

    #[test]
    fn scalar_slab_one_hand_values_direct_and_gmres() {
        let sys = scalar_test_system();
        let basis = Arc::new(ReferenceBasis::new(0, BasisKind::ShiftedLegendre).unwrap());
        let tm = assemble_time_matrices(&basis, 0.25).unwrap();
        let ops = assemble_slab_operators(&sys, &tm).unwrap();
        let quad = gauss_rule(5).unwrap();
        let z0 = sys.first_order_view().z0();
        let rhs = assemble_slab_rhs(&sys, &tm, &basis, &z0, (0.0, 0.25), &quad).unwrap();

        let (w_expect, u_expect) = scalar_slab1();
        for method in [SolveMethod::DirectDense, SolveMethod::Gmres] {
            let options = SolverOptions {
                method,
                ..Default::default()
            };
            let (sol, _) = solve_slab(&ops, &rhs, &basis, (0.0, 0.25), &options).unwrap();
            assert_relative_eq!(sol.coeffs_w[(0, 0)], w_expect, max_relative = 1e-12);
            assert_relative_eq!(sol.coeffs_u[(0, 0)], u_expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_rhs_solves_in_zero_iterations() {
        let sys = scalar_test_system();
        let basis = Arc::new(ReferenceBasis::new(2, BasisKind::ShiftedLegendre).unwrap());
        let tm = assemble_time_matrices(&basis, 0.5).unwrap();
        let ops = assemble_slab_operators(&sys, &tm).unwrap();
        let quad = gauss_rule(7).unwrap();
        let rhs =
            assemble_slab_rhs(&sys, &tm, &basis, &DVector::zeros(2), (0.0, 0.5), &quad).unwrap();
        let options = SolverOptions {
            method: SolveMethod::Gmres,
            ..Default::default()
        };
        let (sol, diag) = solve_slab(&ops, &rhs, &basis, (0.0, 0.5), &options).unwrap();
        assert_eq!(diag.iterations, 0);
        assert_eq!(sol.coeffs_u.amax(), 0.0);
        assert_eq!(sol.coeffs_w.amax(), 0.0);
    }

    #[test]
    fn direct_and_gmres_agree_on_a_generic_slab() {
        let sys = scalar_test_system();
        let basis = Arc::new(ReferenceBasis::new(4, BasisKind::ShiftedLegendre).unwrap());
        let tm = assemble_time_matrices(&basis, 0.3).unwrap();
        let ops = assemble_slab_operators(&sys, &tm).unwrap();
        let quad = gauss_rule(9).unwrap();
        let z0 = sys.first_order_view().z0();
        let rhs = assemble_slab_rhs(&sys, &tm, &basis, &z0, (0.0, 0.3), &quad).unwrap();

        let direct = solve_slab(&ops, &rhs, &basis, (0.0, 0.3), &SolverOptions::default())
            .unwrap()
            .0;
        let options = SolverOptions {
            method: SolveMethod::Gmres,
            ..Default::default()
        };
        let its = solve_slab(&ops, &rhs, &basis, (0.0, 0.3), &options).unwrap().0;
        let scale = direct.coeffs_u.amax().max(direct.coeffs_w.amax());
        assert!((&direct.coeffs_u - &its.coeffs_u).amax() <= 1e-9 * scale);
        assert!((&direct.coeffs_w - &its.coeffs_w).amax() <= 1e-9 * scale);
    }

    #[test]
    fn zero_data_marches_to_zero() {
        let sys = crate::system::build_system(
            crate::linalg::SymMatrix::identity(3),
            crate::linalg::SymMatrix::zeros(3),
            crate::linalg::SymMatrix::identity(3),
            crate::system::Forcing::Zero,
            DVector::zeros(3),
            DVector::zeros(3),
        )
        .unwrap();
        let mesh = TimeMesh::uniform(0.0, 1.0, 5, 2).unwrap();
        let traj = march(&sys, &mesh, BasisKind::ShiftedLegendre, &SolverOptions::default()).unwrap();
        for t in [0.0, 0.31, 0.77, 1.0] {
            let side = if t == 0.0 { Side::Right } else { Side::Left };
            let (u, w) = traj.evaluate(t, side).unwrap();
            assert_eq!(u.amax(), 0.0);
            assert_eq!(w.amax(), 0.0);
        }
    }

    #[test]
    fn scalar_march_tracks_the_exact_solution() {
        let sys = scalar_test_system();
        let mesh = TimeMesh::uniform(0.0, 2.0, 40, 3).unwrap();
        let traj = march(&sys, &mesh, BasisKind::ShiftedLegendre, &SolverOptions::default()).unwrap();
        for t in [0.5, 1.0, 1.7] {
            let (u, w) = traj.evaluate(t, Side::Left).unwrap();
            let exact_u = (-3.0 * t).exp() + (-2.0 * t).exp();
            let exact_w = -3.0 * (-3.0 * t).exp() - 2.0 * (-2.0 * t).exp();
            assert_relative_eq!(u[0], exact_u, max_relative = 1e-7);
            assert_relative_eq!(w[0], exact_w, max_relative = 1e-6);
        }
    }

    #[test]
    fn evaluation_sides_and_jumps() {
        let sys = scalar_test_system();
        let mesh = TimeMesh::uniform(0.0, 1.0, 4, 1).unwrap();
        let traj = march(&sys, &mesh, BasisKind::ShiftedLegendre, &SolverOptions::default()).unwrap();

        // Interior point: both sides equal.
        let a = traj.evaluate(0.6, Side::Left).unwrap();
        let b = traj.evaluate(0.6, Side::Right).unwrap();
        assert_eq!(a.0, b.0);

        // Interior node: difference equals the stored jump.
        let left = traj.evaluate(0.25, Side::Left).unwrap();
        let right = traj.evaluate(0.25, Side::Right).unwrap();
        let jump = traj.jump(1).unwrap();
        assert_relative_eq!(jump[0], right.0[0] - left.0[0], epsilon = 1e-15);
        assert_relative_eq!(jump[1], right.1[0] - left.1[0], epsilon = 1e-15);

        // Domain limits.
        assert!(traj.evaluate(-0.1, Side::Left).is_err());
        assert!(traj.evaluate(0.0, Side::Left).is_err());
        assert!(traj.evaluate(1.0, Side::Right).is_err());
        assert!(traj.evaluate(0.0, Side::Right).is_ok());
        assert!(traj.evaluate(1.0, Side::Left).is_ok());
    }

    #[test]
    fn csv_export_emits_two_rows_at_interior_boundaries() {
        let sys = scalar_test_system();
        let mesh = TimeMesh::uniform(0.0, 1.0, 2, 1).unwrap();
        let traj = march(&sys, &mesh, BasisKind::ShiftedLegendre, &SolverOptions::default()).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf, &[0.0, 0.25, 0.5, 1.0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,side,u_1,w_1");
        // 1 (t=0 right) + 1 (interior) + 2 (boundary) + 1 (t=1 left) rows.
        assert_eq!(lines.len(), 1 + 1 + 1 + 2 + 1);
        assert!(lines.iter().filter(|l| l.contains(",left,")).count() == 2);
    }

    #[test]
    fn gmres_nonconvergence_is_annotated_with_slab_index() {
        let sys = scalar_test_system();
        let mesh = TimeMesh::uniform(0.0, 1.0, 2, 3).unwrap();
        let options = SolverOptions {
            method: SolveMethod::Gmres,
            gmres_max_iter: 1,
            gmres_rel_tol: 1e-15,
            ..Default::default()
        };
        let err = march(&sys, &mesh, BasisKind::ShiftedLegendre, &options).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("slab 1"), "{msg}");
    }
}
