//! Per-slab operators and right-hand sides.
//!
//! The monolithic slab matrix is `M = Kt (x) (N1 + N3) + A (x) N2` acting on
//! stacked `[U, W]` coefficients. Block Gaussian elimination of the
//! displacement block leaves the velocity system with
//! `Mhat = P (x) (N1 + N3) + L (x) N2 + K (x) N7` and
//! `Ghat = G_w - (I (x) N6) G_u`, after which
//! `U = (I (x) N5) W + (I (x) N4) Gbar_u`.
//!
//! Coefficient vectors are laid out with the time index fastest: the entry
//! for spatial dof `i` and time mode `l` sits at position `i * (r + 1) + l`.
//! This is the single normative layout used everywhere in the crate.

use nalgebra::{DMatrix, DVector};

use crate::basis::{QuadratureRule, ReferenceBasis};
use crate::error::{Error, Result};
use crate::linalg::{kron_apply, kron_apply_time, kron_dense};
use crate::system::SecondOrderSystem;
use crate::timemat::TimeMatrixSet;

/// Largest operator size that may be materialized as a dense matrix (for
/// direct solves, Schur-complement checks, and condition numbers).
pub const DENSE_MATERIALIZE_CAP: usize = 2000;

/// Matrix-free actions of the slab matrices `M` and `Mhat`.
#[derive(Debug, Clone, Copy)]
pub struct SlabOperators<'a> {
    system: &'a SecondOrderSystem,
    time_mats: &'a TimeMatrixSet,
}

/// Build the slab operators; nothing above `d * (r + 1)` is ever materialized
/// unless a dense variant is explicitly requested.
pub fn assemble_slab_operators<'a>(
    system: &'a SecondOrderSystem,
    time_mats: &'a TimeMatrixSet,
) -> Result<SlabOperators<'a>> {
    if system.dim() == 0 {
        return Err(Error::Assembly("system has dimension zero".into()));
    }
    Ok(SlabOperators { system, time_mats })
}

impl<'a> SlabOperators<'a> {
    pub fn system(&self) -> &'a SecondOrderSystem {
        self.system
    }

    pub fn time_mats(&self) -> &'a TimeMatrixSet {
        self.time_mats
    }

    pub fn degree(&self) -> usize {
        self.time_mats.degree()
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// Size of the reduced (velocity) system, `d (r + 1)`.
    pub fn hat_size(&self) -> usize {
        self.dim() * self.time_mats.modes()
    }

    /// Size of the monolithic system, `2 d (r + 1)`.
    pub fn full_size(&self) -> usize {
        2 * self.hat_size()
    }

    /// `Mhat x = [P (x) (N1+N3) + L (x) N2 + K (x) N7] x`.
    pub fn m_hat_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.hat_size());
        let tm = self.time_mats;
        let left = tm.left_matrix();
        let mut y = kron_apply(self.system.p(), &left, x);
        if !self.system.l().is_zero() {
            y += kron_apply(self.system.l(), &tm.n2, x);
        }
        y += kron_apply(self.system.k(), &tm.n7, x);
        y
    }

    /// Transpose action of `Mhat` (P, L, K are symmetric, so only the time
    /// factors transpose). Used by iterative condition estimation.
    pub fn m_hat_apply_transpose(&self, x: &DVector<f64>) -> DVector<f64> {
        let tm = self.time_mats;
        let left_t = tm.left_matrix().transpose();
        let mut y = kron_apply(self.system.p(), &left_t, x);
        if !self.system.l().is_zero() {
            y += kron_apply(self.system.l(), &tm.n2.transpose(), x);
        }
        y += kron_apply(self.system.k(), &tm.n7.transpose(), x);
        y
    }

    /// `M z` on stacked `[U, W]` coefficients:
    /// top block `K (x) (N1+N3) U - K (x) N2 W`,
    /// bottom block `K (x) N2 U + [P (x) (N1+N3) + L (x) N2] W`.
    pub fn m_full_apply(&self, z: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(z.len(), self.full_size());
        let hs = self.hat_size();
        let tm = self.time_mats;
        let left = tm.left_matrix();
        let u = z.rows(0, hs).into_owned();
        let w = z.rows(hs, hs).into_owned();

        let mut top = kron_apply(self.system.k(), &left, &u);
        top -= kron_apply(self.system.k(), &tm.n2, &w);

        let mut bottom = kron_apply(self.system.k(), &tm.n2, &u);
        bottom += kron_apply(self.system.p(), &left, &w);
        if !self.system.l().is_zero() {
            bottom += kron_apply(self.system.l(), &tm.n2, &w);
        }

        let mut out = DVector::zeros(2 * hs);
        out.rows_mut(0, hs).copy_from(&top);
        out.rows_mut(hs, hs).copy_from(&bottom);
        out
    }

    pub fn m_full_apply_transpose(&self, z: &DVector<f64>) -> DVector<f64> {
        let hs = self.hat_size();
        let tm = self.time_mats;
        let left_t = tm.left_matrix().transpose();
        let n2_t = tm.n2.transpose();
        let u = z.rows(0, hs).into_owned();
        let w = z.rows(hs, hs).into_owned();

        // M' = [[ (K (x) B)',  (K (x) N2)'], [-(K (x) N2)', ...]] with the
        // space factors symmetric.
        let mut top = kron_apply(self.system.k(), &left_t, &u);
        top += kron_apply(self.system.k(), &n2_t, &w);

        let mut bottom = -kron_apply(self.system.k(), &n2_t, &u);
        bottom += kron_apply(self.system.p(), &left_t, &w);
        if !self.system.l().is_zero() {
            bottom += kron_apply(self.system.l(), &n2_t, &w);
        }

        let mut out = DVector::zeros(2 * hs);
        out.rows_mut(0, hs).copy_from(&top);
        out.rows_mut(hs, hs).copy_from(&bottom);
        out
    }

    /// Dense `Mhat`, for direct solves and conditioning reports.
    pub fn m_hat_dense(&self) -> Result<DMatrix<f64>> {
        let n = self.hat_size();
        if n > DENSE_MATERIALIZE_CAP {
            return Err(Error::Config(format!(
                "reduced system size {n} exceeds the dense cap {DENSE_MATERIALIZE_CAP}; use the gmres solver or iterative condition mode"
            )));
        }
        let tm = self.time_mats;
        let left = tm.left_matrix();
        let p = self.system.p().to_dense();
        let k = self.system.k().to_dense();
        let mut m = kron_dense(&p, &left) + kron_dense(&k, &tm.n7);
        if !self.system.l().is_zero() {
            m += kron_dense(&self.system.l().to_dense(), &tm.n2);
        }
        Ok(m)
    }

    /// Dense monolithic `M`.
    pub fn m_full_dense(&self) -> Result<DMatrix<f64>> {
        let n = self.full_size();
        if n > DENSE_MATERIALIZE_CAP {
            return Err(Error::Config(format!(
                "monolithic system size {n} exceeds the dense cap {DENSE_MATERIALIZE_CAP}"
            )));
        }
        let hs = self.hat_size();
        let tm = self.time_mats;
        let left = tm.left_matrix();
        let p = self.system.p().to_dense();
        let k = self.system.k().to_dense();
        let l = self.system.l().to_dense();

        let mut m = DMatrix::zeros(n, n);
        m.view_mut((0, 0), (hs, hs)).copy_from(&kron_dense(&k, &left));
        m.view_mut((0, hs), (hs, hs))
            .copy_from(&(-kron_dense(&k, &tm.n2)));
        m.view_mut((hs, 0), (hs, hs)).copy_from(&kron_dense(&k, &tm.n2));
        let mut lower_right = kron_dense(&p, &left);
        lower_right += kron_dense(&l, &tm.n2);
        m.view_mut((hs, hs), (hs, hs)).copy_from(&lower_right);
        Ok(m)
    }

    /// Displacement update of the K-free form:
    /// `U = (I (x) N5) W + (I (x) N4) Gbar_u`.
    pub fn displacement_update(&self, w: &DVector<f64>, rhs: &SlabRhs) -> DVector<f64> {
        let d = self.dim();
        let tm = self.time_mats;
        kron_apply_time(&tm.n5, w, d) + kron_apply_time(&tm.n4, &rhs.g_u_bar, d)
    }

    /// Displacement update in the K-inverse form:
    /// `U = (I (x) N5) W + (K^{-1} (x) N4) G_u`. Uses the cached Cholesky
    /// factor of K; exists to cross-check the K-free form.
    pub fn displacement_update_kinv(&self, w: &DVector<f64>, rhs: &SlabRhs) -> DVector<f64> {
        let d = self.dim();
        let modes = self.time_mats.modes();
        let tm = self.time_mats;
        let mut u = kron_apply_time(&tm.n5, w, d);
        // (K^{-1} (x) N4) G_u: time transform first, then K solves per mode.
        let staged = kron_apply_time(&tm.n4, &rhs.g_u, d);
        // Gather mode slices into d-vectors for the spatial solve.
        for l in 0..modes {
            let col = DVector::from_fn(d, |i, _| staged[i * modes + l]);
            let solved = self.system.k_solve(&col);
            for i in 0..d {
                u[i * modes + l] += solved[i];
            }
        }
        u
    }
}

/// Right-hand side blocks for one slab.
#[derive(Debug, Clone)]
pub struct SlabRhs {
    /// Displacement block of `G`: `(K u^-)_i psi^l(0)` plus any u-forcing (none here).
    pub g_u: DVector<f64>,
    /// Velocity block of `G`: forcing integrals plus `(P w^-)_i psi^l(0)`.
    pub g_w: DVector<f64>,
    /// K-free variant of the displacement block: `u^-_i psi^l(0)`.
    pub g_u_bar: DVector<f64>,
    /// Reduced right-hand side `G_w - (I (x) N6) G_u`.
    pub g_hat: DVector<f64>,
}

impl SlabRhs {
    /// Stacked `[G_u, G_w]` for monolithic solves.
    pub fn full(&self) -> DVector<f64> {
        let hs = self.g_u.len();
        let mut g = DVector::zeros(2 * hs);
        g.rows_mut(0, hs).copy_from(&self.g_u);
        g.rows_mut(hs, hs).copy_from(&self.g_w);
        g
    }
}

/// Assemble the slab right-hand side from the incoming trace
/// `z_minus = z(t_{n-1}^-)` (the initial state for the first slab) and the
/// forcing integrated with `quad` mapped onto the slab.
pub fn assemble_slab_rhs(
    system: &SecondOrderSystem,
    time_mats: &TimeMatrixSet,
    basis: &ReferenceBasis,
    z_minus: &DVector<f64>,
    slab: (f64, f64),
    quad: &QuadratureRule,
) -> Result<SlabRhs> {
    let d = system.dim();
    let modes = time_mats.modes();
    if basis.degree() != time_mats.degree() {
        return Err(Error::Assembly(format!(
            "basis degree {} does not match time matrices degree {}",
            basis.degree(),
            time_mats.degree()
        )));
    }
    if z_minus.len() != 2 * d {
        return Err(Error::Assembly(format!(
            "incoming trace has length {}, expected {}",
            z_minus.len(),
            2 * d
        )));
    }
    let (t0, t1) = slab;
    let dt = t1 - t0;
    if !(dt > 0.0) {
        return Err(Error::Assembly(format!("empty slab ({t0}, {t1}]")));
    }
    if (dt - time_mats.slab_length).abs() > 1e-12 * dt.max(1.0) {
        return Err(Error::Assembly(format!(
            "slab length {dt} does not match time matrices built for {}",
            time_mats.slab_length
        )));
    }
    if quad.len() < modes {
        return Err(Error::Config(format!(
            "forcing quadrature with {} nodes is coarser than degree + 1 = {} and would be inexact even for polynomial forcing",
            quad.len(),
            modes
        )));
    }

    let u_minus = z_minus.rows(0, d).into_owned();
    let w_minus = z_minus.rows(d, d).into_owned();
    let ku = system.k().mul_vec(&u_minus);
    let pw = system.p().mul_vec(&w_minus);
    let psi0 = basis.values_at(0.0);

    let hs = d * modes;
    let mut g_u = DVector::zeros(hs);
    let mut g_u_bar = DVector::zeros(hs);
    let mut g_w = DVector::zeros(hs);
    for i in 0..d {
        for l in 0..modes {
            let idx = i * modes + l;
            g_u[idx] = ku[i] * psi0[l];
            g_u_bar[idx] = u_minus[i] * psi0[l];
            g_w[idx] = pw[i] * psi0[l];
        }
    }

    if !system.forcing().is_zero() {
        for (tau, wq) in quad.iter() {
            let t = t0 + tau * dt;
            let f = system.forcing_at(t);
            debug_assert_eq!(f.len(), d);
            let vals = basis.values_at(tau);
            let scale = dt * wq;
            for i in 0..d {
                let fi = scale * f[i];
                for l in 0..modes {
                    g_w[i * modes + l] += fi * vals[l];
                }
            }
        }
    }

    let g_hat = &g_w - kron_apply_time(&time_mats.n6, &g_u, d);
    Ok(SlabRhs {
        g_u,
        g_w,
        g_u_bar,
        g_hat,
    })
}
