//! Desk-scale SPD system generator: linear continuous FEM for a 1D damped
//! wave equation `rho w_t + 2 rho zeta w + rho zeta^2 u - (mu u_x)_x = f` on
//! a uniform grid with homogeneous Dirichlet ends. Dirichlet rows and columns
//! are eliminated so the assembled matrices stay exactly SPD.

use nalgebra::DVector;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, DEFAULT_SPARSE_THRESHOLD};
use crate::system::{build_system, Forcing, SecondOrderSystem};

/// Material and grid parameters of the 1D model.
#[derive(Debug, Clone, Copy)]
pub struct WaveModel1D {
    /// Domain length in meters.
    pub length: f64,
    pub n_elements: usize,
    /// Density (kg/m^3).
    pub rho: f64,
    /// Stiffness modulus (Pa).
    pub mu: f64,
    /// Decay factor (1/s).
    pub zeta: f64,
}

impl WaveModel1D {
    pub fn new(length: f64, n_elements: usize, rho: f64, mu: f64, zeta: f64) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::Validation(format!("domain length must be positive, got {length}")));
        }
        if n_elements < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 elements for an interior node, got {n_elements}"
            )));
        }
        if !(rho > 0.0) || !(mu > 0.0) {
            return Err(Error::Validation(format!(
                "rho and mu must be positive, got rho = {rho}, mu = {mu}"
            )));
        }
        if !(zeta >= 0.0) {
            return Err(Error::Validation(format!("zeta must be nonnegative, got {zeta}")));
        }
        Ok(WaveModel1D {
            length,
            n_elements,
            rho,
            mu,
            zeta,
        })
    }

    /// Number of interior degrees of freedom.
    pub fn dim(&self) -> usize {
        self.n_elements - 1
    }

    pub fn element_size(&self) -> f64 {
        self.length / self.n_elements as f64
    }

    /// Interior node coordinates.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.element_size();
        (1..self.n_elements).map(|i| i as f64 * h).collect()
    }
}

/// Assembled semi-discrete matrices plus the plain FEM mass matrix used to
/// project forcing by nodal interpolation.
#[derive(Debug, Clone)]
pub struct Wave1dMatrices {
    pub p: SymMatrix,
    pub l: SymMatrix,
    pub k: SymMatrix,
    /// Unscaled mass matrix `int phi_i phi_j`.
    pub mass: SymMatrix,
    pub nodes: Vec<f64>,
}

/// Linear FEM assembly: `P = rho M`, `L = 2 rho zeta M`,
/// `K = rho zeta^2 M + mu S` with `M` the mass and `S` the stiffness matrix.
pub fn assemble_wave_1d(model: &WaveModel1D) -> Result<Wave1dMatrices> {
    assemble_wave_1d_with_threshold(model, DEFAULT_SPARSE_THRESHOLD)
}

pub fn assemble_wave_1d_with_threshold(
    model: &WaveModel1D,
    sparse_threshold: usize,
) -> Result<Wave1dMatrices> {
    let d = model.dim();
    let h = model.element_size();

    let mut mass_t = Vec::with_capacity(3 * d);
    let mut stiff_t = Vec::with_capacity(3 * d);
    for i in 0..d {
        mass_t.push((i, i, 2.0 * h / 3.0));
        stiff_t.push((i, i, 2.0 / h));
        if i + 1 < d {
            mass_t.push((i, i + 1, h / 6.0));
            mass_t.push((i + 1, i, h / 6.0));
            stiff_t.push((i, i + 1, -1.0 / h));
            stiff_t.push((i + 1, i, -1.0 / h));
        }
    }
    let mass = SymMatrix::from_triplets_auto(d, &mass_t, sparse_threshold)?;
    let stiff = SymMatrix::from_triplets_auto(d, &stiff_t, sparse_threshold)?;

    let scale =
        |m: &SymMatrix, c: f64| -> Result<SymMatrix> {
            let t: Vec<(usize, usize, f64)> = m
                .iter_nonzero()
                .into_iter()
                .map(|(i, j, v)| (i, j, c * v))
                .collect();
            SymMatrix::from_triplets_auto(d, &t, sparse_threshold)
        };

    let p = scale(&mass, model.rho)?;
    let l = if model.zeta == 0.0 {
        // Exactly zero damping, not a near-zero matrix.
        SymMatrix::from_triplets_auto(d, &[], sparse_threshold)?
    } else {
        scale(&mass, 2.0 * model.rho * model.zeta)?
    };
    let k = {
        let mut t: Vec<(usize, usize, f64)> = stiff
            .iter_nonzero()
            .into_iter()
            .map(|(i, j, v)| (i, j, model.mu * v))
            .collect();
        if model.zeta != 0.0 {
            let c = model.rho * model.zeta * model.zeta;
            t.extend(mass.iter_nonzero().into_iter().map(|(i, j, v)| (i, j, c * v)));
        }
        SymMatrix::from_triplets_auto(d, &t, sparse_threshold)?
    };

    Ok(Wave1dMatrices {
        p,
        l,
        k,
        mass,
        nodes: model.nodes(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManufacturedChoice {
    /// `u(x, t) = e^{-t} sin(pi x / length)`, `w = -u`, forcing in closed form.
    DecayingSine,
}

/// A manufactured exact solution with its closed-form forcing
/// `f = rho w_t + 2 rho zeta w + rho zeta^2 u - (mu u_x)_x`.
#[derive(Debug, Clone)]
pub struct ManufacturedCase1D {
    pub model: WaveModel1D,
    choice: ManufacturedChoice,
}

pub fn manufactured_case(model: &WaveModel1D, choice: ManufacturedChoice) -> ManufacturedCase1D {
    ManufacturedCase1D {
        model: *model,
        choice,
    }
}

impl ManufacturedCase1D {
    fn omega(&self) -> f64 {
        std::f64::consts::PI / self.model.length
    }

    /// Coefficient of `u` in the closed-form forcing:
    /// `rho (1 - zeta)^2 + mu omega^2`.
    fn forcing_factor(&self) -> f64 {
        let m = &self.model;
        let om = self.omega();
        m.rho * (1.0 - m.zeta) * (1.0 - m.zeta) + m.mu * om * om
    }

    pub fn exact_u(&self, x: f64, t: f64) -> f64 {
        match self.choice {
            ManufacturedChoice::DecayingSine => (-t).exp() * (self.omega() * x).sin(),
        }
    }

    pub fn exact_w(&self, x: f64, t: f64) -> f64 {
        -self.exact_u(x, t)
    }

    pub fn forcing_value(&self, x: f64, t: f64) -> f64 {
        self.forcing_factor() * self.exact_u(x, t)
    }

    /// Residual of the exact pair in the strong PDE using the analytic
    /// derivatives (`w_t = u`, `u_xx = -omega^2 u` for the decaying sine).
    pub fn strong_residual(&self, x: f64, t: f64) -> f64 {
        let m = &self.model;
        let om = self.omega();
        let u = self.exact_u(x, t);
        let dw_dt = u;
        let d2u_dx2 = -om * om * u;
        m.rho * dw_dt + 2.0 * m.rho * m.zeta * self.exact_w(x, t)
            + m.rho * m.zeta * m.zeta * u
            - m.mu * d2u_dx2
            - self.forcing_value(x, t)
    }

    /// Same residual with finite-difference derivatives, as an independent
    /// cross-check of the closed-form forcing.
    pub fn finite_difference_residual(&self, x: f64, t: f64) -> f64 {
        let h = 1e-4;
        let m = &self.model;
        let dw_dt = (self.exact_w(x, t + h) - self.exact_w(x, t - h)) / (2.0 * h);
        let d2u_dx2 =
            (self.exact_u(x + h, t) - 2.0 * self.exact_u(x, t) + self.exact_u(x - h, t)) / (h * h);
        m.rho * dw_dt + 2.0 * m.rho * m.zeta * self.exact_w(x, t)
            + m.rho * m.zeta * m.zeta * self.exact_u(x, t)
            - m.mu * d2u_dx2
            - self.forcing_value(x, t)
    }

    /// Nodal interpolants of the exact state at time `t`.
    pub fn nodal_state(&self, nodes: &[f64], t: f64) -> (DVector<f64>, DVector<f64>) {
        let u = DVector::from_fn(nodes.len(), |i, _| self.exact_u(nodes[i], t));
        let w = DVector::from_fn(nodes.len(), |i, _| self.exact_w(nodes[i], t));
        (u, w)
    }

    /// Nodal interpolant of the exact PDE solution as a reference for
    /// temporal studies. It solves the semi-discrete system only up to the
    /// spatial truncation error, which shows up as the error plateau under
    /// time refinement.
    pub fn exact_solution(&self, mats: &Wave1dMatrices) -> Result<crate::analysis::ExactSolution> {
        let d = mats.nodes.len();
        let shape = DVector::from_fn(d, |i, _| (self.omega() * mats.nodes[i]).sin());
        let su = shape.clone();
        let sw = shape;
        crate::analysis::ExactSolution::new(
            d,
            move |t: f64| &su * (-t).exp(),
            move |t: f64| &sw * (-(-t).exp()),
            None,
            (0.0, 8.0),
        )
    }

    /// Build the semi-discrete system: initial data are nodal interpolants
    /// and the forcing vector is `M f_nodes(t)` (nodal interpolation of the
    /// closed-form forcing, consistent to higher order than the linear FEM).
    pub fn build_system(&self, mats: &Wave1dMatrices) -> Result<SecondOrderSystem> {
        let (u0, u1) = self.nodal_state(&mats.nodes, 0.0);
        let factor = self.forcing_factor();
        let shape = DVector::from_fn(mats.nodes.len(), |i, _| (self.omega() * mats.nodes[i]).sin());
        let mass_shape = mats.mass.mul_vec(&shape);
        let forcing = Forcing::Closure(Arc::new(move |t: f64| &mass_shape * (factor * (-t).exp())));
        build_system(
            mats.p.clone(),
            mats.l.clone(),
            mats.k.clone(),
            forcing,
            u0,
            u1,
        )
    }
}
