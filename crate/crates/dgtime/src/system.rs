//! The first-order reformulated system and its data. A second-order problem
//! `P u'' + L u' + K u = f` is carried around as the block system
//! `Kt z' + A z = F` with `z = [u, w]`, `w = u'`,
//! `Kt = diag(K, P)` and `A = [[0, -K], [K, L]]`.

use nalgebra::DVector;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{BandedCholesky, SymMatrix};

/// Relative symmetry tolerance on P, L, K.
const SYMMETRY_TOL: f64 = 1e-10;

/// Time-dependent forcing `f(t)` on the right-hand side.
///
/// Sampled forcing is interpolated piecewise-cubically (Hermite with
/// finite-difference slopes). Interpolation error can dominate the
/// discretization error for high temporal degrees; prefer a closure when the
/// forcing is known analytically.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    Closure(Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>),
    Sampled(SampledForcing),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Forcing::Zero"),
            Forcing::Closure(_) => write!(f, "Forcing::Closure"),
            Forcing::Sampled(s) => write!(f, "Forcing::Sampled({} samples)", s.times.len()),
        }
    }
}

impl Forcing {
    pub fn closure(f: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Forcing::Closure(Arc::new(f))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }

    pub fn eval(&self, t: f64, dim: usize) -> DVector<f64> {
        match self {
            Forcing::Zero => DVector::zeros(dim),
            Forcing::Closure(f) => f(t),
            Forcing::Sampled(s) => s.eval(t),
        }
    }

    /// Time span the forcing is defined on, if it is sample-limited.
    pub fn sample_span(&self) -> Option<(f64, f64)> {
        match self {
            Forcing::Sampled(s) => Some((s.times[0], *s.times.last().unwrap())),
            _ => None,
        }
    }
}

/// Forcing given as a time series, one vector per sample instant.
#[derive(Debug, Clone)]
pub struct SampledForcing {
    times: Vec<f64>,
    values: Vec<DVector<f64>>,
}

impl SampledForcing {
    pub fn new(times: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Validation(format!(
                "{} sample times but {} sample values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::Validation("sampled forcing needs at least two samples".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("sample times must be strictly increasing".into()));
        }
        let d = values[0].len();
        if values.iter().any(|v| v.len() != d) {
            return Err(Error::Validation("inconsistent sample vector lengths".into()));
        }
        Ok(SampledForcing { times, values })
    }

    /// Piecewise-cubic Hermite interpolation with finite-difference slopes;
    /// clamped to the end samples outside the covered span.
    pub fn eval(&self, t: f64) -> DVector<f64> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1].clone();
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;

        let slope = |i: usize| -> DVector<f64> {
            if i == 0 {
                (&self.values[1] - &self.values[0]) / (self.times[1] - self.times[0])
            } else if i == n - 1 {
                (&self.values[n - 1] - &self.values[n - 2])
                    / (self.times[n - 1] - self.times[n - 2])
            } else {
                (&self.values[i + 1] - &self.values[i - 1])
                    / (self.times[i + 1] - self.times[i - 1])
            }
        };
        let m0 = slope(k) * h;
        let m1 = slope(k + 1) * h;

        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        &self.values[k] * h00 + m0 * h10 + &self.values[k + 1] * h01 + m1 * h11
    }
}

/// Validated second-order system `P u'' + L u' + K u = f` with initial data.
///
/// P and K must be symmetric positive definite; L symmetric positive
/// semi-definite (zero damping is admitted, as the wave benchmarks need it,
/// even though strict definiteness is what the norm analysis assumes).
#[derive(Debug, Clone)]
pub struct SecondOrderSystem {
    dim: usize,
    p: SymMatrix,
    l: SymMatrix,
    k: SymMatrix,
    forcing: Forcing,
    u0: DVector<f64>,
    u1: DVector<f64>,
    p_chol: Arc<BandedCholesky>,
    k_chol: Arc<BandedCholesky>,
    l_chol: Option<Arc<BandedCholesky>>,
}

fn check_symmetric(name: &str, m: &SymMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Validation(format!("{name} is not square")));
    }
    let asym = m.max_asymmetry();
    let scale = m.max_abs();
    if asym > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Validation(format!(
            "{name} is not symmetric: max asymmetry {asym:.3e} (scale {scale:.3e})"
        )));
    }
    Ok(())
}

/// Build and validate a system. Cholesky factors of P and K are computed here
/// and cached for later use (definiteness check, K^-1 updates, weighted norms).
pub fn build_system(
    p: SymMatrix,
    l: SymMatrix,
    k: SymMatrix,
    forcing: Forcing,
    u0: DVector<f64>,
    u1: DVector<f64>,
) -> Result<SecondOrderSystem> {
    let dim = p.dim();
    for (name, m) in [("P", &p), ("L", &l), ("K", &k)] {
        if m.dim() != dim {
            return Err(Error::Validation(format!(
                "{name} has dimension {}, expected {dim}",
                m.dim()
            )));
        }
        check_symmetric(name, m)?;
    }
    if u0.len() != dim || u1.len() != dim {
        return Err(Error::Validation(format!(
            "initial data has lengths {} and {}, expected {dim}",
            u0.len(),
            u1.len()
        )));
    }

    let p_chol = BandedCholesky::factor(&p)
        .map_err(|e| Error::Validation(format!("P is not positive definite: {e}")))?;
    let k_chol = BandedCholesky::factor(&k)
        .map_err(|e| Error::Validation(format!("K is not positive definite: {e}")))?;

    // L may be only semi-definite. Strict factorization failing is fine as
    // long as a relative diagonal shift restores definiteness.
    let l_chol = match BandedCholesky::factor(&l) {
        Ok(c) => Some(Arc::new(c)),
        Err(_) => {
            let scale = l.max_abs();
            if scale > 0.0 {
                let shifted = l.plus_diagonal(1e-10 * scale);
                BandedCholesky::factor(&shifted).map_err(|_| {
                    Error::Validation(
                        "L is not positive semi-definite (shifted Cholesky failed)".into(),
                    )
                })?;
            }
            None
        }
    };

    Ok(SecondOrderSystem {
        dim,
        p,
        l,
        k,
        forcing,
        u0,
        u1,
        p_chol: Arc::new(p_chol),
        k_chol: Arc::new(k_chol),
        l_chol,
    })
}

impl SecondOrderSystem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> &SymMatrix {
        &self.p
    }

    pub fn l(&self) -> &SymMatrix {
        &self.l
    }

    pub fn k(&self) -> &SymMatrix {
        &self.k
    }

    pub fn forcing(&self) -> &Forcing {
        &self.forcing
    }

    pub fn u0(&self) -> &DVector<f64> {
        &self.u0
    }

    pub fn u1(&self) -> &DVector<f64> {
        &self.u1
    }

    /// `true` when L admits a strict Cholesky factorization.
    pub fn l_strictly_pd(&self) -> bool {
        self.l_chol.is_some()
    }

    pub fn forcing_at(&self, t: f64) -> DVector<f64> {
        self.forcing.eval(t, self.dim)
    }

    /// Solve `K x = rhs` with the cached factor.
    pub fn k_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.k_chol.solve(rhs)
    }

    /// Solve `P x = rhs` with the cached factor.
    pub fn p_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.p_chol.solve(rhs)
    }

    /// `|L^{-1/2} v|^2 = v' L^{-1} v`, available only for strictly PD L.
    pub fn l_inv_quad_form(&self, v: &DVector<f64>) -> Option<f64> {
        self.l_chol.as_ref().map(|c| {
            let y = c.solve_lower(v);
            y.norm_squared()
        })
    }

    pub fn first_order_view(&self) -> BlockSystemView<'_> {
        BlockSystemView { sys: self }
    }
}

/// Matrix-free actions of the block matrices `Kt = diag(K, P)` and
/// `A = [[0, -K], [K, L]]` on `2d`-vectors `z = [u, w]`.
#[derive(Debug, Clone, Copy)]
pub struct BlockSystemView<'a> {
    sys: &'a SecondOrderSystem,
}

impl<'a> BlockSystemView<'a> {
    pub fn dim(&self) -> usize {
        self.sys.dim
    }

    fn split(&self, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let d = self.sys.dim;
        debug_assert_eq!(z.len(), 2 * d);
        (z.rows(0, d).into_owned(), z.rows(d, d).into_owned())
    }

    /// `Kt z = [K u, P w]`.
    pub fn ktilde_apply(&self, z: &DVector<f64>) -> DVector<f64> {
        let (u, w) = self.split(z);
        let mut out = DVector::zeros(2 * self.sys.dim);
        out.rows_mut(0, self.sys.dim).copy_from(&self.sys.k.mul_vec(&u));
        out.rows_mut(self.sys.dim, self.sys.dim)
            .copy_from(&self.sys.p.mul_vec(&w));
        out
    }

    /// `A z = [-K w, K u + L w]`.
    pub fn a_apply(&self, z: &DVector<f64>) -> DVector<f64> {
        let (u, w) = self.split(z);
        let d = self.sys.dim;
        let mut out = DVector::zeros(2 * d);
        out.rows_mut(0, d).copy_from(&(-self.sys.k.mul_vec(&w)));
        out.rows_mut(d, d)
            .copy_from(&(self.sys.k.mul_vec(&u) + self.sys.l.mul_vec(&w)));
        out
    }

    /// Initial state `z0 = [u0, u1]`.
    pub fn z0(&self) -> DVector<f64> {
        let d = self.sys.dim;
        let mut z = DVector::zeros(2 * d);
        z.rows_mut(0, d).copy_from(&self.sys.u0);
        z.rows_mut(d, d).copy_from(&self.sys.u1);
        z
    }

    /// `z' Kt z` for `z = [u, w]`.
    pub fn ktilde_quad_form(&self, z: &DVector<f64>) -> f64 {
        let (u, w) = self.split(z);
        self.sys.k.quad_form(&u) + self.sys.p.quad_form(&w)
    }
}

/// The scalar verification problem: `u'' + 5 u' + 6 u = 0`, `u(0) = 2`,
/// `u'(0) = -5`, whose solution is `u = e^{-3t} + e^{-2t}`.
pub fn scalar_test_system() -> SecondOrderSystem {
    build_system(
        SymMatrix::Dense(nalgebra::dmatrix![1.0]),
        SymMatrix::Dense(nalgebra::dmatrix![5.0]),
        SymMatrix::Dense(nalgebra::dmatrix![6.0]),
        Forcing::Zero,
        DVector::from_vec(vec![2.0]),
        DVector::from_vec(vec![-5.0]),
    )
    .expect("scalar test system is valid")
}
