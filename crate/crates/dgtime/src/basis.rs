use nalgebra::DVector;

use crate::error::{Error, Result};

/// Highest supported polynomial degree for the temporal basis. Beyond this,
/// conditioning of the left-endpoint-augmented derivative matrix is rejected
/// rather than silently degraded.
pub const MAX_DEGREE: usize = 20;

/// Temporal basis family on the reference interval `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// Legendre polynomials mapped to `[0, 1]`. Orthogonal, so the mass
    /// matrix is diagonal and assembly stays well scaled at high degree.
    ShiftedLegendre,
    /// Lagrange polynomials on Gauss-Lobatto nodes, for nodal output.
    LagrangeGaussLobatto,
}

impl BasisKind {
    pub fn name(&self) -> &'static str {
        match self {
            BasisKind::ShiftedLegendre => "shifted-legendre",
            BasisKind::LagrangeGaussLobatto => "lagrange-gauss-lobatto",
        }
    }
}

/// Legendre values and first derivatives `P_0..P_r`, `P'_0..P'_r` at `x` on `[-1, 1]`.
fn legendre_all(r: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; r + 1];
    let mut dp = vec![0.0; r + 1];
    p[0] = 1.0;
    if r >= 1 {
        p[1] = x;
        dp[1] = 1.0;
    }
    for n in 1..r {
        let nf = n as f64;
        p[n + 1] = ((2.0 * nf + 1.0) * x * p[n] - nf * p[n - 1]) / (nf + 1.0);
        dp[n + 1] = dp[n - 1] + (2.0 * nf + 1.0) * p[n];
    }
    (p, dp)
}

/// `r+1` polynomials of degree `<= r` on `[0, 1]`, with value and derivative
/// evaluators. Basis indices are 0-based throughout.
#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    degree: usize,
    kind: BasisKind,
    /// Interpolation nodes; only populated for the Lagrange family.
    nodes: Vec<f64>,
}

impl ReferenceBasis {
    pub fn new(degree: usize, kind: BasisKind) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(Error::Config(format!(
                "temporal degree {degree} exceeds the supported maximum {MAX_DEGREE}"
            )));
        }
        let nodes = match kind {
            BasisKind::ShiftedLegendre => Vec::new(),
            BasisKind::LagrangeGaussLobatto => gauss_lobatto_nodes(degree),
        };
        Ok(ReferenceBasis { degree, kind, nodes })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// Number of basis functions, `degree + 1`.
    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Interpolation nodes of the Lagrange family (empty for Legendre).
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Value of basis function `ell` (0-based) at `tau` in `[0, 1]`.
    pub fn eval(&self, ell: usize, tau: f64) -> f64 {
        debug_assert!(ell <= self.degree);
        match self.kind {
            BasisKind::ShiftedLegendre => legendre_all(ell, 2.0 * tau - 1.0).0[ell],
            BasisKind::LagrangeGaussLobatto => {
                let mut v = 1.0;
                let tl = self.nodes[ell];
                for (m, &tm) in self.nodes.iter().enumerate() {
                    if m != ell {
                        v *= (tau - tm) / (tl - tm);
                    }
                }
                v
            }
        }
    }

    /// Derivative of basis function `ell` with respect to `tau`.
    pub fn eval_deriv(&self, ell: usize, tau: f64) -> f64 {
        debug_assert!(ell <= self.degree);
        match self.kind {
            BasisKind::ShiftedLegendre => 2.0 * legendre_all(ell, 2.0 * tau - 1.0).1[ell],
            BasisKind::LagrangeGaussLobatto => {
                // Product-rule form; O(r^2) but valid at the nodes too.
                let tl = self.nodes[ell];
                let mut sum = 0.0;
                for (j, &tj) in self.nodes.iter().enumerate() {
                    if j == ell {
                        continue;
                    }
                    let mut term = 1.0 / (tl - tj);
                    for (m, &tm) in self.nodes.iter().enumerate() {
                        if m != ell && m != j {
                            term *= (tau - tm) / (tl - tm);
                        }
                    }
                    sum += term;
                }
                sum
            }
        }
    }

    /// All basis values at `tau`.
    pub fn values_at(&self, tau: f64) -> DVector<f64> {
        match self.kind {
            BasisKind::ShiftedLegendre => {
                let (p, _) = legendre_all(self.degree, 2.0 * tau - 1.0);
                DVector::from_vec(p)
            }
            BasisKind::LagrangeGaussLobatto => {
                DVector::from_fn(self.len(), |ell, _| self.eval(ell, tau))
            }
        }
    }

    /// All basis derivatives at `tau`.
    pub fn derivs_at(&self, tau: f64) -> DVector<f64> {
        match self.kind {
            BasisKind::ShiftedLegendre => {
                let (_, dp) = legendre_all(self.degree, 2.0 * tau - 1.0);
                DVector::from_vec(dp.into_iter().map(|d| 2.0 * d).collect())
            }
            BasisKind::LagrangeGaussLobatto => {
                DVector::from_fn(self.len(), |ell, _| self.eval_deriv(ell, tau))
            }
        }
    }

    /// Coefficients reproducing the constant function 1.
    pub fn constant_coefficients(&self) -> DVector<f64> {
        match self.kind {
            BasisKind::ShiftedLegendre => {
                let mut c = DVector::zeros(self.len());
                c[0] = 1.0;
                c
            }
            BasisKind::LagrangeGaussLobatto => DVector::from_element(self.len(), 1.0),
        }
    }
}

/// Gauss-Legendre quadrature on the reference interval `[0, 1]`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Integrate `f` over `[0, 1]`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Gauss-Legendre rule with `q` nodes mapped to `[0, 1]`; exact for
/// polynomials of degree `<= 2q - 1`.
pub fn gauss_rule(q: usize) -> Result<QuadratureRule> {
    if q < 1 {
        return Err(Error::Config("quadrature rule needs at least one node".into()));
    }
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    // Roots of P_q on [-1, 1] by Newton iteration; exploit symmetry.
    for i in 0..q.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_all(q, x);
            dp = d[q];
            let dx = p[q] / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[q - 1 - i] = x;
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    // Map [-1, 1] -> [0, 1].
    for x in nodes.iter_mut() {
        *x = 0.5 * (*x + 1.0);
    }
    for w in weights.iter_mut() {
        *w *= 0.5;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Gauss-Lobatto nodes for degree `r` (that is, `r + 1` nodes) on `[0, 1]`.
/// Interior nodes are the roots of `P'_r`.
pub(crate) fn gauss_lobatto_nodes(r: usize) -> Vec<f64> {
    if r == 0 {
        return vec![1.0];
    }
    let mut xs = vec![0.0; r + 1];
    xs[0] = -1.0;
    xs[r] = 1.0;
    for k in 1..r {
        // Initial guess interleaves the Chebyshev-Lobatto points.
        let mut x = (std::f64::consts::PI * k as f64 / r as f64).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_all(r, x);
            // P''_r from the Legendre ODE.
            let d2 = (2.0 * x * dp[r] - (r as f64) * (r as f64 + 1.0) * p[r]) / (1.0 - x * x);
            let dx = dp[r] / d2;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        xs[r - k] = x;
    }
    xs.iter().map(|x| 0.5 * (x + 1.0)).collect()
}
