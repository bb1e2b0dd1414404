//! Unpreconditioned GMRES with modified Gram-Schmidt and Givens rotations.
//! Unrestarted by default; an optional restart length bounds the Krylov
//! basis for memory-constrained runs.

use nalgebra::DVector;

/// Result of one GMRES solve.
#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// Final true relative residual `|b - Ax| / |b|`.
    pub residual: f64,
    /// Relative residual estimate after each iteration.
    pub history: Vec<f64>,
    pub converged: bool,
}

/// Solve `A x = b` where `apply` computes `A x`. Convergence is declared at
/// `|b - Ax| <= rel_tol * |b|`. A zero right-hand side returns the zero
/// solution without iterating.
pub fn gmres(
    apply: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    b: &DVector<f64>,
    x0: Option<&DVector<f64>>,
    rel_tol: f64,
    max_iter: usize,
    restart: Option<usize>,
) -> GmresOutcome {
    let n = b.len();
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return GmresOutcome {
            x: DVector::zeros(n),
            iterations: 0,
            residual: 0.0,
            history: Vec::new(),
            converged: true,
        };
    }

    let mut x = x0.cloned().unwrap_or_else(|| DVector::zeros(n));
    let mut history = Vec::new();
    let mut total_iter = 0usize;
    let cycle_len = restart.unwrap_or(max_iter).max(1).min(n);
    let mut last_cycle_residual = f64::INFINITY;

    loop {
        let r = b - apply(&x);
        let r_norm = r.norm();
        if r_norm / b_norm <= rel_tol {
            return GmresOutcome {
                x,
                iterations: total_iter,
                residual: r_norm / b_norm,
                history,
                converged: true,
            };
        }
        // Stagnation across cycles means the rounding floor of the true
        // residual has been reached; more cycles cannot help.
        if total_iter >= max_iter || r_norm / b_norm > 0.99 * last_cycle_residual {
            return GmresOutcome {
                x,
                iterations: total_iter,
                residual: r_norm / b_norm,
                history,
                converged: false,
            };
        }
        last_cycle_residual = r_norm / b_norm;

        // Arnoldi with modified Gram-Schmidt.
        let m = cycle_len.min(max_iter - total_iter);
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m + 1);
        basis.push(&r / r_norm);
        // h[k] holds column k (length k+2).
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs = Vec::with_capacity(m);
        let mut sn = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = r_norm;

        let mut k = 0;
        while k < m {
            total_iter += 1;
            let mut w = apply(&basis[k]);
            let mut col = vec![0.0; k + 2];
            for (j, vj) in basis.iter().enumerate() {
                let hjk = vj.dot(&w);
                col[j] = hjk;
                w.axpy(-hjk, vj, 1.0);
            }
            let w_norm = w.norm();
            col[k + 1] = w_norm;

            // Previously accumulated Givens rotations.
            for j in 0..k {
                let (c, s): (f64, f64) = (cs[j], sn[j]);
                let tmp = c * col[j] + s * col[j + 1];
                col[j + 1] = -s * col[j] + c * col[j + 1];
                col[j] = tmp;
            }
            // New rotation annihilating col[k+1].
            let (c, s) = givens(col[k], col[k + 1]);
            cs.push(c);
            sn.push(s);
            col[k] = c * col[k] + s * col[k + 1];
            col[k + 1] = 0.0;
            let tmp = c * g[k] + s * g[k + 1];
            g[k + 1] = -s * g[k] + c * g[k + 1];
            g[k] = tmp;
            h.push(col);

            let rel = g[k + 1].abs() / b_norm;
            history.push(rel);
            k += 1;

            if rel <= rel_tol || w_norm < 1e-300 {
                break;
            }
            basis.push(w / w_norm);
            if total_iter >= max_iter {
                break;
            }
        }

        // y from the triangularized least-squares system, then x += V y.
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for j in (i + 1)..k {
                acc -= h[j][i] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { acc / h[i][i] } else { 0.0 };
        }
        for (i, yi) in y.iter().enumerate() {
            x.axpy(*yi, &basis[i], 1.0);
        }
    }
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn zero_rhs_returns_zero_without_iterating() {
        let apply = |x: &DVector<f64>| x.clone();
        let b = DVector::zeros(5);
        let out = gmres(&apply, &b, None, 1e-12, 100, None);
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x, DVector::zeros(5));
    }

    #[test]
    fn solves_random_nonsymmetric_system() {
        let mut rng = StdRng::seed_from_u64(5);
        let n = 40;
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                4.0 + rng.gen_range(0.0..1.0)
            } else {
                rng.gen_range(-0.3..0.3)
            }
        });
        let x_true = DVector::from_fn(n, |i, _| (i as f64 * 0.21).cos());
        let b = &a * &x_true;
        let ac = a.clone();
        let apply = move |v: &DVector<f64>| &ac * v;
        let out = gmres(&apply, &b, None, 1e-12, 200, None);
        assert!(out.converged, "residual {}", out.residual);
        assert_relative_eq!(out.x, x_true, epsilon = 1e-8);
        assert!(out.residual <= 1e-12);
        assert!(!out.history.is_empty());
    }

    #[test]
    fn initial_guess_shortens_the_solve() {
        let n = 30;
        let a = DMatrix::from_fn(n, n, |i, j| if i == j { 2.0 } else if j == i + 1 { -0.5 } else { 0.0 });
        let x_true = DVector::from_element(n, 1.0);
        let b = &a * &x_true;
        let apply = move |v: &DVector<f64>| &a * v;
        let exact_guess = x_true.clone();
        let out = gmres(&apply, &b, Some(&exact_guess), 1e-12, 100, None);
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn restarted_run_still_converges() {
        let n = 50;
        let a = DMatrix::from_fn(n, n, |i, j| if i == j { (i + 1) as f64 } else { 0.0 });
        let x_true = DVector::from_fn(n, |i, _| 1.0 / (i + 1) as f64);
        let b = &a * &x_true;
        let apply = move |v: &DVector<f64>| &a * v;
        let out = gmres(&apply, &b, None, 1e-10, 2000, Some(7));
        assert!(out.converged);
        assert_relative_eq!(out.x, x_true, epsilon = 1e-7);
    }

    #[test]
    fn reports_non_convergence() {
        let n = 20;
        let a = DMatrix::from_fn(n, n, |i, j| if i == j { (i + 1) as f64 } else { 0.1 });
        let b = DVector::from_element(n, 1.0);
        let apply = move |v: &DVector<f64>| &a * v;
        let out = gmres(&apply, &b, None, 1e-14, 2, None);
        assert!(!out.converged);
        assert!(out.iterations <= 2);
        assert!(out.residual > 1e-14);
    }
}
