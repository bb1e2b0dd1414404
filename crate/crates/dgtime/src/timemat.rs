use nalgebra::DMatrix;

use crate::basis::{gauss_rule, ReferenceBasis};
use crate::error::{Error, Result};

/// Condition bound on `N1 + N3` above which assembly is rejected.
const MAX_LEFT_MATRIX_CONDITION: f64 = 1e14;

/// Local time matrices for one (degree, slab length) pair.
///
/// With `psi^m` the reference basis and `Dt` the slab length:
/// `n1[l,m] = int dpsi^m psi^l` (scale invariant), `n2[l,m] = Dt int psi^m psi^l`,
/// `n3[l,m] = psi^m(0) psi^l(0)`, and the derived products
/// `n4 = (n1+n3)^-1`, `n5 = n4 n2`, `n6 = n2 n4`, `n7 = n2 n4 n2`.
#[derive(Debug, Clone)]
pub struct TimeMatrixSet {
    pub n1: DMatrix<f64>,
    pub n2: DMatrix<f64>,
    pub n3: DMatrix<f64>,
    pub n4: DMatrix<f64>,
    pub n5: DMatrix<f64>,
    pub n6: DMatrix<f64>,
    pub n7: DMatrix<f64>,
    pub slab_length: f64,
    degree: usize,
}

impl TimeMatrixSet {
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of time modes, `degree + 1`.
    pub fn modes(&self) -> usize {
        self.degree + 1
    }

    /// The left-hand time matrix `N1 + N3` of the velocity block.
    pub fn left_matrix(&self) -> DMatrix<f64> {
        &self.n1 + &self.n3
    }
}

/// Assemble `N1..N7` for the given basis and slab length.
///
/// `n1` and `n2` use a Gauss rule with `degree + 1` nodes, which integrates
/// their degree `<= 2r` integrands exactly; `n3` is plain evaluation at the
/// left endpoint.
pub fn assemble_time_matrices(basis: &ReferenceBasis, slab_length: f64) -> Result<TimeMatrixSet> {
    if !(slab_length > 0.0) || !slab_length.is_finite() {
        return Err(Error::Config(format!(
            "slab length must be positive, got {slab_length}"
        )));
    }
    let r = basis.degree();
    let np = r + 1;
    let quad = gauss_rule(np)?;

    let mut n1 = DMatrix::zeros(np, np);
    let mut n2 = DMatrix::zeros(np, np);
    for (tau, w) in quad.iter() {
        let vals = basis.values_at(tau);
        let ders = basis.derivs_at(tau);
        for l in 0..np {
            for m in 0..np {
                n1[(l, m)] += w * ders[m] * vals[l];
                n2[(l, m)] += w * vals[m] * vals[l];
            }
        }
    }
    n2 *= slab_length;

    let v0 = basis.values_at(0.0);
    let n3 = DMatrix::from_fn(np, np, |l, m| v0[m] * v0[l]);

    let left = &n1 + &n3;
    let sv = left.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if smin <= 0.0 || smax / smin > MAX_LEFT_MATRIX_CONDITION {
        return Err(Error::Assembly(format!(
            "N1+N3 is numerically singular (condition estimate {:.3e}) for degree {} with the {} basis",
            if smin > 0.0 { smax / smin } else { f64::INFINITY },
            r,
            basis.kind().name()
        )));
    }

    let n4 = left.clone().lu().try_inverse().ok_or_else(|| {
        Error::Assembly(format!(
            "N1+N3 LU factorization failed for degree {} with the {} basis",
            r,
            basis.kind().name()
        ))
    })?;
    let n5 = &n4 * &n2;
    let n6 = &n2 * &n4;
    let n7 = &n2 * &n5;

    Ok(TimeMatrixSet {
        n1,
        n2,
        n3,
        n4,
        n5,
        n6,
        n7,
        slab_length,
        degree: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisKind;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn mats(r: usize, kind: BasisKind, dt: f64) -> TimeMatrixSet {
        let basis = ReferenceBasis::new(r, kind).unwrap();
        assemble_time_matrices(&basis, dt).unwrap()
    }

    #[test]
    fn degree_zero_closed_form() {
        let tm = mats(0, BasisKind::ShiftedLegendre, 0.25);
        assert_relative_eq!(tm.n1[(0, 0)], 0.0, epsilon = 1e-15);
        assert_relative_eq!(tm.n2[(0, 0)], 0.25, epsilon = 1e-15);
        assert_relative_eq!(tm.n3[(0, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(tm.n4[(0, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(tm.n5[(0, 0)], 0.25, epsilon = 1e-15);
        assert_relative_eq!(tm.n6[(0, 0)], 0.25, epsilon = 1e-15);
        assert_relative_eq!(tm.n7[(0, 0)], 0.0625, epsilon = 1e-15);
    }

    #[test]
    fn degree_one_shifted_legendre_closed_form() {
        // psi^1 = 1, psi^2 = 2 tau - 1 on a unit slab.
        let tm = mats(1, BasisKind::ShiftedLegendre, 1.0);
        let n1 = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        let n2 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0 / 3.0]);
        let n3 = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let n4 = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, 0.5, 0.5]);
        for (got, want) in [(&tm.n1, n1), (&tm.n2, n2), (&tm.n3, n3), (&tm.n4, n4)] {
            assert_relative_eq!(got, &want, epsilon = 1e-14);
        }
    }

    #[test]
    fn n4_inverts_left_matrix_up_to_max_degree() {
        for kind in [BasisKind::ShiftedLegendre, BasisKind::LagrangeGaussLobatto] {
            for r in 0..=crate::basis::MAX_DEGREE {
                let tm = mats(r, kind, 0.37);
                let prod = &tm.n4 * tm.left_matrix();
                let eye = DMatrix::<f64>::identity(r + 1, r + 1);
                let err = (&prod - &eye).amax();
                assert!(err < 1e-12, "kind {kind:?} r={r}: |N4(N1+N3) - I| = {err:.3e}");
            }
        }
    }

    #[test]
    fn derived_products_consistent() {
        for r in [0, 1, 3, 7] {
            let tm = mats(r, BasisKind::ShiftedLegendre, 2.5);
            assert_relative_eq!(&tm.n5, &(&tm.n4 * &tm.n2), epsilon = 1e-12);
            assert_relative_eq!(&tm.n6, &(&tm.n2 * &tm.n4), epsilon = 1e-12);
            assert_relative_eq!(&tm.n7, &(&tm.n2 * &tm.n4 * &tm.n2), epsilon = 1e-12);
        }
    }

    #[test]
    fn n2_is_spd_and_scales_linearly() {
        for kind in [BasisKind::ShiftedLegendre, BasisKind::LagrangeGaussLobatto] {
            for r in [0, 2, 5] {
                for dt in [1e-4, 0.3, 10.0] {
                    let tm = mats(r, kind, dt);
                    let unit = mats(r, kind, 1.0);
                    assert_relative_eq!(&tm.n2, &(&unit.n2 * dt), max_relative = 1e-12);
                    // n1, n3 independent of dt.
                    assert_relative_eq!(&tm.n1, &unit.n1, epsilon = 1e-13);
                    assert_relative_eq!(&tm.n3, &unit.n3, epsilon = 1e-15);

                    let eig = tm.n2.clone().symmetric_eigen().eigenvalues;
                    let min = eig.min();
                    assert!(min > 0.0, "n2 not positive definite: min eig {min}");
                    let unit_min = unit.n2.symmetric_eigen().eigenvalues.min();
                    assert_relative_eq!(min, unit_min * dt, max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn coercivity_identity_at_matrix_level() {
        // c' (N1+N3) c = (psi_c(1)^2 + psi_c(0)^2) / 2 from integration by parts.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for kind in [BasisKind::ShiftedLegendre, BasisKind::LagrangeGaussLobatto] {
            for r in 0..=8 {
                let basis = ReferenceBasis::new(r, kind).unwrap();
                let tm = assemble_time_matrices(&basis, 1.0).unwrap();
                let left = tm.left_matrix();
                for _ in 0..5 {
                    let c = DVector::from_fn(r + 1, |_, _| next());
                    let quad = c.dot(&(&left * &c));
                    let at0: f64 = (0..=r).map(|l| c[l] * basis.eval(l, 0.0)).sum();
                    let at1: f64 = (0..=r).map(|l| c[l] * basis.eval(l, 1.0)).sum();
                    let expect = 0.5 * (at1 * at1 + at0 * at0);
                    assert!(
                        (quad - expect).abs() <= 1e-12 * expect.abs().max(1.0),
                        "kind {kind:?} r={r}: {quad} vs {expect}"
                    );
                }
            }
        }
    }

    #[test]
    fn n1_column_sums_follow_fundamental_theorem() {
        // With c the constant-reproducing coefficients,
        // sum_l c_l n1[l,m] = psi^m(1) - psi^m(0).
        for kind in [BasisKind::ShiftedLegendre, BasisKind::LagrangeGaussLobatto] {
            for r in [0, 1, 4, 9] {
                let basis = ReferenceBasis::new(r, kind).unwrap();
                let tm = assemble_time_matrices(&basis, 1.0).unwrap();
                let c = basis.constant_coefficients();
                for m in 0..=r {
                    let got: f64 = (0..=r).map(|l| c[l] * tm.n1[(l, m)]).sum();
                    let want = basis.eval(m, 1.0) - basis.eval(m, 0.0);
                    assert_relative_eq!(got, want, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_nonpositive_slab_length() {
        let basis = ReferenceBasis::new(2, BasisKind::ShiftedLegendre).unwrap();
        assert!(assemble_time_matrices(&basis, 0.0).is_err());
        assert!(assemble_time_matrices(&basis, -1.0).is_err());
    }
}
