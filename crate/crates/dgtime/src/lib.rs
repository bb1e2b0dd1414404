//! Discontinuous Galerkin time integration for linear second-order systems
//! `P u'' + L u' + K u = f`.
//!
//! The problem is rewritten as a first-order block system and integrated one
//! time slab at a time with discontinuous piecewise polynomials. Each slab
//! produces a Kronecker-structured linear system; block Gaussian elimination
//! reduces it to a velocity-only system of half the size, after which the
//! displacement follows from a local update. The crate also ships the
//! energy-norm error machinery, convergence and stability study harnesses,
//! condition-number estimation, a 1D wave-equation generator for desk-scale
//! experiments, and Matrix Market ingestion for externally assembled systems.

// Validation predicates are written as negated comparisons (`!(x > 0.0)`)
// so that NaN inputs fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub use nalgebra;

pub mod analysis;
pub mod basis;
pub mod error;
pub mod gmres;
pub mod linalg;
pub mod march;
pub mod mesh;
pub mod mm;
pub mod slab;
pub mod system;
pub mod timemat;
pub mod wave1d;

pub use analysis::{
    apply_bilinear_form, apply_linear_functional, condition_estimate, convergence_study,
    energy_error, energy_norm, scalar_exact_solution, stability_monitor, ConditionEstimate,
    ConditionMode, ConvergenceReport, ConvergenceRow, Difference, EnergyBreakdown, ExactSolution,
    StabilityReport, StateFunction, StudyKind, StudyOptions,
};
pub use basis::{gauss_rule, BasisKind, QuadratureRule, ReferenceBasis, MAX_DEGREE};
pub use error::{Error, Result};
pub use gmres::{gmres, GmresOutcome};
pub use linalg::{BandedCholesky, CsrMatrix, SymMatrix, DEFAULT_SPARSE_THRESHOLD};
pub use march::{
    march, solve_slab, SlabDiagnostics, SlabSolution, SolveMethod, SolverOptions, Trajectory,
};
pub use mesh::{Side, TimeMesh};
pub use mm::{read_matrix_market, write_matrix_market, write_matrix_market_vector, MmMatrix};
pub use slab::{assemble_slab_operators, assemble_slab_rhs, SlabOperators, SlabRhs};
pub use system::{
    build_system, scalar_test_system, BlockSystemView, Forcing, SampledForcing, SecondOrderSystem,
};
pub use timemat::{assemble_time_matrices, TimeMatrixSet};
pub use wave1d::{
    assemble_wave_1d, assemble_wave_1d_with_threshold, manufactured_case, ManufacturedCase1D,
    ManufacturedChoice, Wave1dMatrices, WaveModel1D,
};
