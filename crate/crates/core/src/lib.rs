//! Finite element exterior calculus laboratory.
//!
//! Finite-dimensional Hilbert complexes ([`complex`]), the mixed Hodge
//! Laplacian and its solution operators ([`mixed`]), semilinear problems via
//! the Hammerstein formulation ([`semilinear`]), Whitney-form de Rham
//! complexes on 1D/2D meshes ([`derham`]), variational crimes ([`crimes`]) and
//! the convergence-study harness ([`lab`]).

pub mod complex;
pub mod crimes;
pub mod derham;
pub mod error;
pub mod lab;
pub mod linalg;
pub mod mixed;
pub mod semilinear;

pub use complex::{Degree, HilbertComplex, HodgeDecomposition, PoincareData, ValidationReport};
pub use crimes::{CrimeSetup, DataMode, GapReport};
pub use error::{Error, Result};
pub use lab::{RateReport, StudyConfig};
pub use mixed::{assemble_mixed, solve_mixed_linear, LinearSolver, MixedSolution, SaddleSystem, SolutionOperators};
pub use semilinear::{HammersteinOptions, HammersteinState, Nonlinearity, SemilinearSolution};
