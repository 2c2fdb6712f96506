//! Lowest-order Whitney-form de Rham complexes on 1D and 2D simplicial meshes.

pub mod field;
pub mod manufactured;
pub mod mesh;
pub mod quadrature;
pub mod refine;
pub mod whitney;

pub use field::{field_errors, interpolate, FieldErrors, ScalarField};
pub use manufactured::{manufactured_problem, Case, ManufacturedProblem};
pub use mesh::{cycle_mesh, ellipse_cycle_mesh, triangulated_square_mesh, unit_interval_mesh, SimplicialMesh};
pub use refine::{refine_mesh, refine_uniform, MorphismCheck, ProlongationMorphism, Refinement};
pub use whitney::{whitney_complex, whitney_complex_with, AssemblyOptions, Flavor, WhitneyComplex};
