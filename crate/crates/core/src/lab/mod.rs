//! Convergence studies: configuration, per-level solves, rate fitting,
//! approximation coefficients, crime sweeps and their artifacts.

pub mod coefficients;
pub mod config;
pub mod family;
pub mod rates;
pub mod study;

pub use coefficients::{best_approx_error, measure_coefficients, CoefficientLevel, CoefficientReport, Measured};
pub use config::{
    CoefficientName, CoefficientSpec, CrimeData, CrimeSpec, MeshFamily, MeshSpec, NonlinearitySpec, OutputSpec,
    RateAssertion, RateNorm, SolverSpec, StudyConfig,
};
pub use family::{family_mesh, hierarchy, Hierarchy};
pub use rates::{fit_rate, fit_slope, RateCheck, RateFit, SlopeFit};
pub use study::{
    crime_csv, coefficients_csv, projection_csv, run_coefficient_study, run_crime_study, run_solve, run_study,
    solve_level, study_csv, study_files, trace_csv, write_artifacts, CoefficientStudyReport, CrimeStudyReport,
    LevelResult, ProjectionRow, RateReport, SolveReport,
};
