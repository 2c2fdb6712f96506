//! Semilinear problems `**L** **u** + F **u** = f` through the abstract
//! Hammerstein equation `**u** + **K** F **u** = **K** f`.

pub mod hammerstein;
pub mod nonlinearity;

use nalgebra::DVector;
use serde::Serialize;

pub use hammerstein::{
    bold_k_norm_into_intersection, solution_map_lipschitz_probe, solve_hammerstein, solve_hammerstein_load,
    HammersteinOptions, LipschitzProbe, ProbeNorm, SemilinearSolution, Strategy,
};
pub use nonlinearity::{
    admissibility, check_monotone, evaluate_f, evaluate_jacobian, hemicontinuity_probe, local_lipschitz_guard,
    Admissibility, Coefficient, GalerkinField, Lipschitz, LumpedField, MonotoneReport, Nonlinearity,
    NonlinearityKind,
};

#[derive(Clone, Debug, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub residual: f64,
    pub damping: f64,
}

/// Iteration record of a Hammerstein solve.
#[derive(Clone, Debug)]
pub struct HammersteinState {
    pub iterate: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub damping: f64,
    pub converged: bool,
    pub history: Vec<TraceRow>,
}

impl HammersteinState {
    /// Trace as CSV with columns `iteration,residual,damping`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,residual,damping\n");
        for r in &self.history {
            out.push_str(&format!("{},{:.12e},{:.6e}\n", r.iteration, r.residual, r.damping));
        }
        out
    }
}
