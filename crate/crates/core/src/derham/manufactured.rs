//! Manufactured solutions of `-Δu + u^m = f` with zero Dirichlet data.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::field::{field_errors, FieldErrors, ScalarField};
use super::whitney::{Flavor, WhitneyComplex};
use crate::error::{Error, Result};
use crate::semilinear::Nonlinearity;

/// Quadrature order used for manufactured load vectors.
pub const LOAD_ORDER: usize = 8;
/// Quadrature order used for error norms.
pub const ERROR_ORDER: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    /// `u = sin(πx)` on `[0,1]`, linear.
    IntervalLinear,
    /// `u = sin(πx)` on `[0,1]`, `F u = u³`.
    IntervalCubic,
    /// `u = sin(πx) sin(πy)` on `[0,1]²`, linear.
    SquareLinear,
    /// `u = sin(πx) sin(πy)` on `[0,1]²`, `F u = u³`.
    SquareCubic,
}

impl Case {
    pub const ALL: [Case; 4] = [Case::IntervalLinear, Case::IntervalCubic, Case::SquareLinear, Case::SquareCubic];

    pub fn name(self) -> &'static str {
        match self {
            Case::IntervalLinear => "interval_linear",
            Case::IntervalCubic => "interval_cubic",
            Case::SquareLinear => "square_linear",
            Case::SquareCubic => "square_cubic",
        }
    }

    pub fn from_name(name: &str) -> Result<Case> {
        Case::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::UnknownCase(name.to_string()))
    }

    pub fn dim(self) -> usize {
        match self {
            Case::IntervalLinear | Case::IntervalCubic => 1,
            Case::SquareLinear | Case::SquareCubic => 2,
        }
    }

    pub fn exponent(self) -> Option<u32> {
        match self {
            Case::IntervalCubic | Case::SquareCubic => Some(3),
            _ => None,
        }
    }

    pub fn nonlinearity(self) -> Nonlinearity {
        match self.exponent() {
            Some(m) => Nonlinearity::odd_power(m),
            None => Nonlinearity::zero(),
        }
    }

    pub fn exact(self, x: &[f64]) -> f64 {
        match self.dim() {
            1 => (PI * x[0]).sin(),
            _ => (PI * x[0]).sin() * (PI * x[1]).sin(),
        }
    }

    pub fn exact_grad(self, x: &[f64]) -> Vec<f64> {
        match self.dim() {
            1 => vec![PI * (PI * x[0]).cos()],
            _ => vec![
                PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
            ],
        }
    }

    /// `f = -Δu + u^m`.
    pub fn source(self, x: &[f64]) -> f64 {
        let u = self.exact(x);
        let lap = self.dim() as f64 * PI * PI * u;
        match self.exponent() {
            Some(m) => lap + u.powi(m as i32),
            None => lap,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ManufacturedProblem {
    pub case: Case,
    /// `⟨f, φ_i⟩` on the 0-form dofs.
    pub load: DVector<f64>,
    pub nonlinearity: Nonlinearity,
}

impl ManufacturedProblem {
    pub fn errors(&self, w: &WhitneyComplex, uh: &DVector<f64>) -> FieldErrors {
        let case = self.case;
        field_errors(w, uh, |x| case.exact(x), |x| case.exact_grad(x), ERROR_ORDER)
    }
}

/// Builds the load vector of a named case on the 0-forms of `w`, which must be
/// an essential-flavor complex on a mesh of the case's dimension.
pub fn manufactured_problem(name: &str, w: &WhitneyComplex) -> Result<ManufacturedProblem> {
    let case = Case::from_name(name)?;
    if w.mesh.dim() != case.dim() {
        return Err(Error::Config(format!(
            "case {name} needs a {}-dimensional mesh, got {}",
            case.dim(),
            w.mesh.dim()
        )));
    }
    if w.flavor != Flavor::Essential {
        return Err(Error::Config(format!("case {name} needs the essential (zero-trace) flavor")));
    }
    let field = ScalarField::new(w, 0)?;
    let load = field.load_of_function(|x| case.source(x), LOAD_ORDER);
    Ok(ManufacturedProblem {
        case,
        load,
        nonlinearity: case.nonlinearity(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derham::mesh::unit_interval_mesh;
    use crate::derham::whitney::whitney_complex;

    #[test]
    fn unknown_case_is_rejected() {
        let w = whitney_complex(&unit_interval_mesh(4).unwrap(), Flavor::Essential).unwrap();
        assert!(matches!(manufactured_problem("nope", &w), Err(Error::UnknownCase(_))));
        assert!(manufactured_problem("square_linear", &w).is_err());
    }

    #[test]
    fn exact_solution_range_keeps_unit_clamp_inactive() {
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            let u = Case::IntervalCubic.exact(&[x]);
            assert!((0.0..=1.0).contains(&u));
        }
    }
}
