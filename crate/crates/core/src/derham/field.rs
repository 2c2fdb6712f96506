//! Scalar (0-form) fields on Whitney complexes: pointwise nonlinearities,
//! interpolation and quadrature of errors.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

use super::quadrature::simplex_rule;
use super::whitney::WhitneyComplex;
use crate::complex::Degree;
use crate::error::{Error, Result};
use crate::linalg;
use crate::semilinear::{GalerkinField, Nonlinearity};

/// Per-element geometric data for P1 functions.
pub(crate) struct Element {
    pub dofs: Vec<Option<usize>>,
    pub points: Vec<Vec<f64>>,
    pub volume: f64,
    /// Gradients of the barycentric coordinates (one column per vertex).
    pub grads: DMatrix<f64>,
}

impl Element {
    pub fn point(&self, bary: &[f64]) -> Vec<f64> {
        let amb = self.points[0].len();
        (0..amb).map(|r| bary.iter().zip(&self.points).map(|(b, p)| b * p[r]).sum()).collect()
    }

    pub fn value(&self, u: &DVector<f64>, bary: &[f64]) -> f64 {
        self.dofs.iter().zip(bary).map(|(d, b)| d.map_or(0.0, |i| u[i]) * b).sum()
    }

    pub fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.grads.nrows());
        for (j, d) in self.dofs.iter().enumerate() {
            if let Some(i) = d {
                g += self.grads.column(j) * u[*i];
            }
        }
        g
    }
}

pub(crate) fn elements(w: &WhitneyComplex) -> Vec<Element> {
    let mesh = &w.mesh;
    let d = mesh.dim();
    mesh.simplices(d)
        .iter()
        .map(|t| {
            let e = mesh.edge_matrix(t);
            let ginv = (e.transpose() * &e).try_inverse().expect("nondegenerate element");
            let g = &e * ginv;
            let mut grads = DMatrix::zeros(e.nrows(), d + 1);
            for j in 0..d {
                grads.set_column(j + 1, &g.column(j));
            }
            let g0 = -g.column_sum();
            grads.set_column(0, &g0);
            Element {
                dofs: t.iter().map(|&v| w.dof(0, v)).collect(),
                points: t.iter().map(|&v| mesh.vertices()[v].clone()).collect(),
                volume: mesh.volume(t),
                grads,
            }
        })
        .collect()
}

/// P1 scalar field on the 0-forms of a Whitney complex.
pub struct ScalarField<'a> {
    pub whitney: &'a WhitneyComplex,
    elements: Vec<Element>,
}

impl<'a> ScalarField<'a> {
    /// Pointwise nonlinearities are only defined on 0-forms.
    pub fn new(whitney: &'a WhitneyComplex, k: Degree) -> Result<Self> {
        if k != 0 {
            return Err(Error::UnsupportedDegree { degree: k });
        }
        Ok(Self {
            whitney,
            elements: elements(whitney),
        })
    }

    /// `∫ g(x) φ_i dx` for every 0-form dof.
    pub fn load_of_function(&self, g: impl Fn(&[f64]) -> f64, order: usize) -> DVector<f64> {
        let d = self.whitney.mesh.dim();
        let rule = simplex_rule(d, order);
        let mut b = DVector::zeros(self.whitney.ndofs(0));
        for el in &self.elements {
            for q in &rule {
                let x = el.point(&q.bary);
                let gv = g(&x) * q.weight * el.volume;
                for (j, dof) in el.dofs.iter().enumerate() {
                    if let Some(i) = dof {
                        b[*i] += gv * q.bary[j];
                    }
                }
            }
        }
        b
    }
}

impl GalerkinField for ScalarField<'_> {
    fn degree(&self) -> Degree {
        0
    }

    fn dim(&self) -> usize {
        self.whitney.ndofs(0)
    }

    fn pointwise_load(&self, f: &Nonlinearity, u: &DVector<f64>) -> Result<DVector<f64>> {
        let rule = simplex_rule(self.whitney.mesh.dim(), f.quadrature_order);
        let mut b = DVector::zeros(self.dim());
        for el in &self.elements {
            for q in &rule {
                let x = el.point(&q.bary);
                let gv = f.value(el.value(u, &q.bary), &x) * q.weight * el.volume;
                for (j, dof) in el.dofs.iter().enumerate() {
                    if let Some(i) = dof {
                        b[*i] += gv * q.bary[j];
                    }
                }
            }
        }
        Ok(b)
    }

    fn pointwise_jacobian(&self, f: &Nonlinearity, u: &DVector<f64>) -> Result<CsrMatrix<f64>> {
        let rule = simplex_rule(self.whitney.mesh.dim(), f.quadrature_order);
        let n = self.dim();
        let mut trips = Vec::new();
        for el in &self.elements {
            let nloc = el.dofs.len();
            let mut local = DMatrix::zeros(nloc, nloc);
            for q in &rule {
                let x = el.point(&q.bary);
                let dv = f.derivative(el.value(u, &q.bary), &x) * q.weight * el.volume;
                for a in 0..nloc {
                    for b in 0..nloc {
                        local[(a, b)] += dv * q.bary[a] * q.bary[b];
                    }
                }
            }
            for (a, da) in el.dofs.iter().enumerate() {
                for (b, db) in el.dofs.iter().enumerate() {
                    if let (Some(i), Some(j)) = (da, db) {
                        trips.push((*i, *j, local[(a, b)]));
                    }
                }
            }
        }
        Ok(linalg::csr_from_triplets(n, n, trips))
    }
}

/// Vertex samples of `g` on the 0-form dofs.
pub fn interpolate(w: &WhitneyComplex, g: impl Fn(&[f64]) -> f64) -> DVector<f64> {
    let verts = w.mesh.vertices();
    DVector::from_iterator(w.ndofs(0), w.dof_simplices(0).iter().map(|&v| g(&verts[v])))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldErrors {
    /// `‖u_h - u‖_{L²}`
    pub l2: f64,
    /// `|u_h - u|_{H¹}`
    pub h1_semi: f64,
}

impl FieldErrors {
    pub fn v(&self) -> f64 {
        self.l2.hypot(self.h1_semi)
    }
}

/// L² and H¹-seminorm errors of a P1 field against an exact solution, by
/// per-element quadrature of the given order.
pub fn field_errors(
    w: &WhitneyComplex,
    uh: &DVector<f64>,
    exact: impl Fn(&[f64]) -> f64,
    exact_grad: impl Fn(&[f64]) -> Vec<f64>,
    order: usize,
) -> FieldErrors {
    let rule = simplex_rule(w.mesh.dim(), order);
    let (mut l2, mut h1) = (0.0, 0.0);
    for el in elements(w) {
        let gh = el.gradient(uh);
        for q in &rule {
            let x = el.point(&q.bary);
            let e = el.value(uh, &q.bary) - exact(&x);
            let ge = exact_grad(&x);
            let de: f64 = gh.iter().zip(&ge).map(|(a, b)| (a - b).powi(2)).sum();
            l2 += q.weight * el.volume * e * e;
            h1 += q.weight * el.volume * de;
        }
    }
    FieldErrors {
        l2: l2.sqrt(),
        h1_semi: h1.sqrt(),
    }
}
