//! Lowest-order Whitney complexes on simplicial meshes.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mesh::{faces_of, SimplicialMesh};
use crate::complex::{Degree, HilbertComplex};
use crate::error::{Error, Result};
use crate::linalg;

/// Boundary treatment. `Essential` removes the degrees of freedom on boundary
/// simplices below top dimension (zero trace).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    #[default]
    Natural,
    Essential,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct AssemblyOptions {
    /// Compute element matrices on the rayon pool. Contributions are still
    /// summed in element order, so the result is bit-identical to serial.
    pub parallel: bool,
}

/// A Whitney complex together with the mesh and dof numbering it came from.
#[derive(Clone, Debug)]
pub struct WhitneyComplex {
    pub mesh: SimplicialMesh,
    pub flavor: Flavor,
    // dofs[k][simplex] = dof index, None when eliminated by the boundary condition
    dofs: Vec<Vec<Option<usize>>>,
    dof_simplex: Vec<Vec<usize>>,
    complex: HilbertComplex,
}

impl WhitneyComplex {
    pub fn complex(&self) -> &HilbertComplex {
        &self.complex
    }

    pub fn into_complex(self) -> HilbertComplex {
        self.complex
    }

    pub fn dof(&self, k: usize, simplex: usize) -> Option<usize> {
        self.dofs[k][simplex]
    }

    /// Simplex index of every dof of degree `k`.
    pub fn dof_simplices(&self, k: usize) -> &[usize] {
        &self.dof_simplex[k]
    }

    pub fn ndofs(&self, k: usize) -> usize {
        self.dof_simplex[k].len()
    }
}

pub(crate) fn dof_numbering(mesh: &SimplicialMesh, flavor: Flavor) -> Vec<Vec<Option<usize>>> {
    let d = mesh.dim();
    (0..=d)
        .map(|k| {
            let boundary = match flavor {
                Flavor::Essential => mesh.boundary_flags(k),
                Flavor::Natural => vec![false; mesh.count(k)],
            };
            let mut next = 0;
            boundary
                .iter()
                .map(|&b| {
                    if b {
                        None
                    } else {
                        next += 1;
                        Some(next - 1)
                    }
                })
                .collect()
        })
        .collect()
}

/// Gradient Gram `g_ij = ∇λ_i · ∇λ_j` of the barycentric coordinates and the
/// volume of a simplex.
pub(crate) fn barycentric_gradient_gram(mesh: &SimplicialMesh, s: &[usize]) -> (DMatrix<f64>, f64) {
    let d = s.len() - 1;
    let e = mesh.edge_matrix(s);
    let ginv = (e.transpose() * &e).try_inverse().expect("top simplices have positive volume");
    let mut g = DMatrix::zeros(d + 1, d + 1);
    for i in 0..d {
        for j in 0..d {
            g[(i + 1, j + 1)] = ginv[(i, j)];
        }
    }
    for j in 1..=d {
        let col: f64 = (1..=d).map(|i| g[(i, j)]).sum();
        g[(0, j)] = -col;
        g[(j, 0)] = -col;
    }
    g[(0, 0)] = -(1..=d).map(|j| g[(0, j)]).sum::<f64>();
    (g, mesh.volume(s))
}

/// Local Whitney mass matrix of degree `k` on a top simplex, rows and columns
/// ordered like `faces_of(0..=d, k)`.
pub(crate) fn element_mass(g: &DMatrix<f64>, vol: f64, d: usize, k: usize) -> DMatrix<f64> {
    let ll = |i: usize, j: usize| vol * if i == j { 2.0 } else { 1.0 } / ((d + 1) * (d + 2)) as f64;
    let local: Vec<usize> = (0..=d).collect();
    let faces = faces_of(&local, k);
    let n = faces.len();
    let mut m = DMatrix::zeros(n, n);
    for (p, f) in faces.iter().enumerate() {
        for (q, h) in faces.iter().enumerate() {
            m[(p, q)] = match k {
                0 => ll(f[0], h[0]),
                1 => {
                    let (a, b, c, e) = (f[0], f[1], h[0], h[1]);
                    ll(a, c) * g[(b, e)] - ll(a, e) * g[(b, c)] - ll(b, c) * g[(a, e)] + ll(b, e) * g[(a, c)]
                }
                2 if d == 2 => 1.0 / vol,
                _ => unreachable!("Whitney forms of degree {k} on a {d}-simplex"),
            };
        }
    }
    m
}

pub fn whitney_complex(mesh: &SimplicialMesh, flavor: Flavor) -> Result<WhitneyComplex> {
    whitney_complex_with(mesh, flavor, AssemblyOptions::default())
}

pub fn whitney_complex_with(mesh: &SimplicialMesh, flavor: Flavor, opts: AssemblyOptions) -> Result<WhitneyComplex> {
    let d = mesh.dim();
    if d > 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    let dofs = dof_numbering(mesh, flavor);
    let dof_simplex: Vec<Vec<usize>> = dofs
        .iter()
        .map(|per| per.iter().enumerate().filter_map(|(s, d)| d.map(|_| s)).collect())
        .collect();
    let tops = mesh.simplices(d);
    let element = |t: &Vec<usize>| -> Vec<DMatrix<f64>> {
        let (g, vol) = barycentric_gradient_gram(mesh, t);
        (0..=d).map(|k| element_mass(&g, vol, d, k)).collect()
    };
    let locals: Vec<Vec<DMatrix<f64>>> = if opts.parallel {
        tops.par_iter().map(element).collect()
    } else {
        tops.iter().map(element).collect()
    };

    let mut grams = Vec::with_capacity(d + 1);
    for k in 0..=d {
        let n = dof_simplex[k].len();
        let mut dense_rows: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); n];
        for (t, loc) in tops.iter().zip(&locals) {
            let global: Vec<Option<usize>> = faces_of(t, k)
                .iter()
                .map(|f| dofs[k][mesh.find(k, f).expect("faces exist")])
                .collect();
            let m = &loc[k];
            for (p, gp) in global.iter().enumerate() {
                let Some(i) = gp else { continue };
                for (q, gq) in global.iter().enumerate() {
                    let Some(j) = gq else { continue };
                    *dense_rows[*i].entry(*j).or_insert(0.0) += m[(p, q)];
                }
            }
        }
        let trips = dense_rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |(&j, &v)| (i, j, v)));
        grams.push(linalg::csr_from_triplets(n, n, trips));
    }

    let mut diffs = Vec::with_capacity(d);
    for k in 0..d {
        let mut trips = Vec::new();
        for s in mesh.simplices(k + 1) {
            let Some(row) = dofs[k + 1][mesh.find(k + 1, s).expect("indexed")] else { continue };
            for i in 0..s.len() {
                let mut face = s.clone();
                face.remove(i);
                if let Some(col) = dofs[k][mesh.find(k, &face).expect("faces exist")] {
                    trips.push((row, col, if i % 2 == 0 { 1.0 } else { -1.0 }));
                }
            }
        }
        diffs.push(linalg::csr_from_triplets(dof_simplex[k + 1].len(), dof_simplex[k].len(), trips));
    }
    let labels = (0..=d).map(|k| format!("Whitney {k}-forms")).collect();
    let complex = HilbertComplex::new(0 as Degree, grams, diffs, Some(labels))?;
    Ok(WhitneyComplex {
        mesh: mesh.clone(),
        flavor,
        dofs,
        dof_simplex,
        complex,
    })
}
