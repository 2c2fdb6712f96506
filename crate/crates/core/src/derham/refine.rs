//! Uniform refinement (1D bisection, 2D red) with the induced prolongation
//! `i_h` and canonical de Rham projection `π_h` between Whitney complexes.

use std::collections::BTreeMap;

use nalgebra::Matrix3;
use nalgebra_sparse::CsrMatrix;

use super::mesh::{faces_of, SimplicialMesh};
use super::whitney::{dof_numbering, Flavor};
use crate::complex::{Degree, HilbertComplex};
use crate::error::{Error, Result};
use crate::linalg;

/// Per-degree injections (coarse → fine) and projections (fine → coarse).
#[derive(Clone, Debug)]
pub struct ProlongationMorphism {
    pub inject: Vec<CsrMatrix<f64>>,
    pub project: Vec<CsrMatrix<f64>>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MorphismCheck {
    /// `max |D_fine i - i D_coarse|`
    pub commutes_inject: f64,
    /// `max |π i - I|`
    pub left_inverse: f64,
    /// `max |D_coarse π - π D_fine|`
    pub commutes_project: f64,
}

impl ProlongationMorphism {
    pub fn inject(&self, k: Degree) -> &CsrMatrix<f64> {
        &self.inject[k as usize]
    }

    pub fn project(&self, k: Degree) -> &CsrMatrix<f64> {
        &self.project[k as usize]
    }

    /// `self` followed by `next` (coarse → mid → fine).
    pub fn then(&self, next: &ProlongationMorphism) -> ProlongationMorphism {
        ProlongationMorphism {
            inject: next.inject.iter().zip(&self.inject).map(|(a, b)| a * b).collect(),
            project: self.project.iter().zip(&next.project).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn identity(c: &HilbertComplex) -> ProlongationMorphism {
        let ids: Vec<_> = c.degrees().map(|k| linalg::identity_csr(c.dim(k))).collect();
        ProlongationMorphism {
            inject: ids.clone(),
            project: ids,
        }
    }

    pub fn check(&self, coarse: &HilbertComplex, fine: &HilbertComplex) -> MorphismCheck {
        let mut out = MorphismCheck::default();
        for k in coarse.degrees() {
            let pi = linalg::to_dense(&(self.project(k) * self.inject(k)));
            let id = nalgebra::DMatrix::identity(pi.nrows(), pi.ncols());
            out.left_inverse = out.left_inverse.max((pi - id).amax());
            if k < coarse.k_max() {
                let a = fine.diff(k) * self.inject(k);
                let b = self.inject(k + 1) * coarse.diff(k);
                out.commutes_inject = out.commutes_inject.max(linalg::max_abs(&(&a - &b)));
                let a = coarse.diff(k) * self.project(k);
                let b = self.project(k + 1) * fine.diff(k);
                out.commutes_project = out.commutes_project.max(linalg::max_abs(&(&a - &b)));
            }
        }
        out
    }
}

/// Parent data of a uniform refinement.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub coarse: SimplicialMesh,
    pub fine: SimplicialMesh,
    // for each fine top simplex: parent top simplex and the barycentric
    // coordinates (w.r.t. the parent's vertices) of its sorted vertices
    parent: Vec<usize>,
    bary: Vec<Vec<Vec<f64>>>,
}

/// Integral of the Whitney form of the local face `sigma` over the simplex
/// whose vertices have barycentric rows `rows`.
fn whitney_integral(sigma: &[usize], rows: &[Vec<f64>]) -> f64 {
    match sigma.len() {
        1 => rows[0][sigma[0]],
        2 => {
            let (i, j) = (sigma[0], sigma[1]);
            let mid = |l: usize| 0.5 * (rows[0][l] + rows[1][l]);
            let del = |l: usize| rows[1][l] - rows[0][l];
            mid(i) * del(j) - mid(j) * del(i)
        }
        3 => Matrix3::from_fn(|r, c| rows[r][sigma[c]]).determinant(),
        _ => unreachable!(),
    }
}

pub fn refine_mesh(mesh: &SimplicialMesh) -> Result<Refinement> {
    let d = mesh.dim();
    let nv = mesh.count(0);
    let mut vertices = mesh.vertices().to_vec();
    for e in mesh.simplices(1) {
        let (a, b) = (&mesh.vertices()[e[0]], &mesh.vertices()[e[1]]);
        vertices.push(a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect());
    }
    let mid = |a: usize, b: usize| nv + mesh.find(1, &[a.min(b), a.max(b)]).expect("edge exists");
    let unit = |i: usize| {
        let mut v = vec![0.0; d + 1];
        v[i] = 1.0;
        v
    };
    let half = |i: usize, j: usize| {
        let mut v = vec![0.0; d + 1];
        v[i] = 0.5;
        v[j] = 0.5;
        v
    };
    let mut tops = Vec::new();
    let mut parent = Vec::new();
    let mut bary: Vec<Vec<Vec<f64>>> = Vec::new();
    for (ti, t) in mesh.simplices(d).iter().enumerate() {
        let children: Vec<Vec<(usize, Vec<f64>)>> = match d {
            1 => {
                let m = (mid(t[0], t[1]), half(0, 1));
                vec![vec![(t[0], unit(0)), m.clone()], vec![(t[1], unit(1)), m]]
            }
            2 => {
                let ab = (mid(t[0], t[1]), half(0, 1));
                let ac = (mid(t[0], t[2]), half(0, 2));
                let bc = (mid(t[1], t[2]), half(1, 2));
                vec![
                    vec![(t[0], unit(0)), ab.clone(), ac.clone()],
                    vec![(t[1], unit(1)), ab.clone(), bc.clone()],
                    vec![(t[2], unit(2)), ac.clone(), bc.clone()],
                    vec![ab, ac, bc],
                ]
            }
            _ => return Err(Error::UnsupportedDimension(d)),
        };
        for mut c in children {
            c.sort_by_key(|(v, _)| *v);
            tops.push(c.iter().map(|(v, _)| *v).collect::<Vec<_>>());
            bary.push(c.into_iter().map(|(_, b)| b).collect());
            parent.push(ti);
        }
    }
    let fine = SimplicialMesh::from_top_simplices(vertices, tops.clone())?;
    // from_top_simplices reorders tops lexicographically; follow that order
    let mut order: Vec<usize> = (0..tops.len()).collect();
    order.sort_by(|&a, &b| tops[a].cmp(&tops[b]));
    Ok(Refinement {
        coarse: mesh.clone(),
        fine,
        parent: order.iter().map(|&i| parent[i]).collect(),
        bary: order.iter().map(|&i| bary[i].clone()).collect(),
    })
}

impl Refinement {
    /// Moves the midpoint vertices of a refined ellipse cycle onto the curve
    /// `(a cos θ, b sin θ)` at the parameter midpoint of their edge.
    pub fn snap_to_ellipse(mut self, a: f64, b: f64) -> Result<Self> {
        let nv = self.coarse.count(0);
        let theta = |p: &[f64]| (p[1] / b).atan2(p[0] / a);
        let mut pts = self.fine.vertices().to_vec();
        for (e, edge) in self.coarse.simplices(1).iter().enumerate() {
            let t0 = theta(&self.coarse.vertices()[edge[0]]);
            let mut t1 = theta(&self.coarse.vertices()[edge[1]]);
            if t1 - t0 > std::f64::consts::PI {
                t1 -= 2.0 * std::f64::consts::PI;
            } else if t0 - t1 > std::f64::consts::PI {
                t1 += 2.0 * std::f64::consts::PI;
            }
            let t = 0.5 * (t0 + t1);
            pts[nv + e] = vec![a * t.cos(), b * t.sin()];
        }
        self.fine = self.fine.with_points(pts)?;
        Ok(self)
    }

    pub fn prolongation(&self, flavor: Flavor) -> ProlongationMorphism {
        let d = self.coarse.dim();
        let cdofs = dof_numbering(&self.coarse, flavor);
        let fdofs = dof_numbering(&self.fine, flavor);
        let local: Vec<usize> = (0..=d).collect();
        let mut inject = Vec::new();
        let mut project = Vec::new();
        for k in 0..=d {
            let local_faces = faces_of(&local, k);
            let mut i_map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            let mut p_map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for (ci, child) in self.fine.simplices(d).iter().enumerate() {
                let t = &self.coarse.simplices(d)[self.parent[ci]];
                let rows = &self.bary[ci];
                let child_local: Vec<usize> = (0..=d).collect();
                for tau_local in faces_of(&child_local, k) {
                    let tau: Vec<usize> = tau_local.iter().map(|&p| child[p]).collect();
                    let tau_rows: Vec<Vec<f64>> = tau_local.iter().map(|&p| rows[p].clone()).collect();
                    let Some(fd) = fdofs[k][self.fine.find(k, &tau).expect("fine face")] else { continue };
                    for sigma_local in &local_faces {
                        let sigma: Vec<usize> = sigma_local.iter().map(|&p| t[p]).collect();
                        let Some(cd) = cdofs[k][self.coarse.find(k, &sigma).expect("coarse face")] else {
                            continue;
                        };
                        let v = whitney_integral(sigma_local, &tau_rows);
                        if v.abs() < 1e-14 {
                            continue;
                        }
                        i_map.insert((fd, cd), v);
                        let inside = tau_rows
                            .iter()
                            .all(|r| r.iter().enumerate().all(|(l, &x)| x == 0.0 || sigma_local.contains(&l)));
                        if inside {
                            p_map.insert((cd, fd), v.signum());
                        }
                    }
                }
            }
            let (nf, nc) = (fdofs[k].iter().flatten().count(), cdofs[k].iter().flatten().count());
            inject.push(linalg::csr_from_triplets(nf, nc, i_map.into_iter().map(|((r, c), v)| (r, c, v))));
            project.push(linalg::csr_from_triplets(nc, nf, p_map.into_iter().map(|((r, c), v)| (r, c, v))));
        }
        ProlongationMorphism { inject, project }
    }
}

/// One uniform refinement step and its prolongation.
pub fn refine_uniform(mesh: &SimplicialMesh, flavor: Flavor) -> Result<(SimplicialMesh, ProlongationMorphism)> {
    let r = refine_mesh(mesh)?;
    let p = r.prolongation(flavor);
    Ok((r.fine, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derham::mesh::*;
    use crate::derham::whitney::whitney_complex;
    use nalgebra::DVector;

    #[test]
    fn constants_prolong_to_constants() {
        let mesh = triangulated_square_mesh(2).unwrap();
        let (fine, p) = refine_uniform(&mesh, Flavor::Natural).unwrap();
        let one = DVector::from_element(mesh.count(0), 1.0);
        let fine_one = linalg::spmv(p.inject(0), &one);
        assert_eq!(fine_one, DVector::from_element(fine.count(0), 1.0));
    }

    #[test]
    fn interval_refinement_halves_h() {
        let (fine, _) = refine_uniform(&unit_interval_mesh(4).unwrap(), Flavor::Natural).unwrap();
        assert_eq!(fine.h(), 0.125);
        assert_eq!(fine.count(1), 8);
    }

    #[test]
    fn square_morphism_is_exact() {
        for flavor in [Flavor::Natural, Flavor::Essential] {
            let mesh = triangulated_square_mesh(2).unwrap();
            let (fine, p) = refine_uniform(&mesh, flavor).unwrap();
            let c = whitney_complex(&mesh, flavor).unwrap();
            let f = whitney_complex(&fine, flavor).unwrap();
            let chk = p.check(c.complex(), f.complex());
            assert_eq!(chk.commutes_inject, 0.0);
            assert_eq!(chk.left_inverse, 0.0);
            assert_eq!(chk.commutes_project, 0.0);
        }
    }

    #[test]
    fn snapped_cycle_keeps_topology() {
        let mesh = ellipse_cycle_mesh(6, 2.0, 1.0).unwrap();
        let r = refine_mesh(&mesh).unwrap().snap_to_ellipse(2.0, 1.0).unwrap();
        for p in r.fine.vertices() {
            assert!(((p[0] / 2.0).powi(2) + p[1].powi(2) - 1.0).abs() < 1e-14);
        }
        assert_eq!(r.fine.count(1), 12);
    }
}
