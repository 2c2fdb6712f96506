//! Simplicial meshes in one and two dimensions.
//!
//! Every simplex is stored as its ascending vertex list, which fixes its
//! orientation. Simplices of each dimension are kept in lexicographic order,
//! so two meshes with the same simplices listed in a different order are
//! numbered identically.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SimplicialMesh {
    vertices: Vec<Vec<f64>>,
    // simplices[k][i] = ascending vertex list of the i-th k-simplex
    simplices: Vec<Vec<Vec<usize>>>,
    index: Vec<HashMap<Vec<usize>, usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshJson {
    vertices: Vec<Vec<f64>>,
    simplices: Vec<Vec<Vec<usize>>>,
}

fn all_faces(simplex: &[usize], k: usize, out: &mut Vec<Vec<usize>>) {
    // every (k+1)-element subset, in lexicographic order of positions
    let n = simplex.len();
    let mut pick: Vec<usize> = (0..=k).collect();
    loop {
        out.push(pick.iter().map(|&p| simplex[p]).collect());
        let mut i = k as isize;
        while i >= 0 && pick[i as usize] == n - (k + 1) + i as usize {
            i -= 1;
        }
        if i < 0 {
            break;
        }
        pick[i as usize] += 1;
        for j in (i as usize + 1)..=k {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

impl SimplicialMesh {
    /// Builds the mesh from its top-dimensional simplices; all faces are
    /// generated.
    pub fn from_top_simplices(vertices: Vec<Vec<f64>>, tops: Vec<Vec<usize>>) -> Result<Self> {
        if tops.is_empty() {
            return Err(Error::InvalidMesh("no simplices".into()));
        }
        let d = tops[0].len() - 1;
        if d == 0 || d > 2 {
            return Err(Error::UnsupportedDimension(d));
        }
        let mut simplices = vec![Vec::new(); d + 1];
        for t in &tops {
            if t.len() != d + 1 {
                return Err(Error::InvalidMesh("top simplices of mixed dimension".into()));
            }
            let mut s = t.clone();
            s.sort_unstable();
            for k in 0..=d {
                all_faces(&s, k, &mut simplices[k]);
            }
        }
        for (k, list) in simplices.iter_mut().enumerate() {
            list.sort();
            if k < d {
                list.dedup();
            }
        }
        Self::from_parts(vertices, simplices)
    }

    /// Builds the mesh from explicit per-dimension simplex lists and checks it.
    pub fn from_parts(vertices: Vec<Vec<f64>>, mut simplices: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let d = simplices.len().saturating_sub(1);
        if d == 0 || d > 2 {
            return Err(Error::UnsupportedDimension(d));
        }
        let amb = vertices.first().map_or(0, Vec::len);
        if amb < d || vertices.iter().any(|v| v.len() != amb) {
            return Err(Error::InvalidMesh("vertex coordinates of inconsistent or too small dimension".into()));
        }
        for (k, list) in simplices.iter_mut().enumerate() {
            for s in list.iter_mut() {
                if s.len() != k + 1 {
                    return Err(Error::InvalidMesh(format!("{k}-simplex with {} vertices", s.len())));
                }
                if s.iter().any(|&v| v >= vertices.len()) {
                    return Err(Error::InvalidMesh(format!("{k}-simplex {s:?} references a missing vertex")));
                }
                s.sort_unstable();
                if s.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::InvalidMesh(format!("degenerate {k}-simplex {s:?}")));
                }
            }
            list.sort();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidMesh(format!("duplicate {k}-simplex")));
            }
        }
        if simplices[0].len() != vertices.len() {
            return Err(Error::InvalidMesh("every vertex must be listed as a 0-simplex".into()));
        }
        let index: Vec<HashMap<Vec<usize>, usize>> = simplices
            .iter()
            .map(|list| list.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect())
            .collect();
        let mesh = Self {
            vertices,
            simplices,
            index,
        };
        for k in 1..=d {
            for s in &mesh.simplices[k] {
                let mut faces = Vec::new();
                all_faces(s, k - 1, &mut faces);
                if let Some(f) = faces.iter().find(|f| !mesh.index[k - 1].contains_key(*f)) {
                    return Err(Error::InvalidMesh(format!("face {f:?} of {s:?} is missing")));
                }
            }
        }
        for t in &mesh.simplices[d] {
            let vol = mesh.volume(t);
            if !(vol > 0.0) {
                return Err(Error::InvalidMesh(format!("top simplex {t:?} has zero volume")));
            }
        }
        Ok(mesh)
    }

    /// Same topology with new vertex coordinates.
    pub fn with_points(&self, vertices: Vec<Vec<f64>>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::InvalidMesh("vertex count changed".into()));
        }
        Self::from_parts(vertices, self.simplices.clone())
    }

    pub fn dim(&self) -> usize {
        self.simplices.len() - 1
    }

    pub fn ambient_dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn simplices(&self, k: usize) -> &[Vec<usize>] {
        &self.simplices[k]
    }

    pub fn count(&self, k: usize) -> usize {
        self.simplices.get(k).map_or(0, Vec::len)
    }

    pub fn find(&self, k: usize, verts: &[usize]) -> Option<usize> {
        self.index[k].get(verts).copied()
    }

    /// Edge vectors `p_i - p_0` as columns (ambient x k).
    pub fn edge_matrix(&self, s: &[usize]) -> DMatrix<f64> {
        let p0 = &self.vertices[s[0]];
        let amb = self.ambient_dim();
        DMatrix::from_fn(amb, s.len() - 1, |r, c| self.vertices[s[c + 1]][r] - p0[r])
    }

    /// Unsigned k-volume of a simplex.
    pub fn volume(&self, s: &[usize]) -> f64 {
        let k = s.len() - 1;
        if k == 0 {
            return 1.0;
        }
        let e = self.edge_matrix(s);
        let g = e.transpose() * &e;
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        g.determinant().max(0.0).sqrt() / fact
    }

    pub fn diameter(&self, s: &[usize]) -> f64 {
        let mut h: f64 = 0.0;
        for i in 0..s.len() {
            for j in (i + 1)..s.len() {
                let (a, b) = (&self.vertices[s[i]], &self.vertices[s[j]]);
                h = h.max(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt());
            }
        }
        h
    }

    /// Mesh parameter: largest top-simplex diameter.
    pub fn h(&self) -> f64 {
        self.simplices[self.dim()].iter().map(|s| self.diameter(s)).fold(0.0, f64::max)
    }

    /// Boundary flags per k-simplex: a simplex is on the boundary when it lies
    /// in a facet shared by only one top simplex.
    pub fn boundary_flags(&self, k: usize) -> Vec<bool> {
        let d = self.dim();
        let mut flags = vec![false; self.count(k)];
        if k >= d {
            return flags;
        }
        let mut facet_count = vec![0usize; self.count(d - 1)];
        for t in &self.simplices[d] {
            let mut faces = Vec::new();
            all_faces(t, d - 1, &mut faces);
            for f in faces {
                facet_count[self.index[d - 1][&f]] += 1;
            }
        }
        for (fi, &c) in facet_count.iter().enumerate() {
            if c == 1 {
                let mut sub = Vec::new();
                all_faces(&self.simplices[d - 1][fi], k, &mut sub);
                for s in sub {
                    flags[self.index[k][&s]] = true;
                }
            }
        }
        flags
    }

    pub fn to_json(&self) -> Result<String> {
        let raw = MeshJson {
            vertices: self.vertices.clone(),
            simplices: self.simplices.clone(),
        };
        Ok(serde_json::to_string_pretty(&raw)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: MeshJson = serde_json::from_str(text)?;
        Self::from_parts(raw.vertices, raw.simplices)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub(crate) fn faces_of(s: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    all_faces(s, k, &mut out);
    out
}

/// `n` equal elements on `[0, 1]`.
pub fn unit_interval_mesh(n: usize) -> Result<SimplicialMesh> {
    if n == 0 {
        return Err(Error::InvalidMesh("interval mesh needs at least one element".into()));
    }
    let vertices = (0..=n).map(|i| vec![i as f64 / n as f64]).collect();
    let tops = (0..n).map(|i| vec![i, i + 1]).collect();
    SimplicialMesh::from_top_simplices(vertices, tops)
}

/// `n` vertices on the ellipse `(a cos θ, b sin θ)` joined into a cycle.
pub fn ellipse_cycle_mesh(n: usize, a: f64, b: f64) -> Result<SimplicialMesh> {
    if n < 3 {
        return Err(Error::InvalidMesh("a cycle needs at least 3 vertices".into()));
    }
    let vertices = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            vec![a * t.cos(), b * t.sin()]
        })
        .collect();
    let tops = (0..n).map(|i| vec![i, (i + 1) % n]).collect();
    SimplicialMesh::from_top_simplices(vertices, tops)
}

/// Regular `n`-gon on the unit circle (circle topology).
pub fn cycle_mesh(n: usize) -> Result<SimplicialMesh> {
    ellipse_cycle_mesh(n, 1.0, 1.0)
}

/// `[0,1]²` split into `n x n` squares, each cut along its main diagonal.
pub fn triangulated_square_mesh(n: usize) -> Result<SimplicialMesh> {
    if n == 0 {
        return Err(Error::InvalidMesh("square mesh needs at least one cell per side".into()));
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(vec![i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut tops = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            tops.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            tops.push(vec![id(i, j), id(i, j + 1), id(i + 1, j + 1)]);
        }
    }
    SimplicialMesh::from_top_simplices(vertices, tops)
}
