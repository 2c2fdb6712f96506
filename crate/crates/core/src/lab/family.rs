//! Mesh families and nested refinement hierarchies.

use crate::derham::{
    cycle_mesh, ellipse_cycle_mesh, refine_mesh, triangulated_square_mesh, unit_interval_mesh, whitney_complex,
    Flavor, ProlongationMorphism, SimplicialMesh, WhitneyComplex,
};
use crate::error::Result;

use super::config::{MeshFamily, MeshSpec};

/// The mesh of resolution `n` in a family, built directly (not by refinement).
pub fn family_mesh(spec: &MeshSpec, n: usize) -> Result<SimplicialMesh> {
    match spec.family {
        MeshFamily::Interval => unit_interval_mesh(n),
        MeshFamily::Square => triangulated_square_mesh(n),
        MeshFamily::Cycle => cycle_mesh(n),
        MeshFamily::Ellipse => {
            let [a, b] = spec.ellipse.unwrap_or([1.0, 1.0]);
            ellipse_cycle_mesh(n, a, b)
        }
    }
}

/// Whitney complexes on successive uniform refinements of one base mesh,
/// with prolongations from every level into the finest.
pub struct Hierarchy {
    pub complexes: Vec<WhitneyComplex>,
    /// `to_finest[l]` maps level `l` into the last level.
    pub to_finest: Vec<ProlongationMorphism>,
}

impl Hierarchy {
    pub fn finest(&self) -> &WhitneyComplex {
        self.complexes.last().expect("hierarchy is nonempty")
    }
}

/// `refinements` uniform refinements of the family mesh at resolution `n`.
/// Ellipse meshes keep their new vertices on the curve.
pub fn hierarchy(spec: &MeshSpec, flavor: Flavor, n: usize, refinements: usize) -> Result<Hierarchy> {
    let mut meshes = vec![family_mesh(spec, n)?];
    let mut steps = Vec::with_capacity(refinements);
    for _ in 0..refinements {
        let mut r = refine_mesh(meshes.last().expect("nonempty"))?;
        if spec.family == MeshFamily::Ellipse {
            let [a, b] = spec.ellipse.unwrap_or([1.0, 1.0]);
            r = r.snap_to_ellipse(a, b)?;
        }
        steps.push(r.prolongation(flavor));
        meshes.push(r.fine);
    }
    let complexes = meshes
        .iter()
        .map(|m| whitney_complex(m, flavor))
        .collect::<Result<Vec<_>>>()?;
    let mut to_finest = vec![ProlongationMorphism::identity(complexes.last().expect("nonempty").complex())];
    for step in steps.iter().rev() {
        let next = step.then(to_finest.last().expect("nonempty"));
        to_finest.push(next);
    }
    to_finest.reverse();
    Ok(Hierarchy { complexes, to_finest })
}
