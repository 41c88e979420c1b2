//! Essential (Dirichlet-type) constraints, applied componentwise.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::medium::ObstacleKind;
use crate::mesh::Mesh;
use crate::source::FieldSource;

/// Which components of which nodes are fixed, and to what.
#[derive(Debug, Clone, PartialEq)]
pub struct EssentialBC {
    pub values: Vec<Option<Complex64>>,
}

/// Which components are constrained on ∂Ω and ∂D; identifies the reduced
/// operator independent of the constraint values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintPattern {
    /// Tangential on ∂Ω, normal on ∂D.
    Hard,
    /// Tangential on ∂Ω and ∂D.
    Soft,
}

impl From<ObstacleKind> for ConstraintPattern {
    fn from(k: ObstacleKind) -> Self {
        match k {
            ObstacleKind::Hard => ConstraintPattern::Hard,
            ObstacleKind::Soft => ConstraintPattern::Soft,
        }
    }
}

impl EssentialBC {
    pub fn new(ndof: usize) -> Self {
        EssentialBC { values: vec![None; ndof] }
    }

    pub fn set(&mut self, dof: usize, value: Complex64) -> Result<()> {
        match self.values[dof] {
            Some(old) if (old - value).norm() > 1e-12 * old.norm().max(value.norm()).max(1e-300) => {
                Err(Error::ConstraintConflict { node: dof / 3, component: dof % 3 })
            }
            _ => {
                self.values[dof] = Some(value);
                Ok(())
            }
        }
    }

    pub fn mask(&self) -> Vec<bool> {
        self.values.iter().map(Option::is_some).collect()
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Lift vector: constraint values at fixed DOFs, zero elsewhere.
    pub fn lift(&self) -> Vec<Complex64> {
        self.values.iter().map(|v| v.unwrap_or_default()).collect()
    }

    /// Every DOF fixed to the interpolant of `field`.
    pub fn everywhere(mesh: &Mesh, field: &FieldSource) -> Result<Self> {
        let mut bc = EssentialBC::new(3 * mesh.num_nodes());
        for (p, &x) in mesh.nodes.iter().enumerate() {
            let e = field.eval(x)?.e;
            for c in 0..3 {
                bc.set(3 * p + c, e[c])?;
            }
        }
        Ok(bc)
    }

    /// Constraints of the mixed problem: the tangential components of
    /// `outer` on ∂Ω (all three at box edges and corners), the components of
    /// `interface` prescribed on ∂D by `pattern`, and zero at nodes not
    /// touching any annulus cell.
    pub fn for_problem(mesh: &Mesh, pattern: ConstraintPattern, outer: &FieldSource, interface: &FieldSource) -> Result<Self> {
        let mut bc = EssentialBC::new(3 * mesh.num_nodes());
        for (p, &active) in mesh.active.iter().enumerate() {
            if !active {
                for c in 0..3 {
                    bc.set(3 * p + c, Complex64::default())?;
                }
            }
        }
        let mut comps = vec![[false; 3]; mesh.num_nodes()];
        for f in &mesh.outer_facets {
            for &p in &f.nodes {
                for c in 0..3 {
                    if c != f.axis {
                        comps[p][c] = true;
                    }
                }
            }
        }
        apply_components(mesh, &comps, outer, &mut bc)?;
        let mut comps = vec![[false; 3]; mesh.num_nodes()];
        for f in &mesh.interface_facets {
            for &p in &f.nodes {
                for c in 0..3 {
                    let fixed = match pattern {
                        ConstraintPattern::Hard => c == f.axis,
                        ConstraintPattern::Soft => c != f.axis,
                    };
                    if fixed {
                        comps[p][c] = true;
                    }
                }
            }
        }
        apply_components(mesh, &comps, interface, &mut bc)?;
        Ok(bc)
    }
}

fn apply_components(mesh: &Mesh, comps: &[[bool; 3]], field: &FieldSource, bc: &mut EssentialBC) -> Result<()> {
    let zero = field.is_zero();
    for (p, cs) in comps.iter().enumerate() {
        if !cs.iter().any(|&b| b) {
            continue;
        }
        let e = if zero { [Complex64::default(); 3] } else { field.eval(mesh.nodes[p])?.e };
        for c in 0..3 {
            if cs[c] {
                bc.set(3 * p + c, e[c])?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::DomainGeometry;
    use crate::mesh::build_mesh;

    #[test]
    fn conflicting_values_are_rejected() {
        let mut bc = EssentialBC::new(6);
        bc.set(4, Complex64::new(1.0, 0.0)).unwrap();
        bc.set(4, Complex64::new(1.0, 0.0)).unwrap();
        let err = bc.set(4, Complex64::new(2.0, 0.0)).unwrap_err();
        assert_eq!(err, Error::ConstraintConflict { node: 1, component: 1 });
    }

    #[test]
    fn outer_pattern_counts() {
        let g = DomainGeometry::default_experiment();
        let mesh = build_mesh(&g, 8).unwrap();
        let bc = EssentialBC::for_problem(&mesh, ConstraintPattern::Hard, &FieldSource::Zero, &FieldSource::Zero).unwrap();
        // 9³ nodes; outer face interiors fix 2 components, edges and corners 3.
        let face_interior = 6 * 7 * 7 * 2;
        let edges = 12 * 7 * 3;
        let corners = 8 * 3;
        // obstacle 3×3×3 node block around the centre: the centre node is
        // inactive (3), face nodes fix 1, edge nodes 2, corners 3.
        let obstacle = 3 + 6 + 12 * 2 + 8 * 3;
        assert_eq!(bc.count(), face_interior + edges + corners + obstacle);
        let soft = EssentialBC::for_problem(&mesh, ConstraintPattern::Soft, &FieldSource::Zero, &FieldSource::Zero).unwrap();
        let obstacle_soft = 3 + 6 * 2 + 12 * 3 + 8 * 3;
        assert_eq!(soft.count(), face_interior + edges + corners + obstacle_soft);
    }
}
