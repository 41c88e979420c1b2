//! Interchangeable finite element spaces over the same node-blocked storage.

use std::fmt::Debug;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mesh::{reentrant_edges, Mesh};
use crate::registry::Registry;
use crate::source::FieldSource;
use crate::vec3::{Cplx3, CZERO3};

use super::assembly::{assemble_matrix, BilinearFormSpec};
use super::bc::{ConstraintPattern, EssentialBC};
use super::sparse::BlockMatrix;
use super::{edge, facet_values, BoundaryMass, FieldSolution};

/// How the coefficients of a [`FieldSolution`] are to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Trilinear nodal vectors.
    Nodal,
    /// Lowest-order edge elements.
    Edge,
}

/// Turns weak boundary fluxes `∮ W·φ_i` into values of `W` at the outer
/// quadrature points.
pub trait FluxRepresentation: Send + Sync + Debug {
    fn represent(&self, mesh: &Mesh, r: &[Complex64]) -> Vec<[Cplx3; 4]>;
}

pub trait Discretization: Send + Sync + Debug {
    fn name(&self) -> &'static str;
    fn basis(&self) -> Basis;
    fn assemble(&self, mesh: &Mesh, spec: &BilinearFormSpec) -> BlockMatrix;
    /// Essential constraints of the mixed problem with data `outer` on ∂Ω
    /// and `interface` on ∂D.
    fn constraints(&self, mesh: &Mesh, pattern: ConstraintPattern, outer: &FieldSource, interface: &FieldSource) -> Result<EssentialBC>;
    /// `∮_{∂D} ν∧(μ⁻¹∇∧S)·φ_i` with ν pointing out of D.
    fn interface_load(&self, mesh: &Mesh, spec: &BilinearFormSpec, field: &FieldSource) -> Result<Vec<Complex64>>;
    /// Interpolant, zero on DOFs outside the annulus.
    fn interpolate(&self, mesh: &Mesh, field: &FieldSource) -> Result<FieldSolution>;
    /// DOFs whose test functions see ∂Ω.
    fn outer_dofs(&self, mesh: &Mesh) -> Vec<bool>;
    fn flux_representation(&self, mesh: &Mesh) -> Box<dyn FluxRepresentation>;
}

pub fn discretization_registry() -> Registry<dyn Discretization> {
    Registry::new("discretization")
        .register("nodal", || Box::new(Nodal) as Box<dyn Discretization>)
        .register("edge", || Box::new(Edge) as Box<dyn Discretization>)
}

/// `"auto"` picks edge elements when the annulus has re-entrant edges, where
/// the nodal space cannot represent the field's edge singularities, and
/// nodal elements otherwise.
pub fn resolve_discretization(name: &str, mesh: &Mesh) -> Result<Box<dyn Discretization>> {
    let registry = discretization_registry();
    if name == "auto" {
        let pick = if reentrant_edges(mesh).is_empty() { "nodal" } else { "edge" };
        return registry.create(pick);
    }
    registry.create(name)
}

/// Trilinear nodal elements with the grad-div term.
#[derive(Debug)]
pub struct Nodal;

impl Discretization for Nodal {
    fn name(&self) -> &'static str {
        "nodal"
    }

    fn basis(&self) -> Basis {
        Basis::Nodal
    }

    fn assemble(&self, mesh: &Mesh, spec: &BilinearFormSpec) -> BlockMatrix {
        assemble_matrix(mesh, spec)
    }

    fn constraints(&self, mesh: &Mesh, pattern: ConstraintPattern, outer: &FieldSource, interface: &FieldSource) -> Result<EssentialBC> {
        EssentialBC::for_problem(mesh, pattern, outer, interface)
    }

    fn interface_load(&self, mesh: &Mesh, spec: &BilinearFormSpec, field: &FieldSource) -> Result<Vec<Complex64>> {
        super::interface_load(mesh, spec, field)
    }

    fn interpolate(&self, mesh: &Mesh, field: &FieldSource) -> Result<FieldSolution> {
        let mut sol = super::interpolate(mesh, field)?;
        for (v, &a) in sol.values.iter_mut().zip(&mesh.active) {
            if !a {
                *v = CZERO3;
            }
        }
        Ok(sol)
    }

    fn outer_dofs(&self, mesh: &Mesh) -> Vec<bool> {
        let mut on = vec![false; 3 * mesh.num_nodes()];
        for f in &mesh.outer_facets {
            for &p in &f.nodes {
                on[3 * p..3 * p + 3].fill(true);
            }
        }
        on
    }

    fn flux_representation(&self, mesh: &Mesh) -> Box<dyn FluxRepresentation> {
        Box::new(BoundaryMass::new(mesh))
    }
}

impl FluxRepresentation for BoundaryMass {
    fn represent(&self, mesh: &Mesh, r: &[Complex64]) -> Vec<[Cplx3; 4]> {
        let nodal = BoundaryMass::represent(self, r);
        facet_values(mesh, &nodal, &mesh.outer_facets)
    }
}

/// Lowest-order edge elements; the grad-div term is not needed.
#[derive(Debug)]
pub struct Edge;

impl Discretization for Edge {
    fn name(&self) -> &'static str {
        "edge"
    }

    fn basis(&self) -> Basis {
        Basis::Edge
    }

    fn assemble(&self, mesh: &Mesh, spec: &BilinearFormSpec) -> BlockMatrix {
        edge::assemble_matrix(mesh, spec)
    }

    fn constraints(&self, mesh: &Mesh, pattern: ConstraintPattern, outer: &FieldSource, interface: &FieldSource) -> Result<EssentialBC> {
        edge::constraints(mesh, pattern, outer, interface)
    }

    fn interface_load(&self, mesh: &Mesh, spec: &BilinearFormSpec, field: &FieldSource) -> Result<Vec<Complex64>> {
        edge::interface_load(mesh, spec, field)
    }

    fn interpolate(&self, mesh: &Mesh, field: &FieldSource) -> Result<FieldSolution> {
        let values = edge::interpolate(mesh, field)?;
        Ok(FieldSolution::from_values(values).with_basis(Basis::Edge))
    }

    fn outer_dofs(&self, mesh: &Mesh) -> Vec<bool> {
        edge::facet_edge_dofs(mesh, &mesh.outer_facets)
    }

    fn flux_representation(&self, mesh: &Mesh) -> Box<dyn FluxRepresentation> {
        Box::new(edge::EdgeBoundaryMass::new(mesh))
    }
}

impl FluxRepresentation for edge::EdgeBoundaryMass {
    fn represent(&self, mesh: &Mesh, r: &[Complex64]) -> Vec<[Cplx3; 4]> {
        edge::EdgeBoundaryMass::represent(self, mesh, r)
    }
}
