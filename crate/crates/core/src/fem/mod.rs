//! Nodal trilinear discretization of the grad-div regularized Maxwell
//! problem on the annulus `Ω \ D̄`.

pub mod assembly;
pub mod bc;
pub mod solver;
pub mod sparse;
pub mod edge;
pub mod discretization;

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::medium::ObstacleKind;
use crate::mesh::{surface_quadrature, CellTag, Facet, FacetSet, Mesh, HEX_CORNERS};
use crate::source::FieldSource;
use crate::vec3::{c, cadd, cdot_conj, cnorm_sqr, cscale, rcross, Cplx3, Real3, CZERO3};

pub use assembly::{assemble_matrix, element_integrals, element_matrix, BilinearFormSpec, GAUSS2, GAUSS3};
pub use bc::{ConstraintPattern, EssentialBC};
pub use discretization::{discretization_registry, resolve_discretization, Basis, Discretization, FluxRepresentation};
pub use solver::{solve_with, solver_registry, ConstrainedOperator, LinearSolver, SolveStats, SolverOptions};
pub use sparse::BlockMatrix;


/// Assembled operator, load vector and (after [`apply_essential`]) the
/// constrained operator with the lifted right-hand side.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: Arc<BlockMatrix>,
    pub rhs: Vec<Complex64>,
    pub constrained: Option<Arc<ConstrainedOperator>>,
    pub lift: Vec<Complex64>,
}

/// Complex field coefficients (three per node) plus solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution {
    pub values: Vec<Cplx3>,
    pub basis: Basis,
    pub stats: SolveStats,
}

impl FieldSolution {
    pub fn from_values(values: Vec<Cplx3>) -> Self {
        FieldSolution {
            values,
            basis: Basis::Nodal,
            stats: SolveStats {
                method: "none".into(),
                iterations: 0,
                relative_residual: 0.0,
                cond_est: 1.0,
                ritz_min: None,
                ritz_max: None,
            },
        }
    }

    pub fn with_basis(self, basis: Basis) -> Self {
        FieldSolution { basis, ..self }
    }

    pub fn zeros(nodes: usize) -> Self {
        Self::from_values(vec![CZERO3; nodes])
    }

    pub fn flat(&self) -> Vec<Complex64> {
        self.values.iter().flat_map(|v| v.iter().copied()).collect()
    }

    pub fn from_flat(x: &[Complex64], stats: SolveStats) -> Self {
        FieldSolution { values: x.chunks(3).map(|v| [v[0], v[1], v[2]]).collect(), basis: Basis::Nodal, stats }
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        FieldSolution {
            values: self.values.iter().map(|v| cscale(s, *v)).collect(),
            basis: self.basis,
            stats: self.stats.clone(),
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| crate::vec3::cnorm(*v)).fold(0.0, f64::max)
    }

    /// Nodal coefficients of `cell`; meaningful for the nodal basis only.
    pub fn cell_values(&self, mesh: &Mesh, cell: usize) -> [Cplx3; 8] {
        mesh.cell_nodes(cell).map(|p| self.values[p])
    }

    /// `(E, ∇∧E)` inside `cell` at local coordinates `xi`.
    pub fn eval_cell(&self, mesh: &Mesh, cell: usize, xi: Real3) -> (Cplx3, Cplx3) {
        match self.basis {
            Basis::Nodal => {
                let vals = self.cell_values(mesh, cell);
                (interp(&vals, xi), curl_at(&vals, xi, mesh.h))
            }
            Basis::Edge => edge::eval_cell(mesh, &self.values, cell, xi),
        }
    }

    /// Field values at the nodes (cell averages for edge fields).
    pub fn nodal_values(&self, mesh: &Mesh) -> Vec<Cplx3> {
        match self.basis {
            Basis::Nodal => self.values.clone(),
            Basis::Edge => edge::nodal_average(mesh, &self.values),
        }
    }
}

/// Value of the trilinear interpolant at local coordinates `xi ∈ [0,1]³`.
pub fn interp(vals: &[Cplx3; 8], xi: Real3) -> Cplx3 {
    let n = assembly::shape(xi);
    let mut out = CZERO3;
    for a in 0..8 {
        for c in 0..3 {
            out[c] += vals[a][c] * n[a];
        }
    }
    out
}

/// Gradient `g[i][j] = ∂_i u_j` of the trilinear interpolant.
pub fn grad(vals: &[Cplx3; 8], xi: Real3, h: Real3) -> [Cplx3; 3] {
    let g = assembly::shape_grad(xi, h);
    let mut out = [CZERO3; 3];
    for a in 0..8 {
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] += vals[a][j] * g[a][i];
            }
        }
    }
    out
}

pub fn curl_at(vals: &[Cplx3; 8], xi: Real3, h: Real3) -> Cplx3 {
    let g = grad(vals, xi, h);
    [g[1][2] - g[2][1], g[2][0] - g[0][2], g[0][1] - g[1][0]]
}

pub fn div_at(vals: &[Cplx3; 8], xi: Real3, h: Real3) -> Complex64 {
    let g = grad(vals, xi, h);
    g[0][0] + g[1][1] + g[2][2]
}

/// Nodal interpolant of an analytic field.
pub fn interpolate(mesh: &Mesh, field: &FieldSource) -> Result<FieldSolution> {
    let values = mesh
        .nodes
        .par_iter()
        .map(|&x| field.eval(x).map(|v| v.e))
        .collect::<Result<Vec<_>>>()?;
    Ok(FieldSolution::from_values(values))
}

/// Shared per-mesh state: the discretization, the assembled operator and the
/// constrained operators for each constraint pattern, built lazily.
#[derive(Debug)]
pub struct FemContext {
    pub mesh: Arc<Mesh>,
    pub spec: BilinearFormSpec,
    pub options: SolverOptions,
    pub discretization: Arc<dyn Discretization>,
    matrix: OnceLock<Arc<BlockMatrix>>,
    hard: OnceLock<Arc<ConstrainedOperator>>,
    soft: OnceLock<Arc<ConstrainedOperator>>,
    flux: OnceLock<Arc<dyn FluxRepresentation>>,
}

impl FemContext {
    /// Context with the `"auto"` discretization.
    pub fn new(mesh: Arc<Mesh>, spec: BilinearFormSpec, options: SolverOptions) -> Self {
        Self::with_discretization(mesh, spec, options, "auto").expect("auto discretization is always registered")
    }

    pub fn with_discretization(mesh: Arc<Mesh>, spec: BilinearFormSpec, options: SolverOptions, name: &str) -> Result<Self> {
        let discretization: Arc<dyn Discretization> = resolve_discretization(name, &mesh)?.into();
        Ok(FemContext {
            mesh,
            spec,
            options,
            discretization,
            matrix: OnceLock::new(),
            hard: OnceLock::new(),
            soft: OnceLock::new(),
            flux: OnceLock::new(),
        })
    }

    pub fn basis(&self) -> Basis {
        self.discretization.basis()
    }

    pub fn matrix(&self) -> Arc<BlockMatrix> {
        self.matrix.get_or_init(|| Arc::new(self.discretization.assemble(&self.mesh, &self.spec))).clone()
    }

    pub fn interpolate(&self, field: &FieldSource) -> Result<FieldSolution> {
        self.discretization.interpolate(&self.mesh, field)
    }

    pub fn operator(&self, pattern: ConstraintPattern) -> Result<Arc<ConstrainedOperator>> {
        let cell = match pattern {
            ConstraintPattern::Hard => &self.hard,
            ConstraintPattern::Soft => &self.soft,
        };
        if let Some(op) = cell.get() {
            return Ok(op.clone());
        }
        let bc = self.discretization.constraints(&self.mesh, pattern, &FieldSource::Zero, &FieldSource::Zero)?;
        let op = Arc::new(ConstrainedOperator::new(&self.matrix(), bc.mask()));
        Ok(cell.get_or_init(|| op).clone())
    }

    pub fn flux_representation(&self) -> Arc<dyn FluxRepresentation> {
        self.flux.get_or_init(|| self.discretization.flux_representation(&self.mesh).into()).clone()
    }
}

pub fn assemble(mesh: &Mesh, spec: &BilinearFormSpec) -> SparseSystem {
    let matrix = Arc::new(assemble_matrix(mesh, spec));
    let n = matrix.dim();
    SparseSystem { matrix, rhs: vec![Complex64::default(); n], constrained: None, lift: vec![Complex64::default(); n] }
}

/// Eliminates the constrained DOFs: their rows and columns become identity,
/// the right-hand side receives `-A·lift` and the constraint values.
pub fn apply_essential(system: &SparseSystem, bc: &EssentialBC) -> Result<SparseSystem> {
    let op = Arc::new(ConstrainedOperator::new(&system.matrix, bc.mask()));
    apply_essential_with(system, bc, op)
}

pub fn apply_essential_with(system: &SparseSystem, bc: &EssentialBC, op: Arc<ConstrainedOperator>) -> Result<SparseSystem> {
    if bc.values.len() != system.matrix.dim() {
        return Err(Error::InvalidParameter("constraint vector length does not match system".into()));
    }
    if op.mask != bc.mask() {
        return Err(Error::InvalidParameter("constrained operator does not match constraint pattern".into()));
    }
    let lift = bc.lift();
    let al = system.matrix.mul(&lift);
    let rhs = system
        .rhs
        .iter()
        .zip(&al)
        .zip(&bc.values)
        .map(|((f, a), v)| match v {
            Some(g) => *g,
            None => f - a,
        })
        .collect();
    Ok(SparseSystem { matrix: system.matrix.clone(), rhs, constrained: Some(op), lift })
}

pub fn solve(system: &SparseSystem, opts: &SolverOptions) -> Result<FieldSolution> {
    let op = system
        .constrained
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("apply essential constraints before solving".into()))?;
    let mut x = system.lift.clone();
    let stats = solve_with(op, &system.rhs, &mut x, opts)?;
    Ok(FieldSolution::from_flat(&x, stats))
}

/// Nodal `ℓ(φ) = ∮_{∂D} g·φ dS` with `g = ν∧(μ⁻¹∇∧S)` and ν pointing out of D.
pub fn interface_load(mesh: &Mesh, spec: &BilinearFormSpec, field: &FieldSource) -> Result<Vec<Complex64>> {
    let mut rhs = vec![Complex64::default(); 3 * mesh.num_nodes()];
    if field.is_zero() {
        return Ok(rhs);
    }
    for f in &mesh.interface_facets {
        for q in surface_quadrature(f, mesh.h) {
            let v = field.eval(q.x)?;
            let g = cscale(c(1.0 / spec.medium.mu_at(q.x), 0.0), rcross(f.normal, v.curl_e));
            for (a, &p) in f.nodes.iter().enumerate() {
                for comp in 0..3 {
                    rhs[3 * p + comp] += g[comp] * (q.weight * q.shape[a]);
                }
            }
        }
    }
    Ok(rhs)
}

/// Result of a constrained solve together with the load it used, so the
/// weak boundary flux can be recovered afterwards.
#[derive(Debug, Clone)]
pub struct MixedSolve {
    pub e: FieldSolution,
    pub load: Vec<Complex64>,
}

/// Solves the mixed problem with `ν∧E = ν∧f` on ∂Ω. On ∂D the analytic
/// field `interface` supplies the data: Hard fixes `ν·γE = ν·γS` and adds
/// the natural data `ν∧(μ⁻¹∇∧S)`; Soft fixes `ν∧E = ν∧S`.
pub fn solve_mixed_field(ctx: &FemContext, f: &FieldSource, interface: &FieldSource, kind: ObstacleKind) -> Result<MixedSolve> {
    let mesh = &ctx.mesh;
    let pattern = ConstraintPattern::from(kind);
    let disc = &ctx.discretization;
    let bc = disc.constraints(mesh, pattern, f, interface)?;
    let load = match kind {
        ObstacleKind::Hard => disc.interface_load(mesh, &ctx.spec, interface)?,
        ObstacleKind::Soft => vec![Complex64::default(); 3 * mesh.num_nodes()],
    };
    let system = SparseSystem {
        matrix: ctx.matrix(),
        rhs: load.clone(),
        constrained: None,
        lift: Vec::new(),
    };
    let system = apply_essential_with(&system, &bc, ctx.operator(pattern)?)?;
    let e = solve(&system, &ctx.options)?.with_basis(ctx.basis());
    Ok(MixedSolve { e, load })
}

/// `(E, H)` of the mixed problem; H from [`compute_h`].
pub fn solve_mixed_bvp(ctx: &FemContext, f: &FieldSource, interface: &FieldSource, kind: ObstacleKind) -> Result<(FieldSolution, FieldSolution)> {
    let sol = solve_mixed_field(ctx, f, interface, kind)?;
    let h = compute_h(&ctx.mesh, &sol.e, &ctx.spec)?;
    Ok((sol.e, h))
}

/// `H = (iωμ)⁻¹∇∧E`: curl of the interpolant at each annulus cell centre,
/// averaged onto nodes.
pub fn compute_h(mesh: &Mesh, e: &FieldSolution, spec: &BilinearFormSpec) -> Result<FieldSolution> {
    if spec.omega == 0.0 {
        return Err(Error::InvalidParameter("H is undefined for ω = 0".into()));
    }
    let centre = [0.5; 3];
    let curls: Vec<Cplx3> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|cell| {
            if mesh.tags[cell] != CellTag::Annulus {
                return CZERO3;
            }
            let x = mesh.cell_center(cell);
            let s = c(0.0, -1.0 / (spec.omega * spec.medium.mu_at(x)));
            cscale(s, e.eval_cell(mesh, cell, centre).1)
        })
        .collect();
    let n = mesh.n;
    let values = (0..mesh.num_nodes())
        .into_par_iter()
        .map(|p| {
            let [i, j, k] = mesh.node_ijk(p);
            let mut acc = CZERO3;
            let mut count = 0.0;
            for cn in HEX_CORNERS {
                if i < cn[0] || j < cn[1] || k < cn[2] {
                    continue;
                }
                let (ci, cj, ck) = (i - cn[0], j - cn[1], k - cn[2]);
                if ci >= n || cj >= n || ck >= n {
                    continue;
                }
                let cell = mesh.cell_index(ci, cj, ck);
                if mesh.tags[cell] == CellTag::Annulus {
                    acc = cadd(acc, curls[cell]);
                    count += 1.0;
                }
            }
            if count > 0.0 {
                cscale(c(1.0 / count, 0.0), acc)
            } else {
                CZERO3
            }
        })
        .collect();
    Ok(FieldSolution { values, basis: Basis::Nodal, stats: e.stats.clone() })
}

/// `ν∧u` at the four surface quadrature points of each facet.
pub fn tangential_trace(mesh: &Mesh, field: &FieldSolution, facets: &[Facet]) -> Vec<[Cplx3; 4]> {
    facets
        .iter()
        .map(|f| {
            surface_quadrature(f, mesh.h).map(|q| {
                let mut u = CZERO3;
                for (a, &p) in f.nodes.iter().enumerate() {
                    u = cadd(u, cscale(c(q.shape[a], 0.0), field.values[p]));
                }
                rcross(f.normal, u)
            })
        })
        .collect()
}

/// `∮_{∂Ω}(ν∧μ⁻¹∇∧E)·φ_i` for every DOF, recovered from the discrete
/// equations as `ℓ − A·E`. Nonzero only at constrained ∂Ω DOFs (up to the
/// solver tolerance elsewhere).
pub fn weak_outer_flux(ctx: &FemContext, sol: &MixedSolve) -> Vec<Complex64> {
    let a = ctx.matrix();
    let ax = a.mul(&sol.e.flat());
    let on_outer = ctx.discretization.outer_dofs(&ctx.mesh);
    ax.iter()
        .zip(&sol.load)
        .zip(&on_outer)
        .map(|((ax, l), &on)| if on { l - ax } else { Complex64::default() })
        .collect()
}

/// Consistent `L²(∂Ω)` mass matrices for each Cartesian component of a
/// tangential field, assembled over the faces where that component is
/// tangential.
#[derive(Debug)]
pub struct BoundaryMass {
    /// Per component: node ids carrying the component and the row pattern.
    nodes: [Vec<usize>; 3],
    rows: [Vec<Vec<(usize, f64)>>; 3],
}

impl BoundaryMass {
    pub fn new(mesh: &Mesh) -> Self {
        let nn = mesh.num_nodes();
        let mut nodes: [Vec<usize>; 3] = Default::default();
        let mut local: [Vec<usize>; 3] = [vec![usize::MAX; nn], vec![usize::MAX; nn], vec![usize::MAX; nn]];
        let mut rows: [Vec<Vec<(usize, f64)>>; 3] = Default::default();
        for comp in 0..3 {
            for f in mesh.outer_facets.iter().filter(|f| f.axis != comp) {
                for &p in &f.nodes {
                    if local[comp][p] == usize::MAX {
                        local[comp][p] = nodes[comp].len();
                        nodes[comp].push(p);
                    }
                }
            }
            let mut r: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes[comp].len()];
            for f in mesh.outer_facets.iter().filter(|f| f.axis != comp) {
                // bilinear mass on a rectangle: area/36·[4 2 1 2; 2 4 2 1; ...]
                for a in 0..4 {
                    for b in 0..4 {
                        let w = match (a as isize - b as isize).rem_euclid(4) {
                            0 => 4.0,
                            2 => 1.0,
                            _ => 2.0,
                        } * f.area
                            / 36.0;
                        let (i, j) = (local[comp][f.nodes[a]], local[comp][f.nodes[b]]);
                        match r[i].iter_mut().find(|e| e.0 == j) {
                            Some(e) => e.1 += w,
                            None => r[i].push((j, w)),
                        }
                    }
                }
            }
            for row in &mut r {
                row.sort_by_key(|e| e.0);
            }
            rows[comp] = r;
        }
        BoundaryMass { nodes, rows }
    }

    /// Nodal field `w` with `∮ w_c φ_i = r_{i,c}` for every component, by CG
    /// on each (well-conditioned) mass system.
    pub fn represent(&self, r: &[Complex64]) -> Vec<Cplx3> {
        let nn = r.len() / 3;
        let mut out = vec![CZERO3; nn];
        for comp in 0..3 {
            let rows = &self.rows[comp];
            let b: Vec<Complex64> = self.nodes[comp].iter().map(|&p| r[3 * p + comp]).collect();
            let x = mass_cg(rows, &b);
            for (i, &p) in self.nodes[comp].iter().enumerate() {
                out[p][comp] = x[i];
            }
        }
        out
    }
}

fn mass_cg(rows: &[Vec<(usize, f64)>], b: &[Complex64]) -> Vec<Complex64> {
    let n = b.len();
    let mul = |x: &[Complex64]| -> Vec<Complex64> {
        rows.iter().map(|row| row.iter().map(|&(j, w)| x[j] * w).sum()).collect()
    };
    let diag: Vec<f64> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().find(|e| e.0 == i).map(|e| e.1).unwrap_or(1.0))
        .collect();
    let bnorm = sparse::norm2(b);
    let mut x = vec![Complex64::default(); n];
    if bnorm == 0.0 {
        return x;
    }
    let mut r = b.to_vec();
    let mut z: Vec<Complex64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rho = sparse::dotu(&r, &z);
    for _ in 0..10 * n.max(10) {
        let ap = mul(&p);
        let alpha = rho / sparse::dotu(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if sparse::norm2(&r) <= 1e-15 * bnorm {
            break;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rho_new = sparse::dotu(&r, &z);
        let beta = rho_new / rho;
        rho = rho_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

/// Interpolates a nodal tangential field onto the facet quadrature points,
/// dropping the normal component.
pub fn facet_values(mesh: &Mesh, nodal: &[Cplx3], facets: &[Facet]) -> Vec<[Cplx3; 4]> {
    facets
        .iter()
        .map(|f| {
            surface_quadrature(f, mesh.h).map(|q| {
                let mut u = CZERO3;
                for (a, &p) in f.nodes.iter().enumerate() {
                    u = cadd(u, cscale(c(q.shape[a], 0.0), nodal[p]));
                }
                u[f.axis] = Complex64::default();
                u
            })
        })
        .collect()
}

/// Curl of the solution evaluated inside the owning annulus cell at each
/// facet quadrature point.
pub fn facet_curls(mesh: &Mesh, e: &FieldSolution, facets: &[Facet]) -> Vec<[Cplx3; 4]> {
    facets
        .iter()
        .map(|f| {
            let o = mesh.cell_origin(f.cell);
            surface_quadrature(f, mesh.h).map(|q| e.eval_cell(mesh, f.cell, edge::local(o, q.x, mesh.h)).1)
        })
        .collect()
}

/// Tensor Gauss rule on annulus cells: calls `f(cell, xi, x, weight)`.
pub fn annulus_quadrature<F>(mesh: &Mesh, order3: bool, f: F) -> f64
where
    F: Fn(usize, Real3, Real3, f64) -> f64 + Sync,
{
    let rule: Vec<(f64, f64)> = if order3 { GAUSS3.to_vec() } else { GAUSS2.iter().map(|&g| (g, 0.5)).collect() };
    let vol = mesh.cell_volume();
    let parts: Vec<f64> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|cell| {
            if mesh.tags[cell] != CellTag::Annulus {
                return 0.0;
            }
            let o = mesh.cell_origin(cell);
            let mut s = 0.0;
            for &(z, wz) in &rule {
                for &(y, wy) in &rule {
                    for &(x, wx) in &rule {
                        let xi = [x, y, z];
                        let p = [o[0] + x * mesh.h[0], o[1] + y * mesh.h[1], o[2] + z * mesh.h[2]];
                        s += f(cell, xi, p, wx * wy * wz * vol);
                    }
                }
            }
            s
        })
        .collect();
    parts.iter().sum()
}

/// `(‖E_h − E‖, ‖E‖)` in `L²(Ω \ D̄)`, 3×3×3 Gauss per cell.
pub fn l2_error(mesh: &Mesh, sol: &FieldSolution, exact: &FieldSource) -> Result<(f64, f64)> {
    // evaluate exact values once to surface errors (e.g. exponent overflow)
    exact.eval(mesh.nodes[0])?;
    let err = annulus_quadrature(mesh, true, |cell, xi, x, w| {
        let u = sol.eval_cell(mesh, cell, xi).0;
        let e = exact.eval(x).map(|v| v.e).unwrap_or(CZERO3);
        let d = [u[0] - e[0], u[1] - e[1], u[2] - e[2]];
        w * cnorm_sqr(d)
    });
    let norm = annulus_quadrature(mesh, true, |_, _, x, w| {
        w * exact.eval(x).map(|v| cnorm_sqr(v.e)).unwrap_or(0.0)
    });
    Ok((err.sqrt(), norm.sqrt()))
}

/// `‖∇·E_h‖` in `L²(Ω \ D̄)` for a nodal field.
pub fn divergence_l2(mesh: &Mesh, sol: &FieldSolution) -> f64 {
    annulus_quadrature(mesh, false, |cell, xi, _, w| w * div_at(&sol.cell_values(mesh, cell), xi, mesh.h).norm_sqr()).sqrt()
}

/// `(‖E_h‖_{L²}, |E_h|_{H¹})` on the annulus for a nodal field.
pub fn h1_norms(mesh: &Mesh, sol: &FieldSolution) -> (f64, f64) {
    let l2 = annulus_quadrature(mesh, false, |cell, xi, _, w| {
        w * cnorm_sqr(interp(&sol.cell_values(mesh, cell), xi))
    });
    let semi = annulus_quadrature(mesh, false, |cell, xi, _, w| {
        let g = grad(&sol.cell_values(mesh, cell), xi, mesh.h);
        w * g.iter().map(|r| cnorm_sqr(*r)).sum::<f64>()
    });
    (l2.sqrt(), semi.sqrt())
}

/// `(∫ μ⁻¹|∇∧E|², ∫ ω²γ|E|²)` over the annulus, 2×2×2 Gauss.
pub fn annulus_energy(mesh: &Mesh, sol: &FieldSolution, spec: &BilinearFormSpec) -> (f64, f64) {
    let curl = annulus_quadrature(mesh, false, |cell, xi, x, w| {
        let v = sol.eval_cell(mesh, cell, xi).1;
        w * cnorm_sqr(v) / spec.medium.mu_at(x)
    });
    let mass = annulus_quadrature(mesh, false, |cell, xi, x, w| {
        let v = sol.eval_cell(mesh, cell, xi).0;
        w * spec.omega * spec.omega * spec.gamma_at(x) * cnorm_sqr(v)
    });
    (curl, mass)
}

/// `‖ν∧μ⁻¹∇∧E‖_{L²(∂D)}` from cell curls, and the same norm over ∂Ω for
/// scale. Used to watch the natural interface condition of Hard solves.
pub fn interface_flux_norms(mesh: &Mesh, sol: &FieldSolution, spec: &BilinearFormSpec) -> (f64, f64) {
    let norm = |which: FacetSet| -> f64 {
        let facets = mesh.facets(which);
        let curls = facet_curls(mesh, sol, facets);
        let mut s = 0.0;
        for (f, cs) in facets.iter().zip(&curls) {
            for (q, cq) in surface_quadrature(f, mesh.h).iter().zip(cs) {
                let t = rcross(f.normal, *cq);
                s += q.weight * cdot_conj(t, t).re / spec.medium.mu_at(q.x).powi(2);
            }
        }
        s.sqrt()
    };
    (norm(FacetSet::Interface), norm(FacetSet::Outer))
}

/// `∫_{∂Ω} (ν∧E)·conj(u)` style pairing used by tests: returns `Σ w a·conj(b)`.
pub fn surface_pairing(mesh: &Mesh, facets: &[Facet], a: &[[Cplx3; 4]], b: &[[Cplx3; 4]]) -> Complex64 {
    let mut s = Complex64::default();
    for (i, f) in facets.iter().enumerate() {
        for (q, qp) in surface_quadrature(f, mesh.h).iter().enumerate() {
            s += cdot_conj(a[i][q], b[i][q]) * qp.weight;
        }
    }
    s
}
