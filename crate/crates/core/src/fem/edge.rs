//! Lowest-order edge (Nédélec) elements on the hexahedral grid.
//!
//! The degree of freedom `3·p + c` is the tangential component of the field
//! along the edge leaving node `p` in direction `c`, so edge fields share the
//! node-blocked storage of the nodal discretization. Edges leaving the box
//! and edges not touching an annulus cell are constrained to zero.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::mesh::{surface_quadrature, CellTag, Facet, Mesh, HEX_CORNERS};
use crate::source::FieldSource;
use crate::vec3::{cadd, cscale, Cplx3, Real3, CZERO3};

use super::assembly::{BilinearFormSpec, GAUSS2, GAUSS3};
use super::bc::{ConstraintPattern, EssentialBC};
use super::sparse::{slot_of, BlockMatrix, SLOTS};

/// Value and curl of one edge basis function.
pub type EdgeShape = (Real3, Real3);

#[inline]
fn lin(which: usize, t: f64) -> f64 {
    if which == 1 {
        t
    } else {
        1.0 - t
    }
}

#[inline]
fn dlin(which: usize) -> f64 {
    if which == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Lower-node corner offset and direction of local edge `l` (`l = 4·dir + m`).
#[inline]
pub fn local_edge(l: usize) -> ([usize; 3], usize) {
    let dir = l / 4;
    let (s, t) = (l % 2, (l / 2) % 2);
    let mut corner = [0; 3];
    corner[(dir + 1) % 3] = s;
    corner[(dir + 2) % 3] = t;
    (corner, dir)
}

/// The twelve basis functions of a cell at local coordinates `xi`.
pub fn edge_basis(xi: Real3, h: Real3) -> [EdgeShape; 12] {
    let mut out = [([0.0; 3], [0.0; 3]); 12];
    for (l, o) in out.iter_mut().enumerate() {
        let (corner, dir) = local_edge(l);
        let (u, v) = ((dir + 1) % 3, (dir + 2) % 3);
        let (s, t) = (corner[u], corner[v]);
        let f = lin(s, xi[u]) * lin(t, xi[v]);
        let du = dlin(s) / h[u] * lin(t, xi[v]);
        let dv = lin(s, xi[u]) * dlin(t) / h[v];
        let mut value = [0.0; 3];
        value[dir] = f;
        // ∇f × e_dir with ∇f = du e_u + dv e_v (cyclic u, v)
        let mut curl = [0.0; 3];
        curl[v] = -du;
        curl[u] = dv;
        *o = (value, curl);
    }
    out
}

/// Global DOF of each local edge of `cell`.
pub fn cell_dofs(mesh: &Mesh, cell: usize) -> [usize; 12] {
    let [i, j, k] = mesh.cell_ijk(cell);
    std::array::from_fn(|l| {
        let (c, dir) = local_edge(l);
        3 * mesh.node_index(i + c[0], j + c[1], k + c[2]) + dir
    })
}

/// `(value, curl)` of an edge field inside `cell`.
pub fn eval_cell(mesh: &Mesh, values: &[Cplx3], cell: usize, xi: Real3) -> (Cplx3, Cplx3) {
    let dofs = cell_dofs(mesh, cell);
    let basis = edge_basis(xi, mesh.h);
    let mut e = CZERO3;
    let mut curl = CZERO3;
    for (l, &dof) in dofs.iter().enumerate() {
        let u = values[dof / 3][dof % 3];
        for c in 0..3 {
            e[c] += u * basis[l].0[c];
            curl[c] += u * basis[l].1[c];
        }
    }
    (e, curl)
}

/// 12×12 element matrix `μ⁻¹(∇∧N_i, ∇∧N_j) − ω²γ(N_i, N_j)`.
pub fn element_matrix(h: Real3, mu: f64, gamma: f64, omega: f64) -> [[f64; 12]; 12] {
    let vol = h[0] * h[1] * h[2];
    let mut k = [[0.0; 12]; 12];
    for &z in &GAUSS2 {
        for &y in &GAUSS2 {
            for &x in &GAUSS2 {
                let b = edge_basis([x, y, z], h);
                let w = vol / 8.0;
                for i in 0..12 {
                    for j in 0..12 {
                        let cc: f64 = (0..3).map(|c| b[i].1[c] * b[j].1[c]).sum();
                        let mm: f64 = (0..3).map(|c| b[i].0[c] * b[j].0[c]).sum();
                        k[i][j] += w * (cc / mu - omega * omega * gamma * mm);
                    }
                }
            }
        }
    }
    k
}

pub fn assemble_matrix(mesh: &Mesh, spec: &BilinearFormSpec) -> BlockMatrix {
    let m = mesh.nodes_per_axis();
    let n = mesh.n;
    let constant = {
        let c = mesh.cell_center(0);
        element_matrix(mesh.h, spec.medium.mu_at(c), spec.gamma_at(c), spec.omega)
    };
    let cell_matrix = |cell: usize| {
        let x = mesh.cell_center(cell);
        let (mu, gamma) = (spec.medium.mu_at(x), spec.gamma_at(x));
        if mu == spec.medium.mu0 && gamma == spec.medium.eps0 {
            constant
        } else {
            element_matrix(mesh.h, mu, gamma, spec.omega)
        }
    };
    let mut a = BlockMatrix::zeros(m);
    a.blocks.par_chunks_mut(SLOTS).enumerate().for_each(|(p, row)| {
        let [pi, pj, pk] = mesh.node_ijk(p);
        for cn in HEX_CORNERS {
            if pi < cn[0] || pj < cn[1] || pk < cn[2] {
                continue;
            }
            let (ci, cj, ck) = (pi - cn[0], pj - cn[1], pk - cn[2]);
            if ci >= n || cj >= n || ck >= n {
                continue;
            }
            let cell = mesh.cell_index(ci, cj, ck);
            if mesh.tags[cell] != CellTag::Annulus {
                continue;
            }
            let ke = cell_matrix(cell);
            for la in 0..12 {
                let (ca, da) = local_edge(la);
                if ca != cn {
                    continue;
                }
                for lb in 0..12 {
                    let (cb, db) = local_edge(lb);
                    let off = [
                        cb[0] as isize - ca[0] as isize,
                        cb[1] as isize - ca[1] as isize,
                        cb[2] as isize - ca[2] as isize,
                    ];
                    row[slot_of(off[0], off[1], off[2])][3 * da + db] += ke[la][lb];
                }
            }
        }
    });
    a
}

/// Mean of `field·e_dir` along the edge `(p, dir)`.
fn edge_mean(mesh: &Mesh, field: &FieldSource, dof: usize) -> Result<Complex64> {
    let (p, dir) = (dof / 3, dof % 3);
    let x0 = mesh.nodes[p];
    let mut s = Complex64::default();
    for &(t, w) in &GAUSS3 {
        let mut x = x0;
        x[dir] += t * mesh.h[dir];
        s += field.eval(x)?.e[dir] * w;
    }
    Ok(s)
}

/// DOFs belonging to at least one annulus cell.
pub fn active_dofs(mesh: &Mesh) -> Vec<bool> {
    let mut active = vec![false; 3 * mesh.num_nodes()];
    for cell in mesh.annulus_cells() {
        for d in cell_dofs(mesh, cell) {
            active[d] = true;
        }
    }
    active
}

/// Edge DOFs lying in one of `facets`.
pub fn facet_edge_dofs(mesh: &Mesh, facets: &[Facet]) -> Vec<bool> {
    let mut on = vec![false; 3 * mesh.num_nodes()];
    for f in facets {
        for d in facet_dofs(mesh, f) {
            on[d] = true;
        }
    }
    on
}

/// DOFs of the four facet edges: the two along `u` (at `v = 0, 1`), then the
/// two along `v` (at `u = 0, 1`).
fn facet_dofs(mesh: &Mesh, f: &Facet) -> [usize; 4] {
    let (u, v) = f.tangent_axes();
    // nodes: (0,0), (1,0), (1,1), (0,1) in (u, v)
    [3 * f.nodes[0] + u, 3 * f.nodes[3] + u, 3 * f.nodes[0] + v, 3 * f.nodes[1] + v]
        .map(|d| {
            debug_assert!(d < 3 * mesh.num_nodes());
            d
        })
}

pub fn constraints(mesh: &Mesh, pattern: ConstraintPattern, outer: &FieldSource, interface: &FieldSource) -> Result<EssentialBC> {
    let mut bc = EssentialBC::new(3 * mesh.num_nodes());
    let zero = Complex64::default();
    let fix = |bc: &mut EssentialBC, on: &[bool], field: &FieldSource| -> Result<()> {
        for (d, &o) in on.iter().enumerate() {
            if o && bc.values[d].is_none() {
                let v = if field.is_zero() { zero } else { edge_mean(mesh, field, d)? };
                bc.set(d, v)?;
            }
        }
        Ok(())
    };
    for (d, a) in active_dofs(mesh).into_iter().enumerate() {
        if !a {
            bc.set(d, zero)?;
        }
    }
    fix(&mut bc, &facet_edge_dofs(mesh, &mesh.outer_facets), outer)?;
    if pattern == ConstraintPattern::Soft {
        fix(&mut bc, &facet_edge_dofs(mesh, &mesh.interface_facets), interface)?;
    }
    Ok(bc)
}

/// `∮_{∂D} ν∧(μ⁻¹∇∧S)·N_i` for every edge DOF.
pub fn interface_load(mesh: &Mesh, spec: &BilinearFormSpec, field: &FieldSource) -> Result<Vec<Complex64>> {
    let mut rhs = vec![Complex64::default(); 3 * mesh.num_nodes()];
    if field.is_zero() {
        return Ok(rhs);
    }
    for f in &mesh.interface_facets {
        let dofs = cell_dofs(mesh, f.cell);
        let o = mesh.cell_origin(f.cell);
        for q in surface_quadrature(f, mesh.h) {
            let v = field.eval(q.x)?;
            let mu = spec.medium.mu_at(q.x);
            let g = crate::vec3::rcross(f.normal, v.curl_e).map(|x| x / mu);
            let xi = local(o, q.x, mesh.h);
            let basis = edge_basis(xi, mesh.h);
            for (l, &d) in dofs.iter().enumerate() {
                let n = basis[l].0;
                rhs[d] += (g[0] * n[0] + g[1] * n[1] + g[2] * n[2]) * q.weight;
            }
        }
    }
    Ok(rhs)
}

#[inline]
pub fn local(origin: Real3, x: Real3, h: Real3) -> Real3 {
    [(x[0] - origin[0]) / h[0], (x[1] - origin[1]) / h[1], (x[2] - origin[2]) / h[2]]
}

/// Edge interpolant (edge means) of an analytic field on active DOFs.
pub fn interpolate(mesh: &Mesh, field: &FieldSource) -> Result<Vec<Cplx3>> {
    let active = active_dofs(mesh);
    (0..mesh.num_nodes())
        .into_par_iter()
        .map(|p| {
            let mut v = CZERO3;
            for c in 0..3 {
                if active[3 * p + c] {
                    v[c] = edge_mean(mesh, field, 3 * p + c)?;
                }
            }
            Ok(v)
        })
        .collect()
}

/// Tangential-trace mass matrix of the edges on ∂Ω, used to turn the weak
/// boundary flux into a field.
#[derive(Debug)]
pub struct EdgeBoundaryMass {
    dofs: Vec<usize>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl EdgeBoundaryMass {
    pub fn new(mesh: &Mesh) -> Self {
        let mut local_id = vec![usize::MAX; 3 * mesh.num_nodes()];
        let mut dofs = Vec::new();
        for f in &mesh.outer_facets {
            for d in facet_dofs(mesh, f) {
                if local_id[d] == usize::MAX {
                    local_id[d] = dofs.len();
                    dofs.push(d);
                }
            }
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dofs.len()];
        for f in &mesh.outer_facets {
            let fd = facet_dofs(mesh, f);
            // pairs along the same axis: area/3 on the diagonal, area/6 across
            for (a, b) in [(0, 1), (2, 3)] {
                for (x, y, w) in [(a, a, 3.0), (b, b, 3.0), (a, b, 6.0), (b, a, 6.0)] {
                    let (i, j) = (local_id[fd[x]], local_id[fd[y]]);
                    let val = f.area / w;
                    match rows[i].iter_mut().find(|e| e.0 == j) {
                        Some(e) => e.1 += val,
                        None => rows[i].push((j, val)),
                    }
                }
            }
        }
        for r in &mut rows {
            r.sort_by_key(|e| e.0);
        }
        EdgeBoundaryMass { dofs, rows }
    }

    /// Tangential field `W` on the outer facets with `∮ W·N_i = r_i`.
    pub fn represent(&self, mesh: &Mesh, r: &[Complex64]) -> Vec<[Cplx3; 4]> {
        let b: Vec<Complex64> = self.dofs.iter().map(|&d| r[d]).collect();
        let x = super::mass_cg(&self.rows, &b);
        let mut coef = vec![Complex64::default(); r.len()];
        for (i, &d) in self.dofs.iter().enumerate() {
            coef[d] = x[i];
        }
        facet_field(mesh, &coef, &mesh.outer_facets)
    }
}

/// Tangential trace of an edge field (given by flat coefficients) at the
/// facet quadrature points.
pub fn facet_field(mesh: &Mesh, coef: &[Complex64], facets: &[Facet]) -> Vec<[Cplx3; 4]> {
    facets
        .iter()
        .map(|f| {
            let (u, v) = f.tangent_axes();
            let fd = facet_dofs(mesh, f);
            surface_quadrature(f, mesh.h).map(|q| {
                let s = (q.x[u] - f.origin[u]) / mesh.h[u];
                let t = (q.x[v] - f.origin[v]) / mesh.h[v];
                let mut w = CZERO3;
                w[u] = coef[fd[0]] * (1.0 - t) + coef[fd[1]] * t;
                w[v] = coef[fd[2]] * (1.0 - s) + coef[fd[3]] * s;
                w
            })
        })
        .collect()
}

/// Cell-averaged values at nodes, for export.
pub fn nodal_average(mesh: &Mesh, values: &[Cplx3]) -> Vec<Cplx3> {
    let n = mesh.n;
    (0..mesh.num_nodes())
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
                    let xi = cn.map(|v| v as f64);
                    acc = cadd(acc, eval_cell(mesh, values, cell, xi).0);
                    count += 1.0;
                }
            }
            if count > 0.0 {
                cscale(Complex64::new(1.0 / count, 0.0), acc)
            } else {
                CZERO3
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_has_unit_tangential_moments() {
        let h = [0.5, 0.25, 2.0];
        for l in 0..12 {
            let (corner, dir) = local_edge(l);
            for m in 0..12 {
                // mean of N_m · e_dir along edge l
                let mut s = 0.0;
                for &(t, w) in &GAUSS3 {
                    let mut xi = corner.map(|c| c as f64);
                    xi[dir] = t;
                    s += w * edge_basis(xi, h)[m].0[dir];
                }
                let expect = if m == l { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-14, "l={l} m={m} s={s}");
            }
        }
    }

    #[test]
    fn curl_matches_finite_differences() {
        let h = [0.5, 0.25, 2.0];
        let xi = [0.3, 0.6, 0.2];
        let e = 1e-6;
        let b = edge_basis(xi, h);
        for l in 0..12 {
            let mut d = [[0.0; 3]; 3]; // d[i][j] = ∂_i N_j
            for i in 0..3 {
                let (mut p, mut m) = (xi, xi);
                p[i] += e;
                m[i] -= e;
                let (bp, bm) = (edge_basis(p, h)[l].0, edge_basis(m, h)[l].0);
                for j in 0..3 {
                    d[i][j] = (bp[j] - bm[j]) / (2.0 * e * h[i]);
                }
            }
            let curl = [d[1][2] - d[2][1], d[2][0] - d[0][2], d[0][1] - d[1][0]];
            for c in 0..3 {
                assert!((curl[c] - b[l].1[c]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn gradients_are_in_the_kernel_of_the_curl_part() {
        // edge interpolant of ∇φ for trilinear φ is exact; curl-curl part annihilates it
        let h = [0.5, 0.25, 2.0];
        let k = element_matrix(h, 1.0, 1.0, 0.0);
        let phi = [0.3, -1.2, 0.7, 2.0, -0.4, 0.9, 1.1, -0.8];
        let corner_id = |c: [usize; 3]| HEX_CORNERS.iter().position(|x| *x == c).unwrap();
        let g: Vec<f64> = (0..12)
            .map(|l| {
                let (c, dir) = local_edge(l);
                let mut c1 = c;
                c1[dir] = 1;
                (phi[corner_id(c1)] - phi[corner_id(c)]) / h[dir]
            })
            .collect();
        for row in &k {
            let s: f64 = row.iter().zip(&g).map(|(a, b)| a * b).sum();
            assert!(s.abs() < 1e-12);
        }
    }
}
