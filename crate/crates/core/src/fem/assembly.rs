//! Element matrices for trilinear vector fields and global assembly of
//! `(μ⁻¹∇∧E, ∇∧F) + s(∇·γE, ∇·γF) − ω²(γE, F)` over annulus cells.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medium::Medium;
use crate::mesh::{CellTag, Mesh, HEX_CORNERS};
use crate::vec3::Real3;

use super::sparse::{slot_of, BlockMatrix, SLOTS};

pub const GAUSS2: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];
pub const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilinearFormSpec {
    /// Grad-div penalty.
    pub s: f64,
    pub omega: f64,
    pub medium: Medium,
}

impl BilinearFormSpec {
    pub fn new(medium: Medium, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("grad-div penalty s must be positive, got {s}")));
        }
        Ok(BilinearFormSpec { s, omega: medium.omega, medium })
    }

    /// Same coefficients at a different frequency (ω = 0 allowed).
    pub fn at_frequency(&self, omega: f64) -> Self {
        BilinearFormSpec { omega, ..*self }
    }

    /// γ = ε + iσ/ω with σ = 0.
    pub fn gamma_at(&self, x: Real3) -> f64 {
        self.medium.eps_at(x)
    }
}

/// Trilinear shape values on the unit cube, corners in [`HEX_CORNERS`] order.
#[inline]
pub fn shape(xi: Real3) -> [f64; 8] {
    let mut n = [0.0; 8];
    for (a, cn) in HEX_CORNERS.iter().enumerate() {
        let mut v = 1.0;
        for d in 0..3 {
            v *= if cn[d] == 1 { xi[d] } else { 1.0 - xi[d] };
        }
        n[a] = v;
    }
    n
}

/// Physical gradients of the shape functions for a cell with edge lengths `h`.
#[inline]
pub fn shape_grad(xi: Real3, h: Real3) -> [[f64; 3]; 8] {
    let mut g = [[0.0; 3]; 8];
    for (a, cn) in HEX_CORNERS.iter().enumerate() {
        for d in 0..3 {
            let mut v = 1.0 / h[d];
            if cn[d] == 0 {
                v = -v;
            }
            for e in 0..3 {
                if e != d {
                    v *= if cn[e] == 1 { xi[e] } else { 1.0 - xi[e] };
                }
            }
            g[a][d] = v;
        }
    }
    g
}

/// Scalar element integrals on one cell: mass `M`, stiffness `G` and the
/// mixed derivative products `D[c][d]_ab = ∫∂_c N_a ∂_d N_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementIntegrals {
    pub m: [[f64; 8]; 8],
    pub g: [[f64; 8]; 8],
    pub d: [[[[f64; 8]; 8]; 3]; 3],
}

pub fn element_integrals(h: Real3) -> ElementIntegrals {
    let vol = h[0] * h[1] * h[2];
    let mut out = ElementIntegrals { m: [[0.0; 8]; 8], g: [[0.0; 8]; 8], d: [[[[0.0; 8]; 8]; 3]; 3] };
    for &z in &GAUSS2 {
        for &y in &GAUSS2 {
            for &x in &GAUSS2 {
                let xi = [x, y, z];
                let w = vol / 8.0;
                let n = shape(xi);
                let g = shape_grad(xi, h);
                for a in 0..8 {
                    for b in 0..8 {
                        out.m[a][b] += w * n[a] * n[b];
                        out.g[a][b] += w * (g[a][0] * g[b][0] + g[a][1] * g[b][1] + g[a][2] * g[b][2]);
                        for c in 0..3 {
                            for d in 0..3 {
                                out.d[c][d][a][b] += w * g[a][c] * g[b][d];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// 24×24 element matrix, row `3a+c` (test node `a`, component `c`), column
/// `3b+d` (trial).
pub fn element_matrix(ints: &ElementIntegrals, mu: f64, gamma: f64, s: f64, omega: f64) -> Vec<[f64; 24]> {
    let mut k = vec![[0.0; 24]; 24];
    let sg2 = s * gamma * gamma;
    let mass = omega * omega * gamma;
    for a in 0..8 {
        for b in 0..8 {
            for c in 0..3 {
                for d in 0..3 {
                    let mut v = -ints.d[d][c][a][b] / mu + sg2 * ints.d[c][d][a][b];
                    if c == d {
                        v += ints.g[a][b] / mu - mass * ints.m[a][b];
                    }
                    k[3 * a + c][3 * b + d] = v;
                }
            }
        }
    }
    k
}

/// Assembles the unconstrained operator over annulus cells.
pub fn assemble_matrix(mesh: &Mesh, spec: &BilinearFormSpec) -> BlockMatrix {
    let m = mesh.nodes_per_axis();
    let ints = element_integrals(mesh.h);
    // Per-cell matrices only differ through sampled coefficients; memoise the
    // constant-coefficient case.
    let constant = {
        let c = mesh.cell_center(0);
        element_matrix(&ints, spec.medium.mu_at(c), spec.gamma_at(c), spec.s, spec.omega)
    };
    let cell_matrix = |cell: usize| -> Vec<[f64; 24]> {
        let x = mesh.cell_center(cell);
        let (mu, gamma) = (spec.medium.mu_at(x), spec.gamma_at(x));
        if mu == spec.medium.mu0 && gamma == spec.medium.eps0 {
            constant.clone()
        } else {
            element_matrix(&ints, mu, gamma, spec.s, spec.omega)
        }
    };
    let mut a = BlockMatrix::zeros(m);
    let n = mesh.n;
    // Row-parallel gather: each node row sums its (up to eight) annulus cells
    // in a fixed order.
    a.blocks.par_chunks_mut(SLOTS).enumerate().for_each(|(p, row)| {
        let [pi, pj, pk] = mesh.node_ijk(p);
        for dk in 0..2usize {
            for dj in 0..2usize {
                for di in 0..2usize {
                    if pi < di || pj < dj || pk < dk {
                        continue;
                    }
                    let (ci, cj, ck) = (pi - di, pj - dj, pk - dk);
                    if ci >= n || cj >= n || ck >= n {
                        continue;
                    }
                    let cell = mesh.cell_index(ci, cj, ck);
                    if mesh.tags[cell] != CellTag::Annulus {
                        continue;
                    }
                    let ke = cell_matrix(cell);
                    // local index of p in this cell
                    let la = HEX_CORNERS.iter().position(|cn| *cn == [di, dj, dk]).unwrap();
                    for (lb, cn) in HEX_CORNERS.iter().enumerate() {
                        let off = [
                            cn[0] as isize - di as isize,
                            cn[1] as isize - dj as isize,
                            cn[2] as isize - dk as isize,
                        ];
                        let blk = &mut row[slot_of(off[0], off[1], off[2])];
                        for c in 0..3 {
                            for d in 0..3 {
                                blk[3 * c + d] += ke[3 * la + c][3 * lb + d];
                            }
                        }
                    }
                }
            }
        }
    });
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_partition_of_unity() {
        let xi = [0.3, 0.7, 0.1];
        let n = shape(xi);
        assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let g = shape_grad(xi, [0.5, 0.25, 2.0]);
        for d in 0..3 {
            assert!(g.iter().map(|v| v[d]).sum::<f64>().abs() < 1e-14);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = [0.5, 0.25, 2.0];
        let xi = [0.3, 0.6, 0.2];
        let g = shape_grad(xi, h);
        let e = 1e-6;
        for d in 0..3 {
            let mut p = xi;
            let mut m = xi;
            p[d] += e;
            m[d] -= e;
            let (np, nm) = (shape(p), shape(m));
            for a in 0..8 {
                let fd = (np[a] - nm[a]) / (2.0 * e * h[d]);
                assert!((fd - g[a][d]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mass_integrates_volume() {
        let h = [0.5, 0.25, 2.0];
        let ints = element_integrals(h);
        let total: f64 = ints.m.iter().flat_map(|r| r.iter()).sum();
        assert!((total - 0.25).abs() < 1e-14);
    }

    #[test]
    fn element_matrix_is_symmetric() {
        let ints = element_integrals([0.1, 0.2, 0.3]);
        let k = element_matrix(&ints, 1.3, 0.7, 2.0, 1.1);
        for i in 0..24 {
            for j in 0..24 {
                assert!((k[i][j] - k[j][i]).abs() < 1e-12);
            }
        }
    }
}
