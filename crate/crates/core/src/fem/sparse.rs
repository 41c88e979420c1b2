//! Node-blocked sparse storage for operators on a structured grid.
//!
//! Every node row holds 27 slots of 3×3 real blocks, one per lattice
//! neighbour offset in `{-1,0,1}³`. Missing neighbours (outside the grid)
//! point at the row node itself with a zero block, which keeps the
//! product loop branch-free.

use num_complex::Complex64;
use rayon::prelude::*;

pub const SLOTS: usize = 27;
pub const SELF_SLOT: usize = 13;

pub type Block = [f64; 9];

#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    /// Nodes per axis.
    pub m: usize,
    pub cols: Vec<u32>,
    pub blocks: Vec<Block>,
}

#[inline]
pub fn slot_of(di: isize, dj: isize, dk: isize) -> usize {
    ((di + 1) + 3 * (dj + 1) + 9 * (dk + 1)) as usize
}

#[inline]
pub fn slot_offset(s: usize) -> [isize; 3] {
    [(s % 3) as isize - 1, ((s / 3) % 3) as isize - 1, (s / 9) as isize - 1]
}

impl BlockMatrix {
    pub fn zeros(m: usize) -> Self {
        let nn = m * m * m;
        let mut cols = vec![0u32; nn * SLOTS];
        for p in 0..nn {
            let (i, j, k) = ((p % m) as isize, ((p / m) % m) as isize, (p / (m * m)) as isize);
            for s in 0..SLOTS {
                let [di, dj, dk] = slot_offset(s);
                let (a, b, c) = (i + di, j + dj, k + dk);
                let inside = (0..m as isize).contains(&a) && (0..m as isize).contains(&b) && (0..m as isize).contains(&c);
                cols[p * SLOTS + s] = if inside { (a + m as isize * (b + m as isize * c)) as u32 } else { p as u32 };
            }
        }
        BlockMatrix { m, cols, blocks: vec![[0.0; 9]; nn * SLOTS] }
    }

    pub fn num_nodes(&self) -> usize {
        self.m * self.m * self.m
    }

    pub fn dim(&self) -> usize {
        3 * self.num_nodes()
    }

    /// Slot holding the block coupling row node `p` to column node `q`, if adjacent.
    pub fn slot(&self, p: usize, q: usize) -> Option<usize> {
        let m = self.m;
        let pi = [p % m, (p / m) % m, p / (m * m)];
        let qi = [q % m, (q / m) % m, q / (m * m)];
        let d: Vec<isize> = (0..3).map(|a| qi[a] as isize - pi[a] as isize).collect();
        if d.iter().any(|x| x.abs() > 1) {
            return None;
        }
        Some(slot_of(d[0], d[1], d[2]))
    }

    /// Entry `(row, col)` in scalar DOF numbering `3·node + component`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (p, c) = (row / 3, row % 3);
        let (q, d) = (col / 3, col % 3);
        match self.slot(p, q) {
            Some(s) => self.blocks[p * SLOTS + s][3 * c + d],
            None => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim()];
        for p in 0..self.num_nodes() {
            let b = &self.blocks[p * SLOTS + SELF_SLOT];
            for c in 0..3 {
                d[3 * p + c] = b[4 * c];
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().flat_map(|b| b.iter()).fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.num_nodes())
            .flat_map(|p| {
                (0..3).map(move |c| {
                    (0..SLOTS)
                        .filter(|&s| self.cols[p * SLOTS + s] as usize != p || s == SELF_SLOT)
                        .map(|s| (0..3).map(|d| self.blocks[p * SLOTS + s][3 * c + d].abs()).sum::<f64>())
                        .sum::<f64>()
                })
            })
            .fold(0.0, f64::max)
    }

    /// `max |A - Aᵀ|` over all stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for p in 0..self.num_nodes() {
            for s in 0..SLOTS {
                let q = self.cols[p * SLOTS + s] as usize;
                if q == p && s != SELF_SLOT {
                    continue;
                }
                let st = SLOTS - 1 - s;
                let a = &self.blocks[p * SLOTS + s];
                let b = &self.blocks[q * SLOTS + st];
                for c in 0..3 {
                    for d in 0..3 {
                        worst = worst.max((a[3 * c + d] - b[3 * d + c]).abs());
                    }
                }
            }
        }
        worst
    }

    /// `y = A x` for a complex vector.
    pub fn mul_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim());
        y.par_chunks_mut(3 * 64).enumerate().for_each(|(chunk, ys)| {
            let p0 = chunk * 64;
            for (lp, yp) in ys.chunks_mut(3).enumerate() {
                let p = p0 + lp;
                let base = p * SLOTS;
                let mut acc = [Complex64::new(0.0, 0.0); 3];
                for s in 0..SLOTS {
                    let q = self.cols[base + s] as usize;
                    let b = &self.blocks[base + s];
                    let xq = &x[3 * q..3 * q + 3];
                    for c in 0..3 {
                        acc[c] += xq[0] * b[3 * c] + xq[1] * b[3 * c + 1] + xq[2] * b[3 * c + 2];
                    }
                }
                yp.copy_from_slice(&acc);
            }
        });
    }

    pub fn mul(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.mul_into(x, &mut y);
        y
    }

    /// Dense copy, for tests on small grids.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|r| (0..n).map(|c| self.get(r, c)).collect()).collect()
    }

    /// Half bandwidth in scalar DOF numbering.
    pub fn half_bandwidth(&self) -> usize {
        3 * (1 + self.m + self.m * self.m) + 2
    }
}

/// Sum `Σ a_i` accumulated in fixed-size chunks so the result does not depend
/// on the thread count.
pub fn chunked_sum<F>(n: usize, f: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync,
{
    const CHUNK: usize = 4096;
    let parts: Vec<Complex64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|ch| {
            let mut s = Complex64::new(0.0, 0.0);
            for i in ch * CHUNK..((ch + 1) * CHUNK).min(n) {
                s += f(i);
            }
            s
        })
        .collect();
    parts.into_iter().fold(Complex64::new(0.0, 0.0), |a, b| a + b)
}

/// Unconjugated `xᵀy`.
pub fn dotu(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    chunked_sum(x.len(), |i| x[i] * y[i])
}

/// `‖x‖₂` (Hermitian).
pub fn norm2(x: &[Complex64]) -> f64 {
    chunked_sum(x.len(), |i| Complex64::new(x[i].norm_sqr(), 0.0)).re.sqrt()
}
