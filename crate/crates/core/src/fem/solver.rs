//! Linear solvers for the constrained, complex-symmetric FEM systems.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::Registry;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::perm::PermRef;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, IntranodeLbltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par, Side};

use super::sparse::{dotu, norm2, BlockMatrix, SELF_SLOT, SLOTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Registered solver name.
    pub method: String,
    /// Relative residual target.
    pub tol: f64,
    /// Iteration cap; `None` means `20·sqrt(unknowns)`.
    pub max_iter: Option<usize>,
    /// `auto` factorizes directly below this many unknowns.
    pub direct_threshold: usize,
    /// `auto` gives up on the sparse factorization above this many factor
    /// entries (8 bytes each).
    pub max_fill: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { method: "auto".into(), tol: 1e-10, max_iter: None, direct_threshold: 400_000, max_fill: 300_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub method: String,
    pub iterations: usize,
    pub relative_residual: f64,
    pub cond_est: f64,
    /// Extremal Ritz values (real parts) of the preconditioned operator, when
    /// a Krylov method ran.
    pub ritz_min: Option<f64>,
    pub ritz_max: Option<f64>,
}

/// The operator after essential constraints: fixed rows and columns replaced
/// by the identity.
#[derive(Debug)]
pub struct ConstrainedOperator {
    pub matrix: BlockMatrix,
    pub mask: Vec<bool>,
    pub inv_diag: Vec<f64>,
    factor: OnceLock<std::result::Result<Arc<BandLdlt>, Error>>,
    sparse: OnceLock<std::result::Result<Arc<SparseLblt>, Error>>,
}

impl ConstrainedOperator {
    pub fn new(full: &BlockMatrix, mask: Vec<bool>) -> Self {
        let mut matrix = full.clone();
        let nn = matrix.num_nodes();
        matrix.blocks.par_chunks_mut(SLOTS).enumerate().for_each(|(p, row)| {
            for s in 0..SLOTS {
                let q = full.cols[p * SLOTS + s] as usize;
                let b = &mut row[s];
                for c in 0..3 {
                    for d in 0..3 {
                        if mask[3 * p + c] || mask[3 * q + d] {
                            b[3 * c + d] = 0.0;
                        }
                    }
                }
            }
            for c in 0..3 {
                if mask[3 * p + c] {
                    row[SELF_SLOT][4 * c] = 1.0;
                }
            }
        });
        debug_assert_eq!(nn * 3, mask.len());
        let inv_diag = matrix
            .diagonal()
            .into_iter()
            .map(|d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
            .collect();
        ConstrainedOperator { matrix, mask, inv_diag, factor: OnceLock::new(), sparse: OnceLock::new() }
    }

    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    pub fn unknowns(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }

    /// Band factorization, computed on first use and shared afterwards.
    pub fn factor(&self) -> Result<Arc<BandLdlt>> {
        self.factor
            .get_or_init(|| BandLdlt::factor(&self.matrix).map(Arc::new))
            .clone()
    }

    /// Sparse factorization of the free block, computed on first use.
    pub fn sparse_factor(&self) -> Result<Arc<SparseLblt>> {
        self.sparse
            .get_or_init(|| SparseLblt::factor(&self.matrix, &self.mask).map(Arc::new))
            .clone()
    }

    /// Number of factor entries a sparse factorization would need, without
    /// computing it.
    pub fn sparse_fill(&self) -> Result<usize> {
        let (lower, free) = free_lower(&self.matrix, &self.mask)?;
        Ok(symbolic(&lower, free.len())?.len_val())
    }

    pub fn residual_norm(&self, x: &[Complex64], b: &[Complex64]) -> f64 {
        let ax = self.matrix.mul(x);
        let r: Vec<Complex64> = ax.iter().zip(b).map(|(a, b)| b - a).collect();
        norm2(&r)
    }
}

pub trait LinearSolver: Send + Sync {
    fn name(&self) -> &'static str;

    /// Solves `A x = b`; `x` holds the initial guess on entry.
    fn solve(&self, op: &ConstrainedOperator, b: &[Complex64], x: &mut [Complex64], opts: &SolverOptions) -> Result<SolveStats>;
}

pub fn solver_registry() -> Registry<dyn LinearSolver> {
    Registry::new("solver")
        .register("cocg", || Box::new(Cocg) as Box<dyn LinearSolver>)
        .register("banded-ldlt", || Box::new(BandedLdlt) as Box<dyn LinearSolver>)
        .register("sparse-ldlt", || Box::new(SparseLdlt) as Box<dyn LinearSolver>)
        .register("auto", || Box::new(Auto) as Box<dyn LinearSolver>)
}

pub fn solve_with(op: &ConstrainedOperator, b: &[Complex64], x: &mut [Complex64], opts: &SolverOptions) -> Result<SolveStats> {
    let solver = solver_registry().create(&opts.method)?;
    let stats = solver.solve(op, b, x, opts)?;
    log::debug!(
        "solve: iters={} relres={:.3e} cond_est={:.3e}",
        stats.iterations,
        stats.relative_residual,
        stats.cond_est
    );
    Ok(stats)
}

/// Sparse factorization when it fits the thresholds, COCG otherwise. The
/// factor is kept on the operator, so repeated solves only pay for it once.
pub struct Auto;

impl LinearSolver for Auto {
    fn name(&self) -> &'static str {
        "auto"
    }

    fn solve(&self, op: &ConstrainedOperator, b: &[Complex64], x: &mut [Complex64], opts: &SolverOptions) -> Result<SolveStats> {
        let direct = op.sparse.get().is_some()
            || (op.unknowns() < opts.direct_threshold && op.sparse_fill().is_ok_and(|f| f <= opts.max_fill));
        if direct {
            if let Ok(stats) = SparseLdlt.solve(op, b, x, opts) {
                return Ok(stats);
            }
            log::warn!("sparse factorization failed, falling back to cocg");
            x.iter_mut().for_each(|v| *v = Complex64::default());
        }
        Cocg.solve(op, b, x, opts)
    }
}

/// Conjugate orthogonal CG (unconjugated inner products) with Jacobi
/// preconditioning.
pub struct Cocg;

impl LinearSolver for Cocg {
    fn name(&self) -> &'static str {
        "cocg"
    }

    fn solve(&self, op: &ConstrainedOperator, b: &[Complex64], x: &mut [Complex64], opts: &SolverOptions) -> Result<SolveStats> {
        let cap = opts.max_iter.unwrap_or_else(|| (20.0 * (op.unknowns().max(1) as f64).sqrt()).ceil() as usize);
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            x.iter_mut().for_each(|v| *v = Complex64::default());
            return Ok(SolveStats {
                method: "cocg".into(),
                iterations: 0,
                relative_residual: 0.0,
                cond_est: 1.0,
                ritz_min: None,
                ritz_max: None,
            });
        }
        let mut ap = op.matrix.mul(x);
        let mut r: Vec<Complex64> = b.iter().zip(&ap).map(|(b, a)| b - a).collect();
        let mut z: Vec<Complex64> = r.iter().zip(&op.inv_diag).map(|(r, d)| r * d).collect();
        let mut p = z.clone();
        let mut rho = dotu(&r, &z);
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        let mut relres = norm2(&r) / bnorm;
        let mut it = 0;
        while relres > opts.tol && it < cap {
            op.matrix.mul_into(&p, &mut ap);
            let pap = dotu(&p, &ap);
            if pap.norm() == 0.0 || !pap.is_finite() {
                break;
            }
            let alpha = rho / pap;
            x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
            r.par_iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
            z.par_iter_mut()
                .zip(&r)
                .zip(&op.inv_diag)
                .for_each(|((z, r), d)| *z = r * d);
            let rho_new = dotu(&r, &z);
            let beta = rho_new / rho;
            p.par_iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
            rho = rho_new;
            alphas.push(alpha);
            betas.push(beta);
            it += 1;
            relres = norm2(&r) / bnorm;
        }
        // true residual, not the recursively updated one
        let true_res = op.residual_norm(x, b) / bnorm;
        let ritz = ritz_values(&alphas, &betas);
        let (lo, hi) = ritz
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), z| (lo.min(z.norm()), hi.max(z.norm())));
        let cond_est = if ritz.is_empty() || lo == 0.0 { f64::INFINITY } else { hi / lo };
        let re_min = ritz.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let re_max = ritz.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let stats = SolveStats {
            method: "cocg".into(),
            iterations: it,
            relative_residual: true_res,
            cond_est,
            ritz_min: (!ritz.is_empty()).then_some(re_min),
            ritz_max: (!ritz.is_empty()).then_some(re_max),
        };
        if true_res > opts.tol * 10.0 || !true_res.is_finite() {
            log::warn!("solve: iters={} relres={:.3e} cond_est={:.3e} (not converged)", it, true_res, cond_est);
            return Err(Error::NotConverged { iterations: it, relative_residual: true_res, cond_est });
        }
        Ok(stats)
    }
}

/// Eigenvalues of the Lanczos tridiagonal recovered from CG coefficients.
pub fn ritz_values(alphas: &[Complex64], betas: &[Complex64]) -> Vec<Complex64> {
    const MAX_RITZ: usize = 300;
    let m = alphas.len().min(MAX_RITZ);
    if m == 0 {
        return Vec::new();
    }
    let mut d = vec![Complex64::default(); m];
    let mut e = vec![Complex64::default(); m];
    for j in 0..m {
        d[j] = 1.0 / alphas[j];
        if j > 0 {
            d[j] += betas[j - 1] / alphas[j - 1];
        }
        if j + 1 < m {
            e[j] = betas[j].sqrt() / alphas[j];
        }
    }
    tridiagonal_eigenvalues(d, e)
}

/// Implicit QL on a complex-symmetric tridiagonal matrix (diagonal `d`,
/// off-diagonal `e[0..n-1]`). Eigenvalues only.
pub fn tridiagonal_eigenvalues(mut d: Vec<Complex64>, mut e: Vec<Complex64>) -> Vec<Complex64> {
    let n = d.len();
    let one = Complex64::new(1.0, 0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].norm() + d[m + 1].norm();
                if e[m].norm() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = (g * g + one).sqrt();
            let sr = if (g + r).norm() >= (g - r).norm() { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + sr);
            let (mut s, mut c, mut p) = (one, one, Complex64::default());
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r.norm() == 0.0 {
                    d[i + 1] -= p;
                    e[m] = Complex64::default();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = Complex64::default();
        }
    }
    d
}

/// Banded `LDLᵀ` factorization in scalar DOF numbering. Rows start at their
/// first structural nonzero, so fill stays inside the envelope.
#[derive(Debug)]
pub struct BandLdlt {
    n: usize,
    bw: usize,
    first: Vec<usize>,
    /// Row `i` holds `L[i][i-bw ..= i-1]` (unit diagonal not stored).
    l: Vec<f64>,
    d: Vec<f64>,
}

impl BandLdlt {
    pub fn factor(a: &BlockMatrix) -> Result<Self> {
        let n = a.dim();
        let bw = a.half_bandwidth();
        let w = bw;
        let mut l = vec![0.0; n * w];
        let mut d = vec![0.0; n];
        let mut first = vec![0usize; n];
        // scatter lower triangle
        for p in 0..a.num_nodes() {
            for s in 0..SLOTS {
                let q = a.cols[p * SLOTS + s] as usize;
                if q > p || (q == p && s != SELF_SLOT) {
                    continue;
                }
                let blk = &a.blocks[p * SLOTS + s];
                for c in 0..3 {
                    let i = 3 * p + c;
                    for dcol in 0..3 {
                        let j = 3 * q + dcol;
                        if j > i {
                            continue;
                        }
                        let v = blk[3 * c + dcol];
                        if j == i {
                            d[i] = v;
                        } else if v != 0.0 {
                            l[i * w + (j + bw - i)] = v;
                        }
                    }
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = &l[i * w..(i + 1) * w];
            first[i] = (lo..i).find(|&j| row[j + bw - i] != 0.0).unwrap_or(i);
        }
        let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut wrow = vec![0.0; w];
        for i in 0..n {
            let fi = first[i];
            let base = i * w + bw; // column j sits at base + j - i
            for j in fi..i {
                let fj = first[j].max(fi);
                let mut v = l[base + j - i];
                if fj < j {
                    let lj = &l[j * w + (fj + bw - j)..j * w + (j + bw - j)];
                    let wi = &wrow[fj + bw - i..j + bw - i];
                    v -= wi.iter().zip(lj).map(|(a, b)| a * b).sum::<f64>();
                }
                wrow[j + bw - i] = v;
            }
            let mut di = d[i];
            for j in fi..i {
                let wv = wrow[j + bw - i];
                let lij = wv / d[j];
                l[base + j - i] = lij;
                di -= wv * lij;
            }
            if di.abs() <= 1e-14 * scale || !di.is_finite() {
                return Err(Error::ZeroPivot(i));
            }
            d[i] = di;
        }
        Ok(BandLdlt { n, bw, first, l, d })
    }

    pub fn solve_in_place(&self, x: &mut [Complex64]) {
        let (n, bw) = (self.n, self.bw);
        let w = bw;
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.l[i * w + (fi + bw - i)..i * w + bw];
            let mut s = Complex64::default();
            for (lij, xj) in row.iter().zip(&x[fi..i]) {
                s += xj * lij;
            }
            x[i] -= s;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = x[i];
            let row = &self.l[i * w + (fi + bw - i)..i * w + bw];
            for (lij, xj) in row.iter().zip(&mut x[fi..i]) {
                *xj -= xi * lij;
            }
        }
    }

    pub fn cond_est(&self) -> f64 {
        let (lo, hi) = self.d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
        hi / lo
    }
}

pub struct BandedLdlt;

impl LinearSolver for BandedLdlt {
    fn name(&self) -> &'static str {
        "banded-ldlt"
    }

    fn solve(&self, op: &ConstrainedOperator, b: &[Complex64], x: &mut [Complex64], _opts: &SolverOptions) -> Result<SolveStats> {
        let f = op.factor()?;
        x.copy_from_slice(b);
        f.solve_in_place(x);
        let bnorm = norm2(b);
        let relres = if bnorm == 0.0 { 0.0 } else { op.residual_norm(x, b) / bnorm };
        Ok(SolveStats {
            method: "banded-ldlt".into(),
            iterations: 1,
            relative_residual: relres,
            cond_est: f.cond_est(),
            ritz_min: None,
            ritz_max: None,
        })
    }
}

/// Lower triangle of the free block in CSC form, and the free DOF list.
fn free_lower(a: &BlockMatrix, mask: &[bool]) -> Result<(SparseColMat<usize, f64>, Vec<usize>)> {
    let mut index = vec![usize::MAX; mask.len()];
    let free: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
    for (r, &i) in free.iter().enumerate() {
        index[i] = r;
    }
    let mut entries = Vec::new();
    for p in 0..a.num_nodes() {
        for s in 0..SLOTS {
            let q = a.cols[p * SLOTS + s] as usize;
            if q == p && s != SELF_SLOT {
                continue;
            }
            let blk = &a.blocks[p * SLOTS + s];
            for c in 0..3 {
                let i = index[3 * p + c];
                if i == usize::MAX {
                    continue;
                }
                for d in 0..3 {
                    let j = index[3 * q + d];
                    let v = blk[3 * c + d];
                    if j != usize::MAX && j <= i && (v != 0.0 || i == j) {
                        entries.push(Triplet::new(i, j, v));
                    }
                }
            }
        }
    }
    let n = free.len();
    let m = SparseColMat::try_new_from_triplets(n, n, &entries).map_err(|e| Error::Solver(format!("{e:?}")))?;
    Ok((m, free))
}

fn symbolic(lower: &SparseColMat<usize, f64>, n: usize) -> Result<SymbolicCholesky<usize>> {
    debug_assert_eq!(lower.nrows(), n);
    factorize_symbolic_cholesky(lower.symbolic(), Side::Lower, SymmetricOrdering::Amd, CholeskySymbolicParams::default())
        .map_err(|e| Error::Solver(format!("{e:?}")))
}

/// Supernodal `LBLᵀ` (Bunch–Kaufman pivoting inside supernodes) of the free
/// block of a constrained operator, with a fill-reducing AMD ordering. The
/// matrix is real, so complex right-hand sides are solved as two columns.
pub struct SparseLblt {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    subdiag: Vec<f64>,
    fwd: Vec<usize>,
    inv: Vec<usize>,
    free: Vec<usize>,
}

impl std::fmt::Debug for SparseLblt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLblt").field("n", &self.free.len()).field("fill", &self.values.len()).finish()
    }
}

impl SparseLblt {
    pub fn factor(a: &BlockMatrix, mask: &[bool]) -> Result<Self> {
        let (lower, free) = free_lower(a, mask)?;
        let n = free.len();
        let symbolic = symbolic(&lower, n)?;
        let mut values = vec![0.0; symbolic.len_val()];
        let mut subdiag = vec![0.0; n];
        let mut fwd = vec![0usize; n];
        let mut inv = vec![0usize; n];
        let mut buf = MemBuffer::new(symbolic.factorize_numeric_intranode_lblt_scratch::<f64>(Par::Seq, Default::default()));
        symbolic.factorize_numeric_intranode_lblt(
            &mut values,
            &mut subdiag,
            &mut fwd,
            &mut inv,
            lower.as_ref(),
            Side::Lower,
            Par::Seq,
            MemStack::new(&mut buf),
            Default::default(),
        );
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("non-finite sparse factor".into()));
        }
        Ok(SparseLblt { symbolic, values, subdiag, fwd, inv, free })
    }

    pub fn fill(&self) -> usize {
        self.values.len()
    }

    /// Overwrites `x` (holding the right-hand side) with the solution; fixed
    /// DOFs keep their right-hand side values.
    pub fn solve_in_place(&self, x: &mut [Complex64]) {
        let n = self.free.len();
        if n == 0 {
            return;
        }
        let mut rhs = Mat::<f64>::from_fn(n, 2, |i, j| if j == 0 { x[self.free[i]].re } else { x[self.free[i]].im });
        // SAFETY: fwd and inv are the mutually inverse pivot permutations
        // written by the numeric factorization.
        let perm = unsafe { PermRef::new_unchecked(&self.fwd, &self.inv, n) };
        let lblt = IntranodeLbltRef::new(&self.symbolic, &self.values, &self.subdiag, perm);
        let mut buf = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(2, Par::Seq));
        lblt.solve_in_place_with_conj(Conj::No, rhs.as_mut(), Par::Seq, MemStack::new(&mut buf));
        for (i, &dof) in self.free.iter().enumerate() {
            x[dof] = Complex64::new(rhs[(i, 0)], rhs[(i, 1)]);
        }
    }
}

/// Sparse direct solve with up to three steps of iterative refinement.
pub struct SparseLdlt;

impl LinearSolver for SparseLdlt {
    fn name(&self) -> &'static str {
        "sparse-ldlt"
    }

    fn solve(&self, op: &ConstrainedOperator, b: &[Complex64], x: &mut [Complex64], opts: &SolverOptions) -> Result<SolveStats> {
        let f = op.sparse_factor()?;
        x.copy_from_slice(b);
        f.solve_in_place(x);
        let bnorm = norm2(b);
        let mut relres = if bnorm == 0.0 { 0.0 } else { op.residual_norm(x, b) / bnorm };
        let mut steps = 1;
        while relres > opts.tol && relres.is_finite() && steps < 4 {
            let ax = op.matrix.mul(x);
            let mut d: Vec<Complex64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            f.solve_in_place(&mut d);
            x.iter_mut().zip(&d).for_each(|(x, d)| *x += d);
            relres = op.residual_norm(x, b) / bnorm;
            steps += 1;
        }
        // ‖A‖∞‖x‖∞/‖b‖∞ bounds the condition number from below
        let xinf = x.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let binf = b.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let cond_est = if binf == 0.0 { 1.0 } else { op.matrix.inf_norm() * xinf / binf };
        if relres > opts.tol * 10.0 || !relres.is_finite() {
            return Err(Error::NotConverged { iterations: steps, relative_residual: relres, cond_est });
        }
        Ok(SolveStats {
            method: "sparse-ldlt".into(),
            iterations: steps,
            relative_residual: relres,
            cond_est,
            ritz_min: None,
            ritz_max: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_like(m: usize, shift: f64) -> BlockMatrix {
        // 7-point Laplacian on each component plus a weak 27-point coupling
        let mut a = BlockMatrix::zeros(m);
        for p in 0..a.num_nodes() {
            for s in 0..SLOTS {
                let q = a.cols[p * SLOTS + s] as usize;
                if q == p && s != SELF_SLOT {
                    continue;
                }
                let off = super::super::sparse::slot_offset(s);
                let dist: isize = off.iter().map(|v| v.abs()).sum();
                let blk = &mut a.blocks[p * SLOTS + s];
                for c in 0..3 {
                    if dist == 0 {
                        blk[4 * c] = 6.0 + shift;
                    } else if dist == 1 {
                        blk[4 * c] = -1.0;
                    }
                }
                if dist == 2 {
                    blk[1] = 0.05;
                    blk[3] = 0.05;
                }
            }
        }
        a
    }

    fn rhs(n: usize) -> Vec<Complex64> {
        (0..n).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect()
    }

    #[test]
    fn cocg_and_ldlt_agree() {
        let a = laplace_like(6, 0.3);
        let mut mask = vec![false; a.dim()];
        for (i, m) in mask.iter_mut().enumerate() {
            *m = i % 17 == 0;
        }
        let op = ConstrainedOperator::new(&a, mask);
        assert!(op.matrix.max_asymmetry() < 1e-15);
        let b = rhs(op.dim());
        let opts = SolverOptions { tol: 1e-12, ..Default::default() };
        let mut x1 = vec![Complex64::default(); op.dim()];
        let s1 = Cocg.solve(&op, &b, &mut x1, &opts).unwrap();
        assert!(s1.relative_residual <= 1e-11);
        let mut x2 = vec![Complex64::default(); op.dim()];
        let s2 = BandedLdlt.solve(&op, &b, &mut x2, &opts).unwrap();
        assert!(s2.relative_residual < 1e-13);
        let diff: f64 = x1.iter().zip(&x2).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
    }

    #[test]
    fn sparse_factor_matches_band_factor_on_indefinite_system() {
        let a = laplace_like(6, -2.7);
        let mut mask = vec![false; a.dim()];
        for (i, m) in mask.iter_mut().enumerate() {
            *m = i % 11 == 3;
        }
        let op = ConstrainedOperator::new(&a, mask);
        let b = rhs(op.dim());
        let opts = SolverOptions { tol: 1e-12, ..Default::default() };
        let mut x1 = vec![Complex64::default(); op.dim()];
        BandedLdlt.solve(&op, &b, &mut x1, &opts).unwrap();
        let mut x2 = vec![Complex64::default(); op.dim()];
        let s2 = SparseLdlt.solve(&op, &b, &mut x2, &opts).unwrap();
        assert!(s2.relative_residual < 1e-12);
        assert!(op.sparse_fill().unwrap() == op.sparse_factor().unwrap().fill());
        let diff: f64 = x1.iter().zip(&x2).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
        for (i, m) in op.mask.iter().enumerate() {
            if *m {
                assert_eq!(x2[i], b[i]);
            }
        }
    }

    #[test]
    fn ritz_values_of_spd_system_are_positive() {
        let a = laplace_like(5, 0.5);
        let op = ConstrainedOperator::new(&a, vec![false; a.dim()]);
        let b: Vec<Complex64> = rhs(op.dim()).iter().map(|z| Complex64::new(z.re, 0.0)).collect();
        let mut x = vec![Complex64::default(); op.dim()];
        let s = Cocg.solve(&op, &b, &mut x, &SolverOptions::default()).unwrap();
        assert!(s.ritz_min.unwrap() > 0.0);
        assert!(s.cond_est > 1.0 && s.cond_est.is_finite());
    }

    #[test]
    fn tridiagonal_eigenvalues_match_closed_form() {
        // tridiag(-1, 2, -1): λ_j = 2 - 2cos(jπ/(n+1))
        let n = 12;
        let d = vec![Complex64::new(2.0, 0.0); n];
        let e = vec![Complex64::new(-1.0, 0.0); n];
        let mut ev: Vec<f64> = tridiagonal_eigenvalues(d, e).iter().map(|z| z.re).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (j, v) in ev.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplace_like(4, 0.1);
        let op = ConstrainedOperator::new(&a, vec![false; a.dim()]);
        let mut x = vec![Complex64::new(1.0, 1.0); op.dim()];
        let b = vec![Complex64::default(); op.dim()];
        let s = Cocg.solve(&op, &b, &mut x, &SolverOptions::default()).unwrap();
        assert_eq!(s.iterations, 0);
        assert!(x.iter().all(|v| *v == Complex64::default()));
    }

    #[test]
    fn singular_matrix_reports_zero_pivot() {
        let a = BlockMatrix::zeros(3);
        let mut mask = vec![true; a.dim()];
        mask[5] = false;
        let op = ConstrainedOperator::new(&a, mask);
        assert!(matches!(op.factor(), Err(Error::ZeroPivot(5))));
    }

    #[test]
    fn unknown_solver_is_reported() {
        let err = solver_registry().create("gmres").err().unwrap();
        assert!(err.to_string().contains("cocg"));
    }
}
