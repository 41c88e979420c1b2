//! Small fixed-size vector helpers for real and complex 3-vectors.
//!
//! Dot products on complex vectors are *unconjugated* unless the name says
//! otherwise; the CGO algebra (`ζ·ζ = k²`) depends on that.

use num_complex::Complex64;

pub type Real3 = [f64; 3];
pub type Cplx3 = [Complex64; 3];

pub const ZERO3: Real3 = [0.0; 3];
pub const CZERO3: Cplx3 = [Complex64::new(0.0, 0.0); 3];

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn dot(a: Real3, b: Real3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Real3, b: Real3) -> Real3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Real3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn scale(s: f64, a: Real3) -> Real3 {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn add(a: Real3, b: Real3) -> Real3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Real3, b: Real3) -> Real3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn normalize(a: Real3) -> Option<Real3> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(scale(1.0 / n, a))
    } else {
        None
    }
}

#[inline]
pub fn complexify(a: Real3) -> Cplx3 {
    [c(a[0], 0.0), c(a[1], 0.0), c(a[2], 0.0)]
}

/// Unconjugated bilinear dot product.
#[inline]
pub fn cdot(a: Cplx3, b: Cplx3) -> Complex64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Sesquilinear product `a · conj(b)`.
#[inline]
pub fn cdot_conj(a: Cplx3, b: Cplx3) -> Complex64 {
    a[0] * b[0].conj() + a[1] * b[1].conj() + a[2] * b[2].conj()
}

#[inline]
pub fn ccross(a: Cplx3, b: Cplx3) -> Cplx3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// `ν ∧ u` for a real normal and complex field value.
#[inline]
pub fn rcross(nu: Real3, u: Cplx3) -> Cplx3 {
    ccross(complexify(nu), u)
}

#[inline]
pub fn cscale(s: Complex64, a: Cplx3) -> Cplx3 {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn rscale(s: f64, a: Cplx3) -> Cplx3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn cadd(a: Cplx3, b: Cplx3) -> Cplx3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn csub(a: Cplx3, b: Cplx3) -> Cplx3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Hermitian norm `sqrt(Σ|a_i|²)`.
#[inline]
pub fn cnorm(a: Cplx3) -> f64 {
    cnorm_sqr(a).sqrt()
}

#[inline]
pub fn cnorm_sqr(a: Cplx3) -> f64 {
    a[0].norm_sqr() + a[1].norm_sqr() + a[2].norm_sqr()
}

#[inline]
pub fn conj3(a: Cplx3) -> Cplx3 {
    [a[0].conj(), a[1].conj(), a[2].conj()]
}

/// Tangential part `u_t = -ν ∧ (ν ∧ u)` for a unit normal.
#[inline]
pub fn tangential(nu: Real3, u: Cplx3) -> Cplx3 {
    let n = complexify(nu);
    let un = cdot(n, u);
    csub(u, cscale(un, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_of_basis_vectors() {
        assert_eq!(cross([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), [0.0, 0.0, 1.0]);
        assert_eq!(cross([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn tangential_part_matches_double_cross() {
        let nu = [0.0, 0.0, 1.0];
        let u = [c(1.0, 2.0), c(-0.5, 0.25), c(3.0, -1.0)];
        let t = tangential(nu, u);
        let dc = rcross(nu, rcross(nu, u));
        for i in 0..3 {
            assert!((t[i] + dc[i]).norm() < 1e-15);
        }
        assert_eq!(t[2], c(0.0, 0.0));
    }

    #[test]
    fn unconjugated_dot_of_null_vector_is_zero() {
        // (1, i, 0)·(1, i, 0) = 1 + i² = 0
        let v = [c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)];
        assert!(cdot(v, v).norm() < 1e-15);
        assert!((cdot_conj(v, v).re - 2.0).abs() < 1e-15);
    }
}
