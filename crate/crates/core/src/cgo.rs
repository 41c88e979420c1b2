//! Complex geometric optics (CGO) probing fields for a constant background.
//!
//! For a direction `ρ` and a decay parameter `τ > 0` the complex frequency
//! `ζ = -iτρ + sqrt(τ²+k²)ρ⊥` satisfies `ζ·ζ = k²`, and the plane-wave
//! ansatz `e^{ix·ζ}(η, θ)` solves Maxwell's system exactly when `ε, μ` are
//! constant. The remainder terms of the variable-coefficient construction are
//! identically zero in that case and are not represented.
//!
//! The amplitude vector `b` is taken as `conj(ζ̂) = (ρ⊥ + iρ)/√2`, which is the
//! choice that satisfies `ζ̂·b = 1` (the literal `b = ζ̂` gives `ζ̂·ζ̂ = 0`).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::medium::{check_unit, DomainGeometry, Medium};
use crate::vec3::*;

/// Exponent (natural-log units) beyond which evaluation refuses to proceed.
pub const EXPONENT_CAP: f64 = 300.0;

pub type Vec8 = [Complex64; 8];
pub type Mat8 = [[Complex64; 8]; 8];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionFrame {
    pub rho: Real3,
    pub rho_perp: Real3,
    pub a: Real3,
    pub b: Cplx3,
}

impl DirectionFrame {
    /// `ζ̂ = (-iρ + ρ⊥)/√2`, the large-τ limit of `ζ/|ζ|`.
    pub fn zeta_hat(&self) -> Cplx3 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        [0, 1, 2].map(|i| c(s * self.rho_perp[i], -s * self.rho[i]))
    }

    /// Largest deviation among the frame invariants.
    pub fn invariant_residual(&self) -> f64 {
        let zh = self.zeta_hat();
        [
            dot(self.rho, self.rho_perp).abs(),
            (norm(self.rho) - 1.0).abs(),
            (norm(self.rho_perp) - 1.0).abs(),
            dot(self.a, self.rho).abs(),
            dot(self.a, self.rho_perp).abs(),
            (norm(self.a) - 1.0).abs(),
            (cdot(zh, self.b) - 1.0).norm(),
            cdot(zh, complexify(self.a)).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Builds the frame with `ρ⊥` taken from the coordinate axis least aligned with `ρ`.
pub fn make_frame(rho: Real3) -> Result<DirectionFrame> {
    let rho = normalize(rho).ok_or_else(|| Error::InvalidParameter("zero-length direction".into()))?;
    let axis = (0..3)
        .min_by(|&i, &j| rho[i].abs().partial_cmp(&rho[j].abs()).unwrap())
        .unwrap();
    let mut e = ZERO3;
    e[axis] = 1.0;
    let rho_perp = normalize(sub(e, scale(dot(e, rho), rho))).expect("axis not parallel to rho");
    make_frame_with(rho, rho_perp)
}

/// Builds the frame for an explicit orthonormal pair `(ρ, ρ⊥)`.
pub fn make_frame_with(rho: Real3, rho_perp: Real3) -> Result<DirectionFrame> {
    if norm(rho) == 0.0 {
        return Err(Error::InvalidParameter("zero-length direction".into()));
    }
    check_unit(rho)?;
    check_unit(rho_perp)?;
    if dot(rho, rho_perp).abs() > 1e-12 {
        return Err(Error::InvalidParameter("rho_perp must be orthogonal to rho".into()));
    }
    let a = cross(rho, rho_perp);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let b = [0, 1, 2].map(|i| c(s * rho_perp[i], s * rho[i]));
    Ok(DirectionFrame { rho, rho_perp, a, b })
}

/// `ζ = -iτρ + sqrt(τ²+k²)ρ⊥`.
pub fn make_zeta(frame: &DirectionFrame, tau: f64, k: f64) -> Result<Cplx3> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("k must be positive, got {k}")));
    }
    let kappa = (tau * tau + k * k).sqrt();
    Ok([0, 1, 2].map(|i| c(kappa * frame.rho_perp[i], -tau * frame.rho[i])))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgoAmplitudes {
    pub zeta: Cplx3,
    pub zeta_norm: f64,
    pub y0: Vec8,
    pub x0: Vec8,
    pub eta: Cplx3,
    pub theta: Cplx3,
    pub tau: f64,
    pub k: f64,
}

pub fn make_amplitudes(frame: &DirectionFrame, tau: f64, k: f64) -> Result<CgoAmplitudes> {
    let zeta = make_zeta(frame, tau, k)?;
    let zeta_norm = (2.0 * tau * tau + k * k).sqrt();
    let inv = 1.0 / zeta_norm;
    let a = complexify(frame.a);
    let b = frame.b;
    let za = cdot(zeta, a);
    let zb = cdot(zeta, b);
    let kc = c(k, 0.0);

    let mut y0 = [c(0.0, 0.0); 8];
    y0[0] = za * inv;
    y0[7] = zb * inv;
    for i in 0..3 {
        y0[1 + i] = a[i] * k * inv;
        y0[4 + i] = b[i] * k * inv;
    }

    // η = (−(ζ·a)ζ − kζ∧b + k²a)/|ζ|,  θ = (kζ∧a − (ζ·b)ζ + k²b)/|ζ|
    let zxb = ccross(zeta, b);
    let zxa = ccross(zeta, a);
    let eta: Cplx3 = [0, 1, 2].map(|i| (-za * zeta[i] - kc * zxb[i] + kc * kc * a[i]) * inv);
    let theta: Cplx3 = [0, 1, 2].map(|i| (kc * zxa[i] - zb * zeta[i] + kc * kc * b[i]) * inv);

    let mut x0 = [c(0.0, 0.0); 8];
    for i in 0..3 {
        x0[1 + i] = eta[i];
        x0[4 + i] = theta[i];
    }
    Ok(CgoAmplitudes { zeta, zeta_norm, y0, x0, eta, theta, tau, k })
}

/// The first-order symbol `P(ζ)` acting on `(φ, e, h, ψ)`:
///
/// ```text
/// [ 0    ζᵀ    0    0 ]
/// [ ζ    0    ζ∧    0 ]
/// [ 0   -ζ∧   0     ζ ]
/// [ 0    0    ζᵀ    0 ]
/// ```
///
/// It squares to `(ζ·ζ)·1₈`.
pub fn sommerfeld_symbol(zeta: Cplx3) -> Mat8 {
    let z = c(0.0, 0.0);
    let mut p = [[z; 8]; 8];
    // ζ∧ as a matrix: (ζ∧v)_i = Σ_j C_ij v_j
    let cx = [
        [z, -zeta[2], zeta[1]],
        [zeta[2], z, -zeta[0]],
        [-zeta[1], zeta[0], z],
    ];
    for i in 0..3 {
        p[0][1 + i] = zeta[i];
        p[1 + i][0] = zeta[i];
        p[4 + i][7] = zeta[i];
        p[7][4 + i] = zeta[i];
        for j in 0..3 {
            p[1 + i][4 + j] = cx[i][j];
            p[4 + i][1 + j] = -cx[i][j];
        }
    }
    p
}

pub fn mat8_mul(a: &Mat8, b: &Mat8) -> Mat8 {
    let mut out = [[c(0.0, 0.0); 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            out[i][j] = (0..8).map(|l| a[i][l] * b[l][j]).sum();
        }
    }
    out
}

pub fn mat8_vec(a: &Mat8, v: &Vec8) -> Vec8 {
    let mut out = [c(0.0, 0.0); 8];
    for i in 0..8 {
        out[i] = (0..8).map(|j| a[i][j] * v[j]).sum();
    }
    out
}

/// How the shift `t` of a field was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `t` as requested by the caller.
    Raw,
    /// `t = sup_Ω x·ρ`, so the field modulus peaks at `|η|` on ∂Ω.
    PeakScaled,
}

/// Shifted CGO pair `E₀ = ε₀^{-1/2} e^{τ(x·ρ−t)+i sqrt(τ²+k²) x·ρ⊥} η`,
/// `H₀ = μ₀^{-1/2} e^{…} θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgoField {
    pub amplitudes: CgoAmplitudes,
    pub frame: DirectionFrame,
    pub medium: Medium,
    pub t_shift: f64,
    pub normalization: Normalization,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgoEval {
    pub e: Cplx3,
    pub h: Cplx3,
    pub curl_e: Cplx3,
}

impl CgoField {
    pub fn new(frame: DirectionFrame, tau: f64, medium: Medium, t_shift: f64) -> Result<Self> {
        let amplitudes = make_amplitudes(&frame, tau, medium.k())?;
        Ok(CgoField { amplitudes, frame, medium, t_shift, normalization: Normalization::Raw })
    }

    /// Field shifted to `t = sup_Ω x·ρ`; other shifts follow from the exact
    /// factor `e^{-τ(t - t_peak)}`.
    pub fn peak_scaled(frame: DirectionFrame, tau: f64, medium: Medium, geometry: &DomainGeometry) -> Result<Self> {
        let t = geometry.omega_support(frame.rho);
        let mut f = CgoField::new(frame, tau, medium, t)?;
        f.normalization = Normalization::PeakScaled;
        Ok(f)
    }

    pub fn tau(&self) -> f64 {
        self.amplitudes.tau
    }

    pub fn rho(&self) -> Real3 {
        self.frame.rho
    }

    pub fn with_shift(&self, t: f64) -> Self {
        CgoField { t_shift: t, normalization: Normalization::Raw, ..*self }
    }

    /// `e^{τ(x·ρ−t) + i sqrt(τ²+k²) x·ρ⊥}`.
    pub fn phase_factor(&self, x: Real3) -> Result<Complex64> {
        let tau = self.amplitudes.tau;
        let exponent = tau * (dot(x, self.frame.rho) - self.t_shift);
        if exponent > EXPONENT_CAP {
            return Err(Error::ExponentOverflow { exponent, cap: EXPONENT_CAP });
        }
        let kappa = (tau * tau + self.amplitudes.k * self.amplitudes.k).sqrt();
        Ok(Complex64::from_polar(exponent.exp(), kappa * dot(x, self.frame.rho_perp)))
    }

    pub fn eval(&self, x: Real3) -> Result<CgoEval> {
        let ph = self.phase_factor(x)?;
        let se = ph / self.medium.eps0.sqrt();
        let sh = ph / self.medium.mu0.sqrt();
        let e = cscale(se, self.amplitudes.eta);
        let h = cscale(sh, self.amplitudes.theta);
        let curl_e = cscale(c(0.0, 1.0) * se, ccross(self.amplitudes.zeta, self.amplitudes.eta));
        Ok(CgoEval { e, h, curl_e })
    }
}

/// Evaluates `(E₀, H₀, ∇∧E₀)` at `x`.
pub fn eval_cgo(field: &CgoField, x: Real3) -> Result<CgoEval> {
    field.eval(x)
}

/// Sampled scalar potentials `Φ = (i/ω)∇·(εE)`, `Ψ = (i/ω)∇·(μH)`.
#[derive(Debug, Clone, Default)]
pub struct ScalarPotentials {
    pub points: Vec<Real3>,
    pub phi: Vec<Complex64>,
    pub psi: Vec<Complex64>,
}

impl ScalarPotentials {
    pub fn sup_norms(&self) -> (f64, f64) {
        let m = |v: &[Complex64]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        (m(&self.phi), m(&self.psi))
    }

    /// `φ = Φ/(γ μ^{1/2})`, `ψ = Ψ/(γ^{1/2} μ)` for a constant background.
    pub fn rescaled(&self, medium: &Medium) -> (Vec<Complex64>, Vec<Complex64>) {
        let g = medium.eps0;
        let m = medium.mu0;
        (
            self.phi.iter().map(|z| z / (g * m.sqrt())).collect(),
            self.psi.iter().map(|z| z / (g.sqrt() * m)).collect(),
        )
    }
}

/// Evaluates the scalar potentials of two analytic fields by central differences
/// with step `step` at each sample point. Returns `(max|Φ|, max|Ψ|)` together
/// with the samples.
pub fn validate_potentials<E, H>(
    e: E,
    h: H,
    medium: &Medium,
    points: &[Real3],
    step: f64,
) -> ((f64, f64), ScalarPotentials)
where
    E: Fn(Real3) -> Cplx3,
    H: Fn(Real3) -> Cplx3,
{
    let div = |f: &dyn Fn(Real3) -> Cplx3, x: Real3| -> Complex64 {
        (0..3)
            .map(|i| {
                let mut xp = x;
                let mut xm = x;
                xp[i] += step;
                xm[i] -= step;
                (f(xp)[i] - f(xm)[i]) / (2.0 * step)
            })
            .sum()
    };
    let i_over_omega = c(0.0, 1.0 / medium.omega);
    let mut pots = ScalarPotentials::default();
    for &x in points {
        pots.points.push(x);
        pots.phi.push(i_over_omega * medium.eps_at(x) * div(&e, x));
        pots.psi.push(i_over_omega * medium.mu_at(x) * div(&h, x));
    }
    (pots.sup_norms(), pots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn frame_for_z_axis() {
        let f = make_frame([0.0, 0.0, 1.0]).unwrap();
        assert_eq!(f.rho_perp, [1.0, 0.0, 0.0]);
        assert_eq!(f.a, [0.0, 1.0, 0.0]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(f.b[0], c(s, 0.0), 1e-15));
        assert!(close(f.b[2], c(0.0, s), 1e-15));
        // ζ̂·b = ((-i)(i) + 1)/2 = 1
        assert!(close(cdot(f.zeta_hat(), f.b), c(1.0, 0.0), 1e-15));
        assert!(cdot(f.zeta_hat(), complexify(f.a)).norm() < 1e-15);
    }

    #[test]
    fn frame_for_x_axis_satisfies_invariants() {
        let f = make_frame([1.0, 0.0, 0.0]).unwrap();
        assert!(f.invariant_residual() < 1e-15);
        assert!(make_frame([0.0; 3]).is_err());
    }

    #[test]
    fn literal_b_equal_zeta_hat_violates_normalisation() {
        // records why b = conj(ζ̂) is used
        let f = make_frame([0.0, 0.0, 1.0]).unwrap();
        let zh = f.zeta_hat();
        assert!((cdot(zh, zh) - 1.0).norm() > 0.99);
    }

    #[test]
    fn zeta_worked_example() {
        let f = make_frame([0.0, 0.0, 1.0]).unwrap();
        let z = make_zeta(&f, 2.0, 1.0).unwrap();
        assert!(close(z[0], c(5f64.sqrt(), 0.0), 1e-15));
        assert!(close(z[1], c(0.0, 0.0), 1e-15));
        assert!(close(z[2], c(0.0, -2.0), 1e-15));
        assert!(close(cdot(z, z), c(1.0, 0.0), 1e-14));
        assert!((cnorm(z) - 3.0).abs() < 1e-14);
        assert!(make_zeta(&f, 0.0, 1.0).is_err());
        assert!(make_zeta(&f, -1.0, 1.0).is_err());
    }

    #[test]
    fn zeta_small_tau_limit() {
        let f = make_frame([0.0, 1.0, 0.0]).unwrap();
        let z = make_zeta(&f, 1e-9, 2.0).unwrap();
        for i in 0..3 {
            assert!(close(z[i], c(2.0 * f.rho_perp[i], 0.0), 1e-8));
        }
        assert!(close(cdot(z, z), c(4.0, 0.0), 1e-12));
    }

    #[test]
    fn amplitude_worked_example() {
        let f = make_frame([0.0, 0.0, 1.0]).unwrap();
        let amp = make_amplitudes(&f, 2.0, 1.0).unwrap();
        let s5 = 5f64.sqrt();
        let mid = c(1.0, (2.0 + s5) / 2f64.sqrt()) / 3.0;
        assert!(close(amp.eta[0], c(0.0, 0.0), 1e-15));
        assert!(close(amp.eta[1], mid, 1e-14));
        assert!(close(amp.eta[2], c(0.0, 0.0), 1e-15));
        assert!(close(amp.eta[1], c(0.33333, 0.99847), 5e-5));
        // closed forms: θ_x = -(4+2√5)/(3√2) + 2i/3, θ_z = (√5 + i(5+2√5)/√2)/3
        let r2 = 2f64.sqrt();
        assert!(close(amp.theta[0], c(-(4.0 + 2.0 * s5) / (3.0 * r2), 2.0 / 3.0), 1e-14));
        assert!(close(amp.theta[1], c(0.0, 0.0), 1e-14));
        assert!(close(amp.theta[2], c(s5 / 3.0, (5.0 + 2.0 * s5) / (3.0 * r2)), 1e-14));
        // five-digit reference values
        assert!(close(amp.theta[0], c(-1.99694, 0.66667), 1e-4));
        assert!(close(amp.theta[2], c(0.74536, 2.23258), 1e-4));
        // θ = ζ∧η with k = 1
        let zxe = ccross(amp.zeta, amp.eta);
        for i in 0..3 {
            assert!(close(zxe[i], amp.theta[i], 1e-13));
        }
    }

    #[test]
    fn eta_limit_at_large_tau() {
        let f = make_frame([0.0, 0.0, 1.0]).unwrap();
        let tau = 1e3;
        let amp = make_amplitudes(&f, tau, 1.0).unwrap();
        let lim = [c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)];
        let err = cnorm(csub(amp.eta, lim));
        assert!(err <= 1.0 / tau, "err = {err}");
    }

    #[test]
    fn x0_equals_shifted_symbol_applied_to_y0() {
        let f = make_frame([0.3, -0.4, (1.0f64 - 0.25).sqrt()]).unwrap();
        let amp = make_amplitudes(&f, 3.5, 1.3).unwrap();
        let minus_zeta = amp.zeta.map(|z| -z);
        let mut m = sommerfeld_symbol(minus_zeta);
        for i in 0..8 {
            m[i][i] += amp.k;
        }
        let x0 = mat8_vec(&m, &amp.y0);
        for i in 0..8 {
            assert!(close(x0[i], amp.x0[i], 1e-13), "component {i}");
        }
    }

    #[test]
    fn symbol_examples() {
        let p = sommerfeld_symbol([c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let p2 = mat8_mul(&p, &p);
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(close(p2[i][j], c(expect, 0.0), 1e-15));
            }
        }
        let p0 = sommerfeld_symbol(CZERO3);
        assert!(p0.iter().flatten().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn symbol_factorisation_with_k() {
        let f = make_frame([0.0, 0.6, 0.8]).unwrap();
        let k = 1.7;
        let z = make_zeta(&f, 4.0, k).unwrap();
        let p = sommerfeld_symbol(z);
        let mut pm = p;
        let mut pp = p;
        for i in 0..8 {
            pm[i][i] -= k;
            pp[i][i] += k;
        }
        let prod = mat8_mul(&pm, &pp);
        assert!(prod.iter().flatten().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn eval_at_reference_point_and_shift_law() {
        let f = make_frame([0.0, 0.0, 1.0]).unwrap();
        let medium = Medium { eps0: 4.0, mu0: 1.0, omega: 0.5 };
        let field = CgoField::new(f, 2.0, medium, 0.3).unwrap();
        let ev = field.eval([0.0, 0.7, 0.3]).unwrap();
        for i in 0..3 {
            assert!(close(ev.e[i], field.amplitudes.eta[i] / 2.0, 1e-14));
        }
        let x = [0.2, -0.1, 0.4];
        let a = field.eval(x).unwrap();
        let b = field.with_shift(0.3 + 0.25).eval(x).unwrap();
        let fac = (-2.0f64 * 0.25).exp();
        for i in 0..3 {
            assert!(close(b.e[i], a.e[i] * fac, 1e-14));
            assert!(close(b.h[i], a.h[i] * fac, 1e-14));
        }
    }

    #[test]
    fn exponent_cap_is_enforced() {
        let f = make_frame([1.0, 0.0, 0.0]).unwrap();
        let field = CgoField::new(f, 400.0, Medium::default(), 0.0).unwrap();
        assert!(matches!(field.eval([0.9, 0.0, 0.0]), Err(Error::ExponentOverflow { .. })));
        assert!(field.with_shift(1.0).eval([0.9, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn curl_matches_central_differences_at_second_order() {
        let f = make_frame([0.48, 0.6, 0.64]).unwrap();
        let medium = Medium { eps0: 2.0, mu0: 0.5, omega: 1.0 };
        let field = CgoField::new(f, 3.0, medium, 0.0).unwrap();
        let x = [0.1, -0.2, 0.3];
        let fd_curl = |h: f64| -> Cplx3 {
            let d = |i: usize, j: usize| {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                (field.eval(xp).unwrap().e[i] - field.eval(xm).unwrap().e[i]) / (2.0 * h)
            };
            [d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)]
        };
        let exact = field.eval(x).unwrap().curl_e;
        let e1 = cnorm(csub(fd_curl(1e-2), exact));
        let e2 = cnorm(csub(fd_curl(5e-3), exact));
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
        // ∇∧E₀ = iωμ₀H₀
        let ev = field.eval(x).unwrap();
        let rhs = cscale(c(0.0, medium.omega * medium.mu0), ev.h);
        assert!(cnorm(csub(ev.curl_e, rhs)) < 1e-12 * cnorm(rhs));
    }

    #[test]
    fn potentials_of_exact_cgo_vanish() {
        let f = make_frame([0.0, 0.0, 1.0]).unwrap();
        let medium = Medium::default();
        let field = CgoField::new(f, 2.0, medium, 0.0).unwrap();
        let pts = [[0.1, 0.2, 0.3], [-0.5, 0.0, 0.4], [0.0, 0.0, 0.0]];
        let ((phi, psi), _) = validate_potentials(
            |x| field.eval(x).unwrap().e,
            |x| field.eval(x).unwrap().h,
            &medium,
            &pts,
            1e-4,
        );
        assert!(phi < 1e-6 && psi < 1e-6, "{phi} {psi}");
        let ((z1, z2), _) = validate_potentials(|_| CZERO3, |_| CZERO3, &medium, &pts, 1e-3);
        assert_eq!((z1, z2), (0.0, 0.0));
    }
}
