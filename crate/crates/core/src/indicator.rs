//! The indicator functional `I_ρ(τ,t)`, evaluated on ∂Ω from impedance data
//! and, independently, from volume energies of the reflected field.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgo::{make_frame, CgoField};
use crate::error::{Error, Result};
use crate::fem::{annulus_energy, BilinearFormSpec, FieldSolution, GAUSS3};
use crate::impedance::{BoundaryData, FacetField, Impedance, ImpedanceResult, Provenance};
use crate::medium::ObstacleKind;
use crate::mesh::{surface_quadrature, Mesh};
use crate::source::FieldSource;
use crate::vec3::{c, cdot_conj, cnorm_sqr, rcross, Real3};

/// Volume contributions to the domain side of the energy identity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyParts {
    pub annulus_curl: f64,
    pub annulus_mass: f64,
    pub obstacle_curl: f64,
    pub obstacle_mass: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.annulus_curl - self.annulus_mass + self.obstacle_curl - self.obstacle_mass
    }

    fn scaled(&self, s: f64) -> Self {
        EnergyParts {
            annulus_curl: self.annulus_curl * s,
            annulus_mass: self.annulus_mass * s,
            obstacle_curl: self.obstacle_curl * s,
            obstacle_mass: self.obstacle_mass * s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorValue {
    pub rho: Real3,
    pub tau: f64,
    pub t: f64,
    pub kind: ObstacleKind,
    pub i_raw: Complex64,
    /// `iω · i_raw`.
    pub i: Complex64,
    /// Energy expression; equals `I` for hard and `−I` for soft obstacles.
    pub i_domain: f64,
    pub parts: EnergyParts,
    /// `ω‖ν∧E₀‖‖ν∧H₀‖` on ∂Ω, the Cauchy–Schwarz bound on `|I|` per unit
    /// relative error of the difference trace.
    pub scale: f64,
    /// Relative residual reached by the reflected solve.
    pub solve_residual: f64,
}

impl IndicatorValue {
    /// Same value at another shift `t`: every term carries `e^{−2τt}`.
    pub fn at_shift(&self, t: f64) -> Self {
        let s = (-2.0 * self.tau * (t - self.t)).exp();
        IndicatorValue {
            t,
            i_raw: self.i_raw * s,
            i: self.i * s,
            i_domain: self.i_domain * s,
            parts: self.parts.scaled(s),
            scale: self.scale * s,
            ..*self
        }
    }

    /// `log|I(τ,t)|` without forming the (possibly overflowing) value.
    pub fn log_abs_at(&self, t: f64) -> f64 {
        self.i.norm().ln() - 2.0 * self.tau * (t - self.t)
    }

    /// `I` with the sign convention under which it equals `i_domain`.
    pub fn signed_i(&self) -> Complex64 {
        match self.kind {
            ObstacleKind::Hard => self.i,
            ObstacleKind::Soft => -self.i,
        }
    }

    /// `|signed I − I_domain| / max(|I|, |I_domain|)`.
    pub fn identity_mismatch(&self) -> f64 {
        let d = (self.signed_i() - self.i_domain).norm();
        let scale = self.i.norm().max(self.i_domain.abs());
        if scale == 0.0 {
            0.0
        } else {
            d / scale
        }
    }

    /// `|I|` is indistinguishable from zero: below `factor` times the
    /// achieved residual (at least machine precision) times [`Self::scale`].
    pub fn is_noise(&self, factor: f64) -> bool {
        self.i.norm() <= factor * self.solve_residual.max(f64::EPSILON) * self.scale
    }

    /// `|Im I| / |I|`.
    pub fn imag_ratio(&self) -> f64 {
        if self.i.norm() == 0.0 {
            0.0
        } else {
            self.i.im.abs() / self.i.norm()
        }
    }
}

/// `∫_{∂Ω} (ν∧E₀)·conj((Λ_D − Λ_∅)(ν∧E₀) ∧ ν) dS`, returned as `(I_raw, I)`.
pub fn indicator_boundary(
    mesh: &Mesh,
    cgo: &CgoField,
    lam_d: &ImpedanceResult,
    lam_0: &ImpedanceResult,
) -> Result<(Complex64, Complex64)> {
    let n = mesh.outer_facets.len();
    if lam_d.values.len() != n {
        return Err(Error::QuadratureMismatch(format!("Λ_D has {} facets, mesh has {n}", lam_d.values.len())));
    }
    pairing(mesh, cgo, &lam_d.minus(lam_0)?)
}

/// The boundary pairing for an already formed difference trace.
fn pairing(mesh: &Mesh, cgo: &CgoField, diff: &FacetField) -> Result<(Complex64, Complex64)> {
    let terms: Vec<Result<Complex64>> = mesh
        .outer_facets
        .par_iter()
        .zip(diff)
        .map(|(f, d)| {
            let mut s = Complex64::default();
            for (q, dq) in surface_quadrature(f, mesh.h).iter().zip(d) {
                let e0 = cgo.eval(q.x)?.e;
                let f_data = rcross(f.normal, e0);
                // (ν∧H̃)∧ν = −ν∧(ν∧H̃)
                let tang = rcross(f.normal, *dq).map(|v| -v);
                s += cdot_conj(f_data, tang) * q.weight;
            }
            Ok(s)
        })
        .collect();
    let mut i_raw = Complex64::default();
    for t in terms {
        i_raw += t?;
    }
    Ok((i_raw, c(0.0, cgo.medium.omega) * i_raw))
}

/// `(∫_D μ⁻¹|∇∧E₀|², ∫_D ω²ε|E₀|²)` over the obstacle cells, 3×3×3 Gauss.
pub fn obstacle_energy(cgo: &CgoField, mesh: &Mesh) -> Result<(f64, f64)> {
    let cells: Vec<usize> = mesh.obstacle_cells().collect();
    let vol = mesh.cell_volume();
    let omega = cgo.medium.omega;
    let parts: Vec<Result<(f64, f64)>> = cells
        .par_iter()
        .map(|&cell| {
            let o = mesh.cell_origin(cell);
            let (mut curl, mut mass) = (0.0, 0.0);
            for &(z, wz) in &GAUSS3 {
                for &(y, wy) in &GAUSS3 {
                    for &(x, wx) in &GAUSS3 {
                        let p = [o[0] + x * mesh.h[0], o[1] + y * mesh.h[1], o[2] + z * mesh.h[2]];
                        let w = wx * wy * wz * vol;
                        let v = cgo.eval(p)?;
                        curl += w * cnorm_sqr(v.curl_e) / cgo.medium.mu_at(p);
                        mass += w * omega * omega * cgo.medium.eps_at(p) * cnorm_sqr(v.e);
                    }
                }
            }
            Ok((curl, mass))
        })
        .collect();
    let (mut curl, mut mass) = (0.0, 0.0);
    for p in parts {
        let (a, b) = p?;
        curl += a;
        mass += b;
    }
    Ok((curl, mass))
}

/// Energy expression of the identity from the reflected field.
pub fn indicator_domain(cgo: &CgoField, reflected: &FieldSolution, mesh: &Mesh, spec: &BilinearFormSpec) -> Result<EnergyParts> {
    if mesh.geometry.obstacle.is_empty() {
        return Ok(EnergyParts::default());
    }
    let (annulus_curl, annulus_mass) = annulus_energy(mesh, reflected, spec);
    let (obstacle_curl, obstacle_mass) = obstacle_energy(cgo, mesh)?;
    Ok(EnergyParts { annulus_curl, annulus_mass, obstacle_curl, obstacle_mass })
}

/// Assembles an [`IndicatorValue`] from both evaluations.
pub fn indicator_value(
    mesh: &Mesh,
    cgo: &CgoField,
    lam_d: &ImpedanceResult,
    lam_0: &ImpedanceResult,
    reflected: &FieldSolution,
    spec: &BilinearFormSpec,
) -> Result<IndicatorValue> {
    let diff = lam_d.minus(lam_0)?;
    assemble(mesh, cgo, &diff, surface_norm(mesh, &lam_0.values), reflected, spec)
}

fn assemble(
    mesh: &Mesh,
    cgo: &CgoField,
    diff: &FacetField,
    h0_norm: f64,
    reflected: &FieldSolution,
    spec: &BilinearFormSpec,
) -> Result<IndicatorValue> {
    let (i_raw, i) = pairing(mesh, cgo, diff)?;
    let parts = indicator_domain(cgo, reflected, mesh, spec)?;
    let data = BoundaryData::from_source(mesh, FieldSource::Cgo(*cgo))?;
    let scale = cgo.medium.omega * surface_norm(mesh, &data.values) * h0_norm;
    Ok(IndicatorValue {
        rho: cgo.rho(),
        tau: cgo.tau(),
        t: cgo.t_shift,
        kind: mesh.geometry.kind,
        i_raw,
        i,
        i_domain: parts.total(),
        parts,
        scale,
        solve_residual: reflected.stats.relative_residual,
    })
}

/// `‖u‖_{L²(∂Ω)}` of outer-facet quadrature values.
pub fn surface_norm(mesh: &Mesh, values: &FacetField) -> f64 {
    let mut s = 0.0;
    for (f, qs) in mesh.outer_facets.iter().zip(values) {
        for (q, v) in surface_quadrature(f, mesh.h).iter().zip(qs) {
            s += q.weight * cnorm_sqr(*v);
        }
    }
    s.sqrt()
}

/// Full evaluation for one `(ρ, τ)`: peak-scaled CGO probe, reflected
/// solve, both impedance traces and both sides of the identity.
pub fn probe(imp: &Impedance, rho: Real3, tau: f64) -> Result<IndicatorValue> {
    let cgo = CgoField::peak_scaled(make_frame(rho)?, tau, imp.ctx.spec.medium, &imp.mesh().geometry)?;
    probe_field(imp, &cgo)
}

/// [`probe`] for a given CGO field (any shift).
pub fn probe_field(imp: &Impedance, cgo: &CgoField) -> Result<IndicatorValue> {
    let mesh = imp.mesh();
    let data = BoundaryData::from_source(mesh, FieldSource::Cgo(*cgo))?;
    let lam_0 = imp.lambda_empty(&data)?;
    let (tr, refl) = imp.reflected_trace(cgo)?;
    let h0_norm = surface_norm(mesh, &lam_0.values);
    match lam_0.provenance {
        // Λ_D = ν∧H₀ + reflected trace and Λ_∅ = ν∧H₀ exactly: pair with the
        // reflected trace rather than a cancelling difference.
        Provenance::Analytic => assemble(mesh, cgo, &tr, h0_norm, &refl.e, &imp.ctx.spec),
        Provenance::Fem => {
            let values = imp.lambda_d_from_trace(cgo, &tr)?;
            let lam_d = ImpedanceResult { values, provenance: Provenance::Fem };
            indicator_value(mesh, cgo, &lam_d, &lam_0, &refl.e, &imp.ctx.spec)
        }
    }
}

pub const INDICATOR_CSV_HEADER: &str =
    "rho_x,rho_y,rho_z,tau,t,re_I,im_I,I_domain,obstacle_curl,obstacle_mass,annulus_curl,annulus_mass";

pub fn write_indicator_csv<W: Write>(mut w: W, values: &[IndicatorValue]) -> Result<()> {
    writeln!(w, "{INDICATOR_CSV_HEADER}")?;
    for v in values {
        let cols = [
            v.rho[0],
            v.rho[1],
            v.rho[2],
            v.tau,
            v.t,
            v.i.re,
            v.i.im,
            v.i_domain,
            v.parts.obstacle_curl,
            v.parts.obstacle_mass,
            v.parts.annulus_curl,
            v.parts.annulus_mass,
        ];
        let line: Vec<String> = cols.iter().map(|x| crate::fmt17(*x)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}
