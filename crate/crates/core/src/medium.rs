//! Background medium, domain box and obstacle shapes.
//!
//! The shipped experiments use a constant background, but coefficients are
//! sampled per cell through [`Medium::eps_at`] / [`Medium::mu_at`] so a
//! variable profile only needs a different sampler.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::{dot, Real3};

/// Non-dissipative isotropic background (σ = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    pub eps0: f64,
    pub mu0: f64,
    pub omega: f64,
}

impl Medium {
    pub fn new(eps0: f64, mu0: f64, omega: f64) -> Result<Self> {
        for (name, v) in [("eps0", eps0), ("mu0", mu0), ("omega", omega)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Medium { eps0, mu0, omega })
    }

    /// Conductivity; the non-dissipative case is the only one supported.
    pub fn sigma(&self) -> f64 {
        0.0
    }

    pub fn k(&self) -> f64 {
        self.omega * (self.eps0 * self.mu0).sqrt()
    }

    pub fn eps_at(&self, _x: Real3) -> f64 {
        self.eps0
    }

    pub fn mu_at(&self, _x: Real3) -> f64 {
        self.mu0
    }
}

impl Default for Medium {
    fn default() -> Self {
        Medium { eps0: 1.0, mu0: 1.0, omega: 1.0 }
    }
}

/// `k = ω·sqrt(ε₀μ₀)`.
pub fn wavenumber(medium: &Medium) -> Result<f64> {
    Medium::new(medium.eps0, medium.mu0, medium.omega).map(|m| m.k())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Real3,
    pub hi: Real3,
}

impl AxisBox {
    pub fn new(lo: Real3, hi: Real3) -> Result<Self> {
        if (0..3).any(|i| !(lo[i] < hi[i])) {
            return Err(Error::InvalidParameter(format!(
                "box requires lo < hi componentwise, got lo={lo:?} hi={hi:?}"
            )));
        }
        Ok(AxisBox { lo, hi })
    }

    pub fn cube(half: f64) -> Self {
        AxisBox { lo: [-half; 3], hi: [half; 3] }
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|i| self.hi[i] - self.lo[i]).product()
    }

    pub fn half_diagonal(&self) -> f64 {
        0.5 * (0..3).map(|i| (self.hi[i] - self.lo[i]).powi(2)).sum::<f64>().sqrt()
    }

    pub fn support(&self, rho: Real3) -> f64 {
        (0..3)
            .map(|i| if rho[i] >= 0.0 { self.hi[i] * rho[i] } else { self.lo[i] * rho[i] })
            .sum()
    }

    pub fn contains_open(&self, x: Real3) -> bool {
        (0..3).all(|i| self.lo[i] < x[i] && x[i] < self.hi[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ObstacleShape {
    Empty,
    AxisBox { lo: Real3, hi: Real3 },
    Ball { center: Real3, radius: f64 },
}

impl ObstacleShape {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ObstacleShape::Empty => Ok(()),
            ObstacleShape::AxisBox { lo, hi } => AxisBox::new(lo, hi).map(|_| ()),
            ObstacleShape::Ball { radius, .. } => {
                if radius > 0.0 && radius.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("ball radius must be positive, got {radius}")))
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, ObstacleShape::Empty)
    }

    /// Axis-aligned bounding box of the closed shape.
    pub fn bounds(&self) -> Option<AxisBox> {
        match *self {
            ObstacleShape::Empty => None,
            ObstacleShape::AxisBox { lo, hi } => Some(AxisBox { lo, hi }),
            ObstacleShape::Ball { center, radius } => Some(AxisBox {
                lo: [center[0] - radius, center[1] - radius, center[2] - radius],
                hi: [center[0] + radius, center[1] + radius, center[2] + radius],
            }),
        }
    }

    pub fn translated(&self, by: Real3) -> ObstacleShape {
        let sh = |p: Real3| [p[0] + by[0], p[1] + by[1], p[2] + by[2]];
        match *self {
            ObstacleShape::Empty => ObstacleShape::Empty,
            ObstacleShape::AxisBox { lo, hi } => ObstacleShape::AxisBox { lo: sh(lo), hi: sh(hi) },
            ObstacleShape::Ball { center, radius } => ObstacleShape::Ball { center: sh(center), radius },
        }
    }

    /// True volume of the shape.
    pub fn volume(&self) -> f64 {
        match *self {
            ObstacleShape::Empty => 0.0,
            ObstacleShape::AxisBox { lo, hi } => AxisBox { lo, hi }.volume(),
            ObstacleShape::Ball { radius, .. } => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
        }
    }
}

/// `h_D(ρ) = sup_{x∈D} x·ρ`.
pub fn support_function(shape: &ObstacleShape, rho: Real3) -> Result<f64> {
    check_unit(rho)?;
    match *shape {
        ObstacleShape::Empty => Err(Error::NoObstacle("support function of an empty shape".into())),
        ObstacleShape::AxisBox { lo, hi } => Ok(AxisBox { lo, hi }.support(rho)),
        ObstacleShape::Ball { center, radius } => Ok(dot(center, rho) + radius),
    }
}

/// Membership in the open shape.
pub fn contains(shape: &ObstacleShape, x: Real3) -> bool {
    match *shape {
        ObstacleShape::Empty => false,
        ObstacleShape::AxisBox { lo, hi } => AxisBox { lo, hi }.contains_open(x),
        ObstacleShape::Ball { center, radius } => {
            let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
            dot(d, d) < radius * radius
        }
    }
}

pub(crate) fn check_unit(rho: Real3) -> Result<()> {
    let n = dot(rho, rho).sqrt();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("direction must be a unit vector, |rho| = {n}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    /// Magnetic-hard: `ν ∧ H = 0` on ∂D.
    Hard,
    /// Magnetic-soft: `ν ∧ E = 0` on ∂D.
    Soft,
}

impl std::fmt::Display for ObstacleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ObstacleKind::Hard => "hard",
            ObstacleKind::Soft => "soft",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainGeometry {
    pub omega_box: AxisBox,
    pub obstacle: ObstacleShape,
    pub kind: ObstacleKind,
}

impl DomainGeometry {
    pub fn new(omega_box: AxisBox, obstacle: ObstacleShape, kind: ObstacleKind) -> Result<Self> {
        AxisBox::new(omega_box.lo, omega_box.hi)?;
        obstacle.validate()?;
        Ok(DomainGeometry { omega_box, obstacle, kind })
    }

    /// `[-1,1]³` with the hard box obstacle `[-0.25,0.25]³`.
    pub fn default_experiment() -> Self {
        DomainGeometry {
            omega_box: AxisBox::cube(1.0),
            obstacle: ObstacleShape::AxisBox { lo: [-0.25; 3], hi: [0.25; 3] },
            kind: ObstacleKind::Hard,
        }
    }

    pub fn with_obstacle(&self, obstacle: ObstacleShape) -> Self {
        DomainGeometry { obstacle, ..*self }
    }

    pub fn with_kind(&self, kind: ObstacleKind) -> Self {
        DomainGeometry { kind, ..*self }
    }

    /// `sup_{x∈Ω} x·ρ`, used to recentre CGO fields.
    pub fn omega_support(&self, rho: Real3) -> f64 {
        self.omega_box.support(rho)
    }

    /// Smallest distance between the obstacle's bounding box and ∂Ω.
    pub fn obstacle_margin(&self) -> Option<f64> {
        self.obstacle.bounds().map(|b| {
            (0..3)
                .map(|i| (b.lo[i] - self.omega_box.lo[i]).min(self.omega_box.hi[i] - b.hi[i]))
                .fold(f64::INFINITY, f64::min)
        })
    }

    /// Checks that the obstacle sits at least `cells` mesh cells inside Ω.
    pub fn check_margin(&self, n: usize, cells: f64) -> Result<()> {
        if let Some(margin) = self.obstacle_margin() {
            let h = (0..3)
                .map(|i| (self.omega_box.hi[i] - self.omega_box.lo[i]) / n as f64)
                .fold(0.0, f64::max);
            if margin < cells * h {
                return Err(Error::Mesh(format!(
                    "obstacle margin invariant violated: obstacle must stay {cells} cells \
                     (= {:.4}) inside the domain, margin is {margin:.4}",
                    cells * h
                )));
            }
        }
        Ok(())
    }
}
