//! Analytic fields used as boundary data and as manufactured solutions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cgo::CgoField;
use crate::error::{Error, Result};
use crate::medium::Medium;
use crate::vec3::{c, cadd, ccross, complexify, cscale, dot, norm, Cplx3, Real3, CZERO3};

/// Value of an analytic field at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceEval {
    pub e: Cplx3,
    pub curl_e: Cplx3,
    pub h: Cplx3,
}

impl SourceEval {
    pub const ZERO: SourceEval = SourceEval { e: CZERO3, curl_e: CZERO3, h: CZERO3 };

    fn scaled(self, s: Complex64) -> Self {
        SourceEval { e: cscale(s, self.e), curl_e: cscale(s, self.curl_e), h: cscale(s, self.h) }
    }

    fn plus(self, o: SourceEval) -> Self {
        SourceEval { e: cadd(self.e, o.e), curl_e: cadd(self.curl_e, o.curl_e), h: cadd(self.h, o.h) }
    }
}

/// `E = p e^{ik d·x}` with `p·d = 0`, `|d| = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneWave {
    pub polarization: Real3,
    pub direction: Real3,
}

impl PlaneWave {
    pub fn new(polarization: Real3, direction: Real3) -> Result<Self> {
        let nd = norm(direction);
        if (nd - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("plane wave direction must be a unit vector (|d| = {nd})")));
        }
        if dot(polarization, direction).abs() > 1e-10 * norm(polarization).max(1.0) {
            return Err(Error::InvalidParameter("plane wave polarization must be orthogonal to direction".into()));
        }
        Ok(PlaneWave { polarization, direction })
    }

    pub fn eval(&self, medium: &Medium, x: Real3) -> SourceEval {
        let k = medium.k();
        let ph = Complex64::from_polar(1.0, k * dot(self.direction, x));
        let e = cscale(ph, complexify(self.polarization));
        let curl_e = cscale(c(0.0, k), ccross(complexify(self.direction), e));
        let h = cscale(c(0.0, -1.0 / (medium.omega * medium.mu0)), curl_e);
        SourceEval { e, curl_e, h }
    }
}

/// Closed-form solution of the constant-background Maxwell system.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSource {
    Zero,
    Cgo(CgoField),
    PlaneWave(PlaneWave, Medium),
    Combination(Vec<(Complex64, FieldSource)>),
}

impl FieldSource {
    pub fn eval(&self, x: Real3) -> Result<SourceEval> {
        match self {
            FieldSource::Zero => Ok(SourceEval::ZERO),
            FieldSource::Cgo(f) => {
                let v = f.eval(x)?;
                Ok(SourceEval { e: v.e, curl_e: v.curl_e, h: v.h })
            }
            FieldSource::PlaneWave(p, m) => Ok(p.eval(m, x)),
            FieldSource::Combination(terms) => {
                let mut acc = SourceEval::ZERO;
                for (s, f) in terms {
                    acc = acc.plus(f.eval(x)?.scaled(*s));
                }
                Ok(acc)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            FieldSource::Zero => true,
            FieldSource::Combination(t) => t.iter().all(|(s, f)| *s == c(0.0, 0.0) || f.is_zero()),
            _ => false,
        }
    }

    pub fn scaled(&self, s: Complex64) -> FieldSource {
        FieldSource::Combination(vec![(s, self.clone())])
    }

    pub fn negated(&self) -> FieldSource {
        self.scaled(c(-1.0, 0.0))
    }

    pub fn as_cgo(&self) -> Option<&CgoField> {
        match self {
            FieldSource::Cgo(f) => Some(f),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgo::make_frame;
    use crate::vec3::{cnorm, csub};

    #[test]
    fn plane_wave_satisfies_maxwell() {
        let m = Medium::new(1.5, 0.8, 1.2).unwrap();
        let pw = PlaneWave::new([0.0, 1.0, 0.0], [0.6, 0.0, 0.8]).unwrap();
        let x = [0.1, -0.3, 0.2];
        let v = pw.eval(&m, x);
        let step = 1e-4;
        let mut curl = CZERO3;
        let d = |i: usize, j: usize| {
            let mut xp = x;
            let mut xm = x;
            xp[i] += step;
            xm[i] -= step;
            (pw.eval(&m, xp).e[j] - pw.eval(&m, xm).e[j]) / (2.0 * step)
        };
        curl[0] = d(1, 2) - d(2, 1);
        curl[1] = d(2, 0) - d(0, 2);
        curl[2] = d(0, 1) - d(1, 0);
        assert!(cnorm(csub(curl, v.curl_e)) < 1e-7);
        // ∇∧E = iωμH
        let r = csub(v.curl_e, cscale(c(0.0, m.omega * m.mu0), v.h));
        assert!(cnorm(r) < 1e-14);
    }

    #[test]
    fn rejects_longitudinal_polarization() {
        assert!(PlaneWave::new([1.0, 0.0, 0.0], [1.0, 0.0, 0.0]).is_err());
        assert!(PlaneWave::new([0.0, 1.0, 0.0], [2.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn combination_is_linear() {
        let m = Medium::default();
        let f = CgoField::new(make_frame([0.0, 0.0, 1.0]).unwrap(), 2.0, m, 1.0).unwrap();
        let a = FieldSource::Cgo(f);
        let comb = FieldSource::Combination(vec![(c(2.0, 1.0), a.clone()), (c(-1.0, 0.0), a.clone())]);
        let x = [0.2, 0.1, -0.4];
        let va = a.eval(x).unwrap();
        let vc = comb.eval(x).unwrap();
        assert!(cnorm(csub(vc.e, cscale(c(1.0, 1.0), va.e))) < 1e-14);
        assert!(FieldSource::Zero.is_zero());
        assert!(!a.negated().is_zero());
    }
}
