//! Direction sweeps, support-function estimates and the half-space hull.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt17;
use crate::impedance::Impedance;
use crate::indicator::{probe, IndicatorValue};
use crate::medium::{contains, support_function, DomainGeometry, ObstacleShape};
use crate::registry::Registry;
use crate::vec3::{dot, norm, Real3};

/// `n` nearly uniform unit vectors on the golden-angle spiral.
pub fn fibonacci_directions(n: usize) -> Vec<Real3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// `±e₁, ±e₂, ±e₃` followed by the eight `(±1,±1,±1)/√3`.
pub fn axis_and_diagonal_directions() -> Vec<Real3> {
    let mut dirs = Vec::with_capacity(14);
    for a in 0..3 {
        for s in [1.0, -1.0] {
            let mut d = [0.0; 3];
            d[a] = s;
            dirs.push(d);
        }
    }
    let c = 1.0 / 3f64.sqrt();
    for m in 0..8 {
        dirs.push([0, 1, 2].map(|i| if m >> i & 1 == 0 { c } else { -c }));
    }
    dirs
}

/// Directions whose supporting plane touches a box obstacle along a face.
pub fn is_flat_contact(shape: &ObstacleShape, rho: Real3) -> bool {
    matches!(shape, ObstacleShape::AxisBox { .. }) && rho.iter().filter(|v| v.abs() > 1e-12).count() == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub directions: Vec<Real3>,
    pub tau_grid: Vec<f64>,
    /// Registered estimator name.
    pub fit: String,
    /// Subtract `2 log τ` before fitting.
    pub tau_correction: bool,
    /// Support tolerance; `None` means `0.05 +` the mesh cell size.
    pub tol_h: Option<f64>,
    /// `|I|` below this many times residual × trace norms counts as zero.
    pub noise_factor: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            directions: axis_and_diagonal_directions(),
            tau_grid: vec![2.0, 4.0, 6.0, 8.0],
            fit: "slope".into(),
            tau_correction: false,
            tol_h: None,
            noise_factor: 1e3,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Config("tau_grid entries must be positive".into()));
        }
        if self.tau_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("tau_grid strictly increasing".into()));
        }
        let est = estimator_registry().create(&self.fit)?;
        if self.tau_grid.len() < est.min_samples() {
            return Err(Error::Config(format!(
                "fit '{}' needs at least {} tau values, tau_grid has {}",
                self.fit,
                est.min_samples(),
                self.tau_grid.len()
            )));
        }
        if self.directions.is_empty() {
            return Err(Error::Config("at least one sweep direction required".into()));
        }
        for d in &self.directions {
            if (norm(*d) - 1.0).abs() > 1e-10 {
                return Err(Error::Config(format!("direction {d:?} is not a unit vector")));
            }
        }
        if !(self.noise_factor > 0.0) {
            return Err(Error::Config("noise_factor must be positive".into()));
        }
        Ok(())
    }

    pub fn tolerance(&self, cell: f64) -> f64 {
        self.tol_h.unwrap_or(0.05 + cell)
    }
}

/// Fits `h` from samples `(τ, log|I(τ,0)|)`; returns `(h_hat, fit_residual)`.
pub trait SupportEstimator: Send + Sync {
    fn name(&self) -> &'static str;
    fn min_samples(&self) -> usize;
    fn estimate(&self, samples: &[(f64, f64)]) -> (f64, f64);
}

pub fn estimator_registry() -> Registry<dyn SupportEstimator> {
    Registry::new("fit")
        .register("slope", || Box::new(SlopeFit) as Box<dyn SupportEstimator>)
        .register("last-point", || Box::new(LastPoint) as Box<dyn SupportEstimator>)
}

/// Least-squares slope of `log|I|` against `2τ`; residual is the RMS misfit.
pub struct SlopeFit;

impl SupportEstimator for SlopeFit {
    fn name(&self) -> &'static str {
        "slope"
    }

    fn min_samples(&self) -> usize {
        3
    }

    fn estimate(&self, samples: &[(f64, f64)]) -> (f64, f64) {
        let n = samples.len() as f64;
        let mx = samples.iter().map(|s| 2.0 * s.0).sum::<f64>() / n;
        let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for &(t, y) in samples {
            sxy += (2.0 * t - mx) * (y - my);
            sxx += (2.0 * t - mx) * (2.0 * t - mx);
        }
        let m = sxy / sxx;
        let rss: f64 = samples.iter().map(|&(t, y)| (y - my - m * (2.0 * t - mx)).powi(2)).sum();
        (m, (rss / n).sqrt())
    }
}

/// `log|I(τ_max,0)|/(2τ_max)`; residual is the largest deviation of the
/// other per-sample ratios from it.
pub struct LastPoint;

impl SupportEstimator for LastPoint {
    fn name(&self) -> &'static str {
        "last-point"
    }

    fn min_samples(&self) -> usize {
        1
    }

    fn estimate(&self, samples: &[(f64, f64)]) -> (f64, f64) {
        let &(t, y) = samples.last().expect("at least one sample");
        let h = y / (2.0 * t);
        let spread = samples.iter().map(|&(t, y)| (y / (2.0 * t) - h).abs()).fold(0.0, f64::max);
        (h, spread)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportEstimate {
    pub rho: Real3,
    pub h_hat: f64,
    pub fit_residual: f64,
    /// `(τ, log|I(τ,0)|)` as fitted, before any correction.
    pub samples: Vec<(f64, f64)>,
}

/// Estimates `h_D(ρ)` from `(τ, log|I(τ,0)|)`; a `-∞` sample means the
/// indicator vanished and no obstacle is seen along `ρ`.
pub fn estimate_support(rho: Real3, samples: &[(f64, f64)], fit: &str, tau_correction: bool) -> Result<SupportEstimate> {
    let est = estimator_registry().create(fit)?;
    if samples.len() < est.min_samples() {
        return Err(Error::InvalidParameter(format!("fit '{fit}' needs {} samples, got {}", est.min_samples(), samples.len())));
    }
    if samples.iter().any(|s| !s.1.is_finite()) {
        return Err(Error::NoObstacleDetected(rho));
    }
    let fitted: Vec<(f64, f64)> = samples
        .iter()
        .map(|&(t, y)| (t, if tau_correction { y - 2.0 * t.ln() } else { y }))
        .collect();
    let (h_hat, fit_residual) = est.estimate(&fitted);
    Ok(SupportEstimate { rho, h_hat, fit_residual, samples: samples.to_vec() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Estimate(SupportEstimate),
    NoObstacleDetected,
    Failed { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub index: usize,
    pub rho: Real3,
    pub h_true: Option<f64>,
    pub flat_contact: bool,
    /// `tol_h`, doubled for flat-contact directions.
    pub tolerance: f64,
    pub outcome: Outcome,
}

impl SweepEntry {
    pub fn h_hat(&self) -> Option<f64> {
        match &self.outcome {
            Outcome::Estimate(e) => Some(e.h_hat),
            _ => None,
        }
    }

    pub fn error(&self) -> Option<f64> {
        Some((self.h_hat()? - self.h_true?).abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    /// Indicator values in direction-major, τ-minor order.
    pub values: Vec<Result<IndicatorValue>>,
}

impl SweepResult {
    pub fn estimates(&self) -> Vec<(Real3, f64)> {
        self.entries.iter().filter_map(|e| Some((e.rho, e.h_hat()?))).collect()
    }
}

/// One indicator evaluation per `(ρ, τ)`, run concurrently and gathered in
/// direction order; a failed direction is recorded, not fatal.
pub fn sweep(imp: &Impedance, config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let geometry = imp.mesh().geometry;
    let nt = config.tau_grid.len();
    let tasks: Vec<(Real3, f64)> = config
        .directions
        .iter()
        .flat_map(|&rho| config.tau_grid.iter().map(move |&tau| (rho, tau)))
        .collect();
    let values: Vec<Result<IndicatorValue>> = tasks.par_iter().map(|&(rho, tau)| probe(imp, rho, tau)).collect();
    let cell = imp.mesh().h.iter().fold(0.0f64, |a, &b| a.max(b));
    let tol = config.tolerance(cell);
    let entries = config
        .directions
        .iter()
        .enumerate()
        .map(|(index, &rho)| {
            let flat_contact = is_flat_contact(&geometry.obstacle, rho);
            let chunk = &values[index * nt..(index + 1) * nt];
            let outcome = direction_outcome(rho, chunk, config);
            SweepEntry {
                index,
                rho,
                h_true: support_function(&geometry.obstacle, rho).ok(),
                flat_contact,
                tolerance: if flat_contact { 2.0 * tol } else { tol },
                outcome,
            }
        })
        .collect();
    Ok(SweepResult { entries, values })
}

fn direction_outcome(rho: Real3, chunk: &[Result<IndicatorValue>], config: &SweepConfig) -> Outcome {
    let mut samples = Vec::with_capacity(chunk.len());
    for v in chunk {
        match v {
            Ok(v) if v.is_noise(config.noise_factor) => samples.push((v.tau, f64::NEG_INFINITY)),
            Ok(v) => samples.push((v.tau, v.log_abs_at(0.0))),
            Err(e) => return Outcome::Failed { message: e.to_string() },
        }
    }
    match estimate_support(rho, &samples, &config.fit, config.tau_correction) {
        Ok(e) => Outcome::Estimate(e),
        Err(Error::NoObstacleDetected(_)) => Outcome::NoObstacleDetected,
        Err(e) => Outcome::Failed { message: e.to_string() },
    }
}

pub const SUPPORT_CSV_HEADER: &str = "rho_x,rho_y,rho_z,h_hat,h_true,fit_residual,status";

/// One row per direction; missing numbers are left empty.
pub fn write_support_csv<W: Write>(mut w: W, entries: &[SweepEntry]) -> Result<()> {
    writeln!(w, "{SUPPORT_CSV_HEADER}")?;
    let opt = |x: Option<f64>| x.map(fmt17).unwrap_or_default();
    for e in entries {
        let (h, res, status) = match &e.outcome {
            Outcome::Estimate(s) => (Some(s.h_hat), Some(s.fit_residual), "ok"),
            Outcome::NoObstacleDetected => (None, None, "no_obstacle_detected"),
            Outcome::Failed { .. } => (None, None, "failed"),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{status}",
            fmt17(e.rho[0]),
            fmt17(e.rho[1]),
            fmt17(e.rho[2]),
            opt(h),
            opt(e.h_true),
            opt(res)
        )?;
    }
    Ok(())
}

/// Cell-centred sample points over the domain box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipGrid {
    pub lo: Real3,
    pub spacing: Real3,
    pub dims: [usize; 3],
    pub inside: Vec<bool>,
}

impl MembershipGrid {
    pub fn point(&self, i: usize, j: usize, k: usize) -> Real3 {
        [
            self.lo[0] + i as f64 * self.spacing[0],
            self.lo[1] + j as f64 * self.spacing[1],
            self.lo[2] + k as f64 * self.spacing[2],
        ]
    }

    fn points(&self) -> impl Iterator<Item = Real3> + '_ {
        let [nx, ny, nz] = self.dims;
        (0..nz).flat_map(move |k| (0..ny).flat_map(move |j| (0..nx).map(move |i| self.point(i, j, k))))
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.inside.iter().filter(|&&b| b).count() as f64 * self.cell_volume()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HullMetrics {
    pub directions: usize,
    pub hull_volume: f64,
    /// `max |h_hat − h_D|` over directions, when the shape is known.
    pub sup_support_error: Option<f64>,
    pub true_volume: Option<f64>,
    /// Every grid point of the true obstacle lies in the hull.
    pub contains_truth: Option<bool>,
    /// `hull_volume / true_volume − 1`.
    pub volume_excess: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullResult {
    pub half_spaces: Vec<(Real3, f64)>,
    pub grid: MembershipGrid,
    pub metrics: HullMetrics,
}

/// `{x : x·ρ ≤ h_hat(ρ) for every estimate}` sampled at the centres of an
/// `n³` grid over Ω.
pub fn half_space_hull(estimates: &[(Real3, f64)], geometry: &DomainGeometry, n: usize) -> Result<HullResult> {
    if estimates.len() < 4 {
        return Err(Error::InconsistentEstimates(format!("need at least 4 directions, got {}", estimates.len())));
    }
    let b = geometry.omega_box;
    let spacing = [0, 1, 2].map(|a| (b.hi[a] - b.lo[a]) / n as f64);
    let lo = [0, 1, 2].map(|a| b.lo[a] + 0.5 * spacing[a]);
    let mut grid = MembershipGrid { lo, spacing, dims: [n; 3], inside: Vec::new() };
    let inside: Vec<bool> = grid.points().map(|x| estimates.iter().all(|&(rho, h)| dot(x, rho) <= h)).collect();
    grid.inside = inside;
    if !grid.inside.iter().any(|&b| b) {
        return Err(Error::InconsistentEstimates("half-space intersection is empty on the grid".into()));
    }
    let hull_volume = grid.volume();
    let shape = geometry.obstacle;
    let known = !shape.is_empty();
    let sup_support_error = known.then(|| {
        estimates
            .iter()
            .map(|&(rho, h)| (h - support_function(&shape, rho).unwrap_or(h)).abs())
            .fold(0.0, f64::max)
    });
    let contains_truth =
        known.then(|| grid.points().zip(&grid.inside).all(|(x, &inside)| inside || !contains_closed(&shape, x)));
    let true_volume = known.then(|| shape.volume());
    Ok(HullResult {
        half_spaces: estimates.to_vec(),
        metrics: HullMetrics {
            directions: estimates.len(),
            hull_volume,
            sup_support_error,
            true_volume,
            contains_truth,
            volume_excess: true_volume.map(|v| hull_volume / v - 1.0),
        },
        grid,
    })
}

fn contains_closed(shape: &ObstacleShape, x: Real3) -> bool {
    match *shape {
        ObstacleShape::AxisBox { lo, hi } => (0..3).all(|a| lo[a] <= x[a] && x[a] <= hi[a]),
        _ => contains(shape, x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic(taus: &[f64], f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        taus.iter().map(|&t| (t, f(t))).collect()
    }

    #[test]
    fn exact_exponential_gives_exact_slope() {
        let s = synthetic(&[2.0, 4.0, 6.0, 8.0], |t| 2.0 * t * 0.3);
        let e = estimate_support([0.0, 0.0, 1.0], &s, "slope", false).unwrap();
        assert!((e.h_hat - 0.3).abs() < 1e-14 && e.fit_residual < 1e-14);
    }

    #[test]
    fn tau_squared_prefactor_and_correction() {
        let s = synthetic(&[4.0, 8.0, 16.0], |t| 2.0 * t.ln() + 2.0 * t * 0.3);
        let corrected = estimate_support([1.0, 0.0, 0.0], &s, "slope", true).unwrap();
        assert!((corrected.h_hat - 0.3).abs() < 1e-12);
        let raw = estimate_support([1.0, 0.0, 0.0], &s, "slope", false).unwrap();
        assert!(raw.h_hat > 0.3 && raw.h_hat <= 0.3 + 4f64.ln() / 8.0, "{}", raw.h_hat);
    }

    #[test]
    fn constant_indicator_gives_zero() {
        let s = synthetic(&[1.0, 2.0, 3.0], |_| 2f64.ln());
        assert!(estimate_support([1.0, 0.0, 0.0], &s, "slope", false).unwrap().h_hat.abs() < 1e-15);
    }

    #[test]
    fn last_point_and_vanishing_samples() {
        let s = synthetic(&[2.0, 4.0], |t| 2.0 * t * 0.25 + 1.0);
        let e = estimate_support([1.0, 0.0, 0.0], &s, "last-point", false).unwrap();
        assert!((e.h_hat - (0.25 + 1.0 / 8.0)).abs() < 1e-15);
        let zero = vec![(2.0, f64::NEG_INFINITY), (4.0, f64::NEG_INFINITY), (6.0, f64::NEG_INFINITY)];
        assert!(matches!(estimate_support([1.0, 0.0, 0.0], &zero, "slope", false), Err(Error::NoObstacleDetected(_))));
        assert!(estimate_support([1.0, 0.0, 0.0], &s, "slope", false).is_err());
        assert!(matches!(estimate_support([1.0, 0.0, 0.0], &s, "ransac", false), Err(Error::UnknownStrategy { .. })));
    }

    #[test]
    fn config_validation_names_the_invariant() {
        let c = SweepConfig { tau_grid: vec![4.0, 2.0, 6.0], ..Default::default() };
        assert!(c.validate().unwrap_err().to_string().contains("tau_grid strictly increasing"));
        let c = SweepConfig { tau_grid: vec![2.0, 4.0], ..Default::default() };
        assert!(c.validate().is_err());
        assert!(SweepConfig::default().validate().is_ok());
    }

    #[test]
    fn direction_sets() {
        let d = axis_and_diagonal_directions();
        assert_eq!(d.len(), 14);
        let boxed = DomainGeometry::default_experiment().obstacle;
        assert_eq!(d.iter().filter(|r| is_flat_contact(&boxed, **r)).count(), 6);
        let f = fibonacci_directions(50);
        assert!(f.iter().all(|r| (norm(*r) - 1.0).abs() < 1e-12));
        let mean = [0, 1, 2].map(|a| f.iter().map(|r| r[a]).sum::<f64>() / 50.0);
        assert!(norm(mean) < 0.02);
    }

    #[test]
    fn exact_box_support_recovers_the_box() {
        let g = DomainGeometry::default_experiment();
        let est: Vec<_> = axis_and_diagonal_directions()
            .into_iter()
            .take(6)
            .map(|r| (r, support_function(&g.obstacle, r).unwrap()))
            .collect();
        let hull = half_space_hull(&est, &g, 16).unwrap();
        assert_eq!(hull.metrics.contains_truth, Some(true));
        assert!(hull.metrics.volume_excess.unwrap().abs() < 1e-12);
        assert_eq!(hull.metrics.sup_support_error, Some(0.0));
    }

    #[test]
    fn ball_support_error_shrinks_with_direction_count() {
        let g = DomainGeometry::default_experiment().with_obstacle(ObstacleShape::Ball { center: [0.1, 0.0, 0.0], radius: 0.3 });
        let excess = |n: usize| {
            let est: Vec<_> = fibonacci_directions(n)
                .into_iter()
                .map(|r| (r, support_function(&g.obstacle, r).unwrap()))
                .collect();
            let hull = half_space_hull(&est, &g, 40).unwrap();
            assert_eq!(hull.metrics.contains_truth, Some(true));
            hull.metrics.volume_excess.unwrap()
        };
        let (coarse, fine) = (excess(8), excess(64));
        assert!(fine < coarse && fine < 0.2, "{coarse} {fine}");
    }

    #[test]
    fn inconsistent_estimates_are_reported() {
        let g = DomainGeometry::default_experiment();
        let est = vec![([1.0, 0.0, 0.0], -0.5), ([-1.0, 0.0, 0.0], -0.5), ([0.0, 1.0, 0.0], 0.1), ([0.0, 0.0, 1.0], 0.1)];
        assert!(matches!(half_space_hull(&est, &g, 8), Err(Error::InconsistentEstimates(_))));
    }

    proptest! {
        #[test]
        fn slope_is_shift_equivariant(h in -0.5f64..0.8, c in -3.0f64..3.0, shift in -0.3f64..0.3) {
            // I(τ,t) = e^{−2τt} I(τ,0): shifting the data shifts the slope
            let taus = [2.0, 4.0, 6.0, 8.0];
            let base = synthetic(&taus, |t| c + 2.0 * t * h + (t * 1.7).sin() * 0.1);
            let moved: Vec<_> = base.iter().map(|&(t, y)| (t, y - 2.0 * t * shift)).collect();
            let a = estimate_support([0.0, 0.0, 1.0], &base, "slope", false).unwrap();
            let b = estimate_support([0.0, 0.0, 1.0], &moved, "slope", false).unwrap();
            prop_assert!((a.h_hat - shift - b.h_hat).abs() < 1e-12);
        }

        #[test]
        fn hull_is_monotone_in_the_estimates(delta in 0.0f64..0.2) {
            let g = DomainGeometry::default_experiment();
            let est: Vec<_> = axis_and_diagonal_directions()
                .into_iter()
                .map(|r| (r, support_function(&g.obstacle, r).unwrap()))
                .collect();
            let grown: Vec<_> = est.iter().map(|&(r, h)| (r, h + delta)).collect();
            let a = half_space_hull(&est, &g, 12).unwrap();
            let b = half_space_hull(&grown, &g, 12).unwrap();
            prop_assert!(a.grid.inside.iter().zip(&b.grid.inside).all(|(x, y)| !x || *y));
        }
    }
}
