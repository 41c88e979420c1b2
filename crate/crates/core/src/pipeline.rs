//! The four entry points: forward solve, indicator table, sweep and validation.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::cgo::{make_frame, CgoField};
use crate::config::{ForwardSource, RunConfig};
use crate::enclosure::{half_space_hull, sweep, write_support_csv, HullMetrics, Outcome, SweepEntry};
use crate::error::{Error, Result};
use crate::fem::{compute_h, l2_error, solve_mixed_field, BilinearFormSpec, FemContext, SolveStats};
use crate::impedance::Impedance;
use crate::indicator::{probe, write_indicator_csv, IndicatorValue};
use crate::medium::DomainGeometry;
use crate::mesh::build_mesh;
use crate::output::OutputDir;
use crate::source::{FieldSource, PlaneWave};
use crate::vtk::{write_fields, write_membership};

/// Work counters. Wall-clock times go to the log only, so that summaries of
/// identical runs stay byte-identical.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Counters {
    pub field_solves: usize,
    pub indicator_evaluations: usize,
    pub unknowns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Versions {
    pub emenclose: &'static str,
    pub output_format: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Versions { emenclose: env!("CARGO_PKG_VERSION"), output_format: 1 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary<M> {
    pub config: RunConfig,
    pub metrics: M,
    pub timings: Counters,
    pub versions: Versions,
}

/// What a run produced; `passed` is false only for a failed validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub passed: bool,
}

fn finish<M: Serialize>(mut out: OutputDir, config: &RunConfig, metrics: M, timings: Counters, passed: bool) -> Result<RunReport> {
    let summary = Summary { config: config.clone(), metrics, timings, versions: Versions::default() };
    out.write_json("summary.json", &summary)?;
    Ok(RunReport { files: out.written().to_vec(), passed })
}

/// FEM context on `geometry` at resolution `n` with the configured strategies.
pub fn build_context(config: &RunConfig, geometry: &DomainGeometry, n: usize) -> Result<Arc<FemContext>> {
    let mesh = Arc::new(build_mesh(geometry, n)?);
    let spec = BilinearFormSpec::new(config.medium, config.fem.s)?;
    Ok(Arc::new(FemContext::with_discretization(mesh, spec, config.fem.solver.clone(), &config.fem.discretization)?))
}

pub fn build_impedance(config: &RunConfig, geometry: &DomainGeometry, n: usize) -> Result<Impedance> {
    Impedance::new(build_context(config, geometry, n)?, config.fem.impedance.clone())
}

/// The analytic field named by `forward.*`.
pub fn forward_field(config: &RunConfig) -> Result<FieldSource> {
    Ok(match config.forward {
        ForwardSource::Zero => FieldSource::Zero,
        ForwardSource::PlaneWave { polarization, direction } => {
            FieldSource::PlaneWave(PlaneWave::new(polarization, direction)?, config.medium)
        }
        ForwardSource::Cgo { rho, tau } => {
            FieldSource::Cgo(CgoField::peak_scaled(make_frame(rho)?, tau, config.medium, &config.geometry)?)
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ForwardMetrics {
    pub discretization: String,
    pub solve: SolveStats,
    pub max_e: f64,
    pub max_h: f64,
    /// Relative L² error against the source field; only without an obstacle,
    /// where the source itself is the solution.
    pub relative_l2_error: Option<f64>,
}

/// Solves with `ν∧E = ν∧f` on ∂Ω and the homogeneous obstacle condition;
/// writes `fields.vtk` and `summary.json`.
pub fn run_forward(config: &RunConfig, out: &Path) -> Result<RunReport> {
    let mut out = OutputDir::create(out)?;
    let source = forward_field(config)?;
    let ctx = build_context(config, &config.geometry, config.mesh_n)?;
    let mesh = &ctx.mesh;
    let sol = solve_mixed_field(&ctx, &source, &FieldSource::Zero, config.geometry.kind)?;
    let h = compute_h(mesh, &sol.e, &ctx.spec)?;
    let e_nodal = sol.e.nodal_values(mesh);
    out.write_with("fields.vtk", |w| write_fields(w, mesh, &[("E", &e_nodal), ("H", &h.values)]))?;
    let relative_l2_error = if config.geometry.obstacle.is_empty() && !source.is_zero() {
        let (err, norm) = l2_error(mesh, &sol.e, &source)?;
        Some(err / norm)
    } else {
        None
    };
    let metrics = ForwardMetrics {
        discretization: ctx.discretization.name().to_string(),
        solve: sol.e.stats.clone(),
        max_e: sol.e.max_norm(),
        max_h: h.max_norm(),
        relative_l2_error,
    };
    let timings = Counters { field_solves: 1, indicator_evaluations: 0, unknowns: 3 * sol.e.values.len() };
    finish(out, config, metrics, timings, true)
}

/// One probe per `(ρ, τ)` in direction-major order.
pub fn evaluate_grid(imp: &Impedance, config: &RunConfig) -> Vec<Result<IndicatorValue>> {
    let tasks: Vec<_> = config
        .sweep
        .directions
        .iter()
        .flat_map(|&rho| config.sweep.tau_grid.iter().map(move |&tau| (rho, tau)))
        .collect();
    tasks.par_iter().map(|&(rho, tau)| probe(imp, rho, tau)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct IndicatorMetrics {
    pub discretization: String,
    pub trace: String,
    pub rows: usize,
    /// Largest relative gap between `I` and the energy expression.
    pub max_identity_mismatch: f64,
    pub max_imag_ratio: f64,
    pub noise_samples: usize,
}

/// `indicator.csv`: every direction × τ, reported at each shift of `indicator.t`.
pub fn run_indicator(config: &RunConfig, out: &Path) -> Result<RunReport> {
    let mut out = OutputDir::create(out)?;
    let imp = build_impedance(config, &config.geometry, config.mesh_n)?;
    let values = evaluate_grid(&imp, config).into_iter().collect::<Result<Vec<_>>>()?;
    let rows: Vec<IndicatorValue> =
        values.iter().flat_map(|v| config.indicator_t.iter().map(move |&t| v.at_shift(t))).collect();
    out.write_with("indicator.csv", |w| write_indicator_csv(w, &rows))?;
    let metrics = IndicatorMetrics {
        discretization: imp.ctx.discretization.name().to_string(),
        trace: config.fem.impedance.trace.clone(),
        rows: rows.len(),
        max_identity_mismatch: values.iter().map(IndicatorValue::identity_mismatch).fold(0.0, f64::max),
        max_imag_ratio: values.iter().map(IndicatorValue::imag_ratio).fold(0.0, f64::max),
        noise_samples: values.iter().filter(|v| v.is_noise(config.sweep.noise_factor)).count(),
    };
    let timings = Counters {
        field_solves: values.len(),
        indicator_evaluations: values.len(),
        unknowns: 3 * imp.mesh().num_nodes(),
    };
    finish(out, config, metrics, timings, true)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepMetrics {
    pub discretization: String,
    pub estimates: usize,
    pub no_obstacle_detected: usize,
    pub failed: usize,
    /// Every direction reported "no obstacle detected".
    pub no_obstacle: bool,
    pub max_support_error: Option<f64>,
    pub directions: Vec<SweepEntry>,
    pub hull: Option<HullMetrics>,
    /// Why no hull was built, when none was.
    pub hull_status: String,
}

/// Support estimates per direction, their half-space hull, and the
/// summary: `support.csv`, `hull.vtk` (when a hull exists), `summary.json`.
pub fn run_sweep(config: &RunConfig, out: &Path) -> Result<RunReport> {
    let mut out = OutputDir::create(out)?;
    let imp = build_impedance(config, &config.geometry, config.mesh_n)?;
    let result = sweep(&imp, &config.sweep)?;
    let metrics = sweep_metrics(&imp, &result.entries, config, &mut out)?;
    let timings = Counters {
        field_solves: result.values.len(),
        indicator_evaluations: result.values.len(),
        unknowns: 3 * imp.mesh().num_nodes(),
    };
    finish(out, config, metrics, timings, true)
}

fn sweep_metrics(imp: &Impedance, entries: &[SweepEntry], config: &RunConfig, out: &mut OutputDir) -> Result<SweepMetrics> {
    out.write_with("support.csv", |w| write_support_csv(w, entries))?;
    let count = |f: fn(&Outcome) -> bool| entries.iter().filter(|e| f(&e.outcome)).count();
    let estimates: Vec<_> = entries.iter().filter_map(|e| Some((e.rho, e.h_hat()?))).collect();
    let (hull, hull_status) = if estimates.len() < 4 {
        (None, format!("{} estimates, at least 4 needed", estimates.len()))
    } else {
        match half_space_hull(&estimates, &config.geometry, config.hull_n) {
            Ok(h) => {
                let g = &h.grid;
                out.write_with("hull.vtk", |w| write_membership(w, g.lo, g.spacing, g.dims, &g.inside))?;
                (Some(h.metrics), "ok".to_string())
            }
            Err(e @ Error::InconsistentEstimates(_)) => {
                log::warn!("{e}");
                (None, e.to_string())
            }
            Err(e) => return Err(e),
        }
    };
    let no_obstacle_detected = count(|o| matches!(o, Outcome::NoObstacleDetected));
    Ok(SweepMetrics {
        discretization: imp.ctx.discretization.name().to_string(),
        estimates: estimates.len(),
        no_obstacle_detected,
        failed: count(|o| matches!(o, Outcome::Failed { .. })),
        no_obstacle: no_obstacle_detected == entries.len(),
        max_support_error: entries.iter().filter_map(SweepEntry::error).reduce(f64::max),
        directions: entries.to_vec(),
        hull,
        hull_status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn forward_with_zero_data_writes_a_zero_field() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config("mesh.n = 8\nforward.source = \"zero\"").unwrap();
        let report = run_forward(&cfg, dir.path()).unwrap();
        assert_eq!(report.files.len(), 2);
        let vtk = std::fs::read_to_string(dir.path().join("fields.vtk")).unwrap();
        let start = vtk.find("VECTORS E_re").unwrap();
        let end = vtk.find("CELL_DATA").unwrap();
        assert!(vtk[start..end]
            .lines()
            .filter(|l| !l.starts_with("VECTORS"))
            .all(|l| l.split(' ').all(|x| x.parse::<f64>().unwrap() == 0.0)));
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["metrics"]["max_e"].as_f64(), Some(0.0));
        for key in ["config", "metrics", "timings", "versions"] {
            assert!(summary.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn empty_sweep_reports_no_obstacle_everywhere() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config("mesh.n = 8\nobstacle.shape = \"empty\"").unwrap();
        run_sweep(&cfg, dir.path()).unwrap();
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["metrics"]["no_obstacle"], serde_json::Value::Bool(true));
        assert_eq!(summary["metrics"]["no_obstacle_detected"].as_u64(), Some(14));
        assert!(!dir.path().join("hull.vtk").exists());
        let csv = std::fs::read_to_string(dir.path().join("support.csv")).unwrap();
        assert_eq!(csv.lines().filter(|l| l.ends_with(",no_obstacle_detected")).count(), 14);
    }

    #[test]
    fn indicator_rows_follow_the_shift_list() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(
            "mesh.n = 8\nsweep.directions = [[0, 0, 1]]\nsweep.tau_grid = [1, 2, 3]\nindicator.t = [0.0, 0.25]",
        )
        .unwrap();
        run_indicator(&cfg, dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("indicator.csv")).unwrap();
        let rows: Vec<Vec<f64>> =
            csv.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
        assert_eq!(rows.len(), 6);
        // I(τ, 0.25) = e^{−τ/2} I(τ, 0)
        for pair in rows.chunks(2) {
            let tau = pair[0][3];
            let expect = pair[0][5] * (-0.5 * tau).exp();
            assert!((pair[1][5] - expect).abs() <= 1e-14 * expect.abs());
        }
    }
}
