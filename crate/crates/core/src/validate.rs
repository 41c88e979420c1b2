//! The validation suite behind `validate`: ten criteria, each a list of
//! named checks with the value found and the bound it was held to.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cgo::{make_amplitudes, make_frame, make_frame_with, mat8_mul, mat8_vec, sommerfeld_symbol, CgoField};
use crate::config::{RunConfig, MARGIN_CELLS};
use crate::enclosure::{axis_and_diagonal_directions, half_space_hull, sweep, write_support_csv, Outcome, SweepConfig};
use crate::error::{Error, Result};
use crate::fem::{l2_error, solve_mixed_field};
use crate::fmt17;
use crate::impedance::Impedance;
use crate::indicator::{obstacle_energy, probe, probe_field, write_indicator_csv, IndicatorValue};
use crate::medium::{support_function, DomainGeometry, ObstacleKind, ObstacleShape};
use crate::output::OutputDir;
use crate::pipeline::{build_context, build_impedance, Counters, RunReport, Summary, Versions};
use crate::source::{FieldSource, PlaneWave};
use crate::vec3::{c, ccross, cdot, cnorm, complexify, cross, csub, normalize, rscale, Real3};

const E3: Real3 = [0.0, 0.0, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable bound, e.g. `<= 0.05` or `in [3, 5]`.
    pub bound: String,
    pub passed: bool,
}

/// Short form of a limit: `0.05`, `1e-12`.
fn num(x: f64) -> String {
    if x != 0.0 && !(1e-3..1e4).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn le(name: impl Into<String>, value: f64, limit: f64) -> Check {
    Check { name: name.into(), value, bound: format!("<= {}", num(limit)), passed: value <= limit }
}

fn ge(name: impl Into<String>, value: f64, limit: f64) -> Check {
    Check { name: name.into(), value, bound: format!(">= {}", num(limit)), passed: value >= limit }
}

fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Check {
    Check { name: name.into(), value, bound: format!("in [{}; {}]", num(lo), num(hi)), passed: lo <= value && value <= hi }
}

fn holds(name: impl Into<String>, ok: bool) -> Check {
    Check { name: name.into(), value: f64::from(u8::from(ok)), bound: "== 1".into(), passed: ok }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub id: u32,
    pub title: &'static str,
    pub checks: Vec<Check>,
    /// Set when the criterion could not be evaluated at all.
    pub error: Option<String>,
}

impl Criterion {
    fn new(id: u32, title: &'static str, checks: Result<Vec<Check>>) -> Self {
        match checks {
            Ok(checks) => Criterion { id, title, checks, error: None },
            Err(e) => Criterion { id, title, checks: Vec::new(), error: Some(e.to_string()) },
        }
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "criterion {:>2} {status} {}", self.id, self.title)?;
        if let Some(e) = &self.error {
            write!(f, " (error: {e})")?;
        }
        for c in self.failed_checks() {
            write!(f, " [{}: {:.6e} not {}]", c.name, c.value, c.bound)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub criteria: Vec<Criterion>,
    pub passed: bool,
}

pub const VALIDATION_CSV_HEADER: &str = "criterion,check,value,bound,passed";

pub fn write_validation_csv<W: Write>(mut w: W, criteria: &[Criterion]) -> Result<()> {
    writeln!(w, "{VALIDATION_CSV_HEADER}")?;
    for cr in criteria {
        if let Some(e) = &cr.error {
            writeln!(w, "{},error,,{},false", cr.id, quote(e))?;
        }
        for ch in &cr.checks {
            writeln!(w, "{},{},{},{},{}", cr.id, quote(&ch.name), fmt17(ch.value), quote(&ch.bound), ch.passed)?;
        }
    }
    Ok(())
}

fn quote(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Relative deviation scaled by the size of the operands.
fn rel(d: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        d
    } else {
        d / scale
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Real3 {
    loop {
        let v = [0, 1, 2].map(|_| rng.gen_range(-1.0..1.0));
        let n = crate::vec3::norm(v);
        if n > 0.1 && n <= 1.0 {
            return normalize(v).unwrap();
        }
    }
}

/// Algebraic identities of `ζ`, `(η, θ)` and the symbol `P(ζ)` over random
/// frames and `τ ∈ [0.5, 1000]`. Residuals are relative to the size of the
/// operands (`|ζ|²`, `|ζ||η|`, ...): at `τ = 1000` the entries of `ζ` are
/// `O(10³)` and `ζ·ζ = k²` can only hold to `ε|ζ|²`.
pub fn cgo_algebra(k: f64, frames: usize, seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 5];
    for _ in 0..frames {
        let rho = random_unit(&mut rng);
        let perp = loop {
            let v = random_unit(&mut rng);
            if let Some(p) = normalize(cross(rho, v)) {
                break p;
            }
        };
        let frame = make_frame_with(rho, perp)?;
        let tau = 0.5 * 2000f64.powf(rng.gen::<f64>());
        let amp = make_amplitudes(&frame, tau, k)?;
        let zeta = amp.zeta;
        let zn = cnorm(zeta);
        let zz = cdot(zeta, zeta);
        let eta_n = cnorm(amp.eta);
        let kth = amp.theta.map(|v| v * k);
        let p = sommerfeld_symbol(zeta);
        let mut pk = p;
        for (i, row) in pk.iter_mut().enumerate() {
            row[i] -= k;
        }
        let v = mat8_vec(&pk, &amp.y0);
        let y0n = amp.y0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let p2 = mat8_mul(&p, &p);
        let mut sq = 0.0f64;
        for (i, row) in p2.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                let expect = if i == j { zz } else { c(0.0, 0.0) };
                sq = sq.max((x - expect).norm());
            }
        }
        let r = [
            rel((zz - k * k).norm(), zn * zn),
            rel(cnorm(csub(ccross(zeta, amp.eta), kth)), zn * eta_n),
            rel(cdot(zeta, amp.eta).norm(), zn * eta_n),
            rel(v[0].norm().max(v[7].norm()), zn * y0n),
            rel(sq, zn * zn),
        ];
        for (w, x) in worst.iter_mut().zip(r) {
            *w = w.max(x);
        }
    }
    let names = ["zeta.zeta = k^2", "zeta^eta = k theta", "zeta.eta = 0", "(P - k) y0 ends vanish", "P^2 = (zeta.zeta) Id"];
    Ok(names.iter().zip(worst).map(|(n, w)| le(*n, w, 1e-12)).collect())
}

/// `|η(τ) − ikρ∧ρ⊥|` halves and `|θ|/τ` settles as `τ` doubles.
pub fn amplitude_asymptotics(k: f64) -> Result<Vec<Check>> {
    let taus = [64.0, 128.0, 256.0];
    let mut checks = Vec::new();
    for (label, rho) in [("axis", E3), ("diagonal", [1.0 / 3f64.sqrt(); 3])] {
        let frame = make_frame(rho)?;
        let limit = rscale(k, complexify(cross(frame.rho, frame.rho_perp))).map(|v| v * c(0.0, 1.0));
        let mut dev = Vec::new();
        let mut th = Vec::new();
        for tau in taus {
            let amp = make_amplitudes(&frame, tau, k)?;
            dev.push(cnorm(csub(amp.eta, limit)));
            th.push(cnorm(amp.theta) / tau);
        }
        for i in 0..2 {
            checks.push(within(format!("{label} eta deviation ratio {}->{}", taus[i], taus[i + 1]), dev[i] / dev[i + 1], 1.8, 2.2));
        }
        let (lo, hi) = th.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        checks.push(le(format!("{label} |theta|/tau spread"), hi / lo - 1.0, 0.05));
    }
    Ok(checks)
}

/// Observed `L²` orders for plane-wave and CGO data without obstacle, and
/// the zero solution for zero data.
pub fn forward_convergence(config: &RunConfig) -> Result<Vec<Check>> {
    let empty = config.geometry.with_obstacle(ObstacleShape::Empty);
    let sources = [
        ("plane-wave", FieldSource::PlaneWave(PlaneWave::new([1.0, 0.0, 0.0], E3)?, config.medium)),
        ("cgo", FieldSource::Cgo(CgoField::peak_scaled(make_frame(E3)?, 2.0, config.medium, &empty)?)),
    ];
    let ns = [8, 16, 32];
    let mut errors = vec![Vec::new(); sources.len()];
    for n in ns {
        let ctx = build_context(config, &empty, n)?;
        for (errs, (_, f)) in errors.iter_mut().zip(&sources) {
            let sol = solve_mixed_field(&ctx, f, &FieldSource::Zero, ObstacleKind::Hard)?;
            let (e, norm) = l2_error(&ctx.mesh, &sol.e, f)?;
            errs.push(e / norm);
        }
    }
    let mut checks = Vec::new();
    for ((label, _), errs) in sources.iter().zip(&errors) {
        for i in 0..ns.len() - 1 {
            checks.push(ge(format!("{label} order n={}->{}", ns[i], ns[i + 1]), (errs[i] / errs[i + 1]).log2(), 1.8));
        }
    }
    let n0 = coarse_n(&config.geometry, config.mesh_n);
    for geometry in [empty, config.geometry.with_kind(ObstacleKind::Hard), config.geometry.with_kind(ObstacleKind::Soft)] {
        let ctx = build_context(config, &geometry, n0)?;
        let sol = solve_mixed_field(&ctx, &FieldSource::Zero, &FieldSource::Zero, geometry.kind)?;
        let label = if geometry.obstacle.is_empty() { "empty".to_string() } else { geometry.kind.to_string() };
        checks.push(le(format!("zero data max|E| ({label})"), sol.e.max_norm(), 1e-10));
    }
    Ok(checks)
}

/// Smallest of 8, 16 or `n` that keeps the obstacle margin.
fn coarse_n(geometry: &DomainGeometry, n: usize) -> usize {
    [8, 16].into_iter().find(|&m| m <= n && geometry.check_margin(m, MARGIN_CELLS).is_ok()).unwrap_or(n)
}

fn obstacle_support(geometry: &DomainGeometry, rho: Real3) -> Result<f64> {
    if geometry.obstacle.is_empty() {
        return Err(Error::InvalidParameter("criterion needs an obstacle".into()));
    }
    support_function(&geometry.obstacle, rho)
}

fn tau_series(imp: &Impedance, rho: Real3, taus: &[f64]) -> Result<Vec<IndicatorValue>> {
    let v: Vec<Result<IndicatorValue>> = taus.par_iter().map(|&tau| probe(imp, rho, tau)).collect();
    v.into_iter().collect()
}

fn identity_checks(label: &str, fine: &[IndicatorValue], coarse: Option<&[IndicatorValue]>) -> Vec<Check> {
    let mut checks = Vec::new();
    for (i, v) in fine.iter().enumerate() {
        let tau = v.tau;
        checks.push(le(format!("{label} tau={tau} identity mismatch"), v.identity_mismatch(), 0.05));
        checks.push(le(format!("{label} tau={tau} |Im I|/|I|"), v.imag_ratio(), 0.05));
        if let Some(coarse) = coarse {
            let (mc, mf) = (coarse[i].identity_mismatch(), v.identity_mismatch());
            checks.push(Check {
                name: format!("{label} tau={tau} mismatch coarse/fine"),
                value: mc / mf,
                bound: "> 1".into(),
                passed: mf < mc,
            });
        }
    }
    checks
}

/// Trends of `|I(τ,t)|` on both sides of `h_D(e₃)` and the last-point
/// estimate at `τ_max`.
fn limit_checks(values: &[IndicatorValue], h: f64) -> Vec<Check> {
    let mut checks = Vec::new();
    let ta = h + 0.2;
    let tb = h - 0.2;
    let la: Vec<f64> = values.iter().map(|v| v.log_abs_at(ta)).collect();
    let lb: Vec<f64> = values.iter().map(|v| v.log_abs_at(tb)).collect();
    let worst_dec = la.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let worst_inc = lb.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    checks.push(Check {
        name: format!("max step of log|I(tau,{ta:.2})| (strictly decreasing)"),
        value: worst_dec,
        bound: "< 0".into(),
        passed: worst_dec < 0.0,
    });
    checks.push(Check {
        name: format!("min step of log|I(tau,{tb:.2})| (strictly increasing)"),
        value: worst_inc,
        bound: "> 0".into(),
        passed: worst_inc > 0.0,
    });
    let last = values.last().expect("non-empty tau grid");
    let est = last.log_abs_at(0.0) / (2.0 * last.tau);
    checks.push(le(format!("|log|I({},0)|/(2 tau) - h_D|", last.tau), (est - h).abs(), 0.1));
    checks
}

/// Obstacle energies of the CGO field at `t = h_D(e₃)`.
pub fn energy_scalings(config: &RunConfig, geometry: &DomainGeometry, mesh: &crate::mesh::Mesh) -> Result<Vec<Check>> {
    let h = obstacle_support(geometry, E3)?;
    let frame = make_frame(E3)?;
    let taus = [4.0, 8.0, 16.0];
    let mut curl = Vec::new();
    let mut ratio = Vec::new();
    for tau in taus {
        let (cu, ma) = obstacle_energy(&CgoField::new(frame, tau, config.medium, h)?, mesh)?;
        curl.push(cu);
        ratio.push(ma / cu);
    }
    let mut checks = Vec::new();
    for i in 0..2 {
        checks.push(ge(format!("curl term ratio tau {}->{}", taus[i], taus[i + 1]), curl[i + 1] / curl[i], 1.0));
        checks.push(within(format!("(mass/curl) drop tau {}->{}", taus[i], taus[i + 1]), ratio[i] / ratio[i + 1], 3.0, 5.0));
    }
    Ok(checks)
}

/// Direct solves at shifted `t` against the shift law.
fn shift_checks(imp: &Impedance, config: &RunConfig) -> Result<Vec<Check>> {
    let medium = config.medium;
    let taus = [config.sweep.tau_grid[0], *config.sweep.tau_grid.last().unwrap()];
    let mut worst = 0.0f64;
    for rho in [E3, [1.0 / 3f64.sqrt(); 3]] {
        let h = obstacle_support(&imp.mesh().geometry, rho)?;
        for tau in taus {
            let base = probe(imp, rho, tau)?;
            for t in [0.0, h, h + 0.2] {
                let direct = probe_field(imp, &CgoField::new(make_frame(rho)?, tau, medium, t)?)?;
                let shifted = base.at_shift(t);
                worst = worst.max(rel((direct.i - shifted.i).norm(), direct.i.norm()));
            }
        }
    }
    Ok(vec![le("max relative gap of direct vs shifted I", worst, 1e-12)])
}

struct SweepChecks {
    checks: Vec<Check>,
    entries: Vec<crate::enclosure::SweepEntry>,
    values: Vec<IndicatorValue>,
}

fn sweep_checks(imp: &Impedance, config: &RunConfig) -> Result<SweepChecks> {
    let sc = SweepConfig { directions: axis_and_diagonal_directions(), ..config.sweep.clone() };
    let result = sweep(imp, &sc)?;
    let mut checks = Vec::new();
    for e in &result.entries {
        let name = format!("direction {} |h_hat - h_D|", e.index);
        match &e.outcome {
            Outcome::Estimate(_) => checks.push(le(name, e.error().unwrap_or(f64::INFINITY), 0.1)),
            _ => checks.push(holds(format!("direction {} produced an estimate", e.index), false)),
        }
    }
    match half_space_hull(&result.estimates(), &imp.mesh().geometry, config.hull_n) {
        Ok(hull) => {
            let m = hull.metrics;
            checks.push(holds("hull contains the true obstacle", m.contains_truth == Some(true)));
            checks.push(le("hull volume excess", m.volume_excess.unwrap_or(f64::INFINITY), 0.6));
        }
        Err(e) => checks.push(holds(format!("hull built ({e})"), false)),
    }
    let values = result.values.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SweepChecks { checks, entries: result.entries, values })
}

fn empty_sweep_checks(config: &RunConfig) -> Result<Vec<Check>> {
    let empty = config.geometry.with_obstacle(ObstacleShape::Empty);
    let imp = build_impedance(config, &empty, config.mesh_n)?;
    let sc = SweepConfig { directions: axis_and_diagonal_directions(), ..config.sweep.clone() };
    let result = sweep(&imp, &sc)?;
    let n = result.entries.iter().filter(|e| e.outcome == Outcome::NoObstacleDetected).count();
    Ok(vec![holds(format!("empty obstacle: {n}/{} directions report no obstacle", result.entries.len()), n == result.entries.len())])
}

/// Runs a reduced sweep twice, and once with the direction order reversed,
/// on a coarse mesh; outputs must agree byte for byte.
pub fn determinism(config: &RunConfig) -> Result<Vec<Check>> {
    let geometry = config.geometry.with_kind(ObstacleKind::Hard);
    let n = coarse_n(&geometry, config.mesh_n);
    let directions = axis_and_diagonal_directions();
    let run = |dirs: Vec<Real3>| -> Result<(Vec<u8>, Vec<crate::enclosure::SweepEntry>)> {
        let imp = build_impedance(config, &geometry, n)?;
        let sc = SweepConfig { directions: dirs, ..config.sweep.clone() };
        let result = sweep(&imp, &sc)?;
        let values = result.values.iter().cloned().collect::<Result<Vec<_>>>()?;
        let mut bytes = Vec::new();
        write_support_csv(&mut bytes, &result.entries)?;
        write_indicator_csv(&mut bytes, &values)?;
        bytes.extend(crate::output::to_json(&result.entries)?.into_bytes());
        Ok((bytes, result.entries))
    };
    let (a, ea) = run(directions.clone())?;
    let (b, _) = run(directions.clone())?;
    let (_, er) = run(directions.iter().rev().copied().collect())?;
    let permuted = ea.iter().zip(er.iter().rev()).all(|(x, y)| x.outcome == y.outcome);
    Ok(vec![
        holds(format!("repeat run byte-identical ({} bytes, n={n})", a.len()), a == b),
        holds("reversed direction order permutes the estimates", permuted),
    ])
}

/// Runs every criterion, writes `validation.csv`, `support.csv`,
/// `indicator.csv` and `summary.json`; the report passes if every check does.
pub fn run_validate(config: &RunConfig, out: &Path) -> Result<(RunReport, ValidationReport)> {
    let mut dir = OutputDir::create(out)?;
    let k = config.medium.k();
    let mut criteria = Vec::new();
    let mut counters = Counters::default();
    let time = std::time::Instant::now();
    let note = |what: &str| log::info!("validate: {what} done after {:.1} s", time.elapsed().as_secs_f64());

    criteria.push(Criterion::new(1, "CGO algebra", cgo_algebra(k, 100, 1)));
    criteria.push(Criterion::new(2, "amplitude asymptotics", amplitude_asymptotics(k)));
    note("criteria 1-2");
    criteria.push(Criterion::new(3, "forward solver convergence", forward_convergence(config)));
    counters.field_solves += 6 + 3;
    note("criterion 3");

    let hard = config.geometry.with_kind(ObstacleKind::Hard);
    let soft = config.geometry.with_kind(ObstacleKind::Soft);
    let taus_id = [2.0, 4.0];
    let mut indicator_rows = Vec::new();
    let mut hard_tau4 = None;
    {
        let n = config.mesh_n;
        let fine = build_impedance(config, &hard, n);
        let coarse = build_impedance(config, &hard, n / 2);
        let (c4, c6, c8, c9) = match (fine, coarse) {
            (Ok(fine), Ok(coarse)) => {
                counters.unknowns = 3 * fine.mesh().num_nodes();
                let fine_id = tau_series(&fine, E3, &taus_id);
                let coarse_id = tau_series(&coarse, E3, &taus_id);
                drop(coarse);
                let c4 = fine_id.and_then(|f| {
                    let cs = coarse_id?;
                    hard_tau4 = Some(f[1]);
                    Ok(identity_checks("hard", &f, Some(&cs)))
                });
                note("criterion 4");
                let series = tau_series(&fine, E3, &config.sweep.tau_grid);
                let c6 = series.clone().and_then(|s| Ok(limit_checks(&s, obstacle_support(&hard, E3)?)));
                if let Ok(s) = &series {
                    indicator_rows.extend(s.iter().copied());
                }
                note("criterion 6");
                let c8 = sweep_checks(&fine, config).map(|sc| {
                    counters.indicator_evaluations += sc.values.len();
                    (sc.checks, sc.entries)
                });
                note("criterion 8 (sweep)");
                let c9 = shift_checks(&fine, config);
                note("criterion 9");
                (c4, c6, c8, c9)
            }
            (Err(e), _) | (_, Err(e)) => (Err(e.clone()), Err(e.clone()), Err(e.clone()), Err(e)),
        };
        counters.indicator_evaluations += 4 + 2 * config.sweep.tau_grid.len() + 12;
        criteria.push(Criterion::new(4, "energy identity (hard)", c4));
        criteria.push(Criterion::new(6, "indicator limits along e3", c6));
        let c8 = c8.and_then(|(mut checks, entries)| {
            dir.write_with("support.csv", |w| write_support_csv(w, &entries))?;
            checks.extend(empty_sweep_checks(config)?);
            Ok(checks)
        });
        note("criterion 8 (empty)");
        criteria.push(Criterion::new(8, "end-to-end sweep", c8));
        criteria.push(Criterion::new(9, "t-shift exactness", c9));
    }

    let c5 = build_impedance(config, &soft, config.mesh_n).and_then(|imp| {
        let s = tau_series(&imp, E3, &taus_id)?;
        indicator_rows.extend(s.iter().copied());
        let mut checks = identity_checks("soft", &s, None);
        let hard4 = hard_tau4.ok_or_else(|| Error::Solver("hard tau=4 value unavailable".into()))?;
        checks.push(Check { name: "hard Re I(4,0)".into(), value: hard4.i.re, bound: "> 0".into(), passed: hard4.i.re > 0.0 });
        checks.push(Check { name: "soft Re I(4,0)".into(), value: s[1].i.re, bound: "< 0".into(), passed: s[1].i.re < 0.0 });
        Ok(checks)
    });
    counters.indicator_evaluations += 2;
    criteria.push(Criterion::new(5, "energy identity (soft)", c5));
    note("criterion 5");

    let c7 = crate::mesh::build_mesh(&hard, config.mesh_n).and_then(|mesh| energy_scalings(config, &hard, &mesh));
    criteria.push(Criterion::new(7, "obstacle-energy scalings", c7));
    criteria.push(Criterion::new(10, "reproducibility", determinism(config)));
    note("criteria 7 and 10");

    criteria.sort_by_key(|c| c.id);
    let passed = criteria.iter().all(Criterion::passed);
    dir.write_with("indicator.csv", |w| write_indicator_csv(w, &indicator_rows))?;
    dir.write_with("validation.csv", |w| write_validation_csv(w, &criteria))?;
    let report = ValidationReport { criteria, passed };
    let summary = Summary { config: config.clone(), metrics: &report, timings: counters, versions: Versions::default() };
    dir.write_json("summary.json", &summary)?;
    Ok((RunReport { files: dir.written().to_vec(), passed }, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cgo_algebra_holds_on_random_frames() {
        let checks = cgo_algebra(1.3, 40, 7).unwrap();
        assert_eq!(checks.len(), 5);
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }

    #[test]
    fn amplitude_rates() {
        let checks = amplitude_asymptotics(1.0).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }

    #[test]
    fn energy_scalings_on_the_default_box() {
        let cfg = RunConfig::default();
        let mesh = crate::mesh::build_mesh(&cfg.geometry, 16).unwrap();
        let checks = energy_scalings(&cfg, &cfg.geometry, &mesh).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }

    #[test]
    fn coarse_mesh_respects_the_margin() {
        let g = DomainGeometry::default_experiment();
        assert_eq!(coarse_n(&g, 32), 8);
        let big = g.with_obstacle(ObstacleShape::AxisBox { lo: [-0.8; 3], hi: [0.8; 3] });
        assert_eq!(coarse_n(&big, 32), 32);
    }

    #[test]
    fn display_names_failing_checks() {
        let cr = Criterion::new(3, "x", Ok(vec![le("a", 1.0, 2.0), le("b", 3.0, 2.0)]));
        let line = cr.to_string();
        assert!(line.starts_with("criterion  3 FAIL x"));
        assert!(line.contains("[b: 3.000000e0 not <= 2]"));
        assert!(!line.contains("[a:"));
        let err = Criterion::new(4, "y", Err(Error::Solver("boom".into())));
        assert!(!err.passed());
        let mut csv = Vec::new();
        write_validation_csv(&mut csv, &[cr, err]).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.contains("4,error,,solver: boom,false"));
        assert_eq!(quote("a, \"b\""), "\"a, \"\"b\"\"\"");
        assert_eq!(within("w", 4.0, 3.0, 5.0).bound, "in [3; 5]");
        assert_eq!(le("s", 0.0, 1e-12).bound, "<= 1e-12");
    }
}
