//! Run configuration: flat `section.key = value` text (a TOML subset).
//!
//! Every key has a default; unknown keys and type mismatches are errors, and
//! all invariants that can be checked without solving are checked here.

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::enclosure::{axis_and_diagonal_directions, estimator_registry, fibonacci_directions, SweepConfig};
use crate::error::{Error, Result};
use crate::fem::{discretization_registry, solver_registry, SolverOptions};
use crate::impedance::{trace_registry, ImpedanceOptions, ReflectedMode};
use crate::medium::{AxisBox, DomainGeometry, Medium, ObstacleKind, ObstacleShape};
use crate::vec3::{norm, Real3};

/// Obstacle cells must stay this many cells away from ∂Ω.
pub const MARGIN_CELLS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FemConfig {
    /// Grad-div penalty of the nodal space.
    pub s: f64,
    pub discretization: String,
    pub solver: SolverOptions,
    pub impedance: ImpedanceOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ForwardSource {
    Zero,
    PlaneWave { polarization: Real3, direction: Real3 },
    Cgo { rho: Real3, tau: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub medium: Medium,
    pub geometry: DomainGeometry,
    /// Cells per axis.
    pub mesh_n: usize,
    pub fem: FemConfig,
    pub sweep: SweepConfig,
    /// Hull membership grid resolution per axis.
    pub hull_n: usize,
    pub forward: ForwardSource,
    /// Shifts `t` reported by the indicator table.
    pub indicator_t: Vec<f64>,
    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            medium: Medium { eps0: 1.0, mu0: 1.0, omega: 1.0 },
            geometry: DomainGeometry::default_experiment(),
            mesh_n: 32,
            fem: FemConfig {
                s: 1.0,
                discretization: "auto".into(),
                solver: SolverOptions::default(),
                impedance: ImpedanceOptions::default(),
            },
            sweep: SweepConfig::default(),
            hull_n: 32,
            forward: ForwardSource::Cgo { rho: [0.0, 0.0, 1.0], tau: 2.0 },
            indicator_t: vec![0.0],
            output_dir: "out".into(),
        }
    }
}

const KEYS: &[&str] = &[
    "medium.eps0",
    "medium.mu0",
    "medium.omega",
    "domain.lo",
    "domain.hi",
    "obstacle.shape",
    "obstacle.kind",
    "obstacle.lo",
    "obstacle.hi",
    "obstacle.center",
    "obstacle.radius",
    "mesh.n",
    "fem.s",
    "fem.discretization",
    "fem.solver",
    "fem.tol",
    "fem.max_iter",
    "fem.direct_threshold",
    "fem.max_fill",
    "fem.trace",
    "fem.reflected",
    "fem.fem_lambda_empty",
    "sweep.directions",
    "sweep.tau_grid",
    "sweep.fit",
    "sweep.tau_correction",
    "sweep.tol_h",
    "sweep.noise_factor",
    "sweep.hull_n",
    "forward.source",
    "forward.polarization",
    "forward.direction",
    "forward.rho",
    "forward.tau",
    "indicator.t",
    "output.dir",
];

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

struct Entries(Vec<(String, Value)>);

impl Entries {
    fn get(&self, key: &str) -> Option<&Value> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    fn float(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key).map_or(Ok(default), |v| as_float(key, v))
    }

    fn int(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
            Some(v) => Err(mismatch(key, "non-negative integer", v)),
        }
    }

    fn string(&self, key: &str, default: &str) -> Result<String> {
        match self.get(key) {
            None => Ok(default.to_string()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(v) => Err(mismatch(key, "string", v)),
        }
    }

    fn boolean(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(v) => Err(mismatch(key, "boolean", v)),
        }
    }

    fn floats(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(a)) => a.iter().map(|v| as_float(key, v)).collect(),
            Some(v) => Err(mismatch(key, "array of numbers", v)),
        }
    }

    fn vec3(&self, key: &str, default: Real3) -> Result<Real3> {
        let v = self.floats(key, &default)?;
        v.try_into().map_err(|v: Vec<f64>| Error::Config(format!("key '{key}': expected 3 numbers, got {}", v.len())))
    }
}

fn kind_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

fn mismatch(key: &str, want: &str, got: &Value) -> Error {
    Error::Config(format!("key '{key}': expected {want}, got {}", kind_name(got)))
}

fn as_float(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(mismatch(key, "number", other)),
    }
}

fn unit(key: &str, v: Real3) -> Result<Real3> {
    let n = norm(v);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Config(format!("key '{key}': zero direction")));
    }
    Ok(v.map(|x| x / n))
}

fn check_name(kind: &str, name: &str, names: Vec<&'static str>, extra: &[&str]) -> Result<()> {
    if names.contains(&name) || extra.contains(&name) {
        return Ok(());
    }
    let mut all: Vec<&str> = names;
    all.extend_from_slice(extra);
    Err(Error::Config(format!("unknown {kind} '{name}' (available: {})", all.join(", "))))
}

/// Parses and validates a configuration; omitted keys take their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    let mut flat = Vec::new();
    flatten("", &table, &mut flat);
    for (k, _) in &flat {
        if !KEYS.contains(&k.as_str()) {
            return Err(Error::Config(format!("unknown key '{k}'")));
        }
    }
    let e = Entries(flat);
    let d = RunConfig::default();

    let medium = Medium::new(
        e.float("medium.eps0", d.medium.eps0)?,
        e.float("medium.mu0", d.medium.mu0)?,
        e.float("medium.omega", d.medium.omega)?,
    )
    .map_err(|err| Error::Config(err.to_string()))?;

    let omega_box = AxisBox::new(e.vec3("domain.lo", d.geometry.omega_box.lo)?, e.vec3("domain.hi", d.geometry.omega_box.hi)?)
        .map_err(|err| Error::Config(err.to_string()))?;
    let kind = match e.string("obstacle.kind", "hard")?.as_str() {
        "hard" => ObstacleKind::Hard,
        "soft" => ObstacleKind::Soft,
        other => return Err(Error::Config(format!("obstacle.kind must be 'hard' or 'soft', got '{other}'"))),
    };
    let shape = e.string("obstacle.shape", "box")?;
    let allowed: &[&str] = match shape.as_str() {
        "box" => &["obstacle.lo", "obstacle.hi"],
        "ball" => &["obstacle.center", "obstacle.radius"],
        "empty" => &[],
        other => return Err(Error::Config(format!("obstacle.shape must be 'box', 'ball' or 'empty', got '{other}'"))),
    };
    for key in ["obstacle.lo", "obstacle.hi", "obstacle.center", "obstacle.radius"] {
        if e.get(key).is_some() && !allowed.contains(&key) {
            return Err(Error::Config(format!("key '{key}' does not apply to obstacle.shape = '{shape}'")));
        }
    }
    let obstacle = match shape.as_str() {
        "box" => ObstacleShape::AxisBox { lo: e.vec3("obstacle.lo", [-0.25; 3])?, hi: e.vec3("obstacle.hi", [0.25; 3])? },
        "ball" => ObstacleShape::Ball { center: e.vec3("obstacle.center", [0.0; 3])?, radius: e.float("obstacle.radius", 0.25)? },
        _ => ObstacleShape::Empty,
    };
    let geometry = DomainGeometry::new(omega_box, obstacle, kind).map_err(|err| Error::Config(err.to_string()))?;

    let mesh_n = e.int("mesh.n", d.mesh_n)?;
    if mesh_n < 4 {
        return Err(Error::Config(format!("mesh.n must be at least 4, got {mesh_n}")));
    }
    geometry.check_margin(mesh_n, MARGIN_CELLS).map_err(|err| Error::Config(err.to_string()))?;

    let ds = &d.fem.solver;
    let solver = SolverOptions {
        method: e.string("fem.solver", &ds.method)?,
        tol: e.float("fem.tol", ds.tol)?,
        max_iter: e.get("fem.max_iter").map(|_| e.int("fem.max_iter", 0)).transpose()?,
        direct_threshold: e.int("fem.direct_threshold", ds.direct_threshold)?,
        max_fill: e.int("fem.max_fill", ds.max_fill)?,
    };
    if !(solver.tol > 0.0 && solver.tol < 1.0) {
        return Err(Error::Config(format!("fem.tol must lie in (0, 1), got {}", solver.tol)));
    }
    check_name("solver", &solver.method, solver_registry().names(), &[])?;
    let impedance = ImpedanceOptions {
        trace: e.string("fem.trace", &d.fem.impedance.trace)?,
        reflected: ReflectedMode::parse(&e.string("fem.reflected", d.fem.impedance.reflected.name())?)
            .map_err(|err| Error::Config(err.to_string()))?,
        fem_lambda_empty: e.boolean("fem.fem_lambda_empty", false)?,
    };
    check_name("trace", &impedance.trace, trace_registry().names(), &[])?;
    let fem = FemConfig {
        s: e.float("fem.s", d.fem.s)?,
        discretization: e.string("fem.discretization", &d.fem.discretization)?,
        solver,
        impedance,
    };
    if !(fem.s > 0.0) {
        return Err(Error::Config(format!("fem.s must be positive, got {}", fem.s)));
    }
    check_name("discretization", &fem.discretization, discretization_registry().names(), &["auto"])?;

    let directions = match e.get("sweep.directions") {
        None => d.sweep.directions.clone(),
        Some(Value::String(s)) if s == "axes-diagonals" => axis_and_diagonal_directions(),
        Some(Value::Integer(n)) if *n > 0 => fibonacci_directions(*n as usize),
        Some(Value::Array(list)) => list
            .iter()
            .map(|v| match v {
                Value::Array(xs) if xs.len() == 3 => {
                    let x: Vec<f64> = xs.iter().map(|x| as_float("sweep.directions", x)).collect::<Result<_>>()?;
                    unit("sweep.directions", [x[0], x[1], x[2]])
                }
                other => Err(mismatch("sweep.directions", "[x, y, z]", other)),
            })
            .collect::<Result<_>>()?,
        Some(v) => return Err(mismatch("sweep.directions", "\"axes-diagonals\", a positive count or a list of vectors", v)),
    };
    let sweep = SweepConfig {
        directions,
        tau_grid: e.floats("sweep.tau_grid", &d.sweep.tau_grid)?,
        fit: e.string("sweep.fit", &d.sweep.fit)?,
        tau_correction: e.boolean("sweep.tau_correction", d.sweep.tau_correction)?,
        tol_h: e.get("sweep.tol_h").map(|v| as_float("sweep.tol_h", v)).transpose()?,
        noise_factor: e.float("sweep.noise_factor", d.sweep.noise_factor)?,
    };
    check_name("fit", &sweep.fit, estimator_registry().names(), &[])?;
    sweep.validate()?;
    let hull_n = e.int("sweep.hull_n", mesh_n)?;
    if hull_n < 2 {
        return Err(Error::Config("sweep.hull_n must be at least 2".into()));
    }

    let forward = match e.string("forward.source", "cgo")?.as_str() {
        "zero" => ForwardSource::Zero,
        "plane-wave" => {
            let polarization = e.vec3("forward.polarization", [1.0, 0.0, 0.0])?;
            let direction = unit("forward.direction", e.vec3("forward.direction", [0.0, 0.0, 1.0])?)?;
            crate::source::PlaneWave::new(polarization, direction).map_err(|err| Error::Config(err.to_string()))?;
            ForwardSource::PlaneWave { polarization, direction }
        }
        "cgo" => {
            let tau = e.float("forward.tau", 2.0)?;
            if !(tau > 0.0) {
                return Err(Error::Config(format!("forward.tau must be positive, got {tau}")));
            }
            ForwardSource::Cgo { rho: unit("forward.rho", e.vec3("forward.rho", [0.0, 0.0, 1.0])?)?, tau }
        }
        other => return Err(Error::Config(format!("forward.source must be 'zero', 'plane-wave' or 'cgo', got '{other}'"))),
    };

    Ok(RunConfig {
        medium,
        geometry,
        mesh_n,
        fem,
        sweep,
        hull_n,
        forward,
        indicator_t: e.floats("indicator.t", &d.indicator_t)?,
        output_dir: e.string("output.dir", &d.output_dir)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse_config("obstacle.shape = \"box\"\n").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
    }

    #[test]
    fn dotted_keys_and_sections_agree() {
        let a = parse_config("medium.omega = 2\nsweep.tau_grid = [1, 2, 3.5]\n").unwrap();
        let b = parse_config("[medium]\nomega = 2.0\n[sweep]\ntau_grid = [1.0, 2.0, 3.5]\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.medium.omega, 2.0);
        assert_eq!(a.sweep.tau_grid, vec![1.0, 2.0, 3.5]);
    }

    #[test]
    fn errors_name_the_problem() {
        let msg = |t: &str| parse_config(t).unwrap_err().to_string();
        assert!(msg("medium.omgea = 1.0").contains("unknown key 'medium.omgea'"));
        assert!(msg("sweep.tau_grid = [4, 2, 6]").contains("tau_grid strictly increasing"));
        assert!(msg("obstacle.hi = [0.25, 0.25, 1.0]").contains("margin"));
        assert!(msg("obstacle.hi = [0.25, 0.25, 0.95]").contains("margin"));
        assert!(msg("mesh.n = \"big\"").contains("expected non-negative integer, got string"));
        assert!(msg("fem.solver = \"gmres\"").contains("cocg"));
        assert!(msg("fem.discretization = \"p2\"").contains("auto"));
        assert!(msg("obstacle.shape = \"empty\"\nobstacle.radius = 0.2").contains("does not apply"));
        assert!(msg("medium.eps0 = -1").contains("eps0"));
    }

    #[test]
    fn direction_forms() {
        assert_eq!(parse_config("sweep.directions = 20").unwrap().sweep.directions.len(), 20);
        let c = parse_config("sweep.directions = [[0, 0, 2], [1, 1, 0]]").unwrap();
        assert_eq!(c.sweep.directions[0], [0.0, 0.0, 1.0]);
        assert!((norm(c.sweep.directions[1]) - 1.0).abs() < 1e-15);
        assert_eq!(parse_config("sweep.directions = \"axes-diagonals\"").unwrap().sweep.directions.len(), 14);
    }

    #[test]
    fn forward_sources() {
        let c = parse_config("forward.source = \"zero\"").unwrap();
        assert_eq!(c.forward, ForwardSource::Zero);
        assert!(parse_config("forward.source = \"plane-wave\"\nforward.polarization = [0, 0, 1]").is_err());
        let c = parse_config("obstacle.shape = \"ball\"\nobstacle.radius = 0.3\nobstacle.kind = \"soft\"").unwrap();
        assert_eq!(c.geometry.kind, ObstacleKind::Soft);
        assert_eq!(c.geometry.obstacle, ObstacleShape::Ball { center: [0.0; 3], radius: 0.3 });
    }
}
