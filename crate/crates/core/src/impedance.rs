//! Impedance maps `ν∧E|∂Ω ↦ ν∧H|∂Ω` with and without the obstacle, and the
//! reflected field of a CGO probe.

use std::io::Write;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cgo::CgoField;
use crate::error::{Error, Result};
use crate::fem::{
    compute_h, facet_curls, solve_mixed_field, tangential_trace, weak_outer_flux, FemContext,
    FieldSolution, MixedSolve,
};
use crate::medium::{ObstacleKind, ObstacleShape};
use crate::mesh::{build_mesh, surface_quadrature, Mesh};
use crate::registry::Registry;
use crate::source::FieldSource;
use crate::vec3::{c, cdot, complexify, cscale, csub, rcross, Cplx3, CZERO3};

/// Values at the four quadrature points of every outer facet.
pub type FacetField = Vec<[Cplx3; 4]>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Fem,
    Analytic,
}

/// Tangential electric data `ν∧E` on ∂Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub values: FacetField,
    /// Analytic field the data was sampled from; FEM solves need it to set
    /// the essential boundary values.
    pub source: Option<FieldSource>,
}

impl BoundaryData {
    pub fn from_source(mesh: &Mesh, source: FieldSource) -> Result<Self> {
        let values = sample_outer(mesh, |x| Ok(source.eval(x)?.e), true)?;
        Ok(BoundaryData { values, source: Some(source) })
    }

    pub fn raw(values: FacetField) -> Self {
        BoundaryData { values, source: None }
    }

    /// Largest `|ν·value|` over all quadrature points.
    pub fn max_normal_component(&self, mesh: &Mesh) -> f64 {
        max_normal(mesh, &self.values)
    }

    fn source(&self) -> Result<&FieldSource> {
        self.source
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("boundary data without an analytic source cannot drive a solve".into()))
    }
}

/// Tangential magnetic trace `ν∧H` on ∂Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceResult {
    pub values: FacetField,
    pub provenance: Provenance,
}

impl ImpedanceResult {
    pub fn max_normal_component(&self, mesh: &Mesh) -> f64 {
        max_normal(mesh, &self.values)
    }

    pub fn minus(&self, other: &ImpedanceResult) -> Result<FacetField> {
        if self.values.len() != other.values.len() {
            return Err(Error::QuadratureMismatch(format!(
                "{} vs {} facets",
                self.values.len(),
                other.values.len()
            )));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| [0, 1, 2, 3].map(|q| csub(a[q], b[q])))
            .collect())
    }
}

fn max_normal(mesh: &Mesh, v: &FacetField) -> f64 {
    mesh.outer_facets
        .iter()
        .zip(v)
        .flat_map(|(f, qs)| qs.iter().map(move |u| cdot(complexify(f.normal), *u).norm()))
        .fold(0.0, f64::max)
}

/// `ν∧u(x)` at the outer quadrature points (`cross = true`), or `u(x)`.
fn sample_outer<F>(mesh: &Mesh, u: F, cross: bool) -> Result<FacetField>
where
    F: Fn([f64; 3]) -> Result<Cplx3>,
{
    mesh.outer_facets
        .iter()
        .map(|f| {
            let qs = surface_quadrature(f, mesh.h);
            let mut out = [CZERO3; 4];
            for (o, q) in out.iter_mut().zip(&qs) {
                let v = u(q.x)?;
                *o = if cross { rcross(f.normal, v) } else { v };
            }
            Ok(out)
        })
        .collect()
}

/// How the reflected field is obtained from the FEM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReflectedMode {
    /// Solve for `Ẽ` directly with the exact interface data of `E₀`.
    AnalyticInterface,
    /// Solve for the total field and subtract the interpolant of `E₀`.
    DiscreteLift,
}

impl ReflectedMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "analytic-interface" => Ok(ReflectedMode::AnalyticInterface),
            "discrete-lift" => Ok(ReflectedMode::DiscreteLift),
            other => Err(Error::UnknownStrategy {
                kind: "reflected",
                name: other.into(),
                available: "analytic-interface, discrete-lift".into(),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ReflectedMode::AnalyticInterface => "analytic-interface",
            ReflectedMode::DiscreteLift => "discrete-lift",
        }
    }
}

/// Recovers `ν∧H` on ∂Ω from a FEM field.
pub trait TraceRecovery: Send + Sync {
    fn name(&self) -> &'static str;
    fn recover(&self, ctx: &FemContext, sol: &MixedSolve) -> Result<FacetField>;
}

pub fn trace_registry() -> Registry<dyn TraceRecovery> {
    Registry::new("trace")
        .register("weak-flux", || Box::new(WeakFlux) as Box<dyn TraceRecovery>)
        .register("nodal-average", || Box::new(NodalAverage) as Box<dyn TraceRecovery>)
        .register("cell-curl", || Box::new(CellCurl) as Box<dyn TraceRecovery>)
}

/// Boundary flux read off the discrete equations and represented in the
/// boundary trace space by an `L²(∂Ω)` projection.
pub struct WeakFlux;

impl TraceRecovery for WeakFlux {
    fn name(&self) -> &'static str {
        "weak-flux"
    }

    fn recover(&self, ctx: &FemContext, sol: &MixedSolve) -> Result<FacetField> {
        let r = weak_outer_flux(ctx, sol);
        // the flux represents ν∧μ⁻¹∇∧E = iω ν∧H
        let s = c(0.0, -1.0 / ctx.spec.omega);
        let w = ctx.flux_representation().represent(&ctx.mesh, &r);
        Ok(w.into_iter().map(|qs| qs.map(|v| cscale(s, v))).collect())
    }
}

/// `H` from volume-averaged cell curls, traced at the quadrature points.
pub struct NodalAverage;

impl TraceRecovery for NodalAverage {
    fn name(&self) -> &'static str {
        "nodal-average"
    }

    fn recover(&self, ctx: &FemContext, sol: &MixedSolve) -> Result<FacetField> {
        let h = compute_h(&ctx.mesh, &sol.e, &ctx.spec)?;
        Ok(tangential_trace(&ctx.mesh, &h, &ctx.mesh.outer_facets))
    }
}

/// Curl of the interpolant inside the boundary cell at each quadrature point.
pub struct CellCurl;

impl TraceRecovery for CellCurl {
    fn name(&self) -> &'static str {
        "cell-curl"
    }

    fn recover(&self, ctx: &FemContext, sol: &MixedSolve) -> Result<FacetField> {
        let mesh = &ctx.mesh;
        let curls = facet_curls(mesh, &sol.e, &mesh.outer_facets);
        Ok(mesh
            .outer_facets
            .iter()
            .zip(curls)
            .map(|(f, cs)| {
                let qs = surface_quadrature(f, mesh.h);
                [0, 1, 2, 3].map(|q| {
                    let s = c(0.0, -1.0 / (ctx.spec.omega * ctx.spec.medium.mu_at(qs[q].x)));
                    rcross(f.normal, cscale(s, cs[q]))
                })
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceOptions {
    pub trace: String,
    pub reflected: ReflectedMode,
    /// Use a FEM solve on the obstacle-free mesh for `Λ_∅` even for CGO data.
    pub fem_lambda_empty: bool,
}

impl Default for ImpedanceOptions {
    fn default() -> Self {
        ImpedanceOptions { trace: "cell-curl".into(), reflected: ReflectedMode::AnalyticInterface, fem_lambda_empty: false }
    }
}

/// Evaluates `Λ_D` and `Λ_∅` on one mesh resolution.
pub struct Impedance {
    pub ctx: Arc<FemContext>,
    pub options: ImpedanceOptions,
    trace: Box<dyn TraceRecovery>,
    empty: OnceLock<Result<Arc<FemContext>>>,
}

impl Impedance {
    pub fn new(ctx: Arc<FemContext>, options: ImpedanceOptions) -> Result<Self> {
        let trace = trace_registry().create(&options.trace)?;
        Ok(Impedance { ctx, options, trace, empty: OnceLock::new() })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.ctx.mesh
    }

    pub fn kind(&self) -> ObstacleKind {
        self.ctx.mesh.geometry.kind
    }

    /// Context on the same grid without the obstacle.
    pub fn empty_context(&self) -> Result<Arc<FemContext>> {
        self.empty
            .get_or_init(|| {
                if self.ctx.mesh.geometry.obstacle.is_empty() {
                    return Ok(self.ctx.clone());
                }
                let g = self.ctx.mesh.geometry.with_obstacle(ObstacleShape::Empty);
                let mesh = Arc::new(build_mesh(&g, self.ctx.mesh.n)?);
                let name = self.ctx.discretization.name();
                Ok(Arc::new(FemContext::with_discretization(mesh, self.ctx.spec, self.ctx.options.clone(), name)?))
            })
            .clone()
    }

    /// Reflected field `Ẽ = E − E₀` for a CGO probe.
    pub fn reflected_solve(&self, cgo: &CgoField) -> Result<MixedSolve> {
        reflected_solve(&self.ctx, cgo, self.kind(), self.options.reflected)
    }

    /// `(Λ_D f)`; for CGO data the analytic `ν∧H₀` plus the reflected trace.
    pub fn lambda_d(&self, f: &BoundaryData) -> Result<ImpedanceResult> {
        let source = f.source()?;
        if let Some(cgo) = source.as_cgo() {
            let (values, _) = self.lambda_d_cgo(cgo)?;
            return Ok(ImpedanceResult { values, provenance: Provenance::Fem });
        }
        let sol = solve_mixed_field(&self.ctx, source, &FieldSource::Zero, self.kind())?;
        Ok(ImpedanceResult { values: self.trace.recover(&self.ctx, &sol)?, provenance: Provenance::Fem })
    }

    /// `Λ_D f` for CGO data together with the reflected solve.
    pub fn lambda_d_cgo(&self, cgo: &CgoField) -> Result<(FacetField, MixedSolve)> {
        let (tr, refl) = self.reflected_trace(cgo)?;
        Ok((self.lambda_d_from_trace(cgo, &tr)?, refl))
    }

    /// `ν∧H̃` of the reflected field on ∂Ω.
    pub fn reflected_trace(&self, cgo: &CgoField) -> Result<(FacetField, MixedSolve)> {
        let refl = self.reflected_solve(cgo)?;
        let tr = if self.ctx.mesh.geometry.obstacle.is_empty() {
            vec![[CZERO3; 4]; self.ctx.mesh.outer_facets.len()]
        } else {
            self.trace.recover(&self.ctx, &refl)?
        };
        Ok((tr, refl))
    }

    /// `ν∧H₀ + tr`.
    pub fn lambda_d_from_trace(&self, cgo: &CgoField, tr: &FacetField) -> Result<FacetField> {
        let h0 = sample_outer(&self.ctx.mesh, |x| Ok(cgo.eval(x)?.h), true)?;
        Ok(h0.iter().zip(tr).map(|(a, b)| [0, 1, 2, 3].map(|q| crate::vec3::cadd(a[q], b[q]))).collect())
    }

    /// `Λ_∅ f`: closed form for CGO data unless a FEM cross-check is requested.
    pub fn lambda_empty(&self, f: &BoundaryData) -> Result<ImpedanceResult> {
        let source = f.source()?;
        if let (Some(cgo), false) = (source.as_cgo(), self.options.fem_lambda_empty) {
            let values = sample_outer(&self.ctx.mesh, |x| Ok(cgo.eval(x)?.h), true)?;
            return Ok(ImpedanceResult { values, provenance: Provenance::Analytic });
        }
        let ctx = self.empty_context()?;
        let sol = solve_mixed_field(&ctx, source, &FieldSource::Zero, ObstacleKind::Hard)?;
        Ok(ImpedanceResult { values: self.trace.recover(&ctx, &sol)?, provenance: Provenance::Fem })
    }
}

/// Reflected field of a CGO probe on the annulus.
pub fn reflected_solve(ctx: &FemContext, cgo: &CgoField, kind: ObstacleKind, mode: ReflectedMode) -> Result<MixedSolve> {
    let mesh = &ctx.mesh;
    let nn = mesh.num_nodes();
    if mesh.geometry.obstacle.is_empty() {
        let e = FieldSolution::zeros(nn).with_basis(ctx.basis());
        return Ok(MixedSolve { e, load: vec![Complex64::default(); 3 * nn] });
    }
    let e0 = FieldSource::Cgo(*cgo);
    match mode {
        ReflectedMode::AnalyticInterface => solve_mixed_field(ctx, &FieldSource::Zero, &e0.negated(), kind),
        ReflectedMode::DiscreteLift => {
            let total = solve_mixed_field(ctx, &e0, &FieldSource::Zero, kind)?;
            let lift = ctx.interpolate(&e0)?;
            let values: Vec<Cplx3> = total.e.values.iter().zip(&lift.values).map(|(a, b)| csub(*a, *b)).collect();
            let e = FieldSolution { values, basis: total.e.basis, stats: total.e.stats };
            Ok(MixedSolve { e, load: total.load })
        }
    }
}

/// `facet_id, qp_id, x, y, z, re_t1, im_t1, re_t2, im_t2` with `t1`, `t2` the
/// two tangential Cartesian components (lower axis first).
pub fn write_trace_csv<W: Write>(mut w: W, mesh: &Mesh, values: &FacetField) -> Result<()> {
    writeln!(w, "facet_id,qp_id,x,y,z,re_t1,im_t1,re_t2,im_t2")?;
    for (fid, (f, qs)) in mesh.outer_facets.iter().zip(values).enumerate() {
        let (u, v) = f.tangent_axes();
        for (qid, q) in surface_quadrature(f, mesh.h).iter().enumerate() {
            let t = qs[qid];
            writeln!(
                w,
                "{fid},{qid},{},{},{},{},{},{},{}",
                crate::fmt17(q.x[0]),
                crate::fmt17(q.x[1]),
                crate::fmt17(q.x[2]),
                crate::fmt17(t[u].re),
                crate::fmt17(t[u].im),
                crate::fmt17(t[v].re),
                crate::fmt17(t[v].im)
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgo::make_frame;
    use crate::fem::{BilinearFormSpec, SolverOptions};
    use crate::indicator::surface_norm;
    use crate::medium::{DomainGeometry, Medium};
    use crate::source::PlaneWave;

    fn impedance(geometry: DomainGeometry, n: usize, options: ImpedanceOptions) -> Impedance {
        let mesh = Arc::new(build_mesh(&geometry, n).unwrap());
        let spec = BilinearFormSpec::new(Medium::default(), 1.0).unwrap();
        Impedance::new(Arc::new(FemContext::new(mesh, spec, SolverOptions::default())), options).unwrap()
    }

    fn gap(mesh: &Mesh, a: &FacetField, b: &FacetField) -> f64 {
        let d: FacetField = a.iter().zip(b).map(|(x, y)| [0, 1, 2, 3].map(|q| csub(x[q], y[q]))).collect();
        surface_norm(mesh, &d) / surface_norm(mesh, b)
    }

    #[test]
    fn registry_and_reflected_names() {
        assert_eq!(trace_registry().names(), ["weak-flux", "nodal-average", "cell-curl"]);
        for m in [ReflectedMode::AnalyticInterface, ReflectedMode::DiscreteLift] {
            assert_eq!(ReflectedMode::parse(m.name()).unwrap(), m);
        }
        assert!(ReflectedMode::parse("lifted").unwrap_err().to_string().contains("discrete-lift"));
    }

    #[test]
    fn closed_form_empty_map_matches_fem() {
        let g = DomainGeometry::default_experiment().with_obstacle(ObstacleShape::Empty);
        let medium = Medium::default();
        let cgo = CgoField::peak_scaled(make_frame([0.0, 0.6, 0.8]).unwrap(), 2.0, medium, &g).unwrap();
        let mut errs = Vec::new();
        for n in [8, 16] {
            let fem = impedance(g, n, ImpedanceOptions { fem_lambda_empty: true, ..Default::default() });
            let data = BoundaryData::from_source(fem.mesh(), FieldSource::Cgo(cgo)).unwrap();
            let a = fem.lambda_empty(&data).unwrap();
            assert_eq!(a.provenance, Provenance::Fem);
            let exact = impedance(g, n, ImpedanceOptions::default()).lambda_empty(&data).unwrap();
            assert_eq!(exact.provenance, Provenance::Analytic);
            errs.push(gap(fem.mesh(), &a.values, &exact.values));
        }
        // the recovered trace is a curl of the discrete field: first order
        assert!(errs[1] < 0.1 && errs[0] / errs[1] > 1.8, "{errs:?}");
    }

    #[test]
    fn hard_map_is_linear_and_tangential() {
        let imp = impedance(DomainGeometry::default_experiment(), 8, ImpedanceOptions::default());
        let m = Medium::default();
        let f = FieldSource::PlaneWave(PlaneWave::new([1.0, 0.0, 0.0], [0.0, 0.0, 1.0]).unwrap(), m);
        let g = FieldSource::PlaneWave(PlaneWave::new([0.0, 0.0, 1.0], [0.6, 0.8, 0.0]).unwrap(), m);
        let (a, b) = (c(0.3, -1.2), c(2.0, 0.5));
        let mesh = imp.mesh();
        let lam = |s: FieldSource| imp.lambda_d(&BoundaryData::from_source(mesh, s).unwrap()).unwrap();
        let (lf, lg) = (lam(f.clone()), lam(g.clone()));
        let combined = lam(FieldSource::Combination(vec![(a, f), (b, g)]));
        let expect: FacetField =
            lf.values.iter().zip(&lg.values).map(|(x, y)| [0, 1, 2, 3].map(|q| crate::vec3::cadd(cscale(a, x[q]), cscale(b, y[q])))).collect();
        assert!(gap(mesh, &combined.values, &expect) < 1e-10);
        let scale = surface_norm(mesh, &lf.values);
        assert!(lf.max_normal_component(mesh) <= 1e-12 * scale);
    }

    #[test]
    fn cgo_map_splits_into_incident_and_reflected_parts() {
        let imp = impedance(DomainGeometry::default_experiment(), 8, ImpedanceOptions::default());
        let g = imp.mesh().geometry;
        let cgo = CgoField::peak_scaled(make_frame([0.0, 0.0, 1.0]).unwrap(), 2.0, Medium::default(), &g).unwrap();
        let data = BoundaryData::from_source(imp.mesh(), FieldSource::Cgo(cgo)).unwrap();
        let full = imp.lambda_d(&data).unwrap();
        let (tr, _) = imp.reflected_trace(&cgo).unwrap();
        let empty = imp.lambda_empty(&data).unwrap();
        let diff = full.minus(&empty).unwrap();
        assert!(gap(imp.mesh(), &diff, &tr) < 1e-12);
        assert!(surface_norm(imp.mesh(), &tr) > 0.0);
        let raw = BoundaryData::raw(data.values.clone());
        assert!(imp.lambda_d(&raw).is_err());
    }

    #[test]
    fn trace_csv_has_one_row_per_quadrature_point() {
        let g = DomainGeometry::default_experiment();
        let mesh = build_mesh(&g, 4).unwrap();
        let values = vec![[CZERO3; 4]; mesh.outer_facets.len()];
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &mesh, &values).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 4 * 6 * 16);
    }
}
