//! JSON scene configuration and its resolution against the catalog.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use spraylab::bm::GeodesicSeed;
use spraylab::catalog::{builtin, CatalogEntry, EntryParams};
use spraylab::curvature::GridSpec;
use spraylab::field::ScalarField;
use spraylab::sets::Region;
use spraylab::spray::SprayField;
use spraylab::surface::{ConformalChart, Domain, Point};

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entry: Option<String>,
    #[serde(default, skip_serializing_if = "ParamsSpec::is_empty")]
    pub params: ParamsSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spray: Option<SpraySpec>,
    /// Expression for the weight `φ`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
    #[serde(default)]
    pub regions: RegionsSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geodesic: Option<GeodesicSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub big_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bases: Option<[[f64; 2]; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub needle: Option<NeedleSpec>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disc_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arc_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curvature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChartSpec {
    /// `euclidean`, `punctured_plane`, `poincare_disk`, `upper_half_plane`, `stereographic_sphere`.
    Builtin(String),
    /// Constant curvature model.
    Curvature(f64),
    Psi { expr: String, domain: DomainSpec },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainSpec {
    Plane,
    UpperHalfPlane,
    PuncturedPlane,
    Disc([f64; 3]),
    Rect([f64; 4]),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SpraySpec {
    /// `geodesic`.
    Builtin(String),
    Constant(f64),
    /// `κ(x, y)`, or `k(x, y, θ)` when `theta` appears.
    K(String),
    Reversed(Box<SpraySpec>),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionSpec {
    Disc([f64; 3]),
    Rect([f64; 4]),
    Annulus([f64; 4]),
    Polygon(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<RegionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<RegionSpec>,
    /// Region for the metrization checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<RegionSpec>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSpec {
    pub start: [f64; 2],
    pub theta: f64,
    pub length: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NeedleSpec {
    /// Density samples on a uniform grid of the support.
    pub density: Vec<f64>,
    pub support: [f64; 2],
    pub a: Vec<[f64; 2]>,
    pub b: Vec<[f64; 2]>,
}

impl ParamsSpec {
    fn is_empty(&self) -> bool {
        self.disc_radius.is_none() && self.arc_radius.is_none() && self.curvature.is_none() && self.potential.is_none()
    }
}

impl SceneConfig {
    pub fn load(path: &Path) -> Result<SceneConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

impl RegionSpec {
    pub fn to_region(&self) -> Region {
        match self {
            RegionSpec::Disc([cx, cy, r]) => Region::disc(*cx, *cy, *r),
            RegionSpec::Rect([x0, y0, x1, y1]) => Region::rect(*x0, *y0, *x1, *y1),
            RegionSpec::Annulus([cx, cy, r_inner, r_outer]) => {
                Region::Annulus { cx: *cx, cy: *cy, r_inner: *r_inner, r_outer: *r_outer }
            }
            RegionSpec::Polygon(v) => Region::Polygon(v.iter().map(|p| Point::new(p[0], p[1])).collect()),
        }
    }

    pub fn from_region(r: &Region) -> RegionSpec {
        match r {
            Region::Disc { cx, cy, r } => RegionSpec::Disc([*cx, *cy, *r]),
            Region::Annulus { cx, cy, r_inner, r_outer } => RegionSpec::Annulus([*cx, *cy, *r_inner, *r_outer]),
            Region::Polygon(v) => RegionSpec::Polygon(v.iter().map(|p| [p.x, p.y]).collect()),
        }
    }
}

fn expression_step(domain: &Domain) -> f64 {
    domain.difference_step()
}

fn build_chart(spec: &ChartSpec) -> Result<ConformalChart> {
    Ok(match spec {
        ChartSpec::Builtin(name) => match name.as_str() {
            "euclidean" => ConformalChart::euclidean(),
            "punctured_plane" => ConformalChart::punctured_plane(),
            "poincare_disk" => ConformalChart::poincare_disk(),
            "upper_half_plane" => ConformalChart::upper_half_plane(),
            "stereographic_sphere" => ConformalChart::stereographic_sphere(),
            other => bail!("unknown chart `{other}`"),
        },
        ChartSpec::Curvature(k) => ConformalChart::constant_curvature(*k),
        ChartSpec::Psi { expr, domain } => {
            let domain = match domain {
                DomainSpec::Plane => Domain::Plane,
                DomainSpec::UpperHalfPlane => Domain::UpperHalfPlane,
                DomainSpec::PuncturedPlane => Domain::PuncturedPlane,
                DomainSpec::Disc([cx, cy, r]) => Domain::Disc { cx: *cx, cy: *cy, r: *r },
                DomainSpec::Rect([x0, y0, x1, y1]) => Domain::Rect { x0: *x0, y0: *y0, x1: *x1, y1: *y1 },
            };
            let psi = ScalarField::parse(expr, expression_step(&domain))?;
            ConformalChart::new(format!("psi = {expr}"), domain, psi)?
        }
    })
}

fn build_spray(spec: &SpraySpec, step: f64) -> Result<SprayField> {
    Ok(match spec {
        SpraySpec::Builtin(name) => match name.as_str() {
            "geodesic" => SprayField::geodesic(),
            other => bail!("unknown spray `{other}`"),
        },
        SpraySpec::Constant(k) => SprayField::constant(*k),
        SpraySpec::K(text) => SprayField::from_k_expression(text, step)?,
        SpraySpec::Reversed(inner) => build_spray(inner, step)?.reversed(),
    })
}

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub entry: Option<String>,
    pub seed: Option<u64>,
    pub cell: Option<f64>,
    pub spacing: Option<f64>,
    pub lambda: Option<f64>,
    pub big_n: Option<f64>,
}

/// A fully resolved scene.
#[derive(Debug, Clone)]
pub struct Scene {
    pub entry: CatalogEntry,
    pub config: SceneConfig,
    pub seed: u64,
    pub lambda: f64,
    pub big_n: f64,
    pub cell: Option<f64>,
    pub spacing: Option<f64>,
    pub tol: f64,
    pub budget: usize,
}

fn positive(name: &str, v: Option<f64>) -> Result<Option<f64>> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => bail!("{name} must be positive, got {x}"),
        other => Ok(other),
    }
}

impl Scene {
    pub fn resolve(mut config: SceneConfig, o: &Overrides) -> Result<Scene> {
        if o.entry.is_some() {
            config.entry = o.entry.clone();
        }
        let name = config.entry.clone().unwrap_or_else(|| "flat_lines".into());
        let params = EntryParams {
            disc_radius: config.params.disc_radius,
            arc_radius: config.params.arc_radius,
            curvature: config.params.curvature,
            potential: config.params.potential.clone(),
        };
        let mut entry = builtin(&name, &params)?;
        if let Some(spec) = &config.chart {
            entry.chart = build_chart(spec)?;
            entry.name = format!("{name} (custom chart)");
        }
        if let Some(expr) = &config.weight {
            let phi = ScalarField::parse(expr, expression_step(entry.chart.domain()))?;
            entry.chart = entry.chart.clone().with_weight(phi);
        }
        if let Some(spec) = &config.spray {
            entry.spray = build_spray(spec, expression_step(entry.chart.domain()))?;
            entry.name = format!("{name} (custom spray)");
        }
        if config.chart.is_some() || config.spray.is_some() || config.weight.is_some() {
            let w = entry.working.clone();
            entry.grid = {
                let (x0, y0, x1, y1) = w.bbox();
                let chart = entry.chart.clone();
                GridSpec::cartesian(x0, y0, x1, y1, 65, 65).filtered(move |p| w.contains(p) && chart.contains(p))
            };
        }
        if let Some(g) = &config.geodesic {
            entry.seed = GeodesicSeed { start: Point::new(g.start[0], g.start[1]), theta: g.theta, length: g.length };
        }
        let lambda = o.lambda.or(config.lambda).unwrap_or(0.5);
        if !(lambda > 0.0 && lambda < 1.0) {
            bail!("lambda must lie in (0, 1), got {lambda}");
        }
        let big_n = o.big_n.or(config.big_n).unwrap_or(2.0);
        if !(big_n >= 1.0) {
            bail!("N must be at least 1, got {big_n}");
        }
        Ok(Scene {
            seed: o.seed.or(config.seed).unwrap_or(0),
            lambda,
            big_n,
            cell: positive("cell", o.cell.or(config.cell))?,
            spacing: positive("spacing", o.spacing.or(config.spacing))?,
            tol: positive("tol", config.tol)?.unwrap_or(1e-11),
            budget: config.budget.unwrap_or(12),
            entry,
            config,
        })
    }

    pub fn region_a(&self) -> Result<Region> {
        match &self.config.regions.a {
            Some(r) => Ok(r.to_region()),
            None => bail!("config has no region `a`"),
        }
    }

    pub fn region_b(&self) -> Result<Region> {
        match &self.config.regions.b {
            Some(r) => Ok(r.to_region()),
            None => bail!("config has no region `b`"),
        }
    }
}
