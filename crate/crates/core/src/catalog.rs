//! Built-in surfaces and sprays with recommended working regions.

use std::f64::consts::FRAC_PI_2;

use crate::bm::GeodesicSeed;
use crate::curvature::{check_nnc, CurvatureReport, GridSpec, Verdict, DEFAULT_ANGLES};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::sets::Region;
use crate::spray::SprayField;
use crate::surface::{ConformalChart, Point};

pub const NAMES: [&str; 8] = [
    "flat_lines",
    "horocycles",
    "norwich",
    "seiffert",
    "circular_arcs",
    "cotK",
    "hyperbolic_geodesics",
    "kappa_3x",
];

/// Optional parameters of the parametrized entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntryParams {
    /// `circular_arcs`: radius of the disc surface (default 0.5).
    pub disc_radius: Option<f64>,
    /// `circular_arcs`: radius of the arcs (default 1).
    pub arc_radius: Option<f64>,
    /// `cotK`: Gauss curvature of the surface (default 0).
    pub curvature: Option<f64>,
    /// `cotK`: the function `f` in `κ = cot_K(f)` (default `x + 2`).
    pub potential: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub chart: ConformalChart,
    pub spray: SprayField,
    pub working: Region,
    pub grid: GridSpec,
    pub expected: Verdict,
    /// Known minimum of the condition, when there is a closed form.
    pub expected_min: Option<f64>,
    /// A geodesic inside the working region for traces and searches.
    pub seed: GeodesicSeed,
    pub notes: String,
}

impl CatalogEntry {
    /// Re-evaluates the condition on the entry grid.
    pub fn check(&self) -> Result<CurvatureReport> {
        check_nnc(&self.chart, &self.spray, &self.grid)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn box_grid(region: &Region) -> GridSpec {
    let (x0, y0, x1, y1) = region.bbox();
    let r = region.clone();
    GridSpec::cartesian(x0, y0, x1, y1, 65, 65).filtered(move |p| r.contains(p))
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

/// Builds a catalog entry and checks its expected verdict.
pub fn builtin(name: &str, params: &EntryParams) -> Result<CatalogEntry> {
    let entry = build(name, params)?;
    let report = entry.check()?;
    if report.verdict != entry.expected {
        return Err(Error::SelfTest {
            name: entry.name.clone(),
            detail: format!(
                "expected {:?}, grid gives {:?} (minimum {:.3e} at ({:.4}, {:.4}))",
                entry.expected, report.verdict, report.min_value, report.argmin.x, report.argmin.y
            ),
        });
    }
    Ok(entry)
}

fn build(name: &str, params: &EntryParams) -> Result<CatalogEntry> {
    let horo_region = Region::rect(-1.0, 0.5, 1.0, 1.5);
    let entry = match name {
        "flat_lines" => {
            let working = Region::rect(-1.0, -1.0, 1.0, 1.0);
            CatalogEntry {
                name: name.into(),
                chart: ConformalChart::euclidean(),
                spray: SprayField::geodesic(),
                grid: box_grid(&working),
                working,
                expected: Verdict::Nonnegative,
                expected_min: Some(0.0),
                seed: GeodesicSeed { start: Point::new(-0.5, -0.5), theta: 0.7, length: 1.2 },
                notes: "Euclidean plane, straight lines".into(),
            }
        }
        "horocycles" => CatalogEntry {
            name: name.into(),
            chart: ConformalChart::upper_half_plane(),
            spray: SprayField::constant(1.0),
            grid: box_grid(&horo_region),
            working: horo_region,
            expected: Verdict::Nonnegative,
            expected_min: Some(0.0),
            seed: GeodesicSeed { start: Point::new(-0.6, 1.0), theta: 0.0, length: 1.0 },
            notes: "hyperbolic half-plane, unit-speed horocycles (curvature 1)".into(),
        },
        "norwich" => {
            let working = Region::Annulus { cx: 0.0, cy: 0.0, r_inner: 0.05, r_outer: 2.0 };
            CatalogEntry {
                name: name.into(),
                chart: ConformalChart::punctured_plane(),
                spray: SprayField::magnetic(ScalarField::InverseRadius),
                grid: box_grid(&working),
                working,
                expected: Verdict::Nonnegative,
                expected_min: Some(0.0),
                seed: GeodesicSeed { start: Point::new(1.0, 0.0), theta: -FRAC_PI_2, length: 1.0 },
                notes: "punctured plane, curvature 1/r (spirals through the closed form)".into(),
            }
        }
        "seiffert" => {
            let working = Region::Annulus { cx: 0.0, cy: 0.0, r_inner: 0.2, r_outer: 3.0 };
            CatalogEntry {
                name: name.into(),
                chart: ConformalChart::stereographic_sphere(),
                spray: SprayField::magnetic(ScalarField::StereoHeight),
                grid: GridSpec::polar(Point::new(0.0, 0.0), &linspace(0.2, 3.0, 64), 64).with_angles(DEFAULT_ANGLES),
                working,
                expected: Verdict::Nonnegative,
                expected_min: Some(0.0),
                seed: GeodesicSeed { start: Point::new(0.5, 0.0), theta: FRAC_PI_2, length: 1.5 },
                notes: "unit sphere seen stereographically, curvature equal to the height".into(),
            }
        }
        "circular_arcs" => {
            let r = positive("disc radius", params.disc_radius.unwrap_or(0.5))?;
            let big_r = positive("arc radius", params.arc_radius.unwrap_or(1.0))?;
            let working = Region::disc(0.0, 0.0, 0.95 * r);
            CatalogEntry {
                name: name.into(),
                chart: ConformalChart::euclidean_disc(r),
                spray: SprayField::constant(1.0 / big_r),
                grid: box_grid(&working),
                working,
                expected: Verdict::Nonnegative,
                expected_min: Some(1.0 / (big_r * big_r)),
                seed: GeodesicSeed { start: Point::new(-0.5 * r, -0.2 * r), theta: 0.0, length: 0.9 * r },
                notes: format!("Euclidean disc of radius {r}, arcs of radius {big_r}"),
            }
        }
        "cotK" => {
            let k = params.curvature.unwrap_or(0.0);
            let source = params.potential.clone().unwrap_or_else(|| "x + 2".into());
            let f = ScalarField::parse(&source, 1e-5)?;
            let chart = ConformalChart::constant_curvature(k);
            let working = Region::disc(0.0, 0.0, 0.5);
            let grid = box_grid(&working);
            // f 1-Lipschitz for g is equivalent to the condition
            let mut lipschitz = true;
            for &p in &grid.points {
                let (fx, fy) = f.grad(p.x, p.y);
                let v = f.value(p.x, p.y);
                if !crate::field::cot_k(k, v).map(f64::is_finite).unwrap_or(false) {
                    return Err(Error::InvalidArgument(format!(
                        "cot_K(f) is singular in the working region near ({}, {})",
                        p.x, p.y
                    )));
                }
                if (-chart.psi(p)).exp() * fx.hypot(fy) > 1.0 + 1e-9 {
                    lipschitz = false;
                }
            }
            CatalogEntry {
                name: name.into(),
                spray: SprayField::magnetic(ScalarField::CotK { k, inner: Box::new(f) }),
                chart,
                grid,
                working,
                expected: if lipschitz { Verdict::Nonnegative } else { Verdict::Negative },
                expected_min: None,
                seed: GeodesicSeed { start: Point::new(-0.3, 0.0), theta: 0.4, length: 0.6 },
                notes: format!("constant curvature {k}, curvature cot_K({source})"),
            }
        }
        "hyperbolic_geodesics" => CatalogEntry {
            name: name.into(),
            chart: ConformalChart::upper_half_plane(),
            spray: SprayField::geodesic(),
            grid: box_grid(&horo_region),
            working: horo_region,
            expected: Verdict::Negative,
            expected_min: Some(-1.0),
            seed: GeodesicSeed { start: Point::new(-0.6, 1.0), theta: 0.0, length: 1.2 },
            notes: "hyperbolic half-plane, geodesics; violates the condition".into(),
        },
        "kappa_3x" => {
            let working = Region::rect(-1.0, -1.0, 1.0, 1.0);
            CatalogEntry {
                name: name.into(),
                chart: ConformalChart::euclidean(),
                spray: SprayField::magnetic(ScalarField::Affine { c: 0.0, a: 3.0, b: 0.0 }),
                grid: box_grid(&working),
                working,
                expected: Verdict::Negative,
                expected_min: Some(-3.0),
                seed: GeodesicSeed { start: Point::new(0.0, 0.5), theta: -FRAC_PI_2, length: 1.0 },
                notes: "Euclidean plane, curvature 3x; violates the condition near x = 0".into(),
            }
        }
        other => return Err(Error::UnknownEntry(other.into())),
    };
    entry.working.validate(&entry.chart)?;
    Ok(entry)
}

/// `a(t² + 1)·e^{i(t − 2 arctan t + b)}` as a chart point.
pub fn norwich_closed_form(a: f64, b: f64, t: f64) -> Point {
    let m = a * (t * t + 1.0);
    let arg = t - 2.0 * t.atan() + b;
    Point::new(m * arg.cos(), m * arg.sin())
}

/// g-arclength of the closed form from `0` to `t`.
pub fn norwich_arclength(a: f64, t: f64) -> f64 {
    a * (t * t * t / 3.0 + t)
}
