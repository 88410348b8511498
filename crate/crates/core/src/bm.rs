//! Minkowski averages `𝓜(A, B; λ)`, Brunn–Minkowski checks and a search for
//! violations along geodesics where the Jacobian fails to be concave.

use crate::error::{Error, Result};
use crate::jacobi::{concavity_check, Density, jacobi_trace, needle_bm_1d, SampledDensity, Variation, DEFAULT_EPS};
use crate::sets::{measure_area, sample_region, AreaTarget, PointCloud, Provenance, Raster, Region};
use crate::spray::{integrate_with_stops, log_map_with, LogMapOptions, SprayField};
use crate::surface::{ConformalChart, Point};

/// Relative tolerance of the BM verdict.
pub const BM_TOL_REL: f64 = 0.02;
/// Largest tolerated fraction of failed shots.
pub const MAX_FAILURE_RATE: f64 = 0.01;

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("lambda must lie in (0, 1), got {lambda}")))
    }
}

fn bm_log_options(cell: f64) -> LogMapOptions {
    LogMapOptions { tol: (1e-3 * cell).min(1e-9), ode_tol: 1e-10, budget: 30, guess: None, multistart: true }
}

/// λ-points of connecting curves for every pair of the given point sets.
pub fn minkowski_average_points(
    chart: &ConformalChart,
    spray: &SprayField,
    a: &[Point],
    b: &[Point],
    lambda: f64,
) -> Result<PointCloud> {
    check_lambda(lambda)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("Minkowski average of an empty set".into()));
    }
    let mut opts = LogMapOptions::default();
    let mut points = Vec::with_capacity(a.len() * b.len());
    let mut failures = 0usize;
    for &pa in a {
        opts.guess = None;
        for &pb in b {
            match log_map_with(chart, spray, pa, pb, &opts, &[lambda]) {
                Ok(sol) => {
                    opts.guess = Some(sol.w);
                    let s = sol.probes[0];
                    points.push(Point::new(s[0], s[1]));
                }
                Err(_) => failures += 1,
            }
        }
    }
    let total = a.len() * b.len();
    if failures as f64 > MAX_FAILURE_RATE * total as f64 {
        return Err(Error::NonSimple(format!(
            "{failures} of {total} pairs could not be connected"
        )));
    }
    Ok(PointCloud { points, provenance: Provenance::MinkowskiImage { lambda }, failures })
}

/// `𝓜(A, B; λ)` from all pairs of samples of `A` and `B` at `spacing`.
pub fn minkowski_average(
    chart: &ConformalChart,
    spray: &SprayField,
    a: &Region,
    b: &Region,
    lambda: f64,
    spacing: f64,
) -> Result<PointCloud> {
    let sa = sample_region(a, spacing)?;
    let sb = sample_region(b, spacing)?;
    minkowski_average_points(chart, spray, &sa.points, &sb.points, lambda)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BmReport {
    pub lambda: f64,
    /// `1/N`.
    pub exponent: f64,
    pub mu_a: f64,
    pub mu_b: f64,
    pub mu_average: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tol_rel: f64,
    pub holds: bool,
    pub cell: f64,
    /// Lattice spacing of the swept set.
    pub spacing: f64,
    pub boundary_points: usize,
    pub shots: usize,
    pub failures: usize,
}

impl BmReport {
    pub fn relative_margin(&self) -> f64 {
        if self.rhs > 0.0 {
            self.margin / self.rhs
        } else {
            0.0
        }
    }
}

/// Sampling controls for [`verify_bm`]. Unset values are derived from the sets.
#[derive(Debug, Clone, Copy, Default)]
pub struct BmOptions {
    pub cell: Option<f64>,
    pub spacing: Option<f64>,
    pub boundary_points: Option<usize>,
}

fn size_scale(r: &Region) -> f64 {
    2.0 * r.chart_area() / r.perimeter()
}

/// Default raster cell: 1/60 of the smaller set's area-to-perimeter scale.
pub fn default_cell(a: &Region, b: &Region) -> f64 {
    size_scale(a).min(size_scale(b)) / 60.0
}

fn pairs(a: Point, b: Point, a_is_base: bool) -> (Point, Point) {
    if a_is_base {
        (a, b)
    } else {
        (b, a)
    }
}

/// Rasterizes `𝓜(A, B; λ)`. For a simple spray `b ↦ γ_{ab}(λ)` is a
/// homeomorphism, so `𝓜` is the union over swept points `a` of the filled
/// images of the other set's boundary (or the same with the roles swapped,
/// whichever gives the larger images).
fn average_raster(
    chart: &ConformalChart,
    spray: &SprayField,
    a: &Region,
    b: &Region,
    lambda: f64,
    cell: f64,
    opts: &BmOptions,
) -> Result<(Raster, f64, usize, usize, usize)> {
    let (sa, sb) = (size_scale(a), size_scale(b));
    // image size and how far images move per unit displacement of the swept point
    let (img_a_swept, move_a_swept) = (lambda * sb, 1.0 - lambda);
    let (img_b_swept, move_b_swept) = ((1.0 - lambda) * sa, lambda);
    let sweep_a = img_a_swept / move_a_swept >= img_b_swept / move_b_swept;
    let (swept, outline, img, mv) = if sweep_a {
        (a, b, img_a_swept, move_a_swept)
    } else {
        (b, a, img_b_swept, move_b_swept)
    };
    let spacing = opts.spacing.unwrap_or(0.5 * img / mv).min(0.5 * swept.diameter());
    let boundary_step = spacing.min((4.0 * img * cell).sqrt() / mv);
    let n_outline = opts.boundary_points.unwrap_or(96).max(8);

    let mut params = swept.boundary(((swept.perimeter() / boundary_step).ceil() as usize).max(8));
    let (x0, y0, x1, y1) = swept.bbox();
    let nx = ((x1 - x0) / spacing).floor() as usize;
    let ny = ((y1 - y0) / spacing).floor() as usize;
    let ox = x0 + 0.5 * ((x1 - x0) - nx as f64 * spacing);
    let oy = y0 + 0.5 * ((y1 - y0) - ny as f64 * spacing);
    for j in 0..=ny {
        for k in 0..=nx {
            // serpentine order keeps consecutive sweeps close for warm starts
            let i = if j % 2 == 0 { k } else { nx - k };
            let p = Point::new(ox + i as f64 * spacing, oy + j as f64 * spacing);
            if swept.contains(p) {
                params.push(p);
            }
        }
    }
    let outline_pts = outline.boundary(n_outline);

    let mut log_opts = bm_log_options(cell);
    let mut first_guess: Option<(f64, f64)> = None;
    let mut polygons: Vec<Vec<Point>> = Vec::with_capacity(params.len());
    let mut shots = 0usize;
    let mut failures = 0usize;
    for &p in &params {
        let mut poly = Vec::with_capacity(outline_pts.len());
        log_opts.guess = first_guess;
        for (idx, &q) in outline_pts.iter().enumerate() {
            let (from, to) = pairs(p, q, sweep_a);
            shots += 1;
            match log_map_with(chart, spray, from, to, &log_opts, &[lambda]) {
                Ok(sol) => {
                    if idx == 0 {
                        first_guess = Some(sol.w);
                    }
                    if sweep_a {
                        log_opts.guess = Some(sol.w);
                    } else {
                        log_opts.guess = None;
                    }
                    let s = sol.probes[0];
                    poly.push(Point::new(s[0], s[1]));
                }
                Err(_) => failures += 1,
            }
        }
        polygons.push(poly);
    }
    if failures as f64 > MAX_FAILURE_RATE * shots as f64 {
        return Err(Error::NonSimple(format!("{failures} of {shots} connecting curves could not be found")));
    }
    let (mut xmin, mut ymin, mut xmax, mut ymax) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in polygons.iter().flatten() {
        xmin = xmin.min(p.x);
        ymin = ymin.min(p.y);
        xmax = xmax.max(p.x);
        ymax = ymax.max(p.y);
    }
    if !xmin.is_finite() {
        return Err(Error::Empty("Minkowski average is empty".into()));
    }
    let mut raster = Raster::covering(xmin, ymin, xmax, ymax, cell);
    for poly in &polygons {
        raster.fill_polygon(poly);
    }
    Ok((raster, spacing, n_outline, shots, failures))
}

/// Measures `μ(𝓜(A, B; λ))` with the sweep construction.
pub fn average_area(
    chart: &ConformalChart,
    spray: &SprayField,
    a: &Region,
    b: &Region,
    lambda: f64,
    opts: &BmOptions,
) -> Result<f64> {
    check_lambda(lambda)?;
    let cell = opts.cell.unwrap_or_else(|| default_cell(a, b));
    let (raster, ..) = average_raster(chart, spray, a, b, lambda, cell, opts)?;
    raster.weighted_area(chart)
}

/// Both sides of `μ(𝓜)^{1/N} ≥ (1−λ)μ(A)^{1/N} + λμ(B)^{1/N}`.
pub fn verify_bm(
    chart: &ConformalChart,
    spray: &SprayField,
    a: &Region,
    b: &Region,
    lambda: f64,
    big_n: f64,
    opts: &BmOptions,
) -> Result<BmReport> {
    check_lambda(lambda)?;
    if !(big_n >= 1.0) {
        return Err(Error::InvalidArgument(format!("N must be at least 1, got {big_n}")));
    }
    a.validate(chart)?;
    b.validate(chart)?;
    let cell = opts.cell.unwrap_or_else(|| default_cell(a, b));
    if !(cell > 0.0) {
        return Err(Error::InvalidArgument("cell size must be positive".into()));
    }
    let mu_a = measure_area(chart, AreaTarget::Region(a), cell)?;
    let mu_b = measure_area(chart, AreaTarget::Region(b), cell)?;
    let (raster, spacing, boundary_points, shots, failures) = average_raster(chart, spray, a, b, lambda, cell, opts)?;
    let mu_average = raster.weighted_area(chart)?;
    let e = 1.0 / big_n;
    let lhs = mu_average.powf(e);
    let rhs = (1.0 - lambda) * mu_a.powf(e) + lambda * mu_b.powf(e);
    let margin = lhs - rhs;
    Ok(BmReport {
        lambda,
        exponent: e,
        mu_a,
        mu_b,
        mu_average,
        lhs,
        rhs,
        margin,
        tol_rel: BM_TOL_REL,
        holds: margin >= -BM_TOL_REL * rhs,
        cell,
        spacing,
        boundary_points,
        shots,
        failures,
    })
}

/// Geodesic along which violations are sought.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicSeed {
    pub start: Point,
    pub theta: f64,
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub a: Region,
    pub b: Region,
    pub lambda: f64,
    pub report: BmReport,
    pub variation: Variation,
    /// Transversal width parameter of the strips.
    pub delta: f64,
    pub x0: f64,
    pub x1: f64,
    pub l0: f64,
    pub l1: f64,
    /// Relative margin predicted by the one-dimensional needle inequality.
    pub needle_margin: f64,
}

#[derive(Debug, Clone)]
pub enum ViolationOutcome {
    Found(Box<Violation>),
    /// No concavity failure, or no configuration reached the threshold.
    None { max_second_difference: f64, best_relative_margin: Option<f64> },
    /// The evaluation budget ran out first.
    Inconclusive { evaluations: usize, best_relative_margin: f64 },
}

/// Relative margin a violation must reach.
pub const VIOLATION_THRESHOLD: f64 = -0.05;
const TRACE_POINTS: usize = 201;
const DELTA_LEVELS: usize = 6;

struct NeedleChoice {
    x0: f64,
    x1: f64,
    l0: f64,
    l1: f64,
    rel: f64,
}

/// Best pair of intervals `[x₀, x₀+ℓ₀]`, `[x₁, x₁+ℓ₁]` with `ℓ_j = c·J(x_j)`
/// for the needle inequality at `λ = 1/2` with density `J`.
fn best_needle(t: &[f64], j: &[f64]) -> Result<Option<NeedleChoice>> {
    let n = t.len();
    let len = t[n - 1];
    let density = SampledDensity::new(0.0, len, j.iter().map(|v| v.max(0.0)).collect())?;
    let jmax = j.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut best: Option<NeedleChoice> = None;
    let grid = 24;
    for i0 in 0..grid {
        for i1 in i0 + 1..grid {
            let x0 = len * i0 as f64 / grid as f64;
            let x1 = len * i1 as f64 / grid as f64;
            let (j0, j1) = (density.value(x0), density.value(x1));
            if j0 <= 1e-9 * jmax || j1 <= 1e-9 * jmax {
                continue;
            }
            for &cf in &[0.02, 0.05, 0.1, 0.2, 0.35, 0.5] {
                let c = cf * len / jmax;
                let (l0, l1) = (c * j0, c * j1);
                if x0 + l0 > x1 || x1 + l1 > len {
                    continue;
                }
                let r = needle_bm_1d(&density, &[(x0, x0 + l0)], &[(x1, x1 + l1)], 0.5)?;
                if r.rhs <= 0.0 {
                    continue;
                }
                let rel = r.margin / r.rhs;
                if best.as_ref().map_or(true, |b| rel < b.rel) {
                    best = Some(NeedleChoice { x0, x1, l0, l1, rel });
                }
            }
        }
    }
    Ok(best)
}

/// The strip `F([0, δ] × [x, x + ℓ])` of the variation family as a polygon.
fn strip(
    chart: &ConformalChart,
    spray: &SprayField,
    seed: &GeodesicSeed,
    variation: Variation,
    delta: f64,
    x: f64,
    l: f64,
) -> Result<Region> {
    let along = 48;
    let levels = 5;
    let stops: Vec<f64> = (0..=along).map(|i| x + l * i as f64 / along as f64).collect();
    let e = (-chart.psi(seed.start)).exp();
    let (sn, cs) = seed.theta.sin_cos();
    let mut curves: Vec<Vec<Point>> = Vec::with_capacity(levels);
    for k in 0..levels {
        let s = delta * k as f64 / (levels - 1) as f64;
        let off = s * variation.normal * e;
        let p = Point::new(seed.start.x - sn * off, seed.start.y + cs * off);
        let traj = integrate_with_stops(chart, spray, p, seed.theta + s * variation.angle, x + l, 1e-11, &stops)?;
        if traj.exited() {
            return Err(Error::DomainExit { t: traj.reached() });
        }
        let pts = stops
            .iter()
            .map(|&t| traj.at(t).map(|s| s.point()).ok_or(Error::DomainExit { t }))
            .collect::<Result<Vec<_>>>()?;
        curves.push(pts);
    }
    let mut poly = curves[0].clone();
    for c in curves.iter().take(levels - 1).skip(1) {
        poly.push(c[along]);
    }
    poly.extend(curves[levels - 1].iter().rev().copied());
    for c in curves.iter().take(levels - 1).skip(1).rev() {
        poly.push(c[0]);
    }
    // a radial family shares its first point
    poly.dedup_by(|p, q| p.dist(*q) < 1e-14);
    if poly.len() > 1 && poly[0].dist(*poly.last().unwrap()) < 1e-14 {
        poly.pop();
    }
    Ok(Region::Polygon(poly))
}

/// Searches for thin strips `A`, `B` along the seed geodesic violating the BM
/// inequality (`λ = 1/2`, `N = 2`) by more than 5%. `budget` caps the number
/// of two-dimensional BM evaluations.
pub fn find_violation(
    chart: &ConformalChart,
    spray: &SprayField,
    seed: &GeodesicSeed,
    budget: usize,
) -> Result<ViolationOutcome> {
    chart.require(seed.start)?;
    if !(seed.length > 0.0) {
        return Err(Error::InvalidArgument("seed length must be positive".into()));
    }
    let mut max_second = f64::NEG_INFINITY;
    let mut candidates = Vec::new();
    for variation in [Variation::NORMAL, Variation::RADIAL] {
        let trace = jacobi_trace(chart, spray, seed.start, seed.theta, seed.length, variation, DEFAULT_EPS, TRACE_POINTS)?;
        let conc = concavity_check(&trace)?;
        max_second = max_second.max(conc.max_second_difference);
        if conc.concave {
            continue;
        }
        if let Some(choice) = best_needle(&trace.t, &trace.j)? {
            if choice.rel < 0.0 {
                candidates.push((variation, choice));
            }
        }
    }
    if candidates.is_empty() {
        return Ok(ViolationOutcome::None { max_second_difference: max_second, best_relative_margin: None });
    }
    candidates.sort_by(|a, b| a.1.rel.partial_cmp(&b.1.rel).unwrap());
    let mut evaluations = 0usize;
    let mut best_rel = f64::INFINITY;
    for (variation, choice) in &candidates {
        let len = seed.length;
        // strips start with aspect ratio about 8 and thin out geometrically
        let trace = jacobi_trace(chart, spray, seed.start, seed.theta, len, *variation, DEFAULT_EPS, TRACE_POINTS)?;
        let j0 = SampledDensity::new(0.0, len, trace.j.iter().map(|v| v.max(0.0)).collect())?.value(choice.x0);
        let mut delta = 0.125 * choice.l0 / j0;
        for _ in 0..DELTA_LEVELS {
            if evaluations >= budget {
                return Ok(ViolationOutcome::Inconclusive { evaluations, best_relative_margin: best_rel });
            }
            evaluations += 1;
            let a = strip(chart, spray, seed, *variation, delta, choice.x0, choice.l0);
            let b = strip(chart, spray, seed, *variation, delta, choice.x1, choice.l1);
            let (a, b) = match (a, b) {
                (Ok(a), Ok(b)) => (a, b),
                _ => {
                    delta *= 0.5;
                    continue;
                }
            };
            match verify_bm(chart, spray, &a, &b, 0.5, 2.0, &BmOptions::default()) {
                Ok(report) => {
                    let rel = report.relative_margin();
                    best_rel = best_rel.min(rel);
                    if rel < VIOLATION_THRESHOLD {
                        return Ok(ViolationOutcome::Found(Box::new(Violation {
                            a,
                            b,
                            lambda: 0.5,
                            report,
                            variation: *variation,
                            delta,
                            x0: choice.x0,
                            x1: choice.x1,
                            l0: choice.l0,
                            l1: choice.l1,
                            needle_margin: choice.rel,
                        })));
                    }
                }
                Err(Error::NonSimple(_)) | Err(Error::InvalidArgument(_)) => {}
                Err(e) => return Err(e),
            }
            delta *= 0.5;
        }
    }
    Ok(ViolationOutcome::None {
        max_second_difference: max_second,
        best_relative_margin: if best_rel.is_finite() { Some(best_rel) } else { None },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_single_pair() {
        let e = ConformalChart::euclidean();
        let c = minkowski_average_points(&e, &SprayField::geodesic(), &[Point::new(0.0, 0.0)], &[Point::new(1.0, 0.0)], 0.3).unwrap();
        assert_eq!(c.points.len(), 1);
        assert!((c.points[0].x - 0.3).abs() < 1e-9 && c.points[0].y.abs() < 1e-9);
    }

    #[test]
    fn half_circle_midpoint() {
        let e = ConformalChart::euclidean();
        let c = minkowski_average_points(&e, &SprayField::constant(1.0), &[Point::new(0.0, 0.0)], &[Point::new(0.0, 2.0)], 0.5).unwrap();
        assert!((c.points[0].x - 1.0).abs() < 1e-4 && (c.points[0].y - 1.0).abs() < 1e-4, "{:?}", c.points);
    }

    #[test]
    fn flat_squares_cloud_covers_middle_square() {
        let e = ConformalChart::euclidean();
        let a = Region::rect(0.0, 0.0, 1.0, 1.0);
        let b = Region::rect(2.0, 0.0, 3.0, 1.0);
        let cloud = minkowski_average(&e, &SprayField::geodesic(), &a, &b, 0.5, 0.25).unwrap();
        for p in &cloud.points {
            assert!(p.x >= 1.0 - 1e-9 && p.x <= 2.0 + 1e-9 && p.y >= -1e-9 && p.y <= 1.0 + 1e-9);
        }
        assert!(cloud.points.iter().any(|p| (p.x - 1.0).abs() < 1e-9 && p.y.abs() < 1e-9));
        assert!(cloud.points.iter().any(|p| (p.x - 2.0).abs() < 1e-9 && (p.y - 1.0).abs() < 1e-9));
    }

    #[test]
    fn flat_identity_and_translate() {
        let e = ConformalChart::euclidean();
        let sq = Region::rect(0.0, 0.0, 1.0, 1.0);
        for lambda in [0.25, 0.5, 0.75] {
            let r = verify_bm(&e, &SprayField::geodesic(), &sq, &sq, lambda, 2.0, &BmOptions::default()).unwrap();
            assert!(r.margin.abs() <= 0.02 * r.rhs, "{r:?}");
        }
        let b = Region::rect(2.0, 0.0, 3.0, 1.0);
        let r = verify_bm(&e, &SprayField::geodesic(), &sq, &b, 0.5, 2.0, &BmOptions::default()).unwrap();
        for mu in [r.mu_a, r.mu_b, r.mu_average] {
            assert!((mu - 1.0).abs() < 0.02, "{r:?}");
        }
        assert!(r.margin.abs() <= 0.02 * r.rhs);
    }

    #[test]
    fn lambda_bounds() {
        let e = ConformalChart::euclidean();
        let sq = Region::rect(0.0, 0.0, 1.0, 1.0);
        assert!(verify_bm(&e, &SprayField::geodesic(), &sq, &sq, 0.0, 2.0, &BmOptions::default()).is_err());
        assert!(verify_bm(&e, &SprayField::geodesic(), &sq, &sq, 1.0, 2.0, &BmOptions::default()).is_err());
    }

    #[test]
    fn flat_spray_has_no_violation() {
        let e = ConformalChart::euclidean();
        let seed = GeodesicSeed { start: Point::new(0.0, 0.0), theta: 0.3, length: 1.0 };
        match find_violation(&e, &SprayField::geodesic(), &seed, 6).unwrap() {
            ViolationOutcome::None { .. } => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
