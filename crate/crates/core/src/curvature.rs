//! The curvature scalar `Q` and the nonnegativity and CD(0, N) conditions.
//!
//! Frame derivatives are evaluated in the chart: `Vk = ∂k/∂θ`, `Γ(u)` is the
//! derivative of `u` along the spray flow, `E₁u` the derivative along the
//! geodesic flow and `E₂k = ∂θ(E₁k) − E₁(∂θk)`. For magnetic sprays
//! `E₂k = dκ(v⊥)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spray::{geodesic_rates, SprayField};
use crate::surface::{ConformalChart, Point};

/// Flow-time step for `Γ` and `E₁` differences.
pub const FLOW_STEP: f64 = 1e-4;
/// Angle step for `∂θ` differences.
pub const ANGLE_STEP: f64 = 1e-4;
/// Nonnegativity tolerance.
pub const NONNEG_TOL: f64 = 1e-6;
/// Largest admissible `|Vk − 2dφ|` for a magnetic verdict.
pub const MAGNETIC_TOL: f64 = 1e-8;
pub const DEFAULT_ANGLES: usize = 16;

/// Points at which a condition is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub points: Vec<Point>,
    pub n_angles: usize,
}

impl GridSpec {
    /// `nx × ny` points including the corners of the box.
    pub fn cartesian(x0: f64, y0: f64, x1: f64, y1: f64, nx: usize, ny: usize) -> GridSpec {
        let mut points = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let fx = if nx > 1 { i as f64 / (nx - 1) as f64 } else { 0.5 };
                let fy = if ny > 1 { j as f64 / (ny - 1) as f64 } else { 0.5 };
                points.push(Point::new(x0 + (x1 - x0) * fx, y0 + (y1 - y0) * fy));
            }
        }
        GridSpec { points, n_angles: DEFAULT_ANGLES }
    }

    /// Circles of the given radii, `n_theta` points each.
    pub fn polar(center: Point, radii: &[f64], n_theta: usize) -> GridSpec {
        let mut points = Vec::with_capacity(radii.len() * n_theta);
        for &r in radii {
            for k in 0..n_theta {
                let a = 2.0 * PI * k as f64 / n_theta as f64;
                points.push(Point::new(center.x + r * a.cos(), center.y + r * a.sin()));
            }
        }
        GridSpec { points, n_angles: DEFAULT_ANGLES }
    }

    pub fn from_points(points: Vec<Point>) -> GridSpec {
        GridSpec { points, n_angles: DEFAULT_ANGLES }
    }

    pub fn filtered(mut self, keep: impl Fn(Point) -> bool) -> GridSpec {
        self.points.retain(|p| keep(*p));
        self
    }

    pub fn with_angles(mut self, n: usize) -> GridSpec {
        self.n_angles = n;
        self
    }
}

fn angles(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| 2.0 * PI * i as f64 / n as f64)
}

/// Spread of `k` over `n_angles` directions at `p`.
pub fn magnetic_defect(chart: &ConformalChart, spray: &SprayField, p: Point, n_angles: usize) -> Result<f64> {
    chart.require(p)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for a in angles(n_angles.max(1)) {
        let k = spray.k(p.x, p.y, a);
        lo = lo.min(k);
        hi = hi.max(k);
    }
    Ok(hi - lo)
}

/// One classical RK4 step of the unit-speed flow (two half steps).
fn flow(chart: &ConformalChart, spray: &SprayField, s: [f64; 3], h: f64) -> Option<[f64; 3]> {
    let mut s = s;
    let hh = h / 2.0;
    for _ in 0..2 {
        let k1 = geodesic_rates(chart, spray, s[0], s[1], s[2])?;
        let k2 = geodesic_rates(chart, spray, s[0] + 0.5 * hh * k1[0], s[1] + 0.5 * hh * k1[1], s[2] + 0.5 * hh * k1[2])?;
        let k3 = geodesic_rates(chart, spray, s[0] + 0.5 * hh * k2[0], s[1] + 0.5 * hh * k2[1], s[2] + 0.5 * hh * k2[2])?;
        let k4 = geodesic_rates(chart, spray, s[0] + hh * k3[0], s[1] + hh * k3[1], s[2] + hh * k3[2])?;
        for i in 0..3 {
            s[i] += hh / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Some(s)
}

fn stencil_error(p: Point) -> Error {
    Error::InvalidArgument(format!("difference stencil at ({}, {}) leaves the domain", p.x, p.y))
}

/// `dφ(v)` for the unit vector with angle `theta`.
pub fn dphi(chart: &ConformalChart, p: Point, theta: f64) -> f64 {
    let (fx, fy) = chart.phi_grad(p);
    (-chart.psi(p)).exp() * (fx * theta.cos() + fy * theta.sin())
}

/// `Γ(dφ)`: derivative of `dφ(γ̇)` along the spray flow.
pub fn spray_derivative_of_dphi(chart: &ConformalChart, spray: &SprayField, p: Point, theta: f64) -> Result<f64> {
    if chart.phi_field().is_constant() {
        return Ok(0.0);
    }
    let s = [p.x, p.y, theta];
    let fwd = flow(chart, spray, s, FLOW_STEP).ok_or_else(|| stencil_error(p))?;
    let bwd = flow(chart, spray, s, -FLOW_STEP).ok_or_else(|| stencil_error(p))?;
    let f = dphi(chart, Point::new(fwd[0], fwd[1]), fwd[2]);
    let b = dphi(chart, Point::new(bwd[0], bwd[1]), bwd[2]);
    Ok((f - b) / (2.0 * FLOW_STEP))
}

/// `E₂k` by nested central differences along the geodesic flow and in angle.
pub fn e2k_finite_difference(chart: &ConformalChart, spray: &SprayField, p: Point, theta: f64) -> Result<f64> {
    let geo = SprayField::geodesic();
    let e1 = |th: f64, u: &dyn Fn(f64, f64, f64) -> f64| -> Result<f64> {
        let s = [p.x, p.y, th];
        let f = flow(chart, &geo, s, FLOW_STEP).ok_or_else(|| stencil_error(p))?;
        let b = flow(chart, &geo, s, -FLOW_STEP).ok_or_else(|| stencil_error(p))?;
        Ok((u(f[0], f[1], f[2]) - u(b[0], b[1], b[2])) / (2.0 * FLOW_STEP))
    };
    let k = |x: f64, y: f64, t: f64| spray.k(x, y, t);
    let kt = |x: f64, y: f64, t: f64| spray.k_theta(x, y, t);
    let d_theta_e1k = (e1(theta + ANGLE_STEP, &k)? - e1(theta - ANGLE_STEP, &k)?) / (2.0 * ANGLE_STEP);
    let e1_kt = if spray.is_magnetic() { 0.0 } else { e1(theta, &kt)? };
    Ok(d_theta_e1k - e1_kt)
}

/// `E₂k`: closed form `dκ(v⊥)` for magnetic sprays, differences otherwise.
pub fn e2k(chart: &ConformalChart, spray: &SprayField, p: Point, theta: f64) -> Result<f64> {
    match spray.kappa_grad(p) {
        Some((kx, ky)) => Ok((-chart.psi(p)).exp() * (-theta.sin() * kx + theta.cos() * ky)),
        None => e2k_finite_difference(chart, spray, p, theta),
    }
}

/// `Q = K + k² + Γ(dφ) − (dφ)² − E₂k` at the unit vector with angle `theta`.
pub fn q_scalar(chart: &ConformalChart, spray: &SprayField, p: Point, theta: f64) -> Result<f64> {
    let k_gauss = chart.gauss_curvature(p)?;
    let k = spray.k(p.x, p.y, theta);
    let g = spray_derivative_of_dphi(chart, spray, p, theta)?;
    let d = dphi(chart, p, theta);
    Ok(k_gauss + k * k + g - d * d - e2k(chart, spray, p, theta)?)
}

/// `Vk − 2dφ(v)`: vanishes iff the spray is magnetic for the metric `e^{−4φ}g`.
pub fn compatibility(chart: &ConformalChart, spray: &SprayField, p: Point, theta: f64) -> f64 {
    spray.k_theta(p.x, p.y, theta) - 2.0 * dphi(chart, p, theta)
}

/// Value of the CD(0, N) display at one unit vector.
pub fn cd0n_value(chart: &ConformalChart, spray: &SprayField, p: Point, theta: f64, n: f64) -> Result<f64> {
    let k_gauss = chart.gauss_curvature(p)?;
    let k = spray.k(p.x, p.y, theta);
    let g = spray_derivative_of_dphi(chart, spray, p, theta)?;
    let d = dphi(chart, p, theta);
    let vk = spray.k_theta(p.x, p.y, theta);
    let a = (n - 1.0) * vk - 2.0 * d;
    Ok(k_gauss + k * k + g - e2k(chart, spray, p, theta)? - a * a / (4.0 * (n - 1.0) * (n - 2.0)) - d * d / (n - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Nonnegative,
    Negative,
    /// The magnetic part of the condition fails before the sign is considered.
    NotMagnetic,
}

impl Verdict {
    pub fn holds(self) -> bool {
        self == Verdict::Nonnegative
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureReport {
    /// Name of the evaluated condition.
    pub condition: String,
    /// Per point: minimum over directions of the condition value.
    pub values: Vec<(Point, f64)>,
    pub min_value: f64,
    pub argmin: Point,
    /// Direction at which the minimum is attained.
    pub argmin_theta: f64,
    /// Largest spread of `k` over directions at a grid point.
    pub magnetic_defect: f64,
    /// Largest `|Vk − 2dφ(v)|` over grid points and directions.
    pub compatibility_defect: f64,
    pub tolerance: f64,
    pub n_angles: usize,
    pub verdict: Verdict,
}

fn summarize(condition: String, rows: Vec<(Point, f64, f64)>, magnetic: f64, compat: f64, n_angles: usize, require_magnetic: bool) -> Result<CurvatureReport> {
    if rows.is_empty() {
        return Err(Error::Empty("curvature grid".into()));
    }
    // Exact ties go to the point nearest the grid centroid.
    let n = rows.len() as f64;
    let cx = rows.iter().map(|r| r.0.x).sum::<f64>() / n;
    let cy = rows.iter().map(|r| r.0.y).sum::<f64>() / n;
    let centroid = Point::new(cx, cy);
    let (mut argmin, mut min_value, mut argmin_theta) = (rows[0].0, rows[0].1, rows[0].2);
    for &(p, v, th) in &rows {
        if v < min_value || (v == min_value && p.dist(centroid) < argmin.dist(centroid)) {
            min_value = v;
            argmin = p;
            argmin_theta = th;
        }
    }
    let verdict = if require_magnetic && compat > MAGNETIC_TOL {
        Verdict::NotMagnetic
    } else if min_value >= -NONNEG_TOL {
        Verdict::Nonnegative
    } else {
        Verdict::Negative
    };
    Ok(CurvatureReport {
        condition,
        values: rows.into_iter().map(|(p, v, _)| (p, v)).collect(),
        min_value,
        argmin,
        argmin_theta,
        magnetic_defect: magnetic,
        compatibility_defect: compat,
        tolerance: NONNEG_TOL,
        n_angles,
        verdict,
    })
}

/// Evaluates the nonnegativity condition over the grid. For magnetic sprays on
/// unweighted charts the value is `K + κ² − |∇κ|_g` exactly; otherwise it is
/// the minimum of `Q` over the sampled directions.
pub fn check_nnc(chart: &ConformalChart, spray: &SprayField, grid: &GridSpec) -> Result<CurvatureReport> {
    let n = grid.n_angles.max(1);
    let mut rows = Vec::with_capacity(grid.points.len());
    let mut magnetic = 0.0f64;
    let mut compat = 0.0f64;
    let closed_form = spray.is_magnetic() && chart.unweighted();
    for &p in &grid.points {
        chart.require(p)?;
        magnetic = magnetic.max(magnetic_defect(chart, spray, p, n)?);
        for a in angles(n) {
            compat = compat.max(compatibility(chart, spray, p, a).abs());
        }
        if closed_form {
            let kappa = spray.kappa(p).expect("magnetic");
            let (gx, gy) = spray.kappa_grad(p).expect("magnetic");
            let grad = (-chart.psi(p)).exp() * gx.hypot(gy);
            let value = chart.gauss_curvature(p)? + kappa * kappa - grad;
            // E₂k = dκ(v⊥) is largest when v⊥ points along ∇κ.
            let theta = gx.atan2(-gy);
            rows.push((p, value, theta));
        } else {
            let mut best = (f64::INFINITY, 0.0);
            for a in angles(n) {
                let q = q_scalar(chart, spray, p, a)?;
                if q < best.0 {
                    best = (q, a);
                }
            }
            rows.push((p, best.0, best.1));
        }
    }
    summarize("K + k^2 + Γ(dφ) − (dφ)^2 − E₂k".into(), rows, magnetic, compat, n, true)
}

/// Evaluates the CD(0, N) condition (`N > 2`) over the grid.
pub fn check_cd0n(chart: &ConformalChart, spray: &SprayField, big_n: f64, grid: &GridSpec) -> Result<CurvatureReport> {
    if !(big_n > 2.0) {
        return Err(Error::InvalidArgument(format!("CD(0, N) needs N > 2, got {big_n}")));
    }
    let n = grid.n_angles.max(1);
    let mut rows = Vec::with_capacity(grid.points.len());
    let mut magnetic = 0.0f64;
    let mut compat = 0.0f64;
    for &p in &grid.points {
        chart.require(p)?;
        magnetic = magnetic.max(magnetic_defect(chart, spray, p, n)?);
        let mut best = (f64::INFINITY, 0.0);
        for a in angles(n) {
            compat = compat.max(compatibility(chart, spray, p, a).abs());
            let v = cd0n_value(chart, spray, p, a, big_n)?;
            if v < best.0 {
                best = (v, a);
            }
        }
        rows.push((p, best.0, best.1));
    }
    summarize(format!("CD(0, {big_n})"), rows, magnetic, compat, n, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;

    fn disc_grid(r: f64, n: usize) -> GridSpec {
        GridSpec::cartesian(-r, -r, r, r, n, n).filtered(move |p| p.x * p.x + p.y * p.y <= r * r * (1.0 + 1e-12))
    }

    #[test]
    fn defect_examples() {
        let e = ConformalChart::euclidean();
        let p = Point::new(0.3, -0.4);
        let s = SprayField::from_k_expression("x", 1e-5).unwrap();
        assert_eq!(magnetic_defect(&e, &s, p, 16).unwrap(), 0.0);
        let s = SprayField::from_k_expression("cos(theta)", 1e-5).unwrap();
        assert!((magnetic_defect(&e, &s, p, 16).unwrap() - 2.0).abs() < 1e-12);
        let h = ConformalChart::upper_half_plane();
        assert_eq!(magnetic_defect(&h, &SprayField::constant(1.0), Point::new(0.0, 1.0), 16).unwrap(), 0.0);
    }

    #[test]
    fn q_examples() {
        let e = ConformalChart::euclidean();
        assert_eq!(q_scalar(&e, &SprayField::geodesic(), Point::new(0.2, 0.1), 0.7).unwrap(), 0.0);
        let s = ConformalChart::stereographic_sphere();
        let h = ConformalChart::upper_half_plane();
        for &(x, y, th) in &[(0.3, 0.5, 0.1), (-1.2, 0.7, 2.0), (0.0, 2.0, -1.0)] {
            assert!((q_scalar(&s, &SprayField::geodesic(), Point::new(x, y), th).unwrap() - 1.0).abs() < 1e-12);
            assert!(q_scalar(&h, &SprayField::constant(1.0), Point::new(x, y), th).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn nnc_examples() {
        let arcs = ConformalChart::euclidean_disc(0.5);
        let r = check_nnc(&arcs, &SprayField::constant(0.5), &disc_grid(0.475, 65)).unwrap();
        assert!((r.min_value - 0.25).abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::Nonnegative);

        let e = ConformalChart::euclidean();
        let k3 = SprayField::magnetic(ScalarField::Affine { c: 0.0, a: 3.0, b: 0.0 });
        let r = check_nnc(&e, &k3, &disc_grid(1.0, 65)).unwrap();
        assert!((r.min_value + 3.0).abs() < 1e-12);
        assert!(r.argmin.x.abs() < 1e-12 && r.argmin.y.abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::Negative);
        for (p, v) in &r.values {
            assert!((v - (9.0 * p.x * p.x - 3.0)).abs() < 1e-12);
        }

        let h = ConformalChart::upper_half_plane();
        let grid = GridSpec::cartesian(-0.6, 0.4, 0.6, 1.6, 33, 33);
        let r = check_nnc(&h, &SprayField::constant(1.0), &grid).unwrap();
        assert!(r.min_value.abs() < 1e-10);
        assert_eq!(r.verdict, Verdict::Nonnegative);
    }

    #[test]
    fn directional_law_is_not_magnetic() {
        let e = ConformalChart::euclidean();
        let s = SprayField::from_k_expression("1 + 0.5*cos(theta)", 1e-5).unwrap();
        let r = check_nnc(&e, &s, &disc_grid(0.5, 9)).unwrap();
        assert_eq!(r.verdict, Verdict::NotMagnetic);
        assert!((r.magnetic_defect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn e2k_difference_matches_closed_form() {
        let e = ConformalChart::euclidean();
        let s = SprayField::magnetic(ScalarField::parse("sin(x) * y + x^2", 1e-5).unwrap());
        let d = ConformalChart::poincare_disk();
        let sd = SprayField::magnetic(ScalarField::StereoHeight);
        for &(x, y, th) in &[(0.1, 0.2, 0.3), (-0.4, 0.3, 2.5), (0.2, -0.5, -1.1)] {
            let p = Point::new(x, y);
            let a = e2k(&e, &s, p, th).unwrap();
            let b = e2k_finite_difference(&e, &s, p, th).unwrap();
            assert!((a - b).abs() < 1e-5, "{a} {b}");
            let a = e2k(&d, &sd, p, th).unwrap();
            let b = e2k_finite_difference(&d, &sd, p, th).unwrap();
            assert!((a - b).abs() < 1e-5, "{a} {b}");
        }
    }

    #[test]
    fn cd0n_examples() {
        let e = ConformalChart::euclidean();
        let r = check_cd0n(&e, &SprayField::geodesic(), 5.0, &disc_grid(1.0, 9)).unwrap();
        assert_eq!(r.min_value, 0.0);
        assert!(r.verdict.holds());

        let w = ConformalChart::euclidean().with_weight(ScalarField::HalfSquaredRadius { scale: 1.0 });
        let grid = disc_grid(1.0, 65);
        let r = check_cd0n(&w, &SprayField::geodesic(), 3.0, &grid).unwrap();
        assert!(r.min_value.abs() < 1e-7, "{}", r.min_value);
        assert!((r.argmin.x.hypot(r.argmin.y) - 1.0).abs() < 1e-12);
        for &(x, y, th) in &[(0.2f64, 0.3f64, 0.4f64), (0.5, -0.1, 2.0)] {
            let p = Point::new(x, y);
            let pv = x * th.cos() + y * th.sin();
            let v = cd0n_value(&w, &SprayField::geodesic(), p, th, 3.0).unwrap();
            assert!((v - (1.0 - pv * pv)).abs() < 1e-7);
        }

        let h = ConformalChart::upper_half_plane();
        let r = check_cd0n(&h, &SprayField::constant(1.0), 10.0, &GridSpec::cartesian(-0.5, 0.5, 0.5, 1.5, 9, 9)).unwrap();
        assert!(r.min_value.abs() < 1e-10);

        assert!(check_cd0n(&e, &SprayField::geodesic(), 2.0, &grid).is_err());
        assert!(check_cd0n(&e, &SprayField::geodesic(), 1.5, &grid).is_err());
    }
}
