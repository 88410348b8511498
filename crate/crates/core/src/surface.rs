//! Surfaces given by a single conformal chart: `g = e^{2ψ}(dx² + dy²)` with an
//! optional weight `φ`, so the reference area form is `e^{2ψ−φ} dx dy`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// A point in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Point {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(self.x + t * (other.x - self.x), self.y + t * (other.y - self.y))
    }
}

/// A tangent vector: base point plus chart components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVec {
    pub base: Point,
    pub u: f64,
    pub v: f64,
}

impl TangentVec {
    pub const fn new(base: Point, u: f64, v: f64) -> TangentVec {
        TangentVec { base, u, v }
    }

    pub fn scale(self, s: f64) -> TangentVec {
        TangentVec::new(self.base, self.u * s, self.v * s)
    }

    pub fn is_zero(&self) -> bool {
        self.u == 0.0 && self.v == 0.0
    }
}

/// Open chart domain. Membership is strict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Plane,
    Disc { cx: f64, cy: f64, r: f64 },
    UpperHalfPlane,
    PuncturedPlane,
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
}

impl Domain {
    pub fn contains(&self, p: Point) -> bool {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return false;
        }
        match *self {
            Domain::Plane => true,
            Domain::Disc { cx, cy, r } => (p.x - cx).powi(2) + (p.y - cy).powi(2) < r * r,
            Domain::UpperHalfPlane => p.y > 0.0,
            Domain::PuncturedPlane => p.x != 0.0 || p.y != 0.0,
            Domain::Rect { x0, y0, x1, y1 } => p.x > x0 && p.x < x1 && p.y > y0 && p.y < y1,
        }
    }

    /// Bounding box `(xmin, ymin, xmax, ymax)` when the domain is bounded.
    pub fn bbox(&self) -> Option<(f64, f64, f64, f64)> {
        match *self {
            Domain::Disc { cx, cy, r } => Some((cx - r, cy - r, cx + r, cy + r)),
            Domain::Rect { x0, y0, x1, y1 } => Some((x0, y0, x1, y1)),
            _ => None,
        }
    }

    /// A bounded box used for sampling checks and default difference steps.
    pub fn working_box(&self) -> (f64, f64, f64, f64) {
        match *self {
            Domain::UpperHalfPlane => (-10.0, 0.0, 10.0, 10.0),
            _ => self.bbox().unwrap_or((-10.0, -10.0, 10.0, 10.0)),
        }
    }

    /// Central-difference step for expression fields: `1e−5 × box diameter`.
    pub fn difference_step(&self) -> f64 {
        let (x0, y0, x1, y1) = self.working_box();
        1e-5 * (x1 - x0).hypot(y1 - y0)
    }
}

/// A conformal chart with optional weight.
#[derive(Debug, Clone)]
pub struct ConformalChart {
    name: String,
    domain: Domain,
    psi: ScalarField,
    phi: ScalarField,
    known_curvature: Option<f64>,
}

impl ConformalChart {
    /// Builds a chart, checking that ψ and its derivatives are finite on a 32×32
    /// sampling grid of the domain.
    pub fn new(name: impl Into<String>, domain: Domain, psi: ScalarField) -> Result<ConformalChart> {
        let chart = ConformalChart {
            name: name.into(),
            domain,
            psi,
            phi: ScalarField::Constant(0.0),
            known_curvature: None,
        };
        chart.check_finite()?;
        Ok(chart)
    }

    fn builtin(name: &str, domain: Domain, psi: ScalarField, k: f64) -> ConformalChart {
        ConformalChart {
            name: name.into(),
            domain,
            psi,
            phi: ScalarField::Constant(0.0),
            known_curvature: Some(k),
        }
    }

    /// Flat plane.
    pub fn euclidean() -> ConformalChart {
        Self::builtin("euclidean", Domain::Plane, ScalarField::Constant(0.0), 0.0)
    }

    /// Flat plane with the origin removed.
    pub fn punctured_plane() -> ConformalChart {
        Self::builtin("punctured_plane", Domain::PuncturedPlane, ScalarField::Constant(0.0), 0.0)
    }

    /// Euclidean disc domain of radius `r` centered at the origin.
    pub fn euclidean_disc(r: f64) -> ConformalChart {
        Self::builtin(
            "euclidean_disc",
            Domain::Disc { cx: 0.0, cy: 0.0, r },
            ScalarField::Constant(0.0),
            0.0,
        )
    }

    /// Disk model of the hyperbolic plane, curvature −1.
    pub fn poincare_disk() -> ConformalChart {
        Self::hyperbolic_disk(-1.0)
    }

    /// Disk model with curvature `k < 0`.
    pub fn hyperbolic_disk(k: f64) -> ConformalChart {
        Self::builtin(
            "poincare_disk",
            Domain::Disc { cx: 0.0, cy: 0.0, r: 1.0 },
            ScalarField::PoincareConformal { a: (-k).sqrt() },
            k,
        )
    }

    /// Half-plane model, curvature −1.
    pub fn upper_half_plane() -> ConformalChart {
        Self::builtin(
            "upper_half_plane",
            Domain::UpperHalfPlane,
            ScalarField::HalfPlaneConformal { a: 1.0 },
            -1.0,
        )
    }

    /// Stereographic chart of the unit sphere (one pole omitted).
    pub fn stereographic_sphere() -> ConformalChart {
        Self::sphere(1.0)
    }

    /// Stereographic chart of the sphere with curvature `k > 0`.
    pub fn sphere(k: f64) -> ConformalChart {
        Self::builtin(
            "stereographic_sphere",
            Domain::Plane,
            ScalarField::SphereConformal { a: k.sqrt() },
            k,
        )
    }

    /// Constant-curvature model: plane, stereographic sphere or disk model.
    pub fn constant_curvature(k: f64) -> ConformalChart {
        if k == 0.0 {
            Self::euclidean()
        } else if k > 0.0 {
            Self::sphere(k)
        } else {
            Self::hyperbolic_disk(k)
        }
    }

    /// Attaches the weight `φ`, giving the area form `e^{−φ}ω_g`.
    pub fn with_weight(mut self, phi: ScalarField) -> ConformalChart {
        self.phi = phi;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> ConformalChart {
        self.name = name.into();
        self
    }

    fn check_finite(&self) -> Result<()> {
        let (x0, y0, x1, y1) = self.domain.working_box();
        let n = 32;
        for i in 0..n {
            for j in 0..n {
                let p = Point::new(
                    x0 + (x1 - x0) * (i as f64 + 0.5) / n as f64,
                    y0 + (y1 - y0) * (j as f64 + 0.5) / n as f64,
                );
                if !self.domain.contains(p) {
                    continue;
                }
                let v = self.psi.value(p.x, p.y);
                let (gx, gy) = self.psi.grad(p.x, p.y);
                let (a, b, c) = self.psi.hessian(p.x, p.y);
                if ![v, gx, gy, a, b, c].iter().all(|t| t.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "conformal factor is not finite at ({}, {})",
                        p.x, p.y
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn psi_field(&self) -> &ScalarField {
        &self.psi
    }

    pub fn phi_field(&self) -> &ScalarField {
        &self.phi
    }

    /// Analytic curvature for built-in charts.
    pub fn known_curvature(&self) -> Option<f64> {
        self.known_curvature
    }

    /// True when the weight is identically zero.
    pub fn unweighted(&self) -> bool {
        self.phi.is_zero()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.domain.contains(p)
    }

    pub fn require(&self, p: Point) -> Result<()> {
        if self.domain.contains(p) {
            Ok(())
        } else {
            Err(Error::OutsideDomain { x: p.x, y: p.y })
        }
    }

    pub fn psi(&self, p: Point) -> f64 {
        self.psi.value(p.x, p.y)
    }

    pub fn psi_grad(&self, p: Point) -> (f64, f64) {
        self.psi.grad(p.x, p.y)
    }

    pub fn phi(&self, p: Point) -> f64 {
        self.phi.value(p.x, p.y)
    }

    pub fn phi_grad(&self, p: Point) -> (f64, f64) {
        self.phi.grad(p.x, p.y)
    }

    /// `e^{ψ}`: ratio of g-length to chart length.
    pub fn scale_factor(&self, p: Point) -> f64 {
        self.psi(p).exp()
    }

    /// Density of `ω = e^{−φ}ω_g` against `dx dy`.
    pub fn area_density(&self, p: Point) -> f64 {
        (2.0 * self.psi(p) - self.phi(p)).exp()
    }

    /// `|w|_g = e^{ψ}√(u² + v²)`.
    pub fn metric_norm(&self, w: &TangentVec) -> Result<f64> {
        self.require(w.base)?;
        Ok(self.scale_factor(w.base) * w.u.hypot(w.v))
    }

    /// `K = −e^{−2ψ}Δψ`.
    pub fn gauss_curvature(&self, p: Point) -> Result<f64> {
        self.require(p)?;
        Ok(-(-2.0 * self.psi(p)).exp() * self.psi.laplacian(p.x, p.y))
    }

    /// `|∇f|_g = e^{−ψ}|∇f|`.
    pub fn grad_norm(&self, f: &ScalarField, p: Point) -> Result<f64> {
        self.require(p)?;
        let (fx, fy) = f.grad(p.x, p.y);
        Ok((-self.psi(p)).exp() * fx.hypot(fy))
    }

    /// Positive quarter turn; conformality makes this a g-isometry.
    pub fn rotate90(&self, w: &TangentVec) -> TangentVec {
        TangentVec::new(w.base, -w.v, w.u)
    }

    /// Unit (in g) tangent vector at `p` with chart direction angle `theta`.
    pub fn unit_vector(&self, p: Point, theta: f64) -> TangentVec {
        let s = (-self.psi(p)).exp();
        TangentVec::new(p, s * theta.cos(), s * theta.sin())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_curvature(chart: &ConformalChart, p: Point) -> f64 {
        let h = 1e-4;
        let f = |dx: f64, dy: f64| chart.psi(Point::new(p.x + dx, p.y + dy));
        let lap = (f(h, 0.0) + f(-h, 0.0) + f(0.0, h) + f(0.0, -h) - 4.0 * f(0.0, 0.0)) / (h * h);
        -(-2.0 * chart.psi(p)).exp() * lap
    }

    #[test]
    fn metric_norm_examples() {
        let e = ConformalChart::euclidean();
        assert_eq!(e.metric_norm(&TangentVec::new(Point::new(0.0, 0.0), 3.0, 4.0)).unwrap(), 5.0);
        let d = ConformalChart::poincare_disk();
        let psi0 = (2.0f64 / (1.0 - 0.0)).ln();
        let expected = psi0.exp();
        let got = d.metric_norm(&TangentVec::new(Point::new(0.0, 0.0), 1.0, 0.0)).unwrap();
        assert!((got - expected).abs() < 1e-15 && (got - 2.0).abs() < 1e-15);
        assert_eq!(d.metric_norm(&TangentVec::new(Point::new(0.2, 0.1), 0.0, 0.0)).unwrap(), 0.0);
        assert!(d.metric_norm(&TangentVec::new(Point::new(1.0, 0.0), 1.0, 0.0)).is_err());
    }

    #[test]
    fn curvature_examples_match_difference_oracle() {
        let d = ConformalChart::poincare_disk();
        let p = Point::new(0.3, 0.1);
        let k = d.gauss_curvature(p).unwrap();
        assert!((k - fd_curvature(&d, p)).abs() < 1e-5);
        assert!((k + 1.0).abs() < 1e-12);
        let s = ConformalChart::stereographic_sphere();
        let p = Point::new(0.5, -0.2);
        let k = s.gauss_curvature(p).unwrap();
        assert!((k - fd_curvature(&s, p)).abs() < 1e-5);
        assert!((k - 1.0).abs() < 1e-12);
        assert_eq!(ConformalChart::euclidean().gauss_curvature(Point::new(4.0, -1.0)).unwrap(), 0.0);
        assert!(ConformalChart::upper_half_plane().gauss_curvature(Point::new(0.0, -1.0)).is_err());
    }

    #[test]
    fn builtin_curvature_constant_on_grid() {
        let charts = [
            (ConformalChart::euclidean(), (-2.0, -2.0, 2.0, 2.0)),
            (ConformalChart::poincare_disk(), (-0.69, -0.69, 0.69, 0.69)),
            (ConformalChart::upper_half_plane(), (-2.0, 0.1, 2.0, 3.0)),
            (ConformalChart::stereographic_sphere(), (-2.0, -2.0, 2.0, 2.0)),
        ];
        for (chart, (x0, y0, x1, y1)) in charts.iter() {
            let known = chart.known_curvature().unwrap();
            for i in 0..50 {
                for j in 0..50 {
                    let p = Point::new(
                        x0 + (x1 - x0) * i as f64 / 49.0,
                        y0 + (y1 - y0) * j as f64 / 49.0,
                    );
                    let k = chart.gauss_curvature(p).unwrap();
                    assert!((k - known).abs() < 1e-6, "{} at {:?}: {}", chart.name(), p, k);
                }
            }
        }
    }

    #[test]
    fn grad_norm_examples() {
        let x = ScalarField::Affine { c: 0.0, a: 1.0, b: 0.0 };
        let e = ConformalChart::euclidean();
        assert_eq!(e.grad_norm(&x, Point::new(0.3, 0.4)).unwrap(), 1.0);
        assert_eq!(e.grad_norm(&ScalarField::Constant(2.0), Point::new(0.3, 0.4)).unwrap(), 0.0);
        let d = ConformalChart::poincare_disk();
        assert!((d.grad_norm(&x, Point::new(0.0, 0.0)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rotate90_examples() {
        let e = ConformalChart::euclidean();
        let w = TangentVec::new(Point::new(0.0, 0.0), 1.0, 0.0);
        assert_eq!(e.rotate90(&w), TangentVec::new(Point::new(0.0, 0.0), 0.0, 1.0));
        let d = ConformalChart::poincare_disk();
        let w = TangentVec::new(Point::new(0.0, 0.0), 2.0, 0.0);
        let r = d.rotate90(&w);
        assert_eq!((r.u, r.v), (0.0, 2.0));
        assert!((d.metric_norm(&r).unwrap() - 4.0).abs() < 1e-15);
        let w = TangentVec::new(Point::new(0.1, 0.2), 0.3, -0.7);
        let back = d.rotate90(&d.rotate90(&d.rotate90(&d.rotate90(&w))));
        assert_eq!(back, w);
    }

    #[test]
    fn user_chart_rejects_nonfinite_factor() {
        let psi = ScalarField::parse("log(x)", 1e-5).unwrap();
        assert!(ConformalChart::new("bad", Domain::Rect { x0: -1.0, y0: -1.0, x1: 1.0, y1: 1.0 }, psi).is_err());
        let psi = ScalarField::parse("-log(y)", 1e-5).unwrap();
        let c = ConformalChart::new("hp", Domain::UpperHalfPlane, psi).unwrap();
        let k = c.gauss_curvature(Point::new(0.2, 1.3)).unwrap();
        assert!((k + 1.0).abs() < 1e-4);
    }
}
