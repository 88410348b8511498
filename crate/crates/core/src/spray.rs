//! Metric sprays given by a geodesic-curvature law, their geodesics,
//! exponential maps and a shooting inverse.
//!
//! A unit-speed curve with chart direction angle `θ` satisfies
//!
//! ```text
//! x' = e^{−ψ} cos θ,   y' = e^{−ψ} sin θ,
//! θ' = k(x, y, θ) + e^{−ψ}(−sin θ ψ_x + cos θ ψ_y)
//! ```
//!
//! Positive `k` turns toward the left normal `(−sin θ, cos θ)`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expr, Var};
pub use crate::field::cot_k;
use crate::field::ScalarField;
use crate::ode::{solve, OdeOptions, OdeSolution, OdeStatus};
use crate::surface::{ConformalChart, Point, TangentVec};

/// Step used to differentiate direction-dependent laws in `θ`.
const THETA_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub enum CurvatureLaw {
    /// Direction-independent `k = κ(x, y)`.
    Magnetic(ScalarField),
    /// General `k(x, y, θ)`.
    Directional { expr: Arc<Expr>, source: String },
}

#[derive(Debug, Clone)]
pub struct SprayField {
    law: CurvatureLaw,
    reversed: bool,
}

impl SprayField {
    /// The geodesic spray of the metric (`k ≡ 0`).
    pub fn geodesic() -> SprayField {
        Self::magnetic(ScalarField::Constant(0.0))
    }

    pub fn constant(kappa: f64) -> SprayField {
        Self::magnetic(ScalarField::Constant(kappa))
    }

    pub fn magnetic(kappa: ScalarField) -> SprayField {
        SprayField { law: CurvatureLaw::Magnetic(kappa), reversed: false }
    }

    /// Parses `k(x, y, θ)`. An expression that does not mention `theta` yields
    /// a magnetic spray; `step` is the difference step for its gradient.
    pub fn from_k_expression(text: &str, step: f64) -> Result<SprayField> {
        let expr = parse_expression(text)?;
        if expr.uses(Var::Theta) {
            Ok(SprayField {
                law: CurvatureLaw::Directional { expr: Arc::new(expr), source: text.to_string() },
                reversed: false,
            })
        } else {
            Ok(Self::magnetic(ScalarField::parse(text, step)?))
        }
    }

    /// The spray whose geodesics are those of `self` traversed backwards:
    /// `k_rev(x, y, θ) = −k(x, y, θ + π)`.
    pub fn reversed(&self) -> SprayField {
        SprayField { law: self.law.clone(), reversed: !self.reversed }
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    pub fn law(&self) -> &CurvatureLaw {
        &self.law
    }

    pub fn is_magnetic(&self) -> bool {
        matches!(self.law, CurvatureLaw::Magnetic(_))
    }

    fn sign(&self) -> f64 {
        if self.reversed {
            -1.0
        } else {
            1.0
        }
    }

    /// Geodesic curvature of the spray curve through `(x, y)` with angle `theta`.
    #[inline]
    pub fn k(&self, x: f64, y: f64, theta: f64) -> f64 {
        match &self.law {
            CurvatureLaw::Magnetic(f) => self.sign() * f.value(x, y),
            CurvatureLaw::Directional { expr, .. } => {
                if self.reversed {
                    -expr.eval(x, y, theta + PI)
                } else {
                    expr.eval(x, y, theta)
                }
            }
        }
    }

    /// `∂k/∂θ`.
    pub fn k_theta(&self, x: f64, y: f64, theta: f64) -> f64 {
        match &self.law {
            CurvatureLaw::Magnetic(_) => 0.0,
            CurvatureLaw::Directional { .. } => {
                (self.k(x, y, theta + THETA_STEP) - self.k(x, y, theta - THETA_STEP)) / (2.0 * THETA_STEP)
            }
        }
    }

    /// `κ(p)` for magnetic sprays.
    pub fn kappa(&self, p: Point) -> Option<f64> {
        match &self.law {
            CurvatureLaw::Magnetic(f) => Some(self.sign() * f.value(p.x, p.y)),
            CurvatureLaw::Directional { .. } => None,
        }
    }

    /// Chart gradient of `κ` for magnetic sprays.
    pub fn kappa_grad(&self, p: Point) -> Option<(f64, f64)> {
        match &self.law {
            CurvatureLaw::Magnetic(f) => {
                let (a, b) = f.grad(p.x, p.y);
                Some((self.sign() * a, self.sign() * b))
            }
            CurvatureLaw::Directional { .. } => None,
        }
    }

    pub fn describe(&self) -> String {
        let base = match &self.law {
            CurvatureLaw::Magnetic(f) => format!("kappa = {}", f.describe()),
            CurvatureLaw::Directional { source, .. } => format!("k = {source}"),
        };
        if self.reversed {
            format!("reversed({base})")
        } else {
            base
        }
    }
}

/// Unit-speed rates `(x', y', θ')` in g-arclength, or `None` off the domain.
#[inline]
pub fn geodesic_rates(chart: &ConformalChart, spray: &SprayField, x: f64, y: f64, theta: f64) -> Option<[f64; 3]> {
    let p = Point::new(x, y);
    if !chart.contains(p) {
        return None;
    }
    let e = (-chart.psi(p)).exp();
    let (px, py) = chart.psi_grad(p);
    let (s, c) = theta.sin_cos();
    let out = [e * c, e * s, spray.k(x, y, theta) + e * (-s * px + c * py)];
    if out.iter().all(|v| v.is_finite()) {
        Some(out)
    } else {
        None
    }
}

/// Integrates several members at once, each with its own signed length, over
/// normalized time `τ ∈ [0, 1]`. State layout: `[x, y, θ]` per member.
pub(crate) fn integrate_bundle<const N: usize>(
    chart: &ConformalChart,
    spray: &SprayField,
    init: [f64; N],
    lengths: &[f64],
    stops: &[f64],
    tol: f64,
) -> OdeSolution<N> {
    debug_assert_eq!(N, 3 * lengths.len());
    let rhs = |_t: f64, s: &[f64; N]| -> Option<[f64; N]> {
        let mut out = [0.0; N];
        for (m, &len) in lengths.iter().enumerate() {
            let r = geodesic_rates(chart, spray, s[3 * m], s[3 * m + 1], s[3 * m + 2])?;
            out[3 * m] = len * r[0];
            out[3 * m + 1] = len * r[1];
            out[3 * m + 2] = len * r[2];
        }
        Some(out)
    };
    solve(rhs, 0.0, init, 1.0, stops, &OdeOptions::with_tol(tol))
}

/// One sample of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    /// Signed g-arclength from the start.
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl TrajectorySample {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// A unit-speed spray geodesic stored as accepted integrator nodes.
#[derive(Debug, Clone)]
pub struct Trajectory {
    solution: OdeSolution<3>,
    length: f64,
}

impl Trajectory {
    /// Requested signed arclength.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn status(&self) -> OdeStatus {
        self.solution.status
    }

    /// True when the curve left the domain (or the step collapsed) before the end.
    pub fn exited(&self) -> bool {
        !self.solution.completed()
    }

    pub fn accepted_steps(&self) -> usize {
        self.solution.accepted
    }

    pub fn rejected_steps(&self) -> usize {
        self.solution.rejected
    }

    /// Arclength actually covered.
    pub fn reached(&self) -> f64 {
        self.solution.last().t * self.length
    }

    /// Accepted nodes.
    pub fn samples(&self) -> Vec<TrajectorySample> {
        self.solution
            .nodes
            .iter()
            .map(|n| TrajectorySample { t: n.t * self.length, x: n.y[0], y: n.y[1], theta: n.y[2] })
            .collect()
    }

    pub fn end(&self) -> TrajectorySample {
        let n = self.solution.last();
        TrajectorySample { t: n.t * self.length, x: n.y[0], y: n.y[1], theta: n.y[2] }
    }

    /// Interpolated state at signed arclength `t`.
    pub fn at(&self, t: f64) -> Option<TrajectorySample> {
        let tau = if self.length == 0.0 { 0.0 } else { t / self.length };
        let s = self.solution.eval(tau)?;
        Some(TrajectorySample { t, x: s[0], y: s[1], theta: s[2] })
    }

    /// `n ≥ 2` samples evenly spaced in arclength over the covered part.
    pub fn uniform(&self, n: usize) -> Vec<TrajectorySample> {
        // step in the normalized parameter so the last sample lands exactly on
        // the final node
        let last = self.solution.last().t;
        (0..n)
            .filter_map(|i| {
                let tau = if i + 1 == n { last } else { last * i as f64 / (n - 1).max(1) as f64 };
                let s = self.solution.eval(tau)?;
                Some(TrajectorySample { t: tau * self.length, x: s[0], y: s[1], theta: s[2] })
            })
            .collect()
    }
}

/// Integrates the unit-speed spray curve from `start` with angle `theta0` for
/// signed arclength `length`. `stops` are arclengths (same sign as `length`)
/// at which the integrator lands exactly.
pub fn integrate_with_stops(
    chart: &ConformalChart,
    spray: &SprayField,
    start: Point,
    theta0: f64,
    length: f64,
    tol: f64,
    stops: &[f64],
) -> Result<Trajectory> {
    chart.require(start)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if !length.is_finite() {
        return Err(Error::InvalidArgument("arclength must be finite".into()));
    }
    let mut taus: Vec<f64> = if length == 0.0 {
        Vec::new()
    } else {
        stops.iter().map(|s| s / length).filter(|t| *t > 0.0 && *t < 1.0).collect()
    };
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    taus.dedup();
    let solution = integrate_bundle(chart, spray, [start.x, start.y, theta0], &[length], &taus, tol);
    Ok(Trajectory { solution, length })
}

pub fn integrate(
    chart: &ConformalChart,
    spray: &SprayField,
    start: Point,
    theta0: f64,
    length: f64,
    tol: f64,
) -> Result<Trajectory> {
    integrate_with_stops(chart, spray, start, theta0, length, tol, &[])
}

fn exit_error(traj: &Trajectory) -> Error {
    match traj.status() {
        OdeStatus::StepUnderflow => Error::StepUnderflow { t: traj.reached() },
        _ => Error::DomainExit { t: traj.reached() },
    }
}

/// Default integration tolerance for maps built on geodesics.
pub const MAP_TOL: f64 = 1e-11;

/// `exp_x(v)`: the point at g-arclength `|v|_g` along the spray curve from `x`
/// in the direction of `v`.
pub fn exp_map(chart: &ConformalChart, spray: &SprayField, x: Point, v: &TangentVec) -> Result<Point> {
    exp_map_tol(chart, spray, x, v, MAP_TOL)
}

pub fn exp_map_tol(chart: &ConformalChart, spray: &SprayField, x: Point, v: &TangentVec, tol: f64) -> Result<Point> {
    if v.base != x {
        return Err(Error::InvalidArgument("tangent vector is not based at x".into()));
    }
    chart.require(x)?;
    if v.is_zero() {
        return Ok(x);
    }
    let len = chart.metric_norm(v)?;
    let traj = integrate(chart, spray, x, v.v.atan2(v.u), len, tol)?;
    if traj.exited() {
        return Err(exit_error(&traj));
    }
    Ok(traj.end().point())
}

#[derive(Debug, Clone, Copy)]
pub struct LogMapOptions {
    /// Required chart distance between `exp_x(v)` and the target.
    pub tol: f64,
    /// Integration tolerance.
    pub ode_tol: f64,
    /// Newton iterations allowed per start.
    pub budget: usize,
    /// Initial guess in g-orthonormal components.
    pub guess: Option<(f64, f64)>,
    /// Whether to fall back to 16 starting angles.
    pub multistart: bool,
}

impl Default for LogMapOptions {
    fn default() -> Self {
        LogMapOptions { tol: 1e-10, ode_tol: MAP_TOL, budget: 40, guess: None, multistart: true }
    }
}

#[derive(Debug, Clone)]
pub struct LogMapSolution {
    /// The initial vector in chart components.
    pub vector: TangentVec,
    /// The same vector in g-orthonormal components (`e^{ψ(x)}·(u, v)`).
    pub w: (f64, f64),
    /// Terminal angle of the connecting curve.
    pub end_theta: f64,
    pub residual: f64,
    pub iterations: usize,
    /// States `[x, y, θ]` at the requested fractions of the connecting curve.
    pub probes: Vec<[f64; 3]>,
}

impl LogMapSolution {
    pub fn g_norm(&self) -> f64 {
        self.w.0.hypot(self.w.1)
    }
}

struct Shot {
    end: [f64; 3],
    jac: [[f64; 2]; 2],
    probes: Vec<[f64; 3]>,
}

fn shoot(
    chart: &ConformalChart,
    spray: &SprayField,
    x: Point,
    w: (f64, f64),
    probes: &[f64],
    ode_tol: f64,
) -> Option<Shot> {
    let norm = w.0.hypot(w.1);
    if !(norm.is_finite()) || norm == 0.0 {
        return None;
    }
    let delta = 1e-7 * norm.max(1e-2);
    let members = [w, (w.0 + delta, w.1), (w.0, w.1 + delta)];
    let mut init = [0.0; 9];
    let mut lens = [0.0; 3];
    for (m, wm) in members.iter().enumerate() {
        init[3 * m] = x.x;
        init[3 * m + 1] = x.y;
        init[3 * m + 2] = wm.1.atan2(wm.0);
        lens[m] = wm.0.hypot(wm.1);
    }
    let sol = integrate_bundle(chart, spray, init, &lens, probes, ode_tol);
    if !sol.completed() {
        return None;
    }
    let e = sol.last().y;
    let jac = [
        [(e[3] - e[0]) / delta, (e[6] - e[0]) / delta],
        [(e[4] - e[1]) / delta, (e[7] - e[1]) / delta],
    ];
    let probes = probes
        .iter()
        .map(|&t| {
            if t <= 0.0 {
                [x.x, x.y, init[2]]
            } else if t >= 1.0 {
                [e[0], e[1], e[2]]
            } else {
                let s = sol.at_stop(t).or_else(|| sol.eval(t)).expect("probe inside integration range");
                [s[0], s[1], s[2]]
            }
        })
        .collect();
    Some(Shot { end: [e[0], e[1], e[2]], jac, probes })
}

fn newton(
    chart: &ConformalChart,
    spray: &SprayField,
    x: Point,
    y: Point,
    w0: (f64, f64),
    probes: &[f64],
    opts: &LogMapOptions,
) -> Option<(f64, f64, Shot, usize)> {
    let mut w = w0;
    let mut shot = shoot(chart, spray, x, w, probes, opts.ode_tol)?;
    let mut r = (shot.end[0] - y.x, shot.end[1] - y.y);
    let mut rn = r.0.hypot(r.1);
    for it in 0..=opts.budget {
        if rn < opts.tol {
            return Some((w.0, w.1, shot, it));
        }
        if it == opts.budget {
            break;
        }
        let [[a, b], [c, d]] = shot.jac;
        let det = a * d - b * c;
        if !det.is_finite() || det.abs() < 1e-14 * (a.abs() + b.abs() + c.abs() + d.abs()).powi(2) {
            return None;
        }
        let dw = ((-d * r.0 + b * r.1) / det, (c * r.0 - a * r.1) / det);
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..16 {
            let cand = (w.0 + step * dw.0, w.1 + step * dw.1);
            if let Some(s) = shoot(chart, spray, x, cand, probes, opts.ode_tol) {
                let rc = (s.end[0] - y.x, s.end[1] - y.y);
                let rcn = rc.0.hypot(rc.1);
                if rcn < rn {
                    w = cand;
                    shot = s;
                    r = rc;
                    rn = rcn;
                    improved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !improved {
            return None;
        }
    }
    None
}

/// Solves `exp_x(v) = y` by damped Newton shooting. `probes` are fractions of
/// the connecting curve at which to report the state (e.g. `λ` for Minkowski
/// averages).
pub fn log_map_with(
    chart: &ConformalChart,
    spray: &SprayField,
    x: Point,
    y: Point,
    opts: &LogMapOptions,
    probes: &[f64],
) -> Result<LogMapSolution> {
    chart.require(x)?;
    chart.require(y)?;
    let mut sorted: Vec<f64> = probes.iter().copied().filter(|t| *t > 0.0 && *t < 1.0).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    let scale = chart.scale_factor(x);
    let finish = |w: (f64, f64), shot: Shot, iterations: usize| {
        let residual = (shot.end[0] - y.x).hypot(shot.end[1] - y.y);
        let probes_out = probes
            .iter()
            .map(|&t| {
                if t <= 0.0 {
                    [x.x, x.y, w.1.atan2(w.0)]
                } else if t >= 1.0 {
                    shot.end
                } else {
                    let i = sorted.iter().position(|s| *s == t).expect("probe registered");
                    shot.probes[i]
                }
            })
            .collect();
        LogMapSolution {
            vector: TangentVec::new(x, w.0 / scale, w.1 / scale),
            w,
            end_theta: shot.end[2],
            residual,
            iterations,
            probes: probes_out,
        }
    };
    if x == y {
        let probes_out = probes.iter().map(|_| [x.x, x.y, 0.0]).collect();
        return Ok(LogMapSolution {
            vector: TangentVec::new(x, 0.0, 0.0),
            w: (0.0, 0.0),
            end_theta: 0.0,
            residual: 0.0,
            iterations: 0,
            probes: probes_out,
        });
    }
    let chord = (scale * (y.x - x.x), scale * (y.y - x.y));
    let mut starts = Vec::with_capacity(2);
    if let Some(g) = opts.guess {
        if g.0.hypot(g.1) > 0.0 {
            starts.push(g);
        }
    }
    starts.push(chord);
    for w0 in starts {
        if let Some((a, b, shot, it)) = newton(chart, spray, x, y, w0, &sorted, opts) {
            return Ok(finish((a, b), shot, it));
        }
    }
    if opts.multistart {
        let mag = chord.0.hypot(chord.1);
        let mut best: Option<((f64, f64), Shot, usize)> = None;
        for i in 0..16 {
            let ang = 2.0 * PI * i as f64 / 16.0;
            let w0 = (mag * ang.cos(), mag * ang.sin());
            if let Some((a, b, shot, it)) = newton(chart, spray, x, y, w0, &sorted, opts) {
                let better = match &best {
                    None => true,
                    Some((wb, _, _)) => a.hypot(b) < wb.0.hypot(wb.1) - 1e-9,
                };
                if better {
                    best = Some(((a, b), shot, it));
                }
            }
        }
        if let Some((w, shot, it)) = best {
            return Ok(finish(w, shot, it));
        }
    }
    Err(Error::NoConvergence(format!(
        "no spray curve from ({}, {}) to ({}, {}) found within {} iterations per start",
        x.x, x.y, y.x, y.y, opts.budget
    )))
}

/// Inverse exponential map with the default tolerances and the given Newton
/// iteration cap.
pub fn log_map(chart: &ConformalChart, spray: &SprayField, x: Point, y: Point, budget: usize) -> Result<TangentVec> {
    let opts = LogMapOptions { budget, ..LogMapOptions::default() };
    Ok(log_map_with(chart, spray, x, y, &opts, &[])?.vector)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_line() {
        let e = ConformalChart::euclidean();
        let t = integrate(&e, &SprayField::geodesic(), Point::new(0.0, 0.0), 0.0, 5.0, 1e-10).unwrap();
        let end = t.end();
        assert!((end.x - 5.0).abs() < 1e-12 && end.y.abs() < 1e-12 && end.theta.abs() < 1e-12);
        assert!(!t.exited());
    }

    #[test]
    fn unit_circle_half_turn() {
        let e = ConformalChart::euclidean();
        let t = integrate(&e, &SprayField::constant(1.0), Point::new(0.0, 0.0), 0.0, PI, 1e-11).unwrap();
        let end = t.end();
        // circle of radius 1 centered at (0, 1)
        assert!(end.x.abs() < 1e-9 && (end.y - 2.0).abs() < 1e-9, "{end:?}");
    }

    #[test]
    fn horocycles_in_the_half_plane() {
        let h = ConformalChart::upper_half_plane();
        // Rightward along y = 1 the horoball {y ≥ 1} lies on the left.
        let t = integrate(&h, &SprayField::constant(1.0), Point::new(0.0, 1.0), 0.0, 10.0, 1e-12).unwrap();
        assert!(!t.exited());
        let drift = t.samples().iter().map(|s| (s.y - 1.0).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-8, "drift {drift}");
        assert!((t.end().x - 10.0).abs() < 1e-8);
        // Leftward with κ = 1 the curve is the horocycle tangent to the axis at the origin.
        let t = integrate(&h, &SprayField::constant(1.0), Point::new(0.0, 1.0), PI, 3.0, 1e-12).unwrap();
        for s in t.samples() {
            assert!((s.x.hypot(s.y - 0.5) - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn geodesics_are_geodesics() {
        // Semicircles on the axis in the half plane, the equator r = 1 in the
        // stereographic chart.
        let h = ConformalChart::upper_half_plane();
        let t = integrate(&h, &SprayField::geodesic(), Point::new(0.0, 1.0), PI, 2.0, 1e-12).unwrap();
        for s in t.samples() {
            assert!((s.x.hypot(s.y) - 1.0).abs() < 1e-9);
        }
        let sph = ConformalChart::stereographic_sphere();
        let t = integrate(&sph, &SprayField::geodesic(), Point::new(1.0, 0.0), PI / 2.0, 2.0 * PI, 1e-12).unwrap();
        for s in t.samples() {
            assert!((s.x.hypot(s.y) - 1.0).abs() < 1e-9);
        }
        assert!((t.end().x - 1.0).abs() < 1e-9 && t.end().y.abs() < 1e-9);
    }

    #[test]
    fn hyperbolic_circle_curvature() {
        // The circle |z| = r in the disk model has geodesic curvature (1 + r²)/(2r).
        let d = ConformalChart::poincare_disk();
        let r: f64 = 0.4;
        let k = (1.0 + r * r) / (2.0 * r);
        let t = integrate(&d, &SprayField::constant(k), Point::new(r, 0.0), PI / 2.0, 3.0, 1e-12).unwrap();
        for s in t.samples() {
            assert!((s.x.hypot(s.y) - r).abs() < 1e-9);
        }
    }

    #[test]
    fn backwards_integration() {
        let e = ConformalChart::euclidean();
        let t = integrate(&e, &SprayField::constant(1.0), Point::new(0.0, 0.0), 0.0, -PI, 1e-11).unwrap();
        let end = t.end();
        assert!(end.x.abs() < 1e-9 && (end.y - 2.0).abs() < 1e-9);
        assert!((t.reached() + PI).abs() < 1e-15);
    }

    #[test]
    fn domain_exit_flagged() {
        let d = ConformalChart::euclidean_disc(1.0);
        let t = integrate(&d, &SprayField::geodesic(), Point::new(0.0, 0.0), 0.0, 5.0, 1e-9).unwrap();
        assert!(t.exited());
        assert!((t.reached() - 1.0).abs() < 1e-9);
        let o = Point::new(0.0, 0.0);
        let err = exp_map(&d, &SprayField::geodesic(), o, &TangentVec::new(o, 2.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::DomainExit { .. }));
    }

    #[test]
    fn exp_map_examples() {
        let e = ConformalChart::euclidean();
        let o = Point::new(0.0, 0.0);
        let p = exp_map(&e, &SprayField::geodesic(), o, &TangentVec::new(o, 3.0, 4.0)).unwrap();
        assert!((p.x - 3.0).abs() < 1e-12 && (p.y - 4.0).abs() < 1e-12);
        let x = Point::new(0.3, -0.2);
        assert_eq!(exp_map(&e, &SprayField::constant(1.0), x, &TangentVec::new(x, 0.0, 0.0)).unwrap(), x);
        let p = exp_map(&e, &SprayField::constant(1.0), o, &TangentVec::new(o, PI, 0.0)).unwrap();
        assert!(p.x.abs() < 1e-9 && (p.y - 2.0).abs() < 1e-9);
    }

    #[test]
    fn log_map_examples() {
        let e = ConformalChart::euclidean();
        let o = Point::new(0.0, 0.0);
        let v = log_map(&e, &SprayField::geodesic(), o, Point::new(1.0, 1.0), 40).unwrap();
        assert!((v.u - 1.0).abs() < 1e-9 && (v.v - 1.0).abs() < 1e-9);
        // (0, 2) is conjugate to the origin along the half circle, so Newton
        // converges only linearly there.
        let v = log_map(&e, &SprayField::constant(1.0), o, Point::new(0.0, 2.0), 40).unwrap();
        assert!(v.v.atan2(v.u).abs() < 1e-4, "{v:?}");
        assert!((v.u.hypot(v.v) - PI).abs() < 1e-4);
        let v = log_map(&e, &SprayField::constant(1.0), o, Point::new(1.0, 1.0), 40).unwrap();
        assert!(v.v.atan2(v.u).abs() < 1e-9, "{v:?}");
        assert!((v.u.hypot(v.v) - PI / 2.0).abs() < 1e-9);
        let v = log_map(&e, &SprayField::constant(1.0), o, o, 40).unwrap();
        assert!(v.is_zero());
    }

    #[test]
    fn log_map_probes_follow_the_curve() {
        let e = ConformalChart::euclidean();
        let o = Point::new(0.0, 0.0);
        let sol = log_map_with(
            &e,
            &SprayField::constant(1.0),
            o,
            Point::new(1.0, 1.0),
            &LogMapOptions::default(),
            &[0.5, 0.25, 1.0],
        )
        .unwrap();
        for (probe, frac) in sol.probes.iter().zip([0.5, 0.25, 1.0]) {
            let a = frac * PI / 2.0;
            assert!((probe[0] - a.sin()).abs() < 1e-9 && (probe[1] - (1.0 - a.cos())).abs() < 1e-9);
            assert!((probe[2] - a).abs() < 1e-9);
        }
        assert!((sol.end_theta - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn reversed_spray_retraces() {
        let e = ConformalChart::euclidean();
        let spray = SprayField::from_k_expression("x + 0.5*cos(theta)", 1e-5).unwrap();
        let t = integrate(&e, &spray, Point::new(0.1, 0.2), 0.4, 1.5, 1e-12).unwrap();
        let end = t.end();
        let back = integrate(&e, &spray.reversed(), end.point(), end.theta + PI, 1.5, 1e-12).unwrap();
        let b = back.end();
        assert!((b.x - 0.1).abs() < 1e-9 && (b.y - 0.2).abs() < 1e-9);
    }

    #[test]
    fn theta_free_expression_is_magnetic() {
        let s = SprayField::from_k_expression("3*x", 1e-5).unwrap();
        assert!(s.is_magnetic());
        assert_eq!(s.kappa(Point::new(0.5, 0.0)), Some(1.5));
        let s = SprayField::from_k_expression("cos(theta)", 1e-5).unwrap();
        assert!(!s.is_magnetic());
        assert!((s.k_theta(0.0, 0.0, 0.3) + 0.3f64.sin()).abs() < 1e-9);
    }
}
