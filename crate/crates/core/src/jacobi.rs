//! Jacobi fields along spray curves, the Jacobian scalar `J(t) = ω(γ̇, S)`,
//! concavity checks and the one-dimensional needle inequality.

use crate::error::{Error, Result};
use crate::spray::{integrate_bundle, SprayField};
use crate::surface::{ConformalChart, Point};

/// Initial variation: a normal offset (in g-units, along the left normal) and
/// an angular offset, both multiplied by the variation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variation {
    pub normal: f64,
    pub angle: f64,
}

impl Variation {
    /// Parallel start points, same direction.
    pub const NORMAL: Variation = Variation { normal: 1.0, angle: 0.0 };
    /// Same start point, rotated direction.
    pub const RADIAL: Variation = Variation { normal: 0.0, angle: 1.0 };
}

pub const DEFAULT_EPS: f64 = 1e-4;
const TRACE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct JacobiTrace {
    /// Uniform arclength grid.
    pub t: Vec<f64>,
    pub j: Vec<f64>,
    /// Base curve states `[x, y, θ]` on the grid.
    pub states: Vec<[f64; 3]>,
    /// Variation field `S` in chart components on the grid.
    pub field: Vec<(f64, f64)>,
    pub variation: Variation,
    pub eps: f64,
}

impl JacobiTrace {
    pub fn step(&self) -> f64 {
        self.t[1] - self.t[0]
    }

    pub fn max_abs(&self) -> f64 {
        self.j.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Centered second differences `(t_i, J″(t_i))` on interior points.
    pub fn second_differences(&self) -> Vec<(f64, f64)> {
        let h = self.step();
        (1..self.j.len().saturating_sub(1))
            .map(|i| (self.t[i], (self.j[i + 1] - 2.0 * self.j[i] + self.j[i - 1]) / (h * h)))
            .collect()
    }
}

/// Computes `J` on `n` uniform points of `[0, length]` from a central
/// difference of three curves integrated together.
#[allow(clippy::too_many_arguments)]
pub fn jacobi_trace(
    chart: &ConformalChart,
    spray: &SprayField,
    start: Point,
    theta0: f64,
    length: f64,
    variation: Variation,
    eps: f64,
    n: usize,
) -> Result<JacobiTrace> {
    chart.require(start)?;
    if n < 2 {
        return Err(Error::InvalidArgument("a trace needs at least two grid points".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("variation step must be positive".into()));
    }
    if variation.normal == 0.0 && variation.angle == 0.0 {
        return Err(Error::InvalidArgument("variation is zero".into()));
    }
    let e = (-chart.psi(start)).exp();
    let (s, c) = theta0.sin_cos();
    let off = eps * variation.normal * e;
    let plus = Point::new(start.x - s * off, start.y + c * off);
    let minus = Point::new(start.x + s * off, start.y - c * off);
    chart.require(plus)?;
    chart.require(minus)?;
    let init = [
        start.x,
        start.y,
        theta0,
        plus.x,
        plus.y,
        theta0 + eps * variation.angle,
        minus.x,
        minus.y,
        theta0 - eps * variation.angle,
    ];
    let taus: Vec<f64> = (1..n - 1).map(|i| i as f64 / (n - 1) as f64).collect();
    let sol = integrate_bundle(chart, spray, init, &[length; 3], &taus, TRACE_TOL);
    if !sol.completed() {
        return Err(Error::DomainExit { t: sol.last().t * length });
    }
    let mut t = Vec::with_capacity(n);
    let mut j = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    let mut field = Vec::with_capacity(n);
    for i in 0..n {
        let tau = i as f64 / (n - 1) as f64;
        let st = if i == 0 {
            init
        } else if i == n - 1 {
            sol.last().y
        } else {
            sol.at_stop(tau).expect("grid stop recorded")
        };
        let p = Point::new(st[0], st[1]);
        let sx = (st[3] - st[6]) / (2.0 * eps);
        let sy = (st[4] - st[7]) / (2.0 * eps);
        let (sn, cs) = st[2].sin_cos();
        let dens = (chart.psi(p) - chart.phi(p)).exp();
        t.push(tau * length);
        j.push(dens * (cs * sy - sn * sx));
        states.push([st[0], st[1], st[2]]);
        field.push((sx, sy));
    }
    let scale = j.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if j[0] < -1e-12 * scale || (j[0].abs() <= 1e-12 * scale && j[1] <= 0.0) {
        return Err(Error::InvalidArgument(
            "variation is not transversal: J must start positive (or at zero and increase)".into(),
        ));
    }
    Ok(JacobiTrace { t, j, states, field, variation, eps })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcavityReport {
    /// Largest centered second difference divided by the squared step.
    pub max_second_difference: f64,
    /// Arclength where it occurs.
    pub at: f64,
    pub tolerance: f64,
    pub concave: bool,
}

/// Concave iff every second difference is at most `1e−6 · max|J|`.
pub fn concavity_check(trace: &JacobiTrace) -> Result<ConcavityReport> {
    concavity_of(&trace.t, &trace.j)
}

/// Same check on raw samples over a uniform grid.
pub fn concavity_of(t: &[f64], j: &[f64]) -> Result<ConcavityReport> {
    if t.len() < 3 || t.len() != j.len() {
        return Err(Error::InvalidArgument("concavity needs at least three grid points".into()));
    }
    let h = t[1] - t[0];
    let mut best = f64::NEG_INFINITY;
    let mut at = t[1];
    for i in 1..j.len() - 1 {
        let d = (j[i + 1] - 2.0 * j[i] + j[i - 1]) / (h * h);
        if d > best {
            best = d;
            at = t[i];
        }
    }
    let tolerance = 1e-6 * j.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(ConcavityReport { max_second_difference: best, at, tolerance, concave: best <= tolerance })
}

/// A nonnegative density on a line.
pub trait Density {
    fn value(&self, t: f64) -> f64;
    /// Points where the density may fail to be smooth.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Piecewise-linear density through uniform samples on `[a, b]`; zero outside.
#[derive(Debug, Clone)]
pub struct SampledDensity {
    pub a: f64,
    pub b: f64,
    pub values: Vec<f64>,
}

impl SampledDensity {
    pub fn new(a: f64, b: f64, values: Vec<f64>) -> Result<SampledDensity> {
        if values.len() < 2 || !(b > a) {
            return Err(Error::InvalidArgument("sampled density needs two samples on a nonempty interval".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("density must be finite and nonnegative".into()));
        }
        Ok(SampledDensity { a, b, values })
    }

    pub fn from_fn(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<SampledDensity> {
        let values = (0..n).map(|i| f(a + (b - a) * i as f64 / (n - 1) as f64)).collect();
        Self::new(a, b, values)
    }
}

impl Density for SampledDensity {
    fn value(&self, t: f64) -> f64 {
        if t < self.a || t > self.b {
            return 0.0;
        }
        let m = self.values.len() - 1;
        let u = (t - self.a) / (self.b - self.a) * m as f64;
        let i = (u.floor() as usize).min(m - 1);
        let w = u - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    fn breakpoints(&self) -> Vec<f64> {
        let m = self.values.len() - 1;
        (0..=m).map(|i| self.a + (self.b - self.a) * i as f64 / m as f64).collect()
    }
}

/// Density given by a closure.
pub struct FnDensity<F: Fn(f64) -> f64> {
    pub f: F,
    pub breaks: Vec<f64>,
}

impl<F: Fn(f64) -> f64> FnDensity<F> {
    pub fn new(f: F) -> Self {
        FnDensity { f, breaks: Vec::new() }
    }

    pub fn with_breakpoints(f: F, breaks: Vec<f64>) -> Self {
        FnDensity { f, breaks }
    }
}

impl<F: Fn(f64) -> f64> Density for FnDensity<F> {
    fn value(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.clone()
    }
}

/// Sorts and merges closed intervals.
pub fn merge_intervals(intervals: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = intervals.iter().copied().filter(|(a, b)| a <= b).collect();
    v.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (a, b) in v {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// `{(1−λ)a + λb : a ∈ A, b ∈ B, a ≤ b}` for unions of closed intervals.
pub fn ordered_average(a: &[(f64, f64)], b: &[(f64, f64)], lambda: f64) -> Vec<(f64, f64)> {
    let mut pieces = Vec::new();
    for &(a0, a1) in a {
        for &(b0, b1) in b {
            if a0 > b1 {
                continue;
            }
            let lo = (1.0 - lambda) * a0 + lambda * b0.max(a0);
            let hi = (1.0 - lambda) * a1.min(b1) + lambda * b1;
            pieces.push((lo, hi));
        }
    }
    merge_intervals(&pieces)
}

const SIMPSON_PANELS: usize = 2000;

fn simpson(d: &dyn Density, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = 2 * panels.max(1);
    let h = (b - a) / n as f64;
    let mut s = d.value(a) + d.value(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * d.value(a + h * i as f64);
    }
    s * h / 3.0
}

/// `∫` of the density over a union of intervals: composite Simpson on each
/// piece between breakpoints.
pub fn integrate_density(d: &dyn Density, intervals: &[(f64, f64)]) -> f64 {
    let mut breaks = d.breakpoints();
    breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let piecewise_linear = !breaks.is_empty();
    let mut total = 0.0;
    for &(a, b) in &merge_intervals(intervals) {
        let mut cuts = vec![a];
        cuts.extend(breaks.iter().copied().filter(|&t| t > a && t < b));
        cuts.push(b);
        for w in cuts.windows(2) {
            let panels = if piecewise_linear && breaks.len() > 2 { 1 } else { SIMPSON_PANELS };
            total += simpson(d, w[0], w[1], panels);
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeedleReport {
    pub lambda: f64,
    pub average: Vec<(f64, f64)>,
    pub mu_a: f64,
    pub mu_b: f64,
    pub mu_average: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// Both sides of `μ(𝓜)^{1/2} ≥ (1−λ)μ(A)^{1/2} + λμ(B)^{1/2}` on a line,
/// with `𝓜` the ordered average of `A` and `B`.
pub fn needle_bm_1d(density: &dyn Density, a: &[(f64, f64)], b: &[(f64, f64)], lambda: f64) -> Result<NeedleReport> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument("lambda must lie in [0, 1]".into()));
    }
    let a = merge_intervals(a);
    let b = merge_intervals(b);
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("needle interval list".into()));
    }
    let average = ordered_average(&a, &b, lambda);
    let mu_a = integrate_density(density, &a);
    let mu_b = integrate_density(density, &b);
    let mu_average = integrate_density(density, &average);
    let lhs = mu_average.max(0.0).sqrt();
    let rhs = (1.0 - lambda) * mu_a.max(0.0).sqrt() + lambda * mu_b.max(0.0).sqrt();
    Ok(NeedleReport { lambda, average, mu_a, mu_b, mu_average, lhs, rhs, margin: lhs - rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spray::SprayField;
    use std::f64::consts::PI;

    #[test]
    fn flat_parallel_lines_have_unit_jacobian() {
        let e = ConformalChart::euclidean();
        let tr = jacobi_trace(&e, &SprayField::geodesic(), Point::new(0.0, 0.0), 0.3, 4.0, Variation::NORMAL, DEFAULT_EPS, 41)
            .unwrap();
        for v in &tr.j {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sphere_radial_variation_is_sine() {
        let s = ConformalChart::stereographic_sphere();
        let tr = jacobi_trace(&s, &SprayField::geodesic(), Point::new(-1.0, 0.0), 0.0, 3.0, Variation::RADIAL, DEFAULT_EPS, 61)
            .unwrap();
        for (t, j) in tr.t.iter().zip(&tr.j).skip(2) {
            assert!(((j - t.sin()) / t.sin()).abs() < 1e-4, "t={t} J={j}");
        }
    }

    #[test]
    fn negative_start_rejected() {
        let e = ConformalChart::euclidean();
        let v = Variation { normal: -1.0, angle: 0.0 };
        assert!(jacobi_trace(&e, &SprayField::geodesic(), Point::new(0.0, 0.0), 0.0, 1.0, v, DEFAULT_EPS, 11).is_err());
        let v = Variation { normal: 0.0, angle: -1.0 };
        assert!(jacobi_trace(&e, &SprayField::geodesic(), Point::new(0.0, 0.0), 0.0, 1.0, v, DEFAULT_EPS, 11).is_err());
    }

    #[test]
    fn concavity_examples() {
        let t: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        let lin: Vec<f64> = t.clone();
        let r = concavity_of(&t, &lin).unwrap();
        assert!(r.max_second_difference.abs() < 1e-9 && r.concave);
        let ts: Vec<f64> = (0..101).map(|i| PI * i as f64 / 100.0).collect();
        let sin: Vec<f64> = ts.iter().map(|x| x.sin()).collect();
        assert!(concavity_of(&ts, &sin).unwrap().concave);
        let sq: Vec<f64> = t.iter().map(|x| x * x).collect();
        let r = concavity_of(&t, &sq).unwrap();
        assert!((r.max_second_difference - 2.0).abs() < 1e-6 && !r.concave);
        assert!(concavity_of(&t[..2], &sq[..2]).is_err());
    }

    #[test]
    fn needle_examples() {
        let one = FnDensity::new(|_| 1.0);
        let r = needle_bm_1d(&one, &[(0.0, 0.1)], &[(0.8, 1.0)], 0.5).unwrap();
        assert_eq!(r.average.len(), 1);
        assert!((r.average[0].0 - 0.40).abs() < 1e-15 && (r.average[0].1 - 0.55).abs() < 1e-15);
        assert!((r.lhs - 0.15f64.sqrt()).abs() < 1e-12);
        assert!((r.rhs - (0.5 * 0.1f64.sqrt() + 0.5 * 0.2f64.sqrt())).abs() < 1e-12);
        assert!(r.margin > 0.0);

        for lambda in [0.1, 0.5, 0.9] {
            let r = needle_bm_1d(&one, &[(0.2, 0.5)], &[(0.2, 0.5)], lambda).unwrap();
            assert_eq!(r.average, vec![(0.2, 0.5)]);
            assert!(r.margin.abs() < 1e-12);
        }

        let tent = FnDensity::with_breakpoints(|t: f64| (1.0 - (2.0 * t - 1.0).abs()).max(0.0), vec![0.5]);
        let r = needle_bm_1d(&tent, &[(0.1, 0.2)], &[(0.7, 0.8)], 0.5).unwrap();
        // exact integrals of the tent
        let mu_a = 0.2 * 0.2 - 0.1 * 0.1;
        let mu_b = (2.0 * 0.8 - 0.64) - (2.0 * 0.7 - 0.49);
        let mu_m = 0.5f64.powi(2) - 0.4f64.powi(2);
        assert!((r.average[0].0 - 0.4).abs() < 1e-15 && (r.average[0].1 - 0.5).abs() < 1e-15);
        assert!((r.mu_a - mu_a).abs() < 1e-9 && (r.mu_b - mu_b).abs() < 1e-9, "{r:?}");
        assert!((r.mu_average - mu_m).abs() < 1e-9);
        assert!(r.margin > 0.0);

        assert!(needle_bm_1d(&one, &[], &[(0.0, 1.0)], 0.5).is_err());
    }

    #[test]
    fn ordered_pairs_only() {
        // B entirely left of A: no admissible pair.
        assert!(ordered_average(&[(0.6, 0.8)], &[(0.0, 0.2)], 0.5).is_empty());
        // Overlap: pairs with a ≤ b only.
        let m = ordered_average(&[(0.0, 1.0)], &[(0.0, 1.0)], 0.3);
        assert_eq!(m, vec![(0.0, 1.0)]);
    }

    #[test]
    fn sampled_density_is_piecewise_linear() {
        let d = SampledDensity::new(0.0, 1.0, vec![0.0, 1.0, 0.0]).unwrap();
        assert!((d.value(0.25) - 0.5).abs() < 1e-15);
        assert_eq!(d.value(1.5), 0.0);
        assert!((integrate_density(&d, &[(0.0, 1.0)]) - 0.5).abs() < 1e-15);
    }
}
