//! Randers metrization `F = √g − η` of a magnetic spray, where `η` averages
//! the duals of the unit radial fields of three base points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sets::Region;
use crate::spray::{integrate, log_map_with, LogMapOptions, SprayField};
use crate::surface::{ConformalChart, Point, TangentVec};

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

const MIN_BASE_DISTANCE: f64 = 1e-9;

fn radial_solution(
    chart: &ConformalChart,
    spray: &SprayField,
    base: Point,
    p: Point,
    guess: Option<(f64, f64)>,
) -> Result<(f64, (f64, f64))> {
    if base.dist(p) < MIN_BASE_DISTANCE {
        return Err(Error::InvalidArgument(format!(
            "radial field is undefined at its base ({}, {})",
            base.x, base.y
        )));
    }
    let opts = LogMapOptions { guess, ..LogMapOptions::default() };
    let sol = log_map_with(chart, spray, base, p, &opts, &[])?;
    Ok((sol.end_theta, sol.w))
}

/// Unit tangent at `p` of the unit-speed curve from `base` through `p`.
pub fn radial_field(chart: &ConformalChart, spray: &SprayField, base: Point, p: Point) -> Result<TangentVec> {
    let (theta, _) = radial_solution(chart, spray, base, p, None)?;
    let e = (-chart.psi(p)).exp();
    Ok(TangentVec::new(p, e * theta.cos(), e * theta.sin()))
}

/// The averaged one-form `η = ⅓(η_x + η_y + η_z)` for three base points.
#[derive(Debug, Clone)]
pub struct OneFormField<'a> {
    chart: &'a ConformalChart,
    spray: &'a SprayField,
    bases: [Point; 3],
}

impl<'a> OneFormField<'a> {
    /// Rejects coincident bases and bases lying on one connecting curve.
    pub fn new(chart: &'a ConformalChart, spray: &'a SprayField, bases: [Point; 3]) -> Result<OneFormField<'a>> {
        if !spray.is_magnetic() {
            return Err(Error::InvalidArgument("metrization needs a magnetic spray".into()));
        }
        for b in &bases {
            chart.require(*b)?;
        }
        for i in 0..3 {
            for j in i + 1..3 {
                if bases[i].dist(bases[j]) < MIN_BASE_DISTANCE {
                    return Err(Error::InvalidArgument("base points must be distinct".into()));
                }
            }
        }
        if on_common_curve(chart, spray, &bases)? {
            return Err(Error::InvalidArgument("base points lie on a common curve of the spray".into()));
        }
        Ok(OneFormField { chart, spray, bases })
    }

    pub fn bases(&self) -> [Point; 3] {
        self.bases
    }

    /// Covector components `(η₁, η₂)` at `p`. `guesses` carries warm starts
    /// between nearby evaluations.
    pub fn at_with(&self, p: Point, guesses: &mut [Option<(f64, f64)>; 3]) -> Result<[f64; 2]> {
        let mut c = [0.0, 0.0];
        for (i, base) in self.bases.iter().enumerate() {
            let (theta, w) = radial_solution(self.chart, self.spray, *base, p, guesses[i])?;
            guesses[i] = Some(w);
            c[0] += theta.cos();
            c[1] += theta.sin();
        }
        let s = self.chart.psi(p).exp() / 3.0;
        Ok([s * c[0], s * c[1]])
    }

    pub fn at(&self, p: Point) -> Result<[f64; 2]> {
        self.at_with(p, &mut [None; 3])
    }

    /// `|η|_g` at `p`.
    pub fn norm(&self, p: Point) -> Result<f64> {
        let c = self.at(p)?;
        Ok((-self.chart.psi(p)).exp() * c[0].hypot(c[1]))
    }
}

/// Three-point collinearity test by shooting: does the curve through the
/// first two bases, followed both ways, pass through the third?
fn on_common_curve(chart: &ConformalChart, spray: &SprayField, bases: &[Point; 3]) -> Result<bool> {
    let [a, b, c] = *bases;
    let sol = match log_map_with(chart, spray, a, b, &LogMapOptions::default(), &[]) {
        Ok(s) => s,
        // no connecting curve at all: treated as not on a common curve
        Err(_) => return Ok(false),
    };
    let theta = sol.w.1.atan2(sol.w.0);
    let len = sol.g_norm();
    let scale = a.dist(b).max(a.dist(c)).max(b.dist(c));
    for dir in [1.0, -1.0] {
        let traj = integrate(chart, spray, a, theta, dir * 4.0 * len.max(1e-12), 1e-10)?;
        let samples = traj.uniform(4001);
        for w in samples.windows(2) {
            let (p, q) = (w[0].point(), w[1].point());
            if segment_distance(c, p, q) < 1e-6 * scale {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

fn segment_distance(c: Point, p: Point, q: Point) -> f64 {
    let (dx, dy) = (q.x - p.x, q.y - p.y);
    let l2 = dx * dx + dy * dy;
    let t = if l2 > 0.0 { (((c.x - p.x) * dx + (c.y - p.y) * dy) / l2).clamp(0.0, 1.0) } else { 0.0 };
    c.dist(Point::new(p.x + t * dx, p.y + t * dy))
}

/// `η` at `p` for the given bases.
pub fn eta_form(chart: &ConformalChart, spray: &SprayField, bases: [Point; 3], p: Point) -> Result<[f64; 2]> {
    OneFormField::new(chart, spray, bases)?.at(p)
}

#[derive(Debug, Clone, Copy)]
pub struct MetrizeOptions {
    pub n_squares: usize,
    pub n_pairs: usize,
    pub n_perturb: usize,
    /// Grid points per axis for the sup of `|η|_g`.
    pub grid: usize,
    pub seed: u64,
}

impl Default for MetrizeOptions {
    fn default() -> Self {
        MetrizeOptions { n_squares: 64, n_pairs: 20, n_perturb: 50, grid: 21, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StokesSquare {
    pub center: Point,
    pub side: f64,
    pub circulation: f64,
    pub flux: f64,
    /// `|∮η − ∬κω_g|` divided by the g-area of the square.
    pub relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthComparison {
    pub from: Point,
    pub to: Point,
    pub geodesic_length: f64,
    pub shortest_perturbed: f64,
    /// Perturbations strictly shorter than the geodesic.
    pub shorter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetrizationReport {
    pub bases: [Point; 3],
    pub grid_values: Vec<(Point, f64)>,
    pub sup_eta: f64,
    /// `1 − sup|η|_g`.
    pub delta: f64,
    pub squares: Vec<StokesSquare>,
    pub max_stokes_residual: f64,
    pub comparisons: Vec<LengthComparison>,
    pub geodesics_minimize: bool,
}

impl MetrizationReport {
    pub fn holds(&self, stokes_tol: f64) -> bool {
        self.delta > 0.0 && self.max_stokes_residual <= stokes_tol && self.geodesics_minimize
    }
}

fn random_in(region: &Region, rng: &mut ChaCha8Rng, keep: impl Fn(Point) -> bool) -> Result<Point> {
    let (x0, y0, x1, y1) = region.bbox();
    for _ in 0..100_000 {
        let p = Point::new(rng.gen_range(x0..x1), rng.gen_range(y0..y1));
        if region.contains(p) && keep(p) {
            return Ok(p);
        }
    }
    Err(Error::Empty("no admissible random point in the region".into()))
}

/// Circulation of `η` around the axis-aligned square, counterclockwise.
fn circulation(eta: &OneFormField<'_>, center: Point, side: f64, gauss: &[(f64, f64)]) -> Result<f64> {
    let h = 0.5 * side;
    let corners = [
        Point::new(center.x - h, center.y - h),
        Point::new(center.x + h, center.y - h),
        Point::new(center.x + h, center.y + h),
        Point::new(center.x - h, center.y + h),
    ];
    let mut guesses = [None; 3];
    let mut total = 0.0;
    for k in 0..4 {
        let (p, q) = (corners[k], corners[(k + 1) % 4]);
        let (dx, dy) = (q.x - p.x, q.y - p.y);
        for &(s, w) in gauss {
            let c = eta.at_with(p.lerp(q, s), &mut guesses)?;
            total += w * (c[0] * dx + c[1] * dy);
        }
    }
    Ok(total)
}

fn flux(chart: &ConformalChart, spray: &SprayField, center: Point, side: f64, gauss: &[(f64, f64)]) -> Result<(f64, f64)> {
    let (mut f, mut area) = (0.0, 0.0);
    for &(s, ws) in gauss {
        for &(t, wt) in gauss {
            let p = Point::new(center.x + (s - 0.5) * side, center.y + (t - 0.5) * side);
            let dens = (2.0 * chart.psi(p)).exp() * ws * wt * side * side;
            let k = spray.kappa(p).ok_or_else(|| Error::InvalidArgument("spray is not magnetic".into()))?;
            f += k * dens;
            area += dens;
        }
    }
    Ok((f, area))
}

/// F-length `∫(|c'|_g − η(c'))` of `c(s) = geo(s) + a·b(s)·ν` with a cubic
/// bump `b` vanishing at both ends.
fn randers_length(
    chart: &ConformalChart,
    eta: &OneFormField<'_>,
    nodes: &[(f64, Point, [f64; 2])],
    gauss: &[(f64, f64)],
    bump: (f64, f64, [f64; 2]),
) -> Result<f64> {
    let (amp, skew, nu) = bump;
    let mut guesses = [None; 3];
    let mut total = 0.0;
    for (&(s, p, d), &(_, weight)) in nodes.iter().zip(gauss) {
        let b = 4.0 * s * (1.0 - s) * (1.0 + skew * (2.0 * s - 1.0));
        let db = 4.0 * (1.0 - 2.0 * s) * (1.0 + skew * (2.0 * s - 1.0)) + 8.0 * skew * s * (1.0 - s);
        let c = Point::new(p.x + amp * b * nu[0], p.y + amp * b * nu[1]);
        let dc = [d[0] + amp * db * nu[0], d[1] + amp * db * nu[1]];
        let e = eta.at_with(c, &mut guesses)?;
        total += weight * (chart.psi(c).exp() * dc[0].hypot(dc[1]) - (e[0] * dc[0] + e[1] * dc[1]));
    }
    Ok(total)
}

const LENGTH_NODES: usize = 24;

/// Checks `|η|_g < 1` on `U`, `dη = κω_g` on small squares, and that the
/// connecting curves of the spray minimize the Randers length against bumps.
pub fn verify_metrization(
    chart: &ConformalChart,
    spray: &SprayField,
    region: &Region,
    bases: [Point; 3],
    opts: &MetrizeOptions,
) -> Result<MetrizationReport> {
    region.validate(chart)?;
    for b in &bases {
        if region.contains(*b) {
            return Err(Error::InvalidArgument(format!(
                "base ({}, {}) lies in the region",
                b.x, b.y
            )));
        }
    }
    let eta = OneFormField::new(chart, spray, bases)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let (x0, y0, x1, y1) = region.bbox();
    let mut grid_values = Vec::new();
    let mut sup: f64 = 0.0;
    let n = opts.grid.max(2);
    for j in 0..n {
        for i in 0..n {
            let p = Point::new(
                x0 + (x1 - x0) * i as f64 / (n - 1) as f64,
                y0 + (y1 - y0) * j as f64 / (n - 1) as f64,
            );
            if region.contains(p) {
                let v = eta.norm(p)?;
                sup = sup.max(v);
                grid_values.push((p, v));
            }
        }
    }

    let side = region.diameter() / 64.0;
    let gauss32 = gauss_legendre(32);
    let gauss8 = gauss_legendre(8);
    let mut squares = Vec::with_capacity(opts.n_squares);
    let h = 0.5 * side;
    for _ in 0..opts.n_squares {
        let center = random_in(region, &mut rng, |c| {
            [(-h, -h), (h, -h), (h, h), (-h, h)].iter().all(|(dx, dy)| region.contains(Point::new(c.x + dx, c.y + dy)))
        })?;
        let circ = circulation(&eta, center, side, &gauss32)?;
        let (fl, area) = flux(chart, spray, center, side, &gauss8)?;
        squares.push(StokesSquare {
            center,
            side,
            circulation: circ,
            flux: fl,
            relative_residual: (circ - fl).abs() / area,
        });
    }
    let max_stokes = squares.iter().fold(0.0f64, |m, s| m.max(s.relative_residual));

    let gauss = gauss_legendre(LENGTH_NODES);
    let center = region.center();
    let shrink = |p: Point| Point::new(center.x + 0.8 * (p.x - center.x), center.y + 0.8 * (p.y - center.y));
    let mut comparisons = Vec::with_capacity(opts.n_pairs);
    for _ in 0..opts.n_pairs {
        let p = shrink(random_in(region, &mut rng, |_| true)?);
        let q = shrink(random_in(region, &mut rng, |x| x.dist(p) > 0.1 * region.diameter())?);
        let sol = log_map_with(chart, spray, p, q, &LogMapOptions::default(), &[])?;
        let len = sol.g_norm();
        let theta0 = sol.w.1.atan2(sol.w.0);
        let stops: Vec<f64> = gauss.iter().map(|(s, _)| s * len).collect();
        let traj = crate::spray::integrate_with_stops(chart, spray, p, theta0, len, 1e-12, &stops)?;
        let mut nodes = Vec::with_capacity(gauss.len());
        for &(s, _) in &gauss {
            let st = traj.at(s * len).ok_or(Error::DomainExit { t: s * len })?;
            let pt = st.point();
            let sp = len * (-chart.psi(pt)).exp();
            nodes.push((s, pt, [sp * st.theta.cos(), sp * st.theta.sin()]));
        }
        let d = p.dist(q);
        let nu = [-(q.y - p.y) / d, (q.x - p.x) / d];
        let geo = randers_length(chart, &eta, &nodes, &gauss, (0.0, 0.0, nu))?;
        let mut shortest = f64::INFINITY;
        let mut shorter = 0;
        for _ in 0..opts.n_perturb {
            let amp = rng.gen_range(-0.05..0.05) * d;
            let skew = rng.gen_range(-1.0..1.0);
            let l = randers_length(chart, &eta, &nodes, &gauss, (amp, skew, nu))?;
            if l < geo {
                shorter += 1;
            }
            shortest = shortest.min(l);
        }
        comparisons.push(LengthComparison { from: p, to: q, geodesic_length: geo, shortest_perturbed: shortest, shorter });
    }
    let minimize = comparisons.iter().all(|c| c.shorter == 0);
    Ok(MetrizationReport {
        bases,
        grid_values,
        sup_eta: sup,
        delta: 1.0 - sup,
        squares,
        max_stokes_residual: max_stokes,
        comparisons,
        geodesics_minimize: minimize,
    })
}
