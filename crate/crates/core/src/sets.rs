//! Planar regions, deterministic sampling and weighted area by rasterization.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surface::{ConformalChart, Point};

/// A closed region in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Disc { cx: f64, cy: f64, r: f64 },
    /// Simple polygon; orientation is irrelevant.
    Polygon(Vec<Point>),
    Annulus { cx: f64, cy: f64, r_inner: f64, r_outer: f64 },
}

impl Region {
    pub fn disc(cx: f64, cy: f64, r: f64) -> Region {
        Region::Disc { cx, cy, r }
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Region {
        Region::Polygon(vec![Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)])
    }

    pub fn contains(&self, p: Point) -> bool {
        match self {
            Region::Disc { cx, cy, r } => (p.x - cx).powi(2) + (p.y - cy).powi(2) <= r * r,
            Region::Annulus { cx, cy, r_inner, r_outer } => {
                let d2 = (p.x - cx).powi(2) + (p.y - cy).powi(2);
                d2 >= r_inner * r_inner && d2 <= r_outer * r_outer
            }
            Region::Polygon(v) => point_in_polygon(v, p),
        }
    }

    /// `(xmin, ymin, xmax, ymax)`.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        match self {
            Region::Disc { cx, cy, r } => (cx - r, cy - r, cx + r, cy + r),
            Region::Annulus { cx, cy, r_outer, .. } => (cx - r_outer, cy - r_outer, cx + r_outer, cy + r_outer),
            Region::Polygon(v) => v.iter().fold(
                (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
                |(a, b, c, d), p| (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y)),
            ),
        }
    }

    pub fn diameter(&self) -> f64 {
        let (a, b, c, d) = self.bbox();
        match self {
            Region::Disc { r, .. } => 2.0 * r,
            Region::Annulus { r_outer, .. } => 2.0 * r_outer,
            Region::Polygon(v) => {
                let mut m = 0.0f64;
                for p in v {
                    for q in v {
                        m = m.max(p.dist(*q));
                    }
                }
                if v.is_empty() {
                    (c - a).hypot(d - b)
                } else {
                    m
                }
            }
        }
    }

    /// Euclidean chart area.
    pub fn chart_area(&self) -> f64 {
        match self {
            Region::Disc { r, .. } => PI * r * r,
            Region::Annulus { r_inner, r_outer, .. } => PI * (r_outer * r_outer - r_inner * r_inner),
            Region::Polygon(v) => polygon_area(v).abs(),
        }
    }

    pub fn perimeter(&self) -> f64 {
        match self {
            Region::Disc { r, .. } => 2.0 * PI * r,
            Region::Annulus { r_inner, r_outer, .. } => 2.0 * PI * (r_inner + r_outer),
            Region::Polygon(v) => (0..v.len()).map(|i| v[i].dist(v[(i + 1) % v.len()])).sum(),
        }
    }

    /// Center of a disc, centroid of a polygon.
    pub fn center(&self) -> Point {
        match self {
            Region::Disc { cx, cy, .. } | Region::Annulus { cx, cy, .. } => Point::new(*cx, *cy),
            Region::Polygon(v) => {
                let a = polygon_area(v);
                if a.abs() < 1e-300 {
                    let n = v.len().max(1) as f64;
                    return Point::new(v.iter().map(|p| p.x).sum::<f64>() / n, v.iter().map(|p| p.y).sum::<f64>() / n);
                }
                let (mut sx, mut sy) = (0.0, 0.0);
                for i in 0..v.len() {
                    let (p, q) = (v[i], v[(i + 1) % v.len()]);
                    let c = p.x * q.y - q.x * p.y;
                    sx += (p.x + q.x) * c;
                    sy += (p.y + q.y) * c;
                }
                Point::new(sx / (6.0 * a), sy / (6.0 * a))
            }
        }
    }

    /// Radius of a disc inscribed in the region, centered at [`Region::center`]
    /// (a lower bound for polygons).
    pub fn inradius(&self) -> f64 {
        match self {
            Region::Disc { r, .. } => *r,
            Region::Annulus { r_inner, r_outer, .. } => 0.5 * (r_outer - r_inner),
            Region::Polygon(v) => {
                let c = self.center();
                if !self.contains(c) {
                    return 0.0;
                }
                (0..v.len())
                    .map(|i| segment_distance(c, v[i], v[(i + 1) % v.len()]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Ordered boundary points. Discs and polygons get `n` points; the
    /// polygon's vertices are always included.
    pub fn boundary(&self, n: usize) -> Vec<Point> {
        match self {
            Region::Disc { cx, cy, r } => (0..n)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / n as f64;
                    Point::new(cx + r * a.cos(), cy + r * a.sin())
                })
                .collect(),
            Region::Annulus { cx, cy, r_outer, .. } => Region::disc(*cx, *cy, *r_outer).boundary(n),
            Region::Polygon(v) => {
                let per = self.perimeter();
                let mut out = Vec::with_capacity(n + v.len());
                for i in 0..v.len() {
                    let (p, q) = (v[i], v[(i + 1) % v.len()]);
                    let m = ((p.dist(q) / per * n as f64).ceil() as usize).max(1);
                    for j in 0..m {
                        out.push(p.lerp(q, j as f64 / m as f64));
                    }
                }
                out
            }
        }
    }

    /// Checks the region against the chart: closure inside the domain and, for
    /// polygons, simplicity.
    pub fn validate(&self, chart: &ConformalChart) -> Result<()> {
        match self {
            Region::Disc { r, .. } if !(*r > 0.0) => {
                return Err(Error::InvalidArgument("disc radius must be positive".into()))
            }
            Region::Annulus { r_inner, r_outer, .. } if !(*r_inner > 0.0 && r_outer > r_inner) => {
                return Err(Error::InvalidArgument("annulus radii must satisfy 0 < inner < outer".into()))
            }
            Region::Polygon(v) => {
                if v.len() < 3 {
                    return Err(Error::InvalidArgument("polygon needs at least three vertices".into()));
                }
                if !polygon_is_simple(v) {
                    return Err(Error::InvalidArgument("polygon is not simple".into()));
                }
            }
            _ => {}
        }
        let mut probes = self.boundary(256);
        if let Region::Annulus { cx, cy, r_inner, .. } = self {
            probes.extend(Region::disc(*cx, *cy, *r_inner).boundary(256));
        } else {
            probes.push(self.center());
        }
        for p in probes {
            if !chart.contains(p) {
                return Err(Error::InvalidArgument(format!(
                    "region reaches ({}, {}), outside the chart domain",
                    p.x, p.y
                )));
            }
        }
        Ok(())
    }
}

fn polygon_area(v: &[Point]) -> f64 {
    let mut s = 0.0;
    for i in 0..v.len() {
        let (p, q) = (v[i], v[(i + 1) % v.len()]);
        s += p.x * q.y - q.x * p.y;
    }
    0.5 * s
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0) };
    p.dist(Point::new(a.x + t * dx, a.y + t * dy))
}

/// Even–odd rule; points on an edge count as inside.
pub fn point_in_polygon(v: &[Point], p: Point) -> bool {
    let n = v.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if segment_distance(p, a, b) < 1e-14 {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// True when no two non-adjacent edges cross.
pub fn polygon_is_simple(v: &[Point]) -> bool {
    let n = v.len();
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    Sampled,
    MinkowskiImage { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub provenance: Provenance,
    /// Pairs dropped because shooting failed (Minkowski images only).
    pub failures: usize,
}

/// Lattice points at the given spacing inside the region plus boundary points
/// at the same spacing.
pub fn sample_region(region: &Region, spacing: f64) -> Result<PointCloud> {
    if !(spacing > 0.0) {
        return Err(Error::InvalidArgument("spacing must be positive".into()));
    }
    if region.chart_area() <= 0.0 {
        return Err(Error::Empty("region has no area".into()));
    }
    let (x0, y0, x1, y1) = region.bbox();
    let nx = ((x1 - x0) / spacing + 1e-9).floor() as usize;
    let ny = ((y1 - y0) / spacing + 1e-9).floor() as usize;
    let mut points = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            let p = Point::new(x0 + i as f64 * spacing, y0 + j as f64 * spacing);
            if region.contains(p) {
                points.push(p);
            }
        }
    }
    let nb = (region.perimeter() / spacing).ceil() as usize;
    points.extend(region.boundary(nb.max(3)));
    if let Region::Annulus { cx, cy, r_inner, .. } = region {
        let n = (2.0 * PI * r_inner / spacing).ceil() as usize;
        points.extend(Region::disc(*cx, *cy, *r_inner).boundary(n.max(3)));
    }
    if points.is_empty() {
        return Err(Error::Empty("no sample points".into()));
    }
    Ok(PointCloud { points, provenance: Provenance::Sampled, failures: 0 })
}

/// A boolean grid of square cells.
#[derive(Debug, Clone)]
pub struct Raster {
    pub x0: f64,
    pub y0: f64,
    pub cell: f64,
    pub nx: usize,
    pub ny: usize,
    bits: Vec<bool>,
}

impl Raster {
    /// Grid covering the box with cells aligned to multiples of `cell`.
    pub fn covering(xmin: f64, ymin: f64, xmax: f64, ymax: f64, cell: f64) -> Raster {
        let x0 = (xmin / cell).floor() * cell;
        let y0 = (ymin / cell).floor() * cell;
        let nx = (((xmax - x0) / cell).floor() as usize) + 1;
        let ny = (((ymax - y0) / cell).floor() as usize) + 1;
        Raster { x0, y0, cell, nx, ny, bits: vec![false; nx * ny] }
    }

    pub fn center(&self, i: usize, j: usize) -> Point {
        Point::new(self.x0 + (i as f64 + 0.5) * self.cell, self.y0 + (j as f64 + 0.5) * self.cell)
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[j * self.nx + i]
    }

    pub fn set(&mut self, i: usize, j: usize) {
        self.bits[j * self.nx + i] = true;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Marks the cell containing `p`, if it lies on the grid.
    pub fn mark_point(&mut self, p: Point) {
        let i = ((p.x - self.x0) / self.cell).floor();
        let j = ((p.y - self.y0) / self.cell).floor();
        if i >= 0.0 && j >= 0.0 && (i as usize) < self.nx && (j as usize) < self.ny {
            self.set(i as usize, j as usize);
        }
    }

    /// Marks every cell whose center satisfies `inside`.
    pub fn mark_where(&mut self, inside: impl Fn(Point) -> bool) {
        for j in 0..self.ny {
            for i in 0..self.nx {
                if inside(self.center(i, j)) {
                    self.set(i, j);
                }
            }
        }
    }

    /// Marks cells whose centers lie inside the closed polygon (even–odd rule).
    pub fn fill_polygon(&mut self, v: &[Point]) {
        let n = v.len();
        if n < 3 {
            for p in v {
                self.mark_point(*p);
            }
            return;
        }
        let (ymin, ymax) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.y), b.max(p.y)));
        let j0 = (((ymin - self.y0) / self.cell - 0.5).ceil().max(0.0)) as usize;
        let j1 = ((ymax - self.y0) / self.cell - 0.5).floor();
        if j1 < 0.0 {
            return;
        }
        let j1 = (j1 as usize).min(self.ny.saturating_sub(1));
        let mut xs: Vec<f64> = Vec::new();
        for j in j0..=j1 {
            let yc = self.y0 + (j as f64 + 0.5) * self.cell;
            xs.clear();
            for k in 0..n {
                let (a, b) = (v[k], v[(k + 1) % n]);
                if (a.y > yc) != (b.y > yc) {
                    xs.push(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
                }
            }
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for pair in xs.chunks(2) {
                if pair.len() < 2 {
                    break;
                }
                let i0 = ((pair[0] - self.x0) / self.cell - 0.5).ceil().max(0.0) as usize;
                let i1 = ((pair[1] - self.x0) / self.cell - 0.5).floor();
                if i1 < 0.0 {
                    continue;
                }
                let i1 = (i1 as usize).min(self.nx.saturating_sub(1));
                for i in i0..=i1 {
                    self.set(i, j);
                }
            }
        }
    }

    /// `Σ e^{2ψ−φ}(c)·cell²` over marked cells.
    pub fn weighted_area(&self, chart: &ConformalChart) -> Result<f64> {
        let mut total = 0.0;
        for j in 0..self.ny {
            for i in 0..self.nx {
                if self.get(i, j) {
                    let c = self.center(i, j);
                    chart.require(c)?;
                    total += chart.area_density(c);
                }
            }
        }
        Ok(total * self.cell * self.cell)
    }
}

/// What to measure.
pub enum AreaTarget<'a> {
    Region(&'a Region),
    Cloud(&'a PointCloud),
}

/// Weighted area `∫ e^{−φ} ω_g` by rasterization with the given cell size.
/// Regions count cells whose center lies inside; clouds count cells that
/// contain at least one point.
pub fn measure_area(chart: &ConformalChart, target: AreaTarget<'_>, cell: f64) -> Result<f64> {
    if !(cell > 0.0) {
        return Err(Error::InvalidArgument("cell size must be positive".into()));
    }
    match target {
        AreaTarget::Region(region) => {
            let (a, b, c, d) = region.bbox();
            let mut raster = Raster::covering(a, b, c, d, cell);
            raster.mark_where(|p| region.contains(p));
            raster.weighted_area(chart)
        }
        AreaTarget::Cloud(cloud) => {
            if cloud.points.is_empty() {
                return Ok(0.0);
            }
            let (a, b, c, d) = cloud.points.iter().fold(
                (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
                |(a, b, c, d), p| (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y)),
            );
            let mut raster = Raster::covering(a, b, c, d, cell);
            for p in &cloud.points {
                raster.mark_point(*p);
            }
            raster.weighted_area(chart)
        }
    }
}
