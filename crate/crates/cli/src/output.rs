//! CSV and SVG writers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use spraylab::sets::Region;
use spraylab::surface::Point;

/// Decimal with 12 significant digits; scientific notation outside
/// `[1e-4, 1e15)`.
pub fn num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-4..15).contains(&mag) {
        return format!("{v:.11e}");
    }
    let decimals = (11 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" { "0".into() } else { t.to_string() }
    } else {
        s
    }
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        Csv { text: format!("{}\n", header.join(",")) }
    }

    pub fn row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|v| num(*v)).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn raw_row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        write_file(dir, name, &self.text)
    }
}

pub fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// SVG in chart coordinates (y up), drawn with a uniform margin.
pub struct Svg {
    bbox: (f64, f64, f64, f64),
    body: String,
}

impl Svg {
    pub fn new(points: impl IntoIterator<Item = Point>) -> Svg {
        let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            if p.x.is_finite() && p.y.is_finite() {
                b = (b.0.min(p.x), b.1.min(p.y), b.2.max(p.x), b.3.max(p.y));
            }
        }
        if !b.0.is_finite() {
            b = (-1.0, -1.0, 1.0, 1.0);
        }
        let pad = 0.05 * (b.2 - b.0).max(b.3 - b.1).max(1e-9);
        Svg { bbox: (b.0 - pad, b.1 - pad, b.2 + pad, b.3 + pad), body: String::new() }
    }

    fn stroke(&self) -> f64 {
        (self.bbox.2 - self.bbox.0).max(self.bbox.3 - self.bbox.1) / 400.0
    }

    pub fn polyline(&mut self, pts: &[Point], color: &str, closed: bool) {
        let coords: Vec<String> = pts.iter().map(|p| format!("{},{}", num(p.x), num(-p.y))).collect();
        let tag = if closed { "polygon" } else { "polyline" };
        let _ = writeln!(
            self.body,
            r#"<{tag} points="{}" fill="none" stroke="{color}" stroke-width="{}"/>"#,
            coords.join(" "),
            num(self.stroke())
        );
    }

    pub fn region(&mut self, r: &Region, color: &str) {
        match r {
            Region::Annulus { cx, cy, r_inner, .. } => {
                self.polyline(&r.boundary(180), color, true);
                self.polyline(&Region::disc(*cx, *cy, *r_inner).boundary(180), color, true);
            }
            _ => self.polyline(&r.boundary(360), color, true),
        }
    }

    pub fn dots(&mut self, pts: &[Point], color: &str) {
        let r = num(self.stroke());
        // keep files small for dense clouds
        let step = (pts.len() / 20_000).max(1);
        for p in pts.iter().step_by(step) {
            let _ = writeln!(self.body, r#"<circle cx="{}" cy="{}" r="{r}" fill="{color}"/>"#, num(p.x), num(-p.y));
        }
    }

    /// Squares of side `cell` colored by value: blue below zero, red above.
    pub fn heat(&mut self, values: &[(Point, f64)], cell: f64) {
        let scale = values.iter().fold(0.0f64, |m, (_, v)| m.max(v.abs())).max(1e-300);
        for (p, v) in values {
            let t = (v / scale).clamp(-1.0, 1.0);
            let (r, g, b) = if t >= 0.0 {
                (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
            } else {
                (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
            };
            let _ = writeln!(
                self.body,
                r#"<rect x="{}" y="{}" width="{c}" height="{c}" fill="rgb({},{},{})"/>"#,
                num(p.x - cell / 2.0),
                num(-p.y - cell / 2.0),
                r as u8,
                g as u8,
                b as u8,
                c = num(cell)
            );
        }
    }

    pub fn finish(&self) -> String {
        let (x0, y0, x1, y1) = self.bbox;
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\" width=\"800\" height=\"{}\">\n{}</svg>\n",
            num(x0),
            num(-y1),
            num(x1 - x0),
            num(y1 - y0),
            (800.0 * (y1 - y0) / (x1 - x0)).round().max(1.0),
            self.body
        )
    }
}
