mod config;
mod output;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand, ValueEnum};

use config::{Overrides, RegionSpec, RegionsSpec, Scene, SceneConfig};
use output::{num, write_file, Csv, Svg};
use spraylab::bm::{find_violation, minkowski_average, verify_bm, BmOptions, BmReport, ViolationOutcome};
use spraylab::catalog::{builtin, EntryParams, NAMES};
use spraylab::curvature::{check_cd0n, check_nnc};
use spraylab::jacobi::{concavity_check, jacobi_trace, needle_bm_1d, SampledDensity, Variation, DEFAULT_EPS};
use spraylab::metrize::{verify_metrization, MetrizeOptions};
use spraylab::sets::Region;
use spraylab::spray::integrate;
use spraylab::surface::Point;

#[derive(Parser, Debug)]
#[command(name = "spraylab", version, about = "Geodesics, curvature conditions and Brunn-Minkowski checks for sprays on surfaces")]
struct Cli {
    /// JSON scene configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for report.txt, CSV and SVG files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Raster cell size.
    #[arg(long, global = true)]
    cell: Option<f64>,
    /// Sampling spacing.
    #[arg(long, global = true)]
    spacing: Option<f64>,
    /// Interpolation parameter in (0, 1).
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Dimension parameter N of the inequality.
    #[arg(long = "bigN", global = true)]
    big_n: Option<f64>,
    /// Catalog entry to use.
    #[arg(long, global = true)]
    entry: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariationKind {
    Normal,
    Radial,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one curve of the spray.
    Geodesic {
        /// Number of output samples.
        #[arg(long, default_value_t = 401)]
        samples: usize,
    },
    /// Evaluate the curvature condition on the entry grid.
    CheckCondition {
        /// Check the weighted condition with this N instead.
        #[arg(long)]
        cd0n: Option<f64>,
    },
    /// Jacobian trace along the seed curve and its concavity.
    Jacobi {
        #[arg(long, value_enum, default_value = "normal")]
        variation: VariationKind,
        #[arg(long, default_value_t = 201)]
        samples: usize,
    },
    /// Point cloud of the Minkowski average of regions a and b.
    Minkowski,
    /// Brunn-Minkowski check for regions a and b.
    VerifyBm,
    /// Search for a violation along the seed curve.
    FindViolation,
    /// Randers metrization checks on region u.
    Metrize,
    /// One-dimensional needle inequality.
    Needle1d,
    /// Built-in entries.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Subcommand, Debug)]
enum CatalogAction {
    /// Print the entry names.
    List,
}

/// Exit code 0: verdict holds; 1: verdict fails.
struct Finished {
    pass: bool,
    report: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(f) => {
            print!("{}", f.report);
            if f.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<Finished> {
    if let Command::Catalog { action: CatalogAction::List } = cli.command {
        let mut text = String::new();
        for name in NAMES {
            let e = builtin(name, &EntryParams::default())?;
            let _ = writeln!(text, "{name}\t{}", e.notes);
        }
        return Ok(Finished { pass: true, report: text });
    }
    let config = match &cli.config {
        Some(path) => SceneConfig::load(path)?,
        None => SceneConfig::default(),
    };
    let overrides = Overrides {
        entry: cli.entry.clone(),
        seed: cli.seed,
        cell: cli.cell,
        spacing: cli.spacing,
        lambda: cli.lambda,
        big_n: cli.big_n,
    };
    let scene = Scene::resolve(config, &overrides)?;
    let out = &cli.out;
    let finished = match &cli.command {
        Command::Geodesic { samples } => geodesic(&scene, out, *samples)?,
        Command::CheckCondition { cd0n } => check_condition(&scene, out, *cd0n)?,
        Command::Jacobi { variation, samples } => jacobi(&scene, out, *variation, *samples)?,
        Command::Minkowski => minkowski(&scene, out)?,
        Command::VerifyBm => verify(&scene, out)?,
        Command::FindViolation => violation(&scene, out)?,
        Command::Metrize => metrize(&scene, out)?,
        Command::Needle1d => needle(&scene, out)?,
        Command::Catalog { .. } => unreachable!(),
    };
    write_file(out, "report.txt", &finished.report)?;
    Ok(finished)
}

fn header(scene: &Scene, title: &str) -> String {
    format!(
        "{title}\nentry: {}\nchart: {}\nspray: {}\nrandom seed: {}\n",
        scene.entry.name,
        scene.entry.chart.name(),
        scene.entry.spray.describe(),
        scene.seed
    )
}

fn geodesic(scene: &Scene, out: &PathBuf, samples: usize) -> Result<Finished> {
    let e = &scene.entry;
    let s = e.seed;
    let traj = integrate(&e.chart, &e.spray, s.start, s.theta, s.length, scene.tol)?;
    let pts = traj.uniform(samples.max(2));
    let mut csv = Csv::new(&["t", "x", "y", "theta"]);
    for p in &pts {
        csv.row(&[p.t, p.x, p.y, p.theta]);
    }
    csv.write(out, "geodesic.csv")?;
    let line: Vec<Point> = pts.iter().map(|p| p.point()).collect();
    let mut svg = Svg::new(line.iter().copied());
    svg.polyline(&line, "black", false);
    write_file(out, "geodesic.svg", &svg.finish())?;
    let end = traj.end();
    let mut r = header(scene, "curve");
    let _ = writeln!(r, "start: ({}, {}) theta {}", num(s.start.x), num(s.start.y), num(s.theta));
    let _ = writeln!(r, "requested length: {}", num(s.length));
    let _ = writeln!(r, "reached length: {}", num(traj.reached()));
    let _ = writeln!(r, "end: ({}, {}) theta {}", num(end.x), num(end.y), num(end.theta));
    let _ = writeln!(r, "status: {:?}", traj.status());
    let _ = writeln!(r, "steps: {} accepted, {} rejected", traj.accepted_steps(), traj.rejected_steps());
    Ok(Finished { pass: !traj.exited(), report: r })
}

fn check_condition(scene: &Scene, out: &PathBuf, cd0n: Option<f64>) -> Result<Finished> {
    let e = &scene.entry;
    let report = match cd0n {
        Some(n) => check_cd0n(&e.chart, &e.spray, n, &e.grid)?,
        None => check_nnc(&e.chart, &e.spray, &e.grid)?,
    };
    let mut csv = Csv::new(&["x", "y", "value"]);
    for (p, v) in &report.values {
        csv.row(&[p.x, p.y, *v]);
    }
    csv.write(out, "condition.csv")?;
    let (x0, _, x1, _) = e.working.bbox();
    let mut svg = Svg::new(report.values.iter().map(|(p, _)| *p));
    svg.heat(&report.values, (x1 - x0) / 64.0);
    svg.region(&e.working, "black");
    write_file(out, "condition.svg", &svg.finish())?;
    let mut r = header(scene, "curvature condition");
    let _ = writeln!(r, "condition: {}", report.condition);
    let _ = writeln!(r, "grid points: {}, directions: {}", report.values.len(), report.n_angles);
    let _ = writeln!(r, "minimum: {}", num(report.min_value));
    let _ = writeln!(r, "at: ({}, {}) theta {}", num(report.argmin.x), num(report.argmin.y), num(report.argmin_theta));
    let _ = writeln!(r, "direction spread of k: {}", num(report.magnetic_defect));
    let _ = writeln!(r, "compatibility defect: {}", num(report.compatibility_defect));
    let _ = writeln!(r, "tolerance: {}", num(report.tolerance));
    let _ = writeln!(r, "verdict: {:?}", report.verdict);
    Ok(Finished { pass: report.verdict.holds(), report: r })
}

fn jacobi(scene: &Scene, out: &PathBuf, kind: VariationKind, samples: usize) -> Result<Finished> {
    let e = &scene.entry;
    let s = e.seed;
    let variation = match kind {
        VariationKind::Normal => Variation::NORMAL,
        VariationKind::Radial => Variation::RADIAL,
    };
    let tr = jacobi_trace(&e.chart, &e.spray, s.start, s.theta, s.length, variation, DEFAULT_EPS, samples.max(3))?;
    let conc = concavity_check(&tr)?;
    let mut csv = Csv::new(&["t", "x", "y", "theta", "j"]);
    for (i, t) in tr.t.iter().enumerate() {
        let st = tr.states[i];
        csv.row(&[*t, st[0], st[1], st[2], tr.j[i]]);
    }
    csv.write(out, "jacobi.csv")?;
    let mut r = header(scene, "jacobian trace");
    let _ = writeln!(r, "variation: {kind:?}, eps {}", num(tr.eps));
    let _ = writeln!(r, "max |J|: {}", num(tr.max_abs()));
    let _ = writeln!(r, "max second derivative: {} at t = {}", num(conc.max_second_difference), num(conc.at));
    let _ = writeln!(r, "tolerance: {}", num(conc.tolerance));
    let _ = writeln!(r, "concave: {}", conc.concave);
    let _ = writeln!(r, "note: only the sampled variation is checked");
    Ok(Finished { pass: conc.concave, report: r })
}

fn spacing_or_default(scene: &Scene, a: &Region, b: &Region) -> f64 {
    scene.spacing.unwrap_or_else(|| a.diameter().min(b.diameter()) / 16.0)
}

fn outline_svg(regions: &[(&Region, &str)], extra: &[Point]) -> Svg {
    let mut pts: Vec<Point> = extra.to_vec();
    for (r, _) in regions {
        pts.extend(r.boundary(64));
    }
    let mut svg = Svg::new(pts);
    for (r, c) in regions {
        svg.region(r, c);
    }
    svg
}

fn minkowski(scene: &Scene, out: &PathBuf) -> Result<Finished> {
    let e = &scene.entry;
    let (a, b) = (scene.region_a()?, scene.region_b()?);
    let spacing = spacing_or_default(scene, &a, &b);
    let cloud = minkowski_average(&e.chart, &e.spray, &a, &b, scene.lambda, spacing)?;
    let mut csv = Csv::new(&["x", "y"]);
    for p in &cloud.points {
        csv.row(&[p.x, p.y]);
    }
    csv.write(out, "minkowski.csv")?;
    let mut svg = outline_svg(&[(&a, "blue"), (&b, "green")], &cloud.points);
    svg.dots(&cloud.points, "red");
    write_file(out, "minkowski.svg", &svg.finish())?;
    let mut r = header(scene, "Minkowski average");
    let _ = writeln!(r, "lambda: {}", num(scene.lambda));
    let _ = writeln!(r, "spacing: {}", num(spacing));
    let _ = writeln!(r, "points: {}", cloud.points.len());
    let _ = writeln!(r, "failed shots: {}", cloud.failures);
    Ok(Finished { pass: true, report: r })
}

const BM_COLUMNS: [&str; 15] = [
    "lambda", "exponent", "mu_a", "mu_b", "mu_average", "lhs", "rhs", "margin", "tol_rel", "holds", "cell", "spacing",
    "boundary_points", "shots", "failures",
];

fn bm_row(r: &BmReport) -> Vec<String> {
    vec![
        num(r.lambda),
        num(r.exponent),
        num(r.mu_a),
        num(r.mu_b),
        num(r.mu_average),
        num(r.lhs),
        num(r.rhs),
        num(r.margin),
        num(r.tol_rel),
        r.holds.to_string(),
        num(r.cell),
        num(r.spacing),
        r.boundary_points.to_string(),
        r.shots.to_string(),
        r.failures.to_string(),
    ]
}

fn bm_text(r: &BmReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "lambda: {}, N: {}", num(r.lambda), num(1.0 / r.exponent));
    let _ = writeln!(s, "mu(A): {}", num(r.mu_a));
    let _ = writeln!(s, "mu(B): {}", num(r.mu_b));
    let _ = writeln!(s, "mu(M): {}", num(r.mu_average));
    let _ = writeln!(s, "lhs: {}", num(r.lhs));
    let _ = writeln!(s, "rhs: {}", num(r.rhs));
    let _ = writeln!(s, "margin: {} ({} of rhs)", num(r.margin), num(r.relative_margin()));
    let _ = writeln!(s, "tolerance: {} of rhs", num(r.tol_rel));
    let _ = writeln!(s, "cell: {}, sweep spacing: {}, outline points: {}", num(r.cell), num(r.spacing), r.boundary_points);
    let _ = writeln!(s, "shots: {}, failed: {}", r.shots, r.failures);
    let _ = writeln!(s, "holds: {}", r.holds);
    s
}

fn verify(scene: &Scene, out: &PathBuf) -> Result<Finished> {
    let e = &scene.entry;
    let (a, b) = (scene.region_a()?, scene.region_b()?);
    let opts = BmOptions { cell: scene.cell, spacing: scene.spacing, boundary_points: None };
    let report = verify_bm(&e.chart, &e.spray, &a, &b, scene.lambda, scene.big_n, &opts)?;
    let mut csv = Csv::new(&BM_COLUMNS);
    csv.raw_row(&bm_row(&report));
    csv.write(out, "bm.csv")?;
    write_file(out, "regions.svg", &outline_svg(&[(&a, "blue"), (&b, "green")], &[]).finish())?;
    let mut r = header(scene, "Brunn-Minkowski check");
    r.push_str(&bm_text(&report));
    Ok(Finished { pass: report.holds, report: r })
}

fn violation(scene: &Scene, out: &PathBuf) -> Result<Finished> {
    let e = &scene.entry;
    let s = e.seed;
    let outcome = find_violation(&e.chart, &e.spray, &s, scene.budget)?;
    let mut r = header(scene, "violation search");
    let _ = writeln!(r, "seed: ({}, {}) theta {} length {}", num(s.start.x), num(s.start.y), num(s.theta), num(s.length));
    let pass = match outcome {
        ViolationOutcome::Found(v) => {
            let _ = writeln!(r, "outcome: found");
            let _ = writeln!(r, "variation: normal {} angle {}", num(v.variation.normal), num(v.variation.angle));
            let _ = writeln!(r, "strips at t = {} and {}, lengths {} and {}, width parameter {}", num(v.x0), num(v.x1), num(v.l0), num(v.l1), num(v.delta));
            let _ = writeln!(r, "one-dimensional prediction: {} of rhs", num(v.needle_margin));
            r.push_str(&bm_text(&v.report));
            let mut csv = Csv::new(&BM_COLUMNS);
            csv.raw_row(&bm_row(&v.report));
            csv.write(out, "violation.csv")?;
            let strips = SceneConfig {
                entry: scene.config.entry.clone(),
                regions: RegionsSpec { a: Some(RegionSpec::from_region(&v.a)), b: Some(RegionSpec::from_region(&v.b)), u: None },
                lambda: Some(v.lambda),
                big_n: Some(2.0),
                ..SceneConfig::default()
            };
            write_file(out, "strips.json", &serde_json::to_string_pretty(&strips)?)?;
            write_file(out, "strips.svg", &outline_svg(&[(&v.a, "blue"), (&v.b, "green")], &[]).finish())?;
            false
        }
        ViolationOutcome::None { max_second_difference, best_relative_margin } => {
            let _ = writeln!(r, "outcome: none");
            let _ = writeln!(r, "max second derivative of J: {}", num(max_second_difference));
            if let Some(m) = best_relative_margin {
                let _ = writeln!(r, "best margin reached: {} of rhs", num(m));
            }
            true
        }
        ViolationOutcome::Inconclusive { evaluations, best_relative_margin } => {
            let _ = writeln!(r, "outcome: inconclusive after {evaluations} evaluations");
            let _ = writeln!(r, "best margin reached: {} of rhs", num(best_relative_margin));
            false
        }
    };
    Ok(Finished { pass, report: r })
}

fn metrize(scene: &Scene, out: &PathBuf) -> Result<Finished> {
    let e = &scene.entry;
    let u = match &scene.config.regions.u {
        Some(spec) => spec.to_region(),
        None => Region::disc(e.working.center().x, e.working.center().y, 0.3),
    };
    let bases = match scene.config.bases {
        Some(b) => b.map(|p| Point::new(p[0], p[1])),
        None => {
            // three points at twice the radius of U, 120 degrees apart
            let (c, rho) = match &u {
                Region::Disc { cx, cy, r } => (Point::new(*cx, *cy), *r),
                other => (other.center(), other.diameter() / 2.0),
            };
            [0.0f64, 1.0, 2.0].map(|k| {
                let a = std::f64::consts::FRAC_PI_2 + k * 2.0 * std::f64::consts::PI / 3.0;
                Point::new(c.x + 2.0 * rho * a.cos(), c.y + 2.0 * rho * a.sin())
            })
        }
    };
    let opts = MetrizeOptions { seed: scene.seed, ..MetrizeOptions::default() };
    let report = verify_metrization(&e.chart, &e.spray, &u, bases, &opts)?;
    let mut csv = Csv::new(&["x", "y", "eta_norm"]);
    for (p, v) in &report.grid_values {
        csv.row(&[p.x, p.y, *v]);
    }
    csv.write(out, "eta.csv")?;
    let mut csv = Csv::new(&["x", "y", "side", "circulation", "flux", "relative_residual"]);
    for s in &report.squares {
        csv.row(&[s.center.x, s.center.y, s.side, s.circulation, s.flux, s.relative_residual]);
    }
    csv.write(out, "stokes.csv")?;
    let mut csv = Csv::new(&["x0", "y0", "x1", "y1", "curve_length", "shortest_perturbed", "shorter"]);
    for c in &report.comparisons {
        csv.row(&[c.from.x, c.from.y, c.to.x, c.to.y, c.geodesic_length, c.shortest_perturbed, c.shorter as f64]);
    }
    csv.write(out, "lengths.csv")?;
    let stokes_tol = 1e-4;
    let mut r = header(scene, "Randers metrization");
    for (i, b) in bases.iter().enumerate() {
        let _ = writeln!(r, "base {}: ({}, {})", i + 1, num(b.x), num(b.y));
    }
    let _ = writeln!(r, "sup |eta|_g: {}", num(report.sup_eta));
    let _ = writeln!(r, "delta: {}", num(report.delta));
    let _ = writeln!(r, "max Stokes residual: {} over {} squares (tolerance {})", num(report.max_stokes_residual), report.squares.len(), num(stokes_tol));
    let shorter: usize = report.comparisons.iter().map(|c| c.shorter).sum();
    let _ = writeln!(r, "length comparisons: {} pairs, {} shorter perturbations", report.comparisons.len(), shorter);
    let _ = writeln!(r, "holds: {}", report.holds(stokes_tol));
    Ok(Finished { pass: report.holds(stokes_tol), report: r })
}

fn needle(scene: &Scene, out: &PathBuf) -> Result<Finished> {
    let spec = scene.config.needle.clone().unwrap_or(config::NeedleSpec {
        density: vec![1.0, 1.0],
        support: [0.0, 1.0],
        a: vec![[0.0, 0.1]],
        b: vec![[0.8, 1.0]],
    });
    if spec.density.len() < 2 {
        bail!("needle density needs at least two samples");
    }
    let density = SampledDensity::new(spec.support[0], spec.support[1], spec.density.clone())?;
    let a: Vec<(f64, f64)> = spec.a.iter().map(|v| (v[0], v[1])).collect();
    let b: Vec<(f64, f64)> = spec.b.iter().map(|v| (v[0], v[1])).collect();
    let rep = needle_bm_1d(&density, &a, &b, scene.lambda)?;
    let mut csv = Csv::new(&["lambda", "mu_a", "mu_b", "mu_average", "lhs", "rhs", "margin"]);
    csv.row(&[rep.lambda, rep.mu_a, rep.mu_b, rep.mu_average, rep.lhs, rep.rhs, rep.margin]);
    csv.write(out, "needle.csv")?;
    let mut r = String::from("needle inequality\n");
    let avg: Vec<String> = rep.average.iter().map(|(p, q)| format!("[{}, {}]", num(*p), num(*q))).collect();
    let _ = writeln!(r, "lambda: {}", num(rep.lambda));
    let _ = writeln!(r, "average: {}", avg.join(" "));
    let _ = writeln!(r, "mu(A): {}, mu(B): {}, mu(M): {}", num(rep.mu_a), num(rep.mu_b), num(rep.mu_average));
    let _ = writeln!(r, "lhs: {}, rhs: {}, margin: {}", num(rep.lhs), num(rep.rhs), num(rep.margin));
    Ok(Finished { pass: rep.margin >= 0.0, report: r })
}
