//! Adaptive Dormand–Prince 5(4) integrator on fixed-size states.
//!
//! The right-hand side returns `None` when the state leaves the region where
//! it is defined; the step is then rejected and shrunk. Requested stop times
//! are hit exactly by clipping steps.

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Smallest admissible step before giving up.
    pub h_min: f64,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> OdeOptions {
        OdeOptions { rtol: tol, atol: tol, ..OdeOptions::default() }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-10, max_steps: 1_000_000, h_min: 1e-13 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeStatus {
    Completed,
    /// The right-hand side kept refusing steps: the solution left its domain.
    DomainExit,
    /// Error control drove the step below `h_min`.
    StepUnderflow,
    MaxSteps,
}

/// An accepted node: time, state and derivative.
#[derive(Debug, Clone, Copy)]
pub struct Node<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub f: [f64; N],
}

#[derive(Debug, Clone)]
pub struct OdeSolution<const N: usize> {
    pub nodes: Vec<Node<N>>,
    pub status: OdeStatus,
    pub accepted: usize,
    pub rejected: usize,
}

impl<const N: usize> OdeSolution<N> {
    pub fn last(&self) -> &Node<N> {
        self.nodes.last().expect("solution has at least the initial node")
    }

    pub fn completed(&self) -> bool {
        self.status == OdeStatus::Completed
    }

    /// State at `t` by cubic Hermite interpolation between accepted nodes.
    /// Exact at nodes. `None` outside the covered interval.
    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        let first = self.nodes.first()?;
        let last = self.last();
        if t < first.t || t > last.t {
            return None;
        }
        let idx = self.nodes.partition_point(|n| n.t < t);
        if idx < self.nodes.len() && self.nodes[idx].t == t {
            return Some(self.nodes[idx].y);
        }
        let a = &self.nodes[idx - 1];
        let b = &self.nodes[idx];
        Some(hermite(a, b, t))
    }

    /// State exactly at a node time previously requested as a stop.
    pub fn at_stop(&self, t: f64) -> Option<[f64; N]> {
        let idx = self.nodes.partition_point(|n| n.t < t);
        self.nodes.get(idx).filter(|n| n.t == t).map(|n| n.y)
    }
}

pub fn hermite<const N: usize>(a: &Node<N>, b: &Node<N>, t: f64) -> [f64; N] {
    let h = b.t - a.t;
    let s = (t - a.t) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = h00 * a.y[i] + h10 * h * a.f[i] + h01 * b.y[i] + h11 * h * b.f[i];
    }
    out
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        if *c != 0.0 {
            for i in 0..N {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

fn rms<const N: usize>(v: &[f64; N], scale: &[f64; N]) -> f64 {
    let mut s = 0.0;
    for i in 0..N {
        let r = v[i] / scale[i];
        s += r * r;
    }
    (s / N as f64).sqrt()
}

fn initial_step<const N: usize, F>(f: &mut F, t0: f64, y0: &[f64; N], f0: &[f64; N], opts: &OdeOptions, span: f64) -> f64
where
    F: FnMut(f64, &[f64; N]) -> Option<[f64; N]>,
{
    let mut sc = [0.0; N];
    for i in 0..N {
        sc[i] = opts.atol + opts.rtol * y0[i].abs();
    }
    let d0 = rms(y0, &sc);
    let d1 = rms(f0, &sc);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    loop {
        let y1 = combine(y0, h0, &[(1.0, f0)]);
        match f(t0 + h0, &y1) {
            Some(f1) => {
                let mut diff = [0.0; N];
                for i in 0..N {
                    diff[i] = f1[i] - f0[i];
                }
                let d2 = rms(&diff, &sc) / h0;
                let dm = d1.max(d2);
                let h1 = if dm <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / dm).powf(0.2) };
                return (100.0 * h0).min(h1).min(span);
            }
            None => {
                h0 *= 0.25;
                if h0 < opts.h_min {
                    return h0;
                }
            }
        }
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end > t0`. Every time in `stops`
/// (sorted, inside `(t0, t_end]`) becomes an accepted node.
pub fn solve<const N: usize, F>(mut f: F, t0: f64, y0: [f64; N], t_end: f64, stops: &[f64], opts: &OdeOptions) -> OdeSolution<N>
where
    F: FnMut(f64, &[f64; N]) -> Option<[f64; N]>,
{
    let mut nodes = Vec::new();
    let mut accepted = 0;
    let mut rejected = 0;
    let f0 = match f(t0, &y0) {
        Some(v) => v,
        None => {
            return OdeSolution { nodes, status: OdeStatus::DomainExit, accepted, rejected };
        }
    };
    nodes.push(Node { t: t0, y: y0, f: f0 });
    if t_end <= t0 {
        return OdeSolution { nodes, status: OdeStatus::Completed, accepted, rejected };
    }
    let mut targets: Vec<f64> = stops.iter().copied().filter(|&s| s > t0 && s < t_end).collect();
    targets.push(t_end);
    let mut next_target = 0;

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f0;
    let mut h = initial_step(&mut f, t0, &y0, &f0, opts, t_end - t0);
    let mut domain_trouble = false;
    let status;
    loop {
        if accepted + rejected >= opts.max_steps {
            status = OdeStatus::MaxSteps;
            break;
        }
        if h < opts.h_min {
            status = if domain_trouble { OdeStatus::DomainExit } else { OdeStatus::StepUnderflow };
            break;
        }
        let target = targets[next_target];
        let mut hit = false;
        let mut step = h;
        if t + step >= target || target - (t + step) < 1e-12 * step {
            step = target - t;
            hit = true;
        }

        let trial = (|| {
            let k2 = f(t + C2 * step, &combine(&y, step, &[(A21, &k1)]))?;
            let k3 = f(t + C3 * step, &combine(&y, step, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = f(t + C4 * step, &combine(&y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = f(
                t + C5 * step,
                &combine(&y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            )?;
            let k6 = f(
                t + step,
                &combine(&y, step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            )?;
            let ynew = combine(&y, step, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let tnew = if hit { target } else { t + step };
            let k7 = f(tnew, &ynew)?;
            let mut err = [0.0; N];
            let mut sc = [0.0; N];
            for i in 0..N {
                err[i] = step
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                sc[i] = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            }
            Some((ynew, k7, rms(&err, &sc)))
        })();

        match trial {
            None => {
                rejected += 1;
                domain_trouble = true;
                h = step * 0.25;
            }
            Some((ynew, k7, err)) if err.is_finite() => {
                if err <= 1.0 {
                    accepted += 1;
                    domain_trouble = false;
                    t = if hit { target } else { t + step };
                    y = ynew;
                    k1 = k7;
                    nodes.push(Node { t, y, f: k1 });
                    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    let proposed = step * factor;
                    h = if hit { proposed.max(h) } else { proposed };
                    if hit {
                        next_target += 1;
                        if next_target == targets.len() {
                            status = OdeStatus::Completed;
                            break;
                        }
                    }
                } else {
                    rejected += 1;
                    h = step * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                }
            }
            Some(_) => {
                rejected += 1;
                h = step * 0.25;
            }
        }
    }
    OdeSolution { nodes, status, accepted, rejected }
}
