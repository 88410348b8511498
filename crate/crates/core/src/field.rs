//! Scalar fields on chart coordinates with first and second derivatives.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expr, Var};

/// `√K·cot(√K·x)`, continued to `1/x` at `K = 0` and `√−K·coth(√−K·x)` for `K < 0`.
pub fn cot_k(k: f64, x: f64) -> Result<f64> {
    if k > 0.0 {
        let s = k.sqrt();
        let (sin, cos) = (s * x).sin_cos();
        if sin.abs() < 1e-300 || sin == 0.0 {
            return Err(Error::Pole(x));
        }
        Ok(s * cos / sin)
    } else if x == 0.0 {
        Err(Error::Pole(x))
    } else if k == 0.0 {
        Ok(1.0 / x)
    } else {
        let s = (-k).sqrt();
        Ok(s / (s * x).tanh())
    }
}

fn cot_k_raw(k: f64, x: f64) -> f64 {
    cot_k(k, x).unwrap_or(f64::NAN)
}

/// A smooth function of `(x, y)`.
#[derive(Debug, Clone)]
pub enum ScalarField {
    Constant(f64),
    /// `c + a·x + b·y`.
    Affine { c: f64, a: f64, b: f64 },
    /// `scale·(x² + y²)/2`.
    HalfSquaredRadius { scale: f64 },
    /// `log(2/(a(1 − x² − y²)))`, conformal factor of the disk model of curvature `−a²`.
    PoincareConformal { a: f64 },
    /// `log(2/(a(1 + x² + y²)))`, stereographic sphere of curvature `a²`.
    SphereConformal { a: f64 },
    /// `−log(a·y)`, half-plane model of curvature `−a²`.
    HalfPlaneConformal { a: f64 },
    /// `1/√(x² + y²)`.
    InverseRadius,
    /// `(1 − r²)/(1 + r²)`: the height coordinate seen through stereographic projection.
    StereoHeight,
    /// `cot_K(f)` for an inner field `f`.
    CotK { k: f64, inner: Box<ScalarField> },
    Sum(Box<ScalarField>, Box<ScalarField>),
    /// Parsed expression, differentiated by central differences with the given step.
    Expression { expr: Arc<Expr>, source: String, step: f64 },
}

impl ScalarField {
    /// Parses an expression over `x`, `y`, `r`. `step` is the finite-difference step.
    pub fn parse(text: &str, step: f64) -> Result<ScalarField> {
        let expr = parse_expression(text)?;
        if expr.uses(Var::Theta) {
            return Err(Error::InvalidArgument(format!(
                "`theta` is not allowed in a position-only field: {text}"
            )));
        }
        if !(step > 0.0) {
            return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
        }
        Ok(ScalarField::Expression { expr: Arc::new(expr), source: text.to_string(), step })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ScalarField::Constant(c) if *c == 0.0)
            || matches!(self, ScalarField::Affine { c, a, b } if *c == 0.0 && *a == 0.0 && *b == 0.0)
    }

    /// True when the field is known to be constant (gradient identically zero).
    pub fn is_constant(&self) -> bool {
        match self {
            ScalarField::Constant(_) => true,
            ScalarField::Affine { a, b, .. } => *a == 0.0 && *b == 0.0,
            ScalarField::HalfSquaredRadius { scale } => *scale == 0.0,
            ScalarField::Sum(f, g) => f.is_constant() && g.is_constant(),
            ScalarField::CotK { inner, .. } => inner.is_constant(),
            _ => false,
        }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Affine { c, a, b } => c + a * x + b * y,
            ScalarField::HalfSquaredRadius { scale } => 0.5 * scale * (x * x + y * y),
            ScalarField::PoincareConformal { a } => (2.0 / (a * (1.0 - x * x - y * y))).ln(),
            ScalarField::SphereConformal { a } => (2.0 / (a * (1.0 + x * x + y * y))).ln(),
            ScalarField::HalfPlaneConformal { a } => -(a * y).ln(),
            ScalarField::InverseRadius => 1.0 / x.hypot(y),
            ScalarField::StereoHeight => {
                let s = x * x + y * y;
                (1.0 - s) / (1.0 + s)
            }
            ScalarField::CotK { k, inner } => cot_k_raw(*k, inner.value(x, y)),
            ScalarField::Sum(f, g) => f.value(x, y) + g.value(x, y),
            ScalarField::Expression { expr, .. } => expr.eval(x, y, 0.0),
        }
    }

    pub fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        match self {
            ScalarField::Constant(_) => (0.0, 0.0),
            ScalarField::Affine { a, b, .. } => (*a, *b),
            ScalarField::HalfSquaredRadius { scale } => (scale * x, scale * y),
            ScalarField::PoincareConformal { .. } => {
                let d = 1.0 - x * x - y * y;
                (2.0 * x / d, 2.0 * y / d)
            }
            ScalarField::SphereConformal { .. } => {
                let d = 1.0 + x * x + y * y;
                (-2.0 * x / d, -2.0 * y / d)
            }
            ScalarField::HalfPlaneConformal { .. } => (0.0, -1.0 / y),
            ScalarField::InverseRadius => {
                let r3 = x.hypot(y).powi(3);
                (-x / r3, -y / r3)
            }
            ScalarField::StereoHeight => {
                let d = 1.0 + x * x + y * y;
                let c = -4.0 / (d * d);
                (c * x, c * y)
            }
            ScalarField::CotK { k, inner } => {
                let c = cot_k_raw(*k, inner.value(x, y));
                let (fx, fy) = inner.grad(x, y);
                let m = -(k + c * c);
                (m * fx, m * fy)
            }
            ScalarField::Sum(f, g) => {
                let (a, b) = f.grad(x, y);
                let (c, d) = g.grad(x, y);
                (a + c, b + d)
            }
            ScalarField::Expression { expr, step, .. } => {
                let h = *step;
                let fx = (expr.eval(x + h, y, 0.0) - expr.eval(x - h, y, 0.0)) / (2.0 * h);
                let fy = (expr.eval(x, y + h, 0.0) - expr.eval(x, y - h, 0.0)) / (2.0 * h);
                (fx, fy)
            }
        }
    }

    /// Second derivatives `(f_xx, f_xy, f_yy)`.
    pub fn hessian(&self, x: f64, y: f64) -> (f64, f64, f64) {
        match self {
            ScalarField::Constant(_) | ScalarField::Affine { .. } => (0.0, 0.0, 0.0),
            ScalarField::HalfSquaredRadius { scale } => (*scale, 0.0, *scale),
            ScalarField::PoincareConformal { .. } => {
                let d = 1.0 - x * x - y * y;
                let d2 = d * d;
                (2.0 / d + 4.0 * x * x / d2, 4.0 * x * y / d2, 2.0 / d + 4.0 * y * y / d2)
            }
            ScalarField::SphereConformal { .. } => {
                let d = 1.0 + x * x + y * y;
                let d2 = d * d;
                (-2.0 / d + 4.0 * x * x / d2, 4.0 * x * y / d2, -2.0 / d + 4.0 * y * y / d2)
            }
            ScalarField::HalfPlaneConformal { .. } => (0.0, 0.0, 1.0 / (y * y)),
            ScalarField::InverseRadius => {
                let r2 = x * x + y * y;
                let r3 = r2 * r2.sqrt();
                let r5 = r3 * r2;
                (-1.0 / r3 + 3.0 * x * x / r5, 3.0 * x * y / r5, -1.0 / r3 + 3.0 * y * y / r5)
            }
            ScalarField::StereoHeight => {
                let d = 1.0 + x * x + y * y;
                let d2 = d * d;
                let d3 = d2 * d;
                (-4.0 / d2 + 16.0 * x * x / d3, 16.0 * x * y / d3, -4.0 / d2 + 16.0 * y * y / d3)
            }
            ScalarField::CotK { k, inner } => {
                let c = cot_k_raw(*k, inner.value(x, y));
                let (fx, fy) = inner.grad(x, y);
                let (fxx, fxy, fyy) = inner.hessian(x, y);
                let m = k + c * c;
                let t = 2.0 * c * m;
                (t * fx * fx - m * fxx, t * fx * fy - m * fxy, t * fy * fy - m * fyy)
            }
            ScalarField::Sum(f, g) => {
                let a = f.hessian(x, y);
                let b = g.hessian(x, y);
                (a.0 + b.0, a.1 + b.1, a.2 + b.2)
            }
            ScalarField::Expression { expr, step, .. } => {
                let h = *step;
                let f = |dx: f64, dy: f64| expr.eval(x + dx, y + dy, 0.0);
                let f0 = f(0.0, 0.0);
                let fxx = (f(h, 0.0) - 2.0 * f0 + f(-h, 0.0)) / (h * h);
                let fyy = (f(0.0, h) - 2.0 * f0 + f(0.0, -h)) / (h * h);
                let fxy = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
                (fxx, fxy, fyy)
            }
        }
    }

    pub fn laplacian(&self, x: f64, y: f64) -> f64 {
        let (xx, _, yy) = self.hessian(x, y);
        xx + yy
    }

    /// Short human-readable description.
    pub fn describe(&self) -> String {
        match self {
            ScalarField::Constant(c) => format!("{c}"),
            ScalarField::Affine { c, a, b } => format!("{c} + {a}*x + {b}*y"),
            ScalarField::HalfSquaredRadius { scale } => format!("{scale}*(x^2+y^2)/2"),
            ScalarField::PoincareConformal { a } => format!("log(2/({a}*(1-r^2)))"),
            ScalarField::SphereConformal { a } => format!("log(2/({a}*(1+r^2)))"),
            ScalarField::HalfPlaneConformal { a } => format!("-log({a}*y)"),
            ScalarField::InverseRadius => "1/r".into(),
            ScalarField::StereoHeight => "(1-r^2)/(1+r^2)".into(),
            ScalarField::CotK { k, inner } => format!("cot_{k}({})", inner.describe()),
            ScalarField::Sum(f, g) => format!("{} + {}", f.describe(), g.describe()),
            ScalarField::Expression { source, .. } => source.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(f: &ScalarField, x: f64, y: f64) -> (f64, f64) {
        let h = 1e-6;
        (
            (f.value(x + h, y) - f.value(x - h, y)) / (2.0 * h),
            (f.value(x, y + h) - f.value(x, y - h)) / (2.0 * h),
        )
    }

    fn fd_hessian(f: &ScalarField, x: f64, y: f64) -> (f64, f64, f64) {
        let h = 1e-5;
        let gxp = f.grad(x + h, y);
        let gxm = f.grad(x - h, y);
        let gyp = f.grad(x, y + h);
        let gym = f.grad(x, y - h);
        ((gxp.0 - gxm.0) / (2.0 * h), (gyp.0 - gym.0) / (2.0 * h), (gyp.1 - gym.1) / (2.0 * h))
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let fields = vec![
            ScalarField::PoincareConformal { a: 1.0 },
            ScalarField::PoincareConformal { a: 0.7 },
            ScalarField::SphereConformal { a: 1.0 },
            ScalarField::HalfPlaneConformal { a: 1.0 },
            ScalarField::InverseRadius,
            ScalarField::StereoHeight,
            ScalarField::HalfSquaredRadius { scale: 1.5 },
            ScalarField::CotK { k: 1.0, inner: Box::new(ScalarField::Affine { c: 1.0, a: 0.3, b: 0.2 }) },
            ScalarField::CotK { k: -2.0, inner: Box::new(ScalarField::Affine { c: 2.0, a: 1.0, b: 0.0 }) },
            ScalarField::CotK { k: 0.0, inner: Box::new(ScalarField::Affine { c: 2.0, a: 1.0, b: 0.0 }) },
        ];
        for f in &fields {
            for &(x, y) in &[(0.3, 0.4), (-0.2, 0.5), (0.1, 0.7)] {
                let (gx, gy) = f.grad(x, y);
                let (ox, oy) = fd_grad(f, x, y);
                assert!((gx - ox).abs() < 1e-6 && (gy - oy).abs() < 1e-6, "{}", f.describe());
                let h = f.hessian(x, y);
                let o = fd_hessian(f, x, y);
                assert!((h.0 - o.0).abs() < 1e-5, "{} xx", f.describe());
                assert!((h.1 - o.1).abs() < 1e-5, "{} xy", f.describe());
                assert!((h.2 - o.2).abs() < 1e-5, "{} yy", f.describe());
            }
        }
    }

    #[test]
    fn cot_k_branches() {
        assert_eq!(cot_k(0.0, 2.0).unwrap(), 0.5);
        assert!((cot_k(1.0, std::f64::consts::FRAC_PI_4).unwrap() - 1.0).abs() < 1e-15);
        let coth3 = (3f64.exp() + (-3f64).exp()) / (3f64.exp() - (-3f64).exp());
        assert!((cot_k(-1.0, 3.0).unwrap() - coth3).abs() < 1e-15);
        assert!((cot_k(-1.0, 3.0).unwrap() - 1.004969).abs() < 1e-6);
        assert!(matches!(cot_k(0.0, 0.0), Err(Error::Pole(_))));
        assert!(matches!(cot_k(-1.0, 0.0), Err(Error::Pole(_))));
        assert!(matches!(cot_k(1.0, 0.0), Err(Error::Pole(_))));
    }

    #[test]
    fn expression_field_rejects_theta() {
        assert!(ScalarField::parse("x + theta", 1e-5).is_err());
        let f = ScalarField::parse("x^2 + 3*y", 1e-5).unwrap();
        let (gx, gy) = f.grad(0.5, 1.0);
        assert!((gx - 1.0).abs() < 1e-8 && (gy - 3.0).abs() < 1e-8);
        let (xx, xy, yy) = f.hessian(0.5, 1.0);
        assert!((xx - 2.0).abs() < 1e-4 && xy.abs() < 1e-4 && yy.abs() < 1e-4);
    }
}
