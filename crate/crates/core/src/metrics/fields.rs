//! Coefficient fields over base coordinates, built from the expression grammar.

use serde::Serialize;

use super::expr::{parse_expr, Expr};
use crate::error::{Error, Result};
use crate::norms::FiberCovector;

/// Scalar function of the base point, e.g. a conformal factor or a potential.
#[derive(Debug, Clone)]
pub struct ScalarField {
    expr: Expr,
    src: String,
}

impl ScalarField {
    pub fn parse(src: &str) -> Result<Self> {
        let expr = parse_expr(src)?;
        if expr.uses_angle() {
            return Err(Error::Config(format!(
                "field expression '{src}' may not use the angle variable t"
            )));
        }
        Ok(Self {
            expr,
            src: src.to_string(),
        })
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.expr.eval(x[0], x[1], 0.0)
    }

    /// Centered-difference gradient, step 1e-6·(1+|x|).
    pub fn grad(&self, x: [f64; 2]) -> [f64; 2] {
        let step = 1e-6 * (1.0 + x[0].hypot(x[1]));
        [
            (self.eval([x[0] + step, x[1]]) - self.eval([x[0] - step, x[1]])) / (2.0 * step),
            (self.eval([x[0], x[1] + step]) - self.eval([x[0], x[1] - step])) / (2.0 * step),
        ]
    }

    pub fn src(&self) -> &str {
        &self.src
    }
}

/// Symmetric 2×2 matrix.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SymMat2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymMat2 {
    pub fn identity() -> Self {
        Self {
            a11: 1.0,
            a12: 0.0,
            a22: 1.0,
        }
    }

    pub fn scaled_identity(c: f64) -> Self {
        Self {
            a11: c,
            a12: 0.0,
            a22: c,
        }
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    pub fn is_spd(&self) -> bool {
        self.a11 > 0.0 && self.det() > 0.0
    }

    pub fn inverse(&self) -> Result<SymMat2> {
        let det = self.det();
        if !(det > 0.0 && det.is_finite()) {
            return Err(Error::Numerical(format!(
                "metric tensor not positive definite (det = {det})"
            )));
        }
        Ok(SymMat2 {
            a11: self.a22 / det,
            a12: -self.a12 / det,
            a22: self.a11 / det,
        })
    }

    /// Quadratic form wᵀ A w for a coefficient pair (works for v or p alike).
    pub fn quad(&self, w: [f64; 2]) -> f64 {
        self.a11 * w[0] * w[0] + 2.0 * self.a12 * w[0] * w[1] + self.a22 * w[1] * w[1]
    }

    pub fn apply(&self, w: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * w[0] + self.a12 * w[1],
            self.a12 * w[0] + self.a22 * w[1],
        ]
    }
}

/// Metric-tensor field a_ij(x).
#[derive(Debug, Clone)]
pub enum MatrixField {
    Conformal(ScalarField),
    Diag(ScalarField, ScalarField),
    Full(ScalarField, ScalarField, ScalarField),
}

impl MatrixField {
    pub fn eval(&self, x: [f64; 2]) -> SymMat2 {
        match self {
            MatrixField::Conformal(c) => SymMat2::scaled_identity(c.eval(x)),
            MatrixField::Diag(c11, c22) => SymMat2 {
                a11: c11.eval(x),
                a12: 0.0,
                a22: c22.eval(x),
            },
            MatrixField::Full(c11, c12, c22) => SymMat2 {
                a11: c11.eval(x),
                a12: c12.eval(x),
                a22: c22.eval(x),
            },
        }
    }

    pub fn describe(&self) -> String {
        match self {
            MatrixField::Conformal(c) => format!("conformal({})", c.src()),
            MatrixField::Diag(a, b) => format!("diag({}, {})", a.src(), b.src()),
            MatrixField::Full(a, b, c) => format!("matrix({}, {}, {})", a.src(), b.src(), c.src()),
        }
    }
}

/// 1-form field: either the differential of a scalar or explicit components.
#[derive(Debug, Clone)]
pub enum OneFormSpec {
    Grad(ScalarField),
    Components(ScalarField, ScalarField),
}

impl OneFormSpec {
    pub fn eval(&self, x: [f64; 2]) -> FiberCovector {
        match self {
            OneFormSpec::Grad(f) => {
                let g = f.grad(x);
                FiberCovector::new(g[0], g[1])
            }
            OneFormSpec::Components(b1, b2) => FiberCovector::new(b1.eval(x), b2.eval(x)),
        }
    }

    pub fn is_exact_by_construction(&self) -> bool {
        matches!(self, OneFormSpec::Grad(_))
    }

    pub fn describe(&self) -> String {
        match self {
            OneFormSpec::Grad(f) => format!("grad({})", f.src()),
            OneFormSpec::Components(a, b) => format!("covector({}, {})", a.src(), b.src()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_polynomial_field() {
        let f = ScalarField::parse("x1^2*x2").unwrap();
        let g = f.grad([0.7, -0.3]);
        assert!((g[0] - 2.0 * 0.7 * -0.3).abs() < 1e-8);
        assert!((g[1] - 0.49).abs() < 1e-8);
    }

    #[test]
    fn matrix_field_inverse() {
        let a = MatrixField::Full(
            ScalarField::parse("2").unwrap(),
            ScalarField::parse("0.5").unwrap(),
            ScalarField::parse("1").unwrap(),
        )
        .eval([0.0, 0.0]);
        let inv = a.inverse().unwrap();
        let prod11 = a.a11 * inv.a11 + a.a12 * inv.a12;
        let prod12 = a.a11 * inv.a12 + a.a12 * inv.a22;
        assert!((prod11 - 1.0).abs() < 1e-14 && prod12.abs() < 1e-14);
    }

    #[test]
    fn rejects_angle_variable_in_fields() {
        assert!(ScalarField::parse("1 + t").is_err());
    }
}
