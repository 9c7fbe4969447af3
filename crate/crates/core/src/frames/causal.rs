use serde::{Deserialize, Serialize};

use super::{FrameStructure, Point};
use crate::barriers::ScalarField;
use crate::error::{Error, Result};
use crate::poly::Poly4;

/// The horizontal vector `u X + v Y` attached at `base`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HorizontalVector {
    pub base: Point,
    pub u: f64,
    pub v: f64,
}

impl HorizontalVector {
    pub fn new(base: Point, u: f64, v: f64) -> Self {
        Self { base, u, v }
    }

    /// `g(v, v) = -u² + v²`.
    pub fn norm2(&self) -> f64 {
        -self.u * self.u + self.v * self.v
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.base, s * self.u, s * self.v)
    }

    /// Coordinates of the vector in `(∂x, ∂y, ∂z, ∂w)`.
    pub fn to_ambient(&self, frame: &FrameStructure) -> [f64; 4] {
        frame.velocity(&self.base.to_array(), self.u, self.v)
    }
}

pub fn metric(a: &HorizontalVector, b: &HorizontalVector) -> Result<f64> {
    if a.base != b.base {
        return Err(Error::BasePointMismatch);
    }
    Ok(-a.u * b.u + a.v * b.v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CausalKind {
    Timelike,
    Null,
    Spacelike,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    Future,
    Past,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CausalClass {
    pub kind: CausalKind,
    pub orientation: Orientation,
}

impl CausalClass {
    pub fn is_null_future(&self) -> bool {
        self.kind == CausalKind::Null && self.orientation == Orientation::Future
    }

    pub fn is_nonspacelike_future(&self) -> bool {
        matches!(self.kind, CausalKind::Timelike | CausalKind::Null)
            && self.orientation == Orientation::Future
    }
}

/// Causal character from the exact sign of `-u² + v²`; orientation from the
/// sign of `g(v, X) = -u`.
pub fn classify(a: &HorizontalVector) -> CausalClass {
    if a.u == 0.0 && a.v == 0.0 {
        return CausalClass {
            kind: CausalKind::Zero,
            orientation: Orientation::None,
        };
    }
    let g = a.norm2();
    let kind = if g < 0.0 {
        CausalKind::Timelike
    } else if g == 0.0 {
        CausalKind::Null
    } else {
        CausalKind::Spacelike
    };
    let orientation = match kind {
        CausalKind::Spacelike | CausalKind::Zero => Orientation::None,
        _ if a.u > 0.0 => Orientation::Future,
        _ => Orientation::Past,
    };
    CausalClass { kind, orientation }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HyperbolicRegion {
    S1Plus,
    S1Minus,
    S2Plus,
    S2Minus,
    Cone,
}

/// Hyperbolic radial coordinates: `R1 = ±√(x² − y²)` where `|y| < |x|`,
/// `R2 = ±√(y² − x²)` where `|y| > |x|`, signs following `x` resp. `y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperbolicRadius {
    pub region: HyperbolicRegion,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
}

pub fn hyperbolic_radius(q: &Point) -> HyperbolicRadius {
    let (ax, ay) = (q.x.abs(), q.y.abs());
    if ay < ax {
        let r = (q.x * q.x - q.y * q.y).sqrt();
        let (region, r1) = if q.x > 0.0 {
            (HyperbolicRegion::S1Plus, r)
        } else {
            (HyperbolicRegion::S1Minus, -r)
        };
        HyperbolicRadius {
            region,
            r1: Some(r1),
            r2: None,
        }
    } else if ay > ax {
        let r = (q.y * q.y - q.x * q.x).sqrt();
        let (region, r2) = if q.y > 0.0 {
            (HyperbolicRegion::S2Plus, r)
        } else {
            (HyperbolicRegion::S2Minus, -r)
        };
        HyperbolicRadius {
            region,
            r1: None,
            r2: Some(r2),
        }
    } else {
        HyperbolicRadius {
            region: HyperbolicRegion::Cone,
            r1: None,
            r2: None,
        }
    }
}

/// Frame coefficients `(u, v) = (-X f, Y f)` of the horizontal gradient of a
/// polynomial, as polynomials.
pub fn horizontal_gradient_polys(frame: &FrameStructure, f: &Poly4) -> (Poly4, Poly4) {
    (-frame.x().apply(f), frame.y().apply(f))
}

/// Horizontal gradient `∇_H f = -X(f) X + Y(f) Y` at `q`.
///
/// Polynomial fields are differentiated exactly; characteristic fields use
/// central differences along `X(q)` and `Y(q)` with the field's own step.
pub fn horizontal_gradient(
    frame: &FrameStructure,
    f: &ScalarField,
    q: &Point,
) -> Result<HorizontalVector> {
    if let Some(poly) = f.polynomial() {
        let (u, v) = horizontal_gradient_polys(frame, &poly);
        return Ok(HorizontalVector::new(*q, u.eval(q), v.eval(q)));
    }
    let h = f.fd_step();
    let (x, y) = frame.eval(&q.to_array());
    let d = |dir: &[f64; 4]| -> Result<f64> {
        let plus = f.value(&q.offset(dir, h))?;
        let minus = f.value(&q.offset(dir, -h))?;
        Ok((plus - minus) / (2.0 * h))
    };
    // a fold anywhere in the stencil shows up as an error from the centre
    f.value(q)?;
    Ok(HorizontalVector::new(*q, -d(&x)?, d(&y)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::flat_structure;

    fn hv(u: f64, v: f64) -> HorizontalVector {
        HorizontalVector::new(Point::ORIGIN, u, v)
    }

    #[test]
    fn orthonormality() {
        assert_eq!(metric(&hv(1.0, 0.0), &hv(1.0, 0.0)).unwrap(), -1.0);
        assert_eq!(metric(&hv(0.0, 1.0), &hv(0.0, 1.0)).unwrap(), 1.0);
        assert_eq!(metric(&hv(1.0, 0.0), &hv(0.0, 1.0)).unwrap(), 0.0);
        assert_eq!(metric(&hv(1.0, 1.0), &hv(1.0, 1.0)).unwrap(), 0.0);
        let other = HorizontalVector::new(Point::new(1.0, 0.0, 0.0, 0.0), 1.0, 0.0);
        assert!(matches!(metric(&hv(1.0, 0.0), &other), Err(Error::BasePointMismatch)));
    }

    #[test]
    fn classification_table() {
        let c = classify(&hv(1.0, 0.0));
        assert_eq!((c.kind, c.orientation), (CausalKind::Timelike, Orientation::Future));
        let c = classify(&hv(1.0, 1.0));
        assert_eq!((c.kind, c.orientation), (CausalKind::Null, Orientation::Future));
        let c = classify(&hv(0.0, 1.0));
        assert_eq!((c.kind, c.orientation), (CausalKind::Spacelike, Orientation::None));
        let c = classify(&hv(-2.0, 1.0));
        assert_eq!((c.kind, c.orientation), (CausalKind::Timelike, Orientation::Past));
        let c = classify(&hv(0.0, 0.0));
        assert_eq!((c.kind, c.orientation), (CausalKind::Zero, Orientation::None));
    }

    #[test]
    fn hyperbolic_regions() {
        let r = hyperbolic_radius(&Point::new(5.0, 3.0, 0.0, 0.0));
        assert_eq!((r.region, r.r1, r.r2), (HyperbolicRegion::S1Plus, Some(4.0), None));
        let r = hyperbolic_radius(&Point::new(-5.0, 3.0, 0.0, 0.0));
        assert_eq!(r.r1, Some(-4.0));
        let r = hyperbolic_radius(&Point::new(3.0, -5.0, 0.0, 0.0));
        assert_eq!((r.region, r.r2), (HyperbolicRegion::S2Minus, Some(-4.0)));
        let r = hyperbolic_radius(&Point::new(2.0, -2.0, 0.0, 0.0));
        assert_eq!(r.region, HyperbolicRegion::Cone);
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let f = ScalarField::Polynomial(Poly4::constant(3.0));
        let g = horizontal_gradient(&flat_structure(), &f, &Point::new(0.2, 0.1, 0.0, 0.0))
            .unwrap();
        assert_eq!((g.u, g.v), (0.0, 0.0));
        assert_eq!(classify(&g).kind, CausalKind::Zero);
    }
}
