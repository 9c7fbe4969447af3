use serde::{Deserialize, Serialize};

use super::{FrameStructure, Point, Provenance};
use crate::error::{Error, Result};
use crate::ode::{self, IntegratorConfig};
use crate::poly::{Poly4, Var};

/// Rows of a frame on `(x, y, w)`, stored as z-free polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct MartinetFrame {
    pub x: [Poly4; 3],
    pub y: [Poly4; 3],
}

impl MartinetFrame {
    fn lift(q: &[f64; 3]) -> [f64; 4] {
        [q[0], q[1], 0.0, q[2]]
    }

    pub fn eval(&self, q: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
        let a = Self::lift(q);
        (
            std::array::from_fn(|i| self.x[i].eval_array(&a)),
            std::array::from_fn(|i| self.y[i].eval_array(&a)),
        )
    }

    pub fn velocity(&self, q: &[f64; 3], u: f64, v: f64) -> [f64; 3] {
        let (x, y) = self.eval(q);
        std::array::from_fn(|i| u * x[i] + v * y[i])
    }
}

/// Push the frame forward along `(x, y, z, w) -> (x, y, w)`.
///
/// Requires the `x`, `y` and `w` rows to be free of `z`; for normal-form
/// frames this amounts to `φ` and `ψ₂` being z-free.
pub fn martinet_projection(frame: &FrameStructure) -> Result<MartinetFrame> {
    if let Provenance::NormalForm { phi, psi2, .. } = frame.provenance() {
        if !phi.is_free_of(Var::Z) {
            return Err(Error::ZDependence { which: "phi" });
        }
        if !psi2.is_free_of(Var::Z) {
            return Err(Error::ZDependence { which: "psi2" });
        }
    }
    let rows = |f: &[Poly4; 4], which| -> Result<[Poly4; 3]> {
        let out = [f[0].clone(), f[1].clone(), f[3].clone()];
        if out.iter().all(|c| c.is_free_of(Var::Z)) {
            Ok(out)
        } else {
            Err(Error::ZDependence { which })
        }
    };
    Ok(MartinetFrame {
        x: rows(&frame.x().components, "X")?,
        y: rows(&frame.y().components, "Y")?,
    })
}

/// A sample of a curve in `(x, y, w)`; `(u, v)` is the control held on the
/// interval that starts here.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectedSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub u: f64,
    pub v: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProjectedCurve {
    pub samples: Vec<ProjectedSample>,
}

/// Horizontal lift of a projected integral curve with `z(t₀) = z0`.
///
/// Each interval is re-integrated in 4-space from its projected start sample
/// with the carried `z`, so `z` follows the frame's own z-row. Projecting the
/// result reproduces `path3` up to integration error.
pub fn lift_curve(
    frame: &FrameStructure,
    path3: &ProjectedCurve,
    z0: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, Point)>> {
    let mut out = Vec::with_capacity(path3.samples.len());
    let Some(first) = path3.samples.first() else {
        return Ok(out);
    };
    let mut z = z0;
    out.push((first.t, Point::new(first.x, first.y, z, first.w)));
    for pair in path3.samples.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let rhs = |_t: f64, q: &[f64; 4]| frame.velocity(q, a.u, a.v);
        let sol = ode::solve(&rhs, a.t, [a.x, a.y, z, a.w], b.t, cfg, None)?;
        let end = sol.last().y;
        z = end[2];
        out.push((b.t, Point::from_array(end)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{flat_structure, normal_form_structure};
    use crate::poly::p;

    #[test]
    fn flat_projection() {
        let m = martinet_projection(&flat_structure()).unwrap();
        assert_eq!(m.x, [Poly4::constant(1.0), Poly4::zero(), p(0.5, [0, 2, 0, 0])]);
        assert_eq!(m.y, [Poly4::zero(), Poly4::constant(1.0), p(-0.5, [1, 1, 0, 0])]);
    }

    #[test]
    fn z_dependent_phi_rejected() {
        let f = normal_form_structure(Poly4::var(Var::Z), Poly4::zero(), Poly4::zero()).unwrap();
        assert!(matches!(
            martinet_projection(&f),
            Err(Error::ZDependence { which: "phi" })
        ));
        // ψ₁ only enters the z-row
        let f = normal_form_structure(Poly4::zero(), p(1.0, [1, 0, 1, 0]), Poly4::zero()).unwrap();
        assert!(martinet_projection(&f).is_ok());
    }

    #[test]
    fn projection_commutes_with_evaluation() {
        let f = normal_form_structure(
            p(0.05, [1, 0, 0, 0]),
            p(0.05, [0, 1, 1, 0]),
            p(0.05, [1, 0, 0, 1]),
        )
        .unwrap();
        let m = martinet_projection(&f).unwrap();
        let q = Point::new(0.3, -0.2, 0.7, 0.1);
        let (x, y) = f.eval(&q.to_array());
        let (mx, my) = m.eval(&q.drop_z());
        assert_eq!(mx, [x[0], x[1], x[3]]);
        assert_eq!(my, [y[0], y[1], y[3]]);
    }

    #[test]
    fn lift_of_straight_lines() {
        let f = flat_structure();
        let cfg = IntegratorConfig::default();
        let along_x = ProjectedCurve {
            samples: vec![
                ProjectedSample { t: 0.0, x: 0.0, y: 0.0, w: 0.0, u: 1.0, v: 0.0 },
                ProjectedSample { t: 0.5, x: 0.5, y: 0.0, w: 0.0, u: 1.0, v: 0.0 },
            ],
        };
        let l = lift_curve(&f, &along_x, 0.0, &cfg).unwrap();
        assert!(l[1].1.dist(&Point::new(0.5, 0.0, 0.0, 0.0)) < 1e-14);
        let null = ProjectedCurve {
            samples: vec![
                ProjectedSample { t: 0.0, x: 0.0, y: 0.0, w: 0.0, u: 1.0, v: 1.0 },
                ProjectedSample { t: 0.8, x: 0.8, y: 0.8, w: 0.0, u: 1.0, v: 1.0 },
            ],
        };
        let l = lift_curve(&f, &null, 0.0, &cfg).unwrap();
        assert!(l[1].1.z.abs() < 1e-14);
    }
}
