use nalgebra::{Matrix4x3, Vector4};

use super::{lie_bracket, numerical_rank, FrameStructure, Point, VectorField, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::poly::{p, Poly4};

/// Least-squares decomposition `[V,[V,W]] = f V + g W + h [V,W]` at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TypeProbe {
    pub decomposable: bool,
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub residual: f64,
}

pub fn hamiltonian_type_probe(
    v: &VectorField,
    w: &VectorField,
    q: &Point,
    tol: f64,
) -> Result<TypeProbe> {
    let vw = lie_bracket(v, w);
    let w_vw = lie_bracket(w, &vw);
    let v_vw = lie_bracket(v, &vw);
    let cols = [v.eval(q), w.eval(q), vw.eval(q), w_vw.eval(q)];
    let rank = numerical_rank(&cols, DEFAULT_RANK_TOL);
    if rank < 4 {
        return Err(Error::BasisFailure { rank });
    }
    let a = Matrix4x3::from_fn(|i, j| cols[j][i]);
    let b = Vector4::from(v_vw.eval(q));
    let coef = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let residual = (a * coef - b).norm();
    Ok(TypeProbe {
        decomposable: residual <= tol,
        f: coef[0],
        g: coef[1],
        h: coef[2],
        residual,
    })
}

/// `V = ∂y`, `W = ∂x + ½y² ∂y + y ∂z + z ∂w`, with `[V,[V,W]] = V`.
///
/// As a frame `(X, Y) = (V, W)`; the abnormal direction is `V`.
pub fn non_hamiltonian_fixture() -> FrameStructure {
    let v = VectorField::new([Poly4::zero(), Poly4::constant(1.0), Poly4::zero(), Poly4::zero()]);
    let w = VectorField::new([
        Poly4::constant(1.0),
        p(0.5, [0, 2, 0, 0]),
        p(1.0, [0, 1, 0, 0]),
        p(1.0, [0, 0, 1, 0]),
    ]);
    FrameStructure::custom(v, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::flat_structure;

    #[test]
    fn flat_frame_has_vanishing_f() {
        let f = flat_structure();
        for t in [0.0, 0.3, 1.0] {
            let r = hamiltonian_type_probe(f.x(), f.y(), &Point::new(t, 0.0, 0.0, 0.0), 1e-12)
                .unwrap();
            assert!(r.decomposable);
            assert_eq!((r.f, r.g, r.h), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn fixture_brackets_exact() {
        let fx = non_hamiltonian_fixture();
        let vw = lie_bracket(fx.x(), fx.y());
        assert_eq!(lie_bracket(fx.x(), &vw), *fx.x());
        let r = hamiltonian_type_probe(fx.x(), fx.y(), &Point::new(0.0, 0.4, 0.0, 0.0), 1e-12)
            .unwrap();
        assert!(r.decomposable);
        assert!((r.f - 1.0).abs() < 1e-12);
        assert!(r.g.abs() < 1e-12 && r.h.abs() < 1e-12);
    }

    #[test]
    fn dependent_fields_fail() {
        let f = flat_structure();
        assert!(matches!(
            hamiltonian_type_probe(f.x(), f.x(), &Point::ORIGIN, 1e-12),
            Err(Error::BasisFailure { .. })
        ));
    }
}
