//! Polynomial rank-2 frames on 4-space.
//!
//! A [`FrameStructure`] is a pair of horizontal fields `X` (timelike, the time
//! orientation) and `Y` (spacelike), declared orthonormal. All field
//! coefficients are [`Poly4`]s, so Lie brackets and derivatives are exact.

mod causal;
mod martinet;
mod probe;

pub use causal::{
    classify, horizontal_gradient, horizontal_gradient_polys, hyperbolic_radius, metric,
    CausalClass, CausalKind, HorizontalVector, HyperbolicRadius, HyperbolicRegion, Orientation,
};
pub use martinet::{lift_curve, martinet_projection, MartinetFrame, ProjectedCurve, ProjectedSample};
pub use probe::{hamiltonian_type_probe, non_hamiltonian_fixture, TypeProbe};

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{p, Poly4, Var};

/// Default relative singular-value cutoff for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl Point {
    pub const ORIGIN: Point = Point {
        x: 0.0,
        y: 0.0,
        z: 0.0,
        w: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64, w: f64) -> Self {
        Self { x, y, z, w }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.z, self.w]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    /// Image under the projection `(x, y, z, w) -> (x, y, w)`.
    pub fn drop_z(&self) -> [f64; 3] {
        [self.x, self.y, self.w]
    }

    pub fn offset(&self, dir: &[f64; 4], s: f64) -> Point {
        Point::new(
            self.x + s * dir[0],
            self.y + s * dir[1],
            self.z + s * dir[2],
            self.w + s * dir[3],
        )
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x, self.y, self.z, self.w)
    }
}

/// A vector field `sum_i c_i ∂_i` with polynomial coefficients, components
/// ordered `(∂x, ∂y, ∂z, ∂w)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VectorField {
    pub components: [Poly4; 4],
}

impl VectorField {
    pub fn new(components: [Poly4; 4]) -> Self {
        Self { components }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// The coordinate field `∂v`.
    pub fn coordinate(v: Var) -> Self {
        let mut c: [Poly4; 4] = Default::default();
        c[v.index()] = Poly4::constant(1.0);
        Self::new(c)
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Poly4::is_zero)
    }

    pub fn eval(&self, q: &Point) -> [f64; 4] {
        self.eval_array(&q.to_array())
    }

    pub fn eval_array(&self, q: &[f64; 4]) -> [f64; 4] {
        std::array::from_fn(|i| self.components[i].eval_array(q))
    }

    /// The derivation `f -> sum_i c_i ∂_i f`.
    pub fn apply(&self, f: &Poly4) -> Poly4 {
        let mut acc = Poly4::zero();
        for v in Var::ALL {
            let c = &self.components[v.index()];
            if c.is_zero() {
                continue;
            }
            let d = f.derivative(v);
            if !d.is_zero() {
                acc = &acc + &(c * &d);
            }
        }
        acc
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(std::array::from_fn(|i| self.components[i].scale(s)))
    }

    pub fn mul_poly(&self, f: &Poly4) -> Self {
        Self::new(std::array::from_fn(|i| &self.components[i] * f))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(std::array::from_fn(|i| {
            &self.components[i] + &other.components[i]
        }))
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(std::array::from_fn(|i| {
            &self.components[i] - &other.components[i]
        }))
    }

    /// Jacobian entries `∂_j c_i`, indexed `[i][j]`.
    pub fn jacobian(&self) -> [[Poly4; 4]; 4] {
        std::array::from_fn(|i| self.components[i].gradient())
    }

    pub fn bracket(&self, other: &Self) -> Self {
        lie_bracket(self, other)
    }
}

/// Exact Lie bracket `[A, B]^i = A(B^i) - B(A^i)`.
pub fn lie_bracket(a: &VectorField, b: &VectorField) -> VectorField {
    VectorField::new(std::array::from_fn(|i| {
        &a.apply(&b.components[i]) - &b.apply(&a.components[i])
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Flat,
    NormalForm {
        phi: Poly4,
        psi1: Poly4,
        psi2: Poly4,
    },
    Custom,
}

/// An orthonormal frame `(X, Y)` with `X` the time orientation.
#[derive(Clone, Debug)]
pub struct FrameStructure {
    x: VectorField,
    y: VectorField,
    provenance: Provenance,
    jac_x: [[Poly4; 4]; 4],
    jac_y: [[Poly4; 4]; 4],
}

impl PartialEq for FrameStructure {
    fn eq(&self, other: &Self) -> bool {
        self.x == other.x && self.y == other.y
    }
}

/// `X`, `Y` and the brackets that decide the growth vector.
#[derive(Clone, Debug, PartialEq)]
pub struct BracketTower {
    pub xy: VectorField,
    pub x_xy: VectorField,
    pub y_xy: VectorField,
}

impl FrameStructure {
    fn build(x: VectorField, y: VectorField, provenance: Provenance) -> Self {
        let jac_x = x.jacobian();
        let jac_y = y.jacobian();
        Self {
            x,
            y,
            provenance,
            jac_x,
            jac_y,
        }
    }

    /// Any pair of polynomial fields. Independence is not checked here;
    /// [`growth_vector`] reports degenerate frames.
    pub fn custom(x: VectorField, y: VectorField) -> Self {
        Self::build(x, y, Provenance::Custom)
    }

    pub fn x(&self) -> &VectorField {
        &self.x
    }

    pub fn y(&self) -> &VectorField {
        &self.y
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.provenance, Provenance::Flat) || *self == flat_structure()
    }

    pub fn eval(&self, q: &[f64; 4]) -> ([f64; 4], [f64; 4]) {
        (self.x.eval_array(q), self.y.eval_array(q))
    }

    /// `X + sign * Y`.
    pub fn generator(&self, sign: f64) -> VectorField {
        self.x.add(&self.y.scale(sign))
    }

    pub fn brackets(&self) -> BracketTower {
        let xy = lie_bracket(&self.x, &self.y);
        let x_xy = lie_bracket(&self.x, &xy);
        let y_xy = lie_bracket(&self.y, &xy);
        BracketTower { xy, x_xy, y_xy }
    }

    /// `∂_j X^i(q)` and `∂_j Y^i(q)`, indexed `[i][j]`.
    pub fn jacobians(&self, q: &[f64; 4]) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
        let ev = |j: &[[Poly4; 4]; 4]| -> [[f64; 4]; 4] {
            std::array::from_fn(|i| std::array::from_fn(|k| j[i][k].eval_array(q)))
        };
        (ev(&self.jac_x), ev(&self.jac_y))
    }

    /// Velocity of the control system `u X + v Y` at `q`.
    pub fn velocity(&self, q: &[f64; 4], u: f64, v: f64) -> [f64; 4] {
        let (x, y) = self.eval(q);
        std::array::from_fn(|i| u * x[i] + v * y[i])
    }

    /// Normal-form coefficients, with zeros for the flat frame.
    pub fn normal_form_coefficients(&self) -> Option<(Poly4, Poly4, Poly4)> {
        match &self.provenance {
            Provenance::Flat => Some((Poly4::zero(), Poly4::zero(), Poly4::zero())),
            Provenance::NormalForm { phi, psi1, psi2 } => {
                Some((phi.clone(), psi1.clone(), psi2.clone()))
            }
            Provenance::Custom => None,
        }
    }
}

/// The flat Engel frame `X = ∂x + ½y ∂z + ½y² ∂w`, `Y = ∂y − ½x ∂z − ½xy ∂w`.
pub fn flat_structure() -> FrameStructure {
    let x = VectorField::new([
        Poly4::constant(1.0),
        Poly4::zero(),
        p(0.5, [0, 1, 0, 0]),
        p(0.5, [0, 2, 0, 0]),
    ]);
    let y = VectorField::new([
        Poly4::zero(),
        Poly4::constant(1.0),
        p(-0.5, [1, 0, 0, 0]),
        p(-0.5, [1, 1, 0, 0]),
    ]);
    FrameStructure::build(x, y, Provenance::Flat)
}

/// Frame in the normal form
///
/// ```text
/// X = ∂x + yφ(y∂x + x∂y) + ½y(1+ψ₁)∂z + ½y²(1+ψ₂)∂w
/// Y = ∂y − xφ(y∂x + x∂y) − ½x(1+ψ₁)∂z − ½xy(1+ψ₂)∂w
/// ```
///
/// with `ψ₁(0,0,z,w) = 0` and `ψ₂(0,0,0,w) = 0`.
pub fn normal_form_structure(phi: Poly4, psi1: Poly4, psi2: Poly4) -> Result<FrameStructure> {
    if let Some(t) = psi1.terms().iter().find(|t| t.exp[0] == 0 && t.exp[1] == 0) {
        return Err(Error::ConstraintViolation {
            which: "psi1",
            exp: t.exp,
            coef: t.coef,
        });
    }
    if let Some(t) = psi2
        .terms()
        .iter()
        .find(|t| t.exp[0] == 0 && t.exp[1] == 0 && t.exp[2] == 0)
    {
        return Err(Error::ConstraintViolation {
            which: "psi2",
            exp: t.exp,
            coef: t.coef,
        });
    }
    let one = Poly4::constant(1.0);
    let x = Poly4::var(Var::X);
    let y = Poly4::var(Var::Y);
    let s1 = &one + &psi1;
    let s2 = &one + &psi2;
    let xx = &x * &x;
    let yy = &y * &y;
    let xy = &x * &y;

    let fx = VectorField::new([
        &one + &(&yy * &phi),
        &xy * &phi,
        (&y * &s1).scale(0.5),
        (&yy * &s2).scale(0.5),
    ]);
    let fy = VectorField::new([
        -(&xy * &phi),
        &one - &(&xx * &phi),
        (&x * &s1).scale(-0.5),
        (&xy * &s2).scale(-0.5),
    ]);
    let provenance = if phi.is_zero() && psi1.is_zero() && psi2.is_zero() {
        Provenance::Flat
    } else {
        Provenance::NormalForm { phi, psi1, psi2 }
    };
    Ok(FrameStructure::build(fx, fy, provenance))
}

/// Numerical rank of the columns with a relative singular-value cutoff.
pub fn numerical_rank(columns: &[[f64; 4]], rank_tol: f64) -> usize {
    if columns.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(4, columns.len(), |i, j| columns[j][i]);
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rank_tol * smax).count()
}

/// Ranks of `H`, `H²`, `H³` at `q`.
pub fn growth_vector(frame: &FrameStructure, q: &Point, rank_tol: f64) -> Result<[usize; 3]> {
    growth_vector_with(frame, &frame.brackets(), q, rank_tol)
}

/// [`growth_vector`] with precomputed brackets, for grids.
pub fn growth_vector_with(
    frame: &FrameStructure,
    tower: &BracketTower,
    q: &Point,
    rank_tol: f64,
) -> Result<[usize; 3]> {
    if !(rank_tol > 0.0) {
        return Err(Error::InvalidInput("rank_tol must be positive".into()));
    }
    let a = q.to_array();
    let cols = [
        frame.x.eval_array(&a),
        frame.y.eval_array(&a),
        tower.xy.eval_array(&a),
        tower.x_xy.eval_array(&a),
        tower.y_xy.eval_array(&a),
    ];
    let r1 = numerical_rank(&cols[..2], rank_tol);
    if r1 < 2 {
        return Err(Error::DegenerateFrame { rank: r1 });
    }
    Ok([
        r1,
        numerical_rank(&cols[..3], rank_tol),
        numerical_rank(&cols, rank_tol),
    ])
}
