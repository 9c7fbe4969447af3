//! Barrier functions from first-order Cauchy problems.
//!
//! Each problem asks for `η` with `G(η) = 0` for a null generator
//! `G = X ∓ Y`, prescribed on a hyperplane. In the flat frame the solutions
//! are cubic polynomials ([`ClosedForm`]); for other frames they are computed
//! pointwise by following the generator back to the hyperplane
//! ([`characteristic_solve`]).

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{
    classify, flat_structure, horizontal_gradient, FrameStructure, Point, VectorField,
};
use crate::ode::{self, IntegratorConfig};
use crate::poly::{Poly4, Var};

/// Time budget for reaching the initial surface along a characteristic.
pub const DEFAULT_HORIZON: f64 = 4.0;
/// Step for central differences of characteristic fields.
pub const DEFAULT_FD_STEP: f64 = 1e-5;
/// Below this sup-error the perturbation is treated as having no effect.
pub const EXACT_FLOOR: f64 = 1e-11;
/// Crossings with `|∇s·G| / |G|` below this are treated as folds.
const MIN_TRANSVERSALITY: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Generator {
    XMinusY,
    XPlusY,
}

impl Generator {
    pub fn sign(self) -> f64 {
        match self {
            Generator::XMinusY => -1.0,
            Generator::XPlusY => 1.0,
        }
    }

    pub fn field(self, frame: &FrameStructure) -> VectorField {
        frame.generator(self.sign())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Surface {
    /// `y = x`
    Gamma1,
    /// `y = -x`
    Gamma2,
    /// `y = 0`
    Y0,
}

impl Surface {
    /// Linear defining function `s` with the surface at `s = 0`.
    pub fn value(self, q: &[f64; 4]) -> f64 {
        match self {
            Surface::Gamma1 => q[1] - q[0],
            Surface::Gamma2 => q[1] + q[0],
            Surface::Y0 => q[1],
        }
    }

    pub fn normal(self) -> [f64; 4] {
        match self {
            Surface::Gamma1 => [-1.0, 1.0, 0.0, 0.0],
            Surface::Gamma2 => [1.0, 1.0, 0.0, 0.0],
            Surface::Y0 => [0.0, 1.0, 0.0, 0.0],
        }
    }

    /// Substitution that restricts a polynomial to the surface.
    fn restrict(self, f: &Poly4) -> Poly4 {
        let x = Poly4::var(Var::X);
        match self {
            Surface::Gamma1 => f.compose(Var::Y, &x),
            Surface::Gamma2 => f.compose(Var::Y, &-x),
            Surface::Y0 => f.substitute(Var::Y, 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Datum {
    PlusZ,
    MinusZ,
    PlusW,
    MinusW,
}

impl Datum {
    pub fn value(self, q: &[f64; 4]) -> f64 {
        match self {
            Datum::PlusZ => q[2],
            Datum::MinusZ => -q[2],
            Datum::PlusW => q[3],
            Datum::MinusW => -q[3],
        }
    }

    pub fn poly(self) -> Poly4 {
        match self {
            Datum::PlusZ => Poly4::var(Var::Z),
            Datum::MinusZ => -Poly4::var(Var::Z),
            Datum::PlusW => Poly4::var(Var::W),
            Datum::MinusW => -Poly4::var(Var::W),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CauchyProblem {
    Ca1,
    Ca2,
    Ca3,
    Ca4,
    Ca5,
    Ca6,
}

impl CauchyProblem {
    pub const ALL: [CauchyProblem; 6] = [
        CauchyProblem::Ca1,
        CauchyProblem::Ca2,
        CauchyProblem::Ca3,
        CauchyProblem::Ca4,
        CauchyProblem::Ca5,
        CauchyProblem::Ca6,
    ];

    pub fn spec(self) -> BarrierSpec {
        use Datum::*;
        use Generator::*;
        use Surface::*;
        let (generator, surface, datum) = match self {
            CauchyProblem::Ca1 => (XMinusY, Gamma1, PlusZ),
            CauchyProblem::Ca2 => (XPlusY, Gamma2, MinusZ),
            CauchyProblem::Ca3 => (XMinusY, Gamma1, PlusW),
            CauchyProblem::Ca4 => (XPlusY, Gamma2, PlusW),
            CauchyProblem::Ca5 => (XPlusY, Y0, MinusW),
            CauchyProblem::Ca6 => (XMinusY, Y0, MinusW),
        };
        BarrierSpec {
            generator,
            surface,
            datum,
        }
    }

    pub fn closed_form(self) -> ClosedForm {
        ClosedForm::ALL[self as usize]
    }

    /// Problems whose datum is `±z`.
    pub fn is_z_problem(self) -> bool {
        matches!(self, CauchyProblem::Ca1 | CauchyProblem::Ca2)
    }
}

impl fmt::Display for CauchyProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ca{}", *self as usize + 1)
    }
}

impl FromStr for CauchyProblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CauchyProblem::ALL
            .into_iter()
            .find(|p| p.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown Cauchy problem {s:?}")))
    }
}

/// Generator, initial surface and datum of a Cauchy problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct BarrierSpec {
    generator: Generator,
    surface: Surface,
    datum: Datum,
}

impl BarrierSpec {
    /// Only the six combinations of [`CauchyProblem`] are admitted.
    pub fn new(generator: Generator, surface: Surface, datum: Datum) -> Result<Self> {
        let s = Self {
            generator,
            surface,
            datum,
        };
        if CauchyProblem::ALL.iter().any(|p| p.spec() == s) {
            Ok(s)
        } else {
            Err(Error::InvalidInput(format!(
                "{generator:?} with datum {datum:?} on {surface:?} is not one of the six problems"
            )))
        }
    }

    pub fn generator(&self) -> Generator {
        self.generator
    }

    pub fn surface(&self) -> Surface {
        self.surface
    }

    pub fn datum(&self) -> Datum {
        self.datum
    }

    pub fn problem(&self) -> CauchyProblem {
        *CauchyProblem::ALL
            .iter()
            .find(|p| p.spec() == *self)
            .expect("specs are only built from the six problems")
    }
}

/// The flat solutions `f̂₁, f̂₂, ĝ₁ … ĝ₄`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClosedForm {
    F1,
    F2,
    G1,
    G2,
    G3,
    G4,
}

impl ClosedForm {
    pub const ALL: [ClosedForm; 6] = [
        ClosedForm::F1,
        ClosedForm::F2,
        ClosedForm::G1,
        ClosedForm::G2,
        ClosedForm::G3,
        ClosedForm::G4,
    ];

    pub fn problem(self) -> CauchyProblem {
        CauchyProblem::ALL[self as usize]
    }

    pub fn name(self) -> &'static str {
        ["f1", "f2", "g1", "g2", "g3", "g4"][self as usize]
    }

    pub fn poly(self) -> Poly4 {
        let x = Poly4::var(Var::X);
        let y = Poly4::var(Var::Y);
        let z = Poly4::var(Var::Z);
        let w = Poly4::var(Var::W);
        let hyp = &(&x * &x) - &(&y * &y);
        let xy2 = &x * &(&y * &y);
        let y3 = &y * &(&y * &y);
        match self {
            ClosedForm::F1 => &z - &hyp.scale(0.25),
            ClosedForm::F2 => &(-&z) - &hyp.scale(0.25),
            ClosedForm::G1 => &w - &(&hyp * &(&x + &y.scale(3.0))).scale(1.0 / 16.0),
            ClosedForm::G2 => &w - &(&hyp * &(&x - &y.scale(3.0))).scale(1.0 / 16.0),
            ClosedForm::G3 => &(-&w) - &(&xy2 - &y3).scale(0.25),
            ClosedForm::G4 => &(-&w) - &(&xy2 + &y3).scale(0.25),
        }
    }

    /// Frame coefficients `(u, v)` of the horizontal gradient, as stated in
    /// closed form: `c(x, y)` times `(1, ∓1)`.
    pub fn expected_gradient(self) -> (Poly4, Poly4) {
        let x = Poly4::var(Var::X);
        let y = Poly4::var(Var::Y);
        let (c, sign) = match self {
            ClosedForm::F1 => ((&x - &y).scale(0.5), -1.0),
            ClosedForm::F2 => ((&x + &y).scale(0.5), 1.0),
            ClosedForm::G1 => ((&(&x - &y) * &(&x + &y.scale(3.0))).scale(3.0 / 16.0), -1.0),
            ClosedForm::G2 => ((&(&x + &y) * &(&x - &y.scale(3.0))).scale(3.0 / 16.0), 1.0),
            ClosedForm::G3 => ((&y * &y).scale(0.75), 1.0),
            ClosedForm::G4 => ((&y * &y).scale(0.75), -1.0),
        };
        let v = c.scale(sign);
        (c, v)
    }

    /// The open set on which the gradient is null and future directed.
    pub fn gradient_region(self, q: &Point) -> bool {
        let (x, y) = (q.x, q.y);
        match self {
            ClosedForm::F1 | ClosedForm::F2 => y.abs() < x,
            ClosedForm::G1 => -x / 3.0 < y && y < x && x > 0.0,
            ClosedForm::G2 => -x < y && y < x / 3.0 && x > 0.0,
            ClosedForm::G3 | ClosedForm::G4 => y != 0.0 && x > 0.0,
        }
    }
}

impl FromStr for ClosedForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClosedForm::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown barrier {s:?}")))
    }
}

pub fn flat_barrier(which: ClosedForm, q: &Point) -> f64 {
    which.poly().eval(q)
}

/// A barrier computed pointwise along characteristics of a frame.
#[derive(Clone, Debug, PartialEq)]
pub struct CharacteristicField {
    pub spec: BarrierSpec,
    pub frame: FrameStructure,
    pub cfg: IntegratorConfig,
    pub horizon: f64,
    pub fd_step: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScalarField {
    ClosedForm(ClosedForm),
    Polynomial(Poly4),
    Characteristic(Box<CharacteristicField>),
}

impl ScalarField {
    pub fn characteristic(frame: &FrameStructure, problem: CauchyProblem, cfg: IntegratorConfig) -> Self {
        ScalarField::Characteristic(Box::new(CharacteristicField {
            spec: problem.spec(),
            frame: frame.clone(),
            cfg,
            horizon: DEFAULT_HORIZON,
            fd_step: DEFAULT_FD_STEP,
        }))
    }

    pub fn polynomial(&self) -> Option<Poly4> {
        match self {
            ScalarField::ClosedForm(c) => Some(c.poly()),
            ScalarField::Polynomial(p) => Some(p.clone()),
            ScalarField::Characteristic(_) => None,
        }
    }

    pub fn value(&self, q: &Point) -> Result<f64> {
        match self {
            ScalarField::ClosedForm(c) => Ok(flat_barrier(*c, q)),
            ScalarField::Polynomial(p) => Ok(p.eval(q)),
            ScalarField::Characteristic(c) => {
                Ok(characteristic_trace(&c.frame, c.spec, q, &c.cfg, c.horizon)?.value)
            }
        }
    }

    pub fn fd_step(&self) -> f64 {
        match self {
            ScalarField::Characteristic(c) => c.fd_step,
            _ => DEFAULT_FD_STEP,
        }
    }
}

/// Where a characteristic through the query point meets the initial surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CharacteristicHit {
    /// Signed generator time from the query point to the surface.
    pub time: f64,
    pub point: Point,
    /// The datum at `point`, i.e. the solution value at the query point.
    pub value: f64,
    /// `|∇s · G| / |G|` at the crossing.
    pub transversality: f64,
}

/// Follows the generator through `q` to the initial surface.
///
/// The time direction heading towards the surface is tried first, then the
/// other one, each within `|t| <= horizon`.
pub fn characteristic_trace(
    frame: &FrameStructure,
    spec: BarrierSpec,
    q: &Point,
    cfg: &IntegratorConfig,
    horizon: f64,
) -> Result<CharacteristicHit> {
    let surface = spec.surface();
    let g = spec.generator().field(frame);
    let normal = surface.normal();
    let transversality = |a: &[f64; 4]| {
        let v = g.eval_array(a);
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        let dot: f64 = v.iter().zip(normal).map(|(a, b)| a * b).sum();
        dot.abs() / (n * std::f64::consts::SQRT_2)
    };
    let q0 = q.to_array();
    let s0 = surface.value(&q0);
    if s0 == 0.0 {
        return Ok(CharacteristicHit {
            time: 0.0,
            point: *q,
            value: spec.datum().value(&q0),
            transversality: transversality(&q0),
        });
    }
    let rate: f64 = g.eval_array(&q0).iter().zip(normal).map(|(a, b)| a * b).sum();
    let first = if rate * s0 > 0.0 { -1.0 } else { 1.0 };
    let rhs = |_t: f64, y: &[f64; 4]| g.eval_array(y);
    let event = |y: &[f64; 4]| surface.value(y);
    let mut failure = None;
    for dir in [first, -first] {
        match ode::solve(&rhs, 0.0, q0, dir * horizon, cfg, Some(&event)) {
            Ok(sol) if sol.event_hit => {
                let end = sol.last();
                let tr = transversality(&end.y);
                if tr < MIN_TRANSVERSALITY {
                    return Err(Error::NonDifferentiable(format!(
                        "characteristic through {q} touches the initial surface tangentially"
                    )));
                }
                return Ok(CharacteristicHit {
                    time: end.t,
                    point: Point::from_array(end.y),
                    value: spec.datum().value(&end.y),
                    transversality: tr,
                });
            }
            Ok(_) => {}
            Err(e) => failure = Some(e),
        }
    }
    Err(failure.unwrap_or(Error::NoBoundaryHit { horizon }))
}

pub fn characteristic_solve(
    frame: &FrameStructure,
    spec: BarrierSpec,
    q: &Point,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    Ok(characteristic_trace(frame, spec, q, cfg, DEFAULT_HORIZON)?.value)
}

/// `G(f)` as a polynomial.
pub fn pde_residual_symbolic(frame: &FrameStructure, generator: Generator, f: &Poly4) -> Poly4 {
    generator.field(frame).apply(f)
}

/// `|G(f)(q)|`; exact for polynomial fields, central differences along
/// `G(q)` otherwise.
pub fn pde_residual(
    frame: &FrameStructure,
    generator: Generator,
    field: &ScalarField,
    q: &Point,
) -> Result<f64> {
    if let Some(p) = field.polynomial() {
        return Ok(pde_residual_symbolic(frame, generator, &p).eval(q).abs());
    }
    let h = field.fd_step();
    let dir = generator.field(frame).eval(q);
    let plus = field.value(&q.offset(&dir, h))?;
    let minus = field.value(&q.offset(&dir, -h))?;
    Ok(((plus - minus) / (2.0 * h)).abs())
}

/// `f|surface - datum` as a polynomial; zero iff the boundary condition holds.
pub fn boundary_defect(which: ClosedForm) -> Poly4 {
    let spec = which.problem().spec();
    &spec.surface().restrict(&which.poly()) - &spec.surface().restrict(&spec.datum().poly())
}

/// Result of a causal-region audit over a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionAudit {
    pub checked: usize,
    pub violations: usize,
    /// Largest `|g(∇f, ∇f)|` seen inside the region.
    pub worst_residual: f64,
    pub first_violation: Option<Point>,
}

/// Checks that the horizontal gradient is null and future directed at every
/// grid point of `region`. With `null_tol > 0`, `|g(∇f,∇f)| <= null_tol·(u²+v²)`
/// counts as null.
pub fn gradient_region_audit(
    frame: &FrameStructure,
    field: &ScalarField,
    grid: &[Point],
    region: &(dyn Fn(&Point) -> bool + Sync),
    null_tol: f64,
) -> Result<RegionAudit> {
    let per_point: Vec<Option<(bool, f64)>> = grid
        .par_iter()
        .map(|q| -> Result<Option<(bool, f64)>> {
            if !region(q) {
                return Ok(None);
            }
            let g = horizontal_gradient(frame, field, q)?;
            let norm2 = g.norm2();
            let ok = if null_tol == 0.0 {
                classify(&g).is_null_future()
            } else {
                g.u > 0.0 && norm2.abs() <= null_tol * (g.u * g.u + g.v * g.v)
            };
            Ok(Some((ok, norm2.abs())))
        })
        .collect::<Result<_>>()?;
    let mut audit = RegionAudit {
        checked: 0,
        violations: 0,
        worst_residual: 0.0,
        first_violation: None,
    };
    for (q, r) in grid.iter().zip(per_point) {
        let Some((ok, res)) = r else { continue };
        audit.checked += 1;
        audit.worst_residual = audit.worst_residual.max(res);
        if !ok {
            audit.violations += 1;
            audit.first_violation.get_or_insert(*q);
        }
    }
    Ok(audit)
}

/// Regular grid over a box; an axis with one point sits at its midpoint.
pub fn box_grid(lo: [f64; 4], hi: [f64; 4], counts: [usize; 4]) -> Vec<Point> {
    let axis = |k: usize| -> Vec<f64> {
        let n = counts[k];
        if n <= 1 {
            return vec![0.5 * (lo[k] + hi[k])];
        }
        (0..n)
            .map(|i| lo[k] + (hi[k] - lo[k]) * i as f64 / (n - 1) as f64)
            .collect()
    };
    let axes = [axis(0), axis(1), axis(2), axis(3)];
    let mut out = Vec::with_capacity(axes.iter().map(Vec::len).product());
    for &x in &axes[0] {
        for &y in &axes[1] {
            for &z in &axes[2] {
                for &w in &axes[3] {
                    out.push(Point::new(x, y, z, w));
                }
            }
        }
    }
    out
}

/// One cell `A_ij` of the flat reachable-set estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cell {
    /// 1 or 2: picks `f̂ᵢ` and the sign of `z`.
    pub i: u8,
    /// 1 to 4: picks `ĝⱼ` and the signs of `y` and `w`.
    pub j: u8,
}

impl Cell {
    pub fn all() -> impl Iterator<Item = Cell> {
        (1..=2).flat_map(|i| (1..=4).map(move |j| Cell { i, j }))
    }

    pub fn name(&self) -> String {
        format!("A{}{}", self.i, self.j)
    }

    /// Failed predicates at `q`, each relaxed by `slack`.
    pub fn failures(&self, q: &Point, slack: f64) -> Vec<&'static str> {
        let mut out = Vec::new();
        let f = if self.i == 1 { ClosedForm::F1 } else { ClosedForm::F2 };
        let g = ClosedForm::ALL[1 + self.j as usize];
        if flat_barrier(f, q) > slack {
            out.push(if self.i == 1 { "f1<=0" } else { "f2<=0" });
        }
        if flat_barrier(g, q) > slack {
            out.push(["g1<=0", "g2<=0", "g3<=0", "g4<=0"][self.j as usize - 1]);
        }
        if q.x < -slack {
            out.push("x>=0");
        }
        let y_up = self.j % 2 == 1;
        if y_up && q.y < -slack {
            out.push("y>=0");
        }
        if !y_up && q.y > slack {
            out.push("y<=0");
        }
        if self.i == 1 && q.z < -slack {
            out.push("z>=0");
        }
        if self.i == 2 && q.z > slack {
            out.push("z<=0");
        }
        let w_up = self.j <= 2;
        if w_up && q.w < -slack {
            out.push("w>=0");
        }
        if !w_up && q.w > slack {
            out.push("w<=0");
        }
        out
    }

    pub fn contains(&self, q: &Point, slack: f64) -> bool {
        self.failures(q, slack).is_empty()
    }
}

impl FromStr for Cell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Cell::all()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownRegion(s.to_string()))
    }
}

/// A union of sign conditions that should contain the reachable set.
#[derive(Clone, Debug, PartialEq)]
pub enum RegionSet {
    Cell(Cell),
    /// All eight flat cells.
    FlatUnion,
    /// `{f₁ ≤ 0, x ≥ 0, z ≥ 0} ∪ {f₂ ≤ 0, x ≥ 0, z ≤ 0}` with `f₁`, `f₂` the
    /// solutions of the two z-problems of some frame.
    WeakGeneral { f1: ScalarField, f2: ScalarField },
}

impl RegionSet {
    /// Builds the weak region of `frame`, using closed forms when it is flat.
    pub fn weak_general(frame: &FrameStructure, cfg: IntegratorConfig) -> Self {
        if frame.is_flat() {
            RegionSet::WeakGeneral {
                f1: ScalarField::ClosedForm(ClosedForm::F1),
                f2: ScalarField::ClosedForm(ClosedForm::F2),
            }
        } else {
            RegionSet::WeakGeneral {
                f1: ScalarField::characteristic(frame, CauchyProblem::Ca1, cfg),
                f2: ScalarField::characteristic(frame, CauchyProblem::Ca2, cfg),
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            RegionSet::Cell(c) => c.name(),
            RegionSet::FlatUnion => "flat_union".into(),
            RegionSet::WeakGeneral { .. } => "weak_general".into(),
        }
    }

    /// Empty iff `q` belongs to the set; otherwise one entry per component
    /// listing its failed predicates.
    pub fn violations(&self, q: &Point, slack: f64) -> Result<Vec<String>> {
        let describe = |c: &Cell| -> Option<String> {
            let f = c.failures(q, slack);
            (!f.is_empty()).then(|| format!("{}: {}", c.name(), f.join(",")))
        };
        match self {
            RegionSet::Cell(c) => Ok(describe(c).into_iter().collect()),
            RegionSet::FlatUnion => {
                let all: Vec<String> = Cell::all().filter_map(|c| describe(&c)).collect();
                Ok(if all.len() == 8 { all } else { Vec::new() })
            }
            RegionSet::WeakGeneral { f1, f2 } => {
                let mut out = Vec::new();
                for (f, up, name) in [(f1, true, "f1"), (f2, false, "f2")] {
                    let mut failed = Vec::new();
                    if q.x < -slack {
                        failed.push("x>=0".to_string());
                    }
                    if up && q.z < -slack {
                        failed.push("z>=0".into());
                    }
                    if !up && q.z > slack {
                        failed.push("z<=0".into());
                    }
                    if failed.is_empty() && f.value(q)? > slack {
                        failed.push(format!("{name}<=0"));
                    }
                    if failed.is_empty() {
                        return Ok(Vec::new());
                    }
                    out.push(format!("{name}-component: {}", failed.join(",")));
                }
                Ok(out)
            }
        }
    }

    pub fn contains(&self, q: &Point, slack: f64) -> Result<bool> {
        Ok(self.violations(q, slack)?.is_empty())
    }
}

/// Membership in a named flat region (`A11` … `A24` or `flat_union`).
pub fn region_membership(name: &str, q: &Point, slack: f64) -> Result<bool> {
    if !(slack >= 0.0) {
        return Err(Error::InvalidInput("slack must be nonnegative".into()));
    }
    let set = if name.eq_ignore_ascii_case("flat_union") {
        RegionSet::FlatUnion
    } else {
        RegionSet::Cell(name.parse()?)
    };
    set.contains(q, slack)
}

pub const ORDER_RADII: [f64; 4] = [0.4, 0.2, 0.1, 0.05];
pub const ORDER_DIRECTIONS: usize = 64;

/// Sup-errors per radius and the fitted log-log slope.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderFit {
    pub radii: Vec<f64>,
    pub errors: Vec<f64>,
    /// `None` when every error is below [`EXACT_FLOOR`].
    pub slope: Option<f64>,
}

impl OrderFit {
    pub fn is_exact(&self) -> bool {
        self.slope.is_none()
    }
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Unit directions from the Halton sequence in bases 2, 3, 5, 7.
pub fn halton_directions(n: usize) -> Vec<[f64; 4]> {
    let mut out = Vec::with_capacity(n);
    let mut i = 1;
    while out.len() < n {
        let d: [f64; 4] =
            std::array::from_fn(|k| 2.0 * radical_inverse(i, [2, 3, 5, 7][k]) - 1.0);
        let norm = d.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 0.1 {
            out.push(d.map(|c| c / norm));
        }
        i += 1;
    }
    out
}

/// Sup-norm gap between the characteristic solution of `frame` and the flat
/// closed form on spheres of the given radii, with a least-squares slope of
/// `log error` against `log r`.
pub fn perturbation_order(
    frame: &FrameStructure,
    spec: BarrierSpec,
    radii: &[f64],
    cfg: &IntegratorConfig,
) -> Result<OrderFit> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] >= w[0]) || radii[radii.len() - 1] <= 0.0 {
        return Err(Error::InvalidInput("radii must be positive and decreasing".into()));
    }
    let closed = spec.problem().closed_form();
    let dirs = halton_directions(ORDER_DIRECTIONS);
    let mut errors = Vec::with_capacity(radii.len());
    for &r in radii {
        let errs: Vec<f64> = dirs
            .par_iter()
            .map(|d| {
                let q = Point::from_array(d.map(|c| r * c));
                let v = characteristic_solve(frame, spec, &q, cfg)?;
                Ok((v - flat_barrier(closed, &q)).abs())
            })
            .collect::<Result<_>>()?;
        errors.push(errs.into_iter().fold(0.0, f64::max));
    }
    let slope = if errors.iter().all(|&e| e <= EXACT_FLOOR) {
        None
    } else {
        let pts: Vec<(f64, f64)> = radii
            .iter()
            .zip(&errors)
            .map(|(r, e)| (r.ln(), e.max(f64::MIN_POSITIVE).ln()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(if sxx > 0.0 { sxy / sxx } else { f64::NAN })
    };
    Ok(OrderFit {
        radii: radii.to_vec(),
        errors,
        slope,
    })
}

/// Tolerances used by [`perturbation_order`] callers that need errors far
/// below the smallest radius' effect.
pub fn order_fit_config() -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: 1e-13,
        abs_tol: 1e-16,
        max_step: 0.05,
        event_tol: 1e-15,
    }
}

/// Convenience for the flat frame.
pub fn flat_characteristic(problem: CauchyProblem, q: &Point, cfg: &IntegratorConfig) -> Result<f64> {
    characteristic_solve(&flat_structure(), problem.spec(), q, cfg)
}
