//! Sparse real polynomials in the four coordinates `(x, y, z, w)`.
//!
//! Terms are kept in canonical form: sorted by exponent tuple, no duplicate
//! exponents and no zero coefficients. Arithmetic on dyadic coefficients is
//! exact in `f64`, which is what makes the bracket and barrier identities
//! checkable as polynomial equalities.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::frames::Point;

/// Exponents of `x, y, z, w` in that order.
pub type Exponents = [u32; 4];

/// Coordinate index into a [`Point`] / exponent tuple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    X = 0,
    Y = 1,
    Z = 2,
    W = 3,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::X, Var::Y, Var::Z, Var::W];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// One monomial `coef * x^a y^b z^c w^d`.
///
/// This is also the wire format of a polynomial term in run configurations:
/// `{"coef": 0.05, "exp": [1, 0, 0, 0]}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coef: f64,
    pub exp: Exponents,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly4 {
    terms: Vec<Term>,
}

impl Poly4 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, [0, 0, 0, 0])
    }

    pub fn monomial(coef: f64, exp: Exponents) -> Self {
        Self::from_terms([Term { coef, exp }])
    }

    /// The coordinate function `v`.
    pub fn var(v: Var) -> Self {
        let mut exp = [0; 4];
        exp[v.index()] = 1;
        Self::monomial(1.0, exp)
    }

    /// Builds a canonical polynomial, merging duplicate exponents and
    /// dropping zero coefficients.
    pub fn from_terms<I: IntoIterator<Item = Term>>(terms: I) -> Self {
        let mut acc: BTreeMap<Exponents, f64> = BTreeMap::new();
        for t in terms {
            *acc.entry(t.exp).or_insert(0.0) += t.coef;
        }
        Self {
            terms: acc
                .into_iter()
                .filter(|&(_, c)| c != 0.0)
                .map(|(exp, coef)| Term { coef, exp })
                .collect(),
        }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.exp.iter().sum())
            .max()
            .unwrap_or(0)
    }

    /// True when no term carries a positive power of `v`.
    pub fn is_free_of(&self, v: Var) -> bool {
        self.terms.iter().all(|t| t.exp[v.index()] == 0)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_terms(self.terms.iter().map(|t| Term {
            coef: t.coef * s,
            exp: t.exp,
        }))
    }

    /// Exact partial derivative with respect to `v`.
    pub fn derivative(&self, v: Var) -> Self {
        let i = v.index();
        Self::from_terms(self.terms.iter().filter(|t| t.exp[i] > 0).map(|t| {
            let mut exp = t.exp;
            exp[i] -= 1;
            Term {
                coef: t.coef * f64::from(t.exp[i]),
                exp,
            }
        }))
    }

    pub fn gradient(&self) -> [Poly4; 4] {
        Var::ALL.map(|v| self.derivative(v))
    }

    /// Substitutes a constant for `v`.
    pub fn substitute(&self, v: Var, value: f64) -> Self {
        let i = v.index();
        Self::from_terms(self.terms.iter().map(|t| {
            let mut exp = t.exp;
            exp[i] = 0;
            Term {
                coef: t.coef * value.powi(t.exp[i] as i32),
                exp,
            }
        }))
    }

    /// Replaces the variable `v` by the polynomial `p`.
    pub fn compose(&self, v: Var, p: &Poly4) -> Self {
        let i = v.index();
        let mut out = Poly4::zero();
        for t in &self.terms {
            let mut exp = t.exp;
            exp[i] = 0;
            let mut piece = Poly4::monomial(t.coef, exp);
            for _ in 0..t.exp[i] {
                piece = &piece * p;
            }
            out = &out + &piece;
        }
        out
    }

    pub fn eval(&self, q: &Point) -> f64 {
        self.eval_array(&q.to_array())
    }

    pub fn eval_array(&self, c: &[f64; 4]) -> f64 {
        let mut sum = 0.0;
        for t in &self.terms {
            let mut m = t.coef;
            for (k, &e) in t.exp.iter().enumerate() {
                match e {
                    0 => {}
                    1 => m *= c[k],
                    2 => m *= c[k] * c[k],
                    _ => m *= c[k].powi(e as i32),
                }
            }
            sum += m;
        }
        sum
    }

    /// Largest absolute coefficient; zero for the zero polynomial.
    pub fn max_abs_coef(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, t| m.max(t.coef.abs()))
    }
}

impl From<f64> for Poly4 {
    fn from(c: f64) -> Self {
        Poly4::constant(c)
    }
}

impl Serialize for Poly4 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.terms.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Poly4 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let terms = Vec::<Term>::deserialize(d)?;
        if let Some(t) = terms.iter().find(|t| !t.coef.is_finite()) {
            return Err(serde::de::Error::custom(format!(
                "non-finite coefficient {} for exponent {:?}",
                t.coef, t.exp
            )));
        }
        Ok(Poly4::from_terms(terms))
    }
}

impl fmt::Display for Poly4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        const NAMES: [&str; 4] = ["x", "y", "z", "w"];
        for (n, t) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " {} ", if t.coef < 0.0 { '-' } else { '+' })?;
            } else if t.coef < 0.0 {
                write!(f, "-")?;
            }
            let c = t.coef.abs();
            let is_const = t.exp == [0; 4];
            if c != 1.0 || is_const {
                write!(f, "{c}")?;
            }
            for (k, &e) in t.exp.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "{}", NAMES[k])?,
                    _ => write!(f, "{}^{}", NAMES[k], e)?,
                }
            }
        }
        Ok(())
    }
}

impl Add for &Poly4 {
    type Output = Poly4;
    fn add(self, rhs: &Poly4) -> Poly4 {
        Poly4::from_terms(self.terms.iter().chain(rhs.terms.iter()).copied())
    }
}

impl Sub for &Poly4 {
    type Output = Poly4;
    fn sub(self, rhs: &Poly4) -> Poly4 {
        Poly4::from_terms(self.terms.iter().copied().chain(rhs.terms.iter().map(|t| Term {
            coef: -t.coef,
            exp: t.exp,
        })))
    }
}

impl Mul for &Poly4 {
    type Output = Poly4;
    fn mul(self, rhs: &Poly4) -> Poly4 {
        let mut acc = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                acc.push(Term {
                    coef: a.coef * b.coef,
                    exp: [
                        a.exp[0] + b.exp[0],
                        a.exp[1] + b.exp[1],
                        a.exp[2] + b.exp[2],
                        a.exp[3] + b.exp[3],
                    ],
                });
            }
        }
        Poly4::from_terms(acc)
    }
}

impl Neg for &Poly4 {
    type Output = Poly4;
    fn neg(self) -> Poly4 {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Poly4 {
            type Output = Poly4;
            fn $m(self, rhs: Poly4) -> Poly4 {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Poly4> for Poly4 {
            type Output = Poly4;
            fn $m(self, rhs: &Poly4) -> Poly4 {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Poly4 {
    type Output = Poly4;
    fn neg(self) -> Poly4 {
        self.scale(-1.0)
    }
}

/// Shorthand used throughout the crate for building fixed polynomials.
pub(crate) fn p(coef: f64, exp: Exponents) -> Poly4 {
    Poly4::monomial(coef, exp)
}
