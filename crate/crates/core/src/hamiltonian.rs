//! Geodesic Hamiltonian `H = -½⟨p,X⟩² + ½⟨p,Y⟩²` and its flow.

use std::io::Write;

use nalgebra::{Matrix4x2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{hyperbolic_radius, FrameStructure, HyperbolicRegion, Point};
use crate::ode::{self, IntegratorConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Covector {
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    pub pw: f64,
}

impl Covector {
    pub const fn new(px: f64, py: f64, pz: f64, pw: f64) -> Self {
        Self { px, py, pz, pw }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.px, self.py, self.pz, self.pw]
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_array(self.to_array().map(|c| s * c))
    }

    pub fn pair(&self, v: &[f64; 4]) -> f64 {
        self.to_array().iter().zip(v).map(|(a, b)| a * b).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.to_array().iter().all(|c| *c == 0.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: Point,
    pub p: Covector,
}

impl PhasePoint {
    pub fn new(q: Point, p: Covector) -> Self {
        Self { q, p }
    }

    pub fn to_array(&self) -> [f64; 8] {
        let (q, p) = (self.q.to_array(), self.p.to_array());
        std::array::from_fn(|i| if i < 4 { q[i] } else { p[i - 4] })
    }

    pub fn from_array(s: [f64; 8]) -> Self {
        Self::new(
            Point::new(s[0], s[1], s[2], s[3]),
            Covector::new(s[4], s[5], s[6], s[7]),
        )
    }
}

/// A sampled integral curve of the Hamiltonian vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicArc {
    pub samples: Vec<(f64, PhasePoint)>,
    pub energy0: f64,
}

impl GeodesicArc {
    pub fn end(&self) -> &PhasePoint {
        &self.samples.last().expect("arcs hold their initial point").1
    }

    pub fn max_energy_drift(&self, frame: &FrameStructure) -> f64 {
        self.samples
            .iter()
            .map(|(_, pp)| (hamiltonian(frame, pp) - self.energy0).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `t,x,y,z,w,px,py,pz,pw`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "y", "z", "w", "px", "py", "pz", "pw"])?;
        for (t, pp) in &self.samples {
            let mut row = vec![t.to_string()];
            row.extend(pp.to_array().iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `(⟨p, X(q)⟩, ⟨p, Y(q)⟩)`.
pub fn pairings(frame: &FrameStructure, pp: &PhasePoint) -> (f64, f64) {
    let (x, y) = frame.eval(&pp.q.to_array());
    (pp.p.pair(&x), pp.p.pair(&y))
}

pub fn hamiltonian(frame: &FrameStructure, pp: &PhasePoint) -> f64 {
    let (a, b) = pairings(frame, pp);
    -0.5 * a * a + 0.5 * b * b
}

/// Hamilton's equations: `q̇ = -aX + bY`, `ṗᵢ = a ∂ᵢa - b ∂ᵢb` with
/// `a = ⟨p,X⟩`, `b = ⟨p,Y⟩`.
pub fn hamilton_rhs(frame: &FrameStructure, s: &[f64; 8]) -> [f64; 8] {
    let q = [s[0], s[1], s[2], s[3]];
    let p = [s[4], s[5], s[6], s[7]];
    let (x, y) = frame.eval(&q);
    let (jx, jy) = frame.jacobians(&q);
    let dot = |v: &[f64; 4]| p.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let a = dot(&x);
    let b = dot(&y);
    let mut out = [0.0; 8];
    for i in 0..4 {
        out[i] = -a * x[i] + b * y[i];
        let da: f64 = (0..4).map(|j| p[j] * jx[j][i]).sum();
        let db: f64 = (0..4).map(|j| p[j] * jy[j][i]).sum();
        out[4 + i] = a * da - b * db;
    }
    out
}

pub fn hamiltonian_flow(
    frame: &FrameStructure,
    pp0: &PhasePoint,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<GeodesicArc> {
    let rhs = |_t: f64, s: &[f64; 8]| hamilton_rhs(frame, s);
    let sol = ode::solve(&rhs, 0.0, pp0.to_array(), t_end, cfg, None)?;
    Ok(GeodesicArc {
        samples: sol
            .nodes
            .iter()
            .map(|n| (n.t, PhasePoint::from_array(n.y)))
            .collect(),
        energy0: hamiltonian(frame, pp0),
    })
}

/// Projection of the time-one flow from `(q0, λ)`.
pub fn exp_map(
    frame: &FrameStructure,
    q0: &Point,
    lambda: &Covector,
    cfg: &IntegratorConfig,
) -> Result<Point> {
    Ok(hamiltonian_flow(frame, &PhasePoint::new(*q0, *lambda), 1.0, cfg)?
        .end()
        .q)
}

/// Trajectory of `X` from `q0`, sampled at `n + 1` equally spaced times.
///
/// The flat frame uses `(x₀+t, y₀, z₀+½y₀t, w₀+½y₀²t)`.
pub fn abnormal_trajectory(
    frame: &FrameStructure,
    q0: &Point,
    t_end: f64,
    n: usize,
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, Point)>> {
    let n = n.max(1);
    let times: Vec<f64> = (0..=n).map(|k| t_end * k as f64 / n as f64).collect();
    if frame.is_flat() {
        let y0 = q0.y;
        return Ok(times
            .into_iter()
            .map(|t| {
                let q = Point::new(q0.x + t, y0, q0.z + 0.5 * y0 * t, q0.w + 0.5 * y0 * y0 * t);
                (t, q)
            })
            .collect());
    }
    let rhs = |_t: f64, q: &[f64; 4]| frame.x().eval_array(q);
    let mut out = vec![(0.0, *q0)];
    let mut q = q0.to_array();
    for w in times.windows(2) {
        q = ode::solve(&rhs, w[0], q, w[1], cfg, None)?.last().y;
        out.push((w[1], Point::from_array(q)));
    }
    Ok(out)
}

/// Defects of a sampled phase curve as a lift of its projection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiftDefect {
    /// Largest gap between the finite-difference derivative and Hamilton's
    /// equations.
    pub hamilton: f64,
    /// Largest `|g(γ̇,X) - ⟨λ,X⟩| + |g(γ̇,Y) - ⟨λ,Y⟩|` plus the non-horizontal
    /// part of `γ̇`; infinite when the momentum vanishes somewhere.
    pub pairing: f64,
    pub zero_section: bool,
}

impl LiftDefect {
    pub fn total(&self) -> f64 {
        self.hamilton + self.pairing
    }
}

/// Frame coefficients `(α, β)` of `v ≈ αX + βY` and the least-squares gap.
pub fn frame_coefficients(frame: &FrameStructure, q: &[f64; 4], v: &[f64; 4]) -> (f64, f64, f64) {
    let (x, y) = frame.eval(q);
    let a = Matrix4x2::from_fn(|i, j| if j == 0 { x[i] } else { y[i] });
    let b = Vector4::from(*v);
    match a.svd(true, true).solve(&b, 1e-14) {
        Ok(c) => (c[0], c[1], (a * c - b).norm()),
        Err(_) => (0.0, 0.0, b.norm()),
    }
}

/// Pairing defect at one point for a given velocity.
fn pairing_defect(frame: &FrameStructure, pp: &PhasePoint, qdot: &[f64; 4]) -> f64 {
    let (alpha, beta, gap) = frame_coefficients(frame, &pp.q.to_array(), qdot);
    let (a, b) = pairings(frame, pp);
    // g(q̇, X) = -α and g(q̇, Y) = β
    (-alpha - a).abs() + (beta - b).abs() + gap
}

/// Pairing defect along an integrated arc, with `γ̇` from the flow itself.
pub fn arc_pairing_defect(frame: &FrameStructure, arc: &GeodesicArc) -> f64 {
    arc.samples
        .iter()
        .map(|(_, pp)| {
            let s = hamilton_rhs(frame, &pp.to_array());
            pairing_defect(frame, pp, &[s[0], s[1], s[2], s[3]])
        })
        .fold(0.0, f64::max)
}

/// Three-point derivative on a non-uniform grid (one-sided at the ends).
fn fd_derivative(t: &[f64], y: &[[f64; 8]], i: usize) -> [f64; 8] {
    let n = t.len();
    let (a, b, c) = if i == 0 {
        (0, 1, 2)
    } else if i == n - 1 {
        (n - 3, n - 2, n - 1)
    } else {
        (i - 1, i, i + 1)
    };
    let ti = t[i];
    // derivative of the Lagrange interpolant through a, b, c at ti
    let wa = (2.0 * ti - t[b] - t[c]) / ((t[a] - t[b]) * (t[a] - t[c]));
    let wb = (2.0 * ti - t[a] - t[c]) / ((t[b] - t[a]) * (t[b] - t[c]));
    let wc = (2.0 * ti - t[a] - t[b]) / ((t[c] - t[a]) * (t[c] - t[b]));
    std::array::from_fn(|k| wa * y[a][k] + wb * y[b][k] + wc * y[c][k])
}

/// Checks a sampled phase curve against Hamilton's equations and the pairing
/// identity `g(γ̇, v) = ⟨λ, v⟩` for horizontal `v`.
pub fn lift_residual(frame: &FrameStructure, curve: &[(f64, PhasePoint)]) -> Result<LiftDefect> {
    if curve.len() < 2 {
        return Err(Error::InvalidInput("a lift needs at least two samples".into()));
    }
    if curve.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::InvalidInput("sample times must increase".into()));
    }
    let t: Vec<f64> = curve.iter().map(|c| c.0).collect();
    let y: Vec<[f64; 8]> = curve.iter().map(|c| c.1.to_array()).collect();
    let zero_section = curve.iter().any(|c| c.1.p.is_zero());
    let mut hamilton = 0.0f64;
    let mut pairing = 0.0f64;
    for (i, (_, pp)) in curve.iter().enumerate() {
        let d = if curve.len() == 2 {
            let h = t[1] - t[0];
            std::array::from_fn(|k| (y[1][k] - y[0][k]) / h)
        } else {
            fd_derivative(&t, &y, i)
        };
        let rhs = hamilton_rhs(frame, &y[i]);
        let gap = d.iter().zip(rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        hamilton = hamilton.max(gap);
        pairing = pairing.max(pairing_defect(frame, pp, &[d[0], d[1], d[2], d[3]]));
    }
    if zero_section {
        pairing = f64::INFINITY;
    }
    Ok(LiftDefect {
        hamilton,
        pairing,
        zero_section,
    })
}

/// Length `∫ √(u² - v²) dt` of a curve with controls `(u(t), v(t))` by
/// adaptive Simpson quadrature.
pub fn sub_lorentzian_length(
    controls: &dyn Fn(f64) -> (f64, f64),
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<f64> {
    let integrand = |t: f64| -> Result<f64> {
        let (u, v) = controls(t);
        if u < v.abs() - tol {
            return Err(Error::NotNonspacelike { t, u, v });
        }
        Ok((u * u - v * v).max(0.0).sqrt())
    };
    if t1 == t0 {
        return Ok(0.0);
    }
    let fa = integrand(t0)?;
    let fb = integrand(t1)?;
    let m = 0.5 * (t0 + t1);
    let fm = integrand(m)?;
    let whole = (t1 - t0) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&integrand, t0, t1, fa, fm, fb, whole, tol.max(1e-14), 40)
}

#[allow(clippy::too_many_arguments)]
fn simpson(
    f: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// A curve sample with the control held on the interval that starts here.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlledSample {
    pub t: f64,
    pub q: Point,
    pub u: f64,
    pub v: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialBound {
    pub length: f64,
    pub delta_r1: f64,
    pub ok: bool,
}

/// Compares the length of a piecewise-constant-control curve in `|y| < x`
/// with the growth of `R₁ = √(x² - y²)` along it.
pub fn radial_bound_check(
    frame: &FrameStructure,
    curve: &[ControlledSample],
    tol: f64,
) -> Result<RadialBound> {
    if !frame.is_flat() {
        return Err(Error::InvalidInput("the radial bound is stated for the flat frame".into()));
    }
    if curve.is_empty() {
        return Err(Error::InvalidInput("empty curve".into()));
    }
    let mut r1 = Vec::with_capacity(curve.len());
    for (index, s) in curve.iter().enumerate() {
        let h = hyperbolic_radius(&s.q);
        match (h.region, h.r1) {
            (HyperbolicRegion::S1Plus, Some(r)) => r1.push(r),
            _ => return Err(Error::RegionViolation { index }),
        }
    }
    let mut length = 0.0;
    for w in curve.windows(2) {
        let (u, v) = (w[0].u, w[0].v);
        if u < v.abs() - tol {
            return Err(Error::NotNonspacelike { t: w[0].t, u, v });
        }
        length += (w[1].t - w[0].t) * (u * u - v * v).max(0.0).sqrt();
    }
    let delta_r1 = r1[r1.len() - 1] - r1[0];
    Ok(RadialBound {
        length,
        delta_r1,
        ok: length <= delta_r1 + tol,
    })
}
