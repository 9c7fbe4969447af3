//! Sampled reachable sets of the control system `q̇ = uX + vY` with
//! nonspacelike future-directed controls (`u > 0`, `u ≥ |v|`).
//!
//! Every path draws from its own ChaCha stream keyed by `(seed, path index)`,
//! so clouds are identical whether paths run serially or in parallel.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barriers::{flat_barrier, ClosedForm, RegionSet};
use crate::error::{Error, Result};
use crate::frames::{FrameStructure, MartinetFrame, Point, Provenance};
use crate::hamiltonian::ControlledSample;
use crate::ode::{self, IntegratorConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlPiece {
    pub duration: f64,
    pub u: f64,
    pub v: f64,
}

impl ControlPiece {
    pub const fn new(duration: f64, u: f64, v: f64) -> Self {
        Self { duration, u, v }
    }

    /// `√(u² - v²)` per unit time.
    pub fn speed(&self) -> f64 {
        (self.u * self.u - self.v * self.v).max(0.0).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlPath {
    pub start: Point,
    pub pieces: Vec<ControlPiece>,
}

impl ControlPath {
    pub fn new(start: Point, pieces: Vec<ControlPiece>) -> Self {
        Self { start, pieces }
    }

    pub fn duration(&self) -> f64 {
        self.pieces.iter().map(|p| p.duration).sum()
    }

    pub fn validate(&self, horizon: Option<f64>) -> Result<()> {
        for (i, p) in self.pieces.iter().enumerate() {
            if !(p.duration > 0.0 && p.duration.is_finite()) {
                return Err(Error::InvalidControl(format!("piece {i} has duration {}", p.duration)));
            }
            if !(p.u > 0.0 && p.u >= p.v.abs() && p.u.is_finite()) {
                return Err(Error::InvalidControl(format!(
                    "piece {i} has (u, v) = ({}, {}), which is not nonspacelike future directed",
                    p.u, p.v
                )));
            }
        }
        if let Some(h) = horizon {
            let d = self.duration();
            if d > h * (1.0 + 1e-12) {
                return Err(Error::InvalidControl(format!("duration {d} exceeds horizon {h}")));
            }
        }
        if !self.start.is_finite() {
            return Err(Error::InvalidControl("non-finite start point".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundingBox {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
}

impl Default for BoundingBox {
    fn default() -> Self {
        Self {
            lo: [0.0, -1.0, -1.0, -1.0],
            hi: [1.2, 1.0, 1.0, 1.0],
        }
    }
}

impl BoundingBox {
    pub fn contains(&self, q: &Point) -> bool {
        self.margin(&q.to_array(), &[0, 1, 2, 3]) >= 0.0
    }

    /// Signed distance to the nearest face over the given axes; negative
    /// outside.
    fn margin(&self, q: &[f64; 4], axes: &[usize]) -> f64 {
        axes.iter()
            .map(|&k| (q[k] - self.lo[k]).min(self.hi[k] - q[k]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        if (0..4).all(|k| self.lo[k] < self.hi[k]) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("degenerate box {self:?}")))
        }
    }
}

/// An integrated control path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathOutcome {
    /// Solver nodes, strictly increasing in time; each carries the control of
    /// the interval that starts there.
    pub samples: Vec<ControlledSample>,
    pub end: Point,
    pub length: f64,
    /// Stopped where the path left the box.
    pub truncated: bool,
}

/// Integration of a path in `N` dimensions; `embed` maps states to points.
fn run_path<const N: usize>(
    velocity: &(dyn Fn(&[f64; N], f64, f64) -> [f64; N] + Sync),
    start: [f64; N],
    pieces: &[ControlPiece],
    margin: Option<&dyn Fn(&[f64; N]) -> f64>,
    embed: &dyn Fn(&[f64; N]) -> Point,
    cfg: &IntegratorConfig,
) -> Result<PathOutcome> {
    let mut samples: Vec<ControlledSample> = Vec::new();
    let mut state = start;
    let mut t = 0.0;
    let mut length = 0.0;
    let mut truncated = false;
    let (u0, v0) = pieces.first().map_or((0.0, 0.0), |p| (p.u, p.v));
    samples.push(ControlledSample { t, q: embed(&state), u: u0, v: v0 });
    for piece in pieces {
        if let Some(last) = samples.last_mut() {
            last.u = piece.u;
            last.v = piece.v;
        }
        let rhs = |_t: f64, y: &[f64; N]| velocity(y, piece.u, piece.v);
        let sol = ode::solve(&rhs, t, state, t + piece.duration, cfg, margin)?;
        for n in &sol.nodes[1..] {
            samples.push(ControlledSample { t: n.t, q: embed(&n.y), u: piece.u, v: piece.v });
        }
        let end = sol.last();
        length += (end.t - t) * piece.speed();
        t = end.t;
        state = end.y;
        if sol.event_hit {
            truncated = true;
            break;
        }
    }
    Ok(PathOutcome {
        end: embed(&state),
        samples,
        length,
        truncated,
    })
}

/// Integrates `q̇ = uX(q) + vY(q)` piece by piece, stopping at the exit
/// point if the path leaves `bbox`.
pub fn integrate_path(
    frame: &FrameStructure,
    cp: &ControlPath,
    bbox: Option<&BoundingBox>,
    cfg: &IntegratorConfig,
) -> Result<PathOutcome> {
    cp.validate(None)?;
    let vel = |q: &[f64; 4], u: f64, v: f64| frame.velocity(q, u, v);
    let margin = bbox.map(|b| move |q: &[f64; 4]| b.margin(q, &[0, 1, 2, 3]));
    run_path(
        &vel,
        cp.start.to_array(),
        &cp.pieces,
        margin.as_ref().map(|m| m as &dyn Fn(&[f64; 4]) -> f64),
        &|q| Point::from_array(*q),
        cfg,
    )
}

/// The same path for the projected frame on `(x, y, w)`; points carry `z = 0`
/// and the box ignores `z`.
pub fn integrate_path_projected(
    frame: &MartinetFrame,
    cp: &ControlPath,
    bbox: Option<&BoundingBox>,
    cfg: &IntegratorConfig,
) -> Result<PathOutcome> {
    cp.validate(None)?;
    let vel = |q: &[f64; 3], u: f64, v: f64| frame.velocity(q, u, v);
    let margin = bbox.map(|b| move |q: &[f64; 3]| b.margin(&[q[0], q[1], 0.0, q[2]], &[0, 1, 3]));
    run_path(
        &vel,
        cp.start.drop_z(),
        &cp.pieces,
        margin.as_ref().map(|m| m as &dyn Fn(&[f64; 3]) -> f64),
        &|q| Point::new(q[0], q[1], 0.0, q[2]),
        cfg,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Unit-speed timelike pieces `(cosh χ, sinh χ)`.
    UniformHyperbolic,
    /// Three null/abnormal arcs in one of the six optimal patterns.
    BangBang,
    /// Each piece null, abnormal or unit-speed timelike with equal odds.
    Mixed,
}

fn default_chi_max() -> f64 {
    3.0
}

fn default_box() -> BoundingBox {
    BoundingBox::default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_paths: usize,
    pub pieces_per_path: usize,
    pub horizon: f64,
    pub strategy: Strategy,
    #[serde(default = "default_chi_max")]
    pub chi_max: f64,
    #[serde(rename = "box", default = "default_box")]
    pub bbox: BoundingBox,
    #[serde(default)]
    pub start: Point,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_paths: 1000,
            pieces_per_path: 4,
            horizon: 1.0,
            strategy: Strategy::UniformHyperbolic,
            chi_max: default_chi_max(),
            bbox: default_box(),
            start: Point::ORIGIN,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pieces_per_path == 0 {
            return Err(Error::InvalidInput("pieces_per_path must be positive".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidInput("horizon must be positive".into()));
        }
        if !(self.chi_max >= 0.0 && self.chi_max.is_finite()) {
            return Err(Error::InvalidInput("chi_max must be nonnegative".into()));
        }
        self.bbox.validate()
    }
}

const NULL_PLUS: (f64, f64) = (1.0, 1.0);
const NULL_MINUS: (f64, f64) = (1.0, -1.0);
const ABNORMAL: (f64, f64) = (1.0, 0.0);

/// The six three-arc patterns; the last two need a long middle arc.
pub const BANG_BANG_PATTERNS: [[(f64, f64); 3]; 6] = [
    [NULL_PLUS, ABNORMAL, NULL_PLUS],
    [NULL_PLUS, ABNORMAL, NULL_MINUS],
    [NULL_MINUS, ABNORMAL, NULL_MINUS],
    [NULL_MINUS, ABNORMAL, NULL_PLUS],
    [NULL_PLUS, NULL_MINUS, NULL_PLUS],
    [NULL_MINUS, NULL_PLUS, NULL_MINUS],
];

/// Uniform on `(0, 1]`.
fn unit_open(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.gen::<f64>()
}

fn hyperbolic(rng: &mut ChaCha8Rng, chi_max: f64) -> (f64, f64) {
    let chi = rng.gen_range(-1.0..=1.0) * chi_max;
    (chi.cosh(), chi.sinh())
}

/// The control path drawn for `index` under `(seed, sc)`.
pub fn draw_path(sc: &SamplerConfig, seed: u64, index: u64) -> ControlPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let slot = sc.horizon / sc.pieces_per_path as f64;
    let pieces = match sc.strategy {
        Strategy::UniformHyperbolic => (0..sc.pieces_per_path)
            .map(|_| {
                let (u, v) = hyperbolic(&mut rng, sc.chi_max);
                ControlPiece::new(slot * unit_open(&mut rng), u, v)
            })
            .collect(),
        Strategy::Mixed => (0..sc.pieces_per_path)
            .map(|_| {
                let (u, v) = match rng.gen_range(0..4) {
                    0 => NULL_PLUS,
                    1 => NULL_MINUS,
                    2 => ABNORMAL,
                    _ => hyperbolic(&mut rng, sc.chi_max),
                };
                ControlPiece::new(slot * unit_open(&mut rng), u, v)
            })
            .collect(),
        Strategy::BangBang => {
            let k = rng.gen_range(0..BANG_BANG_PATTERNS.len());
            let total = sc.horizon * unit_open(&mut rng);
            let mut d = [unit_open(&mut rng), unit_open(&mut rng), unit_open(&mut rng)];
            if k >= 4 && d[1] < d[0] + d[2] {
                d[1] = d[0] + d[2] + d[1];
            }
            let sum: f64 = d.iter().sum();
            BANG_BANG_PATTERNS[k]
                .iter()
                .zip(d)
                .map(|(&(u, v), di)| ControlPiece::new(total * di / sum, u, v))
                .collect()
        }
    };
    ControlPath::new(sc.start, pieces)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudEndpoint {
    pub path_id: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
    pub length: f64,
    pub truncated: bool,
}

impl CloudEndpoint {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y, self.z, self.w)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReachCloud {
    pub seed: u64,
    /// Sampler that produced the cloud; `None` for imported clouds.
    pub sampler: Option<SamplerConfig>,
    pub frame_id: String,
    /// Endpoints of the projected system (stored with `z = 0`).
    pub projected: bool,
    pub endpoints: Vec<CloudEndpoint>,
}

impl ReachCloud {
    /// CSV with columns `path_id,x,y,z,w,length,truncated`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.endpoints.is_empty() {
            w.write_record(["path_id", "x", "y", "z", "w", "length", "truncated"])?;
        }
        for e in &self.endpoints {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, seed: u64, frame_id: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let expected = ["path_id", "x", "y", "z", "w", "length", "truncated"];
        let headers = r.headers()?.clone();
        if headers.iter().ne(expected.iter().copied()) {
            return Err(Error::InvalidInput(format!(
                "cloud header {:?} does not match {expected:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let endpoints = r.deserialize().collect::<std::result::Result<Vec<CloudEndpoint>, _>>()?;
        Ok(Self {
            seed,
            sampler: None,
            frame_id: frame_id.to_string(),
            projected: false,
            endpoints,
        })
    }
}

pub fn frame_id(frame: &FrameStructure) -> String {
    match frame.provenance() {
        Provenance::Flat => "flat",
        Provenance::NormalForm { .. } => "normal_form",
        Provenance::Custom => "custom",
    }
    .to_string()
}

fn collect_cloud(
    sc: &SamplerConfig,
    seed: u64,
    frame_id: String,
    projected: bool,
    run: &(dyn Fn(&ControlPath) -> Result<PathOutcome> + Sync),
) -> Result<ReachCloud> {
    sc.validate()?;
    let endpoints = (0..sc.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let out = run(&draw_path(sc, seed, i))?;
            Ok(CloudEndpoint {
                path_id: i,
                x: out.end.x,
                y: out.end.y,
                z: out.end.z,
                w: out.end.w,
                length: out.length,
                truncated: out.truncated,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReachCloud {
        seed,
        sampler: Some(sc.clone()),
        frame_id,
        projected,
        endpoints,
    })
}

pub fn sample_reachable(
    frame: &FrameStructure,
    sc: &SamplerConfig,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<ReachCloud> {
    collect_cloud(sc, seed, frame_id(frame), false, &|cp| {
        integrate_path(frame, cp, Some(&sc.bbox), cfg)
    })
}

/// Cloud of the projected system driven by the same control draws.
pub fn sample_reachable_projected(
    frame: &MartinetFrame,
    sc: &SamplerConfig,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<ReachCloud> {
    collect_cloud(sc, seed, "martinet".into(), true, &|cp| {
        integrate_path_projected(frame, cp, Some(&sc.bbox), cfg)
    })
}

/// An endpoint outside the region union, with its failed predicates.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub path_id: u64,
    pub point: Point,
    pub failed: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InclusionOutcome {
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl InclusionOutcome {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn inclusion_check(cloud: &ReachCloud, regions: &RegionSet, slack: f64) -> Result<InclusionOutcome> {
    let per: Vec<Option<Violation>> = cloud
        .endpoints
        .par_iter()
        .map(|e| {
            let q = e.point();
            let failed = regions.violations(&q, slack)?;
            Ok((!failed.is_empty()).then(|| Violation {
                path_id: e.path_id,
                point: q,
                failed,
            }))
        })
        .collect::<Result<_>>()?;
    Ok(InclusionOutcome {
        checked: cloud.endpoints.len(),
        violations: per.into_iter().flatten().collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryProbe {
    pub count: usize,
    pub min_w: f64,
    /// `-(¼·x_max·δ² + ¼·δ³)`.
    pub bound: f64,
    pub ok: bool,
    pub worst: Option<Point>,
}

/// Lower bound on `w` over endpoints in the slab `|y| ≤ δ`, `0 ≤ x ≤ x_max`.
pub fn abnormal_boundary_probe(
    cloud: &ReachCloud,
    delta: f64,
    x_max: f64,
    slack: f64,
) -> Result<BoundaryProbe> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput("slab width must be positive".into()));
    }
    let bound = -(0.25 * x_max * delta * delta + 0.25 * delta.powi(3));
    let mut count = 0;
    let mut min_w = f64::INFINITY;
    let mut worst = None;
    for e in &cloud.endpoints {
        if e.y.abs() <= delta && e.x >= 0.0 && e.x <= x_max {
            count += 1;
            if e.w < min_w {
                min_w = e.w;
                worst = Some(e.point());
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptySlab);
    }
    Ok(BoundaryProbe {
        count,
        min_w,
        bound,
        ok: min_w >= bound - slack,
        worst,
    })
}

/// Barrier values along the two null rays from the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct NullRayAudit {
    /// Largest `|barrier|` among the barriers that vanish on each ray.
    pub worst: f64,
    pub location: Option<Point>,
    pub samples: usize,
}

/// Integrates `X ± Y` from the origin up to `t_max` and evaluates the
/// barriers whose zero sets contain each ray: `f̂₁, f̂₂, ĝ₁, ĝ₂` on both,
/// `ĝ₃` on `y = x` and `ĝ₄` on `y = -x`.
pub fn null_ray_audit(frame: &FrameStructure, t_max: f64, cfg: &IntegratorConfig) -> Result<NullRayAudit> {
    use ClosedForm::*;
    let rays = [(1.0, [F1, F2, G1, G2, G3]), (-1.0, [F1, F2, G1, G2, G4])];
    let mut audit = NullRayAudit {
        worst: 0.0,
        location: None,
        samples: 0,
    };
    for (v, barriers) in rays {
        let cp = ControlPath::new(Point::ORIGIN, vec![ControlPiece::new(t_max, 1.0, v)]);
        let out = integrate_path(frame, &cp, None, cfg)?;
        for s in &out.samples {
            audit.samples += 1;
            for b in barriers {
                let r = flat_barrier(b, &s.q).abs();
                if r > audit.worst || audit.location.is_none() {
                    audit.worst = audit.worst.max(r);
                    audit.location = Some(s.q);
                }
            }
        }
    }
    Ok(audit)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionOutcome {
    pub worst: f64,
    pub location: Option<u64>,
}

/// Compares `drop_z` of each 4-space endpoint with the matching endpoint of
/// the projected cloud.
pub fn projection_consistency(cloud4: &ReachCloud, cloud3: &ReachCloud) -> Result<ProjectionOutcome> {
    let same_sampler = match (&cloud4.sampler, &cloud3.sampler) {
        (Some(a), Some(b)) => a == b,
        _ => true,
    };
    if cloud4.seed != cloud3.seed || !same_sampler || cloud4.endpoints.len() != cloud3.endpoints.len() {
        return Err(Error::SeedMismatch);
    }
    let mut out = ProjectionOutcome {
        worst: 0.0,
        location: None,
    };
    for (a, b) in cloud4.endpoints.iter().zip(&cloud3.endpoints) {
        if a.path_id != b.path_id {
            return Err(Error::SeedMismatch);
        }
        let d = (a.x - b.x).abs().max((a.y - b.y).abs()).max((a.w - b.w).abs());
        if d > out.worst || out.location.is_none() {
            out.worst = out.worst.max(d);
            out.location = Some(a.path_id);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::flat_structure;

    #[test]
    fn straight_pieces() {
        let f = flat_structure();
        let cfg = IntegratorConfig::default();
        for (v, y) in [(0.0, 0.0), (1.0, 0.7), (-1.0, -0.7)] {
            let cp = ControlPath::new(Point::ORIGIN, vec![ControlPiece::new(0.7, 1.0, v)]);
            let out = integrate_path(&f, &cp, None, &cfg).unwrap();
            assert!(out.end.dist(&Point::new(0.7, y, 0.0, 0.0)) < 1e-13, "{:?}", out.end);
        }
    }

    #[test]
    fn invalid_controls_rejected() {
        let f = flat_structure();
        let cfg = IntegratorConfig::default();
        for piece in [ControlPiece::new(1.0, 0.5, 1.0), ControlPiece::new(0.0, 1.0, 0.0), ControlPiece::new(1.0, -1.0, 0.0)] {
            let cp = ControlPath::new(Point::ORIGIN, vec![piece]);
            assert!(matches!(integrate_path(&f, &cp, None, &cfg), Err(Error::InvalidControl(_))));
        }
    }

    #[test]
    fn truncation_keeps_exit_point() {
        let f = flat_structure();
        let cp = ControlPath::new(Point::ORIGIN, vec![ControlPiece::new(3.0, 1.0, 0.0)]);
        let out = integrate_path(&f, &cp, Some(&BoundingBox::default()), &IntegratorConfig::default())
            .unwrap();
        assert!(out.truncated);
        assert!((out.end.x - 1.2).abs() < 1e-10);
        assert!((out.length - 1.2).abs() < 1e-10);
    }

    #[test]
    fn draws_are_reproducible_and_valid() {
        for strategy in [Strategy::UniformHyperbolic, Strategy::BangBang, Strategy::Mixed] {
            let sc = SamplerConfig { strategy, ..SamplerConfig::default() };
            for i in 0..50 {
                let a = draw_path(&sc, 7, i);
                assert_eq!(a, draw_path(&sc, 7, i));
                a.validate(Some(sc.horizon)).unwrap();
                if strategy == Strategy::BangBang {
                    let k = BANG_BANG_PATTERNS
                        .iter()
                        .position(|p| p.iter().zip(&a.pieces).all(|(c, q)| *c == (q.u, q.v)))
                        .unwrap();
                    if k >= 4 {
                        let d: Vec<f64> = a.pieces.iter().map(|p| p.duration).collect();
                        assert!(d[1] >= d[0] + d[2] - 1e-15);
                    }
                }
            }
        }
        let sc = SamplerConfig::default();
        assert_ne!(draw_path(&sc, 7, 0), draw_path(&sc, 7, 1));
        assert_ne!(draw_path(&sc, 7, 0), draw_path(&sc, 8, 0));
    }

    #[test]
    fn empty_cloud() {
        let sc = SamplerConfig { n_paths: 0, ..SamplerConfig::default() };
        let c = sample_reachable(&flat_structure(), &sc, 1, &IntegratorConfig::default()).unwrap();
        assert!(c.endpoints.is_empty());
        assert!(matches!(abnormal_boundary_probe(&c, 0.05, 1.0, 0.0), Err(Error::EmptySlab)));
    }
}
