use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use elab_core::barriers::{
    boundary_defect, box_grid, characteristic_solve, characteristic_trace, flat_barrier,
    gradient_region_audit, pde_residual_symbolic, CauchyProblem,
    ClosedForm, RegionSet, ScalarField, DEFAULT_HORIZON,
};
use elab_core::frames::{
    growth_vector_with, hamiltonian_type_probe, horizontal_gradient_polys, martinet_projection, Provenance, VectorField,
    DEFAULT_RANK_TOL,
};
use elab_core::hamiltonian::{
    abnormal_trajectory, arc_pairing_defect, hamiltonian, hamiltonian_flow, lift_residual,
    radial_bound_check, Covector, PhasePoint,
};
use elab_core::reachability::{
    abnormal_boundary_probe, frame_id, inclusion_check, integrate_path, null_ray_audit,
    projection_consistency, sample_reachable, sample_reachable_projected, ControlPath,
    ControlPiece, ReachCloud,
};
use elab_core::report::{Check, Status, VerificationReport};
use elab_core::{Error, FrameStructure, Point, Poly4};

use crate::config::RunConfig;
use crate::CliError;

const EXACT: f64 = 0.0;
const LIFT_TOL: f64 = 1e-9;
const FLOW_TOL: f64 = 1e-8;
const RADIAL_TOL: f64 = 1e-6;
const RADIAL_EQ_TOL: f64 = 1e-8;
const PROBE_TOL: f64 = 1e-10;
const F_ZERO: f64 = 1e-12;
const RANDOM_CURVES: usize = 100;

fn fmt_point(q: &Point) -> String {
    format!("({:.6}, {:.6}, {:.6}, {:.6})", q.x, q.y, q.z, q.w)
}

fn field_gap(a: &VectorField, b: &VectorField) -> f64 {
    a.sub(b).components.iter().map(Poly4::max_abs_coef).fold(0.0, f64::max)
}

fn box_axes(cfg: &RunConfig, counts: [usize; 4]) -> Vec<Point> {
    box_grid(cfg.sampler.bbox.lo, cfg.sampler.bbox.hi, counts)
}

fn growth_check(frame: &FrameStructure, grid: &[Point]) -> Check {
    let tower = frame.brackets();
    let mut bad = 0usize;
    let mut first = None;
    for q in grid {
        let ok = matches!(growth_vector_with(frame, &tower, q, DEFAULT_RANK_TOL), Ok([2, 3, 4]));
        if !ok {
            bad += 1;
            first.get_or_insert(*q);
        }
    }
    let status = if bad == 0 { Status::Pass } else { Status::Fail };
    let mut c = Check::new("growth_vector", "Engel growth vector (2,3,4)", status)
        .with_residual(bad as f64)
        .with_detail(format!("{bad} of {} grid points off (2,3,4)", grid.len()));
    if let Some(q) = first {
        let found = growth_vector_with(frame, &tower, &q, DEFAULT_RANK_TOL)
            .map(|g| format!("{g:?}"))
            .unwrap_or_else(|e| e.to_string());
        c = c.with_location(format!("{} growth {found}", fmt_point(&q)));
    }
    c
}

fn type_probe_check(frame: &FrameStructure, cfg: &RunConfig) -> Result<Check, CliError> {
    let anchor = "Hamiltonian-type decomposition along the abnormal ray";
    let ray = abnormal_trajectory(frame, &Point::ORIGIN, 1.0, 20, &cfg.integrator)?;
    let (mut min_f, mut max_f) = (f64::INFINITY, 0.0f64);
    let mut worst_residual = 0.0f64;
    let mut undecomposable = None;
    for (_, q) in &ray {
        match hamiltonian_type_probe(frame.x(), frame.y(), q, PROBE_TOL) {
            Ok(r) => {
                min_f = min_f.min(r.f.abs());
                max_f = max_f.max(r.f.abs());
                worst_residual = worst_residual.max(r.residual);
                if !r.decomposable {
                    undecomposable.get_or_insert(*q);
                }
            }
            Err(e @ Error::BasisFailure { .. }) => {
                return Ok(Check::new("hamiltonian_type_probe", anchor, Status::Fail)
                    .with_location(fmt_point(q))
                    .with_detail(e.to_string()));
            }
            Err(e) => return Err(e.into()),
        }
    }
    let c = Check::new("hamiltonian_type_probe", anchor, Status::Pass).with_residual(worst_residual);
    Ok(if let Some(q) = undecomposable {
        Check { status: Status::Warn, ..c }
            .with_location(fmt_point(&q))
            .with_detail("[V,[V,W]] is not in the span of V, W, [V,W]")
    } else if max_f <= F_ZERO {
        c.with_detail(format!("f vanishes along the abnormal ray (max |f| = {max_f:e})"))
    } else {
        Check { status: Status::Warn, ..c }.with_detail(format!(
            "not of Hamiltonian type, f min |coef| = {min_f:.6} (max {max_f:.6})"
        ))
    })
}

pub fn check_structure(cfg: &RunConfig) -> Result<VerificationReport, CliError> {
    let mut report = VerificationReport::new(cfg.hash());
    let anchor = "normal-form vanishing constraints";
    let frame = match cfg.frame.build() {
        Ok(f) => f,
        Err(e @ Error::ConstraintViolation { .. }) => {
            report.push(Check::new("frame_constraints", anchor, Status::Fail).with_detail(e.to_string()));
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    };
    let constraint = match frame.provenance() {
        Provenance::Custom => Check::new("frame_constraints", anchor, Status::Warn)
            .with_detail("custom frame: no normal-form constraints to check"),
        _ => Check::new("frame_constraints", anchor, Status::Pass),
    };
    report.push(constraint);
    let g = cfg.grid;
    report.push(growth_check(&frame, &box_axes(cfg, [g, g, g, g])));
    report.push(type_probe_check(&frame, cfg)?);
    Ok(report)
}

fn bracket_checks(frame: &FrameStructure) -> Vec<Check> {
    let t = frame.brackets();
    let c = |v: f64| Poly4::constant(v);
    let z = Poly4::zero;
    let expected = [
        ("bracket_xy", &t.xy, VectorField::new([z(), z(), c(-1.0), Poly4::monomial(-1.5, [0, 1, 0, 0])])),
        ("bracket_x_xy", &t.x_xy, VectorField::zero()),
        ("bracket_y_xy", &t.y_xy, VectorField::new([z(), z(), z(), c(-1.5)])),
    ];
    expected
        .into_iter()
        .map(|(name, got, want)| Check::residual(name, "flat bracket identities", field_gap(got, &want), EXACT))
        .collect()
}

fn random_point(rng: &mut ChaCha8Rng, lo: [f64; 4], hi: [f64; 4]) -> Point {
    Point::from_array(std::array::from_fn(|k| rng.gen_range(lo[k]..hi[k])))
}

fn flow_checks(frame: &FrameStructure, cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Check>, CliError> {
    let lambda = Covector::new(-1.0, 0.0, 0.0, 0.0);
    let (mut lift, mut energy) = (0.0f64, 0.0f64);
    for _ in 0..RANDOM_CURVES {
        let q0 = Point::new(0.0, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let curve: Vec<(f64, PhasePoint)> = abnormal_trajectory(frame, &q0, 1.0, 50, &cfg.integrator)?
            .into_iter()
            .map(|(t, q)| (t, PhasePoint::new(q, lambda)))
            .collect();
        lift = lift.max(lift_residual(frame, &curve)?.total());
        for (_, pp) in &curve {
            energy = energy.max((hamiltonian(frame, pp) + 0.5).abs());
        }
    }
    let (mut drift, mut pairing) = (0.0f64, 0.0f64);
    for _ in 0..RANDOM_CURVES {
        let q = random_point(rng, [-1.0; 4], [1.0; 4]);
        let p = random_point(rng, [-1.0; 4], [1.0; 4]).to_array();
        let arc = hamiltonian_flow(frame, &PhasePoint::new(q, Covector::from_array(p)), 1.0, &cfg.integrator)?;
        drift = drift.max(arc.max_energy_drift(frame));
        pairing = pairing.max(arc_pairing_defect(frame, &arc));
    }
    Ok(vec![
        Check::residual("abnormal_lift", "constant-momentum lift of the abnormal curves", lift, LIFT_TOL),
        Check::residual("abnormal_lift_energy", "Hamiltonian equals -1/2 on the abnormal lift", energy, F_ZERO),
        Check::residual("energy_drift", "energy conservation along geodesics", drift, FLOW_TOL),
        Check::residual("pairing_identity", "g(velocity, v) = <momentum, v> along geodesics", pairing, FLOW_TOL),
    ])
}

fn barrier_checks(frame: &FrameStructure, cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();
    let g = cfg.grid;
    let grid = box_grid([-1.0; 4], [1.0; 4], [g, g, 1, g]);
    for c in ClosedForm::ALL {
        let name = c.name();
        let generator = c.problem().spec().generator();
        let pde = pde_residual_symbolic(frame, generator, &c.poly()).max_abs_coef();
        out.push(Check::residual(format!("pde_residual_{name}"), "closed form solves its transport equation", pde, EXACT));
        let bd = boundary_defect(c).max_abs_coef();
        out.push(Check::residual(format!("boundary_{name}"), "closed form meets its initial datum", bd, EXACT));
        let (u, v) = horizontal_gradient_polys(frame, &c.poly());
        let (eu, ev) = c.expected_gradient();
        let gap = (&u - &eu).max_abs_coef().max((&v - &ev).max_abs_coef());
        out.push(Check::residual(format!("gradient_{name}"), "horizontal gradient identity", gap, EXACT));
        let audit = gradient_region_audit(frame, &ScalarField::ClosedForm(c), &grid, &|q: &Point| c.gradient_region(q), 0.0)?;
        let status = if audit.violations == 0 { Status::Pass } else { Status::Fail };
        let mut check = Check::new(format!("causal_region_{name}"), "gradient is null future directed on its region", status)
            .with_residual(audit.worst_residual)
            .with_detail(format!("{} grid points in region, {} violations", audit.checked, audit.violations));
        if let Some(q) = audit.first_violation {
            check = check.with_location(fmt_point(&q));
        }
        out.push(check);
    }
    Ok(out)
}

fn oracle_checks(frame: &FrameStructure, cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();
    for p in CauchyProblem::ALL {
        let mut worst = 0.0f64;
        let mut at = None;
        for _ in 0..cfg.oracle_points {
            let q = random_point(rng, cfg.cauchy_box.lo, cfg.cauchy_box.hi);
            let err = (characteristic_solve(frame, p.spec(), &q, &cfg.integrator)? - flat_barrier(p.closed_form(), &q)).abs();
            if err > worst || at.is_none() {
                worst = worst.max(err);
                at = Some(q);
            }
        }
        let mut c = Check::residual(format!("characteristic_oracle_{p}"), "characteristic solution matches the closed form", worst, cfg.oracle_tol)
            .with_detail(format!("{} random points", cfg.oracle_points));
        if let Some(q) = at {
            c = c.with_location(fmt_point(&q));
        }
        out.push(c);
    }
    Ok(out)
}

fn radial_checks(frame: &FrameStructure, cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Check>, CliError> {
    let mut gap = f64::NEG_INFINITY;
    for _ in 0..RANDOM_CURVES {
        let s0 = rng.gen_range(0.2..0.8);
        let phi: f64 = rng.gen_range(-2.0..2.0);
        let q0 = Point::new(s0 * phi.cosh(), s0 * phi.sinh(), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let pieces = (0..4)
            .map(|_| {
                let chi: f64 = rng.gen_range(-3.0..3.0);
                ControlPiece::new(rng.gen_range(0.01..0.25), chi.cosh(), chi.sinh())
            })
            .collect();
        let out = integrate_path(frame, &ControlPath::new(q0, pieces), None, &cfg.integrator)?;
        let b = radial_bound_check(frame, &out.samples, RADIAL_TOL)?;
        gap = gap.max(b.length - b.delta_r1);
    }
    let mut eq = 0.0f64;
    for _ in 0..RANDOM_CURVES {
        let phi: f64 = rng.gen_range(-2.0..2.0);
        let s0 = rng.gen_range(0.1..1.0);
        let q0 = Point::new(s0 * phi.cosh(), s0 * phi.sinh(), 0.0, 0.0);
        let cp = ControlPath::new(q0, vec![ControlPiece::new(rng.gen_range(0.1..1.0), phi.cosh(), phi.sinh())]);
        let out = integrate_path(frame, &cp, None, &cfg.integrator)?;
        let b = radial_bound_check(frame, &out.samples, RADIAL_TOL)?;
        eq = eq.max((b.length - b.delta_r1).abs());
    }
    Ok(vec![
        Check::residual("radial_bound", "length bounded by the growth of R1 in S1+", gap.max(0.0), RADIAL_TOL),
        Check::residual("radial_equality", "radial geodesics attain the R1 bound", eq, RADIAL_EQ_TOL),
    ])
}

fn null_ray_check(frame: &FrameStructure, cfg: &RunConfig) -> Result<Check, CliError> {
    let audit = null_ray_audit(frame, 1.0, &cfg.integrator)?;
    let mut c = Check::residual("null_rays", "null rays lie in the zero sets of the barriers", audit.worst, FLOW_TOL)
        .with_detail(format!("{} ray samples", audit.samples));
    if let Some(q) = audit.location {
        c = c.with_location(fmt_point(&q));
    }
    Ok(c)
}

pub fn verify_flat(cfg: &RunConfig) -> Result<VerificationReport, CliError> {
    let frame = cfg.frame.build()?;
    if !frame.is_flat() {
        return Err(CliError::Config("verify-flat needs frame.kind = \"flat\"".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = VerificationReport::new(cfg.hash());
    report.extend(bracket_checks(&frame));
    let g = cfg.grid;
    report.push(growth_check(&frame, &box_axes(cfg, [g, g, g, g])));
    report.extend(flow_checks(&frame, cfg, &mut rng)?);
    report.extend(barrier_checks(&frame, cfg)?);
    report.extend(oracle_checks(&frame, cfg, &mut rng)?);
    report.extend(radial_checks(&frame, cfg, &mut rng)?);
    report.push(null_ray_check(&frame, cfg)?);
    Ok(report)
}

fn region_set(frame: &FrameStructure, cfg: &RunConfig) -> Result<RegionSet, CliError> {
    let name = cfg
        .regions
        .clone()
        .unwrap_or_else(|| if frame.is_flat() { "flat_union".into() } else { "weak_general".into() });
    Ok(match name.to_ascii_lowercase().as_str() {
        "flat_union" => RegionSet::FlatUnion,
        "weak_general" => RegionSet::weak_general(frame, cfg.integrator),
        _ => RegionSet::Cell(name.parse()?),
    })
}

pub struct SampleRun {
    pub report: VerificationReport,
    pub cloud: ReachCloud,
}

pub fn sample(cfg: &RunConfig, in_cloud: Option<&Path>) -> Result<SampleRun, CliError> {
    let frame = cfg.frame.build()?;
    let cloud = match in_cloud {
        Some(path) => {
            let file = File::open(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
            ReachCloud::read_csv(file, cfg.seed, &frame_id(&frame))?
        }
        None => sample_reachable(&frame, &cfg.sampler, cfg.seed, &cfg.integrator)?,
    };
    let mut report = VerificationReport::new(cfg.hash());

    let regions = region_set(&frame, cfg)?;
    let inc = inclusion_check(&cloud, &regions, cfg.slack)?;
    let status = if inc.passed() { Status::Pass } else { Status::Fail };
    let mut c = Check::new("inclusion", format!("reachable endpoints lie in {}", regions.name()), status)
        .with_residual(inc.violations.len() as f64)
        .with_detail(format!("{} endpoints, {} violations", inc.checked, inc.violations.len()));
    if let Some(v) = inc.violations.first() {
        c = c.with_location(format!("path {} at {}: {}", v.path_id, fmt_point(&v.point), v.failed.join("; ")));
    }
    report.push(c);

    if frame.is_flat() && cfg.sampler.start == Point::ORIGIN {
        let anchor = "no endpoint below the abnormal ray's slab bound";
        match abnormal_boundary_probe(&cloud, cfg.probe.delta, cfg.probe.x_max, cfg.slack) {
            Ok(p) => {
                let status = if p.ok { Status::Pass } else { Status::Fail };
                let mut c = Check::new("abnormal_boundary_probe", anchor, status)
                    .with_residual((p.bound - p.min_w).max(0.0))
                    .with_detail(format!("{} endpoints in slab, min w {:e}, bound {:e}", p.count, p.min_w, p.bound));
                if let Some(q) = p.worst {
                    c = c.with_location(fmt_point(&q));
                }
                report.push(c);
            }
            Err(Error::EmptySlab) => {
                report.push(Check::new("abnormal_boundary_probe", anchor, Status::Warn).with_detail("no endpoint in the slab"));
            }
            Err(e) => return Err(e.into()),
        }
        report.push(null_ray_check(&frame, cfg)?);
    }

    if in_cloud.is_none() {
        let anchor = "projected cloud matches the drop-z of the full cloud";
        match martinet_projection(&frame) {
            Ok(m) => {
                let c3 = sample_reachable_projected(&m, &cfg.sampler, cfg.seed, &cfg.integrator)?;
                let pc = projection_consistency(&cloud, &c3)?;
                let mut c = Check::residual("projection_consistency", anchor, pc.worst, cfg.oracle_tol);
                if let Some(id) = pc.location {
                    c = c.with_location(format!("path {id}"));
                }
                report.push(c);
            }
            Err(e @ Error::ZDependence { .. }) => {
                report.push(Check::new("projection_consistency", anchor, Status::Warn).with_detail(e.to_string()));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(SampleRun { report, cloud })
}

#[derive(Serialize)]
struct CauchyRow {
    x: f64,
    y: f64,
    z: f64,
    w: f64,
    value: Option<f64>,
    closed_form: Option<f64>,
    status: &'static str,
}

/// Solves one Cauchy problem on a grid; rows go to `out` as CSV.
pub fn solve_cauchy<W: Write>(
    cfg: &RunConfig,
    problem: CauchyProblem,
    n: usize,
    out: W,
) -> Result<VerificationReport, CliError> {
    let frame = cfg.frame.build()?;
    let grid = box_grid(cfg.cauchy_box.lo, cfg.cauchy_box.hi, [n; 4]);
    let mut w = csv::Writer::from_writer(out);
    let (mut solved, mut unsolved, mut worst) = (0usize, 0usize, 0.0f64);
    let mut at = None;
    for q in &grid {
        let flat = frame.is_flat().then(|| flat_barrier(problem.closed_form(), q));
        let (value, status) = match characteristic_trace(&frame, problem.spec(), q, &cfg.integrator, DEFAULT_HORIZON) {
            Ok(hit) => (Some(hit.value), "ok"),
            Err(Error::NoBoundaryHit { .. }) => (None, "no_boundary_hit"),
            Err(Error::NonDifferentiable(_)) => (None, "tangent"),
            Err(e) => return Err(e.into()),
        };
        match (value, flat) {
            (Some(v), Some(f)) => {
                solved += 1;
                if (v - f).abs() > worst || at.is_none() {
                    worst = worst.max((v - f).abs());
                    at = Some(*q);
                }
            }
            (Some(_), None) => solved += 1,
            (None, _) => unsolved += 1,
        }
        w.serialize(CauchyRow { x: q.x, y: q.y, z: q.z, w: q.w, value, closed_form: flat, status })
            .map_err(Error::from)?;
    }
    w.flush().map_err(|e| CliError::Io("output".into(), e))?;

    let mut report = VerificationReport::new(cfg.hash());
    let detail = format!("{solved} grid points solved, {unsolved} outside the solvable patch");
    let mut c = if frame.is_flat() {
        Check::residual(format!("cauchy_{problem}"), "characteristic solution matches the closed form", worst, cfg.oracle_tol)
    } else {
        Check::new(format!("cauchy_{problem}"), "characteristic solution on a grid", Status::Pass)
    };
    if unsolved > 0 && c.status == Status::Pass {
        c.status = Status::Warn;
    }
    c = c.with_detail(detail);
    if let Some(q) = at {
        c = c.with_location(fmt_point(&q));
    }
    report.push(c);
    Ok(report)
}
