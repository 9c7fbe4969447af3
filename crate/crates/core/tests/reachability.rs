use proptest::prelude::*;

use elab_core::barriers::{flat_barrier, ClosedForm, RegionSet};
use elab_core::frames::{flat_structure, martinet_projection, Point};
use elab_core::hamiltonian::sub_lorentzian_length;
use elab_core::ode::IntegratorConfig;
use elab_core::reachability::{
    abnormal_boundary_probe, draw_path, inclusion_check, integrate_path, null_ray_audit,
    projection_consistency, sample_reachable, sample_reachable_projected, BoundingBox,
    CloudEndpoint, ControlPath, ControlPiece, ReachCloud, SamplerConfig, Strategy,
    BANG_BANG_PATTERNS,
};
use elab_core::Error;

fn one_piece(t: f64, u: f64, v: f64) -> ControlPath {
    ControlPath::new(Point::ORIGIN, vec![ControlPiece::new(t, u, v)])
}

fn cloud_of(points: &[Point]) -> ReachCloud {
    ReachCloud {
        seed: 0,
        sampler: None,
        frame_id: "flat".into(),
        projected: false,
        endpoints: points
            .iter()
            .enumerate()
            .map(|(i, q)| CloudEndpoint {
                path_id: i as u64,
                x: q.x,
                y: q.y,
                z: q.z,
                w: q.w,
                length: 0.0,
                truncated: false,
            })
            .collect(),
    }
}

#[test]
fn integrate_examples() {
    let f = flat_structure();
    let cfg = IntegratorConfig::default();
    let t = 0.8;
    for (v, end) in [(0.0, Point::new(t, 0.0, 0.0, 0.0)), (1.0, Point::new(t, t, 0.0, 0.0)), (-1.0, Point::new(t, -t, 0.0, 0.0))] {
        let out = integrate_path(&f, &one_piece(t, 1.0, v), None, &cfg).unwrap();
        assert!(out.end.dist(&end) < 1e-13, "{v}: {}", out.end);
        assert!(!out.truncated);
    }
}

#[test]
fn integrate_truncates_at_box() {
    let f = flat_structure();
    let cfg = IntegratorConfig::default();
    let out = integrate_path(&f, &one_piece(3.0, 1.0, 0.0), Some(&BoundingBox::default()), &cfg).unwrap();
    assert!(out.truncated);
    assert!((out.end.x - 1.2).abs() < 1e-10);
    assert!((out.length - 1.2).abs() < 1e-10);
}

#[test]
fn invalid_controls_rejected() {
    let f = flat_structure();
    let cfg = IntegratorConfig::default();
    for (d, u, v) in [(0.5, 1.0, 2.0), (0.5, -1.0, 0.0), (0.0, 1.0, 0.0), (0.5, 0.0, 0.0)] {
        let r = integrate_path(&f, &one_piece(d, u, v), None, &cfg);
        assert!(matches!(r, Err(Error::InvalidControl(_))), "({d}, {u}, {v})");
    }
}

#[test]
fn sample_examples() {
    let f = flat_structure();
    let cfg = IntegratorConfig::default();
    let sc = SamplerConfig { n_paths: 0, ..SamplerConfig::default() };
    assert!(sample_reachable(&f, &sc, 1, &cfg).unwrap().endpoints.is_empty());

    let sc = SamplerConfig { n_paths: 300, strategy: Strategy::BangBang, ..SamplerConfig::default() };
    for i in 0..sc.n_paths as u64 {
        let cp = draw_path(&sc, 9, i);
        assert_eq!(cp.pieces.len(), 3);
        assert!(cp.duration() <= sc.horizon * (1.0 + 1e-12));
        let pattern: Vec<(f64, f64)> = cp.pieces.iter().map(|p| (p.u, p.v)).collect();
        let k = BANG_BANG_PATTERNS.iter().position(|p| p.as_slice() == pattern).unwrap();
        if k >= 4 {
            let d = &cp.pieces;
            assert!(d[1].duration >= d[0].duration + d[2].duration);
        }
    }

    // (X+Y) X (X+Y) with durations (a, b, c), integrated piecewise by hand
    let (a, b, c) = (0.2, 0.3, 0.1);
    let cp = ControlPath::new(
        Point::ORIGIN,
        vec![ControlPiece::new(a, 1.0, 1.0), ControlPiece::new(b, 1.0, 0.0), ControlPiece::new(c, 1.0, 1.0)],
    );
    let out = integrate_path(&f, &cp, None, &cfg).unwrap();
    // after X+Y: (a, a, 0, 0); after X: (a+b, a, ab/2, a²b/2)
    let (x1, y1, z1, w1) = (a + b, a, 0.5 * a * b, 0.5 * a * a * b);
    // along X+Y: z' = (y - x)/2, w' = y(y - x)/2 with y - x constant
    let gap = y1 - x1;
    let end = Point::new(x1 + c, y1 + c, z1 + 0.5 * gap * c, w1 + 0.5 * gap * (y1 * c + 0.5 * c * c));
    assert!(out.end.dist(&end) < 1e-13, "{} vs {end}", out.end);

    let sc = SamplerConfig { n_paths: 50, strategy: Strategy::Mixed, ..SamplerConfig::default() };
    for i in 0..50 {
        let cp = draw_path(&sc, 4, i);
        if cp.pieces.iter().all(|p| (p.u, p.v) == (1.0, 0.0)) {
            let out = integrate_path(&f, &cp, None, &cfg).unwrap();
            assert_eq!((out.end.y, out.end.z, out.end.w), (0.0, 0.0, 0.0));
        }
    }
}

#[test]
fn determinism_and_csv_round_trip() {
    let f = flat_structure();
    let cfg = IntegratorConfig::default();
    let sc = SamplerConfig { n_paths: 200, strategy: Strategy::Mixed, ..SamplerConfig::default() };
    let a = sample_reachable(&f, &sc, 77, &cfg).unwrap();
    let b = sample_reachable(&f, &sc, 77, &cfg).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.endpoints, sample_reachable(&f, &sc, 78, &cfg).unwrap().endpoints);

    let mut buf = Vec::new();
    a.write_csv(&mut buf).unwrap();
    let back = ReachCloud::read_csv(buf.as_slice(), 77, "flat").unwrap();
    assert_eq!(back.endpoints, a.endpoints);
    assert!(ReachCloud::read_csv("a,b\n1,2\n".as_bytes(), 0, "flat").is_err());
}

#[test]
fn unit_speed_lengths() {
    let f = flat_structure();
    let cfg = IntegratorConfig::default();
    let sc = SamplerConfig { n_paths: 200, ..SamplerConfig::default() };
    for i in 0..200 {
        let cp = draw_path(&sc, 5, i);
        let out = integrate_path(&f, &cp, None, &cfg).unwrap();
        assert!((out.length - cp.duration()).abs() < 1e-12);
        let pieces = cp.pieces.clone();
        let controls = move |t: f64| {
            let mut acc = 0.0;
            for p in &pieces {
                acc += p.duration;
                if t <= acc {
                    return (p.u, p.v);
                }
            }
            let p = pieces.last().unwrap();
            (p.u, p.v)
        };
        let l = sub_lorentzian_length(&controls, 0.0, cp.duration(), 1e-9).unwrap();
        assert!(l <= cp.duration() + 1e-6);
    }
}

#[test]
fn inclusion_examples() {
    let ok = [Point::ORIGIN, Point::new(0.4, 0.4, 0.0, 0.0), Point::new(0.5, 0.0, 0.0, 0.0)];
    let out = inclusion_check(&cloud_of(&ok), &RegionSet::FlatUnion, 1e-7).unwrap();
    assert!(out.passed() && out.checked == 3);
    let mut bad = ok.to_vec();
    bad.push(Point::new(1.0, 0.0, 0.0, -0.1));
    let out = inclusion_check(&cloud_of(&bad), &RegionSet::FlatUnion, 1e-7).unwrap();
    assert_eq!(out.violations.len(), 1);
    assert_eq!(out.violations[0].path_id, 3);
    assert_eq!(out.violations[0].failed.len(), 8);
}

#[test]
fn probe_examples() {
    let f = flat_structure();
    let cfg = IntegratorConfig::default();
    let sc = SamplerConfig { n_paths: 5000, strategy: Strategy::Mixed, ..SamplerConfig::default() };
    let mut cloud = sample_reachable(&f, &sc, 3, &cfg).unwrap();
    let p = abnormal_boundary_probe(&cloud, 0.05, 1.0, 1e-7).unwrap();
    assert!(p.ok && p.count > 0);
    assert!((p.bound + 6.25e-4 + 3.125e-5).abs() < 1e-15);
    let wide = abnormal_boundary_probe(&cloud, 2.0, 1.0, 1e-7).unwrap();
    assert!(wide.ok && wide.count >= p.count && wide.bound < p.bound);

    cloud.endpoints.push(CloudEndpoint { path_id: 9999, x: 0.5, y: 0.0, z: 0.0, w: -0.01, length: 0.0, truncated: false });
    let p = abnormal_boundary_probe(&cloud, 0.05, 1.0, 1e-7).unwrap();
    assert!(!p.ok);
    assert_eq!(p.worst, Some(Point::new(0.5, 0.0, 0.0, -0.01)));

    let far = cloud_of(&[Point::new(0.5, 0.9, 0.0, 0.0)]);
    assert!(matches!(abnormal_boundary_probe(&far, 0.05, 1.0, 1e-7), Err(Error::EmptySlab)));
}

#[test]
fn null_ray_examples() {
    let f = flat_structure();
    let audit = null_ray_audit(&f, 1.0, &IntegratorConfig::default()).unwrap();
    assert!(audit.worst < 1e-14 && audit.samples > 0);
    let t = 0.6;
    for (ray, barriers) in [
        (Point::new(t, t, 0.0, 0.0), [ClosedForm::F1, ClosedForm::G1]),
        (Point::new(t, -t, 0.0, 0.0), [ClosedForm::F1, ClosedForm::G2]),
    ] {
        for b in barriers {
            assert!(flat_barrier(b, &ray).abs() < 1e-15);
        }
    }
    let eps = 0.01;
    let off = flat_barrier(ClosedForm::F1, &Point::new(t, t + eps, 0.0, 0.0));
    assert!((off - 0.25 * (2.0 * t * eps + eps * eps)).abs() < 1e-15);
}

#[test]
fn projection_examples() {
    let f = flat_structure();
    let m = martinet_projection(&f).unwrap();
    let cfg = IntegratorConfig::default();
    let sc = SamplerConfig { n_paths: 300, strategy: Strategy::Mixed, ..SamplerConfig::default() };
    let c4 = sample_reachable(&f, &sc, 11, &cfg).unwrap();
    let c3 = sample_reachable_projected(&m, &sc, 11, &cfg).unwrap();
    assert!(c3.projected && c3.endpoints.iter().all(|e| e.z == 0.0));
    assert!(projection_consistency(&c4, &c3).unwrap().worst <= 1e-8);
    let other = sample_reachable_projected(&m, &sc, 12, &cfg).unwrap();
    assert!(matches!(projection_consistency(&c4, &other), Err(Error::SeedMismatch)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn f1_nonincreasing_inside_light_cone(seed in any::<u64>(), index in 0u64..1000) {
        let f = flat_structure();
        let sc = SamplerConfig { strategy: Strategy::Mixed, ..SamplerConfig::default() };
        let mut cp = draw_path(&sc, seed, index);
        cp.start = Point::new(0.3, 0.05, -0.1, 0.2);
        let out = integrate_path(&f, &cp, None, &IntegratorConfig::default()).unwrap();
        for w in out.samples.windows(2) {
            let inside = |q: &Point| q.y.abs() < q.x;
            if inside(&w[0].q) && inside(&w[1].q) {
                let a = flat_barrier(ClosedForm::F1, &w[0].q);
                let b = flat_barrier(ClosedForm::F1, &w[1].q);
                prop_assert!(b <= a + 1e-8, "{} -> {}", a, b);
            }
        }
    }
}
