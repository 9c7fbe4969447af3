use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use elab_core::frames::{flat_structure, normal_form_structure, FrameStructure, Point};
use elab_core::hamiltonian::{
    abnormal_trajectory, arc_pairing_defect, exp_map, hamilton_rhs, hamiltonian, hamiltonian_flow,
    lift_residual, pairings, radial_bound_check, sub_lorentzian_length, ControlledSample,
    Covector, PhasePoint,
};
use elab_core::ode::IntegratorConfig;
use elab_core::{Error, Poly4};

fn nf() -> FrameStructure {
    normal_form_structure(
        Poly4::monomial(0.05, [1, 0, 0, 0]),
        Poly4::monomial(0.05, [0, 1, 1, 0]),
        Poly4::monomial(0.05, [1, 0, 0, 0]),
    )
    .unwrap()
}

fn radial(phi: f64) -> Covector {
    Covector::new(-phi.cosh(), phi.sinh(), 0.0, 0.0)
}

#[test]
fn hamiltonian_examples() {
    let f = flat_structure();
    let pp = PhasePoint::new(Point::ORIGIN, Covector::new(-1.0, 0.0, 0.0, 0.0));
    assert_eq!(hamiltonian(&f, &pp), -0.5);
    let pp = PhasePoint::new(Point::ORIGIN, Covector::new(0.0, 0.0, 1.0, 0.0));
    assert_eq!(hamiltonian(&f, &pp), 0.0);
    let pp = PhasePoint::new(Point::new(0.0, 0.0, 0.4, -0.3), radial(1.3));
    assert_abs_diff_eq!(hamiltonian(&f, &pp), -0.5, epsilon = 1e-14);
}

#[test]
fn flow_examples() {
    let f = flat_structure();
    let cfg = IntegratorConfig::default();
    let pp0 = PhasePoint::new(Point::ORIGIN, Covector::new(-1.0, 0.0, 0.0, 0.0));
    let end = *hamiltonian_flow(&f, &pp0, 1.0, &cfg).unwrap().end();
    assert!(end.q.dist(&Point::new(1.0, 0.0, 0.0, 0.0)) < 1e-12);
    assert_eq!(end.p, pp0.p);

    let (phi, s) = (0.6f64, 0.8);
    let pp0 = PhasePoint::new(Point::new(0.0, 0.0, 0.2, 0.1), radial(phi));
    let end = *hamiltonian_flow(&f, &pp0, s, &cfg).unwrap().end();
    assert!(end.q.dist(&Point::new(s * phi.cosh(), s * phi.sinh(), 0.2, 0.1)) < 1e-12);

    let arc = hamiltonian_flow(&f, &pp0, 0.0, &cfg).unwrap();
    assert_eq!(arc.samples.len(), 1);
    assert_eq!(*arc.end(), pp0);
}

#[test]
fn exp_examples() {
    let f = flat_structure();
    let cfg = IntegratorConfig::default();
    let q = exp_map(&f, &Point::ORIGIN, &Covector::new(-0.7, 0.0, 0.0, 0.0), &cfg).unwrap();
    assert!(q.dist(&Point::new(0.7, 0.0, 0.0, 0.0)) < 1e-12);
    let (phi, s) = (-0.4f64, 0.5);
    let q0 = Point::new(0.0, 0.0, -0.3, 0.6);
    let q = exp_map(&f, &q0, &radial(phi).scale(s), &cfg).unwrap();
    assert!(q.dist(&Point::new(s * phi.cosh(), s * phi.sinh(), -0.3, 0.6)) < 1e-12);
    let q1 = Point::new(0.2, 0.1, 0.0, 0.3);
    assert_eq!(exp_map(&f, &q1, &Covector::new(0.0, 0.0, 0.0, 0.0), &cfg).unwrap(), q1);
}

#[test]
fn abnormal_examples() {
    let f = flat_structure();
    let cfg = IntegratorConfig::default();
    let y0 = 0.4;
    for (t, q) in abnormal_trajectory(&f, &Point::new(0.0, y0, 0.0, 0.0), 1.0, 8, &cfg).unwrap() {
        assert_eq!(q, Point::new(t, y0, 0.5 * y0 * t, 0.5 * y0 * y0 * t));
    }
    for (t, q) in abnormal_trajectory(&f, &Point::ORIGIN, 1.0, 4, &cfg).unwrap() {
        assert_eq!(q, Point::new(t, 0.0, 0.0, 0.0));
    }
    let g = nf();
    for (_, q) in abnormal_trajectory(&g, &Point::new(0.1, 0.0, 0.3, -0.2), 1.0, 10, &cfg).unwrap() {
        assert!(q.y.abs() <= 1e-9);
    }
}

fn abnormal_lift(p: Covector) -> Vec<(f64, PhasePoint)> {
    let (x0, y0, z0, w0) = (0.0, 0.3, -0.1, 0.2);
    (0..=50)
        .map(|k| {
            let t = k as f64 / 50.0;
            let q = Point::new(x0 + t, y0, z0 + 0.5 * y0 * t, w0 + 0.5 * y0 * y0 * t);
            (t, PhasePoint::new(q, p))
        })
        .collect()
}

#[test]
fn lift_residual_examples() {
    let f = flat_structure();
    let d = lift_residual(&f, &abnormal_lift(Covector::new(-1.0, 0.0, 0.0, 0.0))).unwrap();
    assert!(d.total() <= 1e-9, "{d:?}");
    let d = lift_residual(&f, &abnormal_lift(Covector::new(-1.0, 0.1, 0.0, 0.0))).unwrap();
    assert!(d.total() > 0.05, "{d:?}");
    let still: Vec<_> = (0..3)
        .map(|k| (k as f64, PhasePoint::new(Point::ORIGIN, Covector::new(0.0, 0.0, 0.0, 0.0))))
        .collect();
    let d = lift_residual(&f, &still).unwrap();
    assert!(d.zero_section && d.pairing.is_infinite());
    assert!(lift_residual(&f, &still[..1]).is_err());
}

#[test]
fn integrated_geodesic_is_its_own_lift() {
    let f = nf();
    let cfg = IntegratorConfig::with_tolerance(1e-12);
    let pp0 = PhasePoint::new(Point::new(0.1, 0.2, 0.0, -0.1), Covector::new(-1.0, 0.3, 0.2, -0.1));
    let arc = hamiltonian_flow(&f, &pp0, 1.0, &cfg).unwrap();
    // resample densely so the finite differences resolve the curve
    let dense: Vec<(f64, PhasePoint)> = (0..=200)
        .map(|k| {
            let t = k as f64 / 200.0;
            let end = hamiltonian_flow(&f, &pp0, t, &cfg).unwrap();
            (t, *end.end())
        })
        .collect();
    let d = lift_residual(&f, &dense).unwrap();
    assert!(d.hamilton < 1e-3 && d.pairing < 1e-3, "{d:?}");
    assert!(arc_pairing_defect(&f, &arc) < 1e-12);
}

#[test]
fn length_examples() {
    assert_abs_diff_eq!(sub_lorentzian_length(&|_| (1.0, 0.0), 0.0, 2.0, 1e-12).unwrap(), 2.0, epsilon = 1e-14);
    assert_eq!(sub_lorentzian_length(&|_| (1.0, 1.0), 0.0, 2.0, 1e-12).unwrap(), 0.0);
    let phi = 1.1f64;
    let l = sub_lorentzian_length(&|_| (phi.cosh(), phi.sinh()), 0.0, 0.7, 1e-12).unwrap();
    assert_abs_diff_eq!(l, 0.7, epsilon = 1e-12);
    let l = sub_lorentzian_length(&|t| (1.0 + t, 0.0), 0.0, 1.0, 1e-12).unwrap();
    assert_abs_diff_eq!(l, 1.5, epsilon = 1e-12);
    assert!(matches!(
        sub_lorentzian_length(&|_| (0.5, 1.0), 0.0, 1.0, 1e-12),
        Err(Error::NotNonspacelike { .. })
    ));
}

fn sample(t: f64, q: Point, u: f64, v: f64) -> ControlledSample {
    ControlledSample { t, q, u, v }
}

#[test]
fn radial_bound_examples() {
    let f = flat_structure();
    let (phi, s0, s1) = (0.5f64, 0.2, 0.9);
    let at = |s: f64| Point::new(s * phi.cosh(), s * phi.sinh(), 0.1, 0.2);
    let curve = vec![
        sample(0.0, at(s0), phi.cosh(), phi.sinh()),
        sample(s1 - s0, at(s1), phi.cosh(), phi.sinh()),
    ];
    let b = radial_bound_check(&f, &curve, 1e-9).unwrap();
    assert!(b.ok);
    assert_abs_diff_eq!(b.length, b.delta_r1, epsilon = 1e-14);

    let curve = vec![
        sample(0.0, Point::new(1.0, 0.0, 0.0, 0.0), 1.0, 0.0),
        sample(0.5, Point::new(1.5, 0.0, 0.0, 0.0), 1.0, 0.0),
    ];
    let b = radial_bound_check(&f, &curve, 1e-9).unwrap();
    assert!(b.ok && b.length == 0.5 && b.delta_r1 == 0.5);

    let outside = vec![sample(0.0, Point::new(0.1, 0.5, 0.0, 0.0), 1.0, 0.0)];
    assert!(matches!(radial_bound_check(&f, &outside, 1e-9), Err(Error::RegionViolation { index: 0 })));
    assert!(radial_bound_check(&nf(), &curve, 1e-9).is_err());
}

fn covector() -> impl Strategy<Value = Covector> {
    prop::array::uniform4(-1.0..1.0f64).prop_map(Covector::from_array)
}

fn point() -> impl Strategy<Value = Point> {
    prop::array::uniform4(-0.5..0.5f64).prop_map(Point::from_array)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_and_causal_character(q in point(), p in covector(), perturbed in any::<bool>()) {
        let f = if perturbed { nf() } else { flat_structure() };
        let cfg = IntegratorConfig::default();
        let arc = hamiltonian_flow(&f, &PhasePoint::new(q, p), 1.0, &cfg).unwrap();
        prop_assert!(arc.max_energy_drift(&f) <= 10.0 * cfg.rel_tol * arc.energy0.abs().max(1.0));
        prop_assert!(arc_pairing_defect(&f, &arc) <= 1e-8);
        // γ̇ = -aX + bY, so g(γ̇,γ̇) = 2H and g(γ̇,X) = a; a² ≥ -2H keeps a
        // away from zero on timelike arcs only
        let (a0, _) = pairings(&f, &PhasePoint::new(q, p));
        if arc.energy0.abs() > 1e-6 {
            for (_, pp) in &arc.samples {
                prop_assert_eq!(hamiltonian(&f, pp).signum(), arc.energy0.signum());
                if arc.energy0 < 0.0 {
                    prop_assert_eq!(pairings(&f, pp).0.signum(), a0.signum());
                }
            }
        }
    }

    #[test]
    fn flat_vertical_momenta_constant(q in point(), p in covector()) {
        let f = flat_structure();
        let cfg = IntegratorConfig::default();
        let arc = hamiltonian_flow(&f, &PhasePoint::new(q, p), 1.0, &cfg).unwrap();
        for (_, pp) in &arc.samples {
            prop_assert!((pp.p.pz - p.pz).abs() <= cfg.abs_tol);
            prop_assert!((pp.p.pw - p.pw).abs() <= cfg.abs_tol);
        }
    }

    #[test]
    fn exp_homogeneity(q in point(), p in covector(), s in 0.1..0.6f64, s2 in 0.1..0.4f64) {
        let f = nf();
        let cfg = IntegratorConfig::with_tolerance(1e-12);
        let along = hamiltonian_flow(&f, &PhasePoint::new(q, p), s, &cfg).unwrap();
        prop_assert!(exp_map(&f, &q, &p.scale(s), &cfg).unwrap().dist(&along.end().q) < 1e-9);
        let whole = hamiltonian_flow(&f, &PhasePoint::new(q, p), s + s2, &cfg).unwrap();
        let rest = hamiltonian_flow(&f, along.end(), s2, &cfg).unwrap();
        prop_assert!(whole.end().q.dist(&rest.end().q) < 1e-9);
    }

    #[test]
    fn rhs_matches_velocity(q in point(), p in covector()) {
        let f = nf();
        let pp = PhasePoint::new(q, p);
        let (a, b) = pairings(&f, &pp);
        let s = hamilton_rhs(&f, &pp.to_array());
        let v = f.velocity(&q.to_array(), -a, b);
        for i in 0..4 {
            prop_assert!((s[i] - v[i]).abs() < 1e-14);
        }
    }
}
