use achronal::causal_logic::{
    achronally_separated, causal_complement_member, completion_equals_determinacy_check, double_complement_member, stratified_samples,
    SamplerOptions, SpacetimeRegion, Verdict,
};
use achronal::localization::Mask;
use achronal::minkowski::{rotation, FourVector, PoincareElement, Vec3};
use achronal::surfaces::AchronalSurface;
use proptest::prelude::*;

fn four() -> impl Strategy<Value = FourVector> {
    (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(t, a, b, c)| FourVector::new(t, a, b, c))
}

fn ball() -> impl Strategy<Value = (f64, [f64; 3], f64)> {
    (-1.0..1.0f64, (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 0.2..1.5f64).prop_map(|(t, c, r)| (t, [c.0, c.1, c.2], r))
}

proptest! {
    #[test]
    fn separation_is_symmetric_and_irreflexive(x in four(), y in four()) {
        prop_assert_eq!(achronally_separated(&x, &y), achronally_separated(&y, &x));
        prop_assert!(!achronally_separated(&x, &x));
    }

    #[test]
    fn completion_is_extensive((t0, c, r) in ball(), u in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)) {
        // Points of the ball lie in its double complement.
        let m = SpacetimeRegion::BallInPlane { t0, center: c, radius: r };
        let v = Vec3::new(u.0, u.1, u.2);
        prop_assume!(v.norm() <= 1.0);
        let x = FourVector::from_parts(t0, &(Vec3::from(c) + v * r));
        prop_assert!(m.contains(&x).unwrap());
        prop_assert_eq!(double_complement_member(&m, &x).unwrap().verdict, Verdict::Member);
        prop_assert_eq!(causal_complement_member(&m, &x, &SamplerOptions::default()).unwrap().verdict, Verdict::NonMember);
    }

    #[test]
    fn complements_are_equivariant((t0, c, r) in ball(), x in four(), a in four(), ang in -3.0..3.0f64) {
        // g·(ball) is again a ball in a plane for translations and rotations.
        let g = PoincareElement::new(a, rotation(&Vec3::new(0.6, 0.0, 0.8), ang).unwrap());
        let gc = g.act(&FourVector::from_parts(t0, &Vec3::from(c)));
        let m = SpacetimeRegion::BallInPlane { t0, center: c, radius: r };
        let gm = SpacetimeRegion::BallInPlane { t0: gc.t, center: [gc.x[0], gc.x[1], gc.x[2]], radius: r };
        let gx = g.act(&x);
        let excess = (x.t - t0).abs() - ((x.spatial() - Vec3::from(c)).norm() - r);
        prop_assume!(excess.abs() > 1e-9);
        let s = SamplerOptions::default();
        prop_assert_eq!(causal_complement_member(&m, &x, &s).unwrap().verdict, causal_complement_member(&gm, &gx, &s).unwrap().verdict);
        prop_assert_eq!(double_complement_member(&m, &x).unwrap().verdict, double_complement_member(&gm, &gx).unwrap().verdict);
    }

    #[test]
    fn complement_points_are_separated_from_the_ball((t0, c, r) in ball(), x in four(), u in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)) {
        let m = SpacetimeRegion::BallInPlane { t0, center: c, radius: r };
        let v = Vec3::new(u.0, u.1, u.2);
        prop_assume!(v.norm() <= 1.0);
        let y = FourVector::from_parts(t0, &(Vec3::from(c) + v * r));
        if causal_complement_member(&m, &x, &SamplerOptions::default()).unwrap().is_member() {
            prop_assert!(achronally_separated(&x, &y));
        }
    }
}

#[test]
fn diamonds_are_causally_complete() {
    let d = SpacetimeRegion::Diamond { center: FourVector::new(0.2, 0.1, 0.0, -0.3), radius: 1.0 };
    let pts = stratified_samples(FourVector::new(-1.5, -1.5, -1.5, -1.5), FourVector::new(1.5, 1.5, 1.5, 1.5), 2000, 11);
    for x in pts {
        if d.diamond_excess(&x).unwrap().abs() < 1e-9 {
            continue;
        }
        assert_eq!(double_complement_member(&d, &x).unwrap().is_member(), d.contains(&x).unwrap(), "{x:?}");
    }
}

#[test]
fn sampled_determinacy_agrees_with_completion() {
    let patch = SpacetimeRegion::GraphPatch { surface: AchronalSurface::flat(0.0), mask: Mask::ball([0.0; 3], 1.0) };
    let pts = stratified_samples(FourVector::new(-1.5, -1.5, -1.5, -1.5), FourVector::new(1.5, 1.5, 1.5, 1.5), 600, 5);
    let rep = completion_equals_determinacy_check(&patch, &pts, 1e-3).unwrap();
    assert_eq!(rep.agreement_ratio, 1.0, "{:?}", rep.counterexamples);
}
