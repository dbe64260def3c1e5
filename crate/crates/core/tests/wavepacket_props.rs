use achronal::minkowski::{rotation, FourVector, PoincareElement, Vec3};
use achronal::wavepacket::{apply_poincare, make_packet, GaussianParams, MomentumGrid, PacketSpec, WavePacket};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid() -> MomentumGrid {
    MomentumGrid::new(24, 4.0).unwrap()
}

fn gaussian(center: [f64; 3], position: [f64; 3], sigma: f64) -> WavePacket {
    let spec = PacketSpec::MollifiedGaussian(GaussianParams { sigma, center, position, ..GaussianParams::default() });
    make_packet(&grid(), 1.0, &spec).unwrap()
}

fn packet() -> impl Strategy<Value = WavePacket> {
    ((-0.5..0.5f64, -0.5..0.5f64, -0.5..0.5f64), (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64), 0.5..1.5f64)
        .prop_map(|(c, x, s)| gaussian([c.0, c.1, c.2], [x.0, x.1, x.2], s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn norm_is_quadratic(phi in packet(), re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let c = Complex64::new(re, im);
        let scaled = phi.scaled(c).norm_squared();
        prop_assert!((scaled - c.norm_sqr() * phi.norm_squared()).abs() <= 1e-12 * scaled.max(1e-300) * 10.0);
    }

    #[test]
    fn inner_product_is_hermitian_and_bounded(phi in packet(), psi in packet()) {
        let a = phi.inner_product(&psi).unwrap();
        let b = psi.inner_product(&phi).unwrap();
        prop_assert!((a - b.conj()).norm() < 1e-14 * (1.0 + a.norm()) * 10.0);
        prop_assert!(a.norm_sqr() <= phi.norm_squared() * psi.norm_squared() * (1.0 + 1e-12));
        let own = phi.inner_product(&phi).unwrap();
        prop_assert!((own.re - phi.norm_squared()).abs() < 1e-13 * own.re && own.im == 0.0);
    }

    #[test]
    fn translations_are_exactly_unitary(phi in packet(), a in (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64)) {
        let g = PoincareElement::translation(FourVector::new(a.0, a.1, a.2, a.3));
        let moved = apply_poincare(&g, &phi).unwrap();
        for (x, y) in moved.amplitudes().iter().zip(phi.amplitudes()) {
            prop_assert!((x.norm() - y.norm()).abs() <= 1e-15 * (1.0 + y.norm()));
        }
        prop_assert!((moved.norm_squared() - phi.norm_squared()).abs() <= 1e-14 * phi.norm_squared());
    }

    #[test]
    fn translations_compose(phi in packet(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let ga = PoincareElement::translation(FourVector::new(a, 0.3, 0.0, -0.1));
        let gb = PoincareElement::translation(FourVector::new(b, -0.2, 0.5, 0.0));
        let two = apply_poincare(&ga, &apply_poincare(&gb, &phi).unwrap()).unwrap();
        let one = apply_poincare(&ga.compose(&gb), &phi).unwrap();
        let diff = two.combine(Complex64::new(1.0, 0.0), &one, Complex64::new(-1.0, 0.0)).unwrap();
        prop_assert!(diff.norm_squared() <= 1e-24 * phi.norm_squared());
    }
}

#[test]
fn quarter_turns_are_exact_permutations() {
    let phi = gaussian([0.3, -0.2, 0.1], [0.5, 0.0, -0.4], 0.8);
    let g = PoincareElement::lorentz(rotation(&Vec3::z(), std::f64::consts::FRAC_PI_2).unwrap());
    let mut cur = phi.clone();
    for _ in 0..4 {
        cur = apply_poincare(&g, &cur).unwrap();
        assert!((cur.norm_squared() - phi.norm_squared()).abs() <= 1e-13 * phi.norm_squared());
    }
    assert_eq!(cur.amplitudes(), phi.amplitudes());
}

#[test]
fn time_translation_is_the_energy_phase() {
    let phi = gaussian([0.0; 3], [0.0; 3], 1.0);
    let moved = apply_poincare(&PoincareElement::translation(FourVector::new(1.0, 0.0, 0.0, 0.0)), &phi).unwrap();
    for i in phi.support() {
        let expect = phi.amplitude(i) * Complex64::from_polar(1.0, phi.energy_at(i));
        assert!((moved.amplitude(i) - expect).norm() < 1e-15);
    }
}

#[test]
fn norm_matches_fine_grid_oracle() {
    // The mollified Gaussian is smooth and compactly supported, so the
    // uniform sum converges spectrally; compare against 4x resolution.
    let coarse = make_packet(&MomentumGrid::new(48, 4.0).unwrap(), 1.0, &PacketSpec::MollifiedGaussian(GaussianParams::default())).unwrap();
    let fine = make_packet(&MomentumGrid::new(192, 4.0).unwrap(), 1.0, &PacketSpec::MollifiedGaussian(GaussianParams::default())).unwrap();
    let rel = (coarse.norm_squared() - fine.norm_squared()).abs() / fine.norm_squared();
    assert!(rel < 1e-4, "{rel}");
}

#[test]
fn disjoint_supports_are_orthogonal() {
    let spec =
        |c: f64| PacketSpec::MollifiedGaussian(GaussianParams { center: [c, 0.0, 0.0], support_radius: 0.9, ..GaussianParams::default() });
    let g = MomentumGrid::new(32, 4.0).unwrap();
    let a = make_packet(&g, 1.0, &spec(-1.0)).unwrap();
    let b = make_packet(&g, 1.0, &spec(1.0)).unwrap();
    assert!(a.inner_product(&b).unwrap().norm() < 1e-14);
}

#[test]
fn support_violation_and_zero_packets() {
    let g = grid();
    let wide = PacketSpec::MollifiedGaussian(GaussianParams { center: [2.5, 0.0, 0.0], ..GaussianParams::default() });
    assert!(make_packet(&g, 1.0, &wide).is_err());
    let z = make_packet(&g, 1.0, &PacketSpec::Zero).unwrap();
    assert!(z.is_zero() && z.norm_squared() == 0.0);
}
