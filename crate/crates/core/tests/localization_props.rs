//! Quadrature-level properties on a small grid.

use std::sync::OnceLock;

use achronal::currents::{BackendKind, CurrentFamily, CurrentSpec};
use achronal::kernels::{CausalKernel, GFunction};
use achronal::localization::{matrix_element, LocalizationOptions, Localizer, Mask, Region};
use achronal::surfaces::AchronalSurface;
use achronal::wavepacket::{make_packet, GaussianParams, MomentumGrid, PacketSpec, WavePacket};
use proptest::prelude::*;

fn family() -> CurrentFamily {
    CurrentFamily::Causal(CausalKernel::new(GFunction::basic(1.5, 1.0).unwrap()))
}

fn packet(center: [f64; 3], position: [f64; 3]) -> WavePacket {
    let spec = PacketSpec::MollifiedGaussian(GaussianParams { center, position, sigma: 0.8, support_radius: 1.5, plateau_radius: None });
    make_packet(&MomentumGrid::new(24, 4.0).unwrap(), 1.0, &spec).unwrap()
}

fn localizer() -> &'static Localizer {
    static L: OnceLock<Localizer> = OnceLock::new();
    L.get_or_init(|| {
        let spec = CurrentSpec::new(family(), packet([0.0; 3], [0.0; 3]), BackendKind::fast());
        Localizer::new(spec, LocalizationOptions::default()).unwrap()
    })
}

fn prob(mask: Mask) -> f64 {
    localizer().probability(&Region::new(AchronalSurface::flat(0.0), mask)).unwrap().probability
}

#[test]
fn empty_mask_has_zero_probability() {
    assert_eq!(prob(Mask::Empty), 0.0);
}

#[test]
fn flat_full_surface_is_normalized() {
    let p = prob(Mask::Full);
    let n = localizer().norm_squared();
    assert!((p - n).abs() / n < 1e-2, "{p} vs {n}");
}

#[test]
fn symmetric_packet_splits_evenly() {
    let n = localizer().norm_squared();
    let upper = prob(Mask::half_space([0.0, 0.0, 1.0], 0.0));
    assert!((upper - 0.5 * n).abs() / n < 1e-2, "{upper} vs {}", 0.5 * n);
}

#[test]
fn partitions_add_up() {
    let l = localizer();
    let s = AchronalSurface::flat(0.0);
    let halves = [Mask::half_space([0.3, 0.2, 1.0], 0.1), Mask::half_space([0.3, 0.2, 1.0], 0.1).complement()];
    let two = l.additivity_check(&s, &halves).unwrap();
    assert!(two.residual < 1e-2, "{}", two.residual);
    let octant = |sx: f64, sy: f64, sz: f64| Mask::Intersection {
        parts: vec![Mask::half_space([sx, 0.0, 0.0], 0.0), Mask::half_space([0.0, sy, 0.0], 0.0), Mask::half_space([0.0, 0.0, sz], 0.0)],
    };
    let mut octants = Vec::new();
    for sx in [1.0, -1.0] {
        for sy in [1.0, -1.0] {
            for sz in [1.0, -1.0] {
                octants.push(octant(sx, sy, sz));
            }
        }
    }
    // Offsetting the window keeps every subsample off the coordinate planes.
    let opts = LocalizationOptions { center: [0.013, 0.021, 0.017], ..LocalizationOptions::default() };
    let shifted = Localizer::from_field(l.field.clone(), opts);
    let eight = shifted.additivity_check(&s, &octants).unwrap();
    let full = shifted.additivity_check(&s, &[Mask::Full]).unwrap();
    assert!((eight.sum - full.sum).abs() <= 1e-12 * full.sum, "{} vs {}", eight.sum, full.sum);
}

#[test]
fn overlapping_partitions_are_rejected() {
    let l = localizer();
    let s = AchronalSurface::flat(0.0);
    assert!(l.additivity_check(&s, &[Mask::Full, Mask::ball([0.0; 3], 1.0)]).is_err());
    assert!(l.additivity_check(&s, &[Mask::half_space([0.0, 0.0, 1.0], 0.0)]).is_err());
}

#[test]
fn causal_condition_holds_for_growing_balls() {
    let l = localizer();
    let delta = Region::new(AchronalSurface::flat(0.0), Mask::ball([0.0; 3], 1.0));
    let rep = l.causal_monotonicity_check(&delta, &AchronalSurface::flat(0.5)).unwrap();
    assert_eq!(rep.target.mask, Mask::ball([0.0; 3], 1.5));
    assert!(rep.holds(1e-3 * l.norm_squared()));
}

#[test]
fn polarization_is_hermitian() {
    let phi = packet([0.0; 3], [0.0; 3]);
    let psi = packet([0.2, 0.0, -0.1], [0.5, 0.0, 0.0]);
    let region = Region::new(AchronalSurface::flat(0.0), Mask::ball([0.0; 3], 1.5));
    let opts = LocalizationOptions::default();
    let ab = matrix_element(&phi, &psi, &family(), BackendKind::fast(), &region, &opts).unwrap();
    let ba = matrix_element(&psi, &phi, &family(), BackendKind::fast(), &region, &opts).unwrap();
    assert!((ab - ba.conj()).norm() < 1e-10 * (phi.norm_squared() * psi.norm_squared()).sqrt());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn probability_is_monotone_in_the_mask(r in 0.3..2.5f64, dr in 0.05..1.5f64, c in (-0.5..0.5f64, -0.5..0.5f64, -0.5..0.5f64)) {
        let c = [c.0, c.1, c.2];
        let small = Mask::ball(c, r);
        let big = Mask::Union { parts: vec![small.clone(), Mask::ball(c, r + dr)] };
        // A shared window keeps nodes aligned between the two masks.
        let w = achronal::window::SpatialWindow::cell_centered([-4.0; 3], [4.0; 3], 24).unwrap();
        let opts = LocalizationOptions { window: Some(w), ..LocalizationOptions::default() };
        let l = Localizer::from_field(localizer().field.clone(), opts);
        let s = AchronalSurface::flat(0.0);
        let ps = l.probability(&Region::new(s.clone(), small)).unwrap().probability;
        let pb = l.probability(&Region::new(s, big)).unwrap().probability;
        prop_assert!(ps <= pb + 1e-12, "{ps} > {pb}");
        prop_assert!(ps >= -1e-12);
    }
}
