use achronal::currents::CurrentSlice;
use achronal::io::{load_packet, load_scalar_field, load_slice, read_packet, save_packet, save_scalar_field, save_slice, write_packet};
use achronal::wavepacket::{make_packet, GaussianParams, MomentumGrid, PacketSpec};
use achronal::window::SpatialWindow;

#[test]
fn packets_round_trip_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let spec =
        PacketSpec::MollifiedGaussian(GaussianParams { center: [0.2, -0.1, 0.0], position: [1.0, 0.0, 0.5], ..GaussianParams::default() });
    let phi = make_packet(&MomentumGrid::new(16, 4.0).unwrap(), 1.3, &spec).unwrap();
    let path = dir.path().join("phi.achr");
    save_packet(&path, &phi).unwrap();
    let back = load_packet(&path).unwrap();
    assert_eq!(back.amplitudes(), phi.amplitudes());
    assert_eq!(back.mass(), 1.3);

    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"ACHR");
    let custom = make_packet(phi.grid(), 1.3, &PacketSpec::Custom { path: path.to_string_lossy().into_owned() }).unwrap();
    assert_eq!(custom.amplitudes(), phi.amplitudes());
}

#[test]
fn corrupt_containers_are_rejected() {
    let phi = make_packet(
        &MomentumGrid::new(8, 4.0).unwrap(),
        1.0,
        &PacketSpec::MollifiedGaussian(GaussianParams { support_radius: 1.5, ..GaussianParams::default() }),
    )
    .unwrap();
    let mut buf = Vec::new();
    write_packet(&mut buf, &phi).unwrap();
    assert!(read_packet(&buf[..buf.len() - 3]).is_err());
    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(read_packet(&bad[..]).is_err());
    let mut long = buf.clone();
    long.push(0);
    assert!(read_packet(&long[..]).is_err());
    assert!(read_packet(&buf[..]).is_ok());
}

#[test]
fn slices_and_fields_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let w = SpatialWindow::centered([0.5, 0.0, -0.5], 0.25, 5).unwrap();
    let values: Vec<[f64; 4]> = (0..w.len()).map(|i| [i as f64, -(i as f64), 0.5, f64::MIN_POSITIVE]).collect();
    let slice = CurrentSlice { t: 0.75, window: w, values };
    let p = dir.path().join("s.achr");
    save_slice(&p, &slice).unwrap();
    assert_eq!(load_slice(&p).unwrap(), slice);

    let field: Vec<f64> = (0..w.len()).map(|i| (i as f64).sin()).collect();
    let q = dir.path().join("f.achr");
    save_scalar_field(&q, &w, &field).unwrap();
    let (w2, f2) = load_scalar_field(&q).unwrap();
    assert_eq!(w2, w);
    assert_eq!(f2, field);
    assert!(load_slice(&q).is_err());
}
