use molvox::grid::{distance, Atom, Element, GridSpec, Molecule, VoxelGrid};
use molvox::io::{
    decode_grid, encode_grid, parse_xyz, read_grid, read_xyz, read_xyz_dir, templates, write_grid, write_xyz,
    write_xyz_file, GRID_HEADER_LEN,
};
use molvox::Error;
use proptest::prelude::*;

/// Byte layout of a 1-channel 4³ grid with value 0.5 at voxel 0 and 1.0 at the last voxel.
const GOLDEN_HEADER: &str = "4d56584752494400010000000100000004000000000000000000d03f000000000000e03f";

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn golden_grid_bytes() {
    let spec = GridSpec::new(4, 0.25, 1, 0.5).unwrap();
    let mut values = vec![0.0f32; 64];
    values[0] = 0.5;
    values[63] = 1.0;
    let bytes = encode_grid(&VoxelGrid::new(spec, values).unwrap());
    assert_eq!(bytes.len(), GRID_HEADER_LEN + 64 * 4);
    assert_eq!(hex(&bytes[..GRID_HEADER_LEN]), GOLDEN_HEADER);
    assert_eq!(hex(&bytes[GRID_HEADER_LEN..GRID_HEADER_LEN + 4]), "0000003f");
    assert_eq!(hex(&bytes[bytes.len() - 4..]), "0000803f");
    assert!(bytes[GRID_HEADER_LEN + 4..bytes.len() - 4].iter().all(|&b| b == 0));
}

#[test]
fn grid_file_round_trip_and_size() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GridSpec::new(8, 0.25, 2, 0.5).unwrap();
    let values: Vec<f32> = (0..spec.size()).map(|i| ((i * 37) % 101) as f32 / 100.0).collect();
    let grid = VoxelGrid::new(spec, values).unwrap();
    let path = dir.path().join("g.grid");
    write_grid(&path, &grid).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len() as usize, GRID_HEADER_LEN + 2 * 512 * 4);
    let back = read_grid(&path).unwrap();
    assert_eq!(back, grid);
    assert!(matches!(read_grid(dir.path().join("nope.grid")), Err(Error::Io { .. })));
}

#[test]
fn truncation_names_both_sizes() {
    let grid = VoxelGrid::zeros(GridSpec::new(4, 0.25, 1, 0.5).unwrap());
    let bytes = encode_grid(&grid);
    let err = decode_grid(&bytes[..100]).unwrap_err();
    assert_eq!(err.to_string(), format!("truncated file: expected {} bytes, found 100", bytes.len()));
    assert!(matches!(decode_grid(&bytes[..20]), Err(Error::Truncated { expected: 36, actual: 20 })));
}

#[test]
fn fixtures_have_their_stated_geometry() {
    let w = templates::water();
    let (o, h1, h2) = (w.atoms[0].position, w.atoms[1].position, w.atoms[2].position);
    assert!((distance(o, h1) - 0.9572).abs() < 1e-5);
    let cos = {
        let u = [h1[0] - o[0], h1[1] - o[1], h1[2] - o[2]];
        let v = [h2[0] - o[0], h2[1] - o[1], h2[2] - o[2]];
        (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) / (distance(o, h1) * distance(o, h2))
    };
    assert!((cos.acos().to_degrees() - 104.52).abs() < 1e-3);
    let m = templates::methane();
    for a in &m.atoms[1..] {
        assert!((distance(m.atoms[0].position, a.position) - 1.087).abs() < 1e-5);
    }
    let e = templates::ethane();
    assert!((distance(e.atoms[0].position, e.atoms[1].position) - 1.535).abs() < 1e-6);
    let hcn = templates::hydrogen_cyanide();
    assert!((distance(hcn.atoms[1].position, hcn.atoms[2].position) - 1.156).abs() < 1e-6);
}

#[test]
fn directory_reading_is_sorted_and_reports_the_file() {
    let dir = tempfile::tempdir().unwrap();
    write_xyz_file(dir.path().join("b.xyz"), &templates::water(), "b").unwrap();
    write_xyz_file(dir.path().join("a.xyz"), &templates::methane(), "a").unwrap();
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let all = read_xyz_dir(dir.path()).unwrap();
    assert_eq!(all.len(), 2);
    assert_eq!(all[0].1.len(), 5);
    assert_eq!(all[1].1, read_xyz(dir.path().join("b.xyz")).unwrap());

    std::fs::write(dir.path().join("c.xyz"), "2\n\nC 0 0 0\n").unwrap();
    match read_xyz_dir(dir.path()) {
        Err(Error::Parse { line: 4, msg }) => assert!(msg.contains("c.xyz"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

fn arb_molecule() -> impl Strategy<Value = Molecule> {
    let element = prop::sample::select(Element::ALL.to_vec());
    prop::collection::vec((element, [-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3]), 0..12)
        .prop_map(|v| Molecule::new(v.into_iter().map(|(e, p)| Atom::new(e, p)).collect()))
}

proptest! {
    #[test]
    fn xyz_round_trip(m in arb_molecule(), comment in "[ -~]{0,40}") {
        let text = write_xyz(&m, &comment);
        let back = parse_xyz(&text).unwrap();
        prop_assert_eq!(back.len(), m.len());
        for (a, b) in m.atoms.iter().zip(&back.atoms) {
            prop_assert_eq!(a.element, b.element);
            for k in 0..3 {
                prop_assert!((a.position[k] - b.position[k]).abs() <= 5e-7);
            }
        }
        // a second pass is a fixed point
        prop_assert_eq!(write_xyz(&back, &comment), text);
    }

    #[test]
    fn grid_round_trip_is_bitwise(values in prop::collection::vec(0.0f32..=1.0, 2 * 64)) {
        let spec = GridSpec::new(4, 0.3, 2, 0.45).unwrap();
        let g = VoxelGrid::new(spec, values).unwrap();
        prop_assert_eq!(decode_grid(&encode_grid(&g)).unwrap(), g);
    }
}
