use molvox::extract::{
    detect_peaks, extract_molecule, reconstruction_error, reconstruction_gradient, refine_coordinates, Optimizer,
    RefineConfig,
};
use molvox::grid::{distance, Atom, Element, ElementSet, GridSpec, Molecule, Placement, VoxelGrid, Voxelizer};
use molvox::io::{synth_molecules, SynthConstraints};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn carbon_grid(length: usize) -> Voxelizer {
    Voxelizer::new(GridSpec::new(length, 0.25, 1, 0.5).unwrap(), ElementSet::new(vec![Element::C]).unwrap()).unwrap()
}

fn carbons(points: &[[f64; 3]]) -> Molecule {
    Molecule::new(points.iter().map(|&p| Atom::new(Element::C, p)).collect())
}

#[test]
fn empty_grid_gives_nothing() {
    let vox = carbon_grid(8);
    let grid = VoxelGrid::zeros(vox.spec);
    assert!(detect_peaks(&grid, &RefineConfig::default()).unwrap().is_empty());
    let r = extract_molecule(&grid, &vox, &RefineConfig::default()).unwrap();
    assert!(r.molecule.is_empty());
}

#[test]
fn single_atom_single_peak_at_nearest_voxel() {
    let vox = carbon_grid(16);
    let p = [0.3, -0.2, 0.05];
    let grid = vox.voxelize(&carbons(&[p]), Placement::AsIs).unwrap();
    let peaks = detect_peaks(&grid, &RefineConfig::default()).unwrap();
    assert_eq!(peaks.len(), 1);
    assert_eq!(peaks.peaks[0].voxel, vox.spec.nearest_voxel(p));
}

#[test]
fn two_atoms_two_angstrom_apart_give_two_peaks() {
    let vox = carbon_grid(24);
    let c = vox.spec.voxel_center(8, 12, 12);
    let grid = vox
        .voxelize(&carbons(&[c, [c[0] + 2.0, c[1], c[2]]]), Placement::AsIs)
        .unwrap();
    let peaks = detect_peaks(&grid, &RefineConfig::default()).unwrap();
    assert_eq!(peaks.len(), 2);
    assert_eq!(peaks.peaks[0].voxel, [8, 12, 12]);
    assert_eq!(peaks.peaks[1].voxel, [16, 12, 12]);
}

#[test]
fn atom_at_voxel_center_is_already_optimal() {
    let vox = carbon_grid(16);
    let truth = vox.spec.voxel_center(7, 9, 8);
    let grid = vox.voxelize(&carbons(&[truth]), Placement::AsIs).unwrap();
    let r = extract_molecule(&grid, &vox, &RefineConfig::default()).unwrap();
    assert!(distance(r.molecule.atoms[0].position, truth) < 1e-4);
}

#[test]
fn offset_atom_is_recovered() {
    let vox = carbon_grid(16);
    let c = vox.spec.voxel_center(8, 8, 8);
    for dir in [[1.0, 0.0, 0.0], [0.0, 0.6, 0.8], [0.577, -0.577, 0.577]] {
        let truth = [c[0] + 0.1 * dir[0], c[1] + 0.1 * dir[1], c[2] + 0.1 * dir[2]];
        let grid = vox.voxelize(&carbons(&[truth]), Placement::AsIs).unwrap();
        for optimizer in [Optimizer::GradientDescent, Optimizer::Lbfgs { memory: 5 }] {
            let cfg = RefineConfig { optimizer, ..RefineConfig::default() };
            let r = extract_molecule(&grid, &vox, &cfg).unwrap();
            assert_eq!(r.molecule.len(), 1);
            assert!(distance(r.molecule.atoms[0].position, truth) < 0.02, "{optimizer:?}");
        }
    }
}

#[test]
fn five_atom_molecules_round_trip() {
    let vox = Voxelizer::new(GridSpec::new(24, 0.25, 5, 0.5).unwrap(), ElementSet::qm9()).unwrap();
    let c = SynthConstraints {
        atoms: 5..=5,
        min_separation: 1.2,
        radius: 1.8,
        ..SynthConstraints::default()
    };
    let mols = synth_molecules(10, &mut ChaCha8Rng::seed_from_u64(21), &c).unwrap();
    for m in &mols {
        let grid = vox.voxelize(m, Placement::AsIs).unwrap();
        let r = extract_molecule(&grid, &vox, &RefineConfig::default()).unwrap();
        assert_eq!(r.molecule.element_counts(), m.element_counts());
        for a in &m.atoms {
            let best = r
                .molecule
                .atoms
                .iter()
                .filter(|b| b.element == a.element)
                .map(|b| distance(a.position, b.position))
                .fold(f64::INFINITY, f64::min);
            assert!(best < 0.05, "{best}");
        }
    }
}

#[test]
fn gradient_matches_central_differences() {
    let vox = Voxelizer::new(GridSpec::new(16, 0.25, 2, 0.5).unwrap(), ElementSet::new(vec![Element::C, Element::O]).unwrap())
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let truth = Molecule::new(vec![
        Atom::new(Element::C, [0.1, 0.2, -0.3]),
        Atom::new(Element::C, [-0.6, 0.1, 0.4]),
        Atom::new(Element::O, [0.5, -0.4, 0.2]),
    ]);
    let target = vox.voxelize(&truth, Placement::AsIs).unwrap();
    let h = 1e-5;
    for _ in 0..10 {
        let atoms: Vec<(usize, [f64; 3])> = vox
            .place(&truth, Placement::AsIs)
            .unwrap()
            .into_iter()
            .map(|(c, p)| (c, p.map(|x| x + rng.random_range(-0.2..0.2))))
            .collect();
        let (_, grad) = reconstruction_gradient(&vox, &target, &atoms).unwrap();
        for n in 0..atoms.len() {
            for k in 0..3 {
                let shifted = |d: f64| {
                    let mut a = atoms.clone();
                    a[n].1[k] += d;
                    reconstruction_error(&vox, &target, &a).unwrap()
                };
                let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                let an = grad[n][k];
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-4, "atom {n} axis {k}: {an} vs {fd}");
            }
        }
    }
}

#[test]
fn history_is_monotone_and_error_drops() {
    let vox = carbon_grid(16);
    let truth = carbons(&[[0.11, 0.07, -0.09], [1.2, 0.0, 0.3]]);
    let grid = vox.voxelize(&truth, Placement::AsIs).unwrap();
    let peaks = detect_peaks(&grid, &RefineConfig::default()).unwrap();
    for optimizer in [Optimizer::GradientDescent, Optimizer::Lbfgs { memory: 7 }] {
        let cfg = RefineConfig { optimizer, ..RefineConfig::default() };
        let r = refine_coordinates(&peaks, &grid, &vox, &cfg).unwrap();
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.final_error <= r.initial_error);
        assert!(r.history.len() <= cfg.max_iterations + 1);
    }
}

#[test]
fn mismatched_geometry_rejected() {
    let vox = carbon_grid(16);
    let other = VoxelGrid::zeros(GridSpec::new(8, 0.25, 1, 0.5).unwrap());
    let peaks = detect_peaks(&other, &RefineConfig::default()).unwrap();
    assert!(refine_coordinates(&peaks, &other, &vox, &RefineConfig::default()).is_err());
}

fn arb_grid() -> impl Strategy<Value = VoxelGrid> {
    let spec = GridSpec::new(6, 0.25, 2, 0.5).unwrap();
    prop::collection::vec(0.0f32..=1.0, spec.size()).prop_map(move |v| VoxelGrid::new(spec, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raising_threshold_never_adds_peaks(grid in arb_grid(), lo in 0.05f64..0.5, gap in 0.0f64..0.45) {
        let count = |t: f64| detect_peaks(&grid, &RefineConfig { threshold: t, ..RefineConfig::default() }).unwrap().len();
        prop_assert!(count(lo + gap) <= count(lo));
    }

    #[test]
    fn peaks_are_local_maxima_above_threshold(grid in arb_grid()) {
        let cfg = RefineConfig::default();
        let spec = *grid.spec();
        let l = spec.length as isize;
        for p in detect_peaks(&grid, &cfg).unwrap().peaks {
            prop_assert!(p.value as f64 >= cfg.threshold);
            let [i, j, k] = p.voxel.map(|v| v as isize);
            for di in -1..=1 {
                for dj in -1..=1 {
                    for dk in -1..=1 {
                        let (a, b, c) = (i + di, j + dj, k + dk);
                        if (0..l).contains(&a) && (0..l).contains(&b) && (0..l).contains(&c) {
                            prop_assert!(grid.get(p.channel, a as usize, b as usize, c as usize) <= p.value);
                        }
                    }
                }
            }
        }
    }
}
