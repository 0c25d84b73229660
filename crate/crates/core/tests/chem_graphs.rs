use molvox::chem::{canonical_hash, perceive_bonds, stability, validity_check, Bond, ChemTables, MolecularGraph};
use molvox::grid::{Atom, Element, Molecule};
use molvox::io::templates;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn orders(g: &MolecularGraph) -> Vec<(Element, Element, u8)> {
    let mut v: Vec<_> = g
        .bonds()
        .iter()
        .map(|b| {
            let (a, c) = (g.elements()[b.i], g.elements()[b.j]);
            (a.min(c), a.max(c), b.order)
        })
        .collect();
    v.sort();
    v
}

#[test]
fn fixture_bond_orders() {
    use Element::*;
    let t = ChemTables::default();
    let g = |m: Molecule| perceive_bonds(&m, &t).unwrap();
    assert_eq!(orders(&g(templates::water())), [(H, O, 1), (H, O, 1)]);
    assert_eq!(orders(&g(templates::ethylene())), [(H, C, 1), (H, C, 1), (H, C, 1), (H, C, 1), (C, C, 2)]);
    assert_eq!(orders(&g(templates::hydrogen_cyanide())), [(H, C, 1), (C, N, 3)]);
    assert_eq!(orders(&g(templates::formaldehyde())), [(H, C, 1), (H, C, 1), (C, O, 2)]);
    let ethane = g(templates::ethane());
    assert_eq!(ethane.bonds().len(), 7);
    assert!(ethane.bonds().iter().all(|b| b.order == 1));
}

#[test]
fn every_fixture_is_stable_and_valid() {
    let t = ChemTables::default();
    for (name, m) in templates::all() {
        let g = perceive_bonds(&m, &t).unwrap();
        assert!(stability(&g, &t.valences).unwrap().molecule_stable, "{name}");
        assert!(validity_check(&g, &t.valences), "{name}");
    }
}

#[test]
fn stretched_bond_breaks_and_destabilises() {
    let t = ChemTables::default();
    let mut m = templates::water();
    m.atoms[1].position = m.atoms[1].position.map(|v| v * 3.0);
    let g = perceive_bonds(&m, &t).unwrap();
    assert_eq!(g.bonds().len(), 1);
    let s = stability(&g, &t.valences).unwrap();
    assert!(!s.molecule_stable);
    assert_eq!(s.stable_atoms, 1);
}

#[test]
fn overcrowded_atom_is_invalid() {
    // five hydrogens around one carbon exceed its valence
    let mut atoms = vec![Atom::new(Element::C, [0.0; 3])];
    for p in [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]] {
        atoms.push(Atom::new(Element::H, p.map(|v: f64| v * 1.09)));
    }
    let t = ChemTables::default();
    let g = perceive_bonds(&Molecule::new(atoms), &t).unwrap();
    assert!(!validity_check(&g, &t.valences));
}

#[test]
fn tables_load_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tables.toml");
    std::fs::write(&path, "tolerance = 0.1\n[valence]\nC = [2, 4]\n").unwrap();
    let t = ChemTables::load(&path).unwrap();
    assert_eq!(t.bonds.tolerance, 0.1);
    assert_eq!(t.valences.allowed(Element::C).unwrap(), &[2, 4]);
    assert!(ChemTables::load(dir.path().join("missing.toml")).is_err());
}

#[test]
fn graph_constructor_rejects_bad_bonds() {
    let el = vec![Element::C, Element::C];
    assert!(MolecularGraph::from_topology(el.clone(), vec![Bond { i: 0, j: 0, order: 1 }]).is_err());
    assert!(MolecularGraph::from_topology(el.clone(), vec![Bond { i: 0, j: 2, order: 1 }]).is_err());
    assert!(MolecularGraph::from_topology(el.clone(), vec![Bond { i: 0, j: 1, order: 4 }]).is_err());
    assert!(MolecularGraph::from_topology(
        el.clone(),
        vec![Bond { i: 0, j: 1, order: 1 }, Bond { i: 1, j: 0, order: 2 }]
    )
    .is_err());
    assert!(MolecularGraph::from_topology(el, vec![Bond { i: 1, j: 0, order: 2 }]).is_ok());
}

const PALETTE: [Element; 3] = [Element::C, Element::N, Element::O];

fn random_graph(rng: &mut ChaCha8Rng, forest: bool) -> MolecularGraph {
    let n = rng.random_range(1..=6);
    let elements: Vec<Element> = (0..n).map(|_| PALETTE[rng.random_range(0..PALETTE.len())]).collect();
    let mut bonds = Vec::new();
    for j in 1..n {
        if forest {
            if rng.random_bool(0.8) {
                bonds.push(Bond { i: rng.random_range(0..j), j, order: rng.random_range(1..=2) });
            }
        } else {
            for i in 0..j {
                if rng.random_bool(0.4) {
                    bonds.push(Bond { i, j, order: rng.random_range(1..=2) });
                }
            }
        }
    }
    MolecularGraph::from_topology(elements, bonds).unwrap()
}

fn relabelled(g: &MolecularGraph, perm: &[usize]) -> MolecularGraph {
    let mut elements = vec![Element::H; g.len()];
    for (old, &new) in perm.iter().enumerate() {
        elements[new] = g.elements()[old];
    }
    let bonds = g
        .bonds()
        .iter()
        .map(|b| Bond { i: perm[b.i], j: perm[b.j], order: b.order })
        .collect();
    MolecularGraph::from_topology(elements, bonds).unwrap()
}

/// Exhaustive search for a label- and order-preserving bijection.
fn isomorphic(a: &MolecularGraph, b: &MolecularGraph) -> bool {
    if a.len() != b.len() || a.bonds().len() != b.bonds().len() {
        return false;
    }
    let n = a.len();
    let mut edges_b = std::collections::BTreeSet::new();
    for e in b.bonds() {
        edges_b.insert((e.i.min(e.j), e.i.max(e.j), e.order));
    }
    fn search(
        k: usize,
        perm: &mut Vec<usize>,
        used: &mut Vec<bool>,
        a: &MolecularGraph,
        b: &MolecularGraph,
        edges_b: &std::collections::BTreeSet<(usize, usize, u8)>,
    ) -> bool {
        if k == a.len() {
            return a.bonds().iter().all(|e| {
                let (x, y) = (perm[e.i], perm[e.j]);
                edges_b.contains(&(x.min(y), x.max(y), e.order))
            });
        }
        for t in 0..a.len() {
            if !used[t] && a.elements()[k] == b.elements()[t] {
                used[t] = true;
                perm.push(t);
                if search(k + 1, perm, used, a, b, edges_b) {
                    return true;
                }
                perm.pop();
                used[t] = false;
            }
        }
        false
    }
    search(0, &mut Vec::with_capacity(n), &mut vec![false; n], a, b, &edges_b)
}

#[test]
fn hash_is_invariant_under_relabelling() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..500 {
        let g = random_graph(&mut rng, false);
        let mut perm: Vec<usize> = (0..g.len()).collect();
        perm.shuffle(&mut rng);
        let h = relabelled(&g, &perm);
        assert!(isomorphic(&g, &h));
        assert_eq!(canonical_hash(&g), canonical_hash(&h));
    }
}

#[test]
fn hash_decides_isomorphism_on_forests() {
    // colour refinement is complete on forests, so equality must be exact
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut collisions_checked = 0;
    for _ in 0..3000 {
        let a = random_graph(&mut rng, true);
        let b = random_graph(&mut rng, true);
        let same_hash = canonical_hash(&a) == canonical_hash(&b);
        assert_eq!(same_hash, isomorphic(&a, &b), "{a:?} vs {b:?}");
        collisions_checked += usize::from(same_hash);
    }
    assert!(collisions_checked > 0, "no isomorphic pairs were exercised");
}

#[test]
fn hash_ignores_coordinates_but_not_bond_orders() {
    let t = ChemTables::default();
    let a = perceive_bonds(&templates::ethane(), &t).unwrap();
    let moved = perceive_bonds(&templates::ethane().translated([3.0, -1.0, 2.0]), &t).unwrap();
    assert_eq!(canonical_hash(&a), canonical_hash(&moved));
    let single = MolecularGraph::from_topology(vec![Element::C, Element::O], vec![Bond { i: 0, j: 1, order: 1 }]).unwrap();
    let double = MolecularGraph::from_topology(vec![Element::C, Element::O], vec![Bond { i: 0, j: 1, order: 2 }]).unwrap();
    assert_ne!(canonical_hash(&single), canonical_hash(&double));
}

#[test]
fn known_limitation_on_regular_graphs() {
    // a 6-ring and two 3-rings are both 2-regular: colour refinement cannot split them
    let ring = |edges: &[(usize, usize)]| {
        MolecularGraph::from_topology(
            vec![Element::C; 6],
            edges.iter().map(|&(i, j)| Bond { i, j, order: 1 }).collect(),
        )
        .unwrap()
    };
    let hexagon = ring(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)]);
    let triangles = ring(&[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]);
    assert!(!isomorphic(&hexagon, &triangles));
    assert_eq!(canonical_hash(&hexagon), canonical_hash(&triangles));
}
