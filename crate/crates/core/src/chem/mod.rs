//! Molecular graphs from coordinates.
//!
//! Bonds come from a covalent-radius rule: atoms `i` and `j` bond when
//! `‖xᵢ - xⱼ‖ ≤ r(eᵢ) + r(eⱼ) + tolerance`. Bond orders are then raised
//! greedily, shortest bond first, while both ends are below their target
//! valence. This is a lightweight stand-in for full cheminformatics
//! sanitisation (no aromaticity, charges or kekulisation), so stability and
//! validity figures are not comparable to toolkit-based numbers.

mod hash;
mod tables;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use hash::canonical_hash;
pub use tables::{BondTable, ChemTables, ValenceTable};

use crate::error::{Error, Result};
use crate::grid::{distance, Element, Molecule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub order: u8,
}

/// Atoms, bonds and the coordinates they were perceived from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MolecularGraph {
    elements: Vec<Element>,
    positions: Vec<[f64; 3]>,
    bonds: Vec<Bond>,
}

impl MolecularGraph {
    /// Builds a graph, normalising each bond to `i < j`.
    pub fn new(elements: Vec<Element>, positions: Vec<[f64; 3]>, bonds: Vec<Bond>) -> Result<Self> {
        if elements.len() != positions.len() {
            return Err(Error::invalid("one position per atom required"));
        }
        let n = elements.len();
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::with_capacity(bonds.len());
        for b in bonds {
            let (i, j) = (b.i.min(b.j), b.i.max(b.j));
            if i == j {
                return Err(Error::invalid(format!("self-loop on atom {i}")));
            }
            if j >= n {
                return Err(Error::invalid(format!("bond ({i}, {j}) references a missing atom")));
            }
            if !(1..=3).contains(&b.order) {
                return Err(Error::invalid(format!("bond order {} not in 1..=3", b.order)));
            }
            if !seen.insert((i, j)) {
                return Err(Error::invalid(format!("duplicate bond ({i}, {j})")));
            }
            out.push(Bond { i, j, order: b.order });
        }
        Ok(MolecularGraph {
            elements,
            positions,
            bonds: out,
        })
    }

    /// Graph with explicit connectivity and no meaningful coordinates.
    pub fn from_topology(elements: Vec<Element>, bonds: Vec<Bond>) -> Result<Self> {
        let positions = vec![[0.0; 3]; elements.len()];
        MolecularGraph::new(elements, positions, bonds)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    /// Summed bond order of every atom.
    pub fn valences(&self) -> Vec<u32> {
        let mut v = vec![0u32; self.len()];
        for b in &self.bonds {
            v[b.i] += b.order as u32;
            v[b.j] += b.order as u32;
        }
        v
    }

    /// `(neighbour, order)` lists per atom, sorted by neighbour index.
    pub fn adjacency(&self) -> Vec<Vec<(usize, u8)>> {
        let mut adj = vec![Vec::new(); self.len()];
        for b in &self.bonds {
            adj[b.i].push((b.j, b.order));
            adj[b.j].push((b.i, b.order));
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    pub fn bond_length(&self, b: &Bond) -> f64 {
        distance(self.positions[b.i], self.positions[b.j])
    }

    pub fn to_molecule(&self) -> Molecule {
        Molecule::new(
            self.elements
                .iter()
                .zip(&self.positions)
                .map(|(&e, &p)| crate::grid::Atom::new(e, p))
                .collect(),
        )
    }

    /// Atom count per element.
    pub fn formula(&self) -> BTreeMap<Element, usize> {
        let mut f = BTreeMap::new();
        for &e in &self.elements {
            *f.entry(e).or_insert(0) += 1;
        }
        f
    }
}

/// Distance-based bond perception with greedy bond-order promotion.
pub fn perceive_bonds(m: &Molecule, tables: &ChemTables) -> Result<MolecularGraph> {
    m.validate()?;
    let n = m.len();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        let ei = m.atoms[i].element;
        let ri = tables.bonds.radius(ei)?;
        for j in i + 1..n {
            let ej = m.atoms[j].element;
            let rj = tables.bonds.radius(ej)?;
            let d = distance(m.atoms[i].position, m.atoms[j].position);
            if d <= ri + rj + tables.bonds.tolerance {
                candidates.push((d, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut degree = vec![0u32; n];
    for &(_, i, j) in &candidates {
        degree[i] += 1;
        degree[j] += 1;
    }
    // remaining valence up to the smallest allowed value reachable from the degree
    let mut deficit: Vec<u32> = (0..n)
        .map(|a| {
            let allowed = tables.valences.allowed(m.atoms[a].element).unwrap_or(&[]);
            allowed
                .iter()
                .copied()
                .filter(|&v| v >= degree[a])
                .min()
                .map_or(0, |t| t - degree[a])
        })
        .collect();

    let mut bonds = Vec::with_capacity(candidates.len());
    for &(_, i, j) in &candidates {
        let mut order = 1u8;
        while order < 3 && deficit[i] > 0 && deficit[j] > 0 {
            order += 1;
            deficit[i] -= 1;
            deficit[j] -= 1;
        }
        bonds.push(Bond { i, j, order });
    }
    bonds.sort_unstable_by_key(|b| (b.i, b.j));
    MolecularGraph::new(
        m.atoms.iter().map(|a| a.element).collect(),
        m.atoms.iter().map(|a| a.position).collect(),
        bonds,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub stable_atoms: usize,
    pub total_atoms: usize,
    pub molecule_stable: bool,
}

impl Stability {
    pub fn atom_fraction(&self) -> f64 {
        self.stable_atoms as f64 / self.total_atoms as f64
    }
}

/// An atom is stable when its summed bond order is an allowed valence.
pub fn stability(g: &MolecularGraph, vt: &ValenceTable) -> Result<Stability> {
    if g.is_empty() {
        return Err(Error::invalid("stability of an empty graph is undefined"));
    }
    let mut stable = 0;
    for (a, v) in g.valences().into_iter().enumerate() {
        let allowed = vt
            .allowed(g.elements[a])
            .ok_or_else(|| Error::Config(format!("no valence entry for {}", g.elements[a])))?;
        if allowed.contains(&v) {
            stable += 1;
        }
    }
    Ok(Stability {
        stable_atoms: stable,
        total_atoms: g.len(),
        molecule_stable: stable == g.len(),
    })
}

/// Non-empty and no atom above its maximum allowed valence.
pub fn validity_check(g: &MolecularGraph, vt: &ValenceTable) -> bool {
    if g.is_empty() {
        return false;
    }
    g.valences().into_iter().enumerate().all(|(a, v)| {
        vt.allowed(g.elements[a])
            .and_then(|s| s.iter().copied().max())
            .is_some_and(|max| v <= max)
    })
}
