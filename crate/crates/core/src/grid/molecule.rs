use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::element::Element;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    /// Cartesian position in Å.
    pub position: [f64; 3],
}

impl Atom {
    pub fn new(element: Element, position: [f64; 3]) -> Self {
        Atom { element, position }
    }
}

/// An ordered list of atoms in continuous space.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Molecule {
    pub atoms: Vec<Atom>,
}

impl Molecule {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Molecule { atoms }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.atoms.iter().enumerate() {
            if a.position.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid(format!("atom {i} has non-finite coordinates")));
            }
        }
        Ok(())
    }

    /// Unweighted mean of atom positions; the origin for an empty molecule.
    pub fn centroid(&self) -> [f64; 3] {
        if self.atoms.is_empty() {
            return [0.0; 3];
        }
        let mut c = [0.0; 3];
        for a in &self.atoms {
            for k in 0..3 {
                c[k] += a.position[k];
            }
        }
        let n = self.atoms.len() as f64;
        c.map(|v| v / n)
    }

    pub fn translated(&self, shift: [f64; 3]) -> Molecule {
        Molecule {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom::new(a.element, add(a.position, shift)))
                .collect(),
        }
    }

    /// Copy translated so that the centroid sits at the origin.
    pub fn centered(&self) -> Molecule {
        let c = self.centroid();
        self.translated([-c[0], -c[1], -c[2]])
    }

    pub fn element_counts(&self) -> BTreeMap<Element, usize> {
        let mut counts = BTreeMap::new();
        for a in &self.atoms {
            *counts.entry(a.element).or_insert(0) += 1;
        }
        counts
    }

    /// Sub-molecule containing only atoms of `element`, order preserved.
    pub fn filter_element(&self, element: Element) -> Molecule {
        Molecule {
            atoms: self
                .atoms
                .iter()
                .filter(|a| a.element == element)
                .copied()
                .collect(),
        }
    }

    pub fn min_pairwise_distance(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for i in 0..self.atoms.len() {
            for j in i + 1..self.atoms.len() {
                let d = distance(self.atoms[i].position, self.atoms[j].position);
                best = Some(best.map_or(d, |b| b.min(d)));
            }
        }
        best
    }
}

pub(crate) fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = sub(a, b);
    dot(d, d).sqrt()
}
