use std::ops::RangeInclusive;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{distance, Atom, Element, Molecule};

/// Knobs for [`synth_molecules`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConstraints {
    pub atoms: RangeInclusive<usize>,
    /// Smallest allowed distance between any two atoms, Å.
    pub min_separation: f64,
    pub element_weights: Vec<(Element, f64)>,
    /// Atoms are placed uniformly inside a ball of this radius about the origin.
    pub radius: f64,
    /// Placement attempts per atom, and restarts per molecule.
    pub max_attempts: usize,
}

impl Default for SynthConstraints {
    fn default() -> Self {
        SynthConstraints {
            atoms: 2..=5,
            min_separation: 1.0,
            element_weights: vec![(Element::C, 0.4), (Element::H, 0.3), (Element::O, 0.15), (Element::N, 0.15)],
            radius: 1.0,
            max_attempts: 1000,
        }
    }
}

impl SynthConstraints {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_separation.is_finite() && self.min_separation > 0.0) {
            return Err(Error::invalid("minimum separation must be positive"));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::invalid("placement radius must be positive"));
        }
        if self.atoms.is_empty() || *self.atoms.start() == 0 {
            return Err(Error::invalid("atom-count range must be non-empty and start at 1 or more"));
        }
        if self.max_attempts == 0 {
            return Err(Error::invalid("max_attempts must be positive"));
        }
        if self.element_weights.is_empty() {
            return Err(Error::invalid("element weights must not be empty"));
        }
        Ok(())
    }
}

/// Draws `n` random molecules by rejection sampling positions one atom at a
/// time. Deterministic given the state of `rng`.
pub fn synth_molecules<R: Rng + ?Sized>(n: usize, rng: &mut R, c: &SynthConstraints) -> Result<Vec<Molecule>> {
    c.validate()?;
    let weights = WeightedIndex::new(c.element_weights.iter().map(|(_, w)| *w))
        .map_err(|e| Error::invalid(format!("element weights: {e}")))?;
    let mut out = Vec::with_capacity(n);
    for idx in 0..n {
        let count = rng.random_range(c.atoms.clone());
        let elements: Vec<Element> = (0..count).map(|_| c.element_weights[weights.sample(rng)].0).collect();
        let mut molecule = None;
        for _ in 0..c.max_attempts {
            if let Some(atoms) = place_atoms(rng, &elements, c) {
                molecule = Some(Molecule::new(atoms));
                break;
            }
        }
        out.push(molecule.ok_or_else(|| {
            Error::invalid(format!(
                "molecule {idx}: could not place {count} atoms after {} restarts",
                c.max_attempts
            ))
        })?);
    }
    Ok(out)
}

/// One placement pass; `None` when some atom finds no free spot.
fn place_atoms<R: Rng + ?Sized>(rng: &mut R, elements: &[Element], c: &SynthConstraints) -> Option<Vec<Atom>> {
    let mut atoms: Vec<Atom> = Vec::with_capacity(elements.len());
    for &element in elements {
        let p = (0..c.max_attempts)
            .map(|_| ball_point(rng, c.radius))
            .find(|&p| atoms.iter().all(|b| distance(b.position, p) >= c.min_separation))?;
        atoms.push(Atom::new(element, p));
    }
    Some(atoms)
}

fn ball_point<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> [f64; 3] {
    loop {
        let p: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
        if p.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            return p.map(|v| v * radius);
        }
    }
}
