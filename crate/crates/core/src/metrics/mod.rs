//! Distribution distances between generated and reference molecule sets.
//!
//! Every distance compares *normalized* distributions, so sets of different
//! sizes are comparable. Grouped distances (valency, bond length, bond angle)
//! weight each group by its share of the reference samples.

mod distance;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use distance::{total_variation, wasserstein1, weighted_w1, CategoricalHistogram, EmpiricalSamples, W1Group};

use crate::chem::{canonical_hash, perceive_bonds, stability, validity_check, ChemTables, MolecularGraph, ValenceTable};
use crate::error::{Error, Result};
use crate::grid::{sub, Molecule};

/// Molecule sizes in both sets, as raw counts keyed by atom count.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AtomCountHistogram {
    pub generated: BTreeMap<usize, usize>,
    pub reference: BTreeMap<usize, usize>,
}

/// Percentages describe the generated set; distances compare it with the reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_generated: usize,
    pub n_reference: usize,
    pub stable_mol_pct: f64,
    pub stable_atom_pct: f64,
    pub valid_pct: f64,
    pub unique_pct: f64,
    pub valency_w1: f64,
    pub atoms_tv: f64,
    pub bonds_tv: f64,
    pub bond_length_w1: f64,
    pub bond_angle_w1: f64,
    pub atom_count_histogram: AtomCountHistogram,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format {
            offset: 0,
            msg: e.to_string(),
        })
    }
}

/// Bond-type label used by the histograms.
pub fn bond_label(order: u8) -> &'static str {
    match order {
        1 => "single",
        2 => "double",
        3 => "triple",
        _ => "other",
    }
}

/// Per-set sample pools.
#[derive(Default)]
struct Pools {
    atom_types: BTreeMap<String, usize>,
    bond_types: BTreeMap<String, usize>,
    valency: BTreeMap<String, Vec<f64>>,
    lengths: BTreeMap<String, Vec<f64>>,
    angles: BTreeMap<String, Vec<f64>>,
    sizes: BTreeMap<usize, usize>,
}

impl Pools {
    fn collect(graphs: &[MolecularGraph]) -> Pools {
        let mut p = Pools::default();
        for g in graphs {
            *p.sizes.entry(g.len()).or_insert(0) += 1;
            for (e, v) in g.elements().iter().zip(g.valences()) {
                let label = e.symbol().to_string();
                *p.atom_types.entry(label.clone()).or_insert(0) += 1;
                p.valency.entry(label).or_default().push(v as f64);
            }
            for b in g.bonds() {
                let label = bond_label(b.order).to_string();
                *p.bond_types.entry(label.clone()).or_insert(0) += 1;
                p.lengths.entry(label).or_default().push(g.bond_length(b));
            }
            let pos = g.positions();
            for (center, nbrs) in g.adjacency().iter().enumerate() {
                for (x, &(a, _)) in nbrs.iter().enumerate() {
                    for &(b, _) in &nbrs[x + 1..] {
                        let angle = bond_angle(pos[a], pos[center], pos[b]);
                        p.angles.entry(g.elements()[center].symbol().to_string()).or_default().push(angle);
                    }
                }
            }
        }
        p
    }
}

/// Angle at `center` in degrees.
pub fn bond_angle(a: [f64; 3], center: [f64; 3], b: [f64; 3]) -> f64 {
    let u = sub(a, center);
    let v = sub(b, center);
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cos = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) / (nu * nv);
    cos.clamp(-1.0, 1.0).acos().to_degrees()
}

fn tv_of_counts(gen: &BTreeMap<String, usize>, reference: &BTreeMap<String, usize>) -> Result<f64> {
    match (gen.values().sum::<usize>(), reference.values().sum::<usize>()) {
        (0, 0) => Ok(0.0),
        (0, _) | (_, 0) => Ok(2.0),
        _ => total_variation(
            &CategoricalHistogram::from_counts(gen.iter().map(|(l, &n)| (l.clone(), n)))?,
            &CategoricalHistogram::from_counts(reference.iter().map(|(l, &n)| (l.clone(), n)))?,
        ),
    }
}

fn grouped_w1(gen: &BTreeMap<String, Vec<f64>>, reference: &BTreeMap<String, Vec<f64>>) -> Result<f64> {
    let total: usize = reference.values().map(Vec::len).sum();
    if total == 0 {
        return Ok(0.0);
    }
    let mut groups = BTreeMap::new();
    for (label, samples) in reference {
        if samples.is_empty() {
            continue;
        }
        let generated = match gen.get(label) {
            Some(v) if !v.is_empty() => Some(EmpiricalSamples::new(v.clone())?),
            _ => None,
        };
        groups.insert(
            label.clone(),
            W1Group {
                weight: samples.len() as f64 / total as f64,
                reference: EmpiricalSamples::new(samples.clone())?,
                generated,
            },
        );
    }
    // weights computed as ratios can miss 1 by a few ulps; renormalize exactly
    let wsum: f64 = groups.values().map(|g| g.weight).sum();
    for g in groups.values_mut() {
        g.weight /= wsum;
    }
    weighted_w1(&groups)
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Full report for `generated` against `reference`.
///
/// Empty graphs in the generated set (failed extractions) count as unstable
/// and invalid.
pub fn evaluate(generated: &[MolecularGraph], reference: &[MolecularGraph], valences: &ValenceTable) -> Result<EvalReport> {
    if generated.is_empty() || reference.is_empty() {
        return Err(Error::invalid("evaluation needs non-empty generated and reference sets"));
    }
    let per_molecule: Vec<(bool, usize, usize, bool, Option<String>)> = generated
        .par_iter()
        .map(|g| {
            if g.is_empty() {
                return Ok((false, 0, 0, false, None));
            }
            let s = stability(g, valences)?;
            let valid = validity_check(g, valences);
            Ok((s.molecule_stable, s.stable_atoms, s.total_atoms, valid, valid.then(|| canonical_hash(g))))
        })
        .collect::<Result<_>>()?;

    let stable_mols = per_molecule.iter().filter(|m| m.0).count();
    let stable_atoms: usize = per_molecule.iter().map(|m| m.1).sum();
    let total_atoms: usize = per_molecule.iter().map(|m| m.2).sum();
    let valid = per_molecule.iter().filter(|m| m.3).count();
    let distinct: BTreeSet<&String> = per_molecule.iter().filter_map(|m| m.4.as_ref()).collect();

    let (gp, rp) = rayon::join(|| Pools::collect(generated), || Pools::collect(reference));

    Ok(EvalReport {
        n_generated: generated.len(),
        n_reference: reference.len(),
        stable_mol_pct: pct(stable_mols, generated.len()),
        stable_atom_pct: pct(stable_atoms, total_atoms),
        valid_pct: pct(valid, generated.len()),
        unique_pct: pct(distinct.len(), valid),
        valency_w1: grouped_w1(&gp.valency, &rp.valency)?,
        atoms_tv: tv_of_counts(&gp.atom_types, &rp.atom_types)?,
        bonds_tv: tv_of_counts(&gp.bond_types, &rp.bond_types)?,
        bond_length_w1: grouped_w1(&gp.lengths, &rp.lengths)?,
        bond_angle_w1: grouped_w1(&gp.angles, &rp.angles)?,
        atom_count_histogram: AtomCountHistogram {
            generated: gp.sizes,
            reference: rp.sizes,
        },
    })
}

/// Perceives bonds for both sets, then calls [`evaluate`].
pub fn evaluate_molecules(generated: &[Molecule], reference: &[Molecule], tables: &ChemTables) -> Result<EvalReport> {
    let perceive = |set: &[Molecule]| -> Result<Vec<MolecularGraph>> {
        set.par_iter().map(|m| perceive_bonds(m, tables)).collect()
    };
    evaluate(&perceive(generated)?, &perceive(reference)?, &tables.valences)
}
