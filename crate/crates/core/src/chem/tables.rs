use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Element;

/// Single-bond covalent radii in Å (Cordero et al. 2008; sp3 carbon).
const COVALENT_RADII: [(Element, f64); 8] = [
    (Element::H, 0.31),
    (Element::C, 0.76),
    (Element::N, 0.71),
    (Element::O, 0.66),
    (Element::F, 0.57),
    (Element::S, 1.05),
    (Element::Cl, 1.02),
    (Element::Br, 1.20),
];

pub const DEFAULT_TOLERANCE: f64 = 0.4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BondTable {
    radii: BTreeMap<Element, f64>,
    /// Added to the radius sum when deciding whether two atoms bond.
    pub tolerance: f64,
}

impl Default for BondTable {
    fn default() -> Self {
        BondTable {
            radii: COVALENT_RADII.into_iter().collect(),
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl BondTable {
    pub fn radius(&self, e: Element) -> Result<f64> {
        self.radii
            .get(&e)
            .copied()
            .ok_or_else(|| Error::Config(format!("no covalent radius for {e}")))
    }

    pub fn set_radius(&mut self, e: Element, r: f64) -> Result<()> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Config(format!("covalent radius for {e} must be positive")));
        }
        self.radii.insert(e, r);
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValenceTable {
    allowed: BTreeMap<Element, Vec<u32>>,
}

impl Default for ValenceTable {
    fn default() -> Self {
        use Element::*;
        let allowed = [
            (H, vec![1]),
            (C, vec![4]),
            (N, vec![3]),
            (O, vec![2]),
            (F, vec![1]),
            (S, vec![2, 4, 6]),
            (Cl, vec![1]),
            (Br, vec![1]),
        ];
        ValenceTable {
            allowed: allowed.into_iter().collect(),
        }
    }
}

impl ValenceTable {
    pub fn allowed(&self, e: Element) -> Option<&[u32]> {
        self.allowed.get(&e).map(Vec::as_slice)
    }

    pub fn set(&mut self, e: Element, mut valences: Vec<u32>) -> Result<()> {
        if valences.is_empty() {
            return Err(Error::Config(format!("valence set for {e} must not be empty")));
        }
        valences.sort_unstable();
        valences.dedup();
        self.allowed.insert(e, valences);
        Ok(())
    }

    pub fn remove(&mut self, e: Element) {
        self.allowed.remove(&e);
    }
}

/// Both tables plus their text-file loader.
///
/// The file is TOML; every key is optional and overrides the compiled-in
/// default:
///
/// ```toml
/// tolerance = 0.45
///
/// [radius]
/// C = 0.75
///
/// [valence]
/// S = [2, 6]
/// ```
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChemTables {
    pub bonds: BondTable,
    pub valences: ValenceTable,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    tolerance: Option<f64>,
    #[serde(default)]
    radius: BTreeMap<String, f64>,
    #[serde(default)]
    valence: BTreeMap<String, Vec<u32>>,
}

impl ChemTables {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: TableFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut t = ChemTables::default();
        if let Some(tol) = file.tolerance {
            if !(tol.is_finite() && tol >= 0.0) {
                return Err(Error::Config("tolerance must be non-negative".into()));
            }
            t.bonds.tolerance = tol;
        }
        let element = |s: &str| Element::from_symbol(s).ok_or_else(|| Error::Config(format!("unknown element `{s}`")));
        for (sym, r) in file.radius {
            t.bonds.set_radius(element(&sym)?, r)?;
        }
        for (sym, v) in file.valence {
            t.valences.set(element(&sym)?, v)?;
        }
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ChemTables::from_toml_str(&text)
    }
}
