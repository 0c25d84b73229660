use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Chemical elements supported by the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    H,
    C,
    N,
    O,
    F,
    S,
    Cl,
    Br,
}

impl Element {
    pub const ALL: [Element; 8] = [
        Element::H,
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::S,
        Element::Cl,
        Element::Br,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::Br => "Br",
        }
    }

    /// Parses a symbol, accepting any capitalisation ("CL", "cl", "Cl").
    pub fn from_symbol(symbol: &str) -> Option<Element> {
        let s = symbol.trim();
        Element::ALL
            .into_iter()
            .find(|e| e.symbol().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Element {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Element::from_symbol(s).ok_or_else(|| Error::UnknownChannel(s.to_string()))
    }
}

/// Ordered element-to-channel mapping. Channel indices are the positions in
/// the list, so they are contiguous from 0 and bijective with the elements.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Element>", into = "Vec<Element>")]
pub struct ElementSet {
    elements: Vec<Element>,
}

impl ElementSet {
    pub fn new(elements: Vec<Element>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::invalid("element set must not be empty"));
        }
        for (i, e) in elements.iter().enumerate() {
            if elements[..i].contains(e) {
                return Err(Error::invalid(format!("element {e} listed twice")));
            }
        }
        Ok(ElementSet { elements })
    }

    /// The five-element set C, H, O, N, F used for small organic molecules.
    pub fn qm9() -> Self {
        use Element::*;
        ElementSet {
            elements: vec![C, H, O, N, F],
        }
    }

    /// The eight-element set used for drug-like molecules.
    pub fn drugs() -> Self {
        use Element::*;
        ElementSet {
            elements: vec![C, H, O, N, F, S, Cl, Br],
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn channel(&self, element: Element) -> Option<usize> {
        self.elements.iter().position(|&e| e == element)
    }

    pub fn element(&self, channel: usize) -> Option<Element> {
        self.elements.get(channel).copied()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }
}

impl TryFrom<Vec<Element>> for ElementSet {
    type Error = Error;

    fn try_from(elements: Vec<Element>) -> Result<Self> {
        ElementSet::new(elements)
    }
}

impl From<ElementSet> for Vec<Element> {
    fn from(set: ElementSet) -> Self {
        set.elements
    }
}
