//! Small molecules with experimental gas-phase geometries.
//!
//! Each is parsed from the XYZ files in the crate's `fixtures/` directory;
//! the comment line of each file records the bond lengths and angles used.

use super::parse_xyz;
use crate::grid::Molecule;

macro_rules! fixture {
    ($(#[$doc:meta])* $name:ident, $file:literal) => {
        $(#[$doc])*
        pub fn $name() -> Molecule {
            parse_xyz(include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/", $file)))
                .expect("bundled fixture parses")
        }
    };
}

fixture!(/// H₂O.
    water, "water.xyz");
fixture!(/// CH₄.
    methane, "methane.xyz");
fixture!(/// NH₃.
    ammonia, "ammonia.xyz");
fixture!(/// C₂H₆, staggered.
    ethane, "ethane.xyz");
fixture!(/// C₂H₄.
    ethylene, "ethylene.xyz");
fixture!(/// HCN.
    hydrogen_cyanide, "hydrogen_cyanide.xyz");
fixture!(/// H₂CO.
    formaldehyde, "formaldehyde.xyz");
fixture!(/// HF.
    hydrogen_fluoride, "hydrogen_fluoride.xyz");

/// Every template, with its name.
pub fn all() -> Vec<(&'static str, Molecule)> {
    vec![
        ("water", water()),
        ("methane", methane()),
        ("ammonia", ammonia()),
        ("ethane", ethane()),
        ("ethylene", ethylene()),
        ("hydrogen_cyanide", hydrogen_cyanide()),
        ("formaldehyde", formaldehyde()),
        ("hydrogen_fluoride", hydrogen_fluoride()),
    ]
}
