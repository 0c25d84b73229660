use std::f64::consts::TAU;

use rand::Rng;

use super::molecule::{add, sub, Atom, Molecule};
use crate::error::{Error, Result};

/// Upper bound of the per-axis translation drawn during augmentation, in Å.
pub const MAX_SHIFT: f64 = 0.25;

/// Rotation `Rz(alpha) · Ry(beta) · Rx(gamma)`.
pub fn euler_rotation(alpha: f64, beta: f64, gamma: f64) -> [[f64; 3]; 3] {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    [
        [ca * cb, ca * sb * sg - sa * cg, ca * sb * cg + sa * sg],
        [sa * cb, sa * sb * sg + ca * cg, sa * sb * cg - ca * sg],
        [-sb, cb * sg, cb * cg],
    ]
}

/// Rotation about the molecule's centroid followed by a translation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    pub rotation: [[f64; 3]; 3],
    pub shift: [f64; 3],
}

impl RigidTransform {
    pub fn from_euler(angles: [f64; 3], shift: [f64; 3]) -> Self {
        RigidTransform {
            rotation: euler_rotation(angles[0], angles[1], angles[2]),
            shift,
        }
    }

    /// Three Euler angles uniform on `[0, 2π)` and a per-axis shift uniform on
    /// `[0, 0.25]` Å. Uniform Euler angles are not Haar-uniform on SO(3).
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let angles = [
            rng.random_range(0.0..TAU),
            rng.random_range(0.0..TAU),
            rng.random_range(0.0..TAU),
        ];
        let shift = [
            rng.random_range(0.0..=MAX_SHIFT),
            rng.random_range(0.0..=MAX_SHIFT),
            rng.random_range(0.0..=MAX_SHIFT),
        ];
        RigidTransform::from_euler(angles, shift)
    }

    pub fn apply(&self, mol: &Molecule) -> Molecule {
        let c = mol.centroid();
        let r = &self.rotation;
        let atoms = mol
            .atoms
            .iter()
            .map(|a| {
                let x = sub(a.position, c);
                let rotated = [
                    r[0][0] * x[0] + r[0][1] * x[1] + r[0][2] * x[2],
                    r[1][0] * x[0] + r[1][1] * x[1] + r[1][2] * x[2],
                    r[2][0] * x[0] + r[2][1] * x[1] + r[2][2] * x[2],
                ];
                Atom::new(a.element, add(add(rotated, c), self.shift))
            })
            .collect();
        Molecule::new(atoms)
    }
}

/// Randomly rotated-then-translated copy of `mol`.
pub fn random_se3_augment<R: Rng + ?Sized>(mol: &Molecule, rng: &mut R) -> Result<Molecule> {
    if mol.is_empty() {
        return Err(Error::invalid("cannot augment an empty molecule"));
    }
    mol.validate()?;
    Ok(RigidTransform::sample(rng).apply(mol))
}
