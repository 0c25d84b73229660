//! Gaussian occupancy voxelization of molecules.
//!
//! Each atom contributes `V(d) = exp(-d² / (0.93 r)²)` to the voxels of its
//! element channel, and contributions inside one channel combine as
//! `Occ = 1 - Π (1 - V)`. Channels never interact.
//!
//! The grid frame puts the grid center at the origin: voxel `(i, j, k)` has
//! its center at `origin + (i + ½, j + ½, k + ½) · resolution` with
//! `origin = -extent / 2` on every axis.

mod augment;
mod element;
mod molecule;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use augment::{euler_rotation, random_se3_augment, RigidTransform, MAX_SHIFT};
pub use element::{Element, ElementSet};
pub use molecule::{distance, Atom, Molecule};

#[allow(unused_imports)]
pub(crate) use molecule::{dot, sub};

use crate::error::{Error, Result};

/// Width factor applied to the atom radius inside the Gaussian exponent.
pub const KERNEL_WIDTH_FACTOR: f64 = 0.93;

/// Occupancy fraction of a voxel at distance `d` Å from an atom of radius `r_a`.
pub fn atom_contribution(d: f64, r_a: f64) -> Result<f64> {
    if !r_a.is_finite() || r_a <= 0.0 {
        return Err(Error::invalid(format!("atom radius must be positive, got {r_a}")));
    }
    if !d.is_finite() || d < 0.0 {
        return Err(Error::invalid(format!("distance must be non-negative, got {d}")));
    }
    let s = KERNEL_WIDTH_FACTOR * r_a;
    Ok(gaussian(d * d, s * s))
}

#[inline]
pub(crate) fn gaussian(d2: f64, width2: f64) -> f64 {
    (-d2 / width2).exp()
}

/// Grid geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Voxels per edge.
    pub length: usize,
    /// Å per voxel.
    pub resolution: f64,
    /// Number of element channels.
    pub channels: usize,
    /// Uniform atom radius in Å.
    pub atom_radius: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            length: 32,
            resolution: 0.25,
            channels: 5,
            atom_radius: 0.5,
        }
    }
}

impl GridSpec {
    pub fn new(length: usize, resolution: f64, channels: usize, atom_radius: f64) -> Result<Self> {
        let spec = GridSpec {
            length,
            resolution,
            channels,
            atom_radius,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 4 {
            return Err(Error::invalid(format!("grid length must be >= 4, got {}", self.length)));
        }
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(Error::invalid(format!("resolution must be positive, got {}", self.resolution)));
        }
        if self.channels == 0 {
            return Err(Error::invalid("grid needs at least one channel"));
        }
        if !(self.atom_radius.is_finite() && self.atom_radius > 0.0) {
            return Err(Error::invalid(format!("atom radius must be positive, got {}", self.atom_radius)));
        }
        Ok(())
    }

    /// Physical edge length in Å.
    pub fn extent(&self) -> f64 {
        self.length as f64 * self.resolution
    }

    /// Corner of voxel (0, 0, 0) along each axis.
    pub fn origin(&self) -> f64 {
        -0.5 * self.extent()
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.axis_center(i), self.axis_center(j), self.axis_center(k)]
    }

    #[inline]
    pub(crate) fn axis_center(&self, i: usize) -> f64 {
        self.origin() + (i as f64 + 0.5) * self.resolution
    }

    /// Voxels per channel.
    pub fn voxels(&self) -> usize {
        self.length * self.length * self.length
    }

    /// Total tensor size, `channels × length³`.
    pub fn size(&self) -> usize {
        self.channels * self.voxels()
    }

    #[inline]
    pub fn index(&self, c: usize, i: usize, j: usize, k: usize) -> usize {
        ((c * self.length + i) * self.length + j) * self.length + k
    }

    /// Inverse of [`GridSpec::index`].
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize, usize) {
        let l = self.length;
        (idx / (l * l * l), (idx / (l * l)) % l, (idx / l) % l, idx % l)
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        let lo = self.origin();
        let hi = lo + self.extent();
        p.iter().all(|&x| x >= lo && x <= hi)
    }

    /// Nearest voxel to a point, clamped into the grid.
    pub fn nearest_voxel(&self, p: [f64; 3]) -> [usize; 3] {
        p.map(|x| {
            let f = ((x - self.origin()) / self.resolution - 0.5).round();
            f.clamp(0.0, (self.length - 1) as f64) as usize
        })
    }
}

/// Dense multi-channel occupancy tensor, channel-major, every value in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    spec: GridSpec,
    values: Vec<f32>,
}

impl VoxelGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        VoxelGrid {
            values: vec![0.0; spec.size()],
            spec,
        }
    }

    pub fn new(spec: GridSpec, values: Vec<f32>) -> Result<Self> {
        spec.validate()?;
        if values.len() != spec.size() {
            return Err(Error::invalid(format!(
                "grid needs {} values, got {}",
                spec.size(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(format!(
                "voxel {pos} has value {} outside [0, 1]",
                values[pos]
            )));
        }
        Ok(VoxelGrid { spec, values })
    }

    /// Builds a grid from an arbitrary real tensor (e.g. a denoiser output),
    /// clamping every entry into `[0, 1]`. Non-finite entries become 0.
    pub fn from_unclamped(spec: GridSpec, values: &[f64]) -> Result<Self> {
        if values.len() != spec.size() {
            return Err(Error::invalid(format!(
                "grid needs {} values, got {}",
                spec.size(),
                values.len()
            )));
        }
        let values = values
            .iter()
            .map(|&v| if v.is_finite() { v.clamp(0.0, 1.0) as f32 } else { 0.0 })
            .collect();
        Ok(VoxelGrid { spec, values })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, c: usize, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.spec.index(c, i, j, k)]
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.spec.voxels();
        &self.values[c * n..(c + 1) * n]
    }

    /// Flattened `f64` copy, the representation denoisers work on.
    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }
}

/// Separable kernel values of one atom over its voxel box.
pub(crate) struct Stencil {
    pub ranges: [Range<usize>; 3],
    /// Voxel center minus atom position, per axis.
    pub delta: [Vec<f64>; 3],
    /// `exp(-delta² / w²)`, per axis.
    pub factor: [Vec<f64>; 3],
}

/// How far atom contributions reach.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoff {
    /// Contributions are zero beyond this many atom radii.
    Truncated(f64),
    /// Every atom touches every voxel of its channel.
    Exact,
}

impl Default for Cutoff {
    /// Four radii: the dropped tail is below 1e-8.
    fn default() -> Self {
        Cutoff::Truncated(4.0)
    }
}

/// Where the molecule goes before voxelization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Translate the centroid to the grid center.
    #[default]
    Center,
    /// Use the coordinates as given, in the grid frame.
    AsIs,
}

/// What to do with atoms outside the grid extent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsPolicy {
    #[default]
    Error,
    /// Keep the atom; only the part of its density inside the grid is recorded.
    Clip,
}

/// Grid geometry plus element mapping and kernel options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Voxelizer {
    pub spec: GridSpec,
    pub elements: ElementSet,
    #[serde(default)]
    pub cutoff: Cutoff,
    #[serde(default)]
    pub bounds: BoundsPolicy,
}

impl Voxelizer {
    pub fn new(spec: GridSpec, elements: ElementSet) -> Result<Self> {
        spec.validate()?;
        if spec.channels != elements.len() {
            return Err(Error::invalid(format!(
                "grid has {} channels but {} elements",
                spec.channels,
                elements.len()
            )));
        }
        Ok(Voxelizer {
            spec,
            elements,
            cutoff: Cutoff::default(),
            bounds: BoundsPolicy::default(),
        })
    }

    pub fn with_cutoff(mut self, cutoff: Cutoff) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_bounds(mut self, bounds: BoundsPolicy) -> Self {
        self.bounds = bounds;
        self
    }

    /// Squared Gaussian width `(0.93 r)²`.
    pub fn width2(&self) -> f64 {
        let s = KERNEL_WIDTH_FACTOR * self.spec.atom_radius;
        s * s
    }

    /// Squared cutoff distance; infinite for [`Cutoff::Exact`].
    pub fn cutoff2(&self) -> f64 {
        match self.cutoff {
            Cutoff::Truncated(radii) => {
                let c = radii * self.spec.atom_radius;
                c * c
            }
            Cutoff::Exact => f64::INFINITY,
        }
    }

    /// Voxel index ranges that can lie within the cutoff of `p`. May include
    /// a few voxels beyond it; callers still test the squared distance.
    pub(crate) fn voxel_box(&self, p: [f64; 3]) -> [Range<usize>; 3] {
        let l = self.spec.length;
        match self.cutoff {
            Cutoff::Exact => [0..l, 0..l, 0..l],
            Cutoff::Truncated(radii) => {
                let reach = radii * self.spec.atom_radius;
                p.map(|x| {
                    let lo = ((x - reach - self.spec.origin()) / self.spec.resolution - 0.5).floor() - 1.0;
                    let hi = ((x + reach - self.spec.origin()) / self.spec.resolution - 0.5).ceil() + 1.0;
                    let lo = lo.clamp(0.0, l as f64) as usize;
                    let hi = (hi + 1.0).clamp(0.0, l as f64) as usize;
                    lo..hi.max(lo)
                })
            }
        }
    }

    /// Resolves channels and final positions for each atom, applying placement
    /// and the bounds policy.
    pub fn place(&self, mol: &Molecule, placement: Placement) -> Result<Vec<(usize, [f64; 3])>> {
        mol.validate()?;
        let shift = match placement {
            Placement::Center => {
                let c = mol.centroid();
                [-c[0], -c[1], -c[2]]
            }
            Placement::AsIs => [0.0; 3],
        };
        mol.atoms
            .iter()
            .enumerate()
            .map(|(index, a)| {
                let ch = self
                    .elements
                    .channel(a.element)
                    .ok_or_else(|| Error::UnknownChannel(a.element.to_string()))?;
                let p = molecule::add(a.position, shift);
                if self.bounds == BoundsPolicy::Error && !self.spec.contains(p) {
                    return Err(Error::OutOfBounds {
                        index,
                        x: p[0],
                        y: p[1],
                        z: p[2],
                    });
                }
                Ok((ch, p))
            })
            .collect()
    }

    /// Per-axis offsets and Gaussian factors for one atom. The kernel is
    /// separable, so `V = ex[i]·ey[j]·ez[k]` over the box.
    pub(crate) fn stencil(&self, p: [f64; 3]) -> Stencil {
        let width2 = self.width2();
        let ranges = self.voxel_box(p);
        let axis = |r: &Range<usize>, x: f64| -> (Vec<f64>, Vec<f64>) {
            let d: Vec<f64> = r.clone().map(|i| self.spec.axis_center(i) - x).collect();
            let e = d.iter().map(|d| gaussian(d * d, width2)).collect();
            (d, e)
        };
        let (dx, ex) = axis(&ranges[0], p[0]);
        let (dy, ey) = axis(&ranges[1], p[1]);
        let (dz, ez) = axis(&ranges[2], p[2]);
        Stencil {
            ranges,
            delta: [dx, dy, dz],
            factor: [ex, ey, ez],
        }
    }

    /// Occupancy in double precision for atoms already placed in the grid frame.
    pub fn occupancy(&self, atoms: &[(usize, [f64; 3])]) -> Vec<f64> {
        let spec = &self.spec;
        let cut2 = self.cutoff2();
        // complement product Π(1 - V), one per voxel
        let mut keep = vec![1.0f64; spec.size()];
        for &(ch, p) in atoms {
            let st = self.stencil(p);
            let [ri, rj, rk] = &st.ranges;
            let [dx, dy, dz] = &st.delta;
            let [ex, ey, ez] = &st.factor;
            for (a, i) in ri.clone().enumerate() {
                for (b, j) in rj.clone().enumerate() {
                    let dxy = dx[a] * dx[a] + dy[b] * dy[b];
                    let exy = ex[a] * ey[b];
                    let base = spec.index(ch, i, j, rk.start);
                    for c in 0..rk.len() {
                        if dxy + dz[c] * dz[c] <= cut2 {
                            keep[base + c] *= 1.0 - exy * ez[c];
                        }
                    }
                }
            }
        }
        for v in &mut keep {
            *v = 1.0 - *v;
        }
        keep
    }

    /// Voxelizes a molecule.
    pub fn voxelize(&self, mol: &Molecule, placement: Placement) -> Result<VoxelGrid> {
        let placed = self.place(mol, placement)?;
        let occ = self.occupancy(&placed);
        Ok(VoxelGrid {
            spec: self.spec,
            values: occ.into_iter().map(|v| v as f32).collect(),
        })
    }
}
