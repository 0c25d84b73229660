//! Atom recovery from occupancy grids.
//!
//! Voxels below the threshold are zeroed, per-channel local maxima of a
//! 3×3×3 maximum filter become atom candidates, and the candidates' positions
//! are refined by minimising `‖voxelize(atoms) - target‖²` with analytic
//! gradients of the voxelizer. Atom count and identities never change during
//! refinement.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gaussian, Atom, Molecule, VoxelGrid, Voxelizer};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub channel: usize,
    pub voxel: [usize; 3],
    pub value: f32,
}

/// Peaks ordered by channel, then by voxel index.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Steepest descent with backtracking (Armijo) line search.
    GradientDescent,
    /// Limited-memory BFGS with the same line search.
    Lbfgs { memory: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub threshold: f64,
    pub max_iterations: usize,
    /// Stop once an iteration lowers the error by less than this fraction.
    pub tolerance: f64,
    pub optimizer: Optimizer,
    /// Same-channel atoms closer than this many voxels after refinement are
    /// merged into one at their mean position.
    pub merge_voxels: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            threshold: 0.1,
            max_iterations: 200,
            tolerance: 1e-8,
            optimizer: Optimizer::GradientDescent,
            merge_voxels: 0.5,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid(format!("threshold must be in (0, 1), got {}", self.threshold)));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return Err(Error::invalid("tolerance must be non-negative"));
        }
        if let Optimizer::Lbfgs { memory: 0 } = self.optimizer {
            return Err(Error::invalid("L-BFGS memory must be at least 1"));
        }
        Ok(())
    }
}

/// Finds per-channel local maxima of the thresholded grid.
///
/// A voxel qualifies when it is nonzero after thresholding and no smaller
/// than any voxel of its (boundary-truncated) 3×3×3 neighbourhood. Adjacent
/// qualifying voxels form a plateau, of which only the lexicographically
/// smallest index is reported.
pub fn detect_peaks(grid: &VoxelGrid, cfg: &RefineConfig) -> Result<PeakSet> {
    cfg.validate()?;
    let spec = grid.spec();
    let l = spec.length as isize;
    let thr = cfg.threshold as f32;
    let mut peaks = Vec::new();
    for c in 0..spec.channels {
        let raw = grid.channel(c);
        let vals: Vec<f32> = raw.iter().map(|&v| if v >= thr { v } else { 0.0 }).collect();
        let at = |i: isize, j: isize, k: isize| ((i * l + j) * l + k) as usize;
        let neighbours = |idx: usize| {
            let (i, j, k) = ((idx as isize) / (l * l), (idx as isize / l) % l, idx as isize % l);
            (-1..=1)
                .flat_map(move |a| (-1..=1).flat_map(move |b| (-1..=1).map(move |d| (a, b, d))))
                .filter(|&o| o != (0, 0, 0))
                .map(move |(a, b, d)| (i + a, j + b, k + d))
                .filter(move |&(x, y, z)| x >= 0 && y >= 0 && z >= 0 && x < l && y < l && z < l)
                .map(move |(x, y, z)| at(x, y, z))
        };
        let candidate: Vec<bool> = (0..vals.len())
            .map(|idx| vals[idx] > 0.0 && neighbours(idx).all(|n| vals[idx] >= vals[n]))
            .collect();
        let mut seen = vec![false; vals.len()];
        let mut queue = VecDeque::new();
        for idx in 0..vals.len() {
            if !candidate[idx] || seen[idx] {
                continue;
            }
            // scanning in index order, so the first member of a plateau is its minimum
            let (_, i, j, k) = spec.unravel(c * spec.voxels() + idx);
            peaks.push(Peak {
                channel: c,
                voxel: [i, j, k],
                value: vals[idx],
            });
            seen[idx] = true;
            queue.push_back(idx);
            while let Some(cur) = queue.pop_front() {
                for n in neighbours(cur) {
                    if candidate[n] && !seen[n] {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
    }
    Ok(PeakSet { peaks })
}

/// `‖occupancy(atoms) - target‖²` summed over all channels and voxels.
pub fn reconstruction_error(voxelizer: &Voxelizer, target: &VoxelGrid, atoms: &[(usize, [f64; 3])]) -> Result<f64> {
    check_target(voxelizer, target)?;
    let occ = voxelizer.occupancy(atoms);
    Ok(squared_error(&occ, target))
}

fn check_target(voxelizer: &Voxelizer, target: &VoxelGrid) -> Result<()> {
    if *target.spec() != voxelizer.spec {
        return Err(Error::invalid("target grid geometry differs from the voxelizer's"));
    }
    Ok(())
}

fn squared_error(occ: &[f64], target: &VoxelGrid) -> f64 {
    occ.iter()
        .zip(target.values())
        .map(|(o, &t)| {
            let r = o - t as f64;
            r * r
        })
        .sum()
}

/// Reconstruction error and its gradient with respect to every atom position.
pub fn reconstruction_gradient(
    voxelizer: &Voxelizer,
    target: &VoxelGrid,
    atoms: &[(usize, [f64; 3])],
) -> Result<(f64, Vec<[f64; 3]>)> {
    check_target(voxelizer, target)?;
    let spec = &voxelizer.spec;
    let width2 = voxelizer.width2();
    let cut2 = voxelizer.cutoff2();
    let occ = voxelizer.occupancy(atoms);
    let err = squared_error(&occ, target);
    let tv = target.values();
    let mut grad = vec![[0.0; 3]; atoms.len()];
    for (n, &(ch, p)) in atoms.iter().enumerate() {
        let st = voxelizer.stencil(p);
        let [ri, rj, rk] = &st.ranges;
        let [dx, dy, dz] = &st.delta;
        let [ex, ey, ez] = &st.factor;
        let mut g = [0.0; 3];
        for (a, i) in ri.clone().enumerate() {
            for (b, j) in rj.clone().enumerate() {
                let dxy = dx[a] * dx[a] + dy[b] * dy[b];
                let exy = ex[a] * ey[b];
                let base = spec.index(ch, i, j, rk.start);
                for (c, k) in rk.clone().enumerate() {
                    if dxy + dz[c] * dz[c] > cut2 {
                        continue;
                    }
                    let idx = base + c;
                    let v = exy * ez[c];
                    let keep = 1.0 - occ[idx];
                    // product over the other atoms of this channel
                    let others = if 1.0 - v > 1e-6 {
                        keep / (1.0 - v)
                    } else {
                        leave_one_out(voxelizer, atoms, n, ch, spec.voxel_center(i, j, k))
                    };
                    let coef = 2.0 * (occ[idx] - tv[idx] as f64) * others * v * 2.0 / width2;
                    g[0] += coef * dx[a];
                    g[1] += coef * dy[b];
                    g[2] += coef * dz[c];
                }
            }
        }
        grad[n] = g;
    }
    Ok((err, grad))
}

fn leave_one_out(voxelizer: &Voxelizer, atoms: &[(usize, [f64; 3])], skip: usize, ch: usize, c: [f64; 3]) -> f64 {
    let width2 = voxelizer.width2();
    let cut2 = voxelizer.cutoff2();
    let mut keep = 1.0;
    for (m, &(mc, q)) in atoms.iter().enumerate() {
        if m == skip || mc != ch {
            continue;
        }
        let d2 = (c[0] - q[0]).powi(2) + (c[1] - q[1]).powi(2) + (c[2] - q[2]).powi(2);
        if d2 <= cut2 {
            keep *= 1.0 - gaussian(d2, width2);
        }
    }
    keep
}

/// Outcome of coordinate refinement.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub molecule: Molecule,
    pub initial_error: f64,
    pub final_error: f64,
    /// Error after every accepted iteration, starting with the initial one.
    pub history: Vec<f64>,
    /// Atoms removed by duplicate merging.
    pub merged: usize,
}

/// Places one atom per peak at its voxel center and optimises positions.
pub fn refine_coordinates(peaks: &PeakSet, target: &VoxelGrid, voxelizer: &Voxelizer, cfg: &RefineConfig) -> Result<Refinement> {
    cfg.validate()?;
    check_target(voxelizer, target)?;
    if peaks.is_empty() {
        let e = reconstruction_error(voxelizer, target, &[])?;
        return Ok(Refinement {
            molecule: Molecule::default(),
            initial_error: e,
            final_error: e,
            history: vec![e],
            merged: 0,
        });
    }
    let spec = &voxelizer.spec;
    let channels: Vec<usize> = peaks.peaks.iter().map(|p| p.channel).collect();
    let mut x: Vec<f64> = peaks
        .peaks
        .iter()
        .flat_map(|p| spec.voxel_center(p.voxel[0], p.voxel[1], p.voxel[2]))
        .collect();

    let eval = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let atoms: Vec<(usize, [f64; 3])> = channels
            .iter()
            .zip(x.chunks_exact(3))
            .map(|(&c, p)| (c, [p[0], p[1], p[2]]))
            .collect();
        let (f, g) = reconstruction_gradient(voxelizer, target, &atoms)?;
        Ok((f, g.into_iter().flatten().collect()))
    };

    let history = match cfg.optimizer {
        Optimizer::GradientDescent => minimize(&mut x, eval, cfg, 0, spec.resolution)?,
        Optimizer::Lbfgs { memory } => minimize(&mut x, eval, cfg, memory, spec.resolution)?,
    };

    let mut atoms: Vec<(usize, [f64; 3])> = channels
        .iter()
        .zip(x.chunks_exact(3))
        .map(|(&c, p)| (c, [p[0], p[1], p[2]]))
        .collect();
    let before = atoms.len();
    atoms = merge_duplicates(atoms, cfg.merge_voxels * spec.resolution);
    let merged = before - atoms.len();
    let final_error = if merged > 0 {
        reconstruction_error(voxelizer, target, &atoms)?
    } else {
        *history.last().unwrap()
    };
    let molecule = Molecule::new(
        atoms
            .into_iter()
            .map(|(c, p)| {
                let e = voxelizer
                    .elements
                    .element(c)
                    .ok_or_else(|| Error::invalid(format!("peak channel {c} has no element")))?;
                Ok(Atom::new(e, p))
            })
            .collect::<Result<_>>()?,
    );
    Ok(Refinement {
        molecule,
        initial_error: history[0],
        final_error,
        history,
        merged,
    })
}

/// Threshold, detect peaks and refine in one call.
pub fn extract_molecule(grid: &VoxelGrid, voxelizer: &Voxelizer, cfg: &RefineConfig) -> Result<Refinement> {
    let peaks = detect_peaks(grid, cfg)?;
    refine_coordinates(&peaks, grid, voxelizer, cfg)
}

fn merge_duplicates(atoms: Vec<(usize, [f64; 3])>, radius: f64) -> Vec<(usize, [f64; 3])> {
    let n = atoms.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for a in 0..n {
        for b in a + 1..n {
            if atoms[a].0 == atoms[b].0 && crate::grid::distance(atoms[a].1, atoms[b].1) < radius {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut out: Vec<(usize, [f64; 3], usize)> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = out.len();
            out.push((atoms[i].0, [0.0; 3], 0));
        }
        let o = &mut out[slot[r]];
        for k in 0..3 {
            o.1[k] += atoms[i].1[k];
        }
        o.2 += 1;
    }
    out.into_iter()
        .map(|(c, s, m)| (c, s.map(|v| v / m as f64)))
        .collect()
}

/// Line-searched descent; `memory = 0` is steepest descent, otherwise L-BFGS.
/// Returns the error after every accepted iterate.
fn minimize<F>(x: &mut [f64], mut eval: F, cfg: &RefineConfig, memory: usize, resolution: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    const ARMIJO: f64 = 1e-4;
    let (mut f, mut g) = eval(x)?;
    let mut history = vec![f];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    // first trial step moves the most-pulled atom by a tenth of a voxel
    let mut step_hint = f64::NAN;

    for _ in 0..cfg.max_iterations {
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax == 0.0 {
            break;
        }
        let mut dir = if memory == 0 { g.iter().map(|v| -v).collect() } else { lbfgs_direction(&g, &pairs) };
        let mut slope: f64 = dir.iter().zip(&g).map(|(d, g)| d * g).sum();
        if slope >= 0.0 {
            pairs.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        let dmax = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut alpha = if memory > 0 && !pairs.is_empty() {
            1.0
        } else if step_hint.is_finite() {
            2.0 * step_hint
        } else {
            0.1 * resolution / dmax
        };

        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(x, d)| x + alpha * d).collect();
            let (ft, gt) = eval(&trial)?;
            if ft.is_finite() && ft <= f + ARMIJO * alpha * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, ft, gt)) = accepted else {
            break;
        };
        if let Some(bad) = trial.iter().position(|v| !v.is_finite()) {
            return Err(Error::RefinementFailure { peak: bad / 3 });
        }
        if memory > 0 {
            let s: Vec<f64> = trial.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            if sy > 1e-12 {
                if pairs.len() == memory {
                    pairs.pop_front();
                }
                pairs.push_back((s, y, 1.0 / sy));
            }
        }
        step_hint = alpha;
        let decrease = f - ft;
        x.copy_from_slice(&trial);
        f = ft;
        g = gt;
        history.push(f);
        if decrease <= cfg.tolerance * history[history.len() - 2].abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(history)
}

fn lbfgs_direction(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * s.iter().zip(&q).map(|(s, q)| s * q).sum::<f64>();
        for (q, y) in q.iter_mut().zip(y) {
            *q -= a * y;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        let gamma = sy / yy;
        for q in q.iter_mut() {
            *q *= gamma;
        }
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = rho * y.iter().zip(&q).map(|(y, q)| y * q).sum::<f64>();
        for (q, s) in q.iter_mut().zip(s) {
            *q += (a - b) * s;
        }
    }
    q.into_iter().map(|v| -v).collect()
}
