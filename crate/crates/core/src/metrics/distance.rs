use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MASS_TOLERANCE: f64 = 1e-9;

/// Probability masses over string labels.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct CategoricalHistogram {
    bins: BTreeMap<String, f64>,
}

impl CategoricalHistogram {
    /// Wraps masses that must already sum to one.
    pub fn new(bins: BTreeMap<String, f64>) -> Result<Self> {
        check_masses(&bins)?;
        Ok(CategoricalHistogram { bins })
    }

    /// Normalizes raw counts. Fails when the total is zero.
    pub fn from_counts<L, I>(counts: I) -> Result<Self>
    where
        L: Into<String>,
        I: IntoIterator<Item = (L, usize)>,
    {
        let mut raw: BTreeMap<String, usize> = BTreeMap::new();
        for (label, n) in counts {
            *raw.entry(label.into()).or_insert(0) += n;
        }
        let total: usize = raw.values().sum();
        if total == 0 {
            return Err(Error::invalid("histogram has no observations"));
        }
        let bins = raw
            .into_iter()
            .filter(|&(_, n)| n > 0)
            .map(|(l, n)| (l, n as f64 / total as f64))
            .collect();
        Ok(CategoricalHistogram { bins })
    }

    pub fn mass(&self, label: &str) -> f64 {
        self.bins.get(label).copied().unwrap_or(0.0)
    }

    pub fn bins(&self) -> &BTreeMap<String, f64> {
        &self.bins
    }
}

impl TryFrom<BTreeMap<String, f64>> for CategoricalHistogram {
    type Error = Error;
    fn try_from(bins: BTreeMap<String, f64>) -> Result<Self> {
        CategoricalHistogram::new(bins)
    }
}

impl From<CategoricalHistogram> for BTreeMap<String, f64> {
    fn from(h: CategoricalHistogram) -> Self {
        h.bins
    }
}

fn check_masses(bins: &BTreeMap<String, f64>) -> Result<()> {
    if let Some((label, m)) = bins.iter().find(|(_, m)| !(m.is_finite() && **m >= 0.0)) {
        return Err(Error::invalid(format!("bin `{label}` has invalid mass {m}")));
    }
    let total: f64 = bins.values().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::invalid(format!("histogram masses sum to {total}, not 1")));
    }
    Ok(())
}

/// `Σ_x |a(x) - b(x)|` over the union of labels, in `[0, 2]`.
///
/// ```
/// use molvox::metrics::{total_variation, CategoricalHistogram};
/// let a = CategoricalHistogram::from_counts([("A", 1), ("B", 1)]).unwrap();
/// let b = CategoricalHistogram::from_counts([("A", 1)]).unwrap();
/// assert_eq!(total_variation(&a, &b).unwrap(), 1.0);
/// ```
pub fn total_variation(a: &CategoricalHistogram, b: &CategoricalHistogram) -> Result<f64> {
    check_masses(&a.bins)?;
    check_masses(&b.bins)?;
    let labels: BTreeSet<&String> = a.bins.keys().chain(b.bins.keys()).collect();
    Ok(labels.into_iter().map(|l| (a.mass(l) - b.mass(l)).abs()).sum())
}

/// Finite scalar observations kept in ascending order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmpiricalSamples {
    values: Vec<f64>,
}

impl EmpiricalSamples {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample {v}")));
        }
        values.sort_by(f64::total_cmp);
        Ok(EmpiricalSamples { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Every sample multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        EmpiricalSamples::new(self.values.iter().map(|v| v * c).collect())
    }
}

impl TryFrom<Vec<f64>> for EmpiricalSamples {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        EmpiricalSamples::new(v)
    }
}

impl From<EmpiricalSamples> for Vec<f64> {
    fn from(s: EmpiricalSamples) -> Self {
        s.values
    }
}

/// Earth-mover distance between two empirical distributions on the line.
///
/// Equal sizes use the sorted pairing; otherwise `∫|F_a - F_b|` is summed
/// exactly over the merged breakpoints.
pub fn wasserstein1(a: &EmpiricalSamples, b: &EmpiricalSamples) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("wasserstein distance needs non-empty samples"));
    }
    let (x, y) = (&a.values, &b.values);
    if x.len() == y.len() {
        let total: f64 = x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum();
        return Ok(total / x.len() as f64);
    }
    let (n, m) = (x.len() as u128, y.len() as u128);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = x[0].min(y[0]);
    let mut total = 0.0;
    while i < x.len() || j < y.len() {
        let next = match (x.get(i), y.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        // CDF gap on [prev, next): |i/n - j/m| = |i·m - j·n| / (n·m)
        let gap = (i as u128 * m).abs_diff(j as u128 * n);
        total += gap as f64 * (next - prev);
        prev = next;
        while i < x.len() && x[i] == next {
            i += 1;
        }
        while j < y.len() && y[j] == next {
            j += 1;
        }
    }
    Ok(total / (n * m) as f64)
}

/// One label's contribution to [`weighted_w1`].
#[derive(Clone, Debug, PartialEq)]
pub struct W1Group {
    pub weight: f64,
    pub reference: EmpiricalSamples,
    /// `None` (or empty) when the generated set has no samples for the label.
    pub generated: Option<EmpiricalSamples>,
}

/// `Σ_x w(x) · W₁(generated_x, reference_x)`.
///
/// A label missing on the generated side is charged the largest W₁ among the
/// labels that are present. When no label is present each missing one is
/// charged the mean absolute value of its reference samples, the cost of
/// moving that mass to zero.
pub fn weighted_w1(groups: &BTreeMap<String, W1Group>) -> Result<f64> {
    if let Some((l, g)) = groups.iter().find(|(_, g)| !(g.weight.is_finite() && g.weight >= 0.0)) {
        return Err(Error::invalid(format!("group `{l}` has invalid weight {}", g.weight)));
    }
    let wsum: f64 = groups.values().map(|g| g.weight).sum();
    if (wsum - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::invalid(format!("group weights sum to {wsum}, not 1")));
    }
    let mut observed = Vec::new();
    let mut missing = Vec::new();
    for g in groups.values() {
        match &g.generated {
            Some(s) if !s.is_empty() => observed.push((g.weight, wasserstein1(s, &g.reference)?)),
            _ => missing.push(g),
        }
    }
    let mut total: f64 = observed.iter().map(|(w, d)| w * d).sum();
    let penalty = observed.iter().map(|&(_, d)| d).fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))));
    for g in missing {
        let charge = match penalty {
            Some(p) => p,
            None if g.reference.is_empty() => 0.0,
            None => g.reference.values().iter().map(|v| v.abs()).sum::<f64>() / g.reference.len() as f64,
        };
        total += g.weight * charge;
    }
    Ok(total)
}
