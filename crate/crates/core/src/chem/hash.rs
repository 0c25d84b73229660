use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::MolecularGraph;

/// Permutation-invariant identifier from Weisfeiler–Lehman refinement.
///
/// Atoms start labelled by (element, degree). Each round relabels every atom
/// by its own label plus the sorted multiset of `(bond order, neighbour
/// label)`; new labels are ranks of the sorted distinct signatures, so they
/// depend only on the graph and not on atom order. The digest covers the
/// sorted signature multiset of every round, for `max(|V|, 1)` rounds.
/// Coordinates are ignored. Like any 1-WL key it cannot separate some
/// regular graphs (e.g. a 6-ring from two 3-rings with identical labels).
pub fn canonical_hash(g: &MolecularGraph) -> String {
    let adj = g.adjacency();
    let n = g.len();
    let mut hasher = Sha256::new();
    hasher.update((n as u64).to_le_bytes());
    hasher.update((g.bonds().len() as u64).to_le_bytes());

    let initial: Vec<(String, usize)> = g
        .elements()
        .iter()
        .zip(&adj)
        .map(|(e, nb)| (e.symbol().to_string(), nb.len()))
        .collect();
    let mut labels = relabel(&initial);
    let mut sorted = initial.clone();
    sorted.sort();
    for (sym, deg) in &sorted {
        hasher.update(format!("{sym}:{deg};").as_bytes());
    }

    for _ in 0..n.max(1) {
        let signatures: Vec<(u32, Vec<(u8, u32)>)> = (0..n)
            .map(|a| {
                let mut nb: Vec<(u8, u32)> = adj[a].iter().map(|&(b, o)| (o, labels[b])).collect();
                nb.sort_unstable();
                (labels[a], nb)
            })
            .collect();
        let mut sorted = signatures.clone();
        sorted.sort();
        hasher.update(b"|");
        for (own, nb) in &sorted {
            hasher.update(own.to_le_bytes());
            for (o, l) in nb {
                hasher.update([*o]);
                hasher.update(l.to_le_bytes());
            }
            hasher.update(b";");
        }
        let next = relabel(&signatures);
        let stable = count_distinct(&next) == count_distinct(&labels);
        labels = next;
        if stable {
            // the partition stopped refining; later rounds add no information
            // but are still folded in so the digest has a fixed shape
            continue;
        }
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn relabel<T: Ord + Clone>(signatures: &[T]) -> Vec<u32> {
    let mut ids: BTreeMap<T, u32> = signatures.iter().cloned().map(|s| (s, 0)).collect();
    for (rank, id) in ids.values_mut().enumerate() {
        *id = rank as u32;
    }
    signatures.iter().map(|s| ids[s]).collect()
}

fn count_distinct(labels: &[u32]) -> usize {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}
