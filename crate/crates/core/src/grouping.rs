//! Combinatorial grouping: connected tuples of up to four co-existing
//! regions from one hierarchy, ranked by the weakest member's height.

use std::cell::Cell;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::eval::jaccard_unchecked;
use crate::hierarchy::Ucm;
use crate::mask::Mask;
use crate::regiontree::Neighbors;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub hierarchy: usize,
    /// Ascending node ids.
    pub nodes: Vec<usize>,
    pub rank_key: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub id: String,
    pub proposals: Vec<Proposal>,
}

pub const TUPLE_NAMES: [&str; 4] = ["singletons", "pairs", "triplets", "quadruples"];

/// The smallest level whose candidate set (nodes with height at or above
/// it) fits in `budget`. Every node qualifies at the lowest level.
pub fn floor_for_budget(u: &Ucm, budget: usize) -> f64 {
    let levels = u.levels();
    let Some(&top) = levels.last() else {
        return 0.0;
    };
    let mut heights: Vec<f64> = (0..u.node_count()).map(|n| u.height(n)).collect();
    heights.sort_by(|a, b| b.total_cmp(a));
    let mut floor = top;
    for &l in levels.iter().rev() {
        let count = heights.partition_point(|&h| h >= l);
        if count > budget {
            break;
        }
        floor = l;
    }
    floor
}

fn coexist(u: &Ucm, nodes: &[usize]) -> bool {
    let birth = nodes.iter().map(|&n| u.birth(n)).fold(f64::NEG_INFINITY, f64::max);
    let height = nodes.iter().map(|&n| u.height(n)).fold(f64::INFINITY, f64::min);
    birth < height
}

fn rank_key(u: &Ucm, nodes: &[usize]) -> f64 {
    nodes.iter().map(|&n| u.height(n)).fold(f64::INFINITY, f64::min)
}

/// One ranked list per tuple size `1..=max_tuple`. Candidates are nodes of
/// height at least `neighbors.floor`; a tuple is a set of candidates that
/// co-exist in one cut and form a connected group there.
pub fn enumerate_tuples(
    u: &Ucm,
    neighbors: &Neighbors,
    hierarchy: usize,
    max_tuple: usize,
    stem: &str,
) -> Result<Vec<RankedList>> {
    if !(1..=4).contains(&max_tuple) {
        return param("max_tuple must be between 1 and 4");
    }
    let floor = neighbors.floor;
    let candidates: Vec<usize> = (0..u.node_count()).filter(|&n| u.height(n) >= floor).collect();
    let mut layers: Vec<BTreeSet<Vec<usize>>> = vec![candidates.iter().map(|&n| vec![n]).collect()];
    for _ in 1..max_tuple {
        let mut next = BTreeSet::new();
        for set in layers.last().expect("non-empty") {
            for &n in set {
                for &x in neighbors.sets[n].iter().flatten() {
                    if set.contains(&x) || u.height(x) < floor {
                        continue;
                    }
                    let mut grown = set.clone();
                    grown.push(x);
                    grown.sort_unstable();
                    if coexist(u, &grown) {
                        next.insert(grown);
                    }
                }
            }
        }
        layers.push(next);
    }
    Ok(layers
        .into_iter()
        .enumerate()
        .map(|(k, sets)| {
            let mut proposals: Vec<Proposal> = sets
                .into_iter()
                .map(|nodes| Proposal { hierarchy, rank_key: rank_key(u, &nodes), nodes })
                .collect();
            // sets arrive in lexicographic order; the stable sort keeps it among ties
            proposals.sort_by(|a, b| b.rank_key.total_cmp(&a.rank_key));
            RankedList { id: format!("{stem}/{}", TUPLE_NAMES[k]), proposals }
        })
        .collect())
}

thread_local! {
    static MASKS_BUILT: Cell<u64> = const { Cell::new(0) };
}

/// Number of proposal masks materialized on this thread so far.
pub fn masks_built() -> u64 {
    MASKS_BUILT.with(Cell::get)
}

/// Pixel mask of the union of a node set.
pub fn nodes_mask(u: &Ucm, nodes: &[usize]) -> Result<Mask> {
    if let Some(&bad) = nodes.iter().find(|&&n| n >= u.node_count()) {
        return param(format!("node {bad} does not exist in this hierarchy"));
    }
    MASKS_BUILT.with(|c| c.set(c.get() + 1));
    let mut on = vec![false; u.leaf_count()];
    for &n in nodes {
        for &l in u.leaves(n) {
            on[l] = true;
        }
    }
    let finest = u.finest();
    Ok(Mask::from_fn(finest.dims, |i| on[finest.labels[i] as usize]))
}

pub fn proposal_mask(p: &Proposal, u: &Ucm) -> Result<Mask> {
    nodes_mask(u, &p.nodes)
}

/// Indices of masks kept by a greedy first-wins pass: a mask survives iff
/// its Jaccard with every earlier survivor is at most `threshold`.
pub fn dedup_masks(masks: &[Mask], threshold: f64) -> Result<Vec<usize>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return param("dedup threshold must lie in (0, 1]");
    }
    let mut kept: Vec<usize> = Vec::new();
    let counts: Vec<u64> = masks.iter().map(Mask::count).collect();
    for (i, m) in masks.iter().enumerate() {
        let dup = kept.iter().any(|&j| {
            let (a, b) = (counts[i].min(counts[j]), counts[i].max(counts[j]));
            // J <= min/max area, so small ratios cannot exceed the threshold
            (a as f64) > threshold * b as f64 && jaccard_unchecked(m, &masks[j]) > threshold
        });
        if !dup {
            kept.push(i);
        }
    }
    Ok(kept)
}

/// Greedy deduplication of proposals drawn from `hierarchies`.
pub fn dedup(pool: &[Proposal], hierarchies: &[Ucm], threshold: f64) -> Result<Vec<Proposal>> {
    let masks = pool
        .iter()
        .map(|p| match hierarchies.get(p.hierarchy) {
            Some(u) => proposal_mask(p, u),
            None => param(format!("hierarchy {} does not exist", p.hierarchy)),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(dedup_masks(&masks, threshold)?.into_iter().map(|i| pool[i].clone()).collect())
}
