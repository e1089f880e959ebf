//! Proposal features from tree descriptors, overlap regression and
//! diversified ranking.

use crate::error::{param, Result};
use crate::eval::jaccard_unchecked;
use crate::forest::{train_forest, ForestConfig, OverlapRegressor};
use crate::grouping::Proposal;
use crate::hierarchy::Ucm;
use crate::mask::Mask;
use crate::regiontree::RegionTree;

pub const FEATURE_NAMES: [&str; 16] = [
    "area",
    "perimeter",
    "bbox_area",
    "bbox_center_x",
    "bbox_center_y",
    "bbox_aspect",
    "area_balance",
    "perimeter_over_sqrt_area",
    "strength_over_sqrt_area",
    "area_over_bbox_area",
    "strength_sum",
    "mean_strength",
    "min_appearance",
    "max_appearance",
    "min_disappearance",
    "max_disappearance",
];

pub type FeatureVector = [f64; 16];

/// Features of a node tuple, from descriptors only. Union perimeter and
/// boundary strength subtract twice the boundary shared by each member
/// pair. Appearance is the birth strength (0 for leaves); disappearance is
/// the height, with the root's taken as the hierarchy's top strength.
pub fn compute_features(p: &Proposal, tree: &RegionTree, u: &Ucm) -> Result<FeatureVector> {
    if p.nodes.is_empty() {
        return param("proposal has no nodes");
    }
    if let Some(&bad) = p.nodes.iter().find(|&&n| n >= u.node_count()) {
        return param(format!("node {bad} does not exist in this hierarchy"));
    }
    let dims = u.dims();
    let nodes = &p.nodes;
    let area: u64 = nodes.iter().map(|&n| tree.areas[n]).sum();
    let mut perimeter: u64 = nodes.iter().map(|&n| tree.perimeters[n]).sum();
    let mut strength: f64 = nodes.iter().map(|&n| tree.strength_sums[n]).sum();
    for (i, &a) in nodes.iter().enumerate() {
        for &b in &nodes[i + 1..] {
            let sh = tree.pairs.shared_between(u, a, b);
            perimeter -= 2 * sh.edges;
            strength -= 2.0 * sh.strength;
        }
    }
    let strength = strength.max(0.0);
    let mut bb = (usize::MAX, usize::MAX, 0, 0);
    for &n in nodes {
        let b = tree.bboxes[n];
        bb = (bb.0.min(b.0), bb.1.min(b.1), bb.2.max(b.2), bb.3.max(b.3));
    }
    let (bh, bw) = ((bb.2 - bb.0 + 1) as f64, (bb.3 - bb.1 + 1) as f64);
    let areas: Vec<f64> = nodes.iter().map(|&n| tree.areas[n] as f64).collect();
    let top = u.max_lambda();
    let appear: Vec<f64> = nodes.iter().map(|&n| if u.is_leaf(n) { 0.0 } else { u.birth(n) }).collect();
    let disappear: Vec<f64> = nodes.iter().map(|&n| u.height(n).min(top)).collect();
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a = area as f64;
    let per = perimeter as f64;
    Ok([
        a,
        per,
        bh * bw,
        ((bb.1 + bb.3) as f64 / 2.0 + 0.5) / dims.width as f64,
        ((bb.0 + bb.2) as f64 / 2.0 + 0.5) / dims.height as f64,
        bw / bh,
        min(&areas) / max(&areas),
        per / a.sqrt(),
        strength / a.sqrt(),
        a / (bh * bw),
        strength,
        if per > 0.0 { strength / per } else { 0.0 },
        min(&appear),
        max(&appear),
        min(&disappear),
        max(&disappear),
    ])
}

/// Forest regressing best ground-truth overlap from features.
pub fn train_regressor(
    rows: &[(FeatureVector, f64)],
    config: &ForestConfig,
    seed: u64,
) -> Result<OverlapRegressor> {
    let rows: Vec<(Vec<f64>, f64)> = rows.iter().map(|(x, y)| (x.to_vec(), *y)).collect();
    train_forest(&rows, &FEATURE_NAMES, config, seed)
}

/// Maximum marginal relevance order: repeatedly take the remaining item
/// maximizing `(1 - mmr) * score - mmr * (max Jaccard with those taken)`,
/// earliest on ties. Returns pool indices.
pub fn score_and_rank(masks: &[Mask], scores: &[f64], mmr_lambda: f64) -> Result<Vec<usize>> {
    if masks.len() != scores.len() {
        return param("one score per proposal is required");
    }
    if !(0.0..=1.0).contains(&mmr_lambda) {
        return param("mmr_lambda must lie in [0, 1]");
    }
    let n = masks.len();
    if mmr_lambda == 0.0 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        return Ok(order);
    }
    let mut redundancy = vec![0.0f64; n];
    let mut taken = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best: Option<(f64, usize)> = None;
        for i in (0..n).filter(|&i| !taken[i]) {
            let v = (1.0 - mmr_lambda) * scores[i] - mmr_lambda * redundancy[i];
            if best.is_none_or(|b| v > b.0) {
                best = Some((v, i));
            }
        }
        let (_, pick) = best.expect("items remain");
        taken[pick] = true;
        order.push(pick);
        for i in (0..n).filter(|&i| !taken[i]) {
            redundancy[i] = redundancy[i].max(jaccard_unchecked(&masks[i], &masks[pick]));
        }
    }
    Ok(order)
}
