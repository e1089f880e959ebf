//! Moving partitions and hierarchies between resolutions, and merging
//! aligned per-scale hierarchies into one multiscale hierarchy.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::contour::ContourMap;
use crate::error::{param, Result};
use crate::grid::Dims;
use crate::hierarchy::{build_ucm, ucm_strength_grid, Ucm};
use crate::image::LabelMap;
use crate::mask::nearest_source;

/// Sigmoid applied to combined boundary strengths: `1 / (1 + exp(-(a x + b)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub a: f64,
    pub b: f64,
}

impl Calibration {
    pub fn apply(&self, x: f64) -> f64 {
        1.0 / (1.0 + (-(self.a * x + self.b)).exp())
    }
}

/// Relabels every region of `s` with the majority label of `r` over its
/// pixels (ties go to the smaller `r` label). Output is canonical.
pub fn project(r: &LabelMap, s: &LabelMap) -> Result<LabelMap> {
    if r.dims != s.dims {
        return param("project: label maps differ in size");
    }
    let mut tally: BTreeMap<u32, BTreeMap<u32, u64>> = BTreeMap::new();
    for (&sl, &rl) in s.labels.iter().zip(&r.labels) {
        *tally.entry(sl).or_default().entry(rl).or_insert(0) += 1;
    }
    let mode: BTreeMap<u32, u32> = tally
        .into_iter()
        .map(|(sl, counts)| {
            let mut best = (0u64, 0u32);
            for (rl, c) in counts {
                // ascending r labels, so strict > keeps the smaller on ties
                if c > best.0 {
                    best = (c, rl);
                }
            }
            (sl, best.1)
        })
        .collect();
    let labels = s.labels.iter().map(|l| mode[l]).collect();
    Ok(LabelMap { dims: s.dims, labels }.canonicalize())
}

fn rescale_raw(s: &LabelMap, target: Dims) -> LabelMap {
    if s.dims == target {
        return s.clone();
    }
    let rows: Vec<usize> =
        (0..target.height).map(|y| nearest_source(y, s.dims.height, target.height)).collect();
    let cols: Vec<usize> =
        (0..target.width).map(|x| nearest_source(x, s.dims.width, target.width)).collect();
    let mut labels = Vec::with_capacity(target.len());
    for &sy in &rows {
        for &sx in &cols {
            labels.push(s.labels[s.dims.index(sy, sx)]);
        }
    }
    LabelMap { dims: target, labels }
}

/// Nearest-neighbour resampling with pixel-centre alignment; canonical.
pub fn rescale_segmentation(s: &LabelMap, target: Dims) -> Result<LabelMap> {
    if target.is_empty() {
        return param("rescale target must be at least 1x1");
    }
    Ok(rescale_raw(s, target).canonicalize())
}

/// Snaps a hierarchy onto `target` superpixels, possibly at another
/// resolution.
///
/// For each level of `u` the partition in force just below it is rescaled,
/// projected onto the superpixels, and its boundary is stamped with the
/// level. Superpixel pairs never separated merge at 0. The stamped
/// boundaries are re-read as a hierarchy over `target`.
pub fn align_ucm(u: &Ucm, target: &LabelMap) -> Result<Ucm> {
    if !target.is_canonical() {
        return param("target superpixels must be canonical");
    }
    let dims = target.dims;
    let src = rescale_raw(u.finest(), dims);
    let kt = target.region_count();

    // leaf tallies per superpixel, and the row-major rank of each leaf's
    // first pixel (which orders labels in the canonical sampled map)
    let mut tally: Vec<BTreeMap<usize, u64>> = vec![BTreeMap::new(); kt];
    let mut first = vec![usize::MAX; u.node_count()];
    for (i, (&leaf, &sp)) in src.labels.iter().zip(&target.labels).enumerate() {
        let leaf = leaf as usize;
        *tally[sp as usize].entry(leaf).or_insert(0) += 1;
        if first[leaf] == usize::MAX {
            first[leaf] = i;
        }
    }
    for m in u.merges() {
        first[m.id] = m.children.iter().map(|&c| first[c]).min().unwrap_or(usize::MAX);
    }
    let tally: Vec<Vec<(usize, u64)>> =
        tally.into_iter().map(|t| t.into_iter().collect()).collect();

    let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in dims.edges() {
        let (a, b) = (target.labels[e.a] as usize, target.labels[e.b] as usize);
        if a != b {
            pairs.insert((a.min(b), a.max(b)), 0.0);
        }
    }

    let mut below = f64::NEG_INFINITY;
    let mut label = vec![0usize; kt];
    let mut votes: BTreeMap<usize, u64> = BTreeMap::new();
    for t in u.levels() {
        let rep = u.representatives(below);
        for (sp, leaves) in tally.iter().enumerate() {
            votes.clear();
            for &(leaf, c) in leaves {
                *votes.entry(rep[leaf]).or_insert(0) += c;
            }
            let mut best: Option<(u64, usize, usize)> = None;
            for (&node, &c) in &votes {
                let better = match best {
                    None => true,
                    Some((bc, bf, _)) => c > bc || (c == bc && first[node] < bf),
                };
                if better {
                    best = Some((c, first[node], node));
                }
            }
            label[sp] = best.map_or(usize::MAX, |b| b.2);
        }
        for (&(a, b), s) in pairs.iter_mut() {
            if label[a] != label[b] {
                *s = t;
            }
        }
        below = t;
    }
    Ucm::from_pair_strengths(target.clone(), &pairs)
}

/// Weighted mean of aligned strength grids, optionally calibrated, then
/// re-agglomerated by minimum mean boundary strength.
pub fn multiscale_combine(
    aligned: &[Ucm],
    weights: &[f64],
    calibration: Option<Calibration>,
) -> Result<Ucm> {
    let Some(first) = aligned.first() else {
        return param("multiscale_combine needs at least one hierarchy");
    };
    if weights.len() != aligned.len() {
        return param("one weight per hierarchy is required");
    }
    if weights.iter().any(|&w| w.is_nan() || w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return param("weights must be non-negative and sum to 1");
    }
    if aligned.iter().any(|u| u.finest() != first.finest()) {
        return param("hierarchies do not share one finest partition");
    }
    if aligned.len() == 1 && calibration.is_none() {
        return Ok(first.clone());
    }
    let grids: Vec<ContourMap> = aligned.iter().map(ucm_strength_grid).collect();
    let refs: Vec<&ContourMap> = grids.iter().collect();
    let mut combined = ContourMap::linear_combination(&refs, weights)?;
    if let Some(c) = calibration {
        for v in combined.strength.iter_mut() {
            *v = c.apply(*v);
        }
    }
    build_ucm(first.finest(), &combined)
}

/// Distinct non-zero merge strengths of a hierarchy.
pub fn nonzero_levels(u: &Ucm) -> BTreeSet<u64> {
    u.levels().into_iter().filter(|&l| l != 0.0).map(f64::to_bits).collect()
}
