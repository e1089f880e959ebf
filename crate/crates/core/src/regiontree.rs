//! Per-node region descriptors computed by propagation up (and, for
//! neighbours, down) the dendrogram instead of per-partition pixel scans.

use std::collections::{BTreeMap, BTreeSet};

use crate::contour::ContourMap;
use crate::error::{param, Result};
use crate::hierarchy::Ucm;

/// `(min_row, min_col, max_row, max_col)`, inclusive.
pub type BBox = (usize, usize, usize, usize);

/// Shared boundary between two leaves: unit edge count and summed strength.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Shared {
    pub edges: u64,
    pub strength: f64,
}

/// Boundary statistics of every adjacent leaf pair, from one edge scan.
#[derive(Debug, Clone)]
pub struct LeafPairs {
    pub table: BTreeMap<(usize, usize), Shared>,
    adjacent: Vec<Vec<(usize, Shared)>>,
    /// Unit image-border edges per leaf.
    pub border: Vec<u64>,
}

impl LeafPairs {
    pub fn build(u: &Ucm, grid: &ContourMap) -> Result<Self> {
        let finest = u.finest();
        if grid.dims != finest.dims {
            return param("strength grid and hierarchy differ in size");
        }
        let k = u.leaf_count();
        let mut table: BTreeMap<(usize, usize), Shared> = BTreeMap::new();
        for (e, s) in grid.edges() {
            let (a, b) = (finest.labels[e.a] as usize, finest.labels[e.b] as usize);
            if a != b {
                let sh = table.entry((a.min(b), a.max(b))).or_default();
                sh.edges += 1;
                sh.strength += s;
            }
        }
        let mut adjacent = vec![Vec::new(); k];
        for (&(a, b), &sh) in &table {
            adjacent[a].push((b, sh));
            adjacent[b].push((a, sh));
        }
        let mut border = vec![0u64; k];
        for (i, &l) in finest.labels.iter().enumerate() {
            border[l as usize] += finest.dims.border_edges(i);
        }
        Ok(LeafPairs { table, adjacent, border })
    }

    /// Total boundary shared by two disjoint nodes.
    pub fn shared_between(&self, u: &Ucm, a: usize, b: usize) -> Shared {
        let (small, big) = if u.leaves(a).len() <= u.leaves(b).len() { (a, b) } else { (b, a) };
        let span = u.leaf_span(big);
        let mut out = Shared::default();
        for &l in u.leaves(small) {
            for &(m, sh) in &self.adjacent[l] {
                let pos = u.leaf_span(m).0;
                if span.0 <= pos && pos < span.1 {
                    out.edges += sh.edges;
                    out.strength += sh.strength;
                }
            }
        }
        out
    }

    pub fn touches(&self, u: &Ucm, a: usize, b: usize) -> bool {
        let (small, big) = if u.leaves(a).len() <= u.leaves(b).len() { (a, b) } else { (b, a) };
        let span = u.leaf_span(big);
        u.leaves(small).iter().any(|&l| {
            self.adjacent[l].iter().any(|&(m, _)| {
                let pos = u.leaf_span(m).0;
                span.0 <= pos && pos < span.1
            })
        })
    }
}

/// Node areas plus the number of element touches spent: one per pixel and
/// one per merge.
pub fn compute_areas_counted(u: &Ucm) -> (Vec<u64>, u64) {
    let mut areas = vec![0u64; u.node_count()];
    let mut touches = 0u64;
    for &l in &u.finest().labels {
        areas[l as usize] += 1;
        touches += 1;
    }
    for m in u.merges() {
        areas[m.id] = m.children.iter().map(|&c| areas[c]).sum();
        touches += 1;
    }
    (areas, touches)
}

pub fn compute_areas(u: &Ucm) -> Vec<u64> {
    compute_areas_counted(u).0
}

pub fn compute_bboxes(u: &Ucm) -> Vec<BBox> {
    let finest = u.finest();
    let mut boxes = vec![(usize::MAX, usize::MAX, 0, 0); u.node_count()];
    for (i, &l) in finest.labels.iter().enumerate() {
        let (y, x) = finest.dims.coords(i);
        let b = &mut boxes[l as usize];
        *b = (b.0.min(y), b.1.min(x), b.2.max(y), b.3.max(x));
    }
    for m in u.merges() {
        let mut b = (usize::MAX, usize::MAX, 0, 0);
        for &c in &m.children {
            let cb = boxes[c];
            b = (b.0.min(cb.0), b.1.min(cb.1), b.2.max(cb.2), b.3.max(cb.3));
        }
        boxes[m.id] = b;
    }
    boxes
}

/// Perimeter (unit edges against the complement, image border included)
/// and summed boundary strength of every node.
pub fn compute_perimeters(u: &Ucm, pairs: &LeafPairs) -> (Vec<u64>, Vec<f64>) {
    let total = u.node_count();
    let mut perim = vec![0u64; total];
    let mut strength = vec![0.0f64; total];
    let mut inner = vec![Shared::default(); total];
    for (l, &b) in pairs.border.iter().enumerate() {
        perim[l] = b;
    }
    for (&(a, b), sh) in &pairs.table {
        for l in [a, b] {
            perim[l] += sh.edges;
            strength[l] += sh.strength;
        }
        let z = u.lca(a, b);
        inner[z].edges += sh.edges;
        inner[z].strength += sh.strength;
    }
    for m in u.merges() {
        let p: u64 = m.children.iter().map(|&c| perim[c]).sum();
        let s: f64 = m.children.iter().map(|&c| strength[c]).sum();
        perim[m.id] = p - 2 * inner[m.id].edges;
        strength[m.id] = (s - 2.0 * inner[m.id].strength).max(0.0);
    }
    (perim, strength)
}

/// Geometric neighbours of every node over the cuts at or above the floor.
#[derive(Debug, Clone)]
pub struct Neighbors {
    pub floor: f64,
    /// `None` for nodes never reached by the top-down expansion.
    pub sets: Vec<Option<Vec<usize>>>,
}

impl Neighbors {
    /// Neighbours of `n` in the cut at `t`.
    pub fn at(&self, u: &Ucm, n: usize, t: f64) -> Vec<usize> {
        self.sets[n]
            .iter()
            .flatten()
            .copied()
            .filter(|&m| u.birth(m) <= t && t < u.height(m))
            .collect()
    }
}

/// Top-down neighbour expansion. Starting from the root, every group of
/// merges sharing a strength `>= floor` is split into its children; a child
/// inherits the neighbours of its parent that it actually touches, plus its
/// touching siblings.
pub fn compute_neighbors(u: &Ucm, pairs: &LeafPairs, floor: f64) -> Neighbors {
    let total = u.node_count();
    let mut sets: Vec<Option<BTreeSet<usize>>> = vec![None; total];
    let mut cur: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); total];
    if total == 0 {
        return Neighbors { floor, sets: Vec::new() };
    }
    sets[u.root()] = Some(BTreeSet::new());
    let merges = u.merges();
    let mut end = merges.len();
    while end > 0 {
        let lambda = merges[end - 1].lambda;
        if lambda < floor {
            break;
        }
        let mut start = end;
        while start > 0 && merges[start - 1].lambda == lambda {
            start -= 1;
        }
        let group = &merges[start..end];
        let expanded: BTreeSet<usize> = group.iter().map(|m| m.id).collect();
        let replace = |q: usize| -> Vec<usize> {
            if expanded.contains(&q) { u.children(q).to_vec() } else { vec![q] }
        };
        let mut fresh: Vec<(usize, BTreeSet<usize>)> = Vec::new();
        for m in group {
            for &c in &m.children {
                let mut cand: BTreeSet<usize> = m.children.iter().copied().filter(|&s| s != c).collect();
                for &q in &cur[m.id] {
                    cand.extend(replace(q));
                }
                let set = cand.into_iter().filter(|&x| pairs.touches(u, c, x)).collect();
                fresh.push((c, set));
            }
        }
        for m in group {
            let old = std::mem::take(&mut cur[m.id]);
            for q in old {
                if !expanded.contains(&q) {
                    cur[q].remove(&m.id);
                }
            }
        }
        for (c, set) in fresh {
            for &x in &set {
                if !expanded.contains(&x) {
                    cur[x].insert(c);
                    sets[x].get_or_insert_with(BTreeSet::new).insert(c);
                }
            }
            sets[c].get_or_insert_with(BTreeSet::new).extend(set.iter().copied());
            cur[c] = set;
        }
        end = start;
    }
    Neighbors { floor, sets: sets.into_iter().map(|s| s.map(|s| s.into_iter().collect())).collect() }
}

/// All descriptors of one hierarchy.
#[derive(Debug, Clone)]
pub struct RegionTree {
    pub areas: Vec<u64>,
    pub bboxes: Vec<BBox>,
    pub perimeters: Vec<u64>,
    pub strength_sums: Vec<f64>,
    pub pairs: LeafPairs,
    pub neighbors: Neighbors,
}

impl RegionTree {
    pub fn build(u: &Ucm, grid: &ContourMap, floor: f64) -> Result<Self> {
        let pairs = LeafPairs::build(u, grid)?;
        let (perimeters, strength_sums) = compute_perimeters(u, &pairs);
        let neighbors = compute_neighbors(u, &pairs, floor);
        Ok(RegionTree {
            areas: compute_areas(u),
            bboxes: compute_bboxes(u),
            perimeters,
            strength_sums,
            pairs,
            neighbors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::fixtures::four_columns;
    use crate::hierarchy::ucm_strength_grid;

    fn four_columns_tree(floor: f64) -> (Ucm, RegionTree) {
        let u = four_columns();
        let t = RegionTree::build(&u, &ucm_strength_grid(&u), floor).unwrap();
        (u, t)
    }

    #[test]
    fn four_columns_areas_and_cost() {
        let u = four_columns();
        let (areas, touches) = compute_areas_counted(&u);
        assert_eq!(areas, vec![4, 4, 4, 4, 8, 8, 16]);
        assert_eq!(touches, 16 + 3);
    }

    #[test]
    fn four_columns_boxes() {
        let (_, t) = four_columns_tree(0.0);
        assert_eq!(t.bboxes[4], (0, 0, 3, 1));
        assert_eq!(t.bboxes[6], (0, 0, 3, 3));
    }

    #[test]
    fn four_columns_perimeters() {
        let (_, t) = four_columns_tree(0.0);
        assert_eq!(t.perimeters[0], 10);
        assert_eq!(t.perimeters[4], 12);
        assert_eq!(t.perimeters[6], 16);
        assert!((t.strength_sums[4] - 4.0 * 0.9).abs() < 1e-12);
        assert!((t.strength_sums[1] - 4.0 * (0.2 + 0.9)).abs() < 1e-12);
        assert!(t.strength_sums[6].abs() < 1e-12);
    }

    #[test]
    fn four_columns_neighbors_per_cut() {
        let (u, t) = four_columns_tree(0.0);
        let n = &t.neighbors;
        assert_eq!(n.at(&u, 4, 0.5), vec![5]);
        assert_eq!(n.at(&u, 5, 0.5), vec![4]);
        assert_eq!(n.at(&u, 0, 0.0), vec![1]);
        assert_eq!(n.at(&u, 1, 0.0), vec![0, 2]);
        assert_eq!(n.at(&u, 2, 0.0), vec![1, 3]);
        assert_eq!(n.at(&u, 3, 0.0), vec![2]);
        // c meets e once a and b have merged
        assert_eq!(n.at(&u, 2, 0.3), vec![3, 4]);
        assert_eq!(n.sets[6], Some(vec![]));
    }

    #[test]
    fn floor_stops_expansion() {
        let (_, t) = four_columns_tree(0.5);
        assert!(t.neighbors.sets[0].is_none());
        assert_eq!(t.neighbors.sets[4], Some(vec![5]));
    }
}
