//! Ultrametric contour maps and their region dendrograms.
//!
//! A [`Ucm`] stores the finest partition plus a merge list. Node ids
//! `0..K` are the finest regions (leaves) and every merge creates the next
//! id. A node's *birth* is the strength of the merge that created it
//! (`-inf` for leaves) and its *height* is the strength at which it merges
//! into its parent (`+inf` for the root). Node `n` is a region of the
//! partition at threshold `t` exactly when `birth(n) <= t < height(n)`.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::contour::ContourMap;
use crate::error::{param, Result};
use crate::grid::{Dims, Edge};
use crate::image::LabelMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub id: usize,
    pub children: Vec<usize>,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct Ucm {
    finest: LabelMap,
    merges: Vec<Merge>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    birth: Vec<f64>,
    height: Vec<f64>,
    /// Leaves in depth-first order; every node owns a contiguous range.
    leaf_order: Vec<usize>,
    leaf_range: Vec<(usize, usize)>,
}

impl PartialEq for Ucm {
    fn eq(&self, other: &Self) -> bool {
        self.finest == other.finest && self.merges == other.merges
    }
}

/// A flat segmentation sampled from a hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub map: LabelMap,
    pub level: f64,
}

impl Ucm {
    /// Validates and indexes a hierarchy. Strengths must be finite and
    /// non-decreasing, each internal child must be strictly weaker than its
    /// parent, and the merges must form a single tree over all leaves.
    pub fn new(finest: LabelMap, merges: Vec<Merge>) -> Result<Self> {
        if !finest.is_canonical() {
            return param("finest partition labels must be canonical");
        }
        let k = finest.region_count();
        let total = k + merges.len();
        let mut parent = vec![None; total];
        let mut children = vec![Vec::new(); total];
        let mut birth = vec![f64::NEG_INFINITY; total];
        let mut prev = f64::NEG_INFINITY;
        for (i, m) in merges.iter().enumerate() {
            if m.id != k + i {
                return param(format!("merge {i} has id {}, expected {}", m.id, k + i));
            }
            if !m.lambda.is_finite() {
                return param(format!("merge {} has non-finite strength", m.id));
            }
            if m.lambda < prev {
                return param(format!("merge {} breaks the non-decreasing strength order", m.id));
            }
            if m.children.len() < 2 {
                return param(format!("merge {} needs at least two children", m.id));
            }
            prev = m.lambda;
            birth[m.id] = m.lambda;
            for &c in &m.children {
                if c >= m.id {
                    return param(format!("merge {} references later node {c}", m.id));
                }
                if parent[c].is_some() {
                    return param(format!("node {c} has two parents"));
                }
                if birth[c] >= m.lambda {
                    return param(format!(
                        "node {c} is born at the strength of its parent {}",
                        m.id
                    ));
                }
                parent[c] = Some(m.id);
            }
            let mut sorted = m.children.clone();
            sorted.sort_unstable();
            children[m.id] = sorted;
        }
        if total > 0 && parent.iter().filter(|p| p.is_none()).count() != 1 {
            return param("merge list does not join every region into a single root");
        }
        let mut height = vec![f64::INFINITY; total];
        for n in 0..total {
            if let Some(p) = parent[n] {
                height[n] = birth[p];
            }
        }
        let mut leaf_order = Vec::with_capacity(k);
        let mut leaf_range = vec![(0, 0); total];
        if total > 0 {
            // Iterative DFS from the root, children in ascending order.
            let root = total - 1;
            let mut stack = vec![(root, false)];
            while let Some((n, done)) = stack.pop() {
                if done {
                    let start = children[n].first().map_or(leaf_order.len() - 1, |&c| leaf_range[c].0);
                    leaf_range[n] = (start, leaf_order.len());
                    continue;
                }
                if n < k {
                    leaf_order.push(n);
                    leaf_range[n] = (leaf_order.len() - 1, leaf_order.len());
                    continue;
                }
                stack.push((n, true));
                for &c in children[n].iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        Ok(Ucm { finest, merges, parent, children, birth, height, leaf_order, leaf_range })
    }

    /// Builds a hierarchy from binary merges `(a, b, lambda)` in creation
    /// order, folding chains of equal strength into single n-ary merges.
    pub fn from_binary_merges(finest: LabelMap, binary: &[(usize, usize, f64)]) -> Result<Self> {
        let k = finest.region_count();
        let total = k + binary.len();
        let lambda_of = |n: usize| if n < k { f64::NEG_INFINITY } else { binary[n - k].2 };
        let mut absorbed = vec![false; total];
        for &(a, b, l) in binary {
            for c in [a, b] {
                if c >= k && lambda_of(c) == l {
                    absorbed[c] = true;
                }
            }
        }
        let mut new_id = vec![usize::MAX; total];
        for (leaf, slot) in new_id.iter_mut().enumerate().take(k) {
            *slot = leaf;
        }
        let mut expanded: Vec<Vec<usize>> = vec![Vec::new(); total];
        let mut merges = Vec::new();
        for (i, &(a, b, l)) in binary.iter().enumerate() {
            let id = k + i;
            let mut kids = Vec::new();
            for c in [a, b] {
                if absorbed[c] {
                    kids.extend(expanded[c].iter().copied());
                } else {
                    kids.push(new_id[c]);
                }
            }
            if absorbed[id] {
                expanded[id] = kids;
            } else {
                kids.sort_unstable();
                new_id[id] = k + merges.len();
                merges.push(Merge { id: new_id[id], children: kids, lambda: l });
            }
        }
        // number merges of equal strength by their smallest leaf
        let mut first_leaf: Vec<usize> = (0..k).collect();
        for m in &merges {
            let f = m.children.iter().map(|&c| first_leaf[c]).min().unwrap_or(usize::MAX);
            first_leaf.push(f);
        }
        let mut order: Vec<usize> = (0..merges.len()).collect();
        order.sort_by(|&a, &b| merges[a].lambda.total_cmp(&merges[b].lambda).then(first_leaf[k + a].cmp(&first_leaf[k + b])));
        let mut renum: Vec<usize> = (0..k).chain(std::iter::repeat_n(0, merges.len())).collect();
        for (pos, &m) in order.iter().enumerate() {
            renum[k + m] = k + pos;
        }
        let merges = order
            .iter()
            .map(|&m| {
                let mut children: Vec<usize> = merges[m].children.iter().map(|&c| renum[c]).collect();
                children.sort_unstable();
                Merge { id: renum[k + m], children, lambda: merges[m].lambda }
            })
            .collect();
        Ucm::new(finest, merges)
    }

    /// Single-linkage hierarchy over the finest regions from per-pair
    /// boundary strengths between adjacent regions.
    pub fn from_pair_strengths(finest: LabelMap, pairs: &BTreeMap<(usize, usize), f64>) -> Result<Self> {
        let k = finest.region_count();
        let mut order: Vec<(&(usize, usize), &f64)> = pairs.iter().collect();
        order.sort_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(b.0)));
        let mut uf: Vec<usize> = (0..k).collect();
        let mut node_of: Vec<usize> = (0..k).collect();
        fn find(uf: &mut [usize], mut x: usize) -> usize {
            while uf[x] != x {
                uf[x] = uf[uf[x]];
                x = uf[x];
            }
            x
        }
        let mut binary = Vec::new();
        for (&(a, b), &w) in order {
            let (ra, rb) = (find(&mut uf, a), find(&mut uf, b));
            if ra == rb {
                continue;
            }
            let (na, nb) = (node_of[ra], node_of[rb]);
            binary.push((na.min(nb), na.max(nb), w));
            uf[rb] = ra;
            node_of[ra] = k + binary.len() - 1;
        }
        Ucm::from_binary_merges(finest, &binary)
    }

    /// Single-linkage hierarchy from a strength grid: each adjacent pair of
    /// finest regions is weighted by the strongest edge between them.
    pub fn from_strength_grid(finest: LabelMap, grid: &ContourMap) -> Result<Self> {
        if finest.dims != grid.dims {
            return param("finest partition and strength grid differ in size");
        }
        let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (e, s) in grid.edges() {
            let (la, lb) = (finest.labels[e.a] as usize, finest.labels[e.b] as usize);
            if la != lb {
                let w = pairs.entry((la.min(lb), la.max(lb))).or_insert(f64::NEG_INFINITY);
                *w = w.max(s);
            }
        }
        Ucm::from_pair_strengths(finest, &pairs)
    }

    pub fn finest(&self) -> &LabelMap {
        &self.finest
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn dims(&self) -> Dims {
        self.finest.dims
    }

    pub fn leaf_count(&self) -> usize {
        self.finest.region_count()
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        self.node_count() - 1
    }

    pub fn parent(&self, n: usize) -> Option<usize> {
        self.parent[n]
    }

    pub fn children(&self, n: usize) -> &[usize] {
        &self.children[n]
    }

    /// Strength of the merge that created `n`; `-inf` for leaves.
    pub fn birth(&self, n: usize) -> f64 {
        self.birth[n]
    }

    /// Strength at which `n` merges into its parent; `+inf` for the root.
    pub fn height(&self, n: usize) -> f64 {
        self.height[n]
    }

    pub fn max_lambda(&self) -> f64 {
        self.merges.last().map_or(0.0, |m| m.lambda)
    }

    pub fn is_leaf(&self, n: usize) -> bool {
        n < self.leaf_count()
    }

    pub fn leaves(&self, n: usize) -> &[usize] {
        let (a, b) = self.leaf_range[n];
        &self.leaf_order[a..b]
    }

    /// Depth-first position range of `n`'s leaves; `a` is an ancestor of
    /// (or equal to) `b` iff `b`'s range is inside `a`'s.
    pub fn leaf_span(&self, n: usize) -> (usize, usize) {
        self.leaf_range[n]
    }

    pub fn is_ancestor_or_self(&self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.leaf_range[a], self.leaf_range[b]);
        ra.0 <= rb.0 && rb.1 <= ra.1
    }

    pub fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while a != b {
            if a < b {
                a = self.parent[a].expect("nodes share a root");
            } else {
                b = self.parent[b].expect("nodes share a root");
            }
        }
        a
    }

    /// Distinct merge strengths, ascending.
    pub fn levels(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.merges.iter().map(|m| m.lambda).collect();
        out.dedup();
        out
    }

    /// Nodes that are regions of the partition at threshold `t`, ascending.
    pub fn cut(&self, t: f64) -> Vec<usize> {
        (0..self.node_count()).filter(|&n| self.birth[n] <= t && t < self.height[n]).collect()
    }

    /// For every node, the node representing it in the cut at `t`.
    pub(crate) fn representatives(&self, t: f64) -> Vec<usize> {
        let total = self.node_count();
        let mut rep: Vec<usize> = (0..total).collect();
        for n in (0..total).rev() {
            if let Some(p) = self.parent[n] {
                if self.birth[p] <= t {
                    rep[n] = rep[p];
                }
            }
        }
        rep
    }

    /// The set of leaf ids of every node, as a sorted family with births.
    /// Two hierarchies with equal families describe the same nested regions.
    pub fn region_family(&self) -> BTreeSet<(Vec<usize>, u64)> {
        (0..self.node_count())
            .map(|n| {
                let mut l = self.leaves(n).to_vec();
                l.sort_unstable();
                (l, self.birth[n].to_bits())
            })
            .collect()
    }

    /// Pixel count of each leaf (one image scan).
    pub fn leaf_areas(&self) -> Vec<u64> {
        let mut areas = vec![0u64; self.leaf_count()];
        for &l in &self.finest.labels {
            areas[l as usize] += 1;
        }
        areas
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    mean: f64,
    a: usize,
    b: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.mean.total_cmp(&other.mean).then(self.a.cmp(&other.a)).then(self.b.cmp(&other.b))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Watershed by flooding on per-pixel contour energy.
///
/// Basins grow from regional minima in ascending `(energy, pixel index)`
/// order; a pixel joins the basin of the first neighbour that reaches it.
pub fn finest_partition(cm: &ContourMap) -> LabelMap {
    let dims = cm.dims;
    let n = dims.len();
    let energy = cm.pixel_energy();
    const UNSET: u32 = u32::MAX;
    let mut label = vec![UNSET; n];

    // Regional minima: equal-energy plateaus without a strictly lower neighbour.
    let mut plateau = vec![usize::MAX; n];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for seed in 0..n {
        if plateau[seed] != usize::MAX {
            continue;
        }
        let mut members = vec![seed];
        let mut is_min = true;
        plateau[seed] = seed;
        stack.push(seed);
        while let Some(p) = stack.pop() {
            for q in dims.neighbors(p) {
                if energy[q] < energy[seed] {
                    is_min = false;
                } else if energy[q] == energy[seed] && plateau[q] == usize::MAX {
                    plateau[q] = seed;
                    members.push(q);
                    stack.push(q);
                }
            }
        }
        if is_min {
            for m in members {
                label[m] = next;
            }
            next += 1;
        }
    }

    let seeds: Vec<usize> = (0..n).filter(|&p| label[p] != UNSET).collect();
    let mut heap: BinaryHeap<Reverse<(OrdF64, usize)>> = BinaryHeap::new();
    for p in seeds {
        for q in dims.neighbors(p) {
            if label[q] == UNSET {
                label[q] = label[p];
                heap.push(Reverse((OrdF64(energy[q]), q)));
            }
        }
    }
    while let Some(Reverse((_, p))) = heap.pop() {
        for q in dims.neighbors(p) {
            if label[q] == UNSET {
                label[q] = label[p];
                heap.push(Reverse((OrdF64(energy[q]), q)));
            }
        }
    }
    LabelMap { dims, labels: label }.canonicalize()
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub(crate) struct OrdF64(pub f64);

impl Eq for OrdF64 {}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy agglomeration by minimum mean boundary strength.
///
/// Recorded strengths are the running maximum of the merged means, so the
/// result is ultrametric. Boundary sums and edge counts of a merged region
/// are the exact sums of its children's.
pub fn build_ucm(finest: &LabelMap, cm: &ContourMap) -> Result<Ucm> {
    if finest.dims != cm.dims {
        return param("finest partition and contour map differ in size");
    }
    if !finest.is_canonical() {
        return param("finest partition labels must be canonical");
    }
    let k = finest.region_count();
    let mut adj: Vec<BTreeMap<usize, (f64, u64)>> = vec![BTreeMap::new(); k];
    for (e, s) in cm.edges() {
        let (la, lb) = (finest.labels[e.a] as usize, finest.labels[e.b] as usize);
        if la != lb {
            for (x, y) in [(la, lb), (lb, la)] {
                let st = adj[x].entry(y).or_insert((0.0, 0));
                st.0 += s;
                st.1 += 1;
            }
        }
    }
    let mut heap = BinaryHeap::new();
    for (a, row) in adj.iter().enumerate() {
        for (&b, &(sum, cnt)) in row.range(a + 1..) {
            heap.push(Reverse(Candidate { mean: sum / cnt as f64, a, b }));
        }
    }
    let mut alive = vec![true; k];
    let mut binary = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    while let Some(Reverse(c)) = heap.pop() {
        if !alive[c.a] || !alive[c.b] {
            continue;
        }
        let z = alive.len();
        alive[c.a] = false;
        alive[c.b] = false;
        alive.push(true);
        let lambda = c.mean.max(prev);
        prev = lambda;
        binary.push((c.a, c.b, lambda));

        let mut merged: BTreeMap<usize, (f64, u64)> = BTreeMap::new();
        for x in [c.a, c.b] {
            for (q, (s, n)) in std::mem::take(&mut adj[x]) {
                if q == c.a || q == c.b {
                    continue;
                }
                let st = merged.entry(q).or_insert((0.0, 0));
                st.0 += s;
                st.1 += n;
                adj[q].remove(&x);
            }
        }
        for (&q, &(s, n)) in &merged {
            adj[q].insert(z, (s, n));
            heap.push(Reverse(Candidate { mean: s / n as f64, a: q.min(z), b: q.max(z) }));
        }
        adj.push(merged);
    }
    if k > 0 && binary.len() + 1 != k {
        return param("region adjacency graph is disconnected");
    }
    Ucm::from_binary_merges(finest.clone(), &binary)
}

/// Cuts the dendrogram at `t`: merges with strength `<= t` are applied.
pub fn sample_hierarchy(u: &Ucm, t: f64) -> Partition {
    let rep = u.representatives(t);
    let labels = u.finest.labels.iter().map(|&l| rep[l as usize] as u32).collect();
    Partition { map: LabelMap { dims: u.dims(), labels }.canonicalize(), level: t }
}

/// Inter-pixel edges whose pixels carry different labels.
pub fn extract_boundary(map: &LabelMap) -> Vec<Edge> {
    map.dims.edges().filter(|e| map.labels[e.a] != map.labels[e.b]).collect()
}

/// The hierarchy as an edge-strength image: each edge carries the strength
/// at which its two pixels first share a region.
pub fn ucm_strength_grid(u: &Ucm) -> ContourMap {
    let mut memo: HashMap<(usize, usize), f64> = HashMap::new();
    let labels = &u.finest.labels;
    ContourMap::from_edges(u.dims(), |e| {
        let (la, lb) = (labels[e.a] as usize, labels[e.b] as usize);
        if la == lb {
            return 0.0;
        }
        *memo.entry((la.min(lb), la.max(lb))).or_insert_with(|| u.birth(u.lca(la, lb)))
    })
}

/// Connected components of pixels joined across edges of strength `<= t`.
pub fn threshold_components(cm: &ContourMap, t: f64) -> LabelMap {
    let dims = cm.dims;
    let mut labels = vec![u32::MAX; dims.len()];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for seed in 0..dims.len() {
        if labels[seed] != u32::MAX {
            continue;
        }
        labels[seed] = next;
        stack.push(seed);
        while let Some(p) = stack.pop() {
            for q in dims.neighbors(p) {
                if labels[q] == u32::MAX {
                    let e = Edge { a: p.min(q), b: p.max(q) };
                    if cm.edge(e) <= t {
                        labels[q] = next;
                        stack.push(q);
                    }
                }
            }
        }
        next += 1;
    }
    LabelMap { dims, labels }
}
