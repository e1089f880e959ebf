//! Learning how many proposals to take from each ranked list by folding
//! the lists pairwise and keeping only Pareto-optimal parameterizations.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::eval::jaccard_unchecked;
use crate::grouping::{dedup, Proposal, RankedList};
use crate::hierarchy::Ucm;
use crate::image::InstanceGroundTruth;
use crate::mask::Mask;

/// Running best overlap of every corpus instance along one ranked list.
#[derive(Debug, Clone)]
pub struct ListCurve {
    pub id: String,
    /// Longest per-image list length.
    pub max_len: usize,
    /// `prefix[i][n]`: best Jaccard of instance `i` within the top `n`.
    prefix: Vec<Vec<f64>>,
}

impl ListCurve {
    /// `per_image[j]` holds image `j`'s list masks in rank order and its
    /// ground truth.
    pub fn from_masks(id: &str, per_image: &[(Vec<Mask>, &InstanceGroundTruth)]) -> Result<Self> {
        let mut prefix = Vec::new();
        let mut max_len = 0;
        for (masks, gt) in per_image {
            if masks.iter().any(|m| m.dims != gt.dims) {
                return param(format!("list {id}: proposal and ground-truth sizes differ"));
            }
            max_len = max_len.max(masks.len());
            for g in gt.instance_masks() {
                let mut run = vec![0.0];
                let mut best = 0.0f64;
                for m in masks {
                    best = best.max(jaccard_unchecked(m, &g));
                    run.push(best);
                }
                prefix.push(run);
            }
        }
        Ok(ListCurve { id: id.to_string(), max_len, prefix })
    }

    pub fn instance_count(&self) -> usize {
        self.prefix.len()
    }

    pub fn best(&self, instance: usize, n: usize) -> f64 {
        let run = &self.prefix[instance];
        run[n.min(run.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub n_proposals: usize,
    pub quality: f64,
    pub params: Vec<usize>,
    /// Best overlap per instance under `params`.
    #[serde(skip)]
    pub best: Vec<f64>,
}

/// Non-dominated points sorted by proposal count. Among equal
/// `(count, quality)` the lexicographically smallest params survive.
pub fn pareto_filter(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut sorted: Vec<&ParetoPoint> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.n_proposals
            .cmp(&b.n_proposals)
            .then(b.quality.total_cmp(&a.quality))
            .then(a.params.cmp(&b.params))
    });
    let mut out: Vec<ParetoPoint> = Vec::new();
    for p in sorted {
        if out.last().is_none_or(|q| p.quality > q.quality) {
            out.push(p.clone());
        }
    }
    out
}

/// `s` count levels over `0..=max`: 0, then geometric from 1 to `max`.
/// Levels collide only when `max` is too small to give `s` distinct ones.
pub fn sample_levels(max: usize, s: usize) -> Vec<usize> {
    let mut out = vec![0];
    for i in 1..s {
        let target = if s == 2 {
            max as f64
        } else {
            (max as f64).powf((i - 1) as f64 / (s - 2) as f64).round()
        };
        let prev = *out.last().expect("non-empty");
        let level = (target as usize).max(prev + 1).min(max);
        out.push(level);
    }
    out
}

#[derive(Debug, Clone)]
pub struct FrontResult {
    pub front: Vec<ParetoPoint>,
    pub evaluations: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Greedy pairwise front combination. Each fold evaluates `s * s` count
/// pairs, so `R` lists cost exactly `(R - 1) * s^2` quality evaluations.
pub fn greedy_front_combine(lists: &[ListCurve], s_samples: usize) -> Result<FrontResult> {
    if lists.len() < 2 {
        return param("greedy_front_combine needs at least two lists");
    }
    if s_samples < 2 {
        return param("s_samples must be at least 2");
    }
    let instances = lists[0].instance_count();
    if instances == 0 {
        return param("corpus has no ground-truth instances");
    }
    if lists.iter().any(|l| l.instance_count() != instances) {
        return param("lists were built on different corpora");
    }
    let first = &lists[0];
    let mut front: Vec<ParetoPoint> = sample_levels(first.max_len, s_samples)
        .into_iter()
        .map(|n| {
            let best: Vec<f64> = (0..instances).map(|i| first.best(i, n)).collect();
            ParetoPoint { n_proposals: n, quality: mean(&best), params: vec![n], best }
        })
        .collect();
    let mut evaluations = 0;
    for (r, list) in lists.iter().enumerate().skip(1) {
        let levels = sample_levels(list.max_len, s_samples);
        let mut points = Vec::with_capacity(s_samples * s_samples);
        for a in &front {
            for &n in &levels {
                let best: Vec<f64> =
                    (0..instances).map(|i| a.best[i].max(list.best(i, n))).collect();
                evaluations += 1;
                let mut params = a.params.clone();
                params.push(n);
                points.push(ParetoPoint {
                    n_proposals: a.n_proposals + n,
                    quality: mean(&best),
                    params,
                    best,
                });
            }
        }
        let filtered = pareto_filter(&points);
        front = if r + 1 == lists.len() { filtered } else { resample(&filtered, s_samples) };
    }
    Ok(FrontResult { front, evaluations })
}

/// `s` points of a front: for each geometric count target, the point with
/// the largest count not above it.
fn resample(front: &[ParetoPoint], s: usize) -> Vec<ParetoPoint> {
    let max = front.last().map_or(0, |p| p.n_proposals);
    sample_levels(max, s)
        .into_iter()
        .map(|t| {
            let k = front.partition_point(|p| p.n_proposals <= t);
            front[k.max(1) - 1].clone()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// At most this many proposals.
    Count(usize),
    /// At least this achievable quality.
    Quality(f64),
}

/// The chosen front point and whether the target had to be relaxed.
pub fn select_working_point(front: &[ParetoPoint], target: Target) -> Result<(ParetoPoint, bool)> {
    if front.is_empty() {
        return param("empty Pareto front");
    }
    let by_quality = |a: &&ParetoPoint, b: &&ParetoPoint| {
        a.quality.total_cmp(&b.quality).then(b.n_proposals.cmp(&a.n_proposals))
    };
    match target {
        Target::Count(cap) => {
            match front.iter().filter(|p| p.n_proposals <= cap).max_by(by_quality) {
                Some(p) => Ok((p.clone(), false)),
                None => {
                    let p = front.iter().min_by_key(|p| p.n_proposals).expect("non-empty");
                    Ok((p.clone(), true))
                }
            }
        }
        Target::Quality(floor) => {
            let feasible = front
                .iter()
                .filter(|p| p.quality >= floor)
                .min_by(|a, b| a.n_proposals.cmp(&b.n_proposals).then(b.quality.total_cmp(&a.quality)));
            match feasible {
                Some(p) => Ok((p.clone(), false)),
                None => Ok((front.iter().max_by(by_quality).expect("non-empty").clone(), true)),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListCount {
    pub id: String,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontParams {
    pub lists: Vec<ListCount>,
    pub config_hash: String,
}

impl FrontParams {
    pub fn from_point(ids: &[String], point: &ParetoPoint, config_hash: &str) -> Self {
        FrontParams {
            lists: ids.iter().zip(&point.params).map(|(id, &n)| ListCount { id: id.clone(), n }).collect(),
            config_hash: config_hash.to_string(),
        }
    }

    pub fn count_for(&self, id: &str) -> Option<usize> {
        self.lists.iter().find(|l| l.id == id).map(|l| l.n)
    }
}

/// Top `n` of every list in list order, then deduplicated.
pub fn combine_at(
    params: &FrontParams,
    lists: &[RankedList],
    hierarchies: &[Ucm],
    dedup_threshold: f64,
) -> Result<Vec<Proposal>> {
    for l in &params.lists {
        if !lists.iter().any(|r| r.id == l.id) {
            return param(format!("params reference missing list {}", l.id));
        }
    }
    let mut pool = Vec::new();
    for list in lists {
        let n = params.count_for(&list.id).unwrap_or(0);
        pool.extend(list.proposals.iter().take(n).cloned());
    }
    dedup(&pool, hierarchies, dedup_threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Dims;
    use crate::hierarchy::fixtures::four_columns;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(n: usize, q: f64) -> ParetoPoint {
        ParetoPoint { n_proposals: n, quality: q, params: vec![n], best: vec![] }
    }

    #[test]
    fn filter_example() {
        let f = pareto_filter(&[pt(10, 0.5), pt(20, 0.6), pt(15, 0.55), pt(20, 0.55)]);
        let nq: Vec<(usize, f64)> = f.iter().map(|p| (p.n_proposals, p.quality)).collect();
        assert_eq!(nq, vec![(10, 0.5), (15, 0.55), (20, 0.6)]);
        assert_eq!(pareto_filter(&[pt(3, 0.1)]), vec![pt(3, 0.1)]);
    }

    #[test]
    fn filter_matches_dominance_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let pts: Vec<ParetoPoint> =
                (0..30).map(|_| pt(rng.gen_range(0..12), rng.gen_range(0..6) as f64 / 5.0)).collect();
            let dominated = |p: &ParetoPoint| {
                pts.iter().any(|q| {
                    q.n_proposals <= p.n_proposals
                        && q.quality >= p.quality
                        && (q.n_proposals < p.n_proposals || q.quality > p.quality)
                })
            };
            let mut want: Vec<(usize, u64)> =
                pts.iter().filter(|p| !dominated(p)).map(|p| (p.n_proposals, p.quality.to_bits())).collect();
            want.sort();
            want.dedup();
            let got: Vec<(usize, u64)> =
                pareto_filter(&pts).iter().map(|p| (p.n_proposals, p.quality.to_bits())).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn levels() {
        assert_eq!(sample_levels(4, 5), vec![0, 1, 2, 3, 4]);
        assert_eq!(sample_levels(100, 4), vec![0, 1, 10, 100]);
        assert_eq!(sample_levels(9, 2), vec![0, 9]);
        assert_eq!(sample_levels(0, 3), vec![0, 0, 0]);
    }

    fn toy_curve(id: &str, rng: &mut ChaCha8Rng, len: usize, gt: &InstanceGroundTruth) -> ListCurve {
        let masks: Vec<Mask> = (0..len)
            .map(|_| {
                let bits: Vec<bool> = (0..gt.dims.len()).map(|_| rng.gen_bool(0.5)).collect();
                Mask::from_bools(gt.dims, &bits)
            })
            .collect();
        ListCurve::from_masks(id, &[(masks, gt)]).unwrap()
    }

    #[test]
    fn evaluation_count_is_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let gt = InstanceGroundTruth::new(Dims::new(3, 3), vec![1, 1, 0, 1, 2, 2, 0, 2, 2]).unwrap();
        let lists: Vec<ListCurve> = (0..4).map(|i| toy_curve(&i.to_string(), &mut rng, 6, &gt)).collect();
        let r = greedy_front_combine(&lists[..2], 3).unwrap();
        assert_eq!(r.evaluations, 9);
        let r = greedy_front_combine(&lists, 5).unwrap();
        assert_eq!(r.evaluations, 3 * 25);
        for w in r.front.windows(2) {
            assert!(w[0].n_proposals < w[1].n_proposals && w[0].quality < w[1].quality);
        }
        for p in &r.front {
            assert_eq!(p.params.len(), 4);
            assert_eq!(p.params.iter().sum::<usize>(), p.n_proposals);
        }
    }

    #[test]
    fn empty_second_list_gives_first_curve() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gt = InstanceGroundTruth::new(Dims::new(2, 3), vec![1, 1, 0, 2, 2, 0]).unwrap();
        let l1 = toy_curve("a", &mut rng, 7, &gt);
        let l2 = ListCurve::from_masks("b", &[(vec![], &gt)]).unwrap();
        let r = greedy_front_combine(&[l1.clone(), l2], 4).unwrap();
        let own: Vec<ParetoPoint> = sample_levels(7, 4)
            .into_iter()
            .map(|n| {
                let best: Vec<f64> = (0..2).map(|i| l1.best(i, n)).collect();
                ParetoPoint { n_proposals: n, quality: mean(&best), params: vec![n, 0], best }
            })
            .collect();
        assert_eq!(r.front, pareto_filter(&own));
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let gt = InstanceGroundTruth::new(Dims::new(1, 1), vec![0]).unwrap();
        let l = ListCurve::from_masks("a", &[(vec![], &gt)]).unwrap();
        assert!(greedy_front_combine(&[l.clone(), l], 3).is_err());
    }

    #[test]
    fn working_point_rules() {
        let front = vec![pt(10, 0.5), pt(20, 0.6)];
        assert_eq!(select_working_point(&front, Target::Count(15)).unwrap(), (pt(10, 0.5), false));
        assert_eq!(select_working_point(&front, Target::Quality(0.55)).unwrap(), (pt(20, 0.6), false));
        assert_eq!(select_working_point(&front, Target::Quality(0.99)).unwrap(), (pt(20, 0.6), true));
        assert!(select_working_point(&[], Target::Count(1)).is_err());
    }

    fn four_columns_lists() -> Vec<RankedList> {
        let p = |nodes: Vec<usize>| Proposal { hierarchy: 0, nodes, rank_key: 0.0 };
        vec![
            RankedList { id: "h/singletons".into(), proposals: vec![p(vec![6]), p(vec![4]), p(vec![5])] },
            RankedList { id: "h/pairs".into(), proposals: vec![p(vec![4, 5]), p(vec![0, 1]), p(vec![2, 3])] },
        ]
    }

    #[test]
    fn combine_at_examples() {
        let u = four_columns();
        let lists = four_columns_lists();
        let params = |a, b| FrontParams {
            lists: vec![ListCount { id: "h/singletons".into(), n: a }, ListCount { id: "h/pairs".into(), n: b }],
            config_hash: String::new(),
        };
        assert!(combine_at(&params(0, 0), &lists, std::slice::from_ref(&u), 0.95).unwrap().is_empty());
        // {4,5} duplicates the root, {0,1} duplicates e, {2,3} duplicates f
        let pool = combine_at(&params(3, 3), &lists, std::slice::from_ref(&u), 0.95).unwrap();
        assert_eq!(pool.len(), 3);
        let whole = combine_at(&params(0, 3), &lists, std::slice::from_ref(&u), 0.95).unwrap();
        assert_eq!(whole, lists[1].proposals);
        let missing = FrontParams { lists: vec![ListCount { id: "x".into(), n: 1 }], config_hash: String::new() };
        assert!(combine_at(&missing, &lists, std::slice::from_ref(&u), 0.95).is_err());
    }
}
