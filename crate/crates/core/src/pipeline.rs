//! End-to-end orchestration: pyramid segmentation, alignment, grouping,
//! parameter learning and ranking.

use crate::affinity::{build_affinity, local_contour_cue};
use crate::align::{align_ucm, multiscale_combine, rescale_segmentation};
use crate::config::{scale_name, PipelineConfig};
use crate::contour::ContourMap;
use crate::dncuts::{dncuts, max_depth, spectral_gradients};
use crate::eigen::SolverOptions;
use crate::error::{param, McgError, Result};
use crate::eval::jaccard_unchecked;
use crate::forest::OverlapRegressor;
use crate::grid::Dims;
use crate::grouping::{enumerate_tuples, floor_for_budget, proposal_mask, Proposal, RankedList};
use crate::hierarchy::{build_ucm, finest_partition, ucm_strength_grid, Ucm};
use crate::image::{Image, InstanceGroundTruth};
use crate::pareto::{
    combine_at, greedy_front_combine, pareto_filter, sample_levels, select_working_point,
    FrontParams, ListCount, ListCurve, ParetoPoint, Target,
};
use crate::rank::{compute_features, score_and_rank, train_regressor, FeatureVector};
use crate::regiontree::RegionTree;

fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Pyramid level size: `round(H * s) x round(W * s)`, at least 1x1.
pub fn scaled_dims(dims: Dims, scale: f64) -> Dims {
    let f = |n: usize| ((n as f64 * scale).round() as usize).max(1);
    Dims::new(f(dims.height), f(dims.width))
}

/// Local cue, DNCuts spectral gradients and their weighted sum on one
/// image, with radii and eigenvector count clamped to what the grid allows.
pub fn combined_contours(img: &Image, cfg: &PipelineConfig) -> Result<ContourMap> {
    let dims = img.dims;
    let limit = dims.height.min(dims.width).max(1);
    let mut radii: Vec<usize> = cfg.cue_radii.iter().map(|&r| r.min(limit)).collect();
    radii.dedup();
    let local = local_contour_cue(img, &radii)?;
    if dims.len() < 2 {
        return Ok(local);
    }
    let a = build_affinity(&local, cfg.affinity_radius, cfg.affinity_sigma)?;
    let k = cfg.dncuts_k.min(dims.len() - 1);
    let d = max_depth(dims, cfg.dncuts_d, k);
    let opts = SolverOptions { seed: cfg.seed, ..SolverOptions::default() };
    let eb = dncuts(&a, d, k, dims, &opts)?;
    let spectral = spectral_gradients(&eb, dims, &vec![1.0; k])?;
    let total = cfg.local_weight + cfg.spectral_weight;
    ContourMap::linear_combination(
        &[&local, &spectral],
        &[cfg.local_weight / total, cfg.spectral_weight / total],
    )
}

/// Hierarchy of one image at its own resolution.
pub fn segment_single(img: &Image, cfg: &PipelineConfig) -> Result<Ucm> {
    let cm = combined_contours(img, cfg)?;
    build_ucm(&finest_partition(&cm), &cm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedUcm {
    pub name: String,
    pub ucm: Ucm,
}

#[derive(Debug, Clone)]
pub struct Segmentation {
    pub scales: Vec<f64>,
    /// Per-scale hierarchies at their pyramid resolution.
    pub native: Vec<Ucm>,
    /// Combined hierarchy over the finest partition of the largest scale.
    pub multiscale_native: Ucm,
    /// Every per-scale hierarchy and the multiscale one, aligned to
    /// superpixels at the input resolution.
    pub hierarchies: Vec<NamedUcm>,
}

fn at_scale<T>(scale: f64, r: Result<T>) -> Result<T> {
    r.map_err(|e| McgError::AtScale { scale, source: Box::new(e) })
}

/// Segments every pyramid level, aligns coarse to fine and combines.
pub fn segment(img: &Image, cfg: &PipelineConfig) -> Result<Segmentation> {
    cfg.validate()?;
    let native = par_map(&cfg.scales, |&s| {
        let level = img.resize_bilinear(scaled_dims(img.dims, s));
        at_scale(s, segment_single(&level, cfg))
    })
    .into_iter()
    .collect::<Result<Vec<Ucm>>>()?;

    // each hierarchy is carried one scale finer at a time
    let mut aligned = native.clone();
    for (j, finer) in native.iter().enumerate().skip(1) {
        let target = finer.finest().clone();
        for (i, u) in aligned.iter_mut().enumerate().take(j) {
            *u = at_scale(cfg.scales[i], align_ucm(u, &target))?;
        }
    }
    let multiscale_native = multiscale_combine(&aligned, &cfg.scale_weights(), cfg.calibration)?;

    let target = rescale_segmentation(multiscale_native.finest(), img.dims)?
        .connected_components();
    let mut hierarchies = Vec::with_capacity(native.len() + 1);
    for (u, &s) in native.iter().zip(&cfg.scales) {
        let ucm = at_scale(s, align_ucm(u, &target))?;
        hierarchies.push(NamedUcm { name: scale_name(s), ucm });
    }
    hierarchies.push(NamedUcm { name: "multiscale".into(), ucm: align_ucm(&multiscale_native, &target)? });
    Ok(Segmentation { scales: cfg.scales.clone(), native, multiscale_native, hierarchies })
}

/// Segments several images, in parallel when enabled.
pub fn segment_all(images: &[Image], cfg: &PipelineConfig) -> Vec<Result<Segmentation>> {
    par_map(images, |img| segment(img, cfg))
}

/// Region trees and ranked lists of a set of hierarchies. Lists are ordered
/// by tuple size, then hierarchy, and cut to `list_cap`.
pub fn build_lists(hs: &[NamedUcm], cfg: &PipelineConfig) -> Result<(Vec<RegionTree>, Vec<RankedList>)> {
    let per = par_map(hs, |h| -> Result<(RegionTree, Vec<RankedList>)> {
        let floor = floor_for_budget(&h.ucm, cfg.node_budget);
        let tree = RegionTree::build(&h.ucm, &ucm_strength_grid(&h.ucm), floor)?;
        let index = hs.iter().position(|x| std::ptr::eq(x, h)).expect("member");
        let mut lists = enumerate_tuples(&h.ucm, &tree.neighbors, index, cfg.max_tuple, &h.name)?;
        for l in &mut lists {
            l.proposals.truncate(cfg.list_cap);
        }
        Ok((tree, lists))
    });
    let mut trees = Vec::with_capacity(hs.len());
    let mut by_hierarchy = Vec::with_capacity(hs.len());
    for r in per {
        let (t, l) = r?;
        trees.push(t);
        by_hierarchy.push(l);
    }
    let mut lists = Vec::new();
    for k in 0..cfg.max_tuple {
        for l in &by_hierarchy {
            lists.push(l[k].clone());
        }
    }
    Ok((trees, lists))
}

/// Every list at `default_per_list`.
pub fn default_params(lists: &[RankedList], cfg: &PipelineConfig) -> FrontParams {
    FrontParams {
        lists: lists.iter().map(|l| ListCount { id: l.id.clone(), n: cfg.default_per_list }).collect(),
        config_hash: cfg.config_hash(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedProposal {
    pub proposal: Proposal,
    pub score: Option<f64>,
}

/// Ranked, deduplicated proposals. With a regressor the pool is scored and
/// diversified; without one it is ordered by rank key.
pub fn propose(
    hs: &[NamedUcm],
    cfg: &PipelineConfig,
    params: Option<&FrontParams>,
    regressor: Option<&OverlapRegressor>,
) -> Result<Vec<RankedProposal>> {
    cfg.validate()?;
    if hs.is_empty() {
        return param("no hierarchies to propose from");
    }
    let (trees, lists) = build_lists(hs, cfg)?;
    let defaults;
    let params = match params {
        Some(p) => p,
        None => {
            defaults = default_params(&lists, cfg);
            &defaults
        }
    };
    let ucms: Vec<Ucm> = hs.iter().map(|h| h.ucm.clone()).collect();
    let pool = combine_at(params, &lists, &ucms, cfg.dedup_threshold)?;
    match regressor {
        Some(reg) => {
            let mut scores = Vec::with_capacity(pool.len());
            let mut masks = Vec::with_capacity(pool.len());
            for p in &pool {
                let f = compute_features(p, &trees[p.hierarchy], &ucms[p.hierarchy])?;
                scores.push(reg.predict(&f));
                masks.push(proposal_mask(p, &ucms[p.hierarchy])?);
            }
            let order = score_and_rank(&masks, &scores, cfg.mmr_lambda)?;
            Ok(order
                .into_iter()
                .map(|i| RankedProposal { proposal: pool[i].clone(), score: Some(scores[i]) })
                .collect())
        }
        None => {
            let mut pool = pool;
            pool.sort_by(|a, b| b.rank_key.total_cmp(&a.rank_key));
            Ok(pool.into_iter().map(|proposal| RankedProposal { proposal, score: None }).collect())
        }
    }
}

/// One training image: its hierarchies (all at ground-truth resolution,
/// named consistently across the corpus) and instances.
#[derive(Debug, Clone)]
pub struct TrainingImage {
    pub hierarchies: Vec<NamedUcm>,
    pub gt: InstanceGroundTruth,
}

#[derive(Debug, Clone)]
pub struct LearnedModel {
    pub params: FrontParams,
    pub regressor: OverlapRegressor,
    pub front: Vec<ParetoPoint>,
    pub evaluations: usize,
    /// The working-point target had to be relaxed.
    pub relaxed: bool,
}

/// Learns per-list counts on a Pareto front, then trains the overlap
/// regressor on the pools those counts produce.
pub fn learn(corpus: &[TrainingImage], cfg: &PipelineConfig) -> Result<LearnedModel> {
    cfg.validate()?;
    if corpus.is_empty() {
        return param("training corpus is empty");
    }
    let names: Vec<&str> = corpus[0].hierarchies.iter().map(|h| h.name.as_str()).collect();
    for (i, img) in corpus.iter().enumerate() {
        if img.hierarchies.iter().map(|h| h.name.as_str()).ne(names.iter().copied()) {
            return param(format!("image {i}: hierarchy names differ from image 0"));
        }
        if let Some(h) = img.hierarchies.iter().find(|h| h.ucm.dims() != img.gt.dims) {
            return param(format!("image {i}: hierarchy {} does not match the ground-truth size", h.name));
        }
    }
    let built = par_map(corpus, |img| build_lists(&img.hierarchies, cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<String> = built[0].1.iter().map(|l| l.id.clone()).collect();

    let curves = par_map(&(0..ids.len()).collect::<Vec<_>>(), |&r| -> Result<ListCurve> {
        let mut per_image = Vec::with_capacity(corpus.len());
        for (img, (_, lists)) in corpus.iter().zip(&built) {
            let ucms = &img.hierarchies;
            let masks = lists[r]
                .proposals
                .iter()
                .map(|p| proposal_mask(p, &ucms[p.hierarchy].ucm))
                .collect::<Result<Vec<_>>>()?;
            per_image.push((masks, &img.gt));
        }
        ListCurve::from_masks(&ids[r], &per_image)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let (front, evaluations) = if curves.len() == 1 {
        (single_list_front(&curves[0], cfg.s_samples)?, 0)
    } else {
        let r = greedy_front_combine(&curves, cfg.s_samples)?;
        (r.front, r.evaluations)
    };
    let (point, relaxed) = select_working_point(&front, Target::Count(cfg.target_proposals))?;
    let params = FrontParams::from_point(&ids, &point, &cfg.config_hash());

    let rows: Vec<(FeatureVector, f64)> = par_map(&(0..corpus.len()).collect::<Vec<_>>(), |&j| {
        training_rows(&corpus[j], &built[j], &params, cfg)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?
    .into_iter()
    .flatten()
    .collect();
    if rows.is_empty() {
        return param("the selected working point yields no training proposals");
    }
    let regressor = train_regressor(&rows, &cfg.forest, cfg.seed)?;
    Ok(LearnedModel { params, regressor, front, evaluations, relaxed })
}

fn single_list_front(curve: &ListCurve, s: usize) -> Result<Vec<ParetoPoint>> {
    let instances = curve.instance_count();
    if instances == 0 {
        return param("corpus has no ground-truth instances");
    }
    let points: Vec<ParetoPoint> = sample_levels(curve.max_len, s)
        .into_iter()
        .map(|n| {
            let best: Vec<f64> = (0..instances).map(|i| curve.best(i, n)).collect();
            let quality = best.iter().sum::<f64>() / instances as f64;
            ParetoPoint { n_proposals: n, quality, params: vec![n], best }
        })
        .collect();
    Ok(pareto_filter(&points))
}

fn training_rows(
    img: &TrainingImage,
    (trees, lists): &(Vec<RegionTree>, Vec<RankedList>),
    params: &FrontParams,
    cfg: &PipelineConfig,
) -> Result<Vec<(FeatureVector, f64)>> {
    let ucms: Vec<Ucm> = img.hierarchies.iter().map(|h| h.ucm.clone()).collect();
    let pool = combine_at(params, lists, &ucms, cfg.dedup_threshold)?;
    let instances = img.gt.instance_masks();
    pool.iter()
        .map(|p| {
            let f = compute_features(p, &trees[p.hierarchy], &ucms[p.hierarchy])?;
            let m = proposal_mask(p, &ucms[p.hierarchy])?;
            let best = instances.iter().map(|g| jaccard_unchecked(&m, g)).fold(0.0, f64::max);
            Ok((f, best))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::nonzero_levels;
    use crate::hierarchy::sample_hierarchy;

    fn halves() -> Image {
        let d = Dims::new(4, 4);
        Image::new(d, 1, (0..16).map(|i| if i % 4 >= 2 { 1.0 } else { 0.0 }).collect()).unwrap()
    }

    #[test]
    fn scaled_dims_round_and_floor_at_one() {
        assert_eq!(scaled_dims(Dims::new(4, 5), 0.5), Dims::new(2, 3));
        assert_eq!(scaled_dims(Dims::new(1, 1), 0.1), Dims::new(1, 1));
        assert_eq!(scaled_dims(Dims::new(3, 3), 2.0), Dims::new(6, 6));
    }

    #[test]
    fn one_scale_multiscale_is_the_single_scale() {
        let cfg = PipelineConfig { scales: vec![1.0], ..Default::default() };
        let s = segment(&halves(), &cfg).unwrap();
        assert_eq!(s.multiscale_native, s.native[0]);
        assert_eq!(s.multiscale_native, segment_single(&halves(), &cfg).unwrap());
        // the two halves are the last regions to merge
        let top = s.native[0].max_lambda();
        let halves = sample_hierarchy(&s.native[0], top - 1e-12);
        assert_eq!(halves.map.region_count(), 2);
    }

    #[test]
    fn multiscale_partitions_are_unions_of_finest_scale_superpixels() {
        let cfg = PipelineConfig::default();
        let s = segment(&halves(), &cfg).unwrap();
        let finest = s.native.last().unwrap().finest();
        assert_eq!(s.multiscale_native.finest(), finest);
        for t in s.multiscale_native.levels() {
            let p = sample_hierarchy(&s.multiscale_native, t);
            for e in finest.dims.edges() {
                if finest.labels[e.a] == finest.labels[e.b] {
                    assert_eq!(p.map.labels[e.a], p.map.labels[e.b]);
                }
            }
        }
        assert_eq!(s.hierarchies.len(), 4);
        assert!(s.hierarchies.iter().all(|h| h.ucm.dims() == Dims::new(4, 4)));
        assert!(!nonzero_levels(&s.hierarchies[3].ucm).is_empty());
    }

    #[test]
    fn propose_without_regressor_sorts_by_rank_key() {
        let cfg = PipelineConfig { scales: vec![1.0], ..Default::default() };
        let s = segment(&halves(), &cfg).unwrap();
        let out = propose(&s.hierarchies, &cfg, None, None).unwrap();
        assert!(!out.is_empty());
        assert!(out.windows(2).all(|w| w[0].proposal.rank_key >= w[1].proposal.rank_key));
        let bad = FrontParams { lists: vec![ListCount { id: "nope".into(), n: 1 }], config_hash: String::new() };
        assert!(propose(&s.hierarchies, &cfg, Some(&bad), None).is_err());
    }

    #[test]
    fn learn_then_propose_with_scores() {
        let cfg = PipelineConfig {
            scales: vec![1.0],
            s_samples: 3,
            forest: crate::forest::ForestConfig { trees: 5, ..Default::default() },
            ..Default::default()
        };
        let img = halves();
        let s = segment(&img, &cfg).unwrap();
        let gt = InstanceGroundTruth::new(img.dims, (0..16).map(|i| if i % 4 >= 2 { 1 } else { 0 }).collect())
            .unwrap();
        let corpus = vec![TrainingImage { hierarchies: s.hierarchies.clone(), gt }];
        let model = learn(&corpus, &cfg).unwrap();
        assert_eq!(model.params.lists.len(), 8);
        assert_eq!(model.evaluations, 7 * 9);
        let out = propose(&s.hierarchies, &cfg, Some(&model.params), Some(&model.regressor)).unwrap();
        assert!(out.iter().all(|p| p.score.is_some()));
        assert!(learn(&[], &cfg).is_err());
    }
}
