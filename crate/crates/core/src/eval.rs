//! Jaccard overlap, achievable quality and recall curves.

use std::fmt::Write as _;

use crate::error::{param, Result};
use crate::image::InstanceGroundTruth;
use crate::mask::Mask;

/// Intersection over union; two empty masks score 0.
pub fn jaccard(a: &Mask, b: &Mask) -> Result<f64> {
    if a.dims != b.dims {
        return param("jaccard: masks differ in size");
    }
    Ok(jaccard_unchecked(a, b))
}

pub(crate) fn jaccard_unchecked(a: &Mask, b: &Mask) -> f64 {
    let union = a.union_count(b);
    if union == 0 {
        0.0
    } else {
        a.intersection_count(b) as f64 / union as f64
    }
}

/// Best Jaccard of any pool mask with each instance, in instance order.
pub fn best_overlap_per_instance(pool: &[Mask], gt: &InstanceGroundTruth) -> Result<Vec<f64>> {
    if pool.iter().any(|m| m.dims != gt.dims) {
        return param("proposal and ground-truth sizes differ");
    }
    Ok(gt
        .instance_masks()
        .iter()
        .map(|g| pool.iter().map(|m| jaccard_unchecked(m, g)).fold(0.0, f64::max))
        .collect())
}

/// One evaluated image: its proposal pool and ground truth.
#[derive(Debug, Clone)]
pub struct EvalImage {
    pub pool: Vec<Mask>,
    pub gt: InstanceGroundTruth,
}

fn all_best(corpus: &[EvalImage]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for img in corpus {
        out.extend(best_overlap_per_instance(&img.pool, &img.gt)?);
    }
    if out.is_empty() {
        return param("corpus has no ground-truth instances");
    }
    Ok(out)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn fraction_at_least(values: &[f64], threshold: f64) -> f64 {
    values.iter().filter(|&&v| v >= threshold).count() as f64 / values.len() as f64
}

/// Mean best overlap over every instance of the corpus.
pub fn instance_level_jaccard(corpus: &[EvalImage]) -> Result<f64> {
    Ok(mean(&all_best(corpus)?))
}

/// Fraction of instances whose best overlap reaches `threshold`.
pub fn recall_at(corpus: &[EvalImage], threshold: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return param("recall threshold must lie in (0, 1]");
    }
    Ok(fraction_at_least(&all_best(corpus)?, threshold))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub n_proposals: usize,
    pub j_i: f64,
    pub recall_050: f64,
    pub recall_070: f64,
    pub recall_085: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityCurve {
    pub rows: Vec<CurveRow>,
}

pub const CURVE_HEADER: &str = "n_proposals,j_i,recall_050,recall_070,recall_085";

impl QualityCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CURVE_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.n_proposals, r.j_i, r.recall_050, r.recall_070, r.recall_085
            );
        }
        s
    }
}

/// Metrics of every ranked pool's prefix of each length in `counts`.
pub fn quality_vs_count_curve(corpus: &[EvalImage], counts: &[usize]) -> Result<QualityCurve> {
    if counts.windows(2).any(|w| w[0] > w[1]) {
        return param("curve counts must be ascending");
    }
    // running best per instance, indexed by prefix length
    let mut prefix: Vec<Vec<f64>> = Vec::new();
    for img in corpus {
        if img.pool.iter().any(|m| m.dims != img.gt.dims) {
            return param("proposal and ground-truth sizes differ");
        }
        for g in img.gt.instance_masks() {
            let mut run = Vec::with_capacity(img.pool.len() + 1);
            let mut best = 0.0f64;
            run.push(best);
            for m in &img.pool {
                best = best.max(jaccard_unchecked(m, &g));
                run.push(best);
            }
            prefix.push(run);
        }
    }
    if prefix.is_empty() {
        return param("corpus has no ground-truth instances");
    }
    let rows = counts
        .iter()
        .map(|&n| {
            let best: Vec<f64> = prefix.iter().map(|r| r[n.min(r.len() - 1)]).collect();
            CurveRow {
                n_proposals: n,
                j_i: mean(&best),
                recall_050: fraction_at_least(&best, 0.5),
                recall_070: fraction_at_least(&best, 0.7),
                recall_085: fraction_at_least(&best, 0.85),
            }
        })
        .collect();
    Ok(QualityCurve { rows })
}

/// Roughly geometric counts `0, 1, 2, 4, ...` ending at `max`.
pub fn geometric_counts(max: usize) -> Vec<usize> {
    let mut out = vec![0];
    let mut c = 1;
    while c < max {
        out.push(c);
        c *= 2;
    }
    if max > 0 {
        out.push(max);
    }
    out
}
