//! Random regression forest: bootstrapped variance-reduction trees with
//! per-split feature subsampling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    /// Features tried per split; `0` means `round(sqrt(F))`.
    pub features_per_split: usize,
    pub min_samples_split: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { trees: 50, max_depth: 12, features_per_split: 0, min_samples_split: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

/// A trained forest mapping feature vectors to overlaps in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapRegressor {
    pub config: ForestConfig,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
}

impl OverlapRegressor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        (sum / self.trees.len() as f64).clamp(0.0, 1.0)
    }

    /// Mean absolute prediction error over `rows`.
    pub fn mean_absolute_error(&self, rows: &[(Vec<f64>, f64)]) -> f64 {
        rows.iter().map(|(x, y)| (self.predict(x) - y).abs()).sum::<f64>() / rows.len() as f64
    }
}

struct Builder<'a> {
    rows: &'a [(Vec<f64>, f64)],
    config: &'a ForestConfig,
    mtry: usize,
    nodes: Vec<Node>,
}

fn mean_of(rows: &[(Vec<f64>, f64)], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| rows[i].1).sum::<f64>() / idx.len() as f64
}

impl Builder<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let here = self.nodes.len();
        let value = mean_of(self.rows, idx);
        self.nodes.push(Node::Leaf { value });
        if depth >= self.config.max_depth || idx.len() < self.config.min_samples_split.max(2) {
            return here;
        }
        let f = self.rows[0].0.len();
        let mut features: Vec<usize> = (0..f).collect();
        features.shuffle(rng);
        features.truncate(self.mtry);
        features.sort_unstable();

        let n = idx.len() as f64;
        let total: f64 = idx.iter().map(|&i| self.rows[i].1).sum();
        let parent_sse_term = total * total / n;
        // best = (gain, feature, threshold)
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for &feat in &features {
            order.sort_by(|&a, &b| {
                self.rows[a].0[feat].total_cmp(&self.rows[b].0[feat]).then(a.cmp(&b))
            });
            let mut left_sum = 0.0;
            for (pos, w) in order.windows(2).enumerate() {
                left_sum += self.rows[w[0]].1;
                let (xa, xb) = (self.rows[w[0]].0[feat], self.rows[w[1]].0[feat]);
                if xa == xb {
                    continue;
                }
                let nl = (pos + 1) as f64;
                let nr = n - nl;
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent_sse_term;
                if best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, feat, xa + (xb - xa) / 2.0));
                }
            }
        }
        let Some((gain, feature, threshold)) = best else {
            return here;
        };
        if gain <= 1e-12 * n {
            return here;
        }
        let split = partition(idx, |i| self.rows[i].0[feature] <= threshold);
        let (l, r) = idx.split_at_mut(split);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[here] = Node::Split { feature, threshold, left, right };
        here
    }
}

/// Stable in-place partition; returns the size of the `true` block.
fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (mut yes, no): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| pred(i));
    let k = yes.len();
    yes.extend(no);
    idx.copy_from_slice(&yes);
    k
}

fn train_tree(rows: &[(Vec<f64>, f64)], config: &ForestConfig, mtry: usize, seed: u64, t: usize) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    let n = rows.len();
    let mut idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    idx.sort_unstable();
    let mut b = Builder { rows, config, mtry, nodes: Vec::new() };
    b.grow(&mut idx, 0, &mut rng);
    Tree { nodes: b.nodes }
}

/// Trains a forest on `(features, target)` rows. Trees are seeded from
/// `seed` and their index, so the result does not depend on how
/// training is scheduled.
pub fn train_forest(
    rows: &[(Vec<f64>, f64)],
    feature_names: &[&str],
    config: &ForestConfig,
    seed: u64,
) -> Result<OverlapRegressor> {
    if rows.is_empty() {
        return param("cannot train a forest on zero rows");
    }
    if config.trees == 0 {
        return param("a forest needs at least one tree");
    }
    let f = rows[0].0.len();
    if rows.iter().any(|(x, y)| x.len() != f || !y.is_finite() || x.iter().any(|v| !v.is_finite())) {
        return param("training rows must be finite and of equal length");
    }
    let mtry = if config.features_per_split == 0 {
        ((f as f64).sqrt().round() as usize).max(1)
    } else {
        config.features_per_split.min(f)
    };
    #[cfg(feature = "parallel")]
    let trees = {
        use rayon::prelude::*;
        (0..config.trees).into_par_iter().map(|t| train_tree(rows, config, mtry, seed, t)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let trees = (0..config.trees).map(|t| train_tree(rows, config, mtry, seed, t)).collect();
    Ok(OverlapRegressor {
        config: *config,
        seed,
        feature_names: feature_names.iter().map(|s| s.to_string()).collect(),
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target_gives_constant_predictor() {
        let rows: Vec<(Vec<f64>, f64)> = (0..20).map(|i| (vec![i as f64, (i * 7 % 5) as f64], 0.7)).collect();
        let f = train_forest(&rows, &["a", "b"], &ForestConfig::default(), 0).unwrap();
        for x in [vec![-3.0, 0.0], vec![100.0, 2.0]] {
            assert!((f.predict(&x) - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn single_row() {
        let f = train_forest(&[(vec![1.0], 0.3)], &["a"], &ForestConfig::default(), 0).unwrap();
        assert!((f.predict(&[5.0]) - 0.3).abs() < 1e-12);
        assert!(train_forest(&[], &[], &ForestConfig::default(), 0).is_err());
    }

    #[test]
    fn learns_a_linear_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<(Vec<f64>, f64)> = (0..400)
            .map(|_| {
                let x: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
                let y = 0.1 + 0.8 * x[2];
                (x, y)
            })
            .collect();
        let (train, test) = rows.split_at(200);
        let cfg = ForestConfig { features_per_split: 4, ..ForestConfig::default() };
        let f = train_forest(train, &["a", "b", "c", "d"], &cfg, 0).unwrap();
        assert!(f.mean_absolute_error(test) < 0.1, "{}", f.mean_absolute_error(test));
    }

    #[test]
    fn deterministic_and_serializable() {
        let rows: Vec<(Vec<f64>, f64)> =
            (0..50).map(|i| (vec![(i % 7) as f64, (i % 3) as f64], (i % 7) as f64 / 7.0)).collect();
        let cfg = ForestConfig { trees: 5, ..ForestConfig::default() };
        let a = train_forest(&rows, &["a", "b"], &cfg, 42).unwrap();
        let b = train_forest(&rows, &["a", "b"], &cfg, 42).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_string(&a).unwrap();
        let back: OverlapRegressor = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
    }
}
