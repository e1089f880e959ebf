//! Pipeline configuration.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::align::Calibration;
use crate::error::{param, Result};
use crate::forest::ForestConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Pyramid scales, strictly ascending.
    pub scales: Vec<f64>,
    /// Per-scale weights for the multiscale combination; uniform if absent.
    pub scale_weights: Option<Vec<f64>>,
    pub calibration: Option<Calibration>,
    pub cue_radii: Vec<usize>,
    pub affinity_radius: usize,
    pub affinity_sigma: f64,
    pub dncuts_d: usize,
    pub dncuts_k: usize,
    pub local_weight: f64,
    pub spectral_weight: f64,
    /// Candidate nodes kept per hierarchy for grouping.
    pub node_budget: usize,
    pub max_tuple: usize,
    /// Longest ranked list kept per hierarchy and tuple size.
    pub list_cap: usize,
    /// Per-list count used by `propose` when no learned params are given.
    pub default_per_list: usize,
    pub s_samples: usize,
    /// Proposal-count cap used to pick the working point when learning.
    pub target_proposals: usize,
    pub mmr_lambda: f64,
    pub dedup_threshold: f64,
    pub forest: ForestConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scales: vec![0.5, 1.0, 2.0],
            scale_weights: None,
            calibration: None,
            cue_radii: vec![1, 2, 4],
            affinity_radius: 5,
            affinity_sigma: 0.1,
            dncuts_d: 2,
            dncuts_k: 16,
            local_weight: 0.5,
            spectral_weight: 0.5,
            node_budget: 200,
            max_tuple: 4,
            list_cap: 500,
            default_per_list: 50,
            s_samples: 10,
            target_proposals: 500,
            mmr_lambda: 0.1,
            dedup_threshold: 0.95,
            forest: ForestConfig::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() || self.scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return param("scales must be non-empty, positive and finite");
        }
        if self.scales.windows(2).any(|w| w[0] >= w[1]) {
            return param("scales must be strictly ascending");
        }
        if let Some(w) = &self.scale_weights {
            if w.len() != self.scales.len() {
                return param("one scale weight per scale is required");
            }
            if w.iter().any(|&x| x.is_nan() || x < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return param("scale weights must be non-negative and sum to 1");
            }
        }
        if self.cue_radii.is_empty() || self.cue_radii.contains(&0) {
            return param("cue radii must be non-empty and at least 1");
        }
        if self.affinity_radius == 0 {
            return param("affinity radius must be at least 1");
        }
        if !(self.affinity_sigma > 0.0 && self.affinity_sigma.is_finite()) {
            return param("affinity sigma must be positive");
        }
        if self.dncuts_k == 0 {
            return param("dncuts k must be at least 1");
        }
        if !(self.local_weight >= 0.0 && self.spectral_weight >= 0.0)
            || self.local_weight + self.spectral_weight <= 0.0
        {
            return param("cue weights must be non-negative and not both zero");
        }
        if self.node_budget == 0 {
            return param("node budget must be at least 1");
        }
        if !(1..=4).contains(&self.max_tuple) {
            return param("max_tuple must lie in 1..=4");
        }
        if self.s_samples < 2 {
            return param("s_samples must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.mmr_lambda) {
            return param("mmr_lambda must lie in [0, 1]");
        }
        if !(self.dedup_threshold > 0.0 && self.dedup_threshold <= 1.0) {
            return param("dedup threshold must lie in (0, 1]");
        }
        if self.forest.trees == 0 {
            return param("forest needs at least one tree");
        }
        Ok(())
    }

    pub fn scale_weights(&self) -> Vec<f64> {
        match &self.scale_weights {
            Some(w) => w.clone(),
            None => vec![1.0 / self.scales.len() as f64; self.scales.len()],
        }
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Hierarchy name of a pyramid scale, e.g. `scale_0.5`.
pub fn scale_name(scale: f64) -> String {
    format!("scale_{scale}")
}
