//! In-memory images, label maps and instance ground truth.

use std::collections::HashMap;

use crate::error::{param, Result};
use crate::grid::Dims;
use crate::mask::Mask;

/// Row-major image with values in `[0, 1]`, interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub dims: Dims,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(dims: Dims, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return param(format!("images have 1 or 3 channels, got {channels}"));
        }
        if data.len() != dims.len() * channels {
            return param(format!(
                "image data length {} does not match {}x{}x{}",
                data.len(),
                dims.height,
                dims.width,
                channels
            ));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return param(format!("image value {v} outside [0, 1]"));
        }
        Ok(Image { dims, channels, data })
    }

    pub fn filled(dims: Dims, channels: usize, value: f64) -> Self {
        Image { dims, channels, data: vec![value; dims.len() * channels] }
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.dims.width + x) * self.channels + c]
    }

    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        let i = (y * self.dims.width + x) * self.channels + c;
        self.data[i] = v;
    }

    /// Bilinear resampling with pixel-centre alignment.
    pub fn resize_bilinear(&self, target: Dims) -> Image {
        if target == self.dims {
            return self.clone();
        }
        let (hs, ws) = (self.dims.height as f64, self.dims.width as f64);
        let (ht, wt) = (target.height as f64, target.width as f64);
        let mut out = Image::filled(target, self.channels, 0.0);
        for y in 0..target.height {
            let sy = ((y as f64 + 0.5) * hs / ht - 0.5).clamp(0.0, hs - 1.0);
            let y0 = sy.floor() as usize;
            let y1 = (y0 + 1).min(self.dims.height - 1);
            let fy = sy - y0 as f64;
            for x in 0..target.width {
                let sx = ((x as f64 + 0.5) * ws / wt - 0.5).clamp(0.0, ws - 1.0);
                let x0 = sx.floor() as usize;
                let x1 = (x0 + 1).min(self.dims.width - 1);
                let fx = sx - x0 as f64;
                for c in 0..self.channels {
                    let top = self.get(y0, x0, c) * (1.0 - fx) + self.get(y0, x1, c) * fx;
                    let bot = self.get(y1, x0, c) * (1.0 - fx) + self.get(y1, x1, c) * fx;
                    out.set(y, x, c, (top * (1.0 - fy) + bot * fy).clamp(0.0, 1.0));
                }
            }
        }
        out
    }
}

/// A partition of the pixel grid into labelled regions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    pub dims: Dims,
    pub labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(dims: Dims, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != dims.len() {
            return param(format!(
                "label count {} does not match {}x{}",
                labels.len(),
                dims.height,
                dims.width
            ));
        }
        Ok(LabelMap { dims, labels })
    }

    pub fn constant(dims: Dims) -> Self {
        LabelMap { dims, labels: vec![0; dims.len()] }
    }

    /// Number of distinct labels, assuming the map is canonical.
    pub fn region_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m as usize + 1)
    }

    /// Relabels by order of first occurrence in a row-major scan.
    pub fn canonicalize(&self) -> LabelMap {
        let mut remap: HashMap<u32, u32> = HashMap::new();
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                let next = remap.len() as u32;
                *remap.entry(l).or_insert(next)
            })
            .collect();
        LabelMap { dims: self.dims, labels }
    }

    pub fn is_canonical(&self) -> bool {
        let mut next = 0u32;
        for &l in &self.labels {
            if l == next {
                next += 1;
            } else if l > next {
                return false;
            }
        }
        true
    }

    /// Splits every label into its 4-connected components, canonical order.
    pub fn connected_components(&self) -> LabelMap {
        let n = self.dims.len();
        let mut out = vec![u32::MAX; n];
        let mut next = 0u32;
        let mut stack = Vec::new();
        for seed in 0..n {
            if out[seed] != u32::MAX {
                continue;
            }
            out[seed] = next;
            stack.push(seed);
            while let Some(p) = stack.pop() {
                for q in self.dims.neighbors(p) {
                    if out[q] == u32::MAX && self.labels[q] == self.labels[seed] {
                        out[q] = next;
                        stack.push(q);
                    }
                }
            }
            next += 1;
        }
        LabelMap { dims: self.dims, labels: out }
    }

    pub fn region_mask(&self, label: u32) -> Mask {
        Mask::from_fn(self.dims, |i| self.labels[i] == label)
    }
}

/// Per-pixel instance ids: 0 is background, `1..=K` are instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceGroundTruth {
    pub dims: Dims,
    pub ids: Vec<u32>,
}

impl InstanceGroundTruth {
    /// Builds ground truth, compacting the non-zero ids to `1..=K` in
    /// ascending order of their original value.
    pub fn new(dims: Dims, ids: Vec<u32>) -> Result<Self> {
        if ids.len() != dims.len() {
            return param("ground-truth size does not match its dimensions");
        }
        let mut present: Vec<u32> = ids.iter().copied().filter(|&v| v != 0).collect();
        present.sort_unstable();
        present.dedup();
        let remap: HashMap<u32, u32> =
            present.iter().enumerate().map(|(k, &v)| (v, k as u32 + 1)).collect();
        let ids = ids.into_iter().map(|v| if v == 0 { 0 } else { remap[&v] }).collect();
        Ok(InstanceGroundTruth { dims, ids })
    }

    pub fn instance_count(&self) -> usize {
        self.ids.iter().max().copied().unwrap_or(0) as usize
    }

    /// Masks of instances `1..=K`, in order.
    pub fn instance_masks(&self) -> Vec<Mask> {
        (1..=self.instance_count() as u32)
            .map(|k| Mask::from_fn(self.dims, |i| self.ids[i] == k))
            .collect()
    }
}
