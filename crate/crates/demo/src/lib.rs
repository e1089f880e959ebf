//! WebAssembly front end. [`Session`] holds everything computed for one
//! image; the `wasm_bindgen` wrapper [`Demo`] only converts errors.
//!
//! All rendering functions return RGBA bytes at image resolution, ready
//! for `ImageData`.

use mcg_core::affinity::{build_affinity, local_contour_cue};
use mcg_core::config::PipelineConfig;
use mcg_core::dncuts::{dncuts, max_depth, EigenBasis};
use mcg_core::eigen::SolverOptions;
use mcg_core::grid::Dims;
use mcg_core::grouping::proposal_mask;
use mcg_core::hierarchy::{sample_hierarchy, Ucm};
use mcg_core::image::Image;
use mcg_core::mask::Mask;
use mcg_core::pipeline;
use mcg_core::synth::rectangle_scene;
use mcg_core::{McgError, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

/// Largest image side the demo segments.
pub const MAX_SIDE: usize = 128;
/// Ranked proposals kept for browsing.
pub const MAX_PROPOSALS: usize = 200;
const EIGENVECTORS: usize = 8;

pub fn demo_config() -> PipelineConfig {
    PipelineConfig { scales: vec![0.5, 1.0], ..PipelineConfig::default() }
}

pub struct Session {
    image: Image,
    ucm: Ucm,
    levels: Vec<f64>,
    eigen: EigenBasis,
    proposals: Vec<Mask>,
}

impl Session {
    pub fn from_rgba(width: usize, height: usize, rgba: &[u8]) -> Result<Self> {
        if width == 0 || height == 0 || width > MAX_SIDE || height > MAX_SIDE {
            return Err(McgError::Parameter(format!(
                "image is {width}x{height}; sides must be between 1 and {MAX_SIDE}"
            )));
        }
        if rgba.len() != width * height * 4 {
            return Err(McgError::Parameter(format!(
                "{} bytes of RGBA for a {width}x{height} image",
                rgba.len()
            )));
        }
        let data = rgba
            .chunks_exact(4)
            .flat_map(|px| px[..3].iter().map(|&v| f64::from(v) / 255.0))
            .collect();
        Self::new(Image::new(Dims::new(height, width), 3, data)?)
    }

    /// A generated scene of coloured rectangles.
    pub fn synthetic(seed: u64, side: usize) -> Result<Self> {
        let side = side.clamp(16, MAX_SIDE);
        let (image, _) = rectangle_scene(Dims::new(side, side), &mut ChaCha8Rng::seed_from_u64(seed));
        Self::new(image)
    }

    pub fn new(image: Image) -> Result<Self> {
        let cfg = demo_config();
        let seg = pipeline::segment(&image, &cfg)?;
        let multiscale = seg.hierarchies.last().expect("segment returns the combined hierarchy");
        let ucm = multiscale.ucm.clone();
        let levels = ucm.levels();

        let dims = image.dims;
        let cue = local_contour_cue(&image, &cfg.cue_radii)?;
        let a = build_affinity(&cue, cfg.affinity_radius, cfg.affinity_sigma)?;
        let k = EIGENVECTORS.min(dims.len().saturating_sub(1)).max(1);
        let eigen = dncuts(&a, max_depth(dims, cfg.dncuts_d, k), k, dims, &SolverOptions::default())?;

        let proposals = pipeline::propose(&seg.hierarchies, &cfg, None, None)?
            .iter()
            .take(MAX_PROPOSALS)
            .map(|p| proposal_mask(&p.proposal, &seg.hierarchies[p.proposal.hierarchy].ucm))
            .collect::<Result<Vec<_>>>()?;
        Ok(Session { image, ucm, levels, eigen, proposals })
    }

    pub fn dims(&self) -> Dims {
        self.image.dims
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn eigenvector_count(&self) -> usize {
        self.eigen.k
    }

    pub fn proposal_count(&self) -> usize {
        self.proposals.len()
    }

    pub fn image_rgba(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.dims().len() * 4);
        for px in self.image.data.chunks_exact(self.image.channels) {
            let rgb = if px.len() == 3 { [px[0], px[1], px[2]] } else { [px[0]; 3] };
            out.extend(rgb.iter().map(|v| (v * 255.0).round() as u8));
            out.push(255);
        }
        out
    }

    /// Regions of the cut at `t`, and the image with their boundaries drawn.
    pub fn boundaries(&self, t: f64) -> (usize, Vec<u8>) {
        let part = sample_hierarchy(&self.ucm, t).map;
        let d = self.dims();
        let mut out = self.image_rgba();
        for y in 0..d.height {
            for x in 0..d.width {
                let i = y * d.width + x;
                let l = part.labels[i];
                let edge = (x + 1 < d.width && part.labels[i + 1] != l) || (y + 1 < d.height && part.labels[i + d.width] != l);
                if edge {
                    out[i * 4..i * 4 + 3].copy_from_slice(&[255, 32, 32]);
                }
            }
        }
        (part.region_count(), out)
    }

    /// Eigenvector `j` mapped linearly to grey levels.
    pub fn eigenvector(&self, j: usize) -> Result<Vec<u8>> {
        if j >= self.eigen.k {
            return Err(McgError::Parameter(format!("eigenvector {j} of {}", self.eigen.k)));
        }
        let v = self.eigen.column(j);
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        Ok(v.iter()
            .flat_map(|&x| {
                let g = ((x - lo) / span * 255.0).round() as u8;
                [g, g, g, 255]
            })
            .collect())
    }

    /// The image dimmed outside proposal `rank`.
    pub fn proposal(&self, rank: usize) -> Result<Vec<u8>> {
        let m = self
            .proposals
            .get(rank)
            .ok_or_else(|| McgError::Parameter(format!("proposal {rank} of {}", self.proposals.len())))?;
        let mut out = self.image_rgba();
        for (i, px) in out.chunks_exact_mut(4).enumerate() {
            if !m.contains(i) {
                for c in &mut px[..3] {
                    *c = (*c as u16 * 3 / 10 + 40) as u8;
                }
            }
        }
        Ok(out)
    }
}

fn js(e: McgError) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo(Session);

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(width: usize, height: usize, rgba: &[u8]) -> std::result::Result<Demo, JsError> {
        Session::from_rgba(width, height, rgba).map(Demo).map_err(js)
    }

    pub fn synthetic(seed: u64, side: usize) -> std::result::Result<Demo, JsError> {
        Session::synthetic(seed, side).map(Demo).map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.0.dims().width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.0.dims().height
    }

    /// Distinct merge strengths, ascending.
    pub fn levels(&self) -> Vec<f64> {
        self.0.levels().to_vec()
    }

    #[wasm_bindgen(js_name = eigenvectorCount)]
    pub fn eigenvector_count(&self) -> usize {
        self.0.eigenvector_count()
    }

    #[wasm_bindgen(js_name = proposalCount)]
    pub fn proposal_count(&self) -> usize {
        self.0.proposal_count()
    }

    pub fn image(&self) -> Vec<u8> {
        self.0.image_rgba()
    }

    #[wasm_bindgen(js_name = regionCount)]
    pub fn region_count(&self, t: f64) -> usize {
        self.0.boundaries(t).0
    }

    pub fn boundaries(&self, t: f64) -> Vec<u8> {
        self.0.boundaries(t).1
    }

    pub fn eigenvector(&self, j: usize) -> std::result::Result<Vec<u8>, JsError> {
        self.0.eigenvector(j).map_err(js)
    }

    pub fn proposal(&self, rank: usize) -> std::result::Result<Vec<u8>, JsError> {
        self.0.proposal(rank).map_err(js)
    }
}
