//! Seeded generators for synthetic images, contour maps, hierarchies and
//! affinities. Used by tests, benchmarks and the demo.

use rand::Rng;

use crate::affinity::{build_affinity, local_contour_cue};
use crate::contour::ContourMap;
use crate::grid::Dims;
use crate::hierarchy::{build_ucm, finest_partition, Ucm};
use crate::image::{Image, InstanceGroundTruth, LabelMap};
use crate::sparse::SparseAffinity;

/// Random edge strengths. Half the maps are quantized to eighths so that
/// ties between merges are common.
pub fn random_contour_map(dims: Dims, rng: &mut impl Rng) -> ContourMap {
    let quantize = rng.gen_bool(0.5);
    ContourMap::from_edges(dims, |_| {
        let v: f64 = rng.gen();
        if quantize {
            (v * 8.0).floor() / 8.0
        } else {
            v
        }
    })
}

/// Hierarchy built from a random contour map.
pub fn random_ucm(dims: Dims, rng: &mut impl Rng) -> Ucm {
    let cm = random_contour_map(dims, rng);
    build_ucm(&finest_partition(&cm), &cm).expect("valid contour map")
}

/// Canonical map with labels drawn from `0..max_labels` per pixel.
pub fn random_label_map(dims: Dims, max_labels: u32, rng: &mut impl Rng) -> LabelMap {
    let labels = (0..dims.len()).map(|_| rng.gen_range(0..max_labels.max(1))).collect();
    LabelMap { dims, labels }.canonicalize()
}

/// Grey image of a few overlapping flat rectangles with mild noise.
pub fn blocks_image(dims: Dims, rng: &mut impl Rng) -> Image {
    let (h, w) = (dims.height, dims.width);
    let mut img = Image::filled(dims, 1, rng.gen::<f64>() * 0.3);
    for _ in 0..rng.gen_range(2..5) {
        let (y0, x0) = (rng.gen_range(0..h.saturating_sub(4).max(1)), rng.gen_range(0..w.saturating_sub(4).max(1)));
        let (bh, bw) = (rng.gen_range(4..(h / 2).max(5)), rng.gen_range(4..(w / 2).max(5)));
        let v = 0.3 + rng.gen::<f64>() * 0.7;
        for y in y0..(y0 + bh).min(h) {
            for x in x0..(x0 + bw).min(w) {
                img.set(y, x, 0, v);
            }
        }
    }
    for v in img.data.iter_mut() {
        *v = (*v + (rng.gen::<f64>() - 0.5) * 0.05).clamp(0.0, 1.0);
    }
    img
}

/// Intervening-contour affinity of a random blocks image.
pub fn random_affinity(dims: Dims, radius: usize, rng: &mut impl Rng) -> SparseAffinity {
    let img = blocks_image(dims, rng);
    let cm = local_contour_cue(&img, &[1, 2]).expect("radii fit");
    build_affinity(&cm, radius, 0.1).expect("valid parameters")
}

fn far_colour(rng: &mut impl Rng, avoid: &[[f64; 3]]) -> [f64; 3] {
    loop {
        let c = [0, 1, 2].map(|_| (rng.gen_range(0..5) as f64) / 4.0);
        let far = avoid
            .iter()
            .all(|a| a.iter().zip(&c).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) >= 0.5);
        if far {
            return c;
        }
    }
}

/// Two or three disjoint, separated, axis-aligned rectangles of distinct
/// colours on a contrasting background, with one instance per rectangle.
pub fn rectangle_scene(dims: Dims, rng: &mut impl Rng) -> (Image, InstanceGroundTruth) {
    let (h, w) = (dims.height, dims.width);
    let count = rng.gen_range(2..=3);
    let bg = far_colour(rng, &[]);
    let mut colours = vec![bg];
    let mut rects: Vec<(usize, usize, usize, usize)> = Vec::new();
    let (min_side, max_side) = ((h.min(w) / 6).max(2), (h.min(w) / 2).max(3));
    while rects.len() < count {
        let (rh, rw) = (rng.gen_range(min_side..max_side), rng.gen_range(min_side..max_side));
        let (y0, x0) = (rng.gen_range(1..h - rh), rng.gen_range(1..w - rw));
        let r = (y0, x0, y0 + rh - 1, x0 + rw - 1);
        // keep at least two background pixels between rectangles
        let clear = rects.iter().all(|q| r.2 + 2 < q.0 || q.2 + 2 < r.0 || r.3 + 2 < q.1 || q.3 + 2 < r.1);
        if clear {
            rects.push(r);
            colours.push(far_colour(rng, &colours));
        }
    }
    let mut img = Image::filled(dims, 3, 0.0);
    let mut ids = vec![0u32; dims.len()];
    for y in 0..h {
        for x in 0..w {
            let inside = rects.iter().position(|r| (r.0..=r.2).contains(&y) && (r.1..=r.3).contains(&x));
            let c = inside.map_or(bg, |k| colours[k + 1]);
            for (ch, v) in c.iter().enumerate() {
                img.set(y, x, ch, *v);
            }
            ids[dims.index(y, x)] = inside.map_or(0, |k| k as u32 + 1);
        }
    }
    (img, InstanceGroundTruth::new(dims, ids).expect("contiguous ids"))
}
