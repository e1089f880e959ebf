//! Local contour cue and intervening-contour affinities.

use crate::contour::ContourMap;
use crate::error::{param, Result};
use crate::grid::{Dims, Edge};
use crate::image::Image;
use crate::sparse::{SparseAffinity, SparseMatrix};

/// Pixel offsets `(dy, dx)` of the half-disk on the near side of a vertical
/// boundary located half a pixel to the right of the origin pixel.
fn half_disk_offsets(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let r2 = (radius * radius) as f64;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=0 {
            let ex = dx as f64 - 0.5;
            if (dy * dy) as f64 + ex * ex <= r2 {
                out.push((dy, dx));
            }
        }
    }
    out
}

/// Half-disk mean differences at every inter-pixel edge, maximised over
/// radii and channels.
pub fn local_contour_cue(img: &Image, half_disk_radii: &[usize]) -> Result<ContourMap> {
    if half_disk_radii.is_empty() {
        return param("at least one half-disk radius is required");
    }
    let dims = img.dims;
    let limit = dims.height.min(dims.width);
    for &r in half_disk_radii {
        if r == 0 || r > limit {
            return param(format!("half-disk radius {r} must be in 1..={limit}"));
        }
    }
    let tables: Vec<Vec<(isize, isize)>> =
        half_disk_radii.iter().map(|&r| half_disk_offsets(r)).collect();
    let (h, w) = (dims.height as isize, dims.width as isize);
    let channels = img.channels;

    // Mean of the half-disk anchored at (y, x). `flip` mirrors it to the far
    // side; `transpose` turns it into a half-disk for a horizontal boundary.
    let side_mean = |table: &[(isize, isize)], y: isize, x: isize, flip: bool, transpose: bool, out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut count = 0usize;
        for &(dy, dx) in table {
            let (mut oy, mut ox) = if transpose { (dx, dy) } else { (dy, dx) };
            if flip {
                oy = -oy;
                ox = -ox;
            }
            let (py, px) = (y + oy, x + ox);
            if py < 0 || px < 0 || py >= h || px >= w {
                continue;
            }
            count += 1;
            for (c, v) in out.iter_mut().enumerate() {
                *v += img.get(py as usize, px as usize, c);
            }
        }
        out.iter_mut().for_each(|v| *v /= count as f64);
    };

    let mut near = vec![0.0; channels];
    let mut far = vec![0.0; channels];
    Ok(ContourMap::from_edges(dims, |e: Edge| {
        let (ya, xa) = dims.coords(e.a);
        let (yb, xb) = dims.coords(e.b);
        let transpose = yb != ya;
        let mut best = 0.0f64;
        for table in &tables {
            side_mean(table, ya as isize, xa as isize, false, transpose, &mut near);
            side_mean(table, yb as isize, xb as isize, true, transpose, &mut far);
            for c in 0..channels {
                let diff = (near[c] - far[c]).abs();
                // equal sides may still differ by summation rounding
                if diff > 1e-12 {
                    best = best.max(diff);
                }
            }
        }
        best.clamp(0.0, 1.0)
    }))
}

/// Pixels visited by the Bresenham line from `p` to `q`, endpoints included.
pub fn bresenham(p: (usize, usize), q: (usize, usize)) -> Vec<(usize, usize)> {
    let (mut y, mut x) = (p.0 as isize, p.1 as isize);
    let (y1, x1) = (q.0 as isize, q.1 as isize);
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = vec![(y as usize, x as usize)];
    while (y, x) != (y1, x1) {
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
        out.push((y as usize, x as usize));
    }
    out
}

/// Strength crossed when stepping between two 8-adjacent pixels. A diagonal
/// step takes the weaker of its two L-shaped detours.
fn step_strength(cm: &ContourMap, a: (usize, usize), b: (usize, usize)) -> f64 {
    let d = cm.dims;
    let edge = |p: (usize, usize), q: (usize, usize)| {
        let (i, j) = (d.index(p.0, p.1), d.index(q.0, q.1));
        cm.edge(Edge { a: i.min(j), b: i.max(j) })
    };
    if a.0 == b.0 || a.1 == b.1 {
        return edge(a, b);
    }
    let via_row = (a.0, b.1);
    let via_col = (b.0, a.1);
    let first = edge(a, via_row).max(edge(via_row, b));
    let second = edge(a, via_col).max(edge(via_col, b));
    first.min(second)
}

/// Maximum contour strength crossed by the Bresenham line from `p` to `q`.
pub fn intervening_contour(cm: &ContourMap, p: usize, q: usize) -> f64 {
    let line = bresenham(cm.dims.coords(p), cm.dims.coords(q));
    line.windows(2).map(|w| step_strength(cm, w[0], w[1])).fold(0.0, f64::max)
}

/// Intervening-contour affinity over all pixel pairs within Chebyshev
/// distance `radius`: `exp(-max crossed strength / sigma)`.
pub fn build_affinity(cm: &ContourMap, radius: usize, sigma: f64) -> Result<SparseAffinity> {
    if radius == 0 {
        return param("affinity radius must be at least 1");
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return param(format!("affinity sigma must be positive, got {sigma}"));
    }
    let dims = cm.dims;
    let n = dims.len();
    let r = radius as isize;
    // Each unordered pair is evaluated once, from its lower index.
    let upper_row = |p: usize| -> Vec<(usize, f64)> {
        let (y, x) = dims.coords(p);
        let mut row = vec![(p, 1.0)];
        for dy in 0..=r {
            for dx in -r..=r {
                if dy == 0 && dx <= 0 {
                    continue;
                }
                let (qy, qx) = (y as isize + dy, x as isize + dx);
                if qy >= dims.height as isize || qx < 0 || qx >= dims.width as isize {
                    continue;
                }
                let q = dims.index(qy as usize, qx as usize);
                let wgt = (-intervening_contour(cm, p, q) / sigma).exp();
                if wgt > 0.0 {
                    row.push((q, wgt));
                }
            }
        }
        row
    };
    #[cfg(feature = "parallel")]
    let upper: Vec<Vec<(usize, f64)>> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(upper_row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let upper: Vec<Vec<(usize, f64)>> = (0..n).map(upper_row).collect();

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (p, row) in upper.into_iter().enumerate() {
        for (q, wgt) in row {
            rows[p].push((q, wgt));
            if q != p {
                rows[q].push((p, wgt));
            }
        }
    }
    Ok(SparseMatrix::from_rows(n, rows))
}

/// Checks that `a` is an affinity over the pixels of `dims`.
pub fn check_grid(a: &SparseAffinity, dims: Dims) -> Result<()> {
    if a.n_rows != dims.len() || a.n_cols != dims.len() {
        return param(format!(
            "affinity of size {} does not match a {}x{} grid",
            a.n_rows, dims.height, dims.width
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn halves() -> Image {
        let dims = Dims::new(4, 4);
        let data = (0..16).map(|i| if i % 4 >= 2 { 1.0 } else { 0.0 }).collect();
        Image::new(dims, 1, data).unwrap()
    }

    fn random_image(h: usize, w: usize, c: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..h * w * c).map(|_| rng.gen::<f64>()).collect();
        Image::new(Dims::new(h, w), c, data).unwrap()
    }

    /// Independent oracle: scans every pixel and tests half-disk membership
    /// geometrically against the edge midpoint.
    fn cue_oracle(img: &Image, radii: &[usize]) -> ContourMap {
        let d = img.dims;
        ContourMap::from_edges(d, |e| {
            let (ya, xa) = d.coords(e.a);
            let (yb, xb) = d.coords(e.b);
            let (my, mx) = ((ya + yb) as f64 / 2.0, (xa + xb) as f64 / 2.0);
            let vertical_boundary = ya == yb;
            let mut best = 0.0f64;
            for &r in radii {
                for c in 0..img.channels {
                    let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0, 0.0, 0);
                    for y in 0..d.height {
                        for x in 0..d.width {
                            let (fy, fx) = (y as f64 - my, x as f64 - mx);
                            if fy * fy + fx * fx > (r * r) as f64 {
                                continue;
                            }
                            let side = if vertical_boundary { fx } else { fy };
                            if side < 0.0 {
                                s0 += img.get(y, x, c);
                                n0 += 1;
                            } else {
                                s1 += img.get(y, x, c);
                                n1 += 1;
                            }
                        }
                    }
                    let diff = (s0 / n0 as f64 - s1 / n1 as f64).abs();
                    if diff > 1e-12 {
                        best = best.max(diff);
                    }
                }
            }
            best.min(1.0)
        })
    }

    #[test]
    fn constant_image_has_no_contours() {
        let img = Image::filled(Dims::new(5, 6), 3, 0.4);
        let cm = local_contour_cue(&img, &[1, 2]).unwrap();
        assert_eq!(cm.max(), 0.0);
    }

    #[test]
    fn step_image_peaks_on_the_step() {
        let cm = local_contour_cue(&halves(), &[1]).unwrap();
        let d = cm.dims;
        for (e, s) in cm.edges() {
            let on_step = e.b == e.a + 1 && d.coords(e.a).1 == 1;
            if on_step {
                assert_eq!(s, 1.0);
            } else {
                assert!(s < 1.0, "{e:?} {s}");
            }
        }
    }

    #[test]
    fn cue_matches_geometric_oracle() {
        for seed in 0..3 {
            let img = random_image(8, 8, if seed == 1 { 3 } else { 1 }, seed);
            let fast = local_contour_cue(&img, &[1, 2]).unwrap();
            let slow = cue_oracle(&img, &[1, 2]);
            for (a, b) in fast.strength.iter().zip(&slow.strength) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn oversized_radius_rejected() {
        assert!(local_contour_cue(&halves(), &[5]).is_err());
        assert!(local_contour_cue(&halves(), &[]).is_err());
    }

    #[test]
    fn zero_contours_give_unit_weights() {
        let d = Dims::new(3, 3);
        let a = build_affinity(&ContourMap::zeros(d), 1, 0.1).unwrap();
        assert!(a.triplets().all(|(_, _, v)| v == 1.0));
        // centre pixel sees all 9 pixels in its 3x3 window
        assert_eq!(a.row(4).count(), 9);
    }

    #[test]
    fn step_contour_weight_is_exp_minus_one() {
        let d = Dims::new(4, 4);
        let cm = ContourMap::from_edges(d, |e| {
            if e.b == e.a + 1 && d.coords(e.a).1 == 1 {
                1.0
            } else {
                0.0
            }
        });
        let a = build_affinity(&cm, 3, 1.0).unwrap();
        let w = a.get(d.index(0, 1), d.index(2, 2));
        assert!((w - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(a.get(d.index(0, 0), d.index(3, 1)), 1.0);
    }

    #[test]
    fn affinity_matches_dense_oracle_and_is_symmetric() {
        let d = Dims::new(6, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cm = ContourMap::from_edges(d, |_| rng.gen::<f64>());
        let (radius, sigma) = (2, 0.3);
        let a = build_affinity(&cm, radius, sigma).unwrap();
        assert!(a.is_symmetric());
        assert!(a.nnz() <= d.len() * (2 * radius + 1).pow(2));
        for p in 0..d.len() {
            for q in 0..d.len() {
                let (py, px) = d.coords(p);
                let (qy, qx) = d.coords(q);
                let cheb = py.abs_diff(qy).max(px.abs_diff(qx));
                let want = if p == q {
                    1.0
                } else if cheb <= radius {
                    let (lo, hi) = (p.min(q), p.max(q));
                    (-intervening_contour(&cm, lo, hi) / sigma).exp()
                } else {
                    0.0
                };
                assert_eq!(a.get(p, q), want);
            }
        }
    }

    #[test]
    fn raising_a_contour_never_raises_weights() {
        let d = Dims::new(5, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cm = ContourMap::from_edges(d, |_| rng.gen::<f64>() * 0.5);
        let base = build_affinity(&cm, 2, 0.2).unwrap();
        let mut raised = cm.clone();
        for (i, s) in raised.strength.iter_mut().enumerate() {
            if i % 3 == 0 {
                *s += 0.3;
            }
        }
        let after = build_affinity(&raised, 2, 0.2).unwrap();
        for (r, c, v) in base.triplets() {
            assert!(after.get(r, c) <= v);
        }
    }

    #[test]
    fn bresenham_endpoints() {
        let line = bresenham((0, 0), (2, 5));
        assert_eq!(line.first(), Some(&(0, 0)));
        assert_eq!(line.last(), Some(&(2, 5)));
        assert_eq!(line.len(), 6);
    }

    #[test]
    fn rejects_bad_parameters() {
        let cm = ContourMap::zeros(Dims::new(2, 2));
        assert!(build_affinity(&cm, 1, 0.0).is_err());
        assert!(build_affinity(&cm, 0, 1.0).is_err());
    }
}
