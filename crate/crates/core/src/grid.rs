//! Pixel-grid geometry shared by every module.
//!
//! Pixels are indexed row-major (`y * width + x`). Inter-pixel edges live on
//! the doubled contour grid of size `(2H-1) x (2W-1)`: pixel `(y, x)` sits at
//! `(2y, 2x)`, the edge to its right neighbour at `(2y, 2x+1)` and the edge to
//! the neighbour below at `(2y+1, 2x)`. Odd/odd sites are unused.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub height: usize,
    pub width: usize,
}

/// A unit edge between two 4-adjacent pixels, `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
}

impl Dims {
    pub fn new(height: usize, width: usize) -> Self {
        Dims { height, width }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, y: usize, x: usize) -> usize {
        y * self.width + x
    }

    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i / self.width, i % self.width)
    }

    pub fn contour_height(&self) -> usize {
        (2 * self.height).saturating_sub(1)
    }

    pub fn contour_width(&self) -> usize {
        (2 * self.width).saturating_sub(1)
    }

    pub fn contour_len(&self) -> usize {
        self.contour_height() * self.contour_width()
    }

    pub fn edge_count(&self) -> usize {
        self.height * self.width.saturating_sub(1) + self.height.saturating_sub(1) * self.width
    }

    /// Flat index of `edge` on the contour grid.
    pub fn edge_site(&self, edge: Edge) -> usize {
        let (ya, xa) = self.coords(edge.a);
        let cw = self.contour_width();
        if edge.b == edge.a + 1 {
            (2 * ya) * cw + 2 * xa + 1
        } else {
            debug_assert_eq!(edge.b, edge.a + self.width);
            (2 * ya + 1) * cw + 2 * xa
        }
    }

    /// The edge at contour-grid site `(row, col)`, if that site is an edge.
    pub fn site_edge(&self, row: usize, col: usize) -> Option<Edge> {
        match (row % 2, col % 2) {
            (0, 1) => {
                let a = self.index(row / 2, col / 2);
                Some(Edge { a, b: a + 1 })
            }
            (1, 0) => {
                let a = self.index(row / 2, col / 2);
                Some(Edge { a, b: a + self.width })
            }
            _ => None,
        }
    }

    /// All edges in row-major order of their first pixel, right edge before
    /// down edge.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.len()).flat_map(move |a| {
            let (y, x) = self.coords(a);
            let right = (x + 1 < self.width).then_some(Edge { a, b: a + 1 });
            let down = (y + 1 < self.height).then_some(Edge { a, b: a + self.width });
            right.into_iter().chain(down)
        })
    }

    /// 4-neighbours of pixel `i`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> {
        let (y, x) = self.coords(i);
        let (h, w) = (self.height, self.width);
        [
            (y > 0).then(|| i - w),
            (x > 0).then(|| i - 1),
            (x + 1 < w).then(|| i + 1),
            (y + 1 < h).then(|| i + w),
        ]
        .into_iter()
        .flatten()
    }

    /// Number of image-border unit edges touching pixel `i`.
    pub fn border_edges(&self, i: usize) -> u64 {
        let (y, x) = self.coords(i);
        u64::from(y == 0)
            + u64::from(y + 1 == self.height)
            + u64::from(x == 0)
            + u64::from(x + 1 == self.width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_sites_round_trip() {
        let d = Dims::new(3, 4);
        let edges: Vec<Edge> = d.edges().collect();
        assert_eq!(edges.len(), d.edge_count());
        for e in edges {
            let s = d.edge_site(e);
            let (r, c) = (s / d.contour_width(), s % d.contour_width());
            assert_eq!(d.site_edge(r, c), Some(e));
        }
        assert_eq!(d.site_edge(0, 0), None);
        assert_eq!(d.site_edge(1, 1), None);
    }

    #[test]
    fn single_pixel_grid_has_no_edges() {
        let d = Dims::new(1, 1);
        assert_eq!(d.edges().count(), 0);
        assert_eq!(d.contour_len(), 1);
        assert_eq!(d.border_edges(0), 4);
    }
}
