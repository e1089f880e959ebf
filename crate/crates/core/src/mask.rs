//! Bit-packed binary masks.

use crate::grid::Dims;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    pub dims: Dims,
    words: Vec<u64>,
}

impl Mask {
    pub fn empty(dims: Dims) -> Self {
        Mask { dims, words: vec![0; dims.len().div_ceil(64)] }
    }

    pub fn from_fn(dims: Dims, f: impl Fn(usize) -> bool) -> Self {
        let mut m = Mask::empty(dims);
        for i in 0..dims.len() {
            if f(i) {
                m.insert(i);
            }
        }
        m
    }

    pub fn from_bools(dims: Dims, bits: &[bool]) -> Self {
        Mask::from_fn(dims, |i| bits[i])
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn union_with(&mut self, other: &Mask) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn intersection_count(&self, other: &Mask) -> u64 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| u64::from((a & b).count_ones()))
            .sum()
    }

    pub fn union_count(&self, other: &Mask) -> u64 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| u64::from((a | b).count_ones()))
            .sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dims.len()).filter(|&i| self.contains(i))
    }

    /// `(min_row, min_col, max_row, max_col)`, or `None` for an empty mask.
    pub fn bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for i in self.iter_ones() {
            let (y, x) = self.dims.coords(i);
            bb = Some(match bb {
                None => (y, x, y, x),
                Some((y0, x0, y1, x1)) => (y0.min(y), x0.min(x), y1.max(y), x1.max(x)),
            });
        }
        bb
    }

    pub fn is_connected(&self) -> bool {
        let Some(start) = self.iter_ones().next() else {
            return false;
        };
        let mut seen = Mask::empty(self.dims);
        seen.insert(start);
        let mut stack = vec![start];
        let mut reached = 1u64;
        while let Some(p) = stack.pop() {
            for q in self.dims.neighbors(p) {
                if self.contains(q) && !seen.contains(q) {
                    seen.insert(q);
                    reached += 1;
                    stack.push(q);
                }
            }
        }
        reached == self.count()
    }

    /// Nearest-neighbour resampling with pixel-centre alignment.
    pub fn resize_nearest(&self, target: Dims) -> Mask {
        if target == self.dims {
            return self.clone();
        }
        Mask::from_fn(target, |i| {
            let (y, x) = target.coords(i);
            let sy = nearest_source(y, self.dims.height, target.height);
            let sx = nearest_source(x, self.dims.width, target.width);
            self.contains(self.dims.index(sy, sx))
        })
    }
}

/// Source coordinate whose pixel centre is nearest to target pixel `t`.
pub(crate) fn nearest_source(t: usize, source_len: usize, target_len: usize) -> usize {
    let ratio = source_len as f64 / target_len as f64;
    let s = ((t as f64 + 0.5) * ratio - 0.5).round();
    s.clamp(0.0, (source_len - 1) as f64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_bbox() {
        let d = Dims::new(3, 3);
        let m = Mask::from_fn(d, |i| i == 4 || i == 5);
        assert_eq!(m.count(), 2);
        assert_eq!(m.bbox(), Some((1, 1, 1, 2)));
        assert!(m.is_connected());
        let diag = Mask::from_fn(d, |i| i == 0 || i == 4);
        assert!(!diag.is_connected());
        assert_eq!(Mask::empty(d).bbox(), None);
    }

    #[test]
    fn crosses_word_boundaries() {
        let d = Dims::new(10, 13);
        let a = Mask::from_fn(d, |i| i % 3 == 0);
        let b = Mask::from_fn(d, |i| i % 2 == 0);
        let inter = (0..d.len()).filter(|i| i % 6 == 0).count() as u64;
        assert_eq!(a.intersection_count(&b), inter);
        assert_eq!(a.union_count(&b), a.count() + b.count() - inter);
    }
}
