//! Edge-strength maps on the doubled contour grid.

use crate::error::{param, Result};
use crate::grid::{Dims, Edge};

#[derive(Debug, Clone, PartialEq)]
pub struct ContourMap {
    pub dims: Dims,
    /// `(2H-1) x (2W-1)` row-major; pixel and corner sites stay 0.
    pub strength: Vec<f64>,
}

impl ContourMap {
    pub fn zeros(dims: Dims) -> Self {
        ContourMap { dims, strength: vec![0.0; dims.contour_len()] }
    }

    pub fn new(dims: Dims, strength: Vec<f64>) -> Result<Self> {
        if strength.len() != dims.contour_len() {
            return param(format!(
                "contour map of {}x{} needs {} sites, got {}",
                dims.height,
                dims.width,
                dims.contour_len(),
                strength.len()
            ));
        }
        Ok(ContourMap { dims, strength })
    }

    /// Builds a map by evaluating `f` on every inter-pixel edge.
    pub fn from_edges(dims: Dims, mut f: impl FnMut(Edge) -> f64) -> Self {
        let mut cm = ContourMap::zeros(dims);
        for e in dims.edges() {
            let s = dims.edge_site(e);
            cm.strength[s] = f(e);
        }
        cm
    }

    pub fn edge(&self, e: Edge) -> f64 {
        self.strength[self.dims.edge_site(e)]
    }

    pub fn set_edge(&mut self, e: Edge, v: f64) {
        let s = self.dims.edge_site(e);
        self.strength[s] = v;
    }

    pub fn edges(&self) -> impl Iterator<Item = (Edge, f64)> + '_ {
        self.dims.edges().map(move |e| (e, self.edge(e)))
    }

    pub fn max(&self) -> f64 {
        self.strength.iter().copied().fold(0.0, f64::max)
    }

    /// Per-pixel energy: the maximum strength of the pixel's incident edges.
    pub fn pixel_energy(&self) -> Vec<f64> {
        let mut energy = vec![0.0f64; self.dims.len()];
        for (e, s) in self.edges() {
            energy[e.a] = energy[e.a].max(s);
            energy[e.b] = energy[e.b].max(s);
        }
        energy
    }

    /// Pointwise `sum_i w_i * maps_i`.
    pub fn linear_combination(maps: &[&ContourMap], weights: &[f64]) -> Result<ContourMap> {
        let Some(first) = maps.first() else {
            return param("linear combination of zero contour maps");
        };
        if maps.len() != weights.len() {
            return param("one weight per contour map is required");
        }
        if maps.iter().any(|m| m.dims != first.dims) {
            return param("contour maps differ in size");
        }
        let mut out = ContourMap::zeros(first.dims);
        for (m, &w) in maps.iter().zip(weights) {
            for (o, s) in out.strength.iter_mut().zip(&m.strength) {
                *o += w * s;
            }
        }
        Ok(out)
    }
}
