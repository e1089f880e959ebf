//! Normalized-cuts eigenvectors, exact and with recursive
//! squaring-and-decimation of the affinity matrix.

use nalgebra::DMatrix;

use crate::affinity::check_grid;
use crate::contour::ContourMap;
use crate::eigen::{dense_top_k, fix_sign, lanczos_top_k, SolverOptions};
use crate::error::{param, Result};
use crate::grid::Dims;
use crate::sparse::{SparseAffinity, SparseMatrix};

/// `k` column vectors over `n` pixels, column-major, with ascending
/// normalized-Laplacian eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    pub n: usize,
    pub k: usize,
    pub vectors: Vec<f64>,
    pub eigenvalues: Vec<f64>,
}

impl EigenBasis {
    pub fn column(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.n..(j + 1) * self.n]
    }
}

/// One squaring-and-decimation step.
#[derive(Debug, Clone)]
pub struct DecimationStep {
    pub kept: Vec<usize>,
    pub dims_next: Dims,
    /// `A_prev[:, kept]`.
    pub b: SparseMatrix,
    /// `b` with each row divided by its sum.
    pub c: SparseMatrix,
    pub a_next: SparseAffinity,
}

/// Row-major indices of the pixels at even row and even column.
pub fn pixel_decimate(height: usize, width: usize) -> Vec<usize> {
    (0..height)
        .step_by(2)
        .flat_map(|y| (0..width).step_by(2).map(move |x| y * width + x))
        .collect()
}

pub fn decimate_square_step(a: &SparseAffinity, dims: Dims) -> Result<DecimationStep> {
    check_grid(a, dims)?;
    let kept = pixel_decimate(dims.height, dims.width);
    let dims_next = Dims::new(dims.height.div_ceil(2), dims.width.div_ceil(2));
    let b = a.select_columns(&kept);
    let c = b.row_normalized();
    let a_next = c.transpose_mul(&b).symmetrized();
    Ok(DecimationStep { kept, dims_next, b, c, a_next })
}

/// Degrees with isolated nodes treated as degree 1.
fn degrees(a: &SparseAffinity) -> Vec<f64> {
    a.row_sums().into_iter().map(|d| if d > 0.0 { d } else { 1.0 }).collect()
}

/// The `k` non-trivial smallest eigenvectors of the symmetric normalized
/// Laplacian, mapped back through `D^-1/2`.
pub fn ncuts(a: &SparseAffinity, k: usize, opts: &SolverOptions) -> Result<EigenBasis> {
    let n = a.n_rows;
    if n == 0 {
        return param("ncuts on an empty affinity");
    }
    if k == 0 || k + 1 > n {
        return param(format!("ncuts needs 1 <= k <= n-1, got k={k} with n={n}"));
    }
    let d = degrees(a);
    let inv_sqrt: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    let sqrt_d: Vec<f64> = d.iter().map(|v| v.sqrt()).collect();
    let norm = sqrt_d.iter().map(|v| v * v).sum::<f64>().sqrt();
    let trivial: Vec<f64> = sqrt_d.iter().map(|v| v / norm).collect();

    let pairs = if n < opts.dense_below {
        let mut m = DMatrix::zeros(n, n);
        for (r, c, v) in a.triplets() {
            m[(r, c)] = inv_sqrt[r] * v * inv_sqrt[c];
        }
        dense_top_k(&m, &trivial, k)
    } else {
        let mut scratch = vec![0.0; n];
        lanczos_top_k(
            |x, y| {
                for i in 0..n {
                    scratch[i] = x[i] * inv_sqrt[i];
                }
                a.matvec(&scratch, y);
                for i in 0..n {
                    y[i] *= inv_sqrt[i];
                }
            },
            n,
            &trivial,
            k,
            opts,
        )?
    };

    let mut vectors = Vec::with_capacity(n * k);
    for v in &pairs.vectors {
        let mut x: Vec<f64> = v.iter().zip(&inv_sqrt).map(|(a, b)| a * b).collect();
        fix_sign(&mut x);
        vectors.extend(x);
    }
    let eigenvalues = pairs.values.iter().map(|mu| (1.0 - mu).max(0.0)).collect();
    Ok(EigenBasis { n, k, vectors, eigenvalues })
}

/// Per-column standardisation (population variance); constant columns map
/// to zero.
pub fn whiten(x: &EigenBasis) -> EigenBasis {
    let n = x.n;
    let mut out = x.clone();
    for j in 0..x.k {
        let col = &mut out.vectors[j * n..(j + 1) * n];
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        let scale = col.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        if sd <= 1e-12 * scale {
            col.iter_mut().for_each(|v| *v = 0.0);
        } else {
            col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
        }
    }
    out
}

/// Largest usable decimation depth `<= d` that leaves at least `k + 1`
/// pixels.
pub fn max_depth(dims: Dims, d: usize, k: usize) -> usize {
    let mut dims = dims;
    let mut depth = 0;
    while depth < d {
        let next = Dims::new(dims.height.div_ceil(2), dims.width.div_ceil(2));
        if next.len() < k + 1 || next == dims {
            break;
        }
        dims = next;
        depth += 1;
    }
    depth
}

/// Downsampled normalized cuts: `d` squaring-and-decimation steps, an
/// eigensolve on the small matrix, then upsampling through each `C_s`.
pub fn dncuts(
    a: &SparseAffinity,
    d: usize,
    k: usize,
    dims: Dims,
    opts: &SolverOptions,
) -> Result<EigenBasis> {
    check_grid(a, dims)?;
    let mut steps = Vec::with_capacity(d);
    let mut current = a.clone();
    let mut cur_dims = dims;
    for _ in 0..d {
        let step = decimate_square_step(&current, cur_dims)?;
        current = step.a_next.clone();
        cur_dims = step.dims_next;
        steps.push(step);
    }
    if cur_dims.len() < k + 1 {
        return param(format!(
            "after {d} decimations the {}x{} grid has fewer than k+1={} pixels",
            cur_dims.height,
            cur_dims.width,
            k + 1
        ));
    }
    let coarse = ncuts(&current, k, opts)?;
    let mut x = coarse.vectors;
    for step in steps.iter().rev() {
        x = step.c.mul_block(&x, k);
    }
    Ok(whiten(&EigenBasis { n: a.n_rows, k, vectors: x, eigenvalues: coarse.eigenvalues }))
}

/// Oriented eigenvector gradients: at each edge,
/// `sum_j w_j |v_j(a) - v_j(b)| / sqrt(lambda_j)`, rescaled to a maximum of 1.
pub fn spectral_gradients(eb: &EigenBasis, dims: Dims, weights: &[f64]) -> Result<ContourMap> {
    if eb.n != dims.len() {
        return param(format!(
            "eigenbasis has {} rows, grid {}x{} has {} pixels",
            eb.n,
            dims.height,
            dims.width,
            dims.len()
        ));
    }
    if weights.len() != eb.k {
        return param(format!("{} weights for {} eigenvectors", weights.len(), eb.k));
    }
    if weights.iter().any(|&w| w < 0.0) {
        return param("spectral weights must be non-negative");
    }
    let active: Vec<(usize, f64)> = (0..eb.k)
        .filter(|&j| eb.eigenvalues[j] > 1e-12 && weights[j] > 0.0)
        .map(|j| (j, weights[j] / eb.eigenvalues[j].sqrt()))
        .collect();
    let mut cm = ContourMap::from_edges(dims, |e| {
        active
            .iter()
            .map(|&(j, scale)| {
                let v = eb.column(j);
                scale * (v[e.a] - v[e.b]).abs()
            })
            .sum()
    });
    let max = cm.max();
    if max > 0.0 {
        cm.strength.iter_mut().for_each(|s| *s /= max);
    }
    Ok(cm)
}
