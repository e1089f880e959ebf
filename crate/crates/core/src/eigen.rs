//! Symmetric eigensolvers for the top of the spectrum, restricted to the
//! orthogonal complement of one known unit vector.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{McgError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Seed for the Lanczos start vectors.
    pub seed: u64,
    /// Residual tolerance `|| M v - mu v ||` for every wanted Ritz pair.
    pub tol: f64,
    /// Cap on the Krylov dimension.
    pub max_iter: usize,
    /// Problems smaller than this are solved densely.
    pub dense_below: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { seed: 0, tol: 1e-9, max_iter: 3000, dense_below: 400 }
    }
}

/// Top-`k` eigenpairs, eigenvalues descending, vectors as columns.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Dense route: eigen-decomposes `M` restricted to `u`'s complement via a
/// Householder basis.
pub fn dense_top_k(m: &DMatrix<f64>, u: &[f64], k: usize) -> EigenPairs {
    let n = m.nrows();
    // H = I - 2 w w^T with w ~ u - e0 maps e0 to u; its other columns span u^perp.
    let mut w = DVector::from_column_slice(u);
    w[0] -= 1.0;
    let wn = w.norm();
    let h = if wn < 1e-14 {
        DMatrix::identity(n, n)
    } else {
        w /= wn;
        DMatrix::identity(n, n) - 2.0 * &w * w.transpose()
    };
    let q = h.columns(1, n - 1).into_owned();
    let reduced = q.transpose() * m * &q;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(reduced);
    let mut order: Vec<usize> = (0..n - 1).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        values.push(eig.eigenvalues[i]);
        let y = &q * eig.eigenvectors.column(i);
        vectors.push(y.as_slice().to_vec());
    }
    EigenPairs { values, vectors }
}

/// Lanczos with full reorthogonalisation on the complement of `u`.
///
/// `apply(x, y)` must compute `y = M x` for symmetric `M`.
pub fn lanczos_top_k(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    n: usize,
    u: &[f64],
    k: usize,
    opts: &SolverOptions,
) -> Result<EigenPairs> {
    let dim_cap = (n - 1).min(opts.max_iter.max(k + 1));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new(); // betas[j] couples basis[j] and basis[j+1]

    let orthogonalize = |v: &mut Vec<f64>, basis: &[Vec<f64>]| {
        for _ in 0..2 {
            let c = dot(v, u);
            axpy(-c, u, v);
            for b in basis {
                let c = dot(v, b);
                axpy(-c, b, v);
            }
        }
    };
    let fresh = |rng: &mut ChaCha8Rng, basis: &[Vec<f64>]| -> Option<Vec<f64>> {
        for _ in 0..8 {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            orthogonalize(&mut v, basis);
            let nv = norm(&v);
            if nv > 1e-8 {
                v.iter_mut().for_each(|x| *x /= nv);
                return Some(v);
            }
        }
        None
    };

    let mut v = fresh(&mut rng, &basis).expect("complement of one vector is non-trivial");
    let mut w = vec![0.0; n];
    let check_every = 10usize;
    let mut last_residual = f64::INFINITY;
    loop {
        apply(&v, &mut w);
        let alpha = dot(&w, &v);
        basis.push(std::mem::take(&mut v));
        alphas.push(alpha);
        let m = basis.len();
        let mut r = w.clone();
        orthogonalize(&mut r, &basis);
        let beta = norm(&r);

        let done_dim = m >= dim_cap;
        let should_check = done_dim || (m >= k && (m - k).is_multiple_of(check_every));
        if should_check {
            let (pairs, residual) = ritz(&basis, &alphas, &betas, beta, k);
            last_residual = residual;
            if residual <= opts.tol || done_dim {
                if residual > opts.tol.max(1e-6) && m < n - 1 {
                    return Err(McgError::Solver { iterations: m, residual });
                }
                return Ok(pairs);
            }
        }
        if m >= n - 1 {
            let (pairs, _) = ritz(&basis, &alphas, &betas, 0.0, k);
            return Ok(pairs);
        }
        if beta > 1e-10 * alpha.abs().max(1.0) {
            r.iter_mut().for_each(|x| *x /= beta);
            betas.push(beta);
            v = r;
        } else {
            // Invariant subspace found; continue in a fresh direction.
            match fresh(&mut rng, &basis) {
                Some(f) => {
                    betas.push(0.0);
                    v = f;
                }
                None => {
                    let (pairs, _) = ritz(&basis, &alphas, &betas, 0.0, k);
                    if pairs.values.len() < k {
                        return Err(McgError::Solver { iterations: m, residual: last_residual });
                    }
                    return Ok(pairs);
                }
            }
        }
    }
}

/// Ritz pairs of the current tridiagonal and the worst residual among the
/// top `k`.
fn ritz(
    basis: &[Vec<f64>],
    alphas: &[f64],
    betas: &[f64],
    next_beta: f64,
    k: usize,
) -> (EigenPairs, f64) {
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let n = basis[0].len();
    let kk = k.min(m);
    let mut values = Vec::with_capacity(kk);
    let mut vectors = Vec::with_capacity(kk);
    let mut worst = 0.0f64;
    for &i in order.iter().take(kk) {
        let z = eig.eigenvectors.column(i);
        worst = worst.max((next_beta * z[m - 1]).abs());
        let mut y = vec![0.0; n];
        for (j, b) in basis.iter().enumerate() {
            axpy(z[j], b, &mut y);
        }
        values.push(eig.eigenvalues[i]);
        vectors.push(y);
    }
    (EigenPairs { values, vectors }, worst)
}
