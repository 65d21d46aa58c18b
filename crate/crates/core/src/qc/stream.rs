//! Stream function `s` with `σ∇v = *∇s`, i.e. `∂₁s = -σ∂₂v`, `∂₂s = σ∂₁v`.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{square_gradient, DiscPatch};
use crate::error::{Error, Result};

/// Largest admissible gradient-system residual.
pub const STREAM_TOLERANCE: f64 = 1e-2;

/// `s` on the periodic square grid; finite exactly on the inner square
/// `[-1.5R, 1.5R]²` (indices `lo..=hi` on both axes), NaN elsewhere.
#[derive(Debug, Clone, Serialize)]
pub struct StreamFunction {
    pub s: Vec<f64>,
    pub lo: usize,
    pub hi: usize,
    /// `‖Ds - t‖ / ‖t‖` over the edge increments `t` of the flux.
    pub residual: f64,
    /// `R ‖div(σ∇v)‖ / ‖σ∇v‖` on the inner square.
    pub divergence_residual: f64,
}

impl StreamFunction {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        (self.lo..=self.hi).contains(&i) && (self.lo..=self.hi).contains(&j)
    }
}

/// Index range of the inner square `[-1.5R, 1.5R]`.
pub(crate) fn inner_range(m: usize) -> (usize, usize) {
    (m / 8, 7 * m / 8)
}

/// `R ‖div(σ∇v)‖₂ / ‖σ∇v‖₂` on the inner square, derivatives spectral.
pub fn weighted_divergence_residual(sigma: &[f64], v: &[f64], patch: &DiscPatch) -> f64 {
    let grid = patch.square();
    let m = grid.n;
    let [vx, vy] = square_gradient(grid, v);
    let fx: Vec<f64> = vx.iter().zip(sigma).map(|(a, s)| a * s).collect();
    let fy: Vec<f64> = vy.iter().zip(sigma).map(|(a, s)| a * s).collect();
    let [dxx, _] = square_gradient(grid, &fx);
    let [_, dyy] = square_gradient(grid, &fy);
    let (lo, hi) = inner_range(m);
    let (mut num, mut den) = (0.0, 0.0);
    for i in lo..=hi {
        for j in lo..=hi {
            let p = i * m + j;
            num += (dxx[p] + dyy[p]).powi(2);
            den += fx[p].powi(2) + fy[p].powi(2);
        }
    }
    if den == 0.0 {
        return 0.0;
    }
    patch.radius * (num / den).sqrt()
}

pub fn stream_function(sigma: &[f64], v: &[f64], patch: &DiscPatch) -> Result<StreamFunction> {
    let grid = patch.square();
    let m = grid.n;
    if sigma.len() != grid.len() || v.len() != grid.len() {
        return Err(Error::InvalidArgument(
            "stream function inputs must live on the patch square".into(),
        ));
    }
    let h = grid.spacing();
    let [vx, vy] = square_gradient(grid, v);
    let f1: Vec<f64> = vy.iter().zip(sigma).map(|(a, s)| -a * s).collect();
    let f2: Vec<f64> = vx.iter().zip(sigma).map(|(a, s)| a * s).collect();
    let (lo, hi) = inner_range(m);
    let n = hi - lo + 1;
    // fourth-order edge integrals from the four nodes around each edge
    let edge = |f: &[f64], p: usize, stride: usize| h * (-f[p - stride] + 13.0 * f[p] + 13.0 * f[p + stride] - f[p + 2 * stride]) / 24.0;
    let at = |i: usize, j: usize| (lo + i) * m + lo + j;
    let tx = DMatrix::from_fn(n - 1, n, |i, j| edge(&f1, at(i, j), m));
    let ty = DMatrix::from_fn(n, n - 1, |i, j| edge(&f2, at(i, j), 1));
    // normal equations L s = Dᵀt with the Neumann graph Laplacian
    let mut rhs = DMatrix::<f64>::zeros(n, n);
    for i in 0..n - 1 {
        for j in 0..n {
            rhs[(i, j)] -= tx[(i, j)];
            rhs[(i + 1, j)] += tx[(i, j)];
        }
    }
    for i in 0..n {
        for j in 0..n - 1 {
            rhs[(i, j)] -= ty[(i, j)];
            rhs[(i, j + 1)] += ty[(i, j)];
        }
    }
    let c = cosine_basis(n);
    let mut hat = &c * rhs * c.transpose();
    let eig: Vec<f64> = (0..n)
        .map(|k| 2.0 - 2.0 * (std::f64::consts::PI * k as f64 / n as f64).cos())
        .collect();
    for k in 0..n {
        for l in 0..n {
            let d = eig[k] + eig[l];
            hat[(k, l)] = if k + l == 0 { 0.0 } else { hat[(k, l)] / d };
        }
    }
    let mut sol = c.transpose() * hat * &c;
    let origin = m / 2 - lo;
    let s0 = sol[(origin, origin)];
    sol.iter_mut().for_each(|v| *v -= s0);

    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n - 1 {
        for j in 0..n {
            num += (sol[(i + 1, j)] - sol[(i, j)] - tx[(i, j)]).powi(2);
            den += tx[(i, j)].powi(2);
        }
    }
    for i in 0..n {
        for j in 0..n - 1 {
            num += (sol[(i, j + 1)] - sol[(i, j)] - ty[(i, j)]).powi(2);
            den += ty[(i, j)].powi(2);
        }
    }
    let residual = if den == 0.0 { 0.0 } else { (num / den).sqrt() };
    if residual > STREAM_TOLERANCE {
        return Err(Error::NotDivergenceFree { residual });
    }
    let mut s = vec![f64::NAN; grid.len()];
    for i in 0..n {
        for j in 0..n {
            s[at(i, j)] = sol[(i, j)];
        }
    }
    Ok(StreamFunction {
        s,
        lo,
        hi,
        residual,
        divergence_residual: weighted_divergence_residual(sigma, v, patch),
    })
}

/// Orthonormal DCT-II matrix: row `k` is `c_k cos(πk(i+½)/n)`, the
/// eigenbasis of the path-graph Laplacian.
pub(crate) fn cosine_basis(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |k, i| {
        let c = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        c * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n as f64).cos()
    })
}
