//! Beltrami coefficient of `w = v + is` and the Neumann-series solver for
//! `∂̄χ = μ∂χ` on the doubled periodic square.

use num_complex::Complex64;
use serde::Serialize;

use super::{periodic_multiplier, smooth_step, square_gradient, DiscPatch, PatchGrid};
use crate::error::{Error, Result};

/// Relative gradient magnitude below which `μ` is set to zero.
pub const CRITICAL_THRESHOLD: f64 = 1e-10;
/// Relative increment at which the Neumann series stops.
pub const BELTRAMI_TOLERANCE: f64 = 1e-10;
/// Allowed excess of the increment ratio over `sup|μ|`.
pub const STALL_MARGIN: f64 = 0.05;
const MAX_ITERATIONS: usize = 1000;

/// `μ` on the doubled square, compactly supported in `|z| < 1.2R`.
#[derive(Debug, Clone)]
pub struct BeltramiField {
    pub grid: PatchGrid,
    pub mu: Vec<Complex64>,
    pub k_sup: f64,
}

impl BeltramiField {
    /// Embeds values given on the patch square into the doubled square.
    pub fn from_square(patch: &DiscPatch, mu: &[Complex64]) -> Result<Self> {
        let sq = patch.square();
        let grid = patch.doubled();
        let off = patch.m / 2;
        let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
        for i in 0..sq.n {
            for j in 0..sq.n {
                out[(i + off) * grid.n + j + off] = mu[i * sq.n + j];
            }
        }
        Self::new(grid, out)
    }

    pub fn new(grid: PatchGrid, mu: Vec<Complex64>) -> Result<Self> {
        let k_sup = mu.iter().map(|m| m.norm()).fold(0.0, f64::max);
        if !(k_sup < 1.0) {
            return Err(Error::DistortionTooLarge { k_sup });
        }
        Ok(Self { grid, mu, k_sup })
    }
}

/// `μ = (1-σ)/(1+σ) · (∂₁v + i∂₂v)/(∂₁v - i∂₂v)` on the patch square, before
/// the collar cutoff; zero where `|∇v|` is below the critical threshold.
pub fn beltrami_raw(sigma: &[f64], v: &[f64], patch: &DiscPatch) -> Vec<Complex64> {
    let [vx, vy] = square_gradient(patch.square(), v);
    let gmax = vx.iter().zip(&vy).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max);
    vx.iter()
        .zip(&vy)
        .zip(sigma)
        .map(|((&a, &b), &s)| {
            if a.hypot(b) <= CRITICAL_THRESHOLD * gmax {
                return Complex64::new(0.0, 0.0);
            }
            let grad = Complex64::new(a, b);
            (1.0 - s) / (1.0 + s) * grad / grad.conj()
        })
        .collect()
}

/// Collar cutoff: one on `|z| ≤ R`, zero beyond `1.2R`.
pub fn collar(patch: &DiscPatch, grid: PatchGrid) -> Vec<f64> {
    (0..grid.len())
        .map(|p| smooth_step(grid.z(p).norm(), patch.radius, 1.2 * patch.radius))
        .collect()
}

pub fn beltrami_coefficient(sigma: &[f64], v: &[f64], patch: &DiscPatch) -> Result<BeltramiField> {
    let raw = beltrami_raw(sigma, v, patch);
    let cut = collar(patch, patch.square());
    let mu: Vec<Complex64> = raw.iter().zip(&cut).map(|(m, c)| m * c).collect();
    BeltramiField::from_square(patch, &mu)
}

/// `χ = z + c z̄ + T(g - c)` with `g = ∂̄χ`, `c` the mean of `g` and `T` the
/// periodic Cauchy transform; `χ(x0) = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct BeltramiSolution {
    pub grid: PatchGrid,
    #[serde(skip)]
    pub chi: Vec<Complex64>,
    #[serde(skip)]
    pub d_chi: Vec<Complex64>,
    #[serde(skip)]
    pub dbar_chi: Vec<Complex64>,
    pub k_sup: f64,
    pub iterations: usize,
    pub increments: Vec<f64>,
    /// Largest ratio of successive increments.
    pub contraction: f64,
    pub jacobian_min: f64,
    pub residual_beltrami: f64,
}

impl BeltramiSolution {
    /// `χ` at index `(i, j)` of the patch square.
    pub fn on_square(&self, patch: &DiscPatch, values: &[Complex64]) -> Vec<Complex64> {
        let off = patch.m / 2;
        let n = self.grid.n;
        (0..patch.m)
            .flat_map(|i| (0..patch.m).map(move |j| (i + off) * n + j + off))
            .map(|p| values[p])
            .collect()
    }
}

pub fn solve_beltrami(field: &BeltramiField) -> Result<BeltramiSolution> {
    let grid = field.grid;
    let mu = &field.mu;
    let beurling = |k1: i64, k2: i64| {
        if k1 == 0 && k2 == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            let z = Complex64::new(k1 as f64, k2 as f64);
            z.conj() / z
        }
    };
    let rms = |v: &[Complex64]| (v.iter().map(|c| c.norm_sqr()).sum::<f64>() / v.len() as f64).sqrt();
    let mut g = mu.clone();
    let mut increments = Vec::new();
    let mut contraction: f64 = 0.0;
    let mut iterations = 0;
    if rms(&g) > 0.0 {
        loop {
            iterations += 1;
            let sg = periodic_multiplier(grid, &g, beurling);
            let next: Vec<Complex64> = mu.iter().zip(&sg).map(|(m, s)| m * (1.0 + s)).collect();
            let diff: Vec<Complex64> = next.iter().zip(&g).map(|(a, b)| a - b).collect();
            let inc = rms(&diff);
            g = next;
            if let Some(&prev) = increments.last() {
                let ratio: f64 = if prev > 0.0 { inc / prev } else { 0.0 };
                contraction = contraction.max(ratio);
                if ratio > field.k_sup + STALL_MARGIN {
                    return Err(Error::BeltramiStall {
                        iteration: iterations,
                        ratio,
                    });
                }
            }
            increments.push(inc);
            if inc <= BELTRAMI_TOLERANCE * rms(&g) {
                break;
            }
            if iterations >= MAX_ITERATIONS {
                return Err(Error::BeltramiStall {
                    iteration: iterations,
                    ratio: contraction,
                });
            }
        }
    }
    let n = g.len() as f64;
    let c = g.iter().sum::<Complex64>() / n;
    let centred: Vec<Complex64> = g.iter().map(|v| v - c).collect();
    let half = grid.half_width;
    let cauchy = |k1: i64, k2: i64| {
        if k1 == 0 && k2 == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            // ∂̄ has symbol (iπ/2w)(k1 + ik2) on the period 2w
            2.0 * half / (Complex64::i() * std::f64::consts::PI * Complex64::new(k1 as f64, k2 as f64))
        }
    };
    let periodic = periodic_multiplier(grid, &centred, cauchy);
    let mut chi: Vec<Complex64> = (0..grid.len())
        .map(|p| {
            let z = grid.z(p);
            z + c * z.conj() + periodic[p]
        })
        .collect();
    let shift = chi[grid.origin()];
    chi.iter_mut().for_each(|v| *v -= shift);
    let sg = periodic_multiplier(grid, &g, beurling);
    let d_chi: Vec<Complex64> = sg.iter().map(|s| 1.0 + s).collect();
    let jacobian_min = d_chi
        .iter()
        .zip(&g)
        .map(|(a, b)| a.norm_sqr() - b.norm_sqr())
        .fold(f64::INFINITY, f64::min);
    let mut sol = BeltramiSolution {
        grid,
        chi,
        d_chi,
        dbar_chi: g,
        k_sup: field.k_sup,
        iterations,
        increments,
        contraction,
        jacobian_min,
        residual_beltrami: 0.0,
    };
    sol.residual_beltrami = beltrami_defect(field, &sol, c);
    if !(jacobian_min > 0.0) {
        return Err(Error::NotInjective { jacobian_min });
    }
    Ok(sol)
}

/// `‖∂̄χ - μ∂χ‖₂ / ‖∂χ‖₂` with both derivatives re-evaluated from `χ`.
fn beltrami_defect(field: &BeltramiField, sol: &BeltramiSolution, c: Complex64) -> f64 {
    let grid = sol.grid;
    // periodic part χ - z - c z̄ (up to the constant shift)
    let periodic: Vec<Complex64> = (0..grid.len())
        .map(|p| {
            let z = grid.z(p);
            sol.chi[p] - z - c * z.conj()
        })
        .collect();
    // Wirtinger symbols on every mode, Nyquist included, matching T and S
    let base = std::f64::consts::PI / (2.0 * grid.half_width);
    let wirt = |conj: bool| {
        move |k1: i64, k2: i64| {
            let k = Complex64::new(k1 as f64, if conj { k2 as f64 } else { -(k2 as f64) });
            Complex64::i() * base * k
        }
    };
    let dbar_p = periodic_multiplier(grid, &periodic, wirt(true));
    let d_p = periodic_multiplier(grid, &periodic, wirt(false));
    let (mut num, mut den) = (0.0, 0.0);
    for p in 0..grid.len() {
        let d = 1.0 + d_p[p];
        let dbar = c + dbar_p[p];
        num += (dbar - field.mu[p] * d).norm_sqr();
        den += d.norm_sqr();
    }
    (num / den).sqrt()
}

/// Radial stretch `z ↦ z|z|^{K-1}/ρ^{K-1}` inside `|z| < ρ`, identity
/// outside, centred half a cell off the grid.
pub fn radial_stretch(grid: PatchGrid, k: f64, rho: f64) -> (BeltramiField, Vec<Complex64>) {
    let h = grid.spacing();
    let centre = Complex64::new(0.5 * h, 0.5 * h);
    let q = (k - 1.0) / (k + 1.0);
    let mut mu = Vec::with_capacity(grid.len());
    let mut exact = Vec::with_capacity(grid.len());
    for p in 0..grid.len() {
        let z = grid.z(p) - centre;
        let r = z.norm();
        if r < rho {
            mu.push(q * z / z.conj());
            exact.push(z * (r / rho).powf(k - 1.0));
        } else {
            mu.push(Complex64::new(0.0, 0.0));
            exact.push(z);
        }
    }
    (BeltramiField { grid, mu, k_sup: q }, exact)
}

/// Relative sup error of `χ` against `exact` after the best complex affine
/// fit `aχ + b` in least squares, over `|z|_∞ ≤ window`.
pub fn affine_sup_error(grid: PatchGrid, chi: &[Complex64], exact: &[Complex64], window: f64) -> f64 {
    let idx: Vec<usize> = (0..grid.len())
        .filter(|&p| {
            let z = grid.z(p);
            z.re.abs().max(z.im.abs()) <= window
        })
        .collect();
    let n = idx.len() as f64;
    let mc = idx.iter().map(|&p| chi[p]).sum::<Complex64>() / n;
    let me = idx.iter().map(|&p| exact[p]).sum::<Complex64>() / n;
    let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
    for &p in &idx {
        let dc = chi[p] - mc;
        num += dc.conj() * (exact[p] - me);
        den += dc.norm_sqr();
    }
    let a = num / den;
    let b = me - a * mc;
    let scale = idx.iter().map(|&p| exact[p].norm()).fold(0.0, f64::max);
    idx.iter().map(|&p| (a * chi[p] + b - exact[p]).norm()).fold(0.0, f64::max) / scale
}
