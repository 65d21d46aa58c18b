//! Nodal domains, Courant counts, doubling indices and the weighted
//! inequality verifiers.

use petgraph::unionfind::UnionFind;
use serde::Serialize;

use crate::eigen::EigenSystem;
use crate::error::{Error, Result};
use crate::gauge::GroundGauge;
use crate::grid::{GridField, TorusGrid};
use crate::quad::ball_integral;

/// Default relative zero-band threshold.
pub const DEFAULT_DELTA: f64 = 1e-3;

/// Thresholds of the sensitivity sweep reported with every Courant check.
pub const DELTA_SWEEP: [f64; 3] = [1e-4, 1e-3, 1e-2];

#[derive(Debug, Clone, Serialize)]
pub struct NodalDecomposition {
    pub grid: TorusGrid,
    /// 0 marks the zero band; domains are numbered from 1 in row-major order
    /// of their first cell.
    pub labels: Vec<u32>,
    pub domain_count: usize,
    pub delta: f64,
}

pub fn nodal_domains(u: &GridField, delta: f64) -> Result<NodalDecomposition> {
    if !(0.0..=0.1).contains(&delta) {
        return Err(Error::InvalidArgument(format!("zero-band threshold {delta} outside [0, 0.1]")));
    }
    let sup = u.sup_norm();
    if sup == 0.0 {
        return Err(Error::ZeroField);
    }
    let grid = u.grid;
    let n = grid.n();
    let cut = delta * sup;
    let sign = |p: usize| {
        let v = u.values[p];
        if v.abs() > cut {
            v.signum() as i8
        } else {
            0
        }
    };
    let mut uf = UnionFind::<usize>::new(grid.len());
    for p in 0..grid.len() {
        let s = sign(p);
        if s == 0 {
            continue;
        }
        let [i, j] = grid.axes(p);
        let mut neighbours = vec![grid.flat((i + 1) % n, j)];
        if grid.dim() == 2 {
            neighbours.push(grid.flat(i, (j + 1) % n));
        }
        for q in neighbours {
            if sign(q) == s {
                uf.union(p, q);
            }
        }
    }
    let mut labels = vec![0u32; grid.len()];
    let mut root_label = std::collections::HashMap::new();
    for (p, label) in labels.iter_mut().enumerate() {
        if sign(p) == 0 {
            continue;
        }
        let next = root_label.len() as u32 + 1;
        *label = *root_label.entry(uf.find(p)).or_insert(next);
    }
    Ok(NodalDecomposition {
        grid,
        labels,
        domain_count: root_label.len(),
        delta,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CourantEntry {
    pub index: usize,
    pub eigenvalue: f64,
    /// 1-based rank; degenerate clusters take their highest rank.
    pub rank: usize,
    pub domain_count: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CourantReport {
    pub delta: f64,
    pub entries: Vec<CourantEntry>,
}

impl CourantReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

/// 1-based ranks with ties resolved to the top of each cluster
/// (gap below `1e-6·max(1,|λ|)`).
pub fn cluster_ranks(eigenvalues: &[f64]) -> Vec<usize> {
    let m = eigenvalues.len();
    let mut ranks = vec![0; m];
    let mut start = 0;
    while start < m {
        let mut end = start;
        while end + 1 < m && eigenvalues[end + 1] - eigenvalues[end] < 1e-6 * eigenvalues[end].abs().max(1.0) {
            end += 1;
        }
        for r in &mut ranks[start..=end] {
            *r = end + 1;
        }
        start = end + 1;
    }
    ranks
}

pub fn courant_check(es: &EigenSystem, delta: f64) -> Result<CourantReport> {
    let ranks = cluster_ranks(&es.eigenvalues);
    let entries = es
        .eigenvectors
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let count = nodal_domains(u, delta)?.domain_count;
            Ok(CourantEntry {
                index: k,
                eigenvalue: es.eigenvalues[k],
                rank: ranks[k],
                domain_count: count,
                pass: count <= ranks[k],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CourantReport { delta, entries })
}

#[derive(Debug, Clone, Serialize)]
pub struct DoublingReport {
    pub x0: [f64; 2],
    pub radii: Vec<f64>,
    /// `Q(r)` for each radius.
    pub q_r: Vec<f64>,
    /// `Q(2r)` for each radius.
    pub q_2r: Vec<f64>,
    /// `log₂(Q(2r)/Q(r))`; `None` when `Q(r)` is numerically zero.
    pub beta: Vec<Option<f64>>,
}

impl DoublingReport {
    pub fn sup_beta(&self) -> Option<f64> {
        self.beta
            .iter()
            .copied()
            .collect::<Option<Vec<f64>>>()
            .map(|b| b.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Floor below which `Q(r)` counts as a numerically zero ball.
pub const ZERO_MASS: f64 = 1e-30;

pub fn doubling_index(u: &GridField, x0: [f64; 2], radii: &[f64]) -> Result<DoublingReport> {
    for &r in radii {
        if !(r > 0.0 && r < 0.25) {
            return Err(Error::Radii(format!("radius {r} outside (0, 1/4)")));
        }
    }
    let mass = |r: f64| ball_integral(&[u], x0, r, |v| v[0] * v[0]);
    let q_r: Vec<f64> = radii.iter().map(|&r| mass(r)).collect();
    let q_2r: Vec<f64> = radii.iter().map(|&r| mass(2.0 * r)).collect();
    let beta = q_r
        .iter()
        .zip(&q_2r)
        .map(|(a, b)| (*a >= ZERO_MASS).then(|| (b / a).log2()))
        .collect();
    Ok(DoublingReport {
        x0,
        radii: radii.to_vec(),
        q_r,
        q_2r,
        beta,
    })
}

/// Grid point of smallest `|u|` (first in row-major order on ties).
pub fn argmin_abs(u: &GridField) -> [f64; 2] {
    let mut best = 0;
    for (p, v) in u.values.iter().enumerate() {
        if v.abs() < u.values[best].abs() {
            best = p;
        }
    }
    u.grid.point(best)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CaccioppoliRow {
    pub r: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `∫_{B(r/2)} e^{2Z}|∇u|²` against
/// `r^{-2}∫_{B(r)} e^{2Z}u² + r²∫_{B(r)} e^{2Z}|Δu + 2∇Z·∇u|²`.
pub fn caccioppoli_verify(g: &GroundGauge, u: &GridField, x0: [f64; 2], radii: &[f64]) -> Result<Vec<CaccioppoliRow>> {
    g.z.grid.check_same(&u.grid)?;
    for &r in radii {
        if !(r > 0.0 && r < 0.25) {
            return Err(Error::Radii(format!("radius {r} outside (0, 1/4)")));
        }
    }
    let e2z = g.weight();
    let grad_u = u.gradient();
    let grad_z = g.z.gradient();
    let mut drift = u.laplacian();
    for (du, dz) in grad_u.iter().zip(&grad_z) {
        for ((o, a), b) in drift.values.iter_mut().zip(&du.values).zip(&dz.values) {
            *o += 2.0 * a * b;
        }
    }
    let grad_sq = GridField {
        grid: u.grid,
        values: (0..u.values.len())
            .map(|p| grad_u.iter().map(|d| d.values[p] * d.values[p]).sum())
            .collect(),
    };
    radii
        .iter()
        .map(|&r| {
            let lhs = ball_integral(&[&e2z, &grad_sq], x0, r / 2.0, |v| v[0] * v[1]);
            let mass = ball_integral(&[&e2z, u], x0, r, |v| v[0] * v[1] * v[1]);
            let tail = ball_integral(&[&e2z, &drift], x0, r, |v| v[0] * v[1] * v[1]);
            let rhs = mass / (r * r) + r * r * tail;
            if rhs <= 0.0 {
                return Err(Error::ZeroField);
            }
            Ok(CaccioppoliRow {
                r,
                lhs,
                rhs,
                ratio: lhs / rhs,
            })
        })
        .collect()
}

/// Periodic distance from the torus origin.
fn distance_to_origin(p: [f64; 2], dim: usize) -> f64 {
    let w = |x: f64| x.min(1.0 - x);
    if dim == 1 {
        w(p[0])
    } else {
        w(p[0]).hypot(w(p[1]))
    }
}

/// `∫(|w|²+|∇w|²)|x|^{-2β}` over `r² ∫|Δw|²|x|^{-2β}` for `w` supported in
/// `B(0,r) \ {0}`, the cell at the origin excluded from both sums.
pub fn aronszajn_verify(w: &GridField, r: f64, beta: f64) -> Result<f64> {
    if !(r > 0.0 && r <= 0.25) || beta < 0.0 {
        return Err(Error::Support(format!("need 0 < r <= 1/4 and β >= 0, got r = {r}, β = {beta}")));
    }
    let grid = w.grid;
    let sup = w.sup_norm();
    if sup == 0.0 {
        return Err(Error::ZeroField);
    }
    let h = grid.spacing();
    for (p, v) in w.values.iter().enumerate() {
        let d = distance_to_origin(grid.point(p), grid.dim());
        if (d > r || d < 1.5 * h) && v.abs() > 1e-14 * sup {
            return Err(Error::Support(format!("|w| = {v:e} at distance {d} from the origin")));
        }
    }
    let grad = w.gradient();
    let lap = w.laplacian();
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for p in 1..grid.len() {
        let d = distance_to_origin(grid.point(p), grid.dim());
        let weight = d.powf(-2.0 * beta);
        let g2: f64 = grad.iter().map(|g| g.values[p] * g.values[p]).sum();
        lhs += (w.values[p] * w.values[p] + g2) * weight;
        rhs += lap.values[p] * lap.values[p] * weight;
    }
    Ok(lhs / (r * r * rhs))
}

/// Smooth radial bump supported in `r/4 < |x| < r/2` around the torus origin.
pub fn annular_bump(grid: TorusGrid, r: f64) -> GridField {
    GridField::from_fn(grid, |p| {
        let d = distance_to_origin(p, grid.dim());
        let (a, b) = (r / 4.0, r / 2.0);
        if d <= a || d >= b {
            0.0
        } else {
            let t = (d - a) / (b - a);
            (-1.0 / (t * (1.0 - t))).exp() * 1e3
        }
    })
}

#[derive(Debug, Clone)]
pub struct FluxReport {
    /// `v(x) = ∫₀ˣ e^{2Z}u'`, with `v(0) = 0`.
    pub v: GridField,
    /// `‖v'' + e^{2Z}(λ-λ0)u‖ / ‖e^{2Z}(λ-λ0)u‖`; absent when `λ = λ0`.
    pub residual: Option<f64>,
    /// `sup |u(x) - u(0) - ∫₀ˣ e^{-2Z} v'|` relative to `sup|u|`.
    pub reconstruction_error: f64,
}

/// Antiderivative from grid point 0 of a periodic sample, including the
/// linear part from its mean; the Nyquist mode is dropped.
fn antiderivative(f: &GridField) -> GridField {
    let grid = f.grid;
    let spec = f.to_spectral();
    let mean = spec.coeffs[0].re;
    let mut periodic = spec.clone();
    for (p, c) in periodic.coeffs.iter_mut().enumerate() {
        let k = grid.mode(p)[0];
        *c = if k == 0 || grid.is_nyquist(p) {
            num_complex::Complex64::new(0.0, 0.0)
        } else {
            *c / num_complex::Complex64::new(0.0, 2.0 * std::f64::consts::PI * k as f64)
        };
    }
    let per = periodic.to_grid();
    let base = per.values[0];
    GridField {
        grid,
        values: per
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v - base + mean * grid.point(i)[0])
            .collect(),
    }
}

pub fn flux_variable_1d(g: &GroundGauge, u: &GridField, lambda: f64) -> Result<FluxReport> {
    let grid = u.grid;
    if grid.dim() != 1 {
        return Err(Error::InvalidArgument("flux variable is one-dimensional".into()));
    }
    grid.check_same(&g.z.grid)?;
    let e2z = g.weight();
    let du = u.derivative(0);
    let flux = e2z.zip_map(&du, |a, b| a * b)?;
    let v = antiderivative(&flux);

    // v' is recovered from v itself, not from the flux
    let mean = flux.mean();
    let per = GridField {
        grid,
        values: v.values.iter().enumerate().map(|(i, x)| x - mean * grid.point(i)[0]).collect(),
    };
    let dv = per.derivative(0).map(|x| x + mean);
    let back = antiderivative(&dv.zip_map(&e2z, |a, b| a / b)?);
    let sup = u.sup_norm().max(f64::MIN_POSITIVE);
    let reconstruction_error = back
        .values
        .iter()
        .zip(&u.values)
        .map(|(b, x)| (x - u.values[0] - b).abs())
        .fold(0.0, f64::max)
        / sup;

    let kappa = lambda - g.lambda0;
    let residual = if kappa.abs() <= 1e-12 * lambda.abs().max(1.0) {
        None
    } else {
        let source = e2z.zip_map(u, |a, b| a * kappa * b)?;
        let d2v = flux.derivative(0);
        let r = d2v.zip_map(&source, |a, b| a + b)?;
        Some(r.norm() / source.norm())
    };
    Ok(FluxReport {
        v,
        residual,
        reconstruction_error,
    })
}
