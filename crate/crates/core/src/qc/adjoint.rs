//! Positive solution ψ of `div(e^{2Z}∇ψ) + κ e^{2Z} ψ = 0`, `ψ = 1` on the
//! edge of the computational square, by a weighted five-point scheme.

use serde::Serialize;

use super::{sample_tensor, DiscPatch};
use crate::error::{Error, Result};
use crate::gauge::GroundGauge;

/// ψ and the weight `e^{2Z}` on the closed square `[-2R, 2R]²`, `(M+1)²`
/// points row-major; index `(i, j)` with `i, j < M` coincides with the
/// periodic square grid.
#[derive(Debug, Clone, Serialize)]
pub struct AdjointGauge {
    pub patch: DiscPatch,
    pub kappa: f64,
    pub psi: Vec<f64>,
    pub weight: Vec<f64>,
}

impl AdjointGauge {
    /// Restriction of a closed-square field to the periodic `M × M` grid.
    pub fn restrict(&self, f: &[f64]) -> Vec<f64> {
        let m = self.patch.m;
        (0..m).flat_map(|i| f[i * (m + 1)..i * (m + 1) + m].iter().copied()).collect()
    }

    pub fn min_psi(&self) -> f64 {
        self.psi.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Torus coordinates of the closed square around the patch centre.
pub fn box_coords(patch: &DiscPatch) -> (Vec<f64>, Vec<f64>) {
    let grid = patch.square();
    let h = grid.spacing();
    let axis = |c: f64| (0..=patch.m).map(|i| c - grid.half_width + i as f64 * h).collect();
    (axis(patch.center[0]), axis(patch.center[1]))
}

pub fn adjoint_gauge(g: &GroundGauge, lambda: f64, patch: &DiscPatch) -> Result<AdjointGauge> {
    let kappa = lambda - g.lambda0;
    if kappa < -1e-9 * lambda.abs().max(1.0) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} below ground energy {}", g.lambda0)));
    }
    let (xs, ys) = box_coords(patch);
    let weight = sample_tensor(&g.u0, &xs, &ys)?.into_iter().map(|u| u * u).collect();
    adjoint_gauge_weighted(weight, kappa.max(0.0), patch)
}

/// ψ for an explicit weight `e^{2Z}` sampled on the closed square.
pub fn adjoint_gauge_weighted(weight: Vec<f64>, kappa: f64, patch: &DiscPatch) -> Result<AdjointGauge> {
    let m = patch.m;
    if weight.len() != (m + 1) * (m + 1) || weight.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::InvalidArgument("weight must be positive on the closed square".into()));
    }
    let mut psi = vec![1.0; weight.len()];
    if kappa > 0.0 {
        let op = Stencil::new(&weight, m, patch.square().spacing(), kappa);
        let rhs: Vec<f64> = op.interior().map(|p| kappa * weight[p]).collect();
        let phi = op.solve(&rhs)?;
        for (p, f) in op.interior().zip(&phi) {
            psi[p] += f;
        }
        let min_psi = psi.iter().copied().fold(f64::INFINITY, f64::min);
        if min_psi <= 0.0 {
            return Err(Error::PatchTooLarge { min_psi });
        }
    }
    Ok(AdjointGauge {
        patch: *patch,
        kappa,
        psi,
        weight,
    })
}

/// Smallest `κ` with a nontrivial solution of `-div(a∇φ) = κ a φ`, `φ = 0`
/// on the edge, for the same discretization.
pub fn dirichlet_ground_energy(weight: &[f64], patch: &DiscPatch) -> Result<f64> {
    let m = patch.m;
    let op = Stencil::new(weight, m, patch.square().spacing(), 0.0);
    let a: Vec<f64> = op.interior().map(|p| weight[p]).collect();
    let mut x: Vec<f64> = op
        .interior()
        .map(|p| {
            let (i, j) = (p / (m + 1), p % (m + 1));
            let s = |k: usize| (std::f64::consts::PI * k as f64 / m as f64).sin();
            s(i) * s(j)
        })
        .collect();
    let mut energy = f64::INFINITY;
    let mut ax = vec![0.0; x.len()];
    for _ in 0..200 {
        let b: Vec<f64> = x.iter().zip(&a).map(|(v, w)| v * w).collect();
        x = op.solve(&b)?;
        op.apply(&x, &mut ax);
        let num: f64 = x.iter().zip(&ax).map(|(p, q)| p * q).sum();
        let den: f64 = x.iter().zip(&a).map(|(p, w)| w * p * p).sum();
        let next = num / den;
        let scale = den.sqrt();
        x.iter_mut().for_each(|v| *v /= scale);
        if (next - energy).abs() <= 1e-13 * next {
            return Ok(next);
        }
        energy = next;
    }
    Ok(energy)
}

/// `-div(a∇·) - κa` on the interior nodes, zero Dirichlet data.
struct Stencil<'a> {
    m: usize,
    inv_h2: f64,
    kappa: f64,
    weight: &'a [f64],
    /// face `(i+½, j)` at `i * (m+1) + j`
    fx: Vec<f64>,
    /// face `(i, j+½)` at `i * m + j`
    fy: Vec<f64>,
}

impl<'a> Stencil<'a> {
    fn new(weight: &'a [f64], m: usize, h: f64, kappa: f64) -> Self {
        let w = m + 1;
        let fx = (0..m * w).map(|p| 0.5 * (weight[p] + weight[p + w])).collect();
        let fy = (0..w * m)
            .map(|p| {
                let (i, j) = (p / m, p % m);
                0.5 * (weight[i * w + j] + weight[i * w + j + 1])
            })
            .collect();
        Self {
            m,
            inv_h2: 1.0 / (h * h),
            kappa,
            weight,
            fx,
            fy,
        }
    }

    /// Closed-square indices of the interior nodes, in unknown order.
    fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        let w = self.m + 1;
        (1..self.m).flat_map(move |i| (1..self.m).map(move |j| i * w + j))
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (m, w, k) = (self.m, self.m + 1, self.m - 1);
        let at = |i: usize, j: usize| {
            if i == 0 || j == 0 || i == m || j == m {
                0.0
            } else {
                x[(i - 1) * k + j - 1]
            }
        };
        for i in 1..m {
            for j in 1..m {
                let c = at(i, j);
                let e = self.fx[i * w + j] * (c - at(i + 1, j))
                    + self.fx[(i - 1) * w + j] * (c - at(i - 1, j))
                    + self.fy[i * m + j] * (c - at(i, j + 1))
                    + self.fy[i * m + j - 1] * (c - at(i, j - 1));
                out[(i - 1) * k + j - 1] = e * self.inv_h2 - self.kappa * self.weight[i * w + j] * c;
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let (m, w) = (self.m, self.m + 1);
        self.interior()
            .map(|p| {
                let (i, j) = (p / w, p % w);
                (self.fx[i * w + j] + self.fx[(i - 1) * w + j] + self.fy[i * m + j] + self.fy[i * m + j - 1]) * self.inv_h2
                    - self.kappa * self.weight[p]
            })
            .collect()
    }

    /// Jacobi-preconditioned conjugate gradients; negative curvature means
    /// `κ` exceeds the Dirichlet ground energy.
    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = b.len();
        let diag = self.diagonal();
        if diag.iter().any(|d| *d <= 0.0) {
            return Err(Error::PatchTooLarge {
                min_psi: f64::NEG_INFINITY,
            });
        }
        let dot = |p: &[f64], q: &[f64]| -> f64 { p.iter().zip(q).map(|(a, b)| a * b).sum() };
        let bnorm = dot(b, b).sqrt();
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = dot(&r, &z);
        for _ in 0..50 * self.m {
            self.apply(&p, &mut ap);
            let curv = dot(&p, &ap);
            if curv <= 0.0 {
                return Err(Error::PatchTooLarge {
                    min_psi: f64::NEG_INFINITY,
                });
            }
            let alpha = rz / curv;
            for ((xi, ri), (pi, api)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&ap)) {
                *xi += alpha * pi;
                *ri -= alpha * api;
            }
            if dot(&r, &r).sqrt() <= 1e-13 * bnorm {
                return Ok(x);
            }
            for ((zi, ri), d) in z.iter_mut().zip(&r).zip(&diag) {
                *zi = ri / d;
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        Err(Error::NonConvergence {
            iterations: 50 * self.m,
            worst_residual: dot(&r, &r).sqrt() / bnorm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn flat(m: usize) -> Vec<f64> {
        vec![1.0; (m + 1) * (m + 1)]
    }

    #[test]
    fn zero_kappa_gives_unit_gauge() {
        let patch = DiscPatch::new([0.5, 0.5], 0.0625, 64).unwrap();
        let a: Vec<f64> = (0..65 * 65).map(|p| 1.0 + 0.1 * ((p % 7) as f64)).collect();
        let g = adjoint_gauge_weighted(a, 0.0, &patch).unwrap();
        assert!(g.psi.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn flat_ground_energy_closed_form() {
        let patch = DiscPatch::new([0.5, 0.5], 0.0625, 64).unwrap();
        let h = patch.square().spacing();
        let e = dirichlet_ground_energy(&flat(64), &patch).unwrap();
        let exact = 8.0 * (PI / 128.0).sin().powi(2) / (h * h);
        assert!((e - exact).abs() < 1e-9 * exact, "{e} {exact}");
    }

    #[test]
    fn flat_gauge_matches_sine_series() {
        // φ = ψ - 1 solves Δφ + κφ = -κ on the square of side L with zero edge data
        let patch = DiscPatch::new([0.5, 0.5], 0.0625, 128).unwrap();
        let kappa = 1.0;
        let g = adjoint_gauge_weighted(flat(128), kappa, &patch).unwrap();
        assert!(g.min_psi() > 0.9);
        let l = 4.0 * patch.radius;
        let mut centre = 0.0;
        for p in (1..400).step_by(2) {
            for q in (1..400).step_by(2) {
                let lam = PI * PI * ((p * p + q * q) as f64) / (l * l);
                let b = 16.0 / (PI * PI * (p * q) as f64);
                let s = ((p / 2 + q / 2) % 2) as f64;
                centre += kappa * b / (lam - kappa) * (1.0 - 2.0 * s);
            }
        }
        let fd = g.psi[64 * 129 + 64] - 1.0;
        assert!((fd - centre).abs() < 1e-3 * centre.abs(), "{fd} {centre}");
    }

    #[test]
    fn beyond_ground_energy_rejected() {
        let patch = DiscPatch::new([0.5, 0.5], 0.0625, 64).unwrap();
        let a: Vec<f64> = (0..65 * 65)
            .map(|p| {
                let (i, j) = (p / 65, p % 65);
                (0.3 * ((i as f64) / 64.0 * PI).sin() * ((j as f64) / 32.0).cos()).exp()
            })
            .collect();
        let e = dirichlet_ground_energy(&a, &patch).unwrap();
        let ok = adjoint_gauge_weighted(a.clone(), 0.5 * e, &patch).unwrap();
        assert!(ok.min_psi() > 0.0);
        assert!(matches!(
            adjoint_gauge_weighted(a, 1.1 * e, &patch),
            Err(Error::PatchTooLarge { .. })
        ));
    }
}
