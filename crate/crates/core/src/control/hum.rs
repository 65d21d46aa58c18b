//! Minimal-norm band controls from the observability Gramian.
//!
//! On a window of length `τ` the control is
//! `f(t, x) = 1_ω(x) Σ_l c_l e^{-λ_l(τ - t)} u_l(x)`; with
//! `G_kl = ∫_ω u_k u_l · φ1(λ_k + λ_l, τ)` the band reaches zero at `τ` iff
//! `G c = -e^{-Λτ} a(0)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::ControlSet;
use crate::eigen::EigenSystem;
use crate::error::{Error, Result};

/// Gramian condition number above which the solve is regularized.
pub const GRAMIAN_CONDITION_LIMIT: f64 = 1e12;

/// `∫₀^τ e^{-x s} ds = -expm1(-xτ)/x`.
pub fn phi1(x: f64, tau: f64) -> f64 {
    if x == 0.0 {
        tau
    } else {
        -(-x * tau).exp_m1() / x
    }
}

/// `∫_ω u_k u_l` for `k` in `rows`, `l` in `cols`.
pub fn observation_matrix(es: &EigenSystem, omega: &ControlSet, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    let restricted: Vec<_> = cols.iter().map(|&l| omega.restrict(&es.eigenvectors[l])).collect();
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| es.eigenvectors[rows[i]].dot(&restricted[j]))
}

#[derive(Debug, Clone, Serialize)]
pub struct HumControl {
    pub band: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub tau: f64,
    pub c: Vec<f64>,
    #[serde(skip)]
    pub gramian: DMatrix<f64>,
    pub condition: f64,
    /// `‖G c - rhs‖ / ‖rhs‖`.
    pub defect: f64,
    /// `‖f‖_{L²(ω × (0, τ))}`.
    pub cost: f64,
    pub regularized: bool,
}

pub fn hum_control(es: &EigenSystem, omega: &ControlSet, band: &[usize], tau: f64, a0: &[f64]) -> Result<HumControl> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("control window {tau} must be positive")));
    }
    if band.is_empty() || band.len() != a0.len() || band.iter().any(|&k| k >= es.len()) {
        return Err(Error::InvalidArgument(
            "band and initial coefficients must match computed modes".into(),
        ));
    }
    let lambdas: Vec<f64> = band.iter().map(|&k| es.eigenvalues[k]).collect();
    let obs = observation_matrix(es, omega, band, band);
    let n = band.len();
    let gramian = DMatrix::from_fn(n, n, |i, j| obs[(i, j)] * phi1(lambdas[i] + lambdas[j], tau));
    let rhs = DVector::from_iterator(n, lambdas.iter().zip(a0).map(|(l, a)| -(-l * tau).exp() * a));
    let eig = SymmetricEigen::new(gramian.clone());
    let emax = eig.eigenvalues.max();
    let emin = eig.eigenvalues.min();
    let condition = if emin > 0.0 { emax / emin } else { f64::INFINITY };
    let regularized = !(condition <= GRAMIAN_CONDITION_LIMIT);
    let c = if rhs.norm() == 0.0 {
        DVector::zeros(n)
    } else if regularized {
        // truncated pseudo-inverse
        let cut = emax / GRAMIAN_CONDITION_LIMIT;
        let proj = eig.eigenvectors.transpose() * &rhs;
        let scaled = DVector::from_iterator(
            n,
            proj.iter()
                .zip(eig.eigenvalues.iter())
                .map(|(p, e)| if *e > cut { p / e } else { 0.0 }),
        );
        &eig.eigenvectors * scaled
    } else {
        gramian
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&rhs))
            .ok_or_else(|| Error::InvalidArgument("Gramian not positive definite".into()))?
    };
    let rn = rhs.norm();
    let defect = if rn > 0.0 { (&gramian * &c - &rhs).norm() / rn } else { 0.0 };
    let cost = c.dot(&(&gramian * &c)).max(0.0).sqrt();
    Ok(HumControl {
        band: band.to_vec(),
        lambdas,
        tau,
        c: c.iter().copied().collect(),
        gramian,
        condition,
        defect,
        cost,
        regularized,
    })
}

/// Finite-difference minimality check: adds `±η δf` for random admissible
/// perturbations `δf` (combinations of `e^{-μ(τ-t)} u_k 1_ω`, corrected to
/// leave the band's terminal state unchanged) and returns the smallest
/// relative cost increase observed; positive means the control is locally
/// minimal among steering controls.
pub fn minimality_margin(es: &EigenSystem, omega: &ControlSet, hum: &HumControl, directions: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..es.len()).collect();
    let obs = observation_matrix(es, omega, &all, &all);
    let lmax = hum.lambdas.iter().copied().fold(1.0, f64::max);
    let tau = hum.tau;
    // basis element: (rate μ, mode k)
    let inner = |a: (f64, usize), b: (f64, usize)| obs[(a.1, b.1)] * phi1(a.0 + b.0, tau);
    let control: Vec<((f64, usize), f64)> = hum
        .band
        .iter()
        .zip(&hum.lambdas)
        .zip(&hum.c)
        .map(|((&k, &l), &c)| ((l, k), c))
        .collect();
    let norm_sq = |f: &[((f64, usize), f64)]| -> f64 {
        f.iter()
            .map(|(a, ca)| f.iter().map(|(b, cb)| ca * cb * inner(*a, *b)).sum::<f64>())
            .sum()
    };
    let base = norm_sq(&control);
    let mut margin = f64::INFINITY;
    for _ in 0..directions {
        let mut dir: Vec<((f64, usize), f64)> = (0..4)
            .map(|_| {
                (
                    (rng.random_range(0.0..lmax), rng.random_range(0..es.len())),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        // effect on band mode j at τ: Σ β ⟨u_j 1_ω, u_k⟩ φ1(λ_j + μ, τ)
        let effect = DVector::from_iterator(
            hum.band.len(),
            hum.band
                .iter()
                .zip(&hum.lambdas)
                .map(|(&j, &lj)| dir.iter().map(|((mu, k), b)| b * obs[(j, *k)] * phi1(lj + mu, tau)).sum::<f64>()),
        );
        let d = match hum.gramian.clone().cholesky() {
            Some(ch) => ch.solve(&effect),
            None => continue,
        };
        for (((&k, &l), dk), _) in hum.band.iter().zip(&hum.lambdas).zip(d.iter()).zip(0..) {
            dir.push(((l, k), -dk));
        }
        let dn = norm_sq(&dir).sqrt();
        if dn == 0.0 {
            continue;
        }
        let eta = 1e-3 * base.sqrt().max(1e-300) / dn;
        for sign in [1.0, -1.0] {
            let mut moved = control.clone();
            moved.extend(dir.iter().map(|(a, b)| (*a, sign * eta * b)));
            margin = margin.min((norm_sq(&moved) - base) / base.max(f64::MIN_POSITIVE));
        }
    }
    margin
}
