//! Empirical constant in `sup_𝐓|P_λu| ≤ e^{C√(λ-λ0)} sup_ω|P_λu|`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::hum::observation_matrix;
use super::{retained, synthesize, ControlSet};
use crate::eigen::EigenSystem;
use crate::error::{Error, Result};

/// Exponent of the interpolated form `sup|u/u0| / (sup_ω|u/u0|^α ‖u/u0‖^{1-α})`.
pub const INTERPOLATION_ALPHA: f64 = 0.5;
/// Gram floor below which `sup_ω|P_λu|` is no longer resolved in double
/// precision.
pub const RESOLUTION_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralInequalityReport {
    pub lambdas: Vec<f64>,
    /// `√(λ - λ0)`.
    pub sqrt_gaps: Vec<f64>,
    /// `log max_trials sup_𝐓|P_λu| / sup_ω|P_λu|`.
    pub log_ratios: Vec<f64>,
    /// `log max_trials` of the interpolated form with exponent `alpha`.
    pub log_interpolated: Vec<f64>,
    /// Smallest over largest eigenvalue of the `ω`-Gram matrix of the
    /// retained modes.
    pub gram_floor: Vec<f64>,
    /// Cutoffs whose Gram floor is above `RESOLUTION_FLOOR`; only these
    /// enter the fit, the others sit at the roundoff ceiling.
    pub resolved: Vec<bool>,
    pub alpha: f64,
    pub trials: usize,
    /// Slope and raised intercept of the envelope `C√(λ-λ0) + c0`.
    pub c_fit: f64,
    pub c0: f64,
    /// Root-mean-square least-squares residual over the log range.
    pub fit_residual: f64,
    /// Resolved cutoffs above the envelope.
    pub violations: usize,
    /// Largest `log R - envelope` over unresolved cutoffs, `-∞` if none.
    pub censored_excess: f64,
}

/// For each cutoff in `lambdas`, draws `trials` coefficient vectors on the
/// retained modes, standard Gaussian in `L²(ω)`, and records the worst
/// sup-ratio; then fits the envelope by least squares over the resolved
/// cutoffs and raises its intercept to cover them.
pub fn spectral_inequality_probe(
    es: &EigenSystem,
    omega: &ControlSet,
    lambdas: &[f64],
    trials: usize,
    seed: u64,
) -> Result<SpectralInequalityReport> {
    if es.grid.dim() != 1 {
        return Err(Error::InvalidArgument("the spectral inequality probe is 1D".into()));
    }
    if trials == 0 || lambdas.is_empty() {
        return Err(Error::InvalidArgument("probe needs at least one cutoff and one trial".into()));
    }
    let lambda0 = es.eigenvalues[0];
    let u0 = &es.eigenvectors[0];
    let u0_min = u0.min();
    if !(u0_min > 0.0) {
        return Err(Error::PositivityViolated { ratio: u0_min / u0.max() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut log_ratios, mut log_interpolated, mut sqrt_gaps) = (Vec::new(), Vec::new(), Vec::new());
    let mut gram_floor = Vec::new();
    for &lambda in lambdas {
        let indices: Vec<usize> = (0..es.len()).filter(|&k| retained(es.eigenvalues[k], lambda)).collect();
        if indices.is_empty() {
            return Err(Error::InvalidArgument(format!("cutoff {lambda} retains no mode")));
        }
        let (whiten, gram) = observation_whitening(es, omega, &indices);
        gram_floor.push(gram);
        let (mut worst, mut worst_interp) = (0.0f64, 0.0f64);
        for _ in 0..trials {
            let z = DVector::from_fn(indices.len(), |_, _| StandardNormal.sample(&mut rng));
            let a: Vec<f64> = (&whiten * z).iter().copied().collect();
            let u = synthesize(es, &indices, &a);
            let on_omega = omega.sup(&u.values);
            if on_omega == 0.0 {
                return Err(Error::UcpViolation { lambda });
            }
            worst = worst.max(u.sup_norm() / on_omega);
            let q = u.zip_map(u0, |a, b| a / b)?;
            let interp = q.sup_norm() / (omega.sup(&q.values).powf(INTERPOLATION_ALPHA) * q.norm().powf(1.0 - INTERPOLATION_ALPHA));
            worst_interp = worst_interp.max(interp);
        }
        log_ratios.push(worst.ln());
        log_interpolated.push(worst_interp.ln());
        sqrt_gaps.push((lambda - lambda0).max(0.0).sqrt());
    }
    let resolved: Vec<bool> = gram_floor.iter().map(|g| *g >= RESOLUTION_FLOOR).collect();
    let (fx, fy): (Vec<f64>, Vec<f64>) = sqrt_gaps
        .iter()
        .zip(&log_ratios)
        .zip(&resolved)
        .filter(|(_, r)| **r)
        .map(|((x, y), _)| (*x, *y))
        .unzip();
    let (c_fit, intercept) = least_squares_line(&fx, &fy);
    let resid: Vec<f64> = fx.iter().zip(&fy).map(|(x, y)| y - c_fit * x - intercept).collect();
    let c0 = intercept + resid.iter().copied().fold(0.0, f64::max);
    let range = fy.iter().copied().fold(f64::NEG_INFINITY, f64::max) - fy.iter().copied().fold(f64::INFINITY, f64::min);
    let rms = (resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64).sqrt();
    let fit_residual = if range > 0.0 { rms / range } else { 0.0 };
    let violations = fx
        .iter()
        .zip(&fy)
        .filter(|(x, y)| **y > c_fit * **x + c0 + 1e-12 * (1.0 + y.abs()))
        .count();
    let censored_excess = sqrt_gaps
        .iter()
        .zip(&log_ratios)
        .zip(&resolved)
        .filter(|(_, r)| !**r)
        .map(|((x, y), _)| y - c_fit * x - c0)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SpectralInequalityReport {
        lambdas: lambdas.to_vec(),
        sqrt_gaps,
        log_ratios,
        log_interpolated,
        gram_floor,
        resolved,
        alpha: INTERPOLATION_ALPHA,
        trials,
        c_fit,
        c0,
        fit_residual,
        violations,
        censored_excess,
    })
}

/// `M_ω^{-1/2}` on the retained span, `M_ω` the Gram matrix of the modes
/// over `ω`; trials drawn through it are standard Gaussian in `L²(ω)`.
fn observation_whitening(es: &EigenSystem, omega: &ControlSet, indices: &[usize]) -> (DMatrix<f64>, f64) {
    let m = observation_matrix(es, omega, indices, indices);
    let eig = SymmetricEigen::new(0.5 * (&m + m.transpose()));
    let floor = eig.eigenvalues.max() * f64::EPSILON;
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.max(floor).sqrt()));
    (
        &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose(),
        eig.eigenvalues.min() / eig.eigenvalues.max(),
    )
}

/// Slope and intercept of the least-squares line; slope zero for a single
/// abscissa.
fn least_squares_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return (0.0, my);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
