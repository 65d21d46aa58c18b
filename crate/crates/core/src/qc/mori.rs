//! Two-sided Hölder bounds `C⁻¹|Δz|^{1/α} ≤ |Δχ| ≤ C|Δz|^α` and three-circles
//! ratios, for holomorphic functions and over deformed balls.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Step of the exponent grid `{1, 1 - step, …}`.
pub const ALPHA_STEP: f64 = 0.005;
/// Allowed growth of the Hölder constant from large-scale to small-scale pairs.
pub const SCALE_BALANCE: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MoriFit {
    pub alpha: f64,
    pub c: f64,
    pub violations: usize,
    pub pairs: usize,
}

/// `count` distinct index pairs drawn uniformly from `0..points`.
pub fn sample_pairs(points: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count && points > 1 {
        let a = rng.random_range(0..points);
        let b = rng.random_range(0..points);
        if a != b {
            out.push((a, b));
        }
    }
    out
}

/// Fits `(α, C)` for the map `domain[i] ↦ image[i]` over the given pairs,
/// distances normalized by the largest modulus on each side.
///
/// `α` is the largest grid exponent for which neither bound's constant over
/// pairs below the median distance exceeds [`SCALE_BALANCE`] times its value
/// over the pairs above it; `C` is the smallest constant making both bounds
/// hold on every pair.
pub fn mori_estimate(domain: &[Complex64], image: &[Complex64], pairs: &[(usize, usize)]) -> MoriFit {
    let sd = domain.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let si = image.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let dist: Vec<(f64, f64)> = pairs
        .iter()
        .map(|&(a, b)| ((domain[a] - domain[b]).norm() / sd, (image[a] - image[b]).norm() / si))
        .filter(|(d, e)| *d > 0.0 && *e > 0.0)
        .collect();
    if dist.is_empty() {
        return MoriFit {
            alpha: 1.0,
            c: 1.0,
            violations: 0,
            pairs: 0,
        };
    }
    let mut sorted: Vec<f64> = dist.iter().map(|d| d.0).collect();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let constants = |alpha: f64| {
        // (small upper, large upper, small lower, large lower)
        let mut c = [0.0f64; 4];
        for &(d, e) in &dist {
            let up = e / d.powf(alpha);
            let lo = d.powf(1.0 / alpha) / e;
            let k = if d <= median { 0 } else { 1 };
            c[k] = c[k].max(up);
            c[2 + k] = c[2 + k].max(lo);
        }
        c
    };
    let steps = (1.0 / ALPHA_STEP).round() as usize;
    let mut alpha = ALPHA_STEP;
    for s in 0..steps {
        let a = 1.0 - s as f64 * ALPHA_STEP;
        let c = constants(a);
        if c[0] <= SCALE_BALANCE * c[1] && c[2] <= SCALE_BALANCE * c[3] {
            alpha = a;
            break;
        }
    }
    let c = constants(alpha).into_iter().fold(1.0, f64::max);
    let violations = dist
        .iter()
        .filter(|&&(d, e)| e > c * d.powf(alpha) * (1.0 + 1e-12) || d.powf(1.0 / alpha) > c * e * (1.0 + 1e-12))
        .count();
    MoriFit {
        alpha,
        c,
        violations,
        pairs: dist.len(),
    }
}

/// `max_{|z - c| = r} |h|` by dense sampling and golden-section refinement.
fn circle_max(h: &impl Fn(Complex64) -> Complex64, center: Complex64, r: f64) -> f64 {
    const SAMPLES: usize = 4096;
    let val = |t: f64| h(center + Complex64::from_polar(r, t)).norm();
    let dt = 2.0 * std::f64::consts::PI / SAMPLES as f64;
    let (best, mut m) = (0..SAMPLES)
        .map(|a| (a, val(a as f64 * dt)))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = ((best as f64 - 1.0) * dt, (best as f64 + 1.0) * dt);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (val(x1), val(x2));
    for _ in 0..60 {
        if f1 > f2 {
            hi = x2;
            (x2, f2) = (x1, f1);
            x1 = hi - g * (hi - lo);
            f1 = val(x1);
        } else {
            lo = x1;
            (x1, f1) = (x2, f2);
            x2 = lo + g * (hi - lo);
            f2 = val(x2);
        }
    }
    m = m.max(f1).max(f2);
    m
}

fn check_radii(r1: f64, r2: f64, theta: f64) -> Result<f64> {
    if !(r1 > 0.0 && r1 < r2) {
        return Err(Error::Radii(format!("need 0 < r1 < r2, got {r1}, {r2}")));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Radii(format!("theta {theta} outside (0, 1)")));
    }
    Ok(r1.powf(theta) * r2.powf(1.0 - theta))
}

/// `m(r) / (m(r1)^θ m(r2)^{1-θ})` with `r = r1^θ r2^{1-θ}` and `m` the
/// maximum modulus of a holomorphic `h` on circles around `center`.
pub fn three_circles_check(h: impl Fn(Complex64) -> Complex64, center: Complex64, r1: f64, r2: f64, theta: f64) -> Result<f64> {
    let r = check_radii(r1, r2, theta)?;
    let den = circle_max(&h, center, r1).powf(theta) * circle_max(&h, center, r2).powf(1.0 - theta);
    if den == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(circle_max(&h, center, r) / den)
}

/// `sup_{B_χ(r/2)}|f| / (sup_{B_χ(r1)}|f|^θ sup_{B_χ(r2)}|f|^{1-θ})` over grid
/// nodes, `B_χ(ρ) = {z : |χ(z)| ≤ ρ}`.
pub fn three_circles_deformed(f: &[f64], chi: &[Complex64], r1: f64, r2: f64, theta: f64) -> Result<f64> {
    let r = check_radii(r1, r2, theta)?;
    let sup = |rho: f64| {
        f.iter()
            .zip(chi)
            .filter(|(_, c)| c.norm() <= rho)
            .map(|(v, _)| v.abs())
            .fold(0.0, f64::max)
    };
    let den = sup(r1).powf(theta) * sup(r2).powf(1.0 - theta);
    if den == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(sup(0.5 * r) / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc_points(n: usize) -> Vec<Complex64> {
        let h = 2.0 / n as f64;
        (0..n * n)
            .map(|p| Complex64::new(-1.0 + (p / n) as f64 * h, -1.0 + (p % n) as f64 * h))
            .filter(|z| z.norm() <= 1.0)
            .collect()
    }

    #[test]
    fn identity_is_lipschitz_with_unit_constant() {
        let pts = disc_points(100);
        let pairs = sample_pairs(pts.len(), 10_000, 3);
        let fit = mori_estimate(&pts, &pts, &pairs);
        assert_eq!(fit.alpha, 1.0);
        assert!((fit.c - 1.0).abs() < 1e-12);
        assert_eq!(fit.violations, 0);
    }

    #[test]
    fn affine_map_bi_lipschitz() {
        let pts = disc_points(100);
        let img: Vec<Complex64> = pts.iter().map(|z| z + 0.3 * z.conj()).collect();
        let pairs = sample_pairs(pts.len(), 10_000, 4);
        let fit = mori_estimate(&pts, &img, &pairs);
        assert_eq!(fit.alpha, 1.0);
        assert!(fit.c <= 1.3 / 0.7 * (1.0 + 1e-12), "{}", fit.c);
        assert_eq!(fit.violations, 0);
        let inv = mori_estimate(&img, &pts, &pairs);
        assert!(inv.alpha * fit.alpha <= 1.0 + 1e-6);
    }

    #[test]
    fn radial_stretch_exponent_at_origin() {
        let k = 1.5;
        let pts = disc_points(200);
        let img: Vec<Complex64> = pts.iter().map(|z| z * z.norm().powf(k - 1.0)).collect();
        let origin = pts.iter().position(|z| z.norm() == 0.0).unwrap();
        let pairs: Vec<(usize, usize)> = (0..pts.len()).filter(|&p| p != origin).map(|p| (origin, p)).collect();
        let fit = mori_estimate(&pts, &img, &pairs);
        assert!(fit.alpha <= 1.0 / k + 0.05, "{}", fit.alpha);
        assert!(fit.alpha > 0.5);
        assert_eq!(fit.violations, 0);
    }

    #[test]
    fn monomials_attain_equality() {
        for n in 1..6 {
            let r = three_circles_check(|z| z.powi(n), Complex64::new(0.0, 0.0), 0.1, 0.8, 0.3).unwrap();
            assert!((r - 1.0).abs() < 1e-12, "{n}: {r}");
        }
    }

    #[test]
    fn random_polynomials_obey_hadamard() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let deg = rng.random_range(1..=8);
            let coef: Vec<Complex64> = (0..=deg)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let p = |z: Complex64| coef.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c);
            let theta = rng.random_range(0.1..0.9);
            let r = three_circles_check(p, Complex64::new(0.0, 0.0), 0.05, 1.0, theta).unwrap();
            assert!(r <= 1.0 + 1e-8, "{r}");
        }
    }

    #[test]
    fn radii_validated() {
        let h = |z: Complex64| z;
        assert!(matches!(
            three_circles_check(h, Complex64::new(0.0, 0.0), 0.5, 0.2, 0.5),
            Err(Error::Radii(_))
        ));
        assert!(matches!(
            three_circles_check(h, Complex64::new(0.0, 0.0), 0.1, 0.2, 1.0),
            Err(Error::Radii(_))
        ));
    }
}
