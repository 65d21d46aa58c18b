//! Factorization `w = h∘χ` by pointwise Newton inversion of `χ`, and the
//! nodal correspondence `{v = 0} = χ^{-1}({Re h = 0})`.

use num_complex::Complex64;
use serde::Serialize;

use super::{lagrange_interpolate, BeltramiSolution, DiscPatch, PatchGrid};
use crate::error::{Error, Result};

/// Largest admissible fraction of failed Newton inversions.
pub const INVERSION_FAILURE_LIMIT: f64 = 1e-3;
/// Radius, relative to `R`, of the circle whose image bounds the `ζ` disc.
const INNER_CIRCLE: f64 = 0.9;

#[derive(Debug, Clone, Serialize)]
pub struct QCFactorization {
    /// `h` and `χ^{-1}` live on this grid, NaN outside `|ζ| ≤ ρ_ζ`.
    pub zeta_grid: PatchGrid,
    pub rho_zeta: f64,
    #[serde(skip)]
    pub chi_inverse: Vec<Complex64>,
    #[serde(skip)]
    pub h: Vec<Complex64>,
    pub residual_beltrami: f64,
    pub residual_cr: f64,
    /// `ρ_ζ ‖Δ Re h‖₂ / ‖∇ Re h‖₂` on interior `ζ` nodes.
    pub harmonicity: f64,
    pub jacobian_min: f64,
    /// `sup|h∘χ - w| / sup|w|` over patch nodes mapped well inside the disc.
    pub composition_error: f64,
    pub inversion_failures: usize,
    pub targets: usize,
}

impl QCFactorization {
    pub fn in_disc(&self, p: usize) -> bool {
        self.h[p].re.is_finite()
    }
}

/// `h = w∘χ^{-1}` on a `ζ` grid with the patch spacing covering the disc
/// `|ζ| ≤ min_{|z| = 0.9R} |χ(z)|`.
pub fn factorize(w: &[Complex64], sol: &BeltramiSolution, patch: &DiscPatch) -> Result<QCFactorization> {
    let sq = patch.square();
    if w.len() != sq.len() {
        return Err(Error::InvalidArgument("w must live on the patch square".into()));
    }
    if !(sol.jacobian_min > 0.0) {
        return Err(Error::NotInjective {
            jacobian_min: sol.jacobian_min,
        });
    }
    let dg = sol.grid;
    let h_sp = sq.spacing();
    let rho_zeta = (0..2048)
        .map(|a| {
            let t = 2.0 * std::f64::consts::PI * a as f64 / 2048.0;
            lagrange_interpolate(dg, &sol.chi, Complex64::from_polar(INNER_CIRCLE * patch.radius, t)).norm()
        })
        .fold(f64::INFINITY, f64::min);
    let half = 2 * (rho_zeta / h_sp).ceil() as usize / 2 + 4;
    let zeta_grid = PatchGrid {
        half_width: half as f64 * h_sp,
        n: 2 * half,
    };

    let candidates: Vec<usize> = (0..dg.len())
        .filter(|&p| (p / dg.n).is_multiple_of(4) && (p % dg.n).is_multiple_of(4) && dg.z(p).norm() <= patch.radius)
        .collect();
    let tol = 1e-13 * patch.radius;
    let nan = Complex64::new(f64::NAN, f64::NAN);
    let mut chi_inverse = vec![nan; zeta_grid.len()];
    let mut h = vec![nan; zeta_grid.len()];
    let (mut failures, mut targets) = (0, 0);
    for p in 0..zeta_grid.len() {
        let zeta = zeta_grid.z(p);
        if zeta.norm() > rho_zeta {
            continue;
        }
        targets += 1;
        let start = candidates
            .iter()
            .copied()
            .min_by(|&a, &b| (sol.chi[a] - zeta).norm().total_cmp(&(sol.chi[b] - zeta).norm()))
            .map(|q| dg.z(q))
            .unwrap_or_default();
        match newton_invert(sol, zeta, start, tol, INNER_CIRCLE * patch.radius * 1.05) {
            Some(z) => {
                chi_inverse[p] = z;
                h[p] = lagrange_interpolate(sq, w, z);
            }
            None => failures += 1,
        }
    }
    if failures as f64 > INVERSION_FAILURE_LIMIT * targets as f64 {
        return Err(Error::InversionFailure {
            failed: failures,
            total: targets,
        });
    }
    let (residual_cr, harmonicity) = holomorphy_residuals(zeta_grid, &h, rho_zeta);
    let mut fac = QCFactorization {
        zeta_grid,
        rho_zeta,
        chi_inverse,
        h,
        residual_beltrami: sol.residual_beltrami,
        residual_cr,
        harmonicity,
        jacobian_min: sol.jacobian_min,
        composition_error: 0.0,
        inversion_failures: failures,
        targets,
    };
    let composed = compose(&fac, sol, patch);
    let wmax = composed.iter().map(|(p, _)| w[*p].norm()).fold(0.0, f64::max);
    fac.composition_error = composed.iter().map(|(p, v)| (v - w[*p]).norm()).fold(0.0, f64::max) / wmax.max(f64::MIN_POSITIVE);
    Ok(fac)
}

/// Damped Newton for `χ(z) = ζ` with `Δ = (ā r - b r̄)/(|a|² - |b|²)`,
/// `a = ∂χ`, `b = ∂̄χ`.
fn newton_invert(sol: &BeltramiSolution, zeta: Complex64, start: Complex64, tol: f64, reach: f64) -> Option<Complex64> {
    let dg = sol.grid;
    let mut z = start;
    let mut r = zeta - lagrange_interpolate(dg, &sol.chi, z);
    for _ in 0..60 {
        if r.norm() <= tol {
            return Some(z);
        }
        let a = lagrange_interpolate(dg, &sol.d_chi, z);
        let b = lagrange_interpolate(dg, &sol.dbar_chi, z);
        let det = a.norm_sqr() - b.norm_sqr();
        if !(det > 0.0) {
            return None;
        }
        let step = (a.conj() * r - b * r.conj()) / det;
        let mut t = 1.0;
        loop {
            let trial = z + step * t;
            let rt = zeta - lagrange_interpolate(dg, &sol.chi, trial);
            if rt.norm() < r.norm() {
                z = trial;
                r = rt;
                break;
            }
            t *= 0.5;
            if t < 1e-4 {
                return if r.norm() <= 1e3 * tol { Some(z) } else { None };
            }
        }
        if z.norm() > reach {
            return None;
        }
    }
    (r.norm() <= tol).then_some(z)
}

/// Fourth-order central differences on `ζ` nodes whose five-point arms stay
/// inside the disc: `(‖∂̄h‖/‖∂h‖, ρ_ζ ‖Δ Re h‖/‖∇ Re h‖)`.
fn holomorphy_residuals(grid: PatchGrid, h: &[Complex64], rho: f64) -> (f64, f64) {
    let n = grid.n;
    let dz = grid.spacing();
    let (mut dbar2, mut d2, mut lap2, mut grad2) = (0.0, 0.0, 0.0, 0.0);
    for i in 2..n - 2 {
        for j in 2..n - 2 {
            let at = |di: isize, dj: isize| h[((i as isize + di) as usize) * n + (j as isize + dj) as usize];
            let arms = [
                at(-2, 0),
                at(-1, 0),
                at(1, 0),
                at(2, 0),
                at(0, -2),
                at(0, -1),
                at(0, 1),
                at(0, 2),
                at(0, 0),
            ];
            if arms.iter().any(|v| !v.re.is_finite()) {
                continue;
            }
            let first = |m2: Complex64, m1: Complex64, p1: Complex64, p2: Complex64| (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * dz);
            let second = |m2: f64, m1: f64, c: f64, p1: f64, p2: f64| (-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * dz * dz);
            let hx = first(arms[0], arms[1], arms[2], arms[3]);
            let hy = first(arms[4], arms[5], arms[6], arms[7]);
            let dbar = 0.5 * (hx + Complex64::i() * hy);
            let d = 0.5 * (hx - Complex64::i() * hy);
            dbar2 += dbar.norm_sqr();
            d2 += d.norm_sqr();
            let c = arms[8].re;
            let lap = second(arms[0].re, arms[1].re, c, arms[2].re, arms[3].re) + second(arms[4].re, arms[5].re, c, arms[6].re, arms[7].re);
            lap2 += lap * lap;
            grad2 += hx.re * hx.re + hy.re * hy.re;
        }
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { (a / b).sqrt() } else { 0.0 };
    (ratio(dbar2, d2), rho * ratio(lap2, grad2))
}

/// `(square index, h(χ(z)))` for patch nodes whose image lies at least three
/// `ζ` cells inside the disc.
pub(crate) fn compose(fac: &QCFactorization, sol: &BeltramiSolution, patch: &DiscPatch) -> Vec<(usize, Complex64)> {
    let chi = sol.on_square(patch, &sol.chi);
    let limit = fac.rho_zeta - 3.0 * fac.zeta_grid.spacing();
    chi.iter()
        .enumerate()
        .filter(|(_, c)| c.norm() <= limit)
        .map(|(p, c)| (p, lagrange_interpolate(fac.zeta_grid, &fac.h, *c)))
        .filter(|(_, v)| v.re.is_finite())
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrespondenceReport {
    pub delta: f64,
    pub compared: usize,
    pub agreeing: usize,
    pub agreement: f64,
    pub harmonicity: f64,
}

/// Fraction of patch nodes outside the band `|v| ≤ δ sup|v|` with
/// `sign v(z) = sign Re h(χ(z))`.
pub fn nodal_correspondence(
    v: &[f64],
    sol: &BeltramiSolution,
    fac: &QCFactorization,
    patch: &DiscPatch,
    delta: f64,
) -> CorrespondenceReport {
    let composed = compose(fac, sol, patch);
    let vmax = composed.iter().map(|(p, _)| v[*p].abs()).fold(0.0, f64::max);
    let (mut compared, mut agreeing) = (0, 0);
    for (p, hv) in &composed {
        if v[*p].abs() <= delta * vmax {
            continue;
        }
        compared += 1;
        if (v[*p] > 0.0) == (hv.re > 0.0) {
            agreeing += 1;
        }
    }
    CorrespondenceReport {
        delta,
        compared,
        agreeing,
        agreement: if compared == 0 { 1.0 } else { agreeing as f64 / compared as f64 },
        harmonicity: fac.harmonicity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qc::{radial_stretch, solve_beltrami, BeltramiField};

    fn identity(patch: &DiscPatch) -> BeltramiSolution {
        let g = patch.doubled();
        solve_beltrami(&BeltramiField::new(g, vec![Complex64::new(0.0, 0.0); g.len()]).unwrap()).unwrap()
    }

    #[test]
    fn identity_map_returns_w() {
        let patch = DiscPatch::new([0.5, 0.5], 0.0625, 64).unwrap();
        let sq = patch.square();
        let sol = identity(&patch);
        // holomorphic w = z³ + 0.5z
        let hol: Vec<Complex64> = (0..sq.len())
            .map(|p| {
                let z = sq.z(p) / patch.radius;
                z * z * z + 0.5 * z
            })
            .collect();
        let fac = factorize(&hol, &sol, &patch).unwrap();
        assert_eq!(fac.inversion_failures, 0);
        assert!(fac.residual_cr < 1e-6, "{}", fac.residual_cr);
        assert!(fac.harmonicity < 1e-6, "{}", fac.harmonicity);
        assert!(fac.composition_error < 1e-12);
        // a non-holomorphic w keeps its own ∂̄/∂ ratio: w = z + 0.25 z̄ gives 0.25
        let mixed: Vec<Complex64> = (0..sq.len())
            .map(|p| {
                let z = sq.z(p);
                z + 0.25 * z.conj()
            })
            .collect();
        let fac = factorize(&mixed, &sol, &patch).unwrap();
        assert!((fac.residual_cr - 0.25).abs() < 1e-10);
        let v: Vec<f64> = hol.iter().map(|c| c.re).collect();
        let fac = factorize(&hol, &sol, &patch).unwrap();
        let rep = nodal_correspondence(&v, &sol, &fac, &patch, 1e-3);
        assert_eq!(rep.agreement, 1.0);
        assert!(rep.compared > 300);
    }

    #[test]
    fn radial_stretch_composition_holomorphic() {
        // w = χ_exact is h = identity up to the affine normalization
        let patch = DiscPatch::new([0.5, 0.5], 0.0625, 128).unwrap();
        let (field, exact) = radial_stretch(patch.doubled(), 1.5, patch.radius);
        let sol = solve_beltrami(&field).unwrap();
        let w = sol.on_square(&patch, &exact);
        let fac = factorize(&w, &sol, &patch).unwrap();
        assert_eq!(fac.inversion_failures, 0);
        assert!(fac.residual_cr < 1e-2, "{}", fac.residual_cr);
        assert!(fac.composition_error < 1e-3, "{}", fac.composition_error);
    }
}
