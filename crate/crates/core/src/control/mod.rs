//! Spectral projectors, the cosh cylinder extension, the spectral-inequality
//! probe and null controls for the 1D parabolic Anderson equation
//! `∂_t g = -A g + f 1_ω`.

mod drive;
mod hum;
mod simulate;
mod specineq;

pub use drive::{
    lebeau_rousseau_drive, single_band_equivalence, stage_plan, ControlProblem, ControlResult, StageControl, StageReport, BAND_BASE,
    MIN_STAGE_NODES,
};
pub use hum::{hum_control, minimality_margin, observation_matrix, phi1, HumControl, GRAMIAN_CONDITION_LIMIT};
pub use simulate::{exp_weights, pam_simulate, simulate_loads, Trajectory};
pub use specineq::{spectral_inequality_probe, SpectralInequalityReport, INTERPOLATION_ALPHA, RESOLUTION_FLOOR};

use serde::Serialize;

use crate::eigen::EigenSystem;
use crate::error::{Error, Result};
use crate::gauge::{conjugate_apply, GroundGauge};
use crate::grid::{GridField, TorusGrid};

/// Largest admissible relative PDE residual of the cylinder extension.
pub const EXTENSION_TOLERANCE: f64 = 1e-3;

/// Eigenvalues within this relative distance of the cutoff count as retained.
pub(crate) fn retained(lambda_k: f64, cutoff: f64) -> bool {
    lambda_k <= cutoff + 1e-9 * cutoff.abs().max(1.0)
}

/// Control region `ω ⊂ 𝐓` as a cell mask.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlSet {
    pub grid: TorusGrid,
    pub mask: Vec<bool>,
}

impl ControlSet {
    /// Nodes strictly inside the open interval `(a, b)`, `0 ≤ a < b ≤ 1`.
    pub fn interval(grid: TorusGrid, a: f64, b: f64) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(Error::InvalidArgument("control sets are 1D".into()));
        }
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(Error::InvalidArgument(format!("control interval ({a}, {b}) not inside [0, 1]")));
        }
        let mask: Vec<bool> = (0..grid.len())
            .map(|i| {
                let x = grid.point(i)[0];
                a < x && x < b
            })
            .collect();
        if mask.iter().filter(|m| **m).count() < 4 {
            return Err(Error::InvalidArgument("control interval must cover at least 4 grid cells".into()));
        }
        Ok(Self { grid, mask })
    }

    pub fn full(grid: TorusGrid) -> Self {
        Self {
            grid,
            mask: vec![true; grid.len()],
        }
    }

    /// `∫_ω u v`.
    pub fn dot(&self, u: &GridField, v: &GridField) -> f64 {
        self.grid.cell_volume()
            * self
                .mask
                .iter()
                .zip(u.values.iter().zip(&v.values))
                .filter(|(m, _)| **m)
                .map(|(_, (a, b))| a * b)
                .sum::<f64>()
    }

    /// `sup_ω |u|`.
    pub fn sup(&self, u: &[f64]) -> f64 {
        self.mask
            .iter()
            .zip(u)
            .filter(|(m, _)| **m)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    }

    /// `u 1_ω`.
    pub fn restrict(&self, u: &GridField) -> GridField {
        GridField {
            grid: u.grid,
            values: u.values.iter().zip(&self.mask).map(|(v, m)| if *m { *v } else { 0.0 }).collect(),
        }
    }
}

/// Orthogonal projector onto `span{u_k : λ_k ≤ λ}` of the computed basis.
#[derive(Debug, Clone)]
pub struct SpectralProjector<'a> {
    pub es: &'a EigenSystem,
    pub cutoff: f64,
    pub indices: Vec<usize>,
}

impl<'a> SpectralProjector<'a> {
    pub fn new(es: &'a EigenSystem, cutoff: f64) -> Self {
        let indices = (0..es.len()).filter(|&k| retained(es.eigenvalues[k], cutoff)).collect();
        Self { es, cutoff, indices }
    }

    /// `⟨u, u_k⟩` for the retained `k`.
    pub fn coefficients(&self, u: &GridField) -> Result<Vec<f64>> {
        self.es.grid.check_same(&u.grid)?;
        Ok(self.indices.iter().map(|&k| u.dot(&self.es.eigenvectors[k])).collect())
    }

    pub fn apply(&self, u: &GridField) -> Result<GridField> {
        let a = self.coefficients(u)?;
        Ok(synthesize(self.es, &self.indices, &a))
    }
}

pub fn project(es: &EigenSystem, lambda: f64, u: &GridField) -> Result<GridField> {
    SpectralProjector::new(es, lambda).apply(u)
}

/// `Σ a_i u_{k_i}`.
pub(crate) fn synthesize(es: &EigenSystem, indices: &[usize], a: &[f64]) -> GridField {
    let mut out = vec![0.0; es.grid.len()];
    for (&k, &c) in indices.iter().zip(a) {
        for (o, v) in out.iter_mut().zip(&es.eigenvectors[k].values) {
            *o += c * v;
        }
    }
    GridField {
        grid: es.grid,
        values: out,
    }
}

/// `f(x, y) = Σ a_k cosh(√(λ_k - λ0) y) u_k(x)/u0(x)` on `𝐓 × [-Y, Y]`.
#[derive(Debug, Clone, Serialize)]
pub struct CylinderExtension {
    pub indices: Vec<usize>,
    pub coeffs: Vec<f64>,
    pub ys: Vec<f64>,
    #[serde(skip)]
    pub values: Vec<GridField>,
    /// `‖∂_y²f + e^{-2Z}∂_x(e^{2Z}∂_x f)‖ / ‖∂_y²f‖` over all rows.
    pub residual: f64,
}

pub fn cylinder_extension(
    es: &EigenSystem,
    g: &GroundGauge,
    u: &GridField,
    lambda: f64,
    y_max: f64,
    rows: usize,
) -> Result<CylinderExtension> {
    if !(y_max > 0.0) || rows < 2 {
        return Err(Error::InvalidArgument("cylinder needs Y > 0 and at least two rows".into()));
    }
    let proj = SpectralProjector::new(es, lambda);
    let coeffs = proj.coefficients(u)?;
    let back = synthesize(es, &proj.indices, &coeffs);
    let miss = back.zip_map(u, |a, b| a - b)?.norm();
    if miss > 1e-8 * u.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidArgument(format!(
            "input not in the range of the projector (defect {miss:.3e})"
        )));
    }
    let lambda0 = g.lambda0;
    let ratios: Vec<GridField> = proj
        .indices
        .iter()
        .map(|&k| es.eigenvectors[k].zip_map(&g.u0, |a, b| a / b))
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = proj.indices.iter().map(|&k| (es.eigenvalues[k] - lambda0).max(0.0)).collect();
    let ys: Vec<f64> = (0..rows)
        .map(|r| y_max * (2.0 * r as f64 - (rows - 1) as f64) / (rows - 1) as f64)
        .collect();
    let n = es.grid.len();
    let (mut num, mut den) = (0.0, 0.0);
    let mut values = Vec::with_capacity(rows);
    for &y in &ys {
        let mut f = vec![0.0; n];
        let mut fyy = vec![0.0; n];
        for ((w, &a), &gap) in ratios.iter().zip(&coeffs).zip(&gaps) {
            let c = a * (gap.sqrt() * y).cosh();
            for ((o, oyy), v) in f.iter_mut().zip(fyy.iter_mut()).zip(&w.values) {
                *o += c * v;
                *oyy += c * gap * v;
            }
        }
        let f = GridField { grid: es.grid, values: f };
        let h = conjugate_apply(g, &f)?;
        for ((hv, fv), yy) in h.values.iter().zip(&f.values).zip(&fyy) {
            // e^{-2Z}∂_x(e^{2Z}∂_x f) = λ0 f - H̃f
            let lf = lambda0 * fv - hv;
            num += (yy + lf).powi(2);
            den += yy * yy;
        }
        values.push(f);
    }
    let residual = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    if residual > EXTENSION_TOLERANCE {
        return Err(Error::ExtensionResidual { residual });
    }
    Ok(CylinderExtension {
        indices: proj.indices,
        coeffs,
        ys,
        values,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::eigensolve;
    use crate::gauge::ground_gauge;
    use crate::noise::{enhance, Mollifier};
    use crate::operator::AndersonOperator;

    pub(crate) fn system(n: usize, m: usize, seed: u64) -> (EigenSystem, GroundGauge) {
        let g = TorusGrid::new(1, n).unwrap();
        let op = AndersonOperator::new(&enhance(g, seed, &Mollifier::new(1.0 / 32.0).unwrap()));
        let es = eigensolve(&op, m).unwrap();
        let gg = ground_gauge(&es).unwrap();
        (es, gg)
    }

    #[test]
    fn projector_basic_cases() {
        let (es, _) = system(128, 8, 1);
        let u0 = &es.eigenvectors[0];
        let p = project(&es, es.eigenvalues[0], u0).unwrap();
        assert!(p.zip_map(u0, |a, b| a - b).unwrap().norm() < 1e-12);
        let below = project(&es, es.eigenvalues[0] - 1.0, u0).unwrap();
        assert_eq!(below.sup_norm(), 0.0);
    }

    #[test]
    fn projector_algebra_and_tail() {
        let (es, _) = system(128, 8, 2);
        let g = es.grid;
        let u = GridField::from_fn(g, |[x, _]| (x * 37.0).sin() + x * x);
        for i in 0..8 {
            for j in 0..8 {
                let (a, b) = (es.eigenvalues[i], es.eigenvalues[j]);
                let pq = project(&es, a, &project(&es, b, &u).unwrap()).unwrap();
                let pm = project(&es, a.min(b), &u).unwrap();
                assert!(pq.zip_map(&pm, |x, y| x - y).unwrap().norm() < 1e-12 * u.norm());
            }
        }
        // ‖u - Pu‖² = ‖u‖² - Σ⟨u,u_k⟩²
        let top = project(&es, es.eigenvalues[7], &u).unwrap();
        let tail = u.zip_map(&top, |a, b| a - b).unwrap().norm();
        let parseval: f64 = es.eigenvectors.iter().map(|e| u.dot(e).powi(2)).sum();
        assert!((tail - (u.norm().powi(2) - parseval).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn cylinder_ground_mode_is_constant() {
        let (es, gg) = system(128, 4, 3);
        let u = es.eigenvectors[0].scaled(0.7);
        let ext = cylinder_extension(&es, &gg, &u, es.eigenvalues[0], 2.0, 9).unwrap();
        for row in &ext.values {
            assert!(row.values.iter().all(|v| (v - 0.7).abs() < 1e-12));
        }
    }

    #[test]
    fn cylinder_row_zero_and_pde() {
        let (es, gg) = system(256, 10, 4);
        let coef = [1.0, -0.5, 0.3, 0.2, -0.1, 0.05, 0.4, -0.3, 0.1, 0.2];
        let u = synthesize(&es, &(0..10).collect::<Vec<_>>(), &coef);
        let ext = cylinder_extension(&es, &gg, &u, es.eigenvalues[9], 2.0, 21).unwrap();
        let mid = &ext.values[10];
        assert_eq!(ext.ys[10], 0.0);
        for (i, v) in mid.values.iter().enumerate() {
            assert!((v - u.values[i] / gg.u0.values[i]).abs() < 1e-12 * u.sup_norm() / gg.u0.min());
        }
        assert!(ext.residual <= 1e-4, "{}", ext.residual);
        for (a, b) in ext.values.iter().zip(ext.values.iter().rev()) {
            assert_eq!(a.values, b.values);
        }
    }

    #[test]
    fn interval_mask_and_full_set() {
        let g = TorusGrid::new(1, 256).unwrap();
        let w = ControlSet::interval(g, 0.0, 0.2).unwrap();
        assert_eq!(w.mask.iter().filter(|m| **m).count(), 51);
        assert!(ControlSet::interval(g, 0.0, 0.01).is_err());
        let one = GridField::constant(g, 1.0);
        assert!((ControlSet::full(g).dot(&one, &one) - 1.0).abs() < 1e-14);
    }
}
