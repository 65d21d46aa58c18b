//! End-to-end local structure of one eigenfunction around a point.

use num_complex::Complex64;
use serde::Serialize;

use super::adjoint::box_coords;
use super::factor::{factorize, nodal_correspondence, CorrespondenceReport, QCFactorization};
use super::mori::{mori_estimate, sample_pairs, three_circles_deformed, MoriFit};
use super::stream::StreamFunction;
use super::{
    adjoint_gauge, beltrami_coefficient, sample_tensor, solve_beltrami, square_gradient, stream_function, AdjointGauge, BeltramiField,
    BeltramiSolution, DiscPatch, PatchGrid,
};
use crate::eigen::EigenSystem;
use crate::error::{Error, Result};
use crate::gauge::GroundGauge;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub radius: f64,
    pub m: usize,
    pub delta: f64,
    pub mori_pairs: usize,
    pub mori_seed: u64,
    pub theta: f64,
    /// Radius halvings allowed when the adjoint gauge loses positivity.
    pub max_halvings: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            radius: 0.0625,
            m: 256,
            delta: 1e-2,
            mori_pairs: 10_000,
            mori_seed: 0x6d6f7269,
            theta: 0.5,
            max_halvings: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub k: usize,
    pub lambda: f64,
    pub kappa: f64,
    pub x0: [f64; 2],
    pub radius: f64,
    pub min_psi: f64,
    pub divergence_residual: f64,
    pub stream_residual: f64,
    /// `‖∂̄w - μ∂w‖₂ / ‖∂w‖₂` on `|z| ≤ R`, `w = v + is` differentiated directly.
    pub w_beltrami_defect: f64,
    pub k_sup: f64,
    pub beltrami_iterations: usize,
    pub contraction: f64,
    pub residual_beltrami: f64,
    pub jacobian_min: f64,
    pub rho_zeta: f64,
    pub residual_cr: f64,
    pub harmonicity: f64,
    pub composition_error: f64,
    pub inversion_failures: usize,
    pub correspondence: CorrespondenceReport,
    pub mori: MoriFit,
    pub mori_inverse: MoriFit,
    pub three_circles: f64,
}

/// Every intermediate field of a pipeline run, for export.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: PipelineReport,
    pub patch: DiscPatch,
    pub gauge: AdjointGauge,
    pub sigma: Vec<f64>,
    pub v: Vec<f64>,
    pub stream: StreamFunction,
    pub w: Vec<Complex64>,
    pub beltrami: BeltramiField,
    pub solution: BeltramiSolution,
    pub factor: QCFactorization,
}

pub fn run_pipeline(es: &EigenSystem, g: &GroundGauge, k: usize, x0: [f64; 2], cfg: &PipelineConfig) -> Result<PipelineRun> {
    if es.grid.dim() != 2 {
        return Err(Error::InvalidArgument("the quasiconformal pipeline needs a 2D eigensystem".into()));
    }
    let u = es
        .eigenvectors
        .get(k)
        .ok_or_else(|| Error::InvalidArgument(format!("eigenfunction {k} not computed")))?;
    let lambda = es.eigenvalues[k];
    let mut radius = cfg.radius;
    let mut halvings = 0;
    let (patch, gauge) = loop {
        let patch = DiscPatch::new(x0, radius, cfg.m)?;
        match adjoint_gauge(g, lambda, &patch) {
            Ok(gauge) => break (patch, gauge),
            Err(Error::PatchTooLarge { .. }) if halvings < cfg.max_halvings => {
                radius *= 0.5;
                halvings += 1;
            }
            Err(e) => return Err(e),
        }
    };
    let (xs, ys) = box_coords(&patch);
    let u_box = sample_tensor(u, &xs, &ys)?;
    let u0_box = sample_tensor(&g.u0, &xs, &ys)?;
    let sq = patch.square();
    let origin = sq.origin();
    let sig_raw = gauge.restrict(&gauge.weight.iter().zip(&gauge.psi).map(|(a, p)| a * p * p).collect::<Vec<_>>());
    let sigma: Vec<f64> = sig_raw.iter().map(|s| s / sig_raw[origin]).collect();
    let v_raw = gauge.restrict(
        &u_box
            .iter()
            .zip(&u0_box)
            .zip(&gauge.psi)
            .map(|((uk, u0), p)| uk / (u0 * p))
            .collect::<Vec<_>>(),
    );
    let vmax = v_raw.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if vmax == 0.0 {
        return Err(Error::ZeroField);
    }
    let v: Vec<f64> = v_raw.iter().map(|x| x / vmax).collect();

    let stream = stream_function(&sigma, &v, &patch)?;
    let w: Vec<Complex64> = v.iter().zip(&stream.s).map(|(a, b)| Complex64::new(*a, *b)).collect();
    let beltrami = beltrami_coefficient(&sigma, &v, &patch)?;
    let solution = solve_beltrami(&beltrami)?;
    let factor = factorize(&w, &solution, &patch)?;
    let correspondence = nodal_correspondence(&v, &solution, &factor, &patch, cfg.delta);

    let chi_sq = solution.on_square(&patch, &solution.chi);
    let disc: Vec<usize> = (0..sq.len()).filter(|&p| sq.z(p).norm() <= patch.radius).collect();
    let dom: Vec<Complex64> = disc.iter().map(|&p| sq.z(p)).collect();
    let img: Vec<Complex64> = disc.iter().map(|&p| chi_sq[p]).collect();
    let pairs = sample_pairs(disc.len(), cfg.mori_pairs, cfg.mori_seed);
    let mori = mori_estimate(&dom, &img, &pairs);
    let mori_inverse = mori_estimate(&img, &dom, &pairs);
    let r2 = factor.rho_zeta;
    let three_circles = three_circles_deformed(&v, &chi_sq, r2 / 16.0, r2, cfg.theta)?;
    let mu_sq = solution.on_square(&patch, &beltrami.mu);
    let w_beltrami_defect = direct_defect(&patch, &v, &stream, &mu_sq);

    let report = PipelineReport {
        k,
        lambda,
        kappa: gauge.kappa,
        x0,
        radius: patch.radius,
        min_psi: gauge.min_psi(),
        divergence_residual: stream.divergence_residual,
        stream_residual: stream.residual,
        w_beltrami_defect,
        k_sup: beltrami.k_sup,
        beltrami_iterations: solution.iterations,
        contraction: solution.contraction,
        residual_beltrami: solution.residual_beltrami,
        jacobian_min: solution.jacobian_min,
        rho_zeta: factor.rho_zeta,
        residual_cr: factor.residual_cr,
        harmonicity: factor.harmonicity,
        composition_error: factor.composition_error,
        inversion_failures: factor.inversion_failures,
        correspondence,
        mori,
        mori_inverse,
        three_circles,
    };
    Ok(PipelineRun {
        report,
        patch,
        gauge,
        sigma,
        v,
        stream,
        w,
        beltrami,
        solution,
        factor,
    })
}

/// `‖∂̄w - μ∂w‖₂ / ‖∂w‖₂` on `|z| ≤ R` with `∂s` from differences of `s`
/// itself rather than from the flux.
fn direct_defect(patch: &DiscPatch, v: &[f64], stream: &StreamFunction, mu: &[Complex64]) -> f64 {
    let sq = patch.square();
    let m = sq.n;
    let nq = stream.hi - stream.lo + 1;
    let sub = PatchGrid {
        half_width: 0.5 * nq as f64 * sq.spacing(),
        n: nq,
    };
    let s_in: Vec<f64> = (0..nq * nq)
        .map(|q| stream.s[(stream.lo + q / nq) * m + stream.lo + q % nq])
        .collect();
    let [sx, sy] = square_gradient(sub, &s_in);
    let [vx, vy] = square_gradient(sq, v);
    let (mut num, mut den) = (0.0, 0.0);
    for q in 0..nq * nq {
        let p = (stream.lo + q / nq) * m + stream.lo + q % nq;
        if sq.z(p).norm() > patch.radius {
            continue;
        }
        let wx = Complex64::new(vx[p], sx[q]);
        let wy = Complex64::new(vy[p], sy[q]);
        let d = 0.5 * (wx - Complex64::i() * wy);
        let dbar = 0.5 * (wx + Complex64::i() * wy);
        num += (dbar - mu[p] * d).norm_sqr();
        den += d.norm_sqr();
    }
    (num / den).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::eigensolve;
    use crate::gauge::ground_gauge;
    use crate::grid::{GridField, TorusGrid};
    use crate::nodal::argmin_abs;
    use crate::noise::{enhance, Mollifier};
    use crate::operator::AndersonOperator;
    use crate::qc::beltrami_raw;

    #[test]
    fn harmonic_input_factorizes_exactly() {
        // σ = 1 and v = Re(z³ - 3z): μ = 0, χ = id, h = v + is holomorphic
        let patch = DiscPatch::new([0.5, 0.5], 0.0625, 64).unwrap();
        let sq = patch.square();
        let v: Vec<f64> = (0..sq.len())
            .map(|p| {
                let z = sq.z(p) / patch.radius;
                (z * z * z - 3.0 * z).re
            })
            .collect();
        let sigma = vec![1.0; sq.len()];
        let stream = stream_function(&sigma, &v, &patch).unwrap();
        let w: Vec<Complex64> = v.iter().zip(&stream.s).map(|(a, b)| Complex64::new(*a, *b)).collect();
        let bf = beltrami_coefficient(&sigma, &v, &patch).unwrap();
        assert_eq!(bf.k_sup, 0.0);
        let sol = solve_beltrami(&bf).unwrap();
        let fac = factorize(&w, &sol, &patch).unwrap();
        assert!(fac.residual_cr < 1e-6, "{}", fac.residual_cr);
        let rep = nodal_correspondence(&v, &sol, &fac, &patch, 1e-2);
        assert_eq!(rep.agreement, 1.0);
    }

    fn small_run(seed: u64, k: usize) -> (EigenSystem, GroundGauge, [f64; 2]) {
        let g = TorusGrid::new(2, 32).unwrap();
        let op = AndersonOperator::new(&enhance(g, seed, &Mollifier::new(0.0625).unwrap()));
        let es = eigensolve(&op, k + 2).unwrap();
        let gg = ground_gauge(&es).unwrap();
        let x0 = argmin_abs(&es.eigenvectors[k]);
        (es, gg, x0)
    }

    #[test]
    fn noise_pipeline_small() {
        let (es, gg, x0) = small_run(2, 1);
        let cfg = PipelineConfig {
            m: 64,
            mori_pairs: 2000,
            ..Default::default()
        };
        let run = run_pipeline(&es, &gg, 1, x0, &cfg).unwrap();
        let r = &run.report;
        assert!(r.residual_beltrami <= 1e-6);
        assert!(r.jacobian_min > 0.0);
        assert!(r.w_beltrami_defect <= 1e-3, "{}", r.w_beltrami_defect);
        assert!(r.residual_cr <= 1e-2, "{}", r.residual_cr);
        assert!(r.correspondence.agreement >= 0.99);
        assert!(r.contraction <= r.k_sup + 0.02);
        assert_eq!(r.mori.violations + r.mori_inverse.violations, 0);
        assert!(r.mori.alpha * r.mori_inverse.alpha <= 1.0 + 1e-6);
        assert!(r.composition_error < 1e-3);
    }

    #[test]
    fn mu_bounded_by_log_weight() {
        // |μ| ≤ tanh(sup|½ log σ|) before the collar
        let (es, gg, x0) = small_run(3, 1);
        let cfg = PipelineConfig {
            m: 64,
            mori_pairs: 100,
            ..Default::default()
        };
        let run = run_pipeline(&es, &gg, 1, x0, &cfg).unwrap();
        let raw = beltrami_raw(&run.sigma, &run.v, &run.patch);
        let bound = run.sigma.iter().map(|s| (0.5 * s.ln()).abs()).fold(0.0, f64::max).tanh();
        assert!(raw.iter().all(|m| m.norm() <= bound + 1e-12));
    }

    #[test]
    fn sign_flip_keeps_agreement() {
        let (mut es, gg, x0) = small_run(4, 1);
        let cfg = PipelineConfig {
            m: 64,
            mori_pairs: 100,
            ..Default::default()
        };
        let a = run_pipeline(&es, &gg, 1, x0, &cfg).unwrap().report.correspondence;
        es.eigenvectors[1] = es.eigenvectors[1].scaled(-1.0);
        let b = run_pipeline(&es, &gg, 1, x0, &cfg).unwrap().report.correspondence;
        assert_eq!(a.agreeing, b.agreeing);
        assert_eq!(a.compared, b.compared);
    }

    #[test]
    fn rejects_one_dimensional_input() {
        let g = TorusGrid::new(1, 32).unwrap();
        let es = eigensolve(&AndersonOperator::with_potential(GridField::zeros(g), 0.0), 2).unwrap();
        let gg = ground_gauge(&es).unwrap();
        assert!(run_pipeline(&es, &gg, 1, [0.5, 0.0], &PipelineConfig::default()).is_err());
    }
}
