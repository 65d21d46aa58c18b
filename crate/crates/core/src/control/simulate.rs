//! Mode-wise exponential integration of `ȧ_k = -λ_k a_k + F_k(t)`,
//! `F_k(t) = ⟨f(t) 1_ω, u_k⟩`.
//!
//! On each step `[t_i, t_i + h]` the load is interpolated by the cubic
//! through the four Gauss-Legendre nodes and integrated against
//! `e^{-λ(t_i + h - s)}` exactly, so stiff modes need no step restriction.

use serde::Serialize;

use super::ControlSet;
use crate::eigen::EigenSystem;
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::quad::GL4_NODES;

/// Mode coefficients at every node of a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn terminal(&self) -> &[f64] {
        self.coeffs.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// `L²` norm of the state at node `i` (orthonormal modes).
    pub fn norm_at(&self, i: usize) -> f64 {
        self.coeffs[i].iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// Gauss nodes on `[0, 1]`.
fn unit_nodes() -> [f64; 4] {
    GL4_NODES.map(|x| 0.5 * (1.0 + x))
}

/// `m_p = ∫₀¹ e^{-x(1-t)} t^p dt`, `p = 0..3`.
fn moments(x: f64) -> [f64; 4] {
    let mut m = [0.0; 4];
    if x.abs() < 1.0 {
        // m_p = Σ_j (-x)^j p! / (p+j+1)!
        for (p, mp) in m.iter_mut().enumerate() {
            let mut term = 1.0 / (p as f64 + 1.0);
            let mut sum = term;
            for j in 1..40 {
                term *= -x / (p + j + 1) as f64;
                sum += term;
            }
            *mp = sum;
        }
    } else {
        m[0] = -(-x).exp_m1() / x;
        for p in 1..4 {
            m[p] = (1.0 - p as f64 * m[p - 1]) / x;
        }
    }
    m
}

/// Weights `w_q` with `∫₀¹ e^{-x(1-t)} F(t) dt = Σ w_q F(t_q)` for cubic `F`.
pub fn exp_weights(x: f64) -> [f64; 4] {
    let t = unit_nodes();
    let m = moments(x);
    let mut w = [0.0; 4];
    for q in 0..4 {
        // monomial coefficients of the Lagrange basis polynomial ℓ_q
        let mut poly = [1.0, 0.0, 0.0, 0.0];
        let mut deg = 0;
        let mut scale = 1.0;
        for r in 0..4 {
            if r == q {
                continue;
            }
            deg += 1;
            for d in (1..=deg).rev() {
                poly[d] = poly[d - 1] - t[r] * poly[d];
            }
            poly[0] *= -t[r];
            scale *= t[q] - t[r];
        }
        w[q] = poly.iter().zip(&m).map(|(c, mp)| c * mp).sum::<f64>() / scale;
    }
    w
}

/// Integrates the mode system from `a0` over `times` with loads
/// `load(t) = (F_k(t))_k`.
pub fn simulate_loads(lambdas: &[f64], a0: &[f64], times: &[f64], load: impl Fn(f64) -> Vec<f64>) -> Result<Trajectory> {
    if lambdas.len() != a0.len() {
        return Err(Error::InvalidArgument("one initial coefficient per mode".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("time grid must increase".into()));
    }
    let t_unit = unit_nodes();
    let mut coeffs = vec![a0.to_vec()];
    let mut a = a0.to_vec();
    for w in times.windows(2) {
        let h = w[1] - w[0];
        let loads: Vec<Vec<f64>> = t_unit.iter().map(|t| load(w[0] + t * h)).collect();
        for (k, (ak, &l)) in a.iter_mut().zip(lambdas).enumerate() {
            let x = l * h;
            let wq = exp_weights(x);
            let source: f64 = wq.iter().zip(&loads).map(|(wv, f)| wv * f[k]).sum();
            *ak = (-x).exp() * *ak + h * source;
        }
        coeffs.push(a.clone());
    }
    Ok(Trajectory {
        times: times.to_vec(),
        coeffs,
    })
}

/// Simulates `∂_t g = -A g + f 1_ω` on the computed modes from `g0`, with the
/// control given as a field-valued function of time.
pub fn pam_simulate(
    es: &EigenSystem,
    omega: &ControlSet,
    g0: &GridField,
    times: &[f64],
    f: impl Fn(f64) -> GridField,
) -> Result<Trajectory> {
    es.grid.check_same(&g0.grid)?;
    let a0: Vec<f64> = es.eigenvectors.iter().map(|u| g0.dot(u)).collect();
    simulate_loads(&es.eigenvalues, &a0, times, |t| {
        let ft = omega.restrict(&f(t));
        es.eigenvectors.iter().map(|u| ft.dot(u)).collect()
    })
}
