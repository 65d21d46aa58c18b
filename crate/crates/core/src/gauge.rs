//! Ground-state conjugation `u ↦ u/u0` to divergence form.

use crate::eigen::EigenSystem;
use crate::error::{Error, Result};
use crate::grid::{divergence, GridField};

/// Smallest admissible `min|u0| / max|u0|`.
pub const POSITIVITY_FLOOR: f64 = 1e-6;

/// Positive ground state `u0 = e^Z` with ground energy `λ0`.
#[derive(Debug, Clone)]
pub struct GroundGauge {
    pub u0: GridField,
    pub z: GridField,
    pub lambda0: f64,
}

impl GroundGauge {
    /// Gauge from an explicit positive profile, for analytic test cases.
    pub fn from_log(z: GridField, lambda0: f64) -> Self {
        let u0 = z.map(f64::exp);
        Self { u0, z, lambda0 }
    }

    /// `e^{2Z}` on the grid.
    pub fn weight(&self) -> GridField {
        self.z.map(|z| (2.0 * z).exp())
    }
}

pub fn ground_gauge(es: &EigenSystem) -> Result<GroundGauge> {
    let first = es
        .eigenvectors
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty eigensystem".into()))?;
    let sign = if first.mean() < 0.0 { -1.0 } else { 1.0 };
    let u0 = first.scaled(sign);
    let (lo, hi) = (u0.min(), u0.max());
    let ratio = u0.values.iter().fold(f64::INFINITY, |a, v| a.min(v.abs())) / u0.sup_norm();
    if lo <= 0.0 || ratio < POSITIVITY_FLOOR {
        return Err(Error::PositivityViolated {
            ratio: if lo <= 0.0 { lo / hi } else { ratio },
        });
    }
    let z = u0.map(f64::ln);
    Ok(GroundGauge {
        u0,
        z,
        lambda0: es.eigenvalues[0],
    })
}

/// `H̃w = -e^{-2Z} div(e^{2Z} ∇w) + λ0 w`, derivatives spectral, products pointwise.
pub fn conjugate_apply(g: &GroundGauge, w: &GridField) -> Result<GridField> {
    g.z.grid.check_same(&w.grid)?;
    let e2z = g.weight();
    let flux: Vec<GridField> = w
        .gradient()
        .into_iter()
        .map(|d| GridField {
            grid: w.grid,
            values: d.values.iter().zip(&e2z.values).map(|(a, b)| a * b).collect(),
        })
        .collect();
    let div = divergence(&flux);
    Ok(GridField {
        grid: w.grid,
        values: div
            .values
            .iter()
            .zip(&e2z.values)
            .zip(&w.values)
            .map(|((d, e), wv)| -d / e + g.lambda0 * wv)
            .collect(),
    })
}

/// `‖H̃(u_k/u0) - λ_k u_k/u0‖ / ‖λ_k u_k/u0‖` (denominator floored at `‖u_k/u0‖`).
pub fn conjugation_residual(g: &GroundGauge, u: &GridField, lambda: f64) -> Result<f64> {
    let w = u.zip_map(&g.u0, |a, b| a / b)?;
    let hw = conjugate_apply(g, &w)?;
    let r = hw.zip_map(&w, |a, b| a - lambda * b)?;
    Ok(r.norm() / (w.norm() * lambda.abs().max(1.0)))
}
