//! The renormalized Anderson operator `A = -Δ - ξ^ε + c_ε`, applied matrix-free.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::Result;
use crate::grid::{fft_square, GridField, TorusGrid};
use crate::noise::EnhancedNoise;

/// `A v = -Δv + V v` with potential `V = -ξ^ε + c`.
#[derive(Debug, Clone)]
pub struct AndersonOperator {
    grid: TorusGrid,
    xi: GridField,
    renorm: f64,
    potential: Vec<f64>,
    symbol: Vec<f64>,
}

impl AndersonOperator {
    pub fn new(noise: &EnhancedNoise) -> Self {
        Self::with_potential(noise.xi_eps.clone(), noise.c_eps)
    }

    /// Operator with an arbitrary field in place of the noise and constant `c`.
    pub fn with_potential(xi: GridField, renorm: f64) -> Self {
        let grid = xi.grid;
        let potential = xi.values.iter().map(|x| renorm - x).collect();
        let symbol = (0..grid.len()).map(|p| 4.0 * PI * PI * grid.mode_norm_sq(p)).collect();
        Self {
            grid,
            xi,
            renorm,
            potential,
            symbol,
        }
    }

    /// Same noise, different renormalization constant.
    pub fn with_renorm(&self, renorm: f64) -> Self {
        Self::with_potential(self.xi.clone(), renorm)
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn renorm(&self) -> f64 {
        self.renorm
    }

    pub fn xi(&self) -> &GridField {
        &self.xi
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn apply(&self, v: &GridField) -> Result<GridField> {
        self.grid.check_same(&v.grid)?;
        let mut out = vec![0.0; v.values.len()];
        self.apply_pair(&v.values, None, &mut out, None);
        Ok(GridField {
            grid: self.grid,
            values: out,
        })
    }

    /// Applies `A` to one or two real vectors with a single complex transform pair.
    ///
    /// The Laplacian symbol is real and even, so packing `a + ib` keeps the
    /// two images in the real and imaginary parts.
    pub(crate) fn apply_pair(&self, a: &[f64], b: Option<&[f64]>, out_a: &mut [f64], out_b: Option<&mut [f64]>) {
        let n = self.grid.n();
        let dim = self.grid.dim();
        let mut buf: Vec<Complex64> = match b {
            Some(b) => a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect(),
            None => a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        };
        fft_square(&mut buf, n, dim, false);
        let scale = self.grid.cell_volume();
        for (c, s) in buf.iter_mut().zip(&self.symbol) {
            *c *= s * scale;
        }
        fft_square(&mut buf, n, dim, true);
        for ((o, c), (x, v)) in out_a.iter_mut().zip(&buf).zip(a.iter().zip(&self.potential)) {
            *o = c.re + v * x;
        }
        if let (Some(b), Some(out_b)) = (b, out_b) {
            for ((o, c), (y, v)) in out_b.iter_mut().zip(&buf).zip(b.iter().zip(&self.potential)) {
                *o = c.im + v * y;
            }
        }
    }

    /// Applies `-Δ + τ` inverse, the eigensolver preconditioner.
    pub(crate) fn precondition_pair(&self, tau: f64, a: &mut [f64], b: Option<&mut [f64]>) {
        let n = self.grid.n();
        let dim = self.grid.dim();
        let mut buf: Vec<Complex64> = match &b {
            Some(b) => a.iter().zip(b.iter()).map(|(&x, &y)| Complex64::new(x, y)).collect(),
            None => a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        };
        fft_square(&mut buf, n, dim, false);
        let scale = self.grid.cell_volume();
        for (c, s) in buf.iter_mut().zip(&self.symbol) {
            *c *= scale / (s + tau);
        }
        fft_square(&mut buf, n, dim, true);
        for (o, c) in a.iter_mut().zip(&buf) {
            *o = c.re;
        }
        if let Some(b) = b {
            for (o, c) in b.iter_mut().zip(&buf) {
                *o = c.im;
            }
        }
    }
}
