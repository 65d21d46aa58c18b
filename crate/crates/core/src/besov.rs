//! Dyadic Littlewood-Paley blocks and the Besov-type sup estimator.

use num_complex::Complex64;

use crate::grid::SpectralField;

/// Block index of a mode with squared norm `k2`: 0 for `k = 0`, otherwise the
/// `j ≥ 1` with `2^{j-1} ≤ |k| < 2^j`.
fn block_of(k2: f64) -> usize {
    if k2 == 0.0 {
        return 0;
    }
    let mut j = 1;
    while ((1u64 << j) as f64).powi(2) <= k2 {
        j += 1;
    }
    j
}

/// Sup norms `‖Δ_j f‖_∞` of the sharp dyadic annular blocks, `j = 0, 1, …`.
pub fn block_sup_norms(f: &SpectralField) -> Vec<f64> {
    let grid = f.grid;
    let blocks: Vec<usize> = (0..grid.len()).map(|p| block_of(grid.mode_norm_sq(p))).collect();
    let jmax = blocks.iter().copied().max().unwrap_or(0);
    (0..=jmax)
        .map(|j| {
            let mut part = f.clone();
            for (c, &b) in part.coeffs.iter_mut().zip(&blocks) {
                if b != j {
                    *c = Complex64::new(0.0, 0.0);
                }
            }
            part.to_grid().sup_norm()
        })
        .collect()
}

/// `sup_j 2^{jγ} ‖Δ_j f‖_∞`.
pub fn besov_regularity(f: &SpectralField, gamma: f64) -> f64 {
    block_sup_norms(f)
        .iter()
        .enumerate()
        .map(|(j, &b)| 2f64.powf(j as f64 * gamma) * b)
        .fold(0.0, f64::max)
}
