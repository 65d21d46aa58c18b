//! Periodic grids on the unit torus `[0,1)^d` and their Fourier representation.
//!
//! A field `f` on an `N^d` grid is identified with its trigonometric
//! interpolant `f(x) = Σ_k c_k e^{2πi k·x}` over modes
//! `k ∈ {-N/2, …, N/2-1}^d`. Coefficients are stored in FFT order and
//! normalized so that `c_0` is the discrete mean and Parseval reads
//! `‖f‖²_{L²} = Σ |c_k|²` with the cell-volume weighted grid norm.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform periodic grid on `[0,1)^d`, `d ∈ {1,2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1,2}}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("points per axis {n} must be a power of two >= 8")));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of grid points `N^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// Signed wavenumber of FFT index `j` along one axis.
    pub fn wavenumber(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Per-axis indices of a flat (row-major) index; the second entry is 0 in 1D.
    pub fn axes(&self, flat: usize) -> [usize; 2] {
        if self.dim == 1 {
            [flat, 0]
        } else {
            [flat / self.n, flat % self.n]
        }
    }

    pub fn flat(&self, i: usize, j: usize) -> usize {
        if self.dim == 1 {
            i
        } else {
            i * self.n + j
        }
    }

    /// Mode `k` of a flat FFT-order index (second component 0 in 1D).
    pub fn mode(&self, flat: usize) -> [i64; 2] {
        let [i, j] = self.axes(flat);
        if self.dim == 1 {
            [self.wavenumber(i), 0]
        } else {
            [self.wavenumber(i), self.wavenumber(j)]
        }
    }

    pub fn mode_norm_sq(&self, flat: usize) -> f64 {
        let [a, b] = self.mode(flat);
        (a * a + b * b) as f64
    }

    /// Whether the mode is a Nyquist mode along some axis (`k_a = -N/2`).
    pub fn is_nyquist(&self, flat: usize) -> bool {
        let half = -(self.n as i64) / 2;
        let [a, b] = self.mode(flat);
        a == half || (self.dim == 2 && b == half)
    }

    /// Flat index of the mode `-k` (modulo the grid).
    pub fn conjugate_index(&self, flat: usize) -> usize {
        let n = self.n;
        let [i, j] = self.axes(flat);
        let ci = (n - i) % n;
        if self.dim == 1 {
            ci
        } else {
            self.flat(ci, (n - j) % n)
        }
    }

    /// Physical coordinates of a grid point.
    pub fn point(&self, flat: usize) -> [f64; 2] {
        let [i, j] = self.axes(flat);
        let h = self.spacing();
        if self.dim == 1 {
            [i as f64 * h, 0.0]
        } else {
            [i as f64 * h, j as f64 * h]
        }
    }

    pub fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch {
                left: format!("{self:?}"),
                right: format!("{other:?}"),
            });
        }
        Ok(())
    }
}

/// Real values on a torus grid, row-major over axes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: TorusGrid,
    pub values: Vec<f64>,
}

/// Fourier coefficients of a real field, FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: TorusGrid,
    pub coeffs: Vec<Complex64>,
}

impl GridField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("field has non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples a function of the physical coordinates.
    pub fn from_fn(grid: TorusGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|p| f(grid.point(p))).collect();
        Self { grid, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    /// Cell-volume weighted inner product.
    pub fn dot(&self, other: &GridField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.grid.cell_volume() * dot(&self.values, &other.values)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_spectral(&self) -> SpectralField {
        let mut buf: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_torus(&self.grid, &mut buf, false);
        let scale = self.grid.cell_volume();
        for c in &mut buf {
            *c *= scale;
        }
        SpectralField {
            grid: self.grid,
            coeffs: buf,
        }
    }

    /// Applies a Fourier multiplier `σ(k)`; the result keeps the real part.
    pub fn apply_symbol(&self, symbol: impl Fn(usize) -> Complex64) -> GridField {
        let mut spec = self.to_spectral();
        for (p, c) in spec.coeffs.iter_mut().enumerate() {
            *c *= symbol(p);
        }
        spec.to_grid()
    }

    /// Spectral partial derivative along `axis`; Nyquist modes are dropped.
    pub fn derivative(&self, axis: usize) -> GridField {
        let g = self.grid;
        self.apply_symbol(|p| derivative_symbol(&g, p, axis))
    }

    pub fn gradient(&self) -> Vec<GridField> {
        (0..self.grid.dim()).map(|a| self.derivative(a)).collect()
    }

    /// Spectral Laplacian (symbol `-4π²|k|²`).
    pub fn laplacian(&self) -> GridField {
        let g = self.grid;
        self.apply_symbol(|p| Complex64::new(-4.0 * PI * PI * g.mode_norm_sq(p), 0.0))
    }
}

/// Spectral divergence of a vector field given by components.
pub fn divergence(components: &[GridField]) -> GridField {
    let grid = components[0].grid;
    let mut out = GridField::zeros(grid);
    for (axis, c) in components.iter().enumerate() {
        let d = c.derivative(axis);
        for (o, v) in out.values.iter_mut().zip(d.values) {
            *o += v;
        }
    }
    out
}

pub(crate) fn derivative_symbol(grid: &TorusGrid, p: usize, axis: usize) -> Complex64 {
    let k = grid.mode(p)[axis];
    if k == -(grid.n() as i64) / 2 {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(0.0, 2.0 * PI * k as f64)
    }
}

impl SpectralField {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn to_grid(&self) -> GridField {
        let mut buf = self.coeffs.clone();
        fft_torus(&self.grid, &mut buf, true);
        GridField {
            grid: self.grid,
            values: buf.into_iter().map(|c| c.re).collect(),
        }
    }

    /// `Σ |c_k|²`, equal to the squared grid `L²` norm by Parseval.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Largest violation of `c(-k) = conj(c(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|p| (self.coeffs[self.grid.conjugate_index(p)] - self.coeffs[p].conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// Plain dot product with a fixed eight-lane accumulation order.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

type Plan = Arc<dyn Fft<f64>>;
type PlanCache = Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Plan>)>;

fn planner() -> &'static PlanCache {
    static PLANS: OnceLock<PlanCache> = OnceLock::new();
    PLANS.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())))
}

pub(crate) fn plan(len: usize, inverse: bool) -> Plan {
    let mut guard = planner().lock().expect("fft plan cache poisoned");
    let (planner, cache) = &mut *guard;
    cache
        .entry((len, inverse))
        .or_insert_with(|| {
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

/// Unnormalized in-place FFT of a 1D line or a square 2D array (row-major).
pub(crate) fn fft_square(buf: &mut [Complex64], n: usize, dim: usize, inverse: bool) {
    let fft = plan(n, inverse);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(buf, &mut scratch);
    if dim == 2 {
        transpose_square(buf, n);
        fft.process_with_scratch(buf, &mut scratch);
        transpose_square(buf, n);
    }
}

fn fft_torus(grid: &TorusGrid, buf: &mut [Complex64], inverse: bool) {
    fft_square(buf, grid.n(), grid.dim(), inverse);
}

pub(crate) fn transpose_square<T: Copy>(buf: &mut [T], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: TorusGrid, seed: u64) -> GridField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        GridField::new(grid, values).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TorusGrid::new(3, 16).is_err());
        assert!(TorusGrid::new(1, 4).is_err());
        assert!(TorusGrid::new(2, 24).is_err());
        assert!(TorusGrid::new(2, 8).is_ok());
    }

    #[test]
    fn round_trip_and_parseval() {
        for (d, n) in [(1, 64), (2, 32)] {
            let grid = TorusGrid::new(d, n).unwrap();
            let f = random_field(grid, 3);
            let spec = f.to_spectral();
            let back = spec.to_grid();
            let err = f.values.iter().zip(&back.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-12 * f.sup_norm());
            assert!(((f.norm().powi(2) - spec.norm_sq()) / spec.norm_sq()).abs() < 1e-10);
            assert!((spec.coeffs[0].re - f.mean()).abs() < 1e-12);
            assert!(spec.hermitian_defect() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_single_mode() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let f = GridField::from_fn(grid, |[x, y]| (2.0 * PI * (x + 2.0 * y)).sin());
        let dy = f.derivative(1);
        let expect = GridField::from_fn(grid, |[x, y]| 4.0 * PI * (2.0 * PI * (x + 2.0 * y)).cos());
        for (a, b) in dy.values.iter().zip(&expect.values) {
            assert!((a - b).abs() < 1e-11);
        }
        let lap = f.laplacian();
        for (a, b) in lap.values.iter().zip(&f.values) {
            assert!((a + 20.0 * PI * PI * b).abs() < 1e-9);
        }
    }

    #[test]
    fn conjugate_index_is_involution() {
        let grid = TorusGrid::new(2, 8).unwrap();
        for p in 0..grid.len() {
            let q = grid.conjugate_index(p);
            assert_eq!(grid.conjugate_index(q), p);
            let [a, b] = grid.mode(p);
            let [c, d] = grid.mode(q);
            assert_eq!(((a + c).rem_euclid(8), (b + d).rem_euclid(8)), (0, 0));
        }
    }
}
