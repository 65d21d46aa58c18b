//! Local quasiconformal structure of solutions to `div(σ∇v) = 0` on a disc.
//!
//! Everything here lives on a [`DiscPatch`]: a disc of radius `R` around a
//! torus point `x0`, computed on the square `[-2R, 2R]²` with the chart
//! `z = x - x0`. Fields on the square are differentiated by eighth-order
//! differences; periodic fields on the doubled square spectrally.

mod adjoint;
mod beltrami;
mod factor;
mod mori;
mod pipeline;
mod stream;

pub use adjoint::{adjoint_gauge, adjoint_gauge_weighted, dirichlet_ground_energy, AdjointGauge};
pub use beltrami::{
    affine_sup_error, beltrami_coefficient, beltrami_raw, collar, radial_stretch, solve_beltrami, BeltramiField, BeltramiSolution,
    BELTRAMI_TOLERANCE, CRITICAL_THRESHOLD,
};
pub use factor::{factorize, nodal_correspondence, CorrespondenceReport, QCFactorization};
pub use mori::{mori_estimate, sample_pairs, three_circles_check, three_circles_deformed, MoriFit, ALPHA_STEP, SCALE_BALANCE};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineReport, PipelineRun};
pub use stream::{stream_function, weighted_divergence_residual, StreamFunction, STREAM_TOLERANCE};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{fft_square, GridField};

/// A disc of radius `R` around `x0` with an `M × M` computational square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscPatch {
    pub center: [f64; 2],
    pub radius: f64,
    pub m: usize,
}

impl DiscPatch {
    pub fn new(center: [f64; 2], radius: f64, m: usize) -> Result<Self> {
        if !(radius > 0.0 && radius <= 0.125) {
            return Err(Error::InvalidArgument(format!("patch radius {radius} outside (0, 1/8]")));
        }
        if m < 64 || !m.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("patch resolution {m} must be a power of two >= 64")));
        }
        Ok(Self { center, radius, m })
    }

    /// The computational square `[-2R, 2R)²` sampled with `M` points per axis.
    pub fn square(&self) -> PatchGrid {
        PatchGrid {
            half_width: 2.0 * self.radius,
            n: self.m,
        }
    }

    /// The doubled square `[-4R, 4R)²` used by the Beurling transform.
    pub fn doubled(&self) -> PatchGrid {
        PatchGrid {
            half_width: 4.0 * self.radius,
            n: 2 * self.m,
        }
    }
}

/// A periodic square grid `[-w, w)²` with `n` points per axis in chart
/// coordinates; index `(i, j)` is the point `z = (-w + ih) + i(-w + jh)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PatchGrid {
    pub half_width: f64,
    pub n: usize,
}

impl PatchGrid {
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn z(&self, p: usize) -> Complex64 {
        Complex64::new(self.coord(p / self.n), self.coord(p % self.n))
    }

    /// Index of the chart origin.
    pub fn origin(&self) -> usize {
        let c = self.n / 2;
        c * self.n + c
    }
}

/// Complex values on a [`PatchGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: PatchGrid,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn from_fn(grid: PatchGrid, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid,
            values: (0..grid.len()).map(|p| f(grid.z(p))).collect(),
        }
    }

    pub fn from_real(grid: PatchGrid, values: &[f64]) -> Self {
        Self {
            grid,
            values: values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.im).collect()
    }

    /// Periodic Wirtinger derivatives `(∂f, ∂̄f)`; Nyquist modes are dropped.
    pub fn wirtinger(&self) -> (ComplexField, ComplexField) {
        let [dx, dy] = periodic_gradient(self.grid, &self.values);
        let half = 0.5;
        let d: Vec<Complex64> = dx.iter().zip(&dy).map(|(a, b)| (a - Complex64::i() * b) * half).collect();
        let dbar: Vec<Complex64> = dx.iter().zip(&dy).map(|(a, b)| (a + Complex64::i() * b) * half).collect();
        (
            ComplexField {
                grid: self.grid,
                values: d,
            },
            ComplexField {
                grid: self.grid,
                values: dbar,
            },
        )
    }
}

/// Periodic spectral gradient `(∂x f, ∂y f)` on a patch grid.
pub(crate) fn periodic_gradient(grid: PatchGrid, values: &[Complex64]) -> [Vec<Complex64>; 2] {
    let n = grid.n;
    let mut spec = values.to_vec();
    fft_square(&mut spec, n, 2, false);
    let scale = 1.0 / grid.len() as f64;
    let base = std::f64::consts::PI / grid.half_width;
    let wave = |i: usize| {
        let k = if i < n / 2 { i as i64 } else { i as i64 - n as i64 };
        if k == -(n as i64) / 2 {
            0.0
        } else {
            base * k as f64
        }
    };
    let mut out = [spec.clone(), spec];
    for (axis, buf) in out.iter_mut().enumerate() {
        for (p, c) in buf.iter_mut().enumerate() {
            let k = if axis == 0 { wave(p / n) } else { wave(p % n) };
            *c *= Complex64::new(0.0, k * scale);
        }
        fft_square(buf, n, 2, true);
    }
    out
}

/// Applies a Fourier multiplier given on signed wavenumbers `(k1, k2)`.
pub(crate) fn periodic_multiplier(grid: PatchGrid, values: &[Complex64], symbol: impl Fn(i64, i64) -> Complex64) -> Vec<Complex64> {
    let n = grid.n;
    let mut spec = values.to_vec();
    fft_square(&mut spec, n, 2, false);
    let scale = 1.0 / grid.len() as f64;
    let signed = |i: usize| if i < n / 2 { i as i64 } else { i as i64 - n as i64 };
    for (p, c) in spec.iter_mut().enumerate() {
        *c *= symbol(signed(p / n), signed(p % n)) * scale;
    }
    fft_square(&mut spec, n, 2, true);
    spec
}

/// Smooth step: 1 on `t ≤ a`, 0 on `t ≥ b`, `C^∞` in between.
pub fn smooth_step(t: f64, a: f64, b: f64) -> f64 {
    if t <= a {
        return 1.0;
    }
    if t >= b {
        return 0.0;
    }
    let phi = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let s = (t - a) / (b - a);
    phi(1.0 - s) / (phi(1.0 - s) + phi(s))
}

/// Centred finite-difference weights of orders 2, 4, 6 and 8 (offsets 1..=r).
const CENTRED: [&[f64]; 4] = [
    &[0.5],
    &[2.0 / 3.0, -1.0 / 12.0],
    &[0.75, -0.15, 1.0 / 60.0],
    &[0.8, -0.2, 4.0 / 105.0, -1.0 / 280.0],
];

/// Gradient of a real field on the (non-periodic) computational square:
/// eighth-order centred differences, lower order within four nodes of the
/// edge and one-sided on it.
pub(crate) fn square_gradient(grid: PatchGrid, values: &[f64]) -> [Vec<f64>; 2] {
    let n = grid.n;
    let inv_h = 1.0 / grid.spacing();
    let diff = |p: usize, k: usize, stride: usize| -> f64 {
        let r = k.min(n - 1 - k).min(4);
        if r == 0 {
            return if k == 0 {
                (values[p + stride] - values[p]) * inv_h
            } else {
                (values[p] - values[p - stride]) * inv_h
            };
        }
        CENTRED[r - 1]
            .iter()
            .enumerate()
            .map(|(o, w)| w * (values[p + (o + 1) * stride] - values[p - (o + 1) * stride]))
            .sum::<f64>()
            * inv_h
    };
    let dx = (0..grid.len()).map(|p| diff(p, p / n, n)).collect();
    let dy = (0..grid.len()).map(|p| diff(p, p % n, 1)).collect();
    [dx, dy]
}

/// Samples a 2D torus field on the patch grid through its trigonometric
/// interpolant, with the chart origin at `center`.
pub fn sample_on_patch(f: &GridField, center: [f64; 2], grid: PatchGrid) -> Result<Vec<f64>> {
    let xs: Vec<f64> = (0..grid.n).map(|i| center[0] + grid.coord(i)).collect();
    let ys: Vec<f64> = (0..grid.n).map(|j| center[1] + grid.coord(j)).collect();
    sample_tensor(f, &xs, &ys)
}

/// Trigonometric interpolant of a 2D torus field on the tensor grid
/// `xs × ys` (row-major in `xs`).
pub fn sample_tensor(f: &GridField, xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
    if f.grid.dim() != 2 {
        return Err(Error::InvalidArgument("patch sampling needs a 2D field".into()));
    }
    let spec = f.to_spectral();
    let n = f.grid.n();
    let (mx, my) = (xs.len(), ys.len());
    let tau = 2.0 * std::f64::consts::PI;
    let k: Vec<f64> = (0..n).map(|i| f.grid.wavenumber(i) as f64).collect();
    let phase = |kk: f64, x: f64| Complex64::from_polar(1.0, tau * kk * x);
    let ey: Vec<Complex64> = (0..n)
        .flat_map(|b| ys.iter().map(move |&y| (b, y)))
        .map(|(b, y)| phase(k[b], y))
        .collect();
    // partial sums over the second axis
    let mut part = vec![Complex64::new(0.0, 0.0); n * my];
    for a in 0..n {
        for b in 0..n {
            let c = spec.coeffs[a * n + b];
            if c.norm_sqr() == 0.0 {
                continue;
            }
            let row = &mut part[a * my..(a + 1) * my];
            for (o, e) in row.iter_mut().zip(&ey[b * my..(b + 1) * my]) {
                *o += c * e;
            }
        }
    }
    let mut out = vec![0.0; mx * my];
    for (i, &x) in xs.iter().enumerate() {
        for a in 0..n {
            let e = phase(k[a], x);
            let row = &part[a * my..(a + 1) * my];
            for (o, p) in out[i * my..(i + 1) * my].iter_mut().zip(row) {
                *o += (e * p).re;
            }
        }
    }
    Ok(out)
}

/// Four-point Lagrange interpolation on a uniform grid (periodic indices).
pub(crate) fn lagrange_interpolate<T>(grid: PatchGrid, values: &[T], z: Complex64) -> T
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
{
    let n = grid.n;
    let h = grid.spacing();
    let locate = |x: f64| {
        let t = (x + grid.half_width) / h;
        let i = t.floor();
        (i as i64, t - i)
    };
    let weights = |s: f64| {
        [
            -s * (s - 1.0) * (s - 2.0) / 6.0,
            (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
            -(s + 1.0) * s * (s - 2.0) / 2.0,
            (s + 1.0) * s * (s - 1.0) / 6.0,
        ]
    };
    let (i, a) = locate(z.re);
    let (j, b) = locate(z.im);
    let (wa, wb) = (weights(a), weights(b));
    let wrap = |k: i64| k.rem_euclid(n as i64) as usize;
    let mut acc = T::default();
    for (di, wi) in wa.iter().enumerate() {
        let ii = wrap(i - 1 + di as i64);
        let mut row = T::default();
        for (dj, wj) in wb.iter().enumerate() {
            let jj = wrap(j - 1 + dj as i64);
            row = row + values[ii * n + jj] * *wj;
        }
        acc = acc + row * *wi;
    }
    acc
}
