//! Quadrature rules and periodic interpolation shared by the diagnostics.

use std::f64::consts::PI;

use crate::grid::GridField;

/// Four-point Gauss-Legendre nodes on `[-1, 1]`.
pub const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
pub const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_8,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_8,
];

/// Composite four-point Gauss-Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(a: f64, b: f64, segments: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / segments as f64;
    let mut out = Vec::with_capacity(4 * segments);
    for s in 0..segments {
        let mid = a + (s as f64 + 0.5) * h;
        for (x, w) in GL4_NODES.iter().zip(GL4_WEIGHTS) {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

/// Periodic linear (1D) or bilinear (2D) interpolation at a physical point.
pub fn interpolate(f: &GridField, p: [f64; 2]) -> f64 {
    let n = f.grid.n();
    let nf = n as f64;
    let locate = |x: f64| {
        let t = x.rem_euclid(1.0) * nf;
        let i = t.floor();
        ((i as usize) % n, t - i)
    };
    let (i, a) = locate(p[0]);
    let i1 = (i + 1) % n;
    if f.grid.dim() == 1 {
        return (1.0 - a) * f.values[i] + a * f.values[i1];
    }
    let (j, b) = locate(p[1]);
    let j1 = (j + 1) % n;
    let at = |i: usize, j: usize| f.values[i * n + j];
    (1.0 - a) * ((1.0 - b) * at(i, j) + b * at(i, j1)) + a * ((1.0 - b) * at(i1, j) + b * at(i1, j1))
}

/// Quadrature nodes for the ball `B(x0, r)` on the torus: a symmetric interval
/// in 1D, a polar grid with 64 angles in 2D. Radial segments are no longer
/// than half a grid cell.
pub fn ball_nodes(dim: usize, spacing: f64, x0: [f64; 2], r: f64) -> Vec<([f64; 2], f64)> {
    let segments = ((2.0 * r / spacing).ceil() as usize).max(2);
    if dim == 1 {
        return gauss_legendre(x0[0] - r, x0[0] + r, 2 * segments)
            .into_iter()
            .map(|(x, w)| ([x, 0.0], w))
            .collect();
    }
    const ANGLES: usize = 64;
    let radial = gauss_legendre(0.0, r, segments);
    let dtheta = 2.0 * PI / ANGLES as f64;
    let mut out = Vec::with_capacity(radial.len() * ANGLES);
    for &(rho, w) in &radial {
        for a in 0..ANGLES {
            let th = a as f64 * dtheta;
            out.push(([x0[0] + rho * th.cos(), x0[1] + rho * th.sin()], w * rho * dtheta));
        }
    }
    out
}

/// `∫_{B(x0,r)} F(f_1, …, f_n)` with every field interpolated at the nodes.
pub fn ball_integral(fields: &[&GridField], x0: [f64; 2], r: f64, integrand: impl Fn(&[f64]) -> f64) -> f64 {
    let grid = fields[0].grid;
    let mut vals = vec![0.0; fields.len()];
    ball_nodes(grid.dim(), grid.spacing(), x0, r)
        .into_iter()
        .map(|(p, w)| {
            for (v, f) in vals.iter_mut().zip(fields) {
                *v = interpolate(f, p);
            }
            w * integrand(&vals)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;

    #[test]
    fn gauss_legendre_exact_for_cubics_per_segment() {
        let q: f64 = gauss_legendre(0.0, 2.0, 3).iter().map(|(x, w)| w * x.powi(7)).sum();
        assert!((q - 2f64.powi(8) / 8.0).abs() < 1e-12);
    }

    #[test]
    fn bilinear_reproduces_grid_values_and_linears() {
        let g = TorusGrid::new(2, 16).unwrap();
        let f = GridField::from_fn(g, |[x, y]| (2.0 * PI * x).sin() + y * 0.0);
        for p in [0usize, 17, 100] {
            let pt = g.point(p);
            assert!((interpolate(&f, pt) - f.values[p]).abs() < 1e-15);
        }
        let lin = GridField::from_fn(g, |[x, y]| x + 2.0 * y);
        assert!((interpolate(&lin, [0.3, 0.4]) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn disc_area() {
        let g = TorusGrid::new(2, 64).unwrap();
        let one = GridField::constant(g, 1.0);
        let a = ball_integral(&[&one], [0.5, 0.5], 0.1, |v| v[0]);
        assert!((a - PI * 0.01).abs() < 1e-12);
        let g1 = TorusGrid::new(1, 64).unwrap();
        let one = GridField::constant(g1, 1.0);
        assert!((ball_integral(&[&one], [0.0, 0.0], 0.1, |v| v[0]) - 0.2).abs() < 1e-13);
    }
}
