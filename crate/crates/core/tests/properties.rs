//! Property tests for invariants that hold for every input.

use std::sync::OnceLock;

use anderson_core::control::{cylinder_extension, exp_weights, hum_control, project, ControlSet};
use anderson_core::eigen::{eigensolve, EigenSystem};
use anderson_core::gauge::{ground_gauge, GroundGauge};
use anderson_core::grid::{GridField, TorusGrid};
use anderson_core::io::{csv_bytes, parse_csv, parse_pgm, pgm_bytes, raw_grid, read_raw};
use anderson_core::nodal::{caccioppoli_verify, courant_check, doubling_index, nodal_domains};
use anderson_core::noise::{enhance, Mollifier};
use anderson_core::operator::AndersonOperator;
use anderson_core::qc::{mori_estimate, sample_pairs, ComplexField, DiscPatch, ALPHA_STEP};
use num_complex::Complex64;
use proptest::prelude::*;

fn system(dim: usize, n: usize, m: usize) -> EigenSystem {
    let grid = TorusGrid::new(dim, n).unwrap();
    let noise = enhance(grid, 7, &Mollifier::new(1.0 / 16.0).unwrap());
    eigensolve(&AndersonOperator::new(&noise), m).unwrap()
}

fn line() -> &'static (EigenSystem, GroundGauge) {
    static S: OnceLock<(EigenSystem, GroundGauge)> = OnceLock::new();
    S.get_or_init(|| {
        let es = system(1, 128, 12);
        let g = ground_gauge(&es).unwrap();
        (es, g)
    })
}

fn plane() -> &'static (EigenSystem, GroundGauge) {
    static S: OnceLock<(EigenSystem, GroundGauge)> = OnceLock::new();
    S.get_or_init(|| {
        let es = system(2, 32, 8);
        let g = ground_gauge(&es).unwrap();
        (es, g)
    })
}

/// A trigonometric field with the given coefficients.
fn trig(grid: TorusGrid, c: &[f64]) -> GridField {
    GridField::from_fn(grid, |[x, y]| {
        c.iter()
            .enumerate()
            .map(|(j, a)| a * (std::f64::consts::TAU * ((j + 1) as f64 * x + (j % 3) as f64 * y) + j as f64).sin())
            .sum()
    })
}

fn close(a: &GridField, b: &GridField, tol: f64) -> bool {
    a.values.iter().zip(&b.values).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_bitwise(rows in prop::collection::vec(prop::collection::vec(-1e300f64..1e300, 3), 0..20)) {
        let bytes = csv_bytes(&["a", "b", "c"], &rows);
        let (header, back) = parse_csv(std::str::from_utf8(&bytes).unwrap()).unwrap();
        prop_assert_eq!(header, vec!["a", "b", "c"]);
        prop_assert_eq!(back.len(), rows.len());
        for (r, s) in rows.iter().zip(&back) {
            for (x, y) in r.iter().zip(s) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn raw_and_pgm_round_trip(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
        let values: Vec<f64> = (0..w * h).map(|i| ((i as u64 ^ seed) as f64).sin()).collect();
        let (bytes, _) = raw_grid(&[h, w], &values).unwrap();
        prop_assert_eq!(read_raw(&bytes), values);
        let labels: Vec<u32> = (0..w * h).map(|i| ((i as u64).wrapping_mul(seed | 1) % 7) as u32).collect();
        let (pw, ph, back) = parse_pgm(std::str::from_utf8(&pgm_bytes(w, h, &labels).unwrap()).unwrap()).unwrap();
        prop_assert_eq!((pw, ph), (w, h));
        prop_assert_eq!(back, labels);
    }

    #[test]
    fn exponential_weights_integrate_constants(x in -20.0f64..1e4) {
        // ∫₀¹ e^{-x(1-t)} dt = (1 - e^{-x}) / x
        let exact = if x.abs() < 1e-12 { 1.0 } else { -(-x).exp_m1() / x };
        let sum: f64 = exp_weights(x).iter().sum();
        prop_assert!((sum - exact).abs() <= 1e-12 * exact.abs().max(1e-300), "{} {}", sum, exact);
    }

    #[test]
    fn wirtinger_derivatives_commute_with_conjugation(a in -2.0f64..2.0, b in -2.0f64..2.0, k in 1i32..4) {
        let patch = DiscPatch::new([0.5, 0.5], 1.0 / 16.0, 64).unwrap();
        let grid = patch.square();
        let w = std::f64::consts::PI / grid.half_width;
        let f = ComplexField::from_fn(grid, |z| {
            let p = Complex64::new(0.0, w * k as f64 * z.re).exp() * Complex64::new(a, b)
                + Complex64::new(0.0, w * z.im).exp();
            p * p
        });
        let (d, dbar) = f.wirtinger();
        let (d_conj, dbar_conj) = f.conj().wirtinger();
        let scale = d.values.iter().chain(&dbar.values).fold(1.0f64, |m, v| m.max(v.norm()));
        for (x, y) in dbar_conj.values.iter().zip(&d.values) {
            prop_assert!((x - y.conj()).norm() <= 1e-10 * scale);
        }
        for (x, y) in d_conj.values.iter().zip(&dbar.values) {
            prop_assert!((x - y.conj()).norm() <= 1e-10 * scale);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectral_projector_algebra(c in prop::collection::vec(-1.0f64..1.0, 6), l1 in 0.0f64..400.0, l2 in 0.0f64..400.0) {
        let (es, _) = line();
        let u = trig(es.grid, &c);
        let p1 = project(es, l1, &u).unwrap();
        prop_assert!(close(&project(es, l1, &p1).unwrap(), &p1, 1e-12 * u.sup_norm().max(1.0)));
        prop_assert!(p1.norm() <= u.norm() * (1.0 + 1e-12));
        let w = trig(es.grid, &[c[3], c[1], -c[0]]);
        let adjoint_gap = p1.dot(&w) - u.dot(&project(es, l1, &w).unwrap());
        prop_assert!(adjoint_gap.abs() <= 1e-12 * u.norm() * w.norm().max(1.0));
        let nested = project(es, l2, &p1).unwrap();
        let direct = project(es, l1.min(l2), &u).unwrap();
        prop_assert!(close(&nested, &direct, 1e-10));
    }

    #[test]
    fn hum_control_is_linear(a in prop::collection::vec(-1.0f64..1.0, 3), b in prop::collection::vec(-1.0f64..1.0, 3), s in -3.0f64..3.0) {
        let (es, _) = line();
        let omega = ControlSet::interval(es.grid, 0.1, 0.35).unwrap();
        let band = [0, 1, 2];
        let tau = 0.3;
        let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| s * x + y).collect();
        let (ca, cb, cc) = (
            hum_control(es, &omega, &band, tau, &a).unwrap(),
            hum_control(es, &omega, &band, tau, &b).unwrap(),
            hum_control(es, &omega, &band, tau, &combo).unwrap(),
        );
        let scale = ca.c.iter().chain(&cb.c).fold(1.0f64, |m, v| m.max(v.abs()));
        for ((x, y), z) in ca.c.iter().zip(&cb.c).zip(&cc.c) {
            prop_assert!((s * x + y - z).abs() <= 1e-9 * scale * (1.0 + s.abs()));
        }
    }

    #[test]
    fn nodal_count_invariant_under_scaling(k in 1usize..8, s in prop::sample::select(vec![-3.0, -1.0, 1e-3, 2.5, 1e4])) {
        let (es, _) = plane();
        let u = &es.eigenvectors[k];
        let d = nodal_domains(u, 1e-3).unwrap();
        let ds = nodal_domains(&u.scaled(s), 1e-3).unwrap();
        prop_assert_eq!(d.domain_count, ds.domain_count);
        prop_assert_eq!(d.labels.iter().map(|l| *l == 0).collect::<Vec<_>>(), ds.labels.iter().map(|l| *l == 0).collect::<Vec<_>>());
    }

    #[test]
    fn raising_delta_refines_the_decomposition(k in 1usize..8, d1 in 0.0f64..0.1, d2 in 0.0f64..0.1) {
        let (es, _) = plane();
        let (lo, hi) = (d1.min(d2), d1.max(d2));
        let coarse = nodal_domains(&es.eigenvectors[k], lo).unwrap();
        let fine = nodal_domains(&es.eigenvectors[k], hi).unwrap();
        // every fine domain sits inside exactly one coarse domain
        let mut parent = vec![0u32; fine.domain_count + 1];
        for (f, c) in fine.labels.iter().zip(&coarse.labels) {
            if *f == 0 {
                continue;
            }
            prop_assert!(*c != 0, "band shrank");
            let p = &mut parent[*f as usize];
            prop_assert!(*p == 0 || *p == *c);
            *p = *c;
        }
    }

    #[test]
    fn courant_verdicts_ignore_sign_flips(mask in 0u32..256) {
        let (es, _) = plane();
        let mut flipped = es.clone();
        for (k, u) in flipped.eigenvectors.iter_mut().enumerate() {
            if mask >> k & 1 == 1 {
                *u = u.scaled(-1.0);
            }
        }
        let a = courant_check(es, 1e-3).unwrap();
        let b = courant_check(&flipped, 1e-3).unwrap();
        for (x, y) in a.entries.iter().zip(&b.entries) {
            prop_assert_eq!((x.domain_count, x.pass), (y.domain_count, y.pass));
        }
    }

    #[test]
    fn caccioppoli_ratio_is_scale_invariant(k in 0usize..8, s in prop::sample::select(vec![-2.0, 1e-3, 7.0])) {
        let (es, g) = plane();
        let u = &es.eigenvectors[k];
        let radii = [1.0 / 16.0, 1.0 / 8.0];
        let x0 = [0.5, 0.5];
        let a = caccioppoli_verify(g, u, x0, &radii).unwrap();
        let b = caccioppoli_verify(g, &u.scaled(s), x0, &radii).unwrap();
        for (r, q) in a.iter().zip(&b) {
            prop_assert!((r.ratio - q.ratio).abs() <= 1e-10 * r.ratio.abs().max(1e-300));
        }
    }

    #[test]
    fn ball_mass_non_decreasing_in_radius(k in 0usize..8, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let (es, _) = plane();
        let radii = [1.0 / 64.0, 1.0 / 32.0, 0.05, 1.0 / 16.0, 0.1, 1.0 / 8.0];
        let d = doubling_index(&es.eigenvectors[k], [x, y], &radii).unwrap();
        for w in d.q_r.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        for (a, b) in d.q_r.iter().zip(&d.q_2r) {
            prop_assert!(b >= a);
        }
    }

    #[test]
    fn cylinder_extension_even_with_exact_trace(c in prop::collection::vec(-1.0f64..1.0, 5), half in 1usize..5) {
        let (es, g) = line();
        let u = es.eigenvectors[..5]
            .iter()
            .zip(&c)
            .fold(GridField::zeros(es.grid), |acc, (v, a)| acc.zip_map(v, |p, q| p + a * q).unwrap());
        let ext = cylinder_extension(es, g, &u, es.eigenvalues[4], 1.0, 2 * half + 1).unwrap();
        let rows = ext.values.len();
        for r in 0..rows {
            prop_assert!(close(&ext.values[r], &ext.values[rows - 1 - r], 1e-12 * ext.values[r].sup_norm().max(1.0)));
        }
        // the middle row is y = 0, where f = Σ a_k u_k / u0 = u / u0
        let trace = u.zip_map(&g.u0, |a, b| a / b).unwrap();
        prop_assert!(close(&ext.values[half], &trace, 1e-12 * trace.sup_norm().max(1.0)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mori_fit_is_similarity_invariant(
        a in 0.3f64..1.0,
        scale in 1e-3f64..1e3,
        turn in 0.0f64..6.3,
        p in 0.5f64..2.0,
        q in -0.4f64..0.4,
    ) {
        let domain: Vec<Complex64> = (0..1500)
            .map(|i| Complex64::from_polar(((i as f64 + 0.5) / 1500.0).sqrt(), i as f64 * 2.399963229728653))
            .collect();
        let pairs = sample_pairs(domain.len(), 6000, 11);
        let image: Vec<Complex64> = domain.iter().map(|z| if z.norm() == 0.0 { *z } else { z * z.norm().powf(a - 1.0) }).collect();
        let similar: Vec<Complex64> = image.iter().map(|z| z * Complex64::from_polar(scale, turn)).collect();
        let base = mori_estimate(&domain, &image, &pairs);
        let moved = mori_estimate(&domain, &similar, &pairs);
        // rounding in the rescaled distances may move α by one grid step
        prop_assert!((base.alpha - moved.alpha).abs() <= ALPHA_STEP + 1e-12);
        prop_assert!(base.alpha <= 1.0);
        // a real-linear map with |q| < p is bi-Lipschitz
        let linear: Vec<Complex64> = domain.iter().map(|z| p * z + q * z.conj()).collect();
        prop_assert_eq!(mori_estimate(&domain, &linear, &pairs).alpha, 1.0);
    }
}

/// Two bumps joined by a ridge of height 0.05: one domain below the ridge
/// height, two above it, so the count is not monotone in δ.
#[test]
fn domain_count_can_grow_with_delta() {
    let grid = TorusGrid::new(1, 128).unwrap();
    let u = GridField::from_fn(grid, |[x, _]| {
        let bump = |c: f64| (-((x - c) / 0.05).powi(2)).exp();
        if (0.2..=0.8).contains(&x) {
            bump(0.3) + bump(0.7) + 0.05
        } else {
            -1.0
        }
    });
    assert_eq!(nodal_domains(&u, 0.01).unwrap().domain_count, 2);
    assert_eq!(nodal_domains(&u, 0.08).unwrap().domain_count, 3);
}
