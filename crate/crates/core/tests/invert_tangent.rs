mod common;

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rrt_core::error::Error;
use rrt_core::forward::{forward_tangent, tangent_lambda_grid};
use rrt_core::invert_tangent::*;
use rrt_core::phantoms::{tangent_phantom_compact, tangent_phantom_recoverable, Bump};

fn window_projection(g: &dyn Fn(f64) -> f64, n: i64) -> Complex64 {
    common::simpson(|b| Complex64::from_polar(g(b), -(n as f64) * b), -0.5 * PI, 0.5 * PI, 20_000) / (2.0 * PI)
}

fn small_opts() -> TangentInvertOptions {
    TangentInvertOptions { n_fft: 128, r_max: 4.0, n_r: 31 }
}

#[test]
fn constants_and_p_prime() {
    assert!((c_m(0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
    assert!((c_m(3) - 7.0 / (2.0 * PI)).abs() < 1e-15);
    for m in 0..6 {
        // Only the zonal harmonic is nonzero at the pole.
        let (p, y) = choose_p_prime(m).unwrap();
        assert_eq!(p, 0);
        assert!((y - ((2 * m + 1) as f64 / (4.0 * PI)).sqrt()).abs() < 1e-12);
    }
}

#[test]
fn deconvolve_checks_its_length() {
    let sino = forward_tangent(&tangent_phantom_recoverable(1, 0, &[(1, 0.5), (-1, 0.5)]).unwrap(), &tangent_lambda_grid(16), 1).unwrap();
    let gt = build_g_tilde(&sino, 1, 0, 0, 100).unwrap();
    assert!(matches!(deconvolve(&gt), Err(Error::Validation(_))));
    let gt = build_g_tilde(&sino, 1, 0, 0, 2).unwrap();
    assert!(matches!(deconvolve(&gt), Err(Error::Validation(_))));
    assert!(matches!(build_g_tilde(&sino, 1, 0, 1, 64), Err(Error::Validation(_))));
}

#[test]
fn mask_has_the_parity_of_m() {
    let sino = forward_tangent(&tangent_phantom_recoverable(0, 0, &[(0, 1.0)]).unwrap(), &tangent_lambda_grid(16), 4).unwrap();
    for m in 0..=4usize {
        let gt = build_g_tilde(&sino, m, 0, 0, 64).unwrap();
        let rec = deconvolve(&gt).unwrap();
        let want: Vec<i64> = (-(m as i64)..=m as i64).filter(|n| (n - m as i64) % 2 == 0).collect();
        assert_eq!(rec.mask, want, "m = {m}");
        assert_eq!(rec.c2.len(), rec.mask.len());
    }
}

#[test]
fn recoverable_modes_round_trip() {
    let lambdas = tangent_lambda_grid(48);
    for (m, k, coeffs) in [
        (1usize, 1i64, vec![(1i64, 0.5), (-1, 0.5)]),
        (2, -2, vec![(0, 0.6), (2, -0.2), (-2, -0.2)]),
    ] {
        let p = tangent_phantom_recoverable(m, k, &coeffs).unwrap();
        let sino = forward_tangent(&p, &lambdas, 2).unwrap();
        let inv = invert_mode(&sino, m, k, &small_opts()).unwrap();
        for (n, v) in inv.record.window_coefficients() {
            let want = coeffs.iter().find(|c| c.0 == n).map_or(0.0, |c| c.1);
            assert!((v - want).norm() < 1e-6, "m={m} n={n}: {v} vs {want}");
        }
        // The profile is cos²β g(β) with β = arccos(1/r).
        for (r, f) in inv.radii.iter().zip(&inv.profile).skip(1) {
            let b = (1.0 / r).acos();
            let g: f64 = coeffs.iter().map(|(n, c)| c * (*n as f64 * b).cos()).sum();
            assert!((f - g / (r * r)).norm() < 1e-6, "r={r}");
        }
        assert_eq!(inv.profile[0], Complex64::new(0.0, 0.0));
    }
}

#[test]
fn compact_profile_matches_its_projection() {
    let lambdas = tangent_lambda_grid(48);
    let bump = Bump::new(2.0, 0.8).unwrap();
    let g = |b: f64| {
        let c = b.cos();
        if c <= 0.0 {
            0.0
        } else {
            common::bump(1.0 / c, 2.0, 0.8, 8) / (c * c)
        }
    };
    for (m, k) in [(1usize, 0i64), (2, 1)] {
        let p = tangent_phantom_compact(m, k, 1.0, bump).unwrap();
        let sino = forward_tangent(&p, &lambdas, 2).unwrap();
        let inv = invert_mode(&sino, m, k, &small_opts()).unwrap();
        let wc = inv.record.window_coefficients();
        let peak = wc.iter().map(|(n, _)| window_projection(&g, *n).norm() * 2.0).fold(0.0, f64::max);
        for (n, v) in wc {
            let want = window_projection(&g, n) * 2.0;
            assert!((v - want).norm() < 1e-5 * peak, "m={m} n={n}: {v} vs {want}");
        }
    }
}

#[test]
fn null_modes_are_silent() {
    let p = tangent_phantom_recoverable(2, 0, &[(0, 0.6), (2, -0.2), (-2, -0.2)]).unwrap();
    let sino = forward_tangent(&p, &tangent_lambda_grid(32), 2).unwrap();
    let all = invert_tangent(&sino, &small_opts()).unwrap();
    assert_eq!(all.len(), 9);
    for inv in all.iter().filter(|i| (i.record.m, i.record.k) != (2, 0)) {
        let leak = inv.record.window_coefficients().iter().map(|c| c.1.norm()).fold(0.0, f64::max);
        assert!(leak < 1e-8, "({}, {}) leaks {leak}", inv.record.m, inv.record.k);
    }
}

#[test]
fn recoverable_projection_of_a_trig_polynomial_is_exact() {
    let g = |b: f64| 0.3 + 0.2 * (2.0 * b).cos();
    let (c, rest) = recoverable_projection(g, 2, 32);
    assert_eq!(c.iter().map(|p| p.0).collect::<Vec<_>>(), vec![-2, 0, 2]);
    for (n, v) in &c {
        let want = window_projection(&g, *n);
        assert!((v - want).norm() < 1e-12);
    }
    // The zero-extended polynomial is not itself in the span of the masked modes.
    assert!(rest > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn recoverable_projection_matches_simpson(
        m in 0usize..5,
        c in 1.3f64..3.0,
        w in 0.2f64..0.6,
    ) {
        let g = move |b: f64| {
            let cb = b.cos();
            if cb <= 0.0 { 0.0 } else { common::bump(1.0 / cb, c, w, 8) / (cb * cb) }
        };
        let (coeffs, rest) = recoverable_projection(g, m, 48);
        let mut kept = 0.0;
        for (n, v) in &coeffs {
            let want = window_projection(&g, *n);
            kept += want.norm_sqr();
            prop_assert!((v - want).norm() < 1e-7 * (1.0 + want.norm()), "n={n}: {v} vs {want}");
        }
        let total = common::simpson(|b| Complex64::new(g(b) * g(b), 0.0), -0.5 * PI, 0.5 * PI, 20_000).re / (2.0 * PI);
        let want = (total - kept).max(0.0).sqrt();
        prop_assert!((rest - want).abs() < 1e-6 * (1.0 + want));
    }

    #[test]
    fn funk_hecke_identity_holds(
        m in 0usize..6,
        kk in 0usize..11,
        th in 0.0f64..PI,
        ph in 0.0f64..(2.0 * PI),
        alpha in 0.0f64..PI,
    ) {
        let k = (kk % (2 * m + 1)) as i64 - m as i64;
        let psi = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
        prop_assert!(funk_hecke_residual(m, k, psi, alpha, 64) < 1e-10);
    }

    #[test]
    fn inversion_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let lambdas = tangent_lambda_grid(24);
        let p1 = tangent_phantom_recoverable(1, 0, &[(1, 0.5), (-1, 0.5)]).unwrap();
        let p2 = tangent_phantom_compact(1, 0, 1.0, Bump::new(2.0, 0.8).unwrap()).unwrap();
        let s1 = forward_tangent(&p1, &lambdas, 1).unwrap();
        let s2 = forward_tangent(&p2, &lambdas, 1).unwrap();
        let mut s = s1.clone();
        for ((v, x), y) in s.values.iter_mut().zip(&s1.values).zip(&s2.values) {
            *v = x * a + y * b;
        }
        let opts = small_opts();
        let r1 = invert_mode(&s1, 1, 0, &opts).unwrap();
        let r2 = invert_mode(&s2, 1, 0, &opts).unwrap();
        let r = invert_mode(&s, 1, 0, &opts).unwrap();
        for ((x, y), z) in r1.profile.iter().zip(&r2.profile).zip(&r.profile) {
            prop_assert!((x * a + y * b - z).norm() < 1e-10 * (1.0 + z.norm()));
        }
    }
}
