mod common;

use num_complex::Complex64;
use rrt_core::error::Error;
use rrt_core::forward::{forward_equidistant, EquidistantGrid};
use rrt_core::invert_equidistant::*;
use rrt_core::mellin::Window;
use rrt_core::phantoms::{equidistant_phantom, equidistant_phantom_real, Bump};

/// M F(z) = ∫ y^{z-1} F(y) dy over the support [a, b].
fn mellin_oracle(f: &dyn Fn(f64) -> f64, a: f64, b: f64, z: Complex64) -> Complex64 {
    common::simpson(|y| Complex64::new(y, 0.0).powc(z - 1.0) * f(y), a, b, 20_000)
}

fn coarse_opts() -> EquidistantInvertOptions {
    EquidistantInvertOptions { omega: 40.0, h: 0.2, ..Default::default() }
}

#[test]
fn angular_modes_need_enough_phi_nodes() {
    let p = equidistant_phantom(1, Bump::new(1.0, 0.5).unwrap(), Bump::new(1.0, 0.9).unwrap()).unwrap();
    let sino = forward_equidistant(&p, &EquidistantGrid::standard(1.5, 16, 16, 4)).unwrap();
    assert!(matches!(angular_modes(&sino, 2), Err(Error::Validation(_))));
    let modes = angular_modes(&sino, 1).unwrap();
    assert_eq!(modes.iter().map(|m| m.n).collect::<Vec<_>>(), vec![-1, 0, 1]);
    // A pure n = 1 phantom has nothing in the other modes.
    let peak = modes[2].values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(peak > 1e-3);
    for m in &modes[..2] {
        assert!(m.values.iter().all(|v| v.norm() < 1e-12 * peak));
    }
}

#[test]
fn options_are_validated() {
    let p = equidistant_phantom(0, Bump::new(1.0, 0.5).unwrap(), Bump::new(1.0, 0.9).unwrap()).unwrap();
    let grid = EquidistantGrid::standard(1.5, 16, 16, 4);
    let sino = forward_equidistant(&p, &grid).unwrap();
    let mode = &angular_modes(&sino, 0).unwrap()[0];
    for bad in [
        EquidistantInvertOptions { xi_re: 1.2, ..coarse_opts() },
        EquidistantInvertOptions { xi_re: 0.0, ..coarse_opts() },
        EquidistantInvertOptions { zeta_offset: 0.0, ..coarse_opts() },
        EquidistantInvertOptions { head_fit: 2, ..coarse_opts() },
    ] {
        assert!(matches!(mode_to_u(mode, &grid.lambdas, &grid.s, &bad), Err(Error::Validation(_))));
    }
    let state = mode_to_u(mode, &grid.lambdas, &grid.s, &coarse_opts()).unwrap();
    let bad_grid = FieldGrid { r: vec![0.0, 1.0], tau: vec![1.0] };
    assert!(matches!(recover_mode(&state, &bad_grid), Err(Error::Validation(_))));
}

#[test]
fn field_grid_and_errors() {
    let b = rrt_core::phantoms::SupportBox { r_min: 0.0, r_max: 2.0, tau_min: 0.5, tau_max: 1.5 };
    let g = FieldGrid::uniform(&b, 5, 3);
    assert_eq!(g.r.len(), 5);
    assert!(g.r[0] > 0.0 && (g.r[4] - 2.0).abs() < 1e-15);
    assert_eq!(g.tau, vec![0.5, 1.0, 1.5]);
    let t = vec![Complex64::new(1.0, 0.0), Complex64::new(-2.0, 0.0)];
    let u = vec![Complex64::new(1.0, 0.0), Complex64::new(-2.0, 1.0)];
    let (l2, li) = field_errors(&u, &t);
    assert!((l2 - (1.0f64 / 5.0).sqrt()).abs() < 1e-15);
    assert!((li - 0.5).abs() < 1e-15);
    assert_eq!(field_errors(&t, &t), (0.0, 0.0));
}

#[test]
fn u_matches_the_separable_mellin_oracle() {
    // For f_n = B_r(r) B_τ(τ) rⁿ the operator factorizes into two one-variable transforms.
    let (rc, wr, tc, wt) = (1.0, 0.5, 1.0, 0.9);
    let opts = EquidistantInvertOptions::default();
    for n in [0i64, 1] {
        let p = equidistant_phantom(n, Bump::new(rc, wr).unwrap(), Bump::new(tc, wt).unwrap()).unwrap();
        let grid = EquidistantGrid::standard(rc + wr, 512, 384, 4.max(4 * n as usize));
        let sino = forward_equidistant(&p, &grid).unwrap();
        let mode = angular_modes(&sino, n as usize).unwrap().into_iter().find(|m| m.n == n).unwrap();
        let state = mode_to_u(&mode, &grid.lambdas, &grid.s, &opts).unwrap();
        let mid = state.zeta.len() / 2;
        let idx = [mid, mid + 20, mid - 40, mid + 60];
        let got = state.u_operator().samples(&idx, &idx);
        for (a, &l) in idx.iter().enumerate() {
            let mt = mellin_oracle(&|y| common::bump(y, tc, wt, 8), tc - wt, tc + wt, state.xi.s(l));
            for (b, &j) in idx.iter().enumerate() {
                let mr = mellin_oracle(&|y| common::bump(y, rc, wr, 8), rc - wr, rc + wr, state.zeta.s(j));
                let want = mr * mt;
                let err = (got[a][b] - want).norm() / want.norm();
                assert!(err < 1e-3, "n={n} (j={j}, l={l}): {} vs {want} ({err:.2e})", got[a][b]);
            }
        }
    }
}

#[test]
fn kernel_cache_matches_the_operator() {
    let p = equidistant_phantom_real(2, Bump::new(1.0, 0.5).unwrap(), Bump::new(1.0, 0.9).unwrap()).unwrap();
    let grid = EquidistantGrid::standard(1.5, 32, 32, 8);
    let sino = forward_equidistant(&p, &grid).unwrap();
    for mode in angular_modes(&sino, 2).unwrap().iter().filter(|m| m.n.abs() == 2) {
        let state = mode_to_u(mode, &grid.lambdas, &grid.s, &coarse_opts()).unwrap();
        let op = state.u_operator();
        for (j, l) in [(0, 0), (50, 100), (200, 17)] {
            let a = op.kernel(j, l);
            let b = cached_kernel(mode.n, &state.zeta, &state.xi, j, l);
            assert!((a - b).norm() <= 1e-14 * a.norm());
        }
    }
}

#[test]
fn recovery_is_linear() {
    let grid = EquidistantGrid::standard(1.5, 48, 48, 4);
    let p1 = equidistant_phantom(0, Bump::new(1.0, 0.5).unwrap(), Bump::new(1.0, 0.9).unwrap()).unwrap();
    let p2 = equidistant_phantom(0, Bump::new(0.8, 0.3).unwrap(), Bump::new(1.2, 0.5).unwrap()).unwrap();
    let m1 = angular_modes(&forward_equidistant(&p1, &grid).unwrap(), 0).unwrap().remove(0);
    let m2 = angular_modes(&forward_equidistant(&p2, &grid).unwrap(), 0).unwrap().remove(0);
    let (a, b) = (0.7, -1.3);
    let mix = AngularMode {
        n: 0,
        values: m1.values.iter().zip(&m2.values).map(|(x, y)| x * a + y * b).collect(),
    };
    let opts = EquidistantInvertOptions { window: Window::None, delta: 1e-3, ..coarse_opts() };
    let fg = FieldGrid { r: vec![0.6, 1.0, 1.3], tau: vec![0.5, 1.0, 1.5] };
    let rec = |m: &AngularMode| recover_mode(&mode_to_u(m, &grid.lambdas, &grid.s, &opts).unwrap(), &fg).unwrap().f;
    let (f1, f2, f) = (rec(&m1), rec(&m2), rec(&mix));
    // The contour sums cancel heavily; agreement is to roundoff on the field scale.
    let scale = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for ((x, y), z) in f1.iter().zip(&f2).zip(&f) {
        assert!((x * a + y * b - z).norm() < 1e-8 * scale, "{} vs {z} (scale {scale:.2e})", x * a + y * b);
    }
}
