mod common;

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rrt_core::forward::*;
use rrt_core::geometry::{sigma_plane, AnchorSet, ParamLine, Vector};
use rrt_core::phantoms::*;
use rrt_core::rotations::EulerRotation;

fn ln_gamma(x: f64) -> f64 {
    common::ln_gamma(Complex64::new(x, 0.0)).re
}

/// ∫ over a k-plane at distance d from the centre of a (1 - ρ²/w²)^p ball bump.
fn ball_plane_integral(w: f64, d: f64, p: i32, k: usize) -> f64 {
    if d >= w {
        return 0.0;
    }
    let kh = k as f64 / 2.0;
    (w * w - d * d).powf(p as f64 + kh) / w.powi(2 * p) * PI.powf(kh) * (ln_gamma(p as f64 + 1.0) - ln_gamma(p as f64 + 1.0 + kh)).exp()
}

/// Simpson integral of the phantom along one ruling of the cone with apex λe₃.
fn ruling_oracle(f: &dyn Fn([f64; 3]) -> Complex64, rot: &EulerRotation, lambda: f64, phi: f64) -> Complex64 {
    let line = ParamLine::tangent_ruling(lambda, phi).unwrap();
    let t0 = line.closest_parameter();
    common::simpson(|t| f(rot.apply_inverse(line.at(t))), t0 - 3.0, t0 + 3.0, 6000)
}

fn compact_f(m: usize, k: i64) -> impl Fn([f64; 3]) -> Complex64 {
    move |x| {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let b = common::bump(r, 2.0, 0.8, 8);
        if b == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        common::ylm(m, k, [x[0] / r, x[1] / r, x[2] / r]) * b
    }
}

#[test]
fn radial_mode_is_constant_in_rotation_and_lambda() {
    // m = 0: every ruling is tangent to the unit sphere, so each carries ∫ f(√(1+s²)) ds.
    let p = tangent_phantom_compact(0, 0, 1.0, Bump::new(2.0, 0.8).unwrap()).unwrap();
    let s_max = (2.8f64 * 2.8 - 1.0).sqrt();
    let line = common::simpson(|s| Complex64::new(common::bump((1.0 + s * s).sqrt(), 2.0, 0.8, 8), 0.0), -s_max, s_max, 20_000).re;
    let want = 2.0 * PI * line * 0.5 / PI.sqrt();
    let sino = forward_tangent(&p, &[1.0, 1.3, 2.0, 5.0], 2).unwrap();
    for v in &sino.values {
        assert!((v - want).norm() < 1e-9 * want, "{v} {want}");
    }
}

#[test]
fn tangent_value_matches_direct_ruling_integrals() {
    let (m, k) = (2usize, 1i64);
    let p = tangent_phantom_compact(m, k, 1.0, Bump::new(2.0, 0.8).unwrap()).unwrap();
    let f = compact_f(m, k);
    let rot = EulerRotation::new(0.4, 1.1, -0.7);
    for lambda in [1.0, 1.7, 3.5] {
        let nphi = 6;
        let mut want = Complex64::new(0.0, 0.0);
        for j in 0..nphi {
            want += ruling_oracle(&f, &rot, lambda, -PI + 2.0 * PI * j as f64 / nphi as f64);
        }
        want *= 2.0 * PI / nphi as f64;
        let got = tangent_value(&p, &rot, lambda, nphi, LineQuadrature::default()).unwrap();
        assert!((got - want).norm() < 1e-8 * (1.0 + want.norm()), "λ {lambda}: {got} {want}");
    }
}

#[test]
fn tangent_grid_and_errors() {
    let l = tangent_lambda_grid(64);
    assert_eq!(l.len(), 64);
    assert_eq!(l[0], 1.0);
    assert!(l.windows(2).all(|w| w[1] > w[0]));
    assert!(((1.0 / l[63]).acos() - 0.5 * PI * (63.0 / 64.0)).abs() < 1e-12);
    let p = TangentPhantom::zero();
    assert!(forward_tangent(&p, &[0.5, 2.0], 2).is_err());
    assert!(forward_tangent(&p, &[2.0, 1.5], 2).is_err());
    assert_eq!(forward_tangent(&p, &[1.0, 2.0], 2).unwrap().max_abs(), 0.0);
}

#[test]
fn equidistant_null_phantom_is_silent() {
    let null = equidistant_null_phantom(Bump::new(1.0, 0.5).unwrap(), Bump::new(0.0, 0.8).unwrap());
    let grid = EquidistantGrid::standard(1.5, 24, 16, 8);
    assert!(forward_equidistant(&null, &grid).unwrap().max_abs() < 1e-9);
    for (l, t, p) in [(0.3, 0.4, 0.1), (1.2, 1.3, -2.0), (0.01, 0.01, 3.0)] {
        assert!(equidistant_value_direct(&null, l, t, p, LineQuadrature::default()).unwrap().norm() < 1e-9);
    }
}

#[test]
fn equidistant_matches_simpson_line_integrals() {
    let p = equidistant_phantom_real(2, Bump::new(1.0, 0.5).unwrap(), Bump::new(1.0, 0.9).unwrap()).unwrap();
    for (l, t, ph) in [(0.3, 0.4, 0.1), (0.9, 1.0, -2.0), (1.3, 0.2, 2.5), (0.05, 1.5, 0.7)] {
        let line = ParamLine::equidistant(l, t, ph);
        let want = common::simpson(|s| p.eval(line.at(s)), -30.0, 30.0, 120_000);
        let got = equidistant_value(&p, l, t, ph, LineQuadrature::default());
        let direct = equidistant_value_direct(&p, l, t, ph, LineQuadrature::default()).unwrap();
        assert!((got - want).norm() < 1e-8 * (1.0 + want.norm()), "{got} {want}");
        assert!((got - direct).norm() < 1e-12 * (1.0 + want.norm()));
    }
}

#[test]
fn pencil_values_match_closed_form() {
    let anchors = AnchorSet::from_rows(&[vec![0.3, -0.2, 2.5], vec![-0.1, 0.4, 3.0]]).unwrap();
    let c = [0.2, -0.1, 0.1];
    let ph = PencilPhantom::new(3, vec![BallBump { center: c.to_vec(), radius: 0.8, amplitude: 1.3, power: 8 }]).unwrap();
    for x in [[0.3, 0.2, 0.1], [-0.2, 0.1, 0.4], [0.5, -0.5, 0.2]] {
        let x0 = Vector::from_vec(x.to_vec());
        let plane = sigma_plane(&x0, &anchors).unwrap();
        let d = plane.distance(&Vector::from_vec(c.to_vec()));
        let want = 1.3 * ball_plane_integral(0.8, d, 8, 1);
        assert!((pencil_value(&ph, &anchors, &x0, 32).unwrap() - want).abs() < 1e-12 * (1.0 + want));
    }
    assert!(pencil_value(&ph, &anchors, &Vector::zeros(3), 32).is_err());
    let wrong = PencilPhantom::zero(4);
    assert!(forward_pencil(&wrong, &anchors, &[]).is_err());
}

#[test]
fn plane_integral_closed_form_in_higher_dimensions() {
    let anchors = AnchorSet::from_rows(&[vec![0.3, -0.2, 2.5, 0.4, 0.1], vec![-0.1, 0.4, 3.0, 0.2, -0.3], vec![0.5, 0.5, 2.0, -0.6, 0.2]]).unwrap();
    let c = vec![0.1, 0.0, -0.1, 0.2, 0.0];
    let ph = PencilPhantom::new(5, vec![BallBump { center: c.clone(), radius: 0.9, amplitude: 1.0, power: 6 }]).unwrap();
    let x0 = Vector::from_vec(vec![0.2, 0.1, 0.0, 0.3, -0.1]);
    let plane = sigma_plane(&x0, &anchors).unwrap();
    assert_eq!(plane.dim(), 2);
    let d = plane.distance(&Vector::from_vec(c));
    let want = ball_plane_integral(0.9, d, 6, 2);
    assert!((plane_integral(&ph, &plane, 32) - want).abs() < 1e-12 * (1.0 + want));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tangent_forward_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, m in 0usize..3) {
        let p = tangent_phantom_compact(m, 0, 1.0, Bump::new(2.0, 0.8).unwrap()).unwrap();
        let q = tangent_phantom_recoverable(1, 1, &[(1, 0.5), (-1, 0.5)]).unwrap();
        let mut modes = p.modes.clone();
        modes.iter_mut().for_each(|md| md.profile = match md.profile.clone() {
            RadialProfile::Bump { amplitude, bump } => RadialProfile::Bump { amplitude: amplitude * a, bump },
            other => other,
        });
        let scaled_q = tangent_phantom_recoverable(1, 1, &[(1, 0.5 * b), (-1, 0.5 * b)]).unwrap();
        modes.extend(scaled_q.modes);
        let combo = TangentPhantom::new(modes).rebuild().unwrap();
        let lam = [1.0, 1.4, 2.2];
        let lhs = forward_tangent(&combo, &lam, 2).unwrap();
        let rhs = forward_tangent(&p, &lam, 2).unwrap().scaled(a).add(&forward_tangent(&q, &lam, 2).unwrap().scaled(b)).unwrap();
        let err = lhs.values.iter().zip(&rhs.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12 * (1.0 + rhs.max_abs()), "{err:e}");
    }

    #[test]
    fn equidistant_forward_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let r = Bump::new(1.0, 0.5).unwrap();
        let p = equidistant_phantom(0, r, Bump::new(1.0, 0.9).unwrap()).unwrap();
        let q = equidistant_phantom(1, Bump::new(0.8, 0.4).unwrap(), Bump::new(1.5, 0.6).unwrap()).unwrap();
        let mut combo = EquidistantPhantom { modes: vec![p.modes[0], q.modes[0]] };
        combo.modes[0].amplitude *= a;
        combo.modes[1].amplitude *= b;
        let grid = EquidistantGrid::standard(1.5, 12, 10, 4);
        let (l, x, y) = (forward_equidistant(&combo, &grid).unwrap(), forward_equidistant(&p, &grid).unwrap(), forward_equidistant(&q, &grid).unwrap());
        for i in 0..l.values.len() {
            prop_assert!((l.values[i] - x.values[i] * a - y.values[i] * b).norm() < 1e-12);
        }
    }
}
