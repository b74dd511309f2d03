mod common;

use std::f64::consts::PI;

use nalgebra::Matrix3;
use num_complex::Complex64;
use proptest::prelude::*;
use rrt_core::rotations::*;

fn rot() -> impl Strategy<Value = EulerRotation> {
    (0.0..2.0 * PI, -1.0f64..1.0, 0.0..2.0 * PI).prop_map(|(a, c, b)| EulerRotation::new(a, c.acos(), b))
}

#[test]
fn haar_grid_size_and_weights() {
    let q = haar_quadrature(4).unwrap();
    assert_eq!(q.len(), 500);
    assert_eq!(HaarQuadrature::size_for(4), 500);
    assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    assert!(haar_quadrature(0).is_err());
}

#[test]
fn identity_gives_identity_matrix() {
    for m in 0..=5 {
        let t = tau_matrix(m, &EulerRotation::IDENTITY);
        let mi = m as i64;
        for k in -mi..=mi {
            for p in -mi..=mi {
                let want = if k == p { 1.0 } else { 0.0 };
                assert!((t.get(k, p) - want).norm() < 1e-14);
            }
        }
    }
}

#[test]
fn small_d_reference_values() {
    // d^1_{0,0} = cos β, d^1_{1,1} = (1 + cos β)/2, d^1_{1,0} = -sin β/√2.
    let b = 0.7f64;
    assert!((wigner_small_d(1, 0, 0, b) - b.cos()).abs() < 1e-15);
    assert!((wigner_small_d(1, 1, 1, b) - 0.5 * (1.0 + b.cos())).abs() < 1e-15);
    assert!((wigner_small_d(1, 1, 0, b) + b.sin() / 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(wigner_small_d(2, 3, 0, b), 0.0);
}

#[test]
fn projection_of_zero_sinogram_is_zero() {
    let s = rrt_core::forward::forward_tangent(&rrt_core::phantoms::TangentPhantom::zero(), &[1.0, 2.0], 2).unwrap();
    assert!(project_sinogram(&s, 2, 1, -1).unwrap().iter().all(|v| v.norm() == 0.0));
    assert!(project_sinogram(&s, 3, 0, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn small_d_matches_wigner_sum(j in 0i64..9, a in 0i64..17, b in 0i64..17, beta in 0.0..PI) {
        let (mp, m) = (a % (2 * j + 1) - j, b % (2 * j + 1) - j);
        prop_assert!((wigner_small_d(j as usize, mp, m, beta) - common::wigner_d(j, mp, m, beta)).abs() < 1e-12);
    }

    #[test]
    fn anti_homomorphism(a in rot(), b in rot(), m in 0usize..6) {
        let ab = a.compose(&b);
        let (ta, tb, tab) = (tau_matrix(m, &a), tau_matrix(m, &b), tau_matrix(m, &ab));
        prop_assert!((&tab.entries - &tb.entries * &ta.entries).norm() < 1e-11);
    }

    #[test]
    fn unitary(a in rot(), m in 0usize..7) {
        let t = tau_matrix(m, &a).entries;
        let g = t.adjoint() * &t;
        prop_assert!((g - nalgebra::DMatrix::<Complex64>::identity(2 * m + 1, 2 * m + 1)).norm() < 1e-12);
    }

    #[test]
    fn rotated_harmonic_expansion(a in rot(), m in 0usize..6, z in -1.0f64..1.0, p in -PI..PI) {
        let s = (1.0 - z * z).sqrt();
        let w = [s * p.cos(), s * p.sin(), z];
        let aw = a.apply_inverse(w);
        let mi = m as i64;
        for k in -mi..=mi {
            let rhs: Complex64 = (-mi..=mi).map(|q| tau_entry(m, k, q, &a) * common::ylm(m, q, w)).sum();
            prop_assert!((common::ylm(m, k, aw) - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn euler_angles_round_trip(a in rot()) {
        let r: Matrix3<f64> = a.matrix();
        prop_assert!((EulerRotation::from_matrix(&r).matrix() - r).norm() < 1e-12);
        prop_assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-14);
        let x = [0.3, -0.4, 0.5];
        let y = a.apply_inverse(a.apply(x));
        prop_assert!((0..3).all(|i| (x[i] - y[i]).abs() < 1e-14));
    }
}
