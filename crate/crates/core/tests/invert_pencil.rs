mod common;

use num_complex::Complex64;
use proptest::prelude::*;
use rrt_core::error::Error;
use rrt_core::forward::pencil_value;
use rrt_core::geometry::*;
use rrt_core::invert_pencil::*;
use rrt_core::phantoms::{BallBump, PencilPhantom};

fn anchors() -> AnchorSet {
    AnchorSet::from_rows(&[vec![0.3, -0.2, 2.5], vec![-0.1, 0.4, 3.0]]).unwrap()
}

fn bump(center: Vec<f64>, radius: f64) -> PencilPhantom {
    PencilPhantom::new(3, vec![BallBump { center, radius, amplitude: 1.0, power: 8 }]).unwrap()
}

fn plane_data(anchors: &AnchorSet, ph: &PencilPhantom, z0: &[f64], n: usize) -> PlaneRadonData {
    let cover = covering_plane_for(&Vector::from_vec(z0.to_vec()), anchors).unwrap();
    let a = canonical_rotation(anchors, &cover.omega_vectors()).unwrap();
    let u0: Vec<f64> = (&a * anchors.last()).iter().skip(2).copied().collect();
    let r_max = plane_r_max(ph.support_radius(), &u0).unwrap();
    let oracle = |x: &Vector| pencil_value(ph, anchors, x, 32);
    gather_plane_data(anchors, &cover, oracle, ParallelBeam { n_theta: n, n_s: n, r_max }).unwrap()
}

#[test]
fn zero_phantom_gives_zero_samples_and_field() {
    let ph = PencilPhantom::zero(3);
    let a = anchors();
    let data = gather_plane_data(
        &a,
        &covering_plane_for(&Vector::from_vec(vec![0.1, 0.0, 0.05]), &a).unwrap(),
        |x: &Vector| pencil_value(&ph, &a, x, 16),
        ParallelBeam { n_theta: 16, n_s: 16, r_max: 1.0 },
    )
    .unwrap();
    assert!(data.values.iter().all(|v| *v == 0.0));
    let img = invert_plane(&data, 16).unwrap();
    assert!(img.values.iter().all(|v| *v == 0.0));
    let targets = cube_targets(4, 1.0);
    let vol = assemble_volume(&a, |x: &Vector| pencil_value(&ph, &a, x, 16), 1.0, &targets, 16, 16).unwrap();
    assert!(vol.values.iter().all(|v| *v == 0.0));
}

#[test]
fn samples_are_line_integrals_in_the_plane() {
    let a = anchors();
    let ph = bump(vec![0.2, -0.1, 0.1], 0.8);
    let data = plane_data(&a, &ph, &[0.1, 0.0, 0.05], 12);
    let beam = data.beam;
    let mut checked = 0;
    for j in 0..beam.n_theta {
        for i in 0..beam.n_s {
            let (st, ct) = beam.theta(j).sin_cos();
            let s = beam.s(i);
            let line = |t: f64| {
                let x = data.point(&[s * ct - t * st, s * st + t * ct]);
                Complex64::new(common::ball_bump(x.as_slice(), &[0.2, -0.1, 0.1], 0.8, 1.0, 8), 0.0)
            };
            let want = common::simpson(line, -3.0, 3.0, 6000).re;
            let got = data.values[j * beam.n_s + i];
            if s.abs() < 1e-3 {
                continue;
            }
            assert!((got - want).abs() < 1e-9, "({j}, {i}): {got} vs {want}");
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn origin_sample_is_perturbed() {
    let a = anchors();
    let ph = bump(vec![0.2, -0.1, 0.1], 0.8);
    // Odd n_s puts s = 0 on the grid, once per angle.
    let cover = covering_plane_for(&Vector::from_vec(vec![0.1, 0.0, 0.05]), &a).unwrap();
    let beam = ParallelBeam { n_theta: 8, n_s: 9, r_max: 1.0 };
    let data = gather_plane_data(&a, &cover, |x: &Vector| pencil_value(&ph, &a, x, 16), beam).unwrap();
    assert!(data.perturbed >= 8, "{}", data.perturbed);
    let m = canonical_rotation(&a, &cover.omega_vectors()).unwrap();
    let (x0, moved) = pencil_point(&a, &m, &data.u0, 0.0, &Vector::from_vec(vec![1.0, 0.0]));
    assert!(moved);
    assert_eq!(exceptional_set_test(&x0, &a), Classification::Ok);
}

#[test]
fn higher_pencils_are_unsupported() {
    let a = AnchorSet::from_rows(&[vec![0.0, 0.0, 0.0, 2.0], vec![0.0, 0.0, 2.0, 0.0], vec![0.0, 2.0, 0.0, 0.0]]).unwrap();
    assert_eq!(a.k(), 2);
    let ph = PencilPhantom::zero(4);
    let cover = covering_plane_for(&Vector::from_vec(vec![0.1, 0.1, 0.1, 0.1]), &a);
    if let Ok(cover) = cover {
        let r = gather_plane_data(&a, &cover, |x: &Vector| pencil_value(&ph, &a, x, 8), ParallelBeam { n_theta: 4, n_s: 4, r_max: 1.0 });
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }
    let r = plan_volume(&a, 1.0, &[Vector::zeros(4)], 4, 4);
    assert!(matches!(r, Err(Error::Unsupported(_))));
}

#[test]
fn beam_grid_is_validated() {
    let a = anchors();
    let cover = covering_plane_for(&Vector::from_vec(vec![0.1, 0.0, 0.05]), &a).unwrap();
    let r = gather_plane_data(&a, &cover, |_: &Vector| Ok(0.0), ParallelBeam { n_theta: 1, n_s: 16, r_max: 1.0 });
    assert!(matches!(r, Err(Error::Validation(_))));
    assert_eq!(plane_r_max(1.0, &[2.0]), None);
    assert!((plane_r_max(1.0, &[0.6]).unwrap() - 0.88).abs() < 1e-12);
}

#[test]
fn centred_bump_is_recovered_on_its_plane() {
    let a = anchors();
    let c = [0.2, -0.1, 0.1];
    let ph = bump(c.to_vec(), 0.8);
    let data = plane_data(&a, &ph, &c, 256);
    let img = invert_plane(&data, 256).unwrap();
    let truth: Vec<f64> = (0..256 * 256)
        .map(|i| {
            let x = data.point(&[img.coordinate(i % 256), img.coordinate(i / 256)]);
            common::ball_bump(x.as_slice(), &c, 0.8, 1.0, 8)
        })
        .collect();
    let err = common::rel_l2(&img.values, &truth);
    assert!(err < 0.05, "{err}");
}

#[test]
fn shifted_bump_peak_lands_within_one_cell() {
    let a = anchors();
    let c = [-0.5, 0.4, 0.3];
    let ph = bump(c.to_vec(), 0.4);
    let data = plane_data(&a, &ph, &c, 128);
    let img = invert_plane(&data, 128).unwrap();
    let (best, _) = img.values.iter().enumerate().fold((0, f64::MIN), |m, (i, v)| if *v > m.1 { (i, *v) } else { m });
    let u = data.intrinsic(&Vector::from_vec(c.to_vec()));
    let cell = 2.0 * img.extent / (img.size - 1) as f64;
    let (x, y) = (img.coordinate(best % 128), img.coordinate(best / 128));
    assert!((x - u[0]).abs() <= cell && (y - u[1]).abs() <= cell, "peak ({x}, {y}) vs ({}, {})", u[0], u[1]);
}

#[test]
fn anchor_target_is_recovered() {
    let a = anchors();
    let c = [-0.1, 0.4, 2.8];
    let ph = bump(c.to_vec(), 0.6);
    let x2 = a.last().clone();
    let truth = common::ball_bump(x2.as_slice(), &c, 0.6, 1.0, 8);
    let vol = assemble_volume(&a, |x: &Vector| pencil_value(&ph, &a, x, 32), ph.support_radius(), &[x2], 128, 128).unwrap();
    assert!((vol.values[0] - truth).abs() < 0.05 * truth, "{} vs {truth}", vol.values[0]);
}

#[test]
fn reconstruction_is_frame_independent() {
    let a = anchors();
    let flipped = a.with_frame(a.y.iter().map(|y| -y).collect()).unwrap();
    let ph = bump(vec![0.2, -0.1, 0.1], 0.8);
    let targets = vec![
        Vector::from_vec(vec![0.2, -0.1, 0.1]),
        Vector::from_vec(vec![0.0, 0.3, -0.2]),
        Vector::from_vec(vec![0.5, 0.1, 0.2]),
    ];
    let rs = ph.support_radius();
    let v1 = assemble_volume(&a, |x: &Vector| pencil_value(&ph, &a, x, 32), rs, &targets, 64, 64).unwrap();
    let v2 = assemble_volume(&flipped, |x: &Vector| pencil_value(&ph, &flipped, x, 32), rs, &targets, 64, 64).unwrap();
    for (p, q) in v1.values.iter().zip(&v2.values) {
        assert!((p - q).abs() < 1e-6, "{p} vs {q}");
    }
}

#[test]
fn volume_plan_groups_targets_by_plane() {
    let a = anchors();
    let targets = cube_targets(4, 1.0);
    let plan = plan_volume(&a, 1.5, &targets, 8, 8).unwrap();
    assert_eq!(plan.n_targets, 64);
    let served: usize = plan.planes.iter().map(|p| p.targets.len()).sum();
    assert_eq!(served, 64);
    for p in &plan.planes {
        let plane = &p.covering.plane;
        for &i in &p.targets {
            assert!(plane.distance(&targets[i]) < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_points_satisfy_containment(
        z in prop::array::uniform3(-1.0f64..1.0),
        theta in 0.0f64..std::f64::consts::PI,
        r in -1.0f64..1.0,
    ) {
        let a = anchors();
        let cover = covering_plane_for(&Vector::from_vec(z.to_vec()), &a).unwrap();
        let omega = cover.omega_vectors();
        let m = canonical_rotation(&a, &omega).unwrap();
        let u0: Vec<f64> = (&m * a.last()).iter().skip(2).copied().collect();
        let sign = if r < 0.0 { -1.0 } else { 1.0 };
        let sigma = Vector::from_vec(vec![sign * theta.cos(), sign * theta.sin()]);
        let (x0, _) = pencil_point(&a, &m, &u0, r.abs(), &sigma);
        let (c1, c2) = containment_conditions(&x0, &a, &omega);
        prop_assert!(c1 < 1e-9 && c2 < 1e-9, "{c1} {c2}");
        // x₀ is the point of Σ_{x₀} nearest the origin.
        let plane = sigma_plane(&x0, &a).unwrap();
        prop_assert!((plane.closest_point_to_origin() - &x0).norm() < 1e-9);
    }
}
