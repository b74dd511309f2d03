//! Invariant suites run by `rrt selftest`. Each check reports a measured
//! residual against a fixed threshold.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{forward_equidistant, forward_tangent, EquidistantGrid};
use crate::geometry::{
    containment_conditions, covering_plane_for, projected_hyperplane, sigma_plane, AnchorSet, Vector,
};
use crate::mellin::{kernel_integral, kernel_integral_closed, scaling_check};
use crate::phantoms::{equidistant_null_phantom, Bump, TangentPhantom};
use crate::quad::GaussLegendre;
use crate::rotations::{haar_quadrature, tau_entry, tau_matrix, EulerRotation};
use crate::specfun::{beta, gegenbauer_fourier_coeffs, legendre, ln_gamma, spherical_harmonic};

pub const SUITES: &[&str] = &[
    "specfun",
    "rotations",
    "funk-hecke",
    "mellin",
    "geometry",
    "forward",
    "all",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

struct Collector {
    suite: &'static str,
    checks: Vec<Check>,
}

impl Collector {
    fn new(suite: &'static str) -> Self {
        Self {
            suite,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, name: impl Into<String>, residual: f64, threshold: f64) {
        self.checks.push(Check {
            suite: self.suite.to_string(),
            name: name.into(),
            residual,
            threshold,
            pass: residual.is_finite() && residual < threshold,
        });
    }
}

/// Runs the named suite; `all` runs every suite in order.
pub fn run_suite(name: &str, seed: u64) -> Result<Report> {
    let mut checks = Vec::new();
    let names: Vec<&str> = match name {
        "all" => SUITES[..SUITES.len() - 1].to_vec(),
        s if SUITES.contains(&s) => vec![s],
        _ => {
            return Err(Error::Validation(format!(
                "unknown suite `{name}`; available: {}",
                SUITES.join(", ")
            )))
        }
    };
    for s in names {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = match s {
            "specfun" => specfun_suite()?,
            "rotations" => rotations_suite(&mut rng)?,
            "funk-hecke" => funk_hecke_suite(&mut rng),
            "mellin" => mellin_suite()?,
            "geometry" => geometry_suite(&mut rng)?,
            "forward" => forward_suite()?,
            _ => unreachable!(),
        };
        checks.extend(c.checks);
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(Report {
        schema: 1,
        suite: name.to_string(),
        seed,
        checks,
        pass,
    })
}

fn random_unit<R: Rng>(rng: &mut R) -> [f64; 3] {
    let z: f64 = rng.random_range(-1.0..1.0);
    let p: f64 = rng.random_range(-PI..PI);
    let s = (1.0 - z * z).sqrt();
    [s * p.cos(), s * p.sin(), z]
}

fn specfun_suite() -> Result<Collector> {
    let mut c = Collector::new("specfun");
    // Bonnet recurrence against the explicit P₃, P₄.
    let mut err: f64 = 0.0;
    for i in 0..=40 {
        let x = -1.0 + i as f64 / 20.0;
        err = err.max((legendre(3, x)? - 0.5 * (5.0 * x * x * x - 3.0 * x)).abs());
        err = err.max((legendre(4, x)? - (35.0 * x.powi(4) - 30.0 * x * x + 3.0) / 8.0).abs());
    }
    c.check("legendre explicit P3, P4", err, 1e-13);
    // Orthonormality of Y_k^m for m ≤ 4 on a Gauss × trapezoid grid.
    let gl = GaussLegendre::new(12);
    let nphi = 16;
    let mut err: f64 = 0.0;
    let modes: Vec<(usize, i64)> = (0..=4usize)
        .flat_map(|m| (-(m as i64)..=m as i64).map(move |k| (m, k)))
        .collect();
    for &(m, k) in &modes {
        for &(m2, k2) in &modes {
            let mut acc = Complex64::new(0.0, 0.0);
            for (z, w) in gl.nodes.iter().zip(&gl.weights) {
                let s = (1.0 - z * z).sqrt();
                for j in 0..nphi {
                    let p = 2.0 * PI * j as f64 / nphi as f64;
                    let x = [s * p.cos(), s * p.sin(), *z];
                    acc += spherical_harmonic(m, k, x)? * spherical_harmonic(m2, k2, x)?.conj() * *w * (2.0 * PI / nphi as f64);
                }
            }
            let want = if (m, k) == (m2, k2) { 1.0 } else { 0.0 };
            err = err.max((acc - want).norm());
        }
    }
    c.check("spherical harmonic orthonormality m<=4", err, 1e-12);
    // Unsöld: Σ_k |Y_k^m|² = (2m+1)/4π.
    let mut err: f64 = 0.0;
    for m in 0..=8usize {
        for x in [[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [0.36, -0.48, 0.8]] {
            let s: f64 = (-(m as i64)..=m as i64)
                .map(|k| spherical_harmonic(m, k, x).map(|y| y.norm_sqr()))
                .sum::<Result<f64>>()?;
            err = err.max((s - (2 * m + 1) as f64 / (4.0 * PI)).abs());
        }
    }
    c.check("addition theorem m<=8", err, 1e-12);
    // Fourier coefficients of P_m(cos β) against direct quadrature.
    let mut err: f64 = 0.0;
    for m in 0..=6usize {
        let fs = gegenbauer_fourier_coeffs(m, 64)?;
        for n in -(m as i64 + 2)..=(m as i64 + 2) {
            let mut acc = Complex64::new(0.0, 0.0);
            let nn = 512;
            for j in 0..nn {
                let b = -PI + 2.0 * PI * j as f64 / nn as f64;
                acc += legendre(m, b.cos())? * Complex64::from_polar(1.0, -(n as f64) * b);
            }
            acc /= nn as f64;
            err = err.max((fs.get(n) - acc).norm());
        }
    }
    c.check("Legendre Fourier coefficients m<=6", err, 1e-13);
    let lg = (ln_gamma(Complex64::new(0.5, 0.0)).re - PI.sqrt().ln()).abs()
        + (ln_gamma(Complex64::new(6.0, 0.0)).re - 120f64.ln()).abs();
    c.check("lnGamma reference values", lg, 1e-13);
    let b = (beta(Complex64::new(2.0, 0.0), Complex64::new(3.0, 0.0)) - 1.0 / 12.0).norm();
    c.check("Beta(2, 3) = 1/12", b, 1e-14);
    Ok(c)
}

fn rotations_suite<R: Rng>(rng: &mut R) -> Result<Collector> {
    let mut c = Collector::new("rotations");
    let l = 4;
    let q = haar_quadrature(l)?;
    let mut err: f64 = 0.0;
    let taus: Vec<Vec<_>> = (0..=l).map(|m| q.nodes.iter().map(|a| tau_matrix(m, a)).collect()).collect();
    for m in 0..=l {
        for m2 in 0..=l {
            let mi = m as i64;
            let m2i = m2 as i64;
            for k in -mi..=mi {
                for p in -mi..=mi {
                    for k2 in -m2i..=m2i {
                        for p2 in -m2i..=m2i {
                            let mut acc = Complex64::new(0.0, 0.0);
                            for (i, w) in q.weights.iter().enumerate() {
                                acc += taus[m][i].get(k, p) * taus[m2][i].get(k2, p2).conj() * *w;
                            }
                            let want = if m == m2 && k == k2 && p == p2 { 1.0 / (2 * m + 1) as f64 } else { 0.0 };
                            err = err.max((acc - want).norm());
                        }
                    }
                }
            }
        }
    }
    c.check("tau orthogonality m<=4", err, 1e-8);
    let mut hom: f64 = 0.0;
    let mut uni: f64 = 0.0;
    for _ in 0..20 {
        let a = EulerRotation::random(rng);
        let b = EulerRotation::random(rng);
        let ab = a.compose(&b);
        for m in 0..=4usize {
            let mi = m as i64;
            let ta = tau_matrix(m, &a);
            let tb = tau_matrix(m, &b);
            for k in -mi..=mi {
                for p in -mi..=mi {
                    let prod: Complex64 = (-mi..=mi).map(|j| tb.get(k, j) * ta.get(j, p)).sum();
                    hom = hom.max((tau_entry(m, k, p, &ab) - prod).norm());
                    let gram: Complex64 = (-mi..=mi).map(|j| ta.get(j, k).conj() * ta.get(j, p)).sum();
                    uni = uni.max((gram - if k == p { 1.0 } else { 0.0 }).norm());
                }
            }
        }
    }
    c.check("tau(AB) = tau(B) tau(A)", hom, 1e-12);
    c.check("tau unitarity", uni, 1e-12);
    // Rotated harmonic expands in the unrotated basis through τ.
    let mut err: f64 = 0.0;
    for _ in 0..20 {
        let a = EulerRotation::random(rng);
        let w = random_unit(rng);
        let aw = a.apply_inverse(w);
        for m in 0..=4usize {
            let mi = m as i64;
            for k in -mi..=mi {
                let lhs = spherical_harmonic(m, k, aw)?;
                let rhs: Complex64 = (-mi..=mi)
                    .map(|p| spherical_harmonic(m, p, w).map(|y| tau_entry(m, k, p, &a) * y))
                    .sum::<Result<Complex64>>()?;
                err = err.max((lhs - rhs).norm());
            }
        }
    }
    c.check("Y(A^-1 w) = sum_p tau_kp(A) Y_p(w)", err, 1e-12);
    Ok(c)
}

fn funk_hecke_suite<R: Rng>(rng: &mut R) -> Collector {
    let mut c = Collector::new("funk-hecke");
    for m in 0..=6usize {
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let psi = random_unit(rng);
            let alpha = rng.random_range(0.0..PI);
            let k = rng.random_range(-(m as i64)..=m as i64);
            worst = worst.max(crate::invert_tangent::funk_hecke_residual(m, k, psi, alpha, 2048));
        }
        c.check(format!("circle average m={m}"), worst, 1e-8);
    }
    c
}

fn mellin_suite() -> Result<Collector> {
    let mut c = Collector::new("mellin");
    let mut err: f64 = 0.0;
    for i in 0..5 {
        for j in 0..5 {
            let zeta = Complex64::new(1.5 + 0.5 * i as f64, -4.0 + 2.0 * j as f64);
            let xi = Complex64::new(0.2 + 0.15 * j as f64, 3.0 - 1.5 * i as f64);
            let want = 0.5 * beta((1.0 - xi) * 0.5, (zeta + xi - 1.0) * 0.5);
            err = err.max((kernel_integral(0, zeta, xi)? - want).norm() / want.norm());
        }
    }
    c.check("I_0 against Beta closed form", err, 1e-7);
    let mut err: f64 = 0.0;
    for n in [-2i64, -1, 1, 2, 3] {
        let zeta = Complex64::new(crate::mellin::n_prime(n) as f64 + 1.0, 1.3);
        let xi = Complex64::new(0.5, -0.7);
        let g = kernel_integral(n, zeta, xi)?;
        err = err.max((g - kernel_integral_closed(n, zeta, xi)?).norm() / g.norm());
    }
    c.check("I_n quadrature against closed form", err, 1e-7);
    let bump = Bump::new(1.0, 0.6)?;
    let rep = scaling_check(|y| bump.eval(y), bump.hi(), 1.7, Complex64::new(0.8, 2.5))?;
    c.check("Mellin scaling law", rep.rel_error, 1e-6);
    Ok(c)
}

fn random_anchors<R: Rng>(rng: &mut R, n: usize, k: usize) -> Result<AnchorSet> {
    let pts: Vec<Vector> = (0..=k)
        .map(|_| Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0)))
        .collect();
    AnchorSet::new(pts)
}

fn geometry_suite<R: Rng>(rng: &mut R) -> Result<Collector> {
    let mut c = Collector::new("geometry");
    for (n, k) in [(3usize, 1usize), (4, 1), (4, 2), (5, 2)] {
        let anchors = random_anchors(rng, n, k)?;
        let mut closest: f64 = 0.0;
        let mut cover: f64 = 0.0;
        let mut contain: f64 = 0.0;
        let mut radon: f64 = 0.0;
        for _ in 0..200 {
            let x0 = Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let s = sigma_plane(&x0, &anchors)?;
            let foot = s.closest_point_to_origin();
            closest = closest.max((&foot - &x0).norm() / (1.0 + x0.norm()));
            let z0 = Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let cp = covering_plane_for(&z0, &anchors)?;
            let d = cp.plane.distance(&z0).max(anchors.points.iter().map(|p| cp.plane.distance(p)).fold(0.0, f64::max));
            cover = cover.max(d);
            // A pencil point inside the covering plane satisfies (i*), (ii*).
            let omega = cp.omega_vectors();
            let y = cp.plane.point(&(0..k + 1).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
            let (r1, r2) = containment_conditions(&y, &anchors, &omega);
            contain = contain.max(r1.max(r2));
            if let Ok((r, sigma)) = projected_hyperplane(&y, &anchors, &omega) {
                let sy = sigma_plane(&y, &anchors)?;
                // Every point of the projected Σ_y satisfies ⟨u, σ⟩ = r.
                let a = crate::geometry::canonical_rotation(&anchors, &omega)?;
                for f in &sy.frame {
                    let p = &y + f;
                    let u = &a * p;
                    let dotv: f64 = (0..k + 1).map(|i| u[i] * sigma[i]).sum();
                    radon = radon.max((dotv - r).abs() / (1.0 + r));
                }
            }
        }
        c.check(format!("({n},{k}) closest point of sigma plane is x0"), closest, 1e-9);
        c.check(format!("({n},{k}) covering plane contains target and anchors"), cover, 1e-9);
        c.check(format!("({n},{k}) conditions (i*), (ii*) on covering plane"), contain, 1e-9);
        c.check(format!("({n},{k}) projected sigma plane is {{<u, sigma> = r}}"), radon, 1e-9);
    }
    Ok(c)
}

fn forward_suite() -> Result<Collector> {
    let mut c = Collector::new("forward");
    let null = equidistant_null_phantom(Bump::new(1.0, 0.5)?, Bump::new(0.0, 0.8)?);
    let grid = EquidistantGrid::standard(1.5, 16, 12, 8);
    let s = forward_equidistant(&null, &grid)?;
    c.check("equidistant null phantom sinogram", s.max_abs(), 1e-9);
    let z = forward_tangent(&TangentPhantom::zero(), &[1.0, 1.5, 2.0], 2)?;
    c.check("tangent zero phantom sinogram", z.max_abs(), 1e-300);
    Ok(c)
}
