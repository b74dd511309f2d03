//! Rotations of R³ in zyz Euler angles, Haar quadrature on the rotation
//! group and the Wigner realization of the matrices τ^m.
//!
//! Convention: τ^m_{k,p}(A) = D^m_{p,k}(A) with
//! D^m_{p,k}(φ₁, ϑ, φ₂) = e^{-ipφ₁} d^m_{p,k}(ϑ) e^{-ikφ₂}, so that
//! Y_k^m(A⁻¹ω) = Σ_p τ^m_{k,p}(A) Y_p^m(ω). With this indexing the map
//! A ↦ τ^m(A) reverses products: τ^m(AB) = τ^m(B) τ^m(A).

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::forward::TangentSinogram;
use crate::quad::GaussLegendre;

/// Rotation given by zyz Euler angles: R = R_z(φ₁) R_y(ϑ) R_z(φ₂).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerRotation {
    pub phi1: f64,
    pub theta: f64,
    pub phi2: f64,
}

fn rz(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn ry(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

impl EulerRotation {
    pub const IDENTITY: EulerRotation = EulerRotation {
        phi1: 0.0,
        theta: 0.0,
        phi2: 0.0,
    };

    pub fn new(phi1: f64, theta: f64, phi2: f64) -> Self {
        Self { phi1, theta, phi2 }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        rz(self.phi1) * ry(self.theta) * rz(self.phi2)
    }

    /// Euler angles of a rotation matrix, with φ₂ = 0 on the gimbal-lock axis.
    pub fn from_matrix(r: &Matrix3<f64>) -> Self {
        let theta = r[(2, 2)].clamp(-1.0, 1.0).acos();
        let wrap = |a: f64| a.rem_euclid(2.0 * PI);
        if theta.sin().abs() < 1e-12 {
            let phi1 = if r[(2, 2)] > 0.0 {
                r[(1, 0)].atan2(r[(0, 0)])
            } else {
                (-r[(1, 0)]).atan2(-r[(0, 0)])
            };
            return Self::new(wrap(phi1), theta, 0.0);
        }
        let phi1 = r[(1, 2)].atan2(r[(0, 2)]);
        let phi2 = r[(2, 1)].atan2(-r[(2, 0)]);
        Self::new(wrap(phi1), theta, wrap(phi2))
    }

    /// A·B as Euler angles.
    pub fn compose(&self, other: &EulerRotation) -> EulerRotation {
        Self::from_matrix(&(self.matrix() * other.matrix()))
    }

    /// Haar-distributed random rotation.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let phi1 = rng.random::<f64>() * 2.0 * PI;
        let phi2 = rng.random::<f64>() * 2.0 * PI;
        let c: f64 = rng.random::<f64>() * 2.0 - 1.0;
        Self::new(phi1, c.acos(), phi2)
    }

    /// Applies R⁻¹ to x.
    pub fn apply_inverse(&self, x: [f64; 3]) -> [f64; 3] {
        let v = self.matrix().transpose() * Vector3::new(x[0], x[1], x[2]);
        [v[0], v[1], v[2]]
    }

    pub fn apply(&self, x: [f64; 3]) -> [f64; 3] {
        let v = self.matrix() * Vector3::new(x[0], x[1], x[2]);
        [v[0], v[1], v[2]]
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Jacobi polynomial P_n^{(a,b)}(x) by its three-term recurrence.
fn jacobi(n: usize, a: f64, b: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut p0 = 1.0;
    let mut p1 = 0.5 * (a - b + (a + b + 2.0) * x);
    for k in 2..=n {
        let k = k as f64;
        let c = 2.0 * k + a + b;
        let a1 = 2.0 * k * (k + a + b) * (c - 2.0);
        let a2 = (c - 1.0) * (a * a - b * b);
        let a3 = (c - 2.0) * (c - 1.0) * c;
        let a4 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * c;
        let p2 = ((a2 + a3 * x) * p1 - a4 * p0) / a1;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Wigner small-d element d^j_{m',m}(β) through the Jacobi-polynomial form.
pub fn wigner_small_d(j: usize, mp: i64, m: i64, beta: f64) -> f64 {
    let ji = j as i64;
    if mp.abs() > ji || m.abs() > ji {
        return 0.0;
    }
    let cands = [ji + m, ji - m, ji + mp, ji - mp];
    let kmin = *cands.iter().min().expect("four candidates");
    let (a, lam) = if kmin == ji + m {
        (mp - m, mp - m)
    } else if kmin == ji - m || kmin == ji + mp {
        (m - mp, 0)
    } else {
        (mp - m, mp - m)
    };
    let k = kmin as usize;
    let a_u = a as usize;
    let b = (2 * ji - 2 * kmin - a) as usize;
    let ratio = 0.5 * (ln_binomial(2 * j - k, k + a_u) - ln_binomial(k + b, b));
    let (s, c) = (0.5 * beta).sin_cos();
    let sign = if lam.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    sign * ratio.exp()
        * s.powi(a_u as i32)
        * c.powi(b as i32)
        * jacobi(k, a_u as f64, b as f64, beta.cos())
}

/// Representation matrix τ^m(A), rows indexed by k, columns by p (offset m).
#[derive(Debug, Clone)]
pub struct TauMatrix {
    pub m: usize,
    pub entries: DMatrix<Complex64>,
}

impl TauMatrix {
    /// τ^m_{k,p}(A).
    pub fn get(&self, k: i64, p: i64) -> Complex64 {
        let m = self.m as i64;
        self.entries[((k + m) as usize, (p + m) as usize)]
    }
}

pub fn tau_matrix(m: usize, a: &EulerRotation) -> TauMatrix {
    let n = 2 * m + 1;
    let mi = m as i64;
    let mut entries = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for k in -mi..=mi {
        for p in -mi..=mi {
            entries[((k + mi) as usize, (p + mi) as usize)] = tau_entry(m, k, p, a);
        }
    }
    TauMatrix { m, entries }
}

/// Single entry τ^m_{k,p}(A) = e^{-ipφ₁} d^m_{p,k}(ϑ) e^{-ikφ₂}.
#[inline]
pub fn tau_entry(m: usize, k: i64, p: i64, a: &EulerRotation) -> Complex64 {
    let d = wigner_small_d(m, p, k, a.theta);
    Complex64::from_polar(d, -(p as f64) * a.phi1 - (k as f64) * a.phi2)
}

/// Weighted node set on the rotation group; weights sum to 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HaarQuadrature {
    pub band_limit: usize,
    pub nodes: Vec<EulerRotation>,
    pub weights: Vec<f64>,
}

impl HaarQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of nodes for band limit L: (2L+2)²(L+1).
    pub fn size_for(l: usize) -> usize {
        (2 * l + 2) * (2 * l + 2) * (l + 1)
    }
}

/// Product grid: uniform φ₁ (2L+2) × Gauss–Legendre in cos ϑ (L+1) × uniform φ₂ (2L+2).
/// Node order is φ₁ outermost, then ϑ, then φ₂.
pub fn haar_quadrature(l: usize) -> Result<HaarQuadrature> {
    if l < 1 {
        return validation("haar_quadrature: band limit must be at least 1");
    }
    let np = 2 * l + 2;
    let gl = GaussLegendre::new(l + 1);
    let mut nodes = Vec::with_capacity(HaarQuadrature::size_for(l));
    let mut weights = Vec::with_capacity(nodes.capacity());
    let wphi = 1.0 / np as f64;
    for i1 in 0..np {
        let phi1 = 2.0 * PI * i1 as f64 / np as f64;
        for (x, wx) in gl.nodes.iter().zip(&gl.weights) {
            let theta = x.clamp(-1.0, 1.0).acos();
            for i2 in 0..np {
                let phi2 = 2.0 * PI * i2 as f64 / np as f64;
                nodes.push(EulerRotation::new(phi1, theta, phi2));
                weights.push(wphi * wphi * 0.5 * wx);
            }
        }
    }
    Ok(HaarQuadrature {
        band_limit: l,
        nodes,
        weights,
    })
}

/// G_{m,k,p}(λ) = ∫ G(A, λ) conj(τ^m_{k,p}(A)) dA on the sinogram's λ grid.
pub fn project_sinogram(g: &TangentSinogram, m: usize, k: i64, p: i64) -> Result<Vec<Complex64>> {
    if m > g.quadrature.band_limit {
        return validation(format!(
            "project_sinogram: degree {m} exceeds the sinogram band limit {}",
            g.quadrature.band_limit
        ));
    }
    if k.unsigned_abs() as usize > m || p.unsigned_abs() as usize > m {
        return validation(format!("project_sinogram: |k|, |p| must not exceed {m}"));
    }
    let nl = g.lambdas.len();
    let mut out = vec![Complex64::new(0.0, 0.0); nl];
    for (idx, (node, w)) in g.quadrature.nodes.iter().zip(&g.quadrature.weights).enumerate() {
        let t = tau_entry(m, k, p, node).conj() * *w;
        let row = &g.values[idx * nl..(idx + 1) * nl];
        for (o, v) in out.iter_mut().zip(row) {
            *o += t * *v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::spherical_harmonic;

    #[test]
    fn identity_gives_identity_matrix() {
        for m in 0..5 {
            let t = tau_matrix(m, &EulerRotation::IDENTITY);
            let id = DMatrix::<Complex64>::identity(2 * m + 1, 2 * m + 1);
            assert!((t.entries - id).norm() < 1e-14);
        }
    }

    #[test]
    fn z_rotation_is_diagonal_phase() {
        let g = 0.7;
        let t = tau_matrix(1, &EulerRotation::new(g, 0.0, 0.0));
        for k in -1..=1i64 {
            let expect = Complex64::from_polar(1.0, -(k as f64) * g);
            assert!((t.get(k, k) - expect).norm() < 1e-14);
        }
        assert!(t.get(1, 0).norm() < 1e-14);
    }

    #[test]
    fn transformation_law_holds() {
        let a = EulerRotation::new(0.4, 1.1, 2.3);
        let w = [0.36, 0.48, 0.8];
        let wi = a.apply_inverse(w);
        for m in 0..4 {
            let t = tau_matrix(m, &a);
            for k in -(m as i64)..=m as i64 {
                let lhs = spherical_harmonic(m, k, wi).unwrap();
                let rhs: Complex64 = (-(m as i64)..=m as i64)
                    .map(|p| t.get(k, p) * spherical_harmonic(m, p, w).unwrap())
                    .sum();
                assert!((lhs - rhs).norm() < 1e-12, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn euler_round_trip() {
        let a = EulerRotation::new(1.0, 2.0, 3.0);
        let b = EulerRotation::from_matrix(&a.matrix());
        assert!((a.matrix() - b.matrix()).norm() < 1e-13);
    }

    #[test]
    fn haar_weights_sum_to_one() {
        let q = haar_quadrature(4).unwrap();
        assert_eq!(q.len(), 500);
        assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(haar_quadrature(0).is_err());
    }
}
