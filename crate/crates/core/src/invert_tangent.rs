//! Recovery of the radial profiles f_{m,k} from tangent-line data: projection onto
//! τ^m, the substitution λ = 1/cos α, parity extension and Fourier deconvolution
//! against P_m(cos α).
//!
//! Only the Fourier modes on which the kernel is nonzero can be recovered; the record
//! keeps the mask explicit and reports what lies outside it.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::forward::TangentSinogram;
use crate::interp::CubicSpline;
use crate::quad::GaussLegendre;
use crate::rotations::project_sinogram;
use crate::specfun::{fourier_coefficients, gegenbauer_fourier_coeffs, legendre_unchecked, periodic_grid, spherical_harmonic_unchecked};

/// Threshold on |c_{3,n}| defining the recoverable mask.
pub const MASK_EPS: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// c_m = (2m+1) P_m(1)/(2π).
pub fn c_m(m: usize) -> f64 {
    (2 * m + 1) as f64 / (2.0 * PI)
}

/// Index p with the largest |Y_p^m(e₃)|.
pub fn choose_p_prime(m: usize) -> Result<(i64, f64)> {
    let mut best = (0i64, 0.0f64);
    for p in -(m as i64)..=m as i64 {
        let y = spherical_harmonic_unchecked(m, p, [0.0, 0.0, 1.0]).norm();
        if y > best.1 {
            best = (p, y);
        }
    }
    if best.1 < 1e-12 {
        return Err(Error::Numeric(format!("no p with Y_p^{m}(e₃) above 1e-12")));
    }
    Ok(best)
}

/// G̃_{m,k,p'} sampled on the uniform grid α_j = -π + 2πj/N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GTilde {
    pub m: usize,
    pub k: i64,
    pub p_prime: i64,
    /// Largest α reached by the λ grid.
    pub alpha_max: f64,
    pub values: Vec<Complex64>,
}

impl GTilde {
    pub fn alphas(&self) -> Vec<f64> {
        periodic_grid(self.values.len())
    }
}

/// Builds G̃ from the projected data by a periodic cubic spline through the λ samples
/// at α = arccos(1/λ), mirrored evenly and reflected with (-1)^m about ±π/2.
///
/// The spline bridges [α_max, π - α_max], which the finite λ range cannot reach.
pub fn build_g_tilde(sino: &TangentSinogram, m: usize, k: i64, p_prime: i64, n: usize) -> Result<GTilde> {
    let y = spherical_harmonic_unchecked(m, p_prime, [0.0, 0.0, 1.0]);
    if y.norm() < 1e-12 {
        return validation(format!("Y_{p_prime}^{m}(e₃) vanishes; choose another p'"));
    }
    if sino.lambdas.len() < 4 {
        return validation("build_g_tilde: need at least 4 λ samples");
    }
    let g = project_sinogram(sino, m, k, p_prime)?;
    let scale = c_m(m) / y;
    let half: Vec<(f64, Complex64)> = sino
        .lambdas
        .iter()
        .zip(&g)
        .map(|(l, v)| ((1.0 / l).clamp(-1.0, 1.0).acos(), *v * scale))
        .collect();
    let alpha_max = half.last().map(|p| p.0).unwrap_or(0.0);
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    let mut pts: Vec<(f64, Complex64)> = Vec::with_capacity(4 * half.len());
    for (a, v) in &half {
        pts.push((*a, *v));
        pts.push((-*a, *v));
        pts.push((PI - *a, *v * sign));
        pts.push((-PI + *a, *v * sign));
    }
    // Wrap into [-π, π) and drop coincident nodes.
    for p in pts.iter_mut() {
        if p.0 >= PI - 1e-13 {
            p.0 -= 2.0 * PI;
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12);
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let re = CubicSpline::periodic(xs.clone(), pts.iter().map(|p| p.1.re).collect(), 2.0 * PI)?;
    let im = CubicSpline::periodic(xs, pts.iter().map(|p| p.1.im).collect(), 2.0 * PI)?;
    let values = periodic_grid(n)
        .into_iter()
        .map(|a| Complex64::new(re.eval(a), im.eval(a)))
        .collect();
    Ok(GTilde {
        m,
        k,
        p_prime,
        alpha_max,
        values,
    })
}

/// Result of the Fourier deconvolution for one (m, k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeconvolutionRecord {
    pub m: usize,
    pub k: i64,
    pub p_prime: i64,
    /// Fourier indices with |c_{3,n}| > ε.
    pub mask: Vec<i64>,
    /// (n, c_{1,n}) for every index of the transform.
    pub c1: Vec<(i64, Complex64)>,
    /// (n, c_{2,n}) on the mask; zero elsewhere by construction.
    pub c2: Vec<(i64, Complex64)>,
    /// (n, c_{3,n}) on the mask.
    pub c3: Vec<(i64, f64)>,
    /// ‖c₁‖ restricted to indices outside the mask.
    pub off_mask_energy: f64,
}

impl DeconvolutionRecord {
    pub fn c2(&self, n: i64) -> Complex64 {
        self.c2.iter().find(|(q, _)| *q == n).map_or(ZERO, |(_, v)| *v)
    }

    /// Coefficients of g on |β| < π/2 as a trigonometric polynomial: 2 c_{2,n}.
    ///
    /// The kernel only sees the part of g with the parity of m, which on the window
    /// is half of g; doubling undoes that.
    pub fn window_coefficients(&self) -> Vec<(i64, Complex64)> {
        self.c2.iter().map(|(n, v)| (*n, *v * 2.0)).collect()
    }

    /// g_{m,k}(β) on |β| ≤ π/2 from the masked modes.
    pub fn g(&self, beta: f64) -> Complex64 {
        if beta.abs() > 0.5 * PI {
            return ZERO;
        }
        self.c2
            .iter()
            .map(|(n, c)| *c * 2.0 * Complex64::from_polar(1.0, *n as f64 * beta))
            .sum()
    }
}

/// c_{2,n} = c_{1,n}/(2π c_{3,n}) on the mask of P_m(cos α).
pub fn deconvolve(gt: &GTilde) -> Result<DeconvolutionRecord> {
    let n = gt.values.len();
    let m = gt.m;
    if n <= 2 * m || !n.is_power_of_two() {
        return validation(format!("deconvolve: N = {n} must be a power of two above 2m"));
    }
    let c1 = fourier_coefficients(&gt.values);
    let c3 = gegenbauer_fourier_coeffs(m, n)?;
    let mut mask = Vec::new();
    let mut c2 = Vec::new();
    let mut c3m = Vec::new();
    let mut off = 0.0;
    for idx in c1.indices() {
        let k3 = c3.get(idx).re;
        if k3.abs() > MASK_EPS {
            mask.push(idx);
            c2.push((idx, c1.get(idx) / (2.0 * PI * k3)));
            c3m.push((idx, k3));
        } else {
            off += c1.get(idx).norm_sqr();
        }
    }
    Ok(DeconvolutionRecord {
        m,
        k: gt.k,
        p_prime: gt.p_prime,
        mask,
        c1: c1.indices().zip(c1.values.iter().copied()).collect(),
        c2,
        c3: c3m,
        off_mask_energy: off.sqrt(),
    })
}

/// f_{m,k}(r) = cos²β g_{m,k}(β), β = arccos(1/r), and zero on [0, 1].
pub fn reconstruct_radial(record: &DeconvolutionRecord, radii: &[f64]) -> Vec<Complex64> {
    radii
        .iter()
        .map(|&r| {
            if r <= 1.0 {
                ZERO
            } else {
                let c = 1.0 / r;
                record.g(c.acos()) * (c * c)
            }
        })
        .collect()
}

/// Masked-mode projection of a known g: Fourier coefficients of the zero-extended g.
/// Returns (coefficients on the mask, norm of the off-mask remainder on its full series).
pub fn recoverable_projection<F: Fn(f64) -> f64>(g: F, m: usize, nodes: usize) -> (Vec<(i64, Complex64)>, f64) {
    let gl = GaussLegendre::cached(nodes);
    let mut coeffs = Vec::new();
    let mut energy = 0.0;
    for n in -(m as i64)..=m as i64 {
        if (n - m as i64).rem_euclid(2) != 0 {
            continue;
        }
        let v = gl.composite(-0.5 * PI, 0.5 * PI, 64, |b| Complex64::from_polar(g(b), -(n as f64) * b)) / (2.0 * PI);
        energy += v.norm_sqr();
        coeffs.push((n, v));
    }
    // Parseval: ‖g‖² / 2π = Σ |c_n|².
    let total = gl.composite(-0.5 * PI, 0.5 * PI, 64, |b| Complex64::new(g(b) * g(b), 0.0)).re / (2.0 * PI);
    (coeffs, (total - energy).max(0.0).sqrt())
}

/// Per-mode inversion output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeInversion {
    pub record: DeconvolutionRecord,
    pub radii: Vec<f64>,
    pub profile: Vec<Complex64>,
}

/// Options of the tangent inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentInvertOptions {
    /// FFT length on [-π, π).
    pub n_fft: usize,
    /// Radial output grid: uniform on [1, r_max].
    pub r_max: f64,
    pub n_r: usize,
}

impl Default for TangentInvertOptions {
    fn default() -> Self {
        Self {
            n_fft: 256,
            r_max: 10.0,
            n_r: 181,
        }
    }
}

impl TangentInvertOptions {
    pub fn radii(&self) -> Vec<f64> {
        let n = self.n_r.max(2);
        (0..n)
            .map(|i| 1.0 + (self.r_max - 1.0) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Inverts one (m, k) mode.
pub fn invert_mode(sino: &TangentSinogram, m: usize, k: i64, opts: &TangentInvertOptions) -> Result<ModeInversion> {
    let (p, _) = choose_p_prime(m)?;
    let gt = build_g_tilde(sino, m, k, p, opts.n_fft)?;
    let record = deconvolve(&gt)?;
    let radii = opts.radii();
    let profile = reconstruct_radial(&record, &radii);
    Ok(ModeInversion { record, radii, profile })
}

/// Inverts every (m, k) with m up to the sinogram band limit; modes run in parallel.
pub fn invert_tangent(sino: &TangentSinogram, opts: &TangentInvertOptions) -> Result<Vec<ModeInversion>> {
    let l = sino.quadrature.band_limit;
    let modes: Vec<(usize, i64)> = (0..=l)
        .flat_map(|m| (-(m as i64)..=m as i64).map(move |k| (m, k)))
        .collect();
    modes
        .par_iter()
        .map(|&(m, k)| invert_mode(sino, m, k, opts))
        .collect()
}

/// Relative error of the circle-average identity
/// ∫_{S¹_ψ} Y_k^m(cos α ψ + sin α σ) dσ = 2π P_m(cos α) Y_k^m(ψ) with an `n`-node rule.
///
/// The error is relative to |rhs|, floored at 1e-6 of the harmonic's L² scale.
pub fn funk_hecke_residual(m: usize, k: i64, psi: [f64; 3], alpha: f64, n: usize) -> f64 {
    let (a, b) = circle_frame(psi);
    let (sa, ca) = alpha.sin_cos();
    let mut lhs = ZERO;
    for j in 0..n {
        let t = 2.0 * PI * j as f64 / n as f64;
        let (st, ct) = t.sin_cos();
        let w = [
            ca * psi[0] + sa * (ct * a[0] + st * b[0]),
            ca * psi[1] + sa * (ct * a[1] + st * b[1]),
            ca * psi[2] + sa * (ct * a[2] + st * b[2]),
        ];
        lhs += spherical_harmonic_unchecked(m, k, w);
    }
    lhs *= 2.0 * PI / n as f64;
    let rhs = spherical_harmonic_unchecked(m, k, psi) * (2.0 * PI * legendre_unchecked(m, ca));
    let floor = 1e-6 * 2.0 * PI * ((2 * m + 1) as f64 / (4.0 * PI)).sqrt();
    (lhs - rhs).norm() / rhs.norm().max(floor)
}

/// Orthonormal basis of ψ^⊥.
fn circle_frame(psi: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let e = if psi[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = e[0] * psi[0] + e[1] * psi[1] + e[2] * psi[2];
    let mut a = [e[0] - d * psi[0], e[1] - d * psi[1], e[2] - d * psi[2]];
    let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    a.iter_mut().for_each(|v| *v /= na);
    let b = [
        psi[1] * a[2] - psi[2] * a[1],
        psi[2] * a[0] - psi[0] * a[2],
        psi[0] * a[1] - psi[1] * a[0],
    ];
    (a, b)
}
