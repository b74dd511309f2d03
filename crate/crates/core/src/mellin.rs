//! Numerical Mellin transform on vertical contours.
//!
//! The forward transform uses the substitution y = e^{-x}, which turns
//! (MF)(ρ + it) into a Fourier sum of F*(x) = e^{-ρx} F(e^{-x}) on a uniform
//! x grid. The sum is evaluated on the whole contour at once with a chirp-z
//! transform. The inverse is a windowed trapezoid rule along the contour.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Result};
use crate::quad;
use crate::specfun::ln_gamma;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Truncated vertical contour ρ + i t, t on a symmetric uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub rho: f64,
    pub omega: f64,
    pub h: f64,
}

impl Default for Contour {
    fn default() -> Self {
        Self {
            rho: 0.5,
            omega: 200.0,
            h: 0.05,
        }
    }
}

impl Contour {
    pub fn new(rho: f64, omega: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !(omega > 0.0) || !rho.is_finite() {
            return validation(format!("contour: need Ω > 0 and h > 0, got Ω = {omega}, h = {h}"));
        }
        Ok(Self { rho, omega, h })
    }

    pub fn len(&self) -> usize {
        (2.0 * self.omega / self.h).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Imaginary node t_j, symmetric about zero.
    #[inline]
    pub fn t(&self, j: usize) -> f64 {
        (j as f64 - 0.5 * (self.len() - 1) as f64) * self.h
    }

    pub fn ts(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.t(j)).collect()
    }

    pub fn s(&self, j: usize) -> Complex64 {
        Complex64::new(self.rho, self.t(j))
    }

    /// Half-width actually covered by the nodes.
    pub fn reach(&self) -> f64 {
        0.5 * (self.len() - 1) as f64 * self.h
    }
}

/// Spectral window applied along the contour during inversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    None,
    /// Flat on |t| ≤ Ω/2, raised-cosine roll-off to zero at |t| = Ω.
    #[default]
    Tukey,
}

impl Window {
    pub fn weight(&self, t: f64, omega: f64) -> f64 {
        match self {
            Window::None => 1.0,
            Window::Tukey => {
                let u = t.abs() / omega;
                if u <= 0.5 {
                    1.0
                } else if u >= 1.0 {
                    0.0
                } else {
                    0.5 * (1.0 + (PI * (u - 0.5) / 0.5).cos())
                }
            }
        }
    }
}

/// Quadrature weights for the inverse sum: window × trapezoid / 2π.
pub fn inverse_weights(c: &Contour, window: Window) -> Vec<f64> {
    let n = c.len();
    let reach = c.reach();
    quad::trapezoid_weights(n, c.h)
        .into_iter()
        .enumerate()
        .map(|(j, w)| w * window.weight(c.t(j), reach) / (2.0 * PI))
        .collect()
}

/// Samples of a Mellin transform along a contour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub contour: Contour,
    pub values: Vec<Complex64>,
}

impl ContourGrid {
    pub fn zeros(contour: Contour) -> Self {
        Self {
            contour,
            values: vec![Complex64::new(0.0, 0.0); contour.len()],
        }
    }

    /// Largest |g(ρ - it) - conj g(ρ + it)| over the grid.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let n = self.values.len();
        (0..n)
            .map(|j| (self.values[n - 1 - j] - self.values[j].conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// Chirp-z evaluation of trapezoid-weighted exponential sums on a uniform
/// grid x_i = x0 + i·dx:
///
/// out_k = Σ_i w_i d_i e^{(ρ + i(t0 + k·ht)) x_i},   k = 0..m.
pub struct LogCzt {
    nx: usize,
    m: usize,
    len: usize,
    dx: f64,
    ht: f64,
    weights: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    kernel: Vec<Complex64>,
}

impl std::fmt::Debug for LogCzt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogCzt")
            .field("nx", &self.nx)
            .field("m", &self.m)
            .field("len", &self.len)
            .finish()
    }
}

#[inline]
fn chirp(wc: f64, i: usize) -> Complex64 {
    let q = (i as f64) * (i as f64);
    Complex64::from_polar(1.0, 0.5 * wc * q)
}

impl LogCzt {
    pub fn new(nx: usize, dx: f64, ht: f64, m: usize) -> Self {
        let len = (nx + m - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(len);
        let ifft = planner.plan_fft_inverse(len);
        let wc = ht * dx;
        let mut kernel = vec![Complex64::new(0.0, 0.0); len];
        for (k, v) in kernel.iter_mut().enumerate().take(m) {
            *v = chirp(wc, k).conj();
        }
        for j in 1..nx {
            kernel[len - j] = chirp(wc, j).conj();
        }
        fft.process(&mut kernel);
        Self {
            nx,
            m,
            len,
            dx,
            ht,
            weights: quad::trapezoid_weights(nx, dx),
            fft,
            ifft,
            kernel,
        }
    }

    pub fn input_len(&self) -> usize {
        self.nx
    }

    pub fn output_len(&self) -> usize {
        self.m
    }

    pub fn apply(&self, x0: f64, data: &[Complex64], rho: f64, t0: f64) -> Vec<Complex64> {
        assert_eq!(data.len(), self.nx, "LogCzt input length mismatch");
        let wc = self.ht * self.dx;
        let s0 = Complex64::new(rho, t0);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (i, (d, w)) in data.iter().zip(&self.weights).enumerate() {
            let x = x0 + self.dx * i as f64;
            buf[i] = *d * *w * (s0 * x).exp() * chirp(wc, i);
        }
        self.fft.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel) {
            *b *= *k;
        }
        self.ifft.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        (0..self.m)
            .map(|k| {
                buf[k] * scale * chirp(wc, k) * Complex64::from_polar(1.0, k as f64 * self.ht * x0)
            })
            .collect()
    }
}

/// Settings for the forward transform of a compactly supported function.
#[derive(Debug, Clone, Copy)]
pub struct ForwardOptions {
    /// Step of the uniform x = -ln y grid.
    pub dx: f64,
    /// Threshold on e^{-ρX}·max|F| that fixes the far end of the x grid.
    pub tail_tol: f64,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self {
            dx: 1e-4,
            tail_tol: 1e-14,
        }
    }
}

fn forward_grid<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    rho: f64,
    opts: &ForwardOptions,
) -> Result<(f64, Vec<Complex64>)> {
    if !(rho > 0.0) {
        return validation(format!("mellin_forward: contour abscissa ρ = {rho} must be positive"));
    }
    if !(a > 0.0) || !a.is_finite() {
        return validation("mellin_forward: support bound a must be positive and finite");
    }
    let xa = -a.ln();
    let probe = 4096;
    let fmax = (0..=probe)
        .map(|i| f(a * i as f64 / probe as f64).abs())
        .fold(0.0, f64::max);
    let x_max = if fmax > 0.0 {
        ((fmax / opts.tail_tol).ln() / rho).max(xa + 1.0)
    } else {
        xa + 1.0
    };
    let nx = ((x_max - xa) / opts.dx).ceil() as usize + 1;
    // The grid runs upward in ln y = -x, from ln y = -x_max to ln a.
    let u0 = -(xa + opts.dx * (nx - 1) as f64);
    let samples = (0..nx)
        .map(|i| Complex64::new(f((u0 + opts.dx * i as f64).exp()), 0.0))
        .collect();
    Ok((u0, samples))
}

/// (MF)(ρ + it_j) for F supported on [0, a].
pub fn mellin_forward<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    contour: &Contour,
    opts: &ForwardOptions,
) -> Result<ContourGrid> {
    let (u0, samples) = forward_grid(&f, a, contour.rho, opts)?;
    if samples.iter().all(|v| v.re == 0.0) {
        return Ok(ContourGrid::zeros(*contour));
    }
    let czt = LogCzt::new(samples.len(), opts.dx, contour.h, contour.len());
    let values = czt.apply(u0, &samples, contour.rho, contour.t(0));
    Ok(ContourGrid {
        contour: *contour,
        values,
    })
}

/// (MF)(s) at a single point by the same uniform log-grid sum.
pub fn mellin_at<F: Fn(f64) -> f64>(f: F, a: f64, s: Complex64, opts: &ForwardOptions) -> Result<Complex64> {
    let (u0, samples) = forward_grid(&f, a, s.re, opts)?;
    let w = quad::trapezoid_weights(samples.len(), opts.dx);
    Ok(samples
        .iter()
        .zip(&w)
        .enumerate()
        .map(|(i, (v, w))| *v * *w * (s * (u0 + opts.dx * i as f64)).exp())
        .sum())
}

/// Complex inverse (1/2π) Σ_j W_j w_j r^{-s_j} g_j.
pub fn mellin_inverse_complex(g: &ContourGrid, r: f64, window: Window) -> Result<Complex64> {
    if !(r > 0.0) {
        return domain(format!("mellin_inverse: r = {r} must be positive"));
    }
    let w = inverse_weights(&g.contour, window);
    let lr = r.ln();
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, (v, wj)) in g.values.iter().zip(&w).enumerate() {
        if *wj != 0.0 && (v.re != 0.0 || v.im != 0.0) {
            acc += *v * *wj * (-g.contour.s(j) * lr).exp();
        }
    }
    Ok(acc)
}

/// Real part of the inverse Mellin transform at r.
pub fn mellin_inverse(g: &ContourGrid, r: f64, window: Window) -> Result<f64> {
    Ok(mellin_inverse_complex(g, r, window)?.re)
}

/// Outcome of a numerical scaling-law check (MF_a)(s) = a^{-s}(MF)(s).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingReport {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub rel_error: f64,
    pub pass: bool,
}

/// Verifies the scaling law for F supported on [0, support], tolerance 1e-6.
pub fn scaling_check<F: Fn(f64) -> f64>(
    f: F,
    support: f64,
    a: f64,
    s: Complex64,
) -> Result<ScalingReport> {
    if !(a > 0.0) || !(s.re > 0.0) {
        return validation("scaling_check: need a > 0 and Re s > 0");
    }
    let opts = ForwardOptions::default();
    let base = mellin_at(&f, support, s, &opts)?;
    let lhs = mellin_at(|y| f(a * y), support / a, s, &opts)?;
    let rhs = (-s * a.ln()).exp() * base;
    let rel_error = (lhs - rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
    Ok(ScalingReport {
        lhs,
        rhs,
        rel_error,
        pass: rel_error < 1e-6,
    })
}

/// n′ = max(0, n + 1).
pub fn n_prime(n: i64) -> i64 {
    (n + 1).max(0)
}

fn check_kernel_domain(n: i64, zeta: Complex64, xi: Complex64) -> Result<()> {
    let np = n_prime(n) as f64;
    if !(zeta.re > np) {
        return domain(format!(
            "kernel_integral: Re ζ = {} must exceed n′ = {np} for n = {n}",
            zeta.re
        ));
    }
    if !(xi.re > 0.0 && xi.re < 1.0) {
        return domain(format!("kernel_integral: Re ξ = {} must lie in (0, 1)", xi.re));
    }
    Ok(())
}

#[inline]
fn cpowi(z: Complex64, n: i64) -> Complex64 {
    if n >= 0 {
        z.powi(n as i32)
    } else {
        z.powi(-n as i32).inv()
    }
}

/// I_n(ζ, ξ) = ∫₀^∞ (1+t²)^{-ζ/2} t^{-ξ} (1+it)^n dt by adaptive quadrature.
///
/// [0, 1] is mapped by t = u^{1/(1-Re ξ)} and [1, ∞) by t = 1/u followed by a
/// power map, which leaves bounded integrands at both singular endpoints.
pub fn kernel_integral(n: i64, zeta: Complex64, xi: Complex64) -> Result<Complex64> {
    check_kernel_domain(n, zeta, xi)?;
    let p = 1.0 / (1.0 - xi.re);
    let head = |u: f64| -> Complex64 {
        if u <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let lu = u.ln();
        let t = (p * lu).exp();
        let jac = ((-xi * p + (p - 1.0)) * lu).exp() * p;
        (-0.5 * zeta * (1.0 + t * t).ln()).exp() * cpowi(Complex64::new(1.0, t), n) * jac
    };
    let e = zeta.re + xi.re - n as f64 - 2.0;
    let q = 1.0 / (1.0 + e);
    let expo = zeta + xi - (n as f64) - 2.0;
    let tail = |v: f64| -> Complex64 {
        if v <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let lv = v.ln();
        let u = (q * lv).exp();
        let lu = q * lv;
        let jac = q * ((q - 1.0) * lv).exp();
        (expo * lu).exp()
            * (-0.5 * zeta * (1.0 + u * u).ln()).exp()
            * cpowi(Complex64::new(u, 1.0), n)
            * jac
    };
    let a = quad::adaptive(head, 0.0, 1.0, 1e-15, 1e-11, 20_000)?;
    let b = quad::adaptive(tail, 0.0, 1.0, 1e-15, 1e-11, 20_000)?;
    Ok(a + b)
}

pub(crate) fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Closed form of I_n through Beta functions:
/// n ≥ 0: Σ_k C(n,k) i^k ½B((k+1-ξ)/2, (ζ+ξ-k-1)/2),
/// n = -m: Σ_k C(m,k) (-i)^k ½B((k+1-ξ)/2, (ζ+2m+ξ-k-1)/2).
pub fn kernel_integral_closed(n: i64, zeta: Complex64, xi: Complex64) -> Result<Complex64> {
    check_kernel_domain(n, zeta, xi)?;
    Ok(kernel_integral_closed_unchecked(n, zeta, xi))
}

pub fn kernel_integral_closed_unchecked(n: i64, zeta: Complex64, xi: Complex64) -> Complex64 {
    let m = n.unsigned_abs();
    let (unit, shift) = if n >= 0 { (I, 0.0) } else { (-I, 2.0 * m as f64) };
    let mut acc = Complex64::new(0.0, 0.0);
    let mut ik = Complex64::new(1.0, 0.0);
    for k in 0..=m {
        let kf = k as f64;
        let a = (kf + 1.0 - xi) * 0.5;
        let b = (zeta + shift + xi - kf - 1.0) * 0.5;
        let lb = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
        acc += ik * binomial(m, k) * 0.5 * lb.exp();
        ik *= unit;
    }
    acc
}

/// Tikhonov-guarded quotient: num/den, or conj(den)·num/(|den|² + δ²) when |den| < δ.
/// The flag reports whether the guard engaged.
#[inline]
pub fn regularized_divide(num: Complex64, den: Complex64, delta: f64) -> (Complex64, bool) {
    let d2 = den.norm_sqr();
    if d2 < delta * delta {
        (den.conj() * num / (d2 + delta * delta), true)
    } else {
        (num / den, false)
    }
}
