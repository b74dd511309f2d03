//! Legendre polynomials, normalized associated Legendre functions, complex
//! spherical harmonics and the complex log-Gamma function.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{domain, validation, Result};

/// Legendre polynomial P_m(x), which is the Gegenbauer polynomial of order 1/2.
pub fn legendre(m: usize, x: f64) -> Result<f64> {
    if !(x.abs() <= 1.0 + 1e-12) {
        return domain(format!("legendre: |x| = {} exceeds 1", x.abs()));
    }
    Ok(legendre_unchecked(m, x))
}

/// Bonnet recurrence without the domain check. Used inside quadrature loops.
#[inline]
pub fn legendre_unchecked(m: usize, x: f64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for l in 2..=m {
        let lf = l as f64;
        let p2 = ((2.0 * lf - 1.0) * x * p1 - (lf - 1.0) * p0) / lf;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Orthonormal associated Legendre function, Condon–Shortley phase included:
/// Y_k^m(θ, φ) = legendre_normalized(m, k, cos θ) e^{ikφ} for k ≥ 0.
///
/// Upward recurrence in degree at fixed order, normalized at every step.
pub fn legendre_normalized(m: usize, k: usize, x: f64) -> f64 {
    if k > m {
        return 0.0;
    }
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pkk = (1.0 / (4.0 * PI)).sqrt();
    for i in 1..=k {
        let fi = i as f64;
        pkk *= -((2.0 * fi + 1.0) / (2.0 * fi)).sqrt() * s;
    }
    if m == k {
        return pkk;
    }
    let kf = k as f64;
    let mut p_prev = pkk;
    let mut p = (2.0 * kf + 3.0).sqrt() * x * pkk;
    for l in (k + 2)..=m {
        let lf = l as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - kf * kf)).sqrt();
        let lm = lf - 1.0;
        let b = ((lm * lm - kf * kf) / (4.0 * lm * lm - 1.0)).sqrt();
        let next = a * (x * p - b * p_prev);
        p_prev = p;
        p = next;
    }
    p
}

fn check_unit(w: &[f64; 3]) -> Result<()> {
    let n = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    if (n - 1.0).abs() > 1e-10 {
        return domain(format!("spherical_harmonic: |ω| = {n} is not 1"));
    }
    Ok(())
}

/// Complex spherical harmonic Y_k^m(ω) with Condon–Shortley phase.
pub fn spherical_harmonic(m: usize, k: i64, w: [f64; 3]) -> Result<Complex64> {
    if k.unsigned_abs() as usize > m {
        return validation(format!("spherical_harmonic: order {k} exceeds degree {m}"));
    }
    check_unit(&w)?;
    Ok(spherical_harmonic_unchecked(m, k, w))
}

#[inline]
pub fn spherical_harmonic_unchecked(m: usize, k: i64, w: [f64; 3]) -> Complex64 {
    let ka = k.unsigned_abs() as usize;
    let x = w[2].clamp(-1.0, 1.0);
    let p = legendre_normalized(m, ka, x);
    let phi = w[1].atan2(w[0]);
    let y = Complex64::from_polar(p, ka as f64 * phi);
    if k >= 0 {
        y
    } else if ka % 2 == 0 {
        y.conj()
    } else {
        -y.conj()
    }
}

/// All Y_k^m(ω) for |k| ≤ m in order k = -m..=m.
pub fn spherical_harmonics_row(m: usize, w: [f64; 3]) -> Vec<Complex64> {
    let x = w[2].clamp(-1.0, 1.0);
    let phi = w[1].atan2(w[0]);
    let mut out = vec![Complex64::new(0.0, 0.0); 2 * m + 1];
    for ka in 0..=m {
        let p = legendre_normalized(m, ka, x);
        let y = Complex64::from_polar(p, ka as f64 * phi);
        out[m + ka] = y;
        if ka > 0 {
            let sign = if ka % 2 == 0 { 1.0 } else { -1.0 };
            out[m - ka] = y.conj() * sign;
        }
    }
    out
}

/// Fourier coefficients of a 2π-periodic function indexed by n ∈ [-N/2, N/2).
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    pub values: Vec<Complex64>,
}

impl FourierSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_min(&self) -> i64 {
        -(self.values.len() as i64 / 2)
    }

    /// Coefficient for index n, zero outside the stored band.
    pub fn get(&self, n: i64) -> Complex64 {
        let i = n - self.n_min();
        if i < 0 || i >= self.values.len() as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[i as usize]
        }
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> {
        let lo = self.n_min();
        lo..lo + self.values.len() as i64
    }

    /// Evaluates Σ c_n e^{inα}.
    pub fn eval(&self, alpha: f64) -> Complex64 {
        self.indices()
            .zip(&self.values)
            .map(|(n, c)| c * Complex64::from_polar(1.0, n as f64 * alpha))
            .sum()
    }
}

/// Coefficients c_n = (1/N) Σ_j f(α_j) e^{-inα_j} on α_j = -π + 2πj/N.
pub fn fourier_coefficients(samples: &[Complex64]) -> FourierSeries {
    let n = samples.len();
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    let half = n as i64 / 2;
    for (i, v) in values.iter_mut().enumerate() {
        let idx = i as i64 - half;
        let bin = idx.rem_euclid(n as i64) as usize;
        let sign = if idx.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        *v = buf[bin] * (sign / n as f64);
    }
    FourierSeries { values }
}

/// Uniform periodic grid α_j = -π + 2πj/N.
pub fn periodic_grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| -PI + 2.0 * PI * j as f64 / n as f64)
        .collect()
}

/// Fourier coefficients of α ↦ P_m(cos α) by discrete transform on N points.
pub fn gegenbauer_fourier_coeffs(m: usize, n: usize) -> Result<FourierSeries> {
    if !n.is_power_of_two() || n <= 2 * m {
        return validation(format!(
            "gegenbauer_fourier_coeffs: N = {n} must be a power of two above 2m = {}",
            2 * m
        ));
    }
    let samples: Vec<Complex64> = periodic_grid(n)
        .into_iter()
        .map(|a| Complex64::new(legendre_unchecked(m, a.cos()), 0.0))
        .collect();
    let mut series = fourier_coefficients(&samples);
    for v in series.values.iter_mut() {
        if v.norm() < 1e-14 {
            *v = Complex64::new(0.0, 0.0);
        } else {
            v.im = 0.0;
        }
    }
    Ok(series)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(z) for complex z, reflected for Re z < 1/2. The imaginary part is
/// defined modulo 2π, which is immaterial once exponentiated.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        let pi = Complex64::new(PI, 0.0);
        return pi.ln() - (pi * z).sin().ln() - ln_gamma(Complex64::new(1.0, 0.0) - z);
    }
    let z = z - 1.0;
    let mut a = Complex64::new(LANCZOS[0], 0.0);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += *c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + a.ln()
}

/// Beta function B(a, b) = Γ(a)Γ(b)/Γ(a+b) for complex arguments.
pub fn beta(a: Complex64, b: Complex64) -> Complex64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_examples() {
        assert_eq!(legendre(0, 0.37).unwrap(), 1.0);
        assert_eq!(legendre(1, -0.5).unwrap(), -0.5);
        assert!((legendre(2, 0.5).unwrap() + 0.125).abs() < 1e-15);
        assert!(legendre(3, 1.1).is_err());
    }

    #[test]
    fn harmonic_examples() {
        let e3 = [0.0, 0.0, 1.0];
        let y00 = spherical_harmonic(0, 0, [0.6, 0.0, 0.8]).unwrap();
        assert!((y00.re - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
        let y10 = spherical_harmonic(1, 0, e3).unwrap();
        assert!((y10.re - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        assert!(spherical_harmonic(1, 1, e3).unwrap().norm() < 1e-15);
        assert!(spherical_harmonic(1, 0, [0.0, 0.0, 1.1]).is_err());
    }

    #[test]
    fn harmonic_row_matches_single_evaluations() {
        let w = [0.48, -0.6, 0.64];
        let row = spherical_harmonics_row(4, w);
        for k in -4..=4i64 {
            let y = spherical_harmonic(4, k, w).unwrap();
            assert!((row[(k + 4) as usize] - y).norm() < 1e-15);
        }
    }

    #[test]
    fn gegenbauer_coefficients_examples() {
        let c0 = gegenbauer_fourier_coeffs(0, 16).unwrap();
        assert!((c0.get(0).re - 1.0).abs() < 1e-15);
        let c2 = gegenbauer_fourier_coeffs(2, 16).unwrap();
        assert!((c2.get(0).re - 0.25).abs() < 1e-14);
        assert!((c2.get(2).re - 0.375).abs() < 1e-14);
        assert!((c2.get(-2).re - 0.375).abs() < 1e-14);
        assert!(c2.get(1).norm() == 0.0);
        assert!(gegenbauer_fourier_coeffs(4, 8).is_err());
        assert!(gegenbauer_fourier_coeffs(1, 12).is_err());
    }

    #[test]
    fn ln_gamma_real_values() {
        let g = |x: f64| ln_gamma(Complex64::new(x, 0.0)).exp().re;
        assert!((g(5.0) - 24.0).abs() < 1e-12);
        assert!((g(0.5) - PI.sqrt()).abs() < 1e-14);
        assert!((g(-0.5) + 2.0 * PI.sqrt()).abs() < 1e-13);
    }
}
