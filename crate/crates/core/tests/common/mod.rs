//! Test-side reference implementations, written independently of the library.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;

fn factorial(n: u64) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn binom(n: u64, k: u64) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// ln Γ(z) by upward recurrence to Re z ≥ 12 followed by the Stirling series.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    const B: [f64; 8] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
        -3617.0 / 510.0,
    ];
    let mut shift = Complex64::new(0.0, 0.0);
    let mut w = z;
    while w.re < 12.0 {
        shift += w.ln();
        w += 1.0;
    }
    let mut s = (w - 0.5) * w.ln() - w + 0.5 * (2.0 * PI).ln();
    let w2 = w * w;
    let mut pw = w;
    for (i, b) in B.iter().enumerate() {
        let k = (i + 1) as f64;
        s += *b / (2.0 * k * (2.0 * k - 1.0) * pw);
        pw *= w2;
    }
    s - shift
}

pub fn beta(a: Complex64, b: Complex64) -> Complex64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// Coefficients of P_m as a polynomial in x, lowest degree first.
fn legendre_poly(m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m + 1];
    for j in 0..=m / 2 {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        c[m - 2 * j] = sign * binom(m as u64, j as u64) * binom((2 * m - 2 * j) as u64, m as u64) / 2f64.powi(m as i32);
    }
    c
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * x + v)
}

pub fn legendre(m: usize, x: f64) -> f64 {
    horner(&legendre_poly(m), x)
}

/// Y_k^m with Condon–Shortley phase: P_m^k = (-1)^k (1-x²)^{k/2} d^k P_m / dx^k.
pub fn ylm(m: usize, k: i64, w: [f64; 3]) -> Complex64 {
    let ka = k.unsigned_abs() as usize;
    let mut c = legendre_poly(m);
    for _ in 0..ka {
        c = c.iter().enumerate().skip(1).map(|(i, v)| v * i as f64).collect();
        if c.is_empty() {
            c.push(0.0);
        }
    }
    let x = w[2];
    let s = (1.0 - x * x).max(0.0).sqrt();
    let sign = if ka % 2 == 0 { 1.0 } else { -1.0 };
    let plm = sign * s.powi(ka as i32) * horner(&c, x);
    let norm = ((2 * m + 1) as f64 / (4.0 * PI) * factorial((m - ka) as u64) / factorial((m + ka) as u64)).sqrt();
    let phi = w[1].atan2(w[0]);
    let y = Complex64::from_polar(norm * plm, ka as f64 * phi);
    if k >= 0 {
        y
    } else {
        y.conj() * sign
    }
}

/// Wigner's explicit sum for d^j_{m',m}(β).
pub fn wigner_d(j: i64, mp: i64, m: i64, beta: f64) -> f64 {
    let (sh, ch) = (0.5 * beta).sin_cos();
    let f = |n: i64| factorial(n as u64);
    let pre = (f(j + mp) * f(j - mp) * f(j + m) * f(j - m)).sqrt();
    let mut acc = 0.0;
    for s in 0..=2 * j {
        if j + m - s < 0 || mp - m + s < 0 || j - mp - s < 0 {
            continue;
        }
        let sign = if (mp - m + s) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * ch.powi((2 * j + m - mp - 2 * s) as i32) * sh.powi((mp - m + 2 * s) as i32)
            / (f(j + m - s) * f(s) * f(mp - m + s) * f(j - mp - s));
    }
    pre * acc
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, n: usize) -> Complex64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * (h / 3.0)
}

/// (1 - u²)^p on |u| < 1, u = (x - c)/w.
pub fn bump(x: f64, c: f64, w: f64, p: i32) -> f64 {
    let u = (x - c) / w;
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - u * u).powi(p)
    }
}

/// a (1 - |x - c|²/w²)^p.
pub fn ball_bump(x: &[f64], c: &[f64], w: f64, a: f64, p: i32) -> f64 {
    let d2: f64 = x.iter().zip(c).map(|(u, v)| (u - v) * (u - v)).sum();
    let q = 1.0 - d2 / (w * w);
    if q <= 0.0 {
        0.0
    } else {
        a * q.powi(p)
    }
}

pub fn rel_l2(got: &[f64], truth: &[f64]) -> f64 {
    let num: f64 = got.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = truth.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}
