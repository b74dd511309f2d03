//! Cubic spline interpolation on non-uniform grids.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

/// Solves a tridiagonal system in place (Thomas algorithm).
fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64]) {
    let n = d.len();
    let mut cp = vec![0.0; n];
    let mut bp = b[0];
    cp[0] = c[0] / bp;
    d[0] /= bp;
    for i in 1..n {
        bp = b[i] - a[i] * cp[i - 1];
        cp[i] = if i + 1 < n { c[i] / bp } else { 0.0 };
        d[i] = (d[i] - a[i] * d[i - 1]) / bp;
    }
    for i in (0..n - 1).rev() {
        d[i] -= cp[i] * d[i + 1];
    }
}

/// Cubic spline in the first-derivative (Hermite) form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicSpline {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub slopes: Vec<f64>,
    /// Period for periodic splines; evaluation wraps into [x₀, x₀ + period).
    pub period: Option<f64>,
}

fn one_sided_slope(x: &[f64], y: &[f64], at_start: bool) -> f64 {
    let n = x.len();
    if n < 3 {
        return (y[n - 1] - y[0]) / (x[n - 1] - x[0]);
    }
    let (x0, x1, x2, y0, y1, y2) = if at_start {
        (x[0], x[1], x[2], y[0], y[1], y[2])
    } else {
        (x[n - 1], x[n - 2], x[n - 3], y[n - 1], y[n - 2], y[n - 3])
    };
    let h1 = x1 - x0;
    let h2 = x2 - x0;
    // Derivative at x0 of the quadratic through the three points.
    (y1 - y0) * h2 / (h1 * (h2 - h1)) - (y2 - y0) * h1 / (h2 * (h2 - h1))
}

impl CubicSpline {
    /// Clamped spline with end slopes from one-sided quadratic differences.
    pub fn clamped(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::check(&x, &y)?;
        let s0 = one_sided_slope(&x, &y, true);
        let s1 = one_sided_slope(&x, &y, false);
        Self::clamped_with(x, y, s0, s1)
    }

    /// Clamped spline with prescribed end slopes.
    pub fn clamped_with(x: Vec<f64>, y: Vec<f64>, s0: f64, s1: f64) -> Result<Self> {
        Self::check(&x, &y)?;
        let n = x.len();
        let mut slopes = vec![0.0; n];
        slopes[0] = s0;
        slopes[n - 1] = s1;
        if n > 2 {
            let m = n - 2;
            let mut a = vec![0.0; m];
            let mut b = vec![0.0; m];
            let mut c = vec![0.0; m];
            let mut d = vec![0.0; m];
            for j in 0..m {
                let i = j + 1;
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                a[j] = h1;
                b[j] = 2.0 * (h0 + h1);
                c[j] = h0;
                d[j] = 3.0 * (h1 * (y[i] - y[i - 1]) / h0 + h0 * (y[i + 1] - y[i]) / h1);
            }
            d[0] -= a[0] * s0;
            d[m - 1] -= c[m - 1] * s1;
            a[0] = 0.0;
            c[m - 1] = 0.0;
            solve_tridiagonal(&a, &b, &c, &mut d);
            slopes[1..n - 1].copy_from_slice(&d);
        }
        Ok(Self {
            x,
            y,
            slopes,
            period: None,
        })
    }

    /// Periodic spline through (x_i, y_i) with the given period; nodes must lie
    /// in [x₀, x₀ + period).
    pub fn periodic(x: Vec<f64>, y: Vec<f64>, period: f64) -> Result<Self> {
        Self::check(&x, &y)?;
        let n = x.len();
        if x[n - 1] - x[0] >= period {
            return validation("periodic spline: nodes exceed one period");
        }
        let h = |i: usize| -> f64 {
            if i + 1 < n {
                x[i + 1] - x[i]
            } else {
                x[0] + period - x[n - 1]
            }
        };
        let yy = |i: usize| y[i % n];
        // Cyclic tridiagonal system for slopes: h_i s_{i-1} + 2(h_{i-1}+h_i) s_i + h_{i-1} s_{i+1} = rhs.
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 0..n {
            let hp = h((i + n - 1) % n);
            let hn = h(i);
            a[i] = hn;
            b[i] = 2.0 * (hp + hn);
            c[i] = hp;
            let yp = y[(i + n - 1) % n];
            d[i] = 3.0 * (hn * (y[i] - yp) / hp + hp * (yy(i + 1) - y[i]) / hn);
        }
        let slopes = solve_cyclic(&a, &b, &c, &d);
        Ok(Self {
            x,
            y,
            slopes,
            period: Some(period),
        })
    }

    fn check(x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != y.len() || x.len() < 2 {
            return validation("spline: need at least two nodes with matching values");
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return validation("spline: abscissae must be strictly increasing");
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let (t, i, x0, x1, y0, y1, s0, s1) = match self.period {
            Some(p) => {
                let t = self.x[0] + (t - self.x[0]).rem_euclid(p);
                let i = match self.x.partition_point(|v| *v <= t) {
                    0 => 0,
                    k => k - 1,
                };
                let (x1, y1, s1) = if i + 1 < n {
                    (self.x[i + 1], self.y[i + 1], self.slopes[i + 1])
                } else {
                    (self.x[0] + p, self.y[0], self.slopes[0])
                };
                (t, i, self.x[i], x1, self.y[i], y1, self.slopes[i], s1)
            }
            None => {
                if t <= self.x[0] {
                    return self.y[0] + self.slopes[0] * (t - self.x[0]);
                }
                if t >= self.x[n - 1] {
                    return self.y[n - 1] + self.slopes[n - 1] * (t - self.x[n - 1]);
                }
                let i = self.x.partition_point(|v| *v <= t).saturating_sub(1).min(n - 2);
                (
                    t,
                    i,
                    self.x[i],
                    self.x[i + 1],
                    self.y[i],
                    self.y[i + 1],
                    self.slopes[i],
                    self.slopes[i + 1],
                )
            }
        };
        let _ = i;
        let h = x1 - x0;
        let u = (t - x0) / h;
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        h00 * y0 + h10 * h * s0 + h01 * y1 + h11 * h * s1
    }
}

/// Cyclic tridiagonal solve by the Sherman–Morrison correction.
/// Row i reads a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i with wrap-around.
fn solve_cyclic(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = d.len();
    if n == 2 {
        let m00 = b[0];
        let m01 = a[0] + c[0];
        let m10 = a[1] + c[1];
        let m11 = b[1];
        let det = m00 * m11 - m01 * m10;
        return vec![(d[0] * m11 - m01 * d[1]) / det, (m00 * d[1] - m10 * d[0]) / det];
    }
    let alpha = c[n - 1];
    let beta = a[0];
    let gamma = -b[0];
    let mut bb = b.to_vec();
    bb[0] = b[0] - gamma;
    bb[n - 1] = b[n - 1] - alpha * beta / gamma;
    let mut aa = a.to_vec();
    aa[0] = 0.0;
    let mut cc = c.to_vec();
    cc[n - 1] = 0.0;
    let mut x = d.to_vec();
    solve_tridiagonal(&aa, &bb, &cc, &mut x);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    solve_tridiagonal(&aa, &bb, &cc, &mut u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + u[0] + beta * u[n - 1] / gamma);
    x.iter().zip(&u).map(|(xi, ui)| xi - fact * ui).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamped_reproduces_cubic() {
        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).powf(1.3)).collect();
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t - 0.1 * t * t * t;
        let df = |t: f64| -2.0 + t - 0.3 * t * t;
        let y: Vec<f64> = x.iter().map(|&t| f(t)).collect();
        let s = CubicSpline::clamped_with(x.clone(), y, df(x[0]), df(x[11])).unwrap();
        for i in 0..50 {
            let t = x[11] * i as f64 / 49.0;
            assert!((s.eval(t) - f(t)).abs() < 1e-11);
        }
    }

    #[test]
    fn periodic_spline_tracks_cosine() {
        let n = 64;
        let x: Vec<f64> = (0..n).map(|i| -3.0 + 6.2 * i as f64 / n as f64).collect();
        let p = 2.0 * std::f64::consts::PI;
        let y: Vec<f64> = x.iter().map(|t: &f64| (*t).cos()).collect();
        let s = CubicSpline::periodic(x, y, p).unwrap();
        for i in 0..100 {
            let t = -7.0 + 0.14 * i as f64;
            assert!((s.eval(t) - t.cos()).abs() < 1e-5);
        }
    }
}
