//! Recovery of f_n(r, τ) from equidistant-line data by angular Fourier analysis,
//! the substitution s = tan θ, a two-variable Mellin transform, division by the
//! kernel integral I_n and a double inverse Mellin transform.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::forward::EquidistantSinogram;
use crate::mellin::{binomial, inverse_weights, n_prime, regularized_divide, Contour, LogCzt, Window};
use crate::phantoms::SupportBox;
use crate::specfun::ln_gamma;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Angular mode G_n(λ, θ), indexed `[iλ * n_s + j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularMode {
    pub n: i64,
    pub values: Vec<Complex64>,
}

/// G_n = (1/N_φ) Σ_k G(λ, θ, φ_k) e^{-inφ_k} for |n| ≤ n_max.
pub fn angular_modes(sino: &EquidistantSinogram, n_max: usize) -> Result<Vec<AngularMode>> {
    let np = sino.grid.n_phi;
    if np < (4 * n_max).max(1) {
        return validation(format!(
            "angular_modes: {np} φ nodes cannot resolve modes up to {n_max}; need at least {}",
            4 * n_max
        ));
    }
    let phis = sino.grid.phis();
    let nls = sino.grid.lambdas.len() * sino.grid.s.len();
    let nm = n_max as i64;
    Ok((-nm..=nm)
        .map(|n| {
            let ph: Vec<Complex64> = phis.iter().map(|p| Complex64::from_polar(1.0 / np as f64, -(n as f64) * p)).collect();
            let values = (0..nls)
                .map(|ij| {
                    let row = &sino.values[ij * np..(ij + 1) * np];
                    row.iter().zip(&ph).map(|(v, e)| v * e).sum()
                })
                .collect();
            AngularMode { n, values }
        })
        .collect())
}

/// Numerical settings of the equidistant inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquidistantInvertOptions {
    /// Re ζ = n′ + zeta_offset.
    pub zeta_offset: f64,
    /// Re ξ, inside (0, 1).
    pub xi_re: f64,
    pub omega: f64,
    pub h: f64,
    pub window: Window,
    /// Guard threshold δ for |I_n|.
    pub delta: f64,
    /// Power q of the large-s basis s^q (1+s²)^{-(q+a)/2}.
    pub tail_power: u32,
    /// Number of basis terms a = 1..=tail_terms.
    pub tail_terms: usize,
    /// The tail fit uses s ≥ s_max / tail_fit_ratio.
    pub tail_fit_ratio: f64,
    /// Degree + 1 of the small-λ model Σ c_q λ^q e^{-(λ/c)²}.
    pub head_terms: usize,
    /// Number of leading λ samples used for the head fit.
    pub head_fit: usize,
    /// c = λ_max / head_scale_div.
    pub head_scale_div: f64,
}

impl Default for EquidistantInvertOptions {
    fn default() -> Self {
        Self {
            zeta_offset: 1.0,
            xi_re: 0.5,
            omega: 150.0,
            h: 0.05,
            window: Window::Tukey,
            delta: 1e-10,
            tail_power: 8,
            tail_terms: 4,
            tail_fit_ratio: 10.0,
            head_terms: 3,
            head_fit: 8,
            head_scale_div: 6.0,
        }
    }
}

impl EquidistantInvertOptions {
    pub fn zeta_contour(&self, n: i64) -> Result<Contour> {
        Contour::new(n_prime(n) as f64 + self.zeta_offset, self.omega, self.h)
    }

    pub fn xi_contour(&self) -> Result<Contour> {
        Contour::new(self.xi_re, self.omega, self.h)
    }

    fn check(&self, n: i64) -> Result<()> {
        if !(self.xi_re > 0.0 && self.xi_re < 1.0) {
            return validation(format!("Re ξ = {} must lie in (0, 1)", self.xi_re));
        }
        if !(self.zeta_offset > 0.0) {
            return validation(format!("Re ζ must exceed n′ = {} for n = {n}", n_prime(n)));
        }
        if self.tail_terms == 0 || self.head_terms == 0 || self.head_fit < self.head_terms {
            return validation("tail and head models need at least one term and enough fit samples");
        }
        Ok(())
    }
}

/// Output grid in (r, τ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub r: Vec<f64>,
    pub tau: Vec<f64>,
}

impl FieldGrid {
    pub fn uniform(b: &SupportBox, n_r: usize, n_tau: usize) -> Self {
        let lin = |a: f64, c: f64, n: usize| -> Vec<f64> {
            (0..n).map(|i| a + (c - a) * i as f64 / (n.max(2) - 1) as f64).collect()
        };
        Self {
            r: lin(b.r_min.max(1e-6), b.r_max, n_r),
            tau: lin(b.tau_min.max(1e-6), b.tau_max, n_tau),
        }
    }
}

/// Moore–Penrose pseudo-inverse of a tall real design matrix.
fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().pseudo_inverse(1e-14).expect("pseudo-inverse with non-negative ε")
}

/// Cached ln Γ tables for the closed-form kernel on the contour product grid.
struct KernelTable {
    n: i64,
    len: usize,
    /// lnΓ(a_k(ξ_l)) per (k, l).
    ln_a: Vec<Vec<Complex64>>,
    /// lnΓ((ζ_j + shift)/2) per j.
    ln_ab: Vec<Complex64>,
    /// lnΓ(b_k) per (k, j + l).
    ln_b: Vec<Vec<Complex64>>,
    coef: Vec<Complex64>,
}

impl KernelTable {
    fn new(n: i64, zc: &Contour, xc: &Contour) -> Self {
        let m = n.unsigned_abs();
        let (unit, shift) = if n >= 0 { (I, 0.0) } else { (-I, 2.0 * m as f64) };
        let len = zc.len();
        let mut coef = Vec::new();
        let mut ik = Complex64::new(1.0, 0.0);
        for k in 0..=m {
            coef.push(ik * binomial(m, k) * 0.5);
            ik *= unit;
        }
        let ln_a = (0..=m)
            .map(|k| (0..len).map(|l| ln_gamma((k as f64 + 1.0 - xc.s(l)) * 0.5)).collect())
            .collect();
        let ln_ab = (0..len).map(|j| ln_gamma((zc.s(j) + shift) * 0.5)).collect();
        // ζ_j + ξ_l has imaginary part (j + l - (len - 1)) h.
        let ln_b = (0..=m)
            .map(|k| {
                (0..2 * len - 1)
                    .map(|q| {
                        let im = (q as f64 - (len - 1) as f64) * zc.h;
                        let z = Complex64::new(zc.rho + xc.rho + shift - k as f64 - 1.0, im);
                        ln_gamma(z * 0.5)
                    })
                    .collect()
            })
            .collect();
        Self {
            n,
            len,
            ln_a,
            ln_ab,
            ln_b,
            coef,
        }
    }

    #[inline]
    fn eval(&self, j: usize, l: usize) -> Complex64 {
        let mut acc = ZERO;
        for (k, c) in self.coef.iter().enumerate() {
            acc += *c * (self.ln_a[k][l] + self.ln_b[k][j + l] - self.ln_ab[j]).exp();
        }
        acc
    }
}

/// Per-mode pipeline: G_n → G_n* → M₂ → (lazy) U_n.
#[derive(Debug, Clone)]
pub struct ModePipelineState {
    pub n: i64,
    pub zeta: Contour,
    pub xi: Contour,
    pub lambdas: Vec<f64>,
    pub s: Vec<f64>,
    /// G_n(λ, arctan s), `[iλ * n_s + j]`.
    pub g_n: Vec<Complex64>,
    /// G_n*(λ, s) = G_n / √(1+s²).
    pub g_star: Vec<Complex64>,
    /// M₂[G_n*](λ_i, ξ_l), stored per contour column: `[l * n_λ + i]`.
    pub m2: Vec<Complex64>,
    opts: EquidistantInvertOptions,
    head_pinv: DMatrix<f64>,
    head_scale: f64,
}

impl std::fmt::Debug for KernelTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelTable").field("n", &self.n).field("len", &self.len).finish()
    }
}

/// Builds G_n*, its s-Mellin transform and the data needed for the λ-Mellin step.
pub fn mode_to_u(
    mode: &AngularMode,
    lambdas: &[f64],
    s: &[f64],
    opts: &EquidistantInvertOptions,
) -> Result<ModePipelineState> {
    let n = mode.n;
    opts.check(n)?;
    let nl = lambdas.len();
    let ns = s.len();
    if mode.values.len() != nl * ns {
        return validation("mode_to_U: mode size does not match the λ × s grid");
    }
    if nl < opts.head_fit || ns < 8 {
        return validation("mode_to_U: λ or s grid too small");
    }
    check_geometric(lambdas, "λ")?;
    check_geometric(s, "s")?;
    let zeta = opts.zeta_contour(n)?;
    let xi = opts.xi_contour()?;
    let nc = xi.len();

    let g_star: Vec<Complex64> = mode
        .values
        .iter()
        .enumerate()
        .map(|(idx, v)| *v / (1.0 + s[idx % ns] * s[idx % ns]).sqrt())
        .collect();

    // Large-s model s^q (1+s²)^{-(q+a)/2} with analytic Mellin transforms.
    let q = opts.tail_power as f64;
    let basis = |sv: f64, a: usize| sv.powf(q) / (1.0 + sv * sv).powf((q + a as f64) / 2.0);
    let s_max = s[ns - 1];
    let fit_idx: Vec<usize> = (0..ns).filter(|&j| s[j] >= s_max / opts.tail_fit_ratio).collect();
    let design = DMatrix::from_fn(fit_idx.len(), opts.tail_terms, |r, c| basis(s[fit_idx[r]], c + 1));
    let tail_pinv = pinv(&design);
    let tail_mellin: Vec<Vec<Complex64>> = (1..=opts.tail_terms)
        .map(|a| {
            (0..nc)
                .map(|l| {
                    let x = xi.s(l);
                    (ln_gamma((x + q) * 0.5) + ln_gamma((a as f64 - x) * 0.5) - ln_gamma(Complex64::new((q + a as f64) * 0.5, 0.0))).exp() * 0.5
                })
                .collect()
        })
        .collect();
    let s0 = s[0];
    let low_tail: Vec<Complex64> = (0..nc)
        .map(|l| {
            let x = xi.s(l);
            (x * s0.ln()).exp() / x
        })
        .collect();
    let ys0 = s0.ln();
    let dys = (s[ns - 1].ln() - ys0) / (ns - 1) as f64;
    let czt_s = LogCzt::new(ns, dys, xi.h, nc);

    let rows: Vec<Vec<Complex64>> = (0..nl)
        .into_par_iter()
        .map(|i| {
            let row = &g_star[i * ns..(i + 1) * ns];
            if row.iter().all(|v| v.re == 0.0 && v.im == 0.0) {
                return vec![ZERO; nc];
            }
            let mut coef = vec![ZERO; opts.tail_terms];
            for (a, c) in coef.iter_mut().enumerate() {
                for (r, &j) in fit_idx.iter().enumerate() {
                    *c += row[j] * tail_pinv[(a, r)];
                }
            }
            let resid: Vec<Complex64> = (0..ns)
                .map(|j| {
                    let model: Complex64 = coef.iter().enumerate().map(|(a, c)| *c * basis(s[j], a + 1)).sum();
                    row[j] - model
                })
                .collect();
            let mut out = czt_s.apply(ys0, &resid, xi.rho, xi.t(0));
            for (l, o) in out.iter_mut().enumerate() {
                for (a, c) in coef.iter().enumerate() {
                    *o += *c * tail_mellin[a][l];
                }
                *o += row[0] * low_tail[l];
            }
            out
        })
        .collect();
    let mut m2 = vec![ZERO; nc * nl];
    for (i, row) in rows.iter().enumerate() {
        for (l, v) in row.iter().enumerate() {
            m2[l * nl + i] = *v;
        }
    }

    let head_scale = lambdas[nl - 1] / opts.head_scale_div;
    let head_design = DMatrix::from_fn(opts.head_fit, opts.head_terms, |r, c| lambdas[r].powi(c as i32));
    Ok(ModePipelineState {
        n,
        zeta,
        xi,
        lambdas: lambdas.to_vec(),
        s: s.to_vec(),
        g_n: mode.values.clone(),
        g_star,
        m2,
        opts: *opts,
        head_pinv: pinv(&head_design),
        head_scale,
    })
}

fn check_geometric(v: &[f64], name: &str) -> Result<()> {
    if v.len() < 2 || !(v[0] > 0.0) {
        return validation(format!("{name} grid must be positive with at least two points"));
    }
    let r = (v[1] / v[0]).ln();
    for w in v.windows(2) {
        if ((w[1] / w[0]).ln() - r).abs() > 1e-9 * r.abs().max(1.0) {
            return validation(format!("{name} grid must be geometric"));
        }
    }
    Ok(())
}

/// U_n columns and regularization statistics.
pub struct UOperator<'a> {
    state: &'a ModePipelineState,
    czt: LogCzt,
    kernel: KernelTable,
    gauss: Vec<f64>,
    x0: f64,
}

impl std::fmt::Debug for UOperator<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UOperator").field("n", &self.state.n).finish()
    }
}

impl ModePipelineState {
    pub fn u_operator(&self) -> UOperator<'_> {
        let nl = self.lambdas.len();
        let x0 = self.lambdas[0].ln();
        let dx = (self.lambdas[nl - 1].ln() - x0) / (nl - 1) as f64;
        let c = self.head_scale;
        UOperator {
            state: self,
            czt: LogCzt::new(nl, dx, self.zeta.h, self.zeta.len()),
            kernel: KernelTable::new(self.n, &self.zeta, &self.xi),
            gauss: self.lambdas.iter().map(|l| (-(l / c) * (l / c)).exp()).collect(),
            x0,
        }
    }

    /// M₂[G_n*](λ_i, ξ_l).
    pub fn m2_at(&self, i: usize, l: usize) -> Complex64 {
        self.m2[l * self.lambdas.len() + i]
    }
}

impl UOperator<'_> {
    /// M₁[G_n**](ζ_j, ξ_l) for all j, with G_n** = λ^{ξ-n-1} M₂[G_n*].
    pub fn m1_column(&self, l: usize) -> Vec<Complex64> {
        let st = self.state;
        let nl = st.lambdas.len();
        let col = &st.m2[l * nl..(l + 1) * nl];
        let nz = st.zeta.len();
        if col.iter().all(|v| v.re == 0.0 && v.im == 0.0) {
            return vec![ZERO; nz];
        }
        let o = &st.opts;
        // Small-λ model Σ c_q λ^q e^{-(λ/c)²}, fitted on the first samples.
        let mut cq = vec![ZERO; o.head_terms];
        for (q, c) in cq.iter_mut().enumerate() {
            for (r, v) in col.iter().take(o.head_fit).enumerate() {
                *c += v * st.head_pinv[(q, r)];
            }
        }
        let resid: Vec<Complex64> = (0..nl)
            .map(|i| {
                let lam = st.lambdas[i];
                let mut model = ZERO;
                let mut p = 1.0;
                for c in &cq {
                    model += *c * p;
                    p *= lam;
                }
                col[i] - model * self.gauss[i]
            })
            .collect();
        let shift = -(st.n as f64) - 1.0;
        let rho = st.zeta.rho + st.xi.rho + shift;
        let t0 = st.zeta.t(0) + st.xi.t(l);
        let mut out = self.czt.apply(self.x0, &resid, rho, t0);
        let c = st.head_scale;
        for (j, v) in out.iter_mut().enumerate() {
            let zp = st.zeta.s(j) + st.xi.s(l) + shift;
            for (q, cqq) in cq.iter().enumerate() {
                let e = (zp + q as f64) * 0.5;
                *v += *cqq * 0.5 * (c.ln() * (zp + q as f64) + ln_gamma(e)).exp();
            }
        }
        out
    }

    /// I_n(ζ_j, ξ_l) from the cached closed form.
    pub fn kernel(&self, j: usize, l: usize) -> Complex64 {
        self.kernel.eval(j, l)
    }

    /// U_n(ζ_j, ξ_l) for all j, with the number of guarded divisions.
    pub fn column(&self, l: usize) -> (Vec<Complex64>, usize) {
        let m1 = self.m1_column(l);
        let mut hits = 0;
        let delta = self.state.opts.delta;
        let u = m1
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let (q, hit) = regularized_divide(*v, self.kernel(j, l), delta);
                hits += hit as usize;
                q
            })
            .collect();
        (u, hits)
    }

    /// U_n on a sub-grid of contour indices.
    pub fn samples(&self, js: &[usize], ls: &[usize]) -> Vec<Vec<Complex64>> {
        ls.iter()
            .map(|&l| {
                let (c, _) = self.column(l);
                js.iter().map(|&j| c[j]).collect()
            })
            .collect()
    }
}

/// Reconstructed mode on a (r, τ) grid, `values[ir * n_τ + jτ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveredMode {
    pub n: i64,
    pub grid: FieldGrid,
    /// g_n = r^{-n} f_n.
    pub g: Vec<Complex64>,
    pub f: Vec<Complex64>,
    pub diagnostics: ModeDiagnostics,
}

/// Contours, guard hits and contour-end truncation estimates for one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeDiagnostics {
    pub zeta: Contour,
    pub xi: Contour,
    pub regularization_hits: usize,
    /// max |U_n| on the outermost ζ and ξ nodes relative to max |U_n|.
    pub truncation_ratio: f64,
}

/// f_n(r, τ) = r^n M₂⁻¹[M₁⁻¹[U_n]](r, τ), with the ζ inversion streamed per ξ column.
pub fn recover_mode(state: &ModePipelineState, grid: &FieldGrid) -> Result<RecoveredMode> {
    if grid.r.iter().any(|r| !(*r > 0.0)) || grid.tau.iter().any(|t| !(*t > 0.0)) {
        return validation("recover_mode: output grid must have r > 0 and τ > 0");
    }
    let op = state.u_operator();
    let nz = state.zeta.len();
    let nx = state.xi.len();
    let wz = inverse_weights(&state.zeta, state.opts.window);
    let wx = inverse_weights(&state.xi, state.opts.window);
    let nr = grid.r.len();
    let nt = grid.tau.len();
    let rz: Vec<Vec<Complex64>> = grid
        .r
        .iter()
        .map(|r| {
            let lr = r.ln();
            (0..nz)
                .map(|j| (-state.zeta.s(j) * lr).exp() * wz[j])
                .collect()
        })
        .collect();
    let cols: Vec<(Vec<Complex64>, usize, f64, f64)> = (0..nx)
        .into_par_iter()
        .map(|l| {
            let (u, hits) = op.column(l);
            let v: Vec<Complex64> = rz
                .iter()
                .map(|row| row.iter().zip(&u).map(|(a, b)| a * b).sum())
                .collect();
            let umax = u.iter().map(|x| x.norm()).fold(0.0, f64::max);
            let edge = if l == 0 || l == nx - 1 {
                umax
            } else {
                u[0].norm().max(u[nz - 1].norm())
            };
            (v, hits, umax, edge)
        })
        .collect();
    let hits = cols.iter().map(|c| c.1).sum();
    let umax = cols.iter().map(|c| c.2).fold(0.0, f64::max);
    let edge = cols.iter().map(|c| c.3).fold(0.0, f64::max);
    let tx: Vec<Vec<Complex64>> = grid
        .tau
        .iter()
        .map(|t| {
            let lt = t.ln();
            (0..nx).map(|l| (-state.xi.s(l) * lt).exp() * wx[l]).collect()
        })
        .collect();
    let mut g = vec![ZERO; nr * nt];
    for a in 0..nr {
        for (b, trow) in tx.iter().enumerate() {
            let mut acc = ZERO;
            for (l, c) in cols.iter().enumerate() {
                acc += c.0[a] * trow[l];
            }
            g[a * nt + b] = acc;
        }
    }
    let f = g
        .iter()
        .enumerate()
        .map(|(idx, v)| *v * grid.r[idx / nt].powi(state.n as i32))
        .collect();
    Ok(RecoveredMode {
        n: state.n,
        grid: grid.clone(),
        g,
        f,
        diagnostics: ModeDiagnostics {
            zeta: state.zeta,
            xi: state.xi,
            regularization_hits: hits,
            truncation_ratio: if umax > 0.0 { edge / umax } else { 0.0 },
        },
    })
}

/// Full pipeline for the listed modes.
pub fn invert_equidistant(
    sino: &EquidistantSinogram,
    modes: &[i64],
    grid: &FieldGrid,
    opts: &EquidistantInvertOptions,
) -> Result<Vec<RecoveredMode>> {
    let n_max = modes.iter().map(|n| n.unsigned_abs() as usize).max().unwrap_or(0);
    let angular = angular_modes(sino, n_max)?;
    modes
        .iter()
        .map(|&n| {
            let mode = angular.iter().find(|m| m.n == n).expect("mode within n_max");
            let state = mode_to_u(mode, &sino.grid.lambdas, &sino.grid.s, opts)?;
            recover_mode(&state, grid)
        })
        .collect()
}

/// Relative L2 and L∞ errors of a field against a reference.
pub fn field_errors(got: &[Complex64], truth: &[Complex64]) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut linf = 0.0f64;
    let mut peak = 0.0f64;
    for (a, b) in got.iter().zip(truth) {
        num += (a - b).norm_sqr();
        den += b.norm_sqr();
        linf = linf.max((a - b).norm());
        peak = peak.max(b.norm());
    }
    let l2 = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    let li = if peak > 0.0 { linf / peak } else { linf };
    (l2, li)
}

/// Kernel closed form reused from the cache at one contour point, for tests.
pub fn cached_kernel(n: i64, zeta: &Contour, xi: &Contour, j: usize, l: usize) -> Complex64 {
    KernelTable::new(n, zeta, xi).eval(j, l)
}

