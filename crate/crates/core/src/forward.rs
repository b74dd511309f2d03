//! Forward transforms: integrals of phantoms over the three line and plane families.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Error, Result};
use crate::geometry::{sigma_plane, AffinePlane, AnchorSet, ParamLine, Vector};
use crate::phantoms::{EquidistantPhantom, PencilPhantom, RadialProfile, TangentPhantom};
use crate::quad::{composite_nodes, GaussLegendre};
use crate::rotations::{haar_quadrature, HaarQuadrature};
use crate::specfun::spherical_harmonic_unchecked;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Parameter window [t_min, t_max] of a line integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub t_min: f64,
    pub t_max: f64,
}

impl Truncation {
    pub fn symmetric(t: f64) -> Self {
        Self { t_min: -t, t_max: t }
    }

    /// Chord of `line` inside the ball of radius `radius` about the origin, widened by 10%.
    /// `None` when the line misses the ball.
    pub fn for_ball(line: &ParamLine, radius: f64) -> Option<Self> {
        let d2: f64 = line.direction.iter().map(|v| v * v).sum();
        let t0 = line.closest_parameter();
        let c = line.closest_point();
        let dist2: f64 = c.iter().map(|v| v * v).sum();
        if dist2 >= radius * radius {
            return None;
        }
        let half = ((radius * radius - dist2) / d2).sqrt() * 1.1;
        Some(Self {
            t_min: t0 - half,
            t_max: t0 + half,
        })
    }
}

/// Composite Gauss–Legendre integral of `f` along `line` over the truncation window.
///
/// The tail check evaluates `f` at both window ends; a nonzero value there means the
/// window does not cover the support.
pub fn line_integral<F: Fn([f64; 3]) -> Complex64>(
    f: F,
    line: &ParamLine,
    trunc: Truncation,
    panels: usize,
    nodes: usize,
) -> Result<Complex64> {
    if !(trunc.t_max > trunc.t_min) {
        return validation("line_integral: empty truncation window");
    }
    let speed = line.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ends = f(line.at(trunc.t_min)).norm() + f(line.at(trunc.t_max)).norm();
    if ends > 1e-10 {
        return Err(Error::Numeric(format!(
            "line_integral: integrand is {ends:.3e} at the truncation ends"
        )));
    }
    let gl = GaussLegendre::cached(nodes.max(1));
    let v = gl.composite(trunc.t_min, trunc.t_max, panels.max(1), |t| f(line.at(t)));
    Ok(v * speed)
}

/// Integral of `f` along the line over explicit breakpoints in its parameter.
pub fn line_integral_on<F: Fn([f64; 3]) -> Complex64>(f: F, line: &ParamLine, breaks: &[f64], nodes: usize) -> Complex64 {
    let speed = line.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (ts, ws) = composite_nodes(breaks, nodes);
    let mut acc = ZERO;
    for (t, w) in ts.iter().zip(&ws) {
        acc += f(line.at(*t)) * *w;
    }
    acc * speed
}

/// Quadrature resolution shared by the forward operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineQuadrature {
    pub panels: usize,
    pub nodes: usize,
}

impl Default for LineQuadrature {
    fn default() -> Self {
        Self { panels: 6, nodes: 24 }
    }
}

impl LineQuadrature {
    pub fn doubled(&self) -> Self {
        Self {
            panels: self.panels * 2,
            nodes: self.nodes,
        }
    }
}

/// Samples G(A, λ) on Haar nodes × λ grid. `values[node * lambdas.len() + j]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TangentSinogram {
    pub lambdas: Vec<f64>,
    pub quadrature: HaarQuadrature,
    pub values: Vec<Complex64>,
}

impl TangentSinogram {
    pub fn get(&self, node: usize, j: usize) -> Complex64 {
        self.values[node * self.lambdas.len() + j]
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &TangentSinogram) -> Result<Self> {
        if self.values.len() != other.values.len() || self.lambdas != other.lambdas {
            return validation("tangent sinograms have different grids");
        }
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a += *b;
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Gauss–Legendre nodes in the tangent angle β, where |x| = 1/cos β along a tangent
/// line. Panels follow the radial supports of the modes, mirrored to β < 0.
fn tangent_nodes(phantom: &TangentPhantom, quad: LineQuadrature) -> (Vec<f64>, Vec<f64>) {
    let mut pieces: Vec<(f64, f64)> = phantom
        .modes
        .iter()
        .map(|m| {
            let (lo, hi) = match &m.profile {
                RadialProfile::Trig { .. } => (1.0, f64::INFINITY),
                RadialProfile::Bump { bump, .. } => (bump.lo().max(1.0), bump.hi()),
                RadialProfile::Sampled { grid, .. } => (grid[0], *grid.last().expect("sampled grid")),
            };
            let b_hi = if hi.is_finite() { (1.0 / hi).acos() } else { 0.5 * PI };
            ((1.0 / lo).acos(), b_hi)
        })
        .collect();
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    // Overlapping supports merge into one run that keeps every endpoint as a break.
    let mut merged: Vec<(f64, Vec<f64>)> = Vec::new();
    for (a, b) in pieces {
        match merged.last_mut() {
            Some((hi, ends)) if a <= *hi => {
                *hi = hi.max(b);
                ends.extend([a, b]);
            }
            _ => merged.push((b, vec![a, b])),
        }
    }
    let mut breaks = Vec::new();
    for (_, mut ends) in merged {
        ends.sort_by(f64::total_cmp);
        ends.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
        breaks.push(f64::NAN);
        breaks.push(ends[0]);
        for w in ends.windows(2) {
            breaks.extend((1..=quad.panels).map(|j| w[0] + (w[1] - w[0]) * j as f64 / quad.panels as f64));
        }
    }
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for run in breaks.split(|v| v.is_nan()).filter(|r| r.len() > 1) {
        let (x, w) = composite_nodes(run, quad.nodes);
        for (xi, wi) in x.iter().zip(&w) {
            xs.push(*xi);
            ws.push(*wi);
            xs.push(-*xi);
            ws.push(*wi);
        }
    }
    (xs, ws)
}

/// Integral of the rotated phantom along one ruling of the cone C_{λe₃}.
///
/// Uses the tangent angle β along the line: x = p₀ + tan β·d with |p₀| = 1, so that
/// f(x) ds = g(β) Y(ω(β)) dβ with ω = cos β·p₀ + sin β·d, bounded up to |β| = π/2.
fn ruling_integral(
    phantom: &TangentPhantom,
    rot: &crate::rotations::EulerRotation,
    line: &ParamLine,
    betas: &[f64],
    weights: &[f64],
) -> Complex64 {
    let p0 = line.closest_point();
    let d = line.direction;
    let mut acc = ZERO;
    for (b, w) in betas.iter().zip(weights) {
        let (sb, cb) = b.sin_cos();
        let om = [cb * p0[0] + sb * d[0], cb * p0[1] + sb * d[1], cb * p0[2] + sb * d[2]];
        let om = rot.apply_inverse(om);
        let mut v = ZERO;
        for m in &phantom.modes {
            let g = m.g(*b);
            if g != 0.0 {
                v += spherical_harmonic_unchecked(m.m, m.k, om) * g;
            }
        }
        acc += v * *w;
    }
    acc
}

/// G(A, λ) = ∫_{-π}^{π} ∫ f(A⁻¹x(φ, s)) ds dφ over the rulings of C_{λe₃} (arclength s).
pub fn tangent_value(
    phantom: &TangentPhantom,
    rot: &crate::rotations::EulerRotation,
    lambda: f64,
    n_phi: usize,
    quad: LineQuadrature,
) -> Result<Complex64> {
    let (betas, weights) = tangent_nodes(phantom, quad);
    tangent_value_with(phantom, rot, lambda, n_phi, &betas, &weights)
}

fn tangent_value_with(
    phantom: &TangentPhantom,
    rot: &crate::rotations::EulerRotation,
    lambda: f64,
    n_phi: usize,
    betas: &[f64],
    weights: &[f64],
) -> Result<Complex64> {
    let mut acc = ZERO;
    for j in 0..n_phi {
        let phi = -PI + 2.0 * PI * j as f64 / n_phi as f64;
        let line = ParamLine::tangent_ruling(lambda, phi)?;
        acc += ruling_integral(phantom, rot, &line, betas, weights);
    }
    Ok(acc * (2.0 * PI / n_phi as f64))
}

/// λ = 1/cos α with α uniform on [0, (π/2)(1 - 1/n)].
pub fn tangent_lambda_grid(n: usize) -> Vec<f64> {
    let top = 0.5 * PI * (1.0 - 1.0 / n.max(1) as f64);
    (0..n)
        .map(|j| 1.0 / (top * j as f64 / (n.max(2) - 1) as f64).cos())
        .collect()
}

/// Samples the tangent-line data on the Haar nodes of band limit `l`.
pub fn forward_tangent(phantom: &TangentPhantom, lambdas: &[f64], l: usize) -> Result<TangentSinogram> {
    forward_tangent_with(phantom, lambdas, l, LineQuadrature { panels: 4, nodes: 24 })
}

pub fn forward_tangent_with(
    phantom: &TangentPhantom,
    lambdas: &[f64],
    l: usize,
    quad: LineQuadrature,
) -> Result<TangentSinogram> {
    if let Some(bad) = lambdas.iter().find(|v| !(**v >= 1.0)) {
        return domain(format!("forward_tangent: λ = {bad} is below 1"));
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return validation("forward_tangent: λ grid must be strictly increasing");
    }
    let quadrature = haar_quadrature(l)?;
    let n_phi = 2 * l + 2;
    let nl = lambdas.len();
    let (betas, weights) = tangent_nodes(phantom, quad);
    let values: Vec<Complex64> = if phantom.modes.is_empty() {
        vec![ZERO; quadrature.len() * nl]
    } else {
        let rows: Vec<Vec<Complex64>> = quadrature
            .nodes
            .par_iter()
            .map(|rot| {
                lambdas
                    .iter()
                    .map(|&lam| tangent_value_with(phantom, rot, lam, n_phi, &betas, &weights))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        rows.into_iter().flatten().collect()
    };
    Ok(TangentSinogram {
        lambdas: lambdas.to_vec(),
        quadrature,
        values,
    })
}

/// Grids of the equidistant family: λ ≥ 0, θ = arctan s, φ uniform on [-π, π).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquidistantGrid {
    pub lambdas: Vec<f64>,
    pub s: Vec<f64>,
    pub n_phi: usize,
}

/// Geometric grid of `n` points on [a, b].
pub fn geometric_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let la = a.ln();
    let step = (b.ln() - la) / (n - 1) as f64;
    (0..n).map(|i| (la + step * i as f64).exp()).collect()
}

impl EquidistantGrid {
    /// λ geometric on [1e-4, λ_max], s geometric on [1e-3, 1e3].
    pub fn standard(lambda_max: f64, n_lambda: usize, n_s: usize, n_phi: usize) -> Self {
        Self {
            lambdas: geometric_grid(1e-4, lambda_max, n_lambda),
            s: geometric_grid(1e-3, 1e3, n_s),
            n_phi,
        }
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.s.iter().map(|s| s.atan()).collect()
    }

    pub fn phis(&self) -> Vec<f64> {
        (0..self.n_phi)
            .map(|j| -PI + 2.0 * PI * j as f64 / self.n_phi as f64)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.lambdas.len() * self.s.len() * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// G(λ, θ, φ) on an [`EquidistantGrid`], indexed `[(iλ * n_θ + jθ) * n_φ + kφ]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquidistantSinogram {
    pub grid: EquidistantGrid,
    pub values: Vec<Complex64>,
}

impl EquidistantSinogram {
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.grid.s.len() + j) * self.grid.n_phi + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.values[self.index(i, j, k)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Parameter intervals on l_{λ,θ,φ} where the mode can be nonzero.
fn equidistant_support(
    mode: &crate::phantoms::EquidistantMode,
    lambda: f64,
    theta: f64,
) -> Vec<(f64, f64)> {
    let (st, ct) = theta.sin_cos();
    let r0 = mode.radial.lo().max(0.0);
    let r1 = mode.radial.hi();
    if lambda >= r1 {
        return Vec::new();
    }
    // Radial condition: |t| cos θ ∈ [a, b].
    let a = (r0 * r0 - lambda * lambda).max(0.0).sqrt();
    let b = (r1 * r1 - lambda * lambda).sqrt();
    let radial: Vec<(f64, f64)> = if ct <= 1e-300 {
        vec![(f64::NEG_INFINITY, f64::INFINITY)]
    } else if a == 0.0 {
        vec![(-b / ct, b / ct)]
    } else {
        vec![(-b / ct, -a / ct), (a / ct, b / ct)]
    };
    // Axial condition: τ = t sin θ inside the τ support.
    let taus: Vec<(f64, f64)> = if mode.odd_mirror {
        vec![(-mode.axial.hi(), -mode.axial.lo()), (mode.axial.lo(), mode.axial.hi())]
    } else {
        vec![(mode.axial.lo(), mode.axial.hi())]
    };
    let axial: Vec<(f64, f64)> = if st.abs() < 1e-300 {
        if taus.iter().any(|(lo, hi)| *lo < 0.0 && *hi > 0.0) {
            vec![(f64::NEG_INFINITY, f64::INFINITY)]
        } else {
            Vec::new()
        }
    } else {
        taus.iter()
            .map(|(lo, hi)| {
                let (x, y) = (lo / st, hi / st);
                if x < y {
                    (x, y)
                } else {
                    (y, x)
                }
            })
            .collect()
    };
    let mut out = Vec::new();
    for r in &radial {
        for t in &axial {
            let lo = r.0.max(t.0);
            let hi = r.1.min(t.1);
            if hi > lo && lo.is_finite() && hi.is_finite() {
                out.push((lo, hi));
            }
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

/// Per-mode integrals ∫ f_n(r(t), τ(t)) e^{in ψ(t)} dt along l_{λ,θ,0}, where
/// ψ(t) = atan2(t cos θ, λ) is the polar angle of the line point relative to φ.
/// The full line value is Σ_n e^{inφ} times these, since rotating the line by φ
/// about e₃ multiplies each mode by e^{inφ}.
pub fn equidistant_mode_integrals(
    phantom: &EquidistantPhantom,
    lambda: f64,
    theta: f64,
    quad: LineQuadrature,
) -> Vec<Complex64> {
    let (st, ct) = theta.sin_cos();
    let gl = GaussLegendre::cached(quad.nodes);
    phantom
        .modes
        .iter()
        .map(|mode| {
            let mut acc = ZERO;
            for (lo, hi) in equidistant_support(mode, lambda, theta) {
                let h = (hi - lo) / quad.panels as f64;
                for p in 0..quad.panels {
                    let a = lo + h * p as f64;
                    for (t, w) in gl.mapped(a, a + h) {
                        let x = t * ct;
                        let r = (lambda * lambda + x * x).sqrt();
                        let v = mode.profile(r, t * st);
                        if v.re == 0.0 && v.im == 0.0 {
                            continue;
                        }
                        let phase = if mode.n == 0 {
                            Complex64::new(1.0, 0.0)
                        } else {
                            Complex64::from_polar(1.0, mode.n as f64 * x.atan2(lambda))
                        };
                        acc += v * phase * w;
                    }
                }
            }
            acc
        })
        .collect()
}

/// G(λ, θ, φ) for a single line; any sign of θ.
pub fn equidistant_value(phantom: &EquidistantPhantom, lambda: f64, theta: f64, phi: f64, quad: LineQuadrature) -> Complex64 {
    let parts = equidistant_mode_integrals(phantom, lambda, theta, quad);
    phantom
        .modes
        .iter()
        .zip(parts)
        .map(|(m, v)| v * Complex64::from_polar(1.0, m.n as f64 * phi))
        .sum()
}

/// Direct evaluation of the phantom along l_{λ,θ,φ} with the generic line integrator.
pub fn equidistant_value_direct(
    phantom: &EquidistantPhantom,
    lambda: f64,
    theta: f64,
    phi: f64,
    quad: LineQuadrature,
) -> Result<Complex64> {
    let line = ParamLine::equidistant(lambda, theta, phi);
    let mut breaks: Vec<f64> = Vec::new();
    for m in &phantom.modes {
        for (a, b) in equidistant_support(m, lambda, theta) {
            breaks.push(a);
            breaks.push(b);
        }
    }
    if breaks.is_empty() {
        return Ok(ZERO);
    }
    breaks.sort_by(f64::total_cmp);
    let b = *breaks.last().expect("non-empty");
    let mut fine = Vec::new();
    for w in breaks.windows(2) {
        for j in 0..quad.panels {
            fine.push(w[0] + (w[1] - w[0]) * j as f64 / quad.panels as f64);
        }
    }
    fine.push(b);
    fine.dedup();
    Ok(line_integral_on(|x| phantom.eval(x), &line, &fine, quad.nodes))
}

pub fn forward_equidistant(phantom: &EquidistantPhantom, grid: &EquidistantGrid) -> Result<EquidistantSinogram> {
    forward_equidistant_with(phantom, grid, LineQuadrature::default())
}

pub fn forward_equidistant_with(
    phantom: &EquidistantPhantom,
    grid: &EquidistantGrid,
    quad: LineQuadrature,
) -> Result<EquidistantSinogram> {
    if grid.lambdas.iter().any(|l| !(*l >= 0.0)) {
        return validation("forward_equidistant: λ must be non-negative");
    }
    if grid.s.iter().any(|s| !(*s >= 0.0)) {
        return validation("forward_equidistant: s = tan θ must be non-negative");
    }
    if grid.n_phi == 0 {
        return validation("forward_equidistant: empty φ grid");
    }
    let thetas = grid.thetas();
    let phases: Vec<Vec<Complex64>> = phantom
        .modes
        .iter()
        .map(|m| {
            grid.phis()
                .iter()
                .map(|p| Complex64::from_polar(1.0, m.n as f64 * p))
                .collect()
        })
        .collect();
    let nt = thetas.len();
    let np = grid.n_phi;
    let rows: Vec<Vec<Complex64>> = grid
        .lambdas
        .par_iter()
        .map(|&lam| {
            let mut row = vec![ZERO; nt * np];
            for (j, &th) in thetas.iter().enumerate() {
                let parts = equidistant_mode_integrals(phantom, lam, th, quad);
                for (mi, v) in parts.iter().enumerate() {
                    if v.re == 0.0 && v.im == 0.0 {
                        continue;
                    }
                    for k in 0..np {
                        row[j * np + k] += *v * phases[mi][k];
                    }
                }
            }
            row
        })
        .collect();
    Ok(EquidistantSinogram {
        grid: grid.clone(),
        values: rows.into_iter().flatten().collect(),
    })
}

/// One pencil datum: x₀ and ∫_{Σ_{x₀}} f.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PencilSample {
    pub x0: Vec<f64>,
    pub value: f64,
}

/// ∫ over a k-ball in plane coordinates of a ball bump, by iterated Gauss–Legendre slicing.
fn ball_slice(depth: usize, k: usize, center: &[f64], rad2: f64, eval: &dyn Fn(&[f64]) -> f64, y: &mut Vec<f64>, gl: &GaussLegendre) -> f64 {
    if depth == k {
        return eval(y);
    }
    if rad2 <= 0.0 {
        return 0.0;
    }
    let r = rad2.sqrt();
    let c = center[depth];
    let mut acc = 0.0;
    for (x, w) in gl.mapped(c - r, c + r) {
        y.push(x);
        acc += w * ball_slice(depth + 1, k, center, rad2 - (x - c) * (x - c), eval, y, gl);
        y.pop();
    }
    acc
}

/// ∫_Σ f dm_Σ over a k-plane for a ball-bump phantom.
pub fn plane_integral(phantom: &PencilPhantom, plane: &AffinePlane, nodes: usize) -> f64 {
    let gl = GaussLegendre::cached(nodes);
    let k = plane.dim();
    let mut total = 0.0;
    for b in &phantom.bumps {
        let c = Vector::from_vec(b.center.clone());
        let coords = plane.coords(&c);
        let foot = plane.point(&coords);
        let d2 = (&foot - &c).norm_squared();
        let rad2 = b.radius * b.radius - d2;
        if rad2 <= 0.0 {
            continue;
        }
        let eval = |y: &[f64]| {
            let mut s2 = d2;
            for (a, cc) in y.iter().zip(&coords) {
                s2 += (a - cc) * (a - cc);
            }
            let q = 1.0 - s2 / (b.radius * b.radius);
            if q <= 0.0 {
                0.0
            } else {
                b.amplitude * q.powi(b.power as i32)
            }
        };
        let mut y = Vec::with_capacity(k);
        total += ball_slice(0, k, &coords, rad2, &eval, &mut y, &gl);
    }
    total
}

/// ∫_{Σ_{x₀}} f for one non-exceptional x₀.
pub fn pencil_value(phantom: &PencilPhantom, anchors: &AnchorSet, x0: &Vector, nodes: usize) -> Result<f64> {
    let plane = sigma_plane(x0, anchors)?;
    Ok(plane_integral(phantom, &plane, nodes))
}

/// Pencil data at a batch of points x₀.
pub fn forward_pencil(phantom: &PencilPhantom, anchors: &AnchorSet, x0s: &[Vector]) -> Result<Vec<PencilSample>> {
    forward_pencil_with(phantom, anchors, x0s, 32)
}

pub fn forward_pencil_with(
    phantom: &PencilPhantom,
    anchors: &AnchorSet,
    x0s: &[Vector],
    nodes: usize,
) -> Result<Vec<PencilSample>> {
    if phantom.dim != anchors.n() {
        return validation("forward_pencil: phantom and anchor dimensions differ");
    }
    x0s.par_iter()
        .map(|x0| {
            Ok(PencilSample {
                x0: x0.iter().copied().collect(),
                value: pencil_value(phantom, anchors, x0, nodes)?,
            })
        })
        .collect()
}
