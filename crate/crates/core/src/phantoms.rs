//! Synthetic phantoms with exactly known mode decompositions.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{validation, Error, Result};
use crate::interp::CubicSpline;
use crate::specfun::spherical_harmonic_unchecked;

/// Polynomial bump B(x) = (1 - u²)^p on |u| < 1, u = (x - c)/w. C^{p-1} at the rim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    #[serde(default = "default_power")]
    pub power: u32,
}

fn default_power() -> u32 {
    8
}

impl Bump {
    pub fn new(center: f64, width: f64) -> Result<Self> {
        Self::with_power(center, width, default_power())
    }

    pub fn with_power(center: f64, width: f64, power: u32) -> Result<Self> {
        if !(width > 0.0) || !center.is_finite() {
            return validation("bump: width must be positive and centre finite");
        }
        if power < 3 {
            return validation("bump: power below 3 is not C²");
        }
        Ok(Self { center, width, power })
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.width;
        let q = 1.0 - u * u;
        if q <= 0.0 {
            0.0
        } else {
            q.powi(self.power as i32)
        }
    }

    pub fn lo(&self) -> f64 {
        self.center - self.width
    }

    pub fn hi(&self) -> f64 {
        self.center + self.width
    }

    /// ∫ B dx = 2w·Π_{j=1..p} j/(j + 1/2).
    pub fn integral(&self) -> f64 {
        let prod: f64 = (1..=self.power).map(|j| j as f64 / (j as f64 + 0.5)).product();
        2.0 * self.width * prod
    }
}

/// Radial profile of a tangent-family mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialProfile {
    /// f(r) = g(arccos(1/r))/r² for r ≥ 1 with g(β) = Σ c_n e^{inβ}.
    Trig { coeffs: Vec<(i64, f64)> },
    /// Amplitude times a compact bump in r.
    Bump { amplitude: f64, bump: Bump },
    /// Tabulated values with clamped cubic interpolation, zero outside the grid.
    Sampled { grid: Vec<f64>, values: Vec<f64> },
}

impl RadialProfile {
    pub fn trig_g(coeffs: &[(i64, f64)], beta: f64) -> f64 {
        coeffs
            .iter()
            .map(|(n, c)| c * (*n as f64 * beta).cos())
            .sum()
    }

    fn spline(&self) -> Option<CubicSpline> {
        match self {
            RadialProfile::Sampled { grid, values } => {
                CubicSpline::clamped(grid.clone(), values.clone()).ok()
            }
            _ => None,
        }
    }

    /// Outer support radius, infinite for the trigonometric class.
    pub fn support(&self) -> f64 {
        match self {
            RadialProfile::Trig { .. } => f64::INFINITY,
            RadialProfile::Bump { bump, .. } => bump.hi(),
            RadialProfile::Sampled { grid, .. } => *grid.last().unwrap_or(&1.0),
        }
    }
}

/// One (m, k) mode of a tangent phantom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentMode {
    pub m: usize,
    pub k: i64,
    pub profile: RadialProfile,
    #[serde(skip)]
    spline: Option<CubicSpline>,
}

impl TangentMode {
    pub fn new(m: usize, k: i64, profile: RadialProfile) -> Result<Self> {
        if k.unsigned_abs() as usize > m {
            return validation(format!("tangent mode: |k| = {} exceeds m = {m}", k.abs()));
        }
        match &profile {
            RadialProfile::Trig { coeffs } => {
                for (n, _) in coeffs {
                    if n.unsigned_abs() as usize > m || (n - m as i64).rem_euclid(2) != 0 {
                        return validation(format!(
                            "coefficient index n = {n} is outside the recoverable mask {{|n| ≤ {m}, n ≡ {m} mod 2}}"
                        ));
                    }
                }
                for (n, c) in coeffs {
                    let partner = coeffs.iter().find(|(q, _)| *q == -n).map(|(_, v)| *v);
                    if partner.map_or(*n != 0 && *c != 0.0, |v| (v - c).abs() > 1e-14 * (1.0 + c.abs())) {
                        return validation(format!("coefficients must be even in n: c_{n} has no matching c_{}", -n));
                    }
                }
            }
            RadialProfile::Bump { bump, .. } => {
                if bump.lo() < 1.0 + 1e-9 {
                    return validation("tangent profile must vanish on [0, 1]");
                }
            }
            RadialProfile::Sampled { grid, values } => {
                if grid.len() != values.len() || grid.len() < 4 {
                    return validation("sampled profile: grid and values must match, at least 4 nodes");
                }
                if grid[0] < 1.0 {
                    return validation("sampled profile must vanish on [0, 1]");
                }
            }
        }
        let spline = profile.spline();
        Ok(Self { m, k, profile, spline })
    }

    /// f_{m,k}(r).
    pub fn radial(&self, r: f64) -> f64 {
        if r <= 1.0 {
            return 0.0;
        }
        match &self.profile {
            RadialProfile::Trig { coeffs } => {
                let beta = (1.0 / r).acos();
                RadialProfile::trig_g(coeffs, beta) / (r * r)
            }
            RadialProfile::Bump { amplitude, bump } => amplitude * bump.eval(r),
            RadialProfile::Sampled { grid, .. } => {
                if r < grid[0] || r > *grid.last().expect("non-empty grid") {
                    0.0
                } else {
                    self.spline.as_ref().map_or(0.0, |s| s.eval(r))
                }
            }
        }
    }

    /// g_{m,k}(β) = f_{m,k}(1/cos β)/cos²β on |β| < π/2, zero elsewhere.
    pub fn g(&self, beta: f64) -> f64 {
        let b = beta.abs();
        if b >= 0.5 * PI {
            return 0.0;
        }
        match &self.profile {
            RadialProfile::Trig { coeffs } => RadialProfile::trig_g(coeffs, b),
            _ => {
                let c = b.cos();
                self.radial(1.0 / c) / (c * c)
            }
        }
    }
}

/// Phantom Σ f_{m,k}(r) Y_k^m(ω) that vanishes inside the unit sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentPhantom {
    pub modes: Vec<TangentMode>,
}

impl TangentPhantom {
    pub fn new(modes: Vec<TangentMode>) -> Self {
        Self { modes }
    }

    pub fn zero() -> Self {
        Self { modes: Vec::new() }
    }

    /// Largest outer support radius across modes.
    pub fn support(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| m.profile.support())
            .fold(1.0, f64::max)
    }

    pub fn band_limit(&self) -> usize {
        self.modes.iter().map(|m| m.m).max().unwrap_or(0)
    }

    pub fn is_compact(&self) -> bool {
        self.support().is_finite()
    }

    pub fn eval(&self, x: [f64; 3]) -> Complex64 {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r <= 1.0 {
            return Complex64::new(0.0, 0.0);
        }
        let w = [x[0] / r, x[1] / r, x[2] / r];
        self.modes
            .iter()
            .map(|m| spherical_harmonic_unchecked(m.m, m.k, w) * m.radial(r))
            .sum()
    }

    /// Rebuilds cached splines after deserialization.
    pub fn rebuild(self) -> Result<Self> {
        let modes = self
            .modes
            .into_iter()
            .map(|m| TangentMode::new(m.m, m.k, m.profile))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { modes })
    }
}

/// Recoverable trigonometric-class phantom with a single (m, k) mode.
pub fn tangent_phantom_recoverable(m: usize, k: i64, coeffs: &[(i64, f64)]) -> Result<TangentPhantom> {
    let nonzero: Vec<(i64, f64)> = coeffs.iter().copied().filter(|(_, c)| *c != 0.0).collect();
    if nonzero.is_empty() {
        return Ok(TangentPhantom::zero());
    }
    Ok(TangentPhantom::new(vec![TangentMode::new(
        m,
        k,
        RadialProfile::Trig { coeffs: nonzero },
    )?]))
}

/// Compact tangent phantom with a single (m, k) bump mode.
pub fn tangent_phantom_compact(m: usize, k: i64, amplitude: f64, bump: Bump) -> Result<TangentPhantom> {
    Ok(TangentPhantom::new(vec![TangentMode::new(
        m,
        k,
        RadialProfile::Bump { amplitude, bump },
    )?]))
}

/// Mode f_n(r, τ) = a·r^{|n|}·B_r(r)·B_τ(τ) of an equidistant phantom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquidistantMode {
    pub n: i64,
    pub amplitude: Complex64,
    pub radial: Bump,
    pub axial: Bump,
    /// Replaces B_τ(τ) by B_τ(τ) - B_τ(-τ), giving a profile odd in x₃.
    #[serde(default)]
    pub odd_mirror: bool,
}

impl EquidistantMode {
    #[inline]
    pub fn profile(&self, r: f64, tau: f64) -> Complex64 {
        let ax = if self.odd_mirror {
            self.axial.eval(tau) - self.axial.eval(-tau)
        } else {
            self.axial.eval(tau)
        };
        if ax == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let rad = self.radial.eval(r);
        if rad == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.amplitude * (rad * ax * r.powi(self.n.unsigned_abs() as i32))
    }

    /// g_n = r^{-n} f_n.
    pub fn g(&self, r: f64, tau: f64) -> Complex64 {
        let f = self.profile(r, tau);
        if f.norm() == 0.0 {
            f
        } else {
            f * r.powi(-(self.n as i32))
        }
    }
}

/// Σ f_n(r, τ) e^{inφ} in cylindrical coordinates about e₃.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquidistantPhantom {
    pub modes: Vec<EquidistantMode>,
}

/// Axis-aligned support box in (r, τ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    pub r_min: f64,
    pub r_max: f64,
    pub tau_min: f64,
    pub tau_max: f64,
}

impl EquidistantPhantom {
    pub fn zero() -> Self {
        Self { modes: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        for m in &self.modes {
            if !m.odd_mirror && m.axial.lo() <= 0.0 {
                return validation(format!(
                    "equidistant phantom: τ support [{}, {}] must lie in τ > 0",
                    m.axial.lo(),
                    m.axial.hi()
                ));
            }
            if m.radial.lo() < 0.0 && m.n != 0 {
                // r^{|n|} keeps f_n = O(r^{|n|}) only on r ≥ 0.
            }
        }
        Ok(())
    }

    pub fn is_half_space(&self) -> bool {
        self.modes.iter().all(|m| !m.odd_mirror && m.axial.lo() > 0.0)
    }

    pub fn support_box(&self) -> SupportBox {
        let mut b = SupportBox {
            r_min: f64::INFINITY,
            r_max: 0.0,
            tau_min: f64::INFINITY,
            tau_max: f64::NEG_INFINITY,
        };
        for m in &self.modes {
            b.r_min = b.r_min.min(m.radial.lo().max(0.0));
            b.r_max = b.r_max.max(m.radial.hi());
            let (lo, hi) = if m.odd_mirror {
                (-m.axial.hi(), m.axial.hi())
            } else {
                (m.axial.lo(), m.axial.hi())
            };
            b.tau_min = b.tau_min.min(lo);
            b.tau_max = b.tau_max.max(hi);
        }
        if self.modes.is_empty() {
            b = SupportBox {
                r_min: 0.0,
                r_max: 1.0,
                tau_min: 0.0,
                tau_max: 1.0,
            };
        }
        b
    }

    pub fn max_mode(&self) -> i64 {
        self.modes.iter().map(|m| m.n.abs()).max().unwrap_or(0)
    }

    /// Σ_n over modes equal to n of f_n(r, τ).
    pub fn mode_profile(&self, n: i64, r: f64, tau: f64) -> Complex64 {
        self.modes
            .iter()
            .filter(|m| m.n == n)
            .map(|m| m.profile(r, tau))
            .sum()
    }

    pub fn eval(&self, x: [f64; 3]) -> Complex64 {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let phi = x[1].atan2(x[0]);
        self.modes
            .iter()
            .map(|m| m.profile(r, x[2]) * Complex64::from_polar(1.0, m.n as f64 * phi))
            .sum()
    }
}

/// Separable bump phantom f_n = r^{|n|} B(r; r_c, w_r) B(τ; τ_c, w_τ).
pub fn equidistant_phantom(n: i64, radial: Bump, axial: Bump) -> Result<EquidistantPhantom> {
    let p = EquidistantPhantom {
        modes: vec![EquidistantMode {
            n,
            amplitude: Complex64::new(1.0, 0.0),
            radial,
            axial,
            odd_mirror: false,
        }],
    };
    p.validate()?;
    Ok(p)
}

/// Real phantom with modes ±n sharing the profile: 2 f_n(r, τ) cos(nφ) for n ≠ 0.
pub fn equidistant_phantom_real(n: i64, radial: Bump, axial: Bump) -> Result<EquidistantPhantom> {
    let mut p = equidistant_phantom(n.abs(), radial, axial)?;
    if n != 0 {
        let mut m = p.modes[0];
        m.n = -n.abs();
        p.modes.push(m);
    }
    Ok(p)
}

/// Radial n = 0 profile odd in x₃, straddling the plane x₃ = 0.
pub fn equidistant_null_phantom(radial: Bump, axial: Bump) -> EquidistantPhantom {
    EquidistantPhantom {
        modes: vec![EquidistantMode {
            n: 0,
            amplitude: Complex64::new(1.0, 0.0),
            radial,
            axial,
            odd_mirror: true,
        }],
    }
}

/// Isotropic bump a·B(|x - c|; 0, w) in Rⁿ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallBump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
    #[serde(default = "default_power")]
    pub power: u32,
}

impl BallBump {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut d2 = 0.0;
        for (a, b) in x.iter().zip(&self.center) {
            d2 += (a - b) * (a - b);
        }
        let q = 1.0 - d2 / (self.radius * self.radius);
        if q <= 0.0 {
            0.0
        } else {
            self.amplitude * q.powi(self.power as i32)
        }
    }
}

/// Superposition of compactly supported ball bumps in Rⁿ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PencilPhantom {
    pub dim: usize,
    pub bumps: Vec<BallBump>,
}

impl PencilPhantom {
    pub fn new(dim: usize, bumps: Vec<BallBump>) -> Result<Self> {
        for b in &bumps {
            if b.center.len() != dim {
                return validation("pencil phantom: bump centre has the wrong dimension");
            }
            if !(b.radius > 0.0) {
                return validation("pencil phantom: bump radius must be positive");
            }
            if b.power < 3 {
                return validation("pencil phantom: bump power below 3 is not C²");
            }
        }
        Ok(Self { dim, bumps })
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, bumps: Vec::new() }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.bumps.iter().map(|b| b.eval(x)).sum()
    }

    /// Radius of a ball about the origin containing the support.
    pub fn support_radius(&self) -> f64 {
        self.bumps
            .iter()
            .map(|b| b.center.iter().map(|c| c * c).sum::<f64>().sqrt() + b.radius)
            .fold(0.0, f64::max)
    }
}

/// Tagged phantom document stored as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Phantom {
    Tangent(TangentPhantom),
    Equidistant(EquidistantPhantom),
    Pencil(PencilPhantom),
}

#[derive(Serialize, Deserialize)]
struct PhantomDoc {
    schema: u32,
    #[serde(flatten)]
    phantom: Phantom,
    #[serde(default)]
    support: Option<serde_json::Value>,
    #[serde(default)]
    decay: Option<serde_json::Value>,
}

impl Phantom {
    pub fn family(&self) -> &'static str {
        match self {
            Phantom::Tangent(_) => "tangent",
            Phantom::Equidistant(_) => "equidistant",
            Phantom::Pencil(_) => "pencil",
        }
    }

    /// Support and decay summary.
    pub fn summary(&self) -> (serde_json::Value, serde_json::Value) {
        use serde_json::json;
        match self {
            Phantom::Tangent(p) => {
                let s = p.support();
                if s.is_finite() {
                    (json!({"r_min": 1.0, "r_max": s}), json!("compact"))
                } else {
                    (json!({"r_min": 1.0, "r_max": null}), json!({"power": 2}))
                }
            }
            Phantom::Equidistant(p) => (serde_json::to_value(p.support_box()).unwrap_or_default(), json!("compact")),
            Phantom::Pencil(p) => (json!({"radius": p.support_radius()}), json!("compact")),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let (support, decay) = self.summary();
        let doc = PhantomDoc {
            schema: 1,
            phantom: self.clone(),
            support: Some(support),
            decay: Some(decay),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: PhantomDoc = serde_json::from_str(s)?;
        if doc.schema != 1 {
            return Err(Error::Format(format!("unsupported phantom schema {}", doc.schema)));
        }
        match doc.phantom {
            Phantom::Tangent(p) => Ok(Phantom::Tangent(p.rebuild()?)),
            Phantom::Equidistant(p) => {
                p.validate()?;
                Ok(Phantom::Equidistant(p))
            }
            Phantom::Pencil(p) => Ok(Phantom::Pencil(PencilPhantom::new(p.dim, p.bumps)?)),
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let s = serde_json::to_string(self).unwrap_or_default();
        let d = Sha256::digest(s.as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_peak_and_integral() {
        let b = Bump::new(1.0, 0.5).unwrap();
        assert_eq!(b.eval(1.0), 1.0);
        assert_eq!(b.eval(1.6), 0.0);
        let gl = crate::quad::GaussLegendre::new(40);
        let num = gl.integrate(0.5, 1.5, |x| b.eval(x));
        assert!((num - b.integral()).abs() < 1e-13);
    }

    #[test]
    fn recoverable_example() {
        let p = tangent_phantom_recoverable(1, 0, &[(1, 0.5), (-1, 0.5)]).unwrap();
        for &r in &[1.5, 3.0, 10.0] {
            assert!((p.modes[0].radial(r) - r.powi(-3)).abs() < 1e-15);
        }
        assert!(tangent_phantom_recoverable(0, 0, &[(2, 0.5), (-2, 0.5)]).is_err());
        assert!(tangent_phantom_recoverable(2, 0, &[(2, 0.5)]).is_err());
        assert!(tangent_phantom_recoverable(1, 0, &[]).unwrap().modes.is_empty());
    }

    #[test]
    fn equidistant_examples() {
        let p = equidistant_phantom(0, Bump::new(1.0, 0.5).unwrap(), Bump::new(1.0, 0.5).unwrap()).unwrap();
        assert_eq!(p.mode_profile(0, 1.0, 1.0).re, 1.0);
        let p1 = equidistant_phantom(1, Bump::new(0.3, 0.5).unwrap(), Bump::new(1.0, 0.5).unwrap()).unwrap();
        assert_eq!(p1.mode_profile(1, 0.0, 1.0).norm(), 0.0);
        let a = p1.eval([0.2, 0.1, 1.0]);
        let b = p1.eval([-0.2, -0.1, 1.0]);
        assert!((a + b).norm() < 1e-15);
        assert!(equidistant_phantom(0, Bump::new(1.0, 0.5).unwrap(), Bump::new(0.3, 0.5).unwrap()).is_err());
    }

    #[test]
    fn phantom_json_round_trip() {
        let p = Phantom::Tangent(tangent_phantom_recoverable(2, 1, &[(0, 0.2), (2, 0.3), (-2, 0.3)]).unwrap());
        let s = p.to_json().unwrap();
        let q = Phantom::from_json(&s).unwrap();
        assert_eq!(p.hash(), q.hash());
        assert_eq!(s, q.to_json().unwrap());
    }
}
