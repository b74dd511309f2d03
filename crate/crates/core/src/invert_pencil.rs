//! Pencil-family recovery: pencil data on a covering (k+1)-plane is the classical
//! Radon transform of f restricted to that plane, which is inverted there by
//! filtered backprojection (k + 1 = 2) and assembled over a covering family.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::geometry::{
    canonical_rotation, covering_plane_for, exceptional_set_test, AnchorSet, Classification, CoveringPlane, Vector,
};

/// Relative size of the exceptional-point perturbation, scaled by 1 + |x₀|.
pub const PERTURBATION: f64 = 1e-6;

/// Parallel-beam layout on a 2-plane: θ_j = πj/n_θ, s_i uniform on [-r_max, r_max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParallelBeam {
    pub n_theta: usize,
    pub n_s: usize,
    pub r_max: f64,
}

impl ParallelBeam {
    pub fn theta(&self, j: usize) -> f64 {
        PI * j as f64 / self.n_theta as f64
    }

    pub fn ds(&self) -> f64 {
        2.0 * self.r_max / (self.n_s - 1) as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        -self.r_max + self.ds() * i as f64
    }

    /// (r, σ) of the sample (θ_j, s_i): the line ⟨x′, (cos θ, sin θ)⟩ = s.
    pub fn hyperplane(&self, j: usize, i: usize) -> (f64, Vector) {
        let (st, ct) = self.theta(j).sin_cos();
        let s = self.s(i);
        let sign = if s < 0.0 { -1.0 } else { 1.0 };
        (s.abs(), Vector::from_vec(vec![sign * ct, sign * st]))
    }
}

/// Classical Radon samples on one covering plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneRadonData {
    pub covering: CoveringPlane,
    /// Rows of the canonical rotation A.
    pub rotation: Vec<Vec<f64>>,
    /// Last n - k - 1 coordinates of A x on the plane.
    pub u0: Vec<f64>,
    pub beam: ParallelBeam,
    /// `values[j * n_s + i]` for (θ_j, s_i).
    pub values: Vec<f64>,
    /// Number of samples whose x₀ was moved off the exceptional set.
    pub perturbed: usize,
}

impl PlaneRadonData {
    pub fn rotation_matrix(&self) -> DMatrix<f64> {
        let n = self.rotation.len();
        DMatrix::from_fn(n, n, |i, j| self.rotation[i][j])
    }

    /// Intrinsic coordinates (first k+1 of A x) of a point of the plane.
    pub fn intrinsic(&self, x: &Vector) -> Vec<f64> {
        let a = self.rotation_matrix();
        let k1 = self.rotation.len() - self.u0.len();
        (&a * x).iter().take(k1).copied().collect()
    }

    /// Point of the plane with intrinsic coordinates u.
    pub fn point(&self, u: &[f64]) -> Vector {
        let a = self.rotation_matrix();
        let mut y: Vec<f64> = u.to_vec();
        y.extend(self.u0.iter().copied());
        a.transpose() * Vector::from_vec(y)
    }
}

/// x₀ = A⁻¹(rσ, u₀), moved off the exceptional set when needed. Returns (x₀, moved).
pub fn pencil_point(
    anchors: &AnchorSet,
    a: &DMatrix<f64>,
    u0: &[f64],
    r: f64,
    sigma: &Vector,
) -> (Vector, bool) {
    let n = anchors.n();
    let k1 = anchors.k() + 1;
    let build = |u: &Vector| {
        let mut y = Vector::zeros(n);
        for i in 0..k1 {
            y[i] = u[i];
        }
        for (i, v) in u0.iter().enumerate() {
            y[k1 + i] = *v;
        }
        a.transpose() * y
    };
    let scale0 = (r * r + u0.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let eps = PERTURBATION * (1.0 + scale0);
    let mut moved = false;
    let mut u = sigma * r;
    if r < eps {
        // u = 0 is the plane origin, where σ carries no information.
        u = sigma * eps;
        moved = true;
    }
    let mut x0 = build(&u);
    for _ in 0..4 {
        let grad: Vector = match exceptional_set_test(&x0, anchors) {
            Classification::Ok => return (x0, moved),
            Classification::InAnchorPlane => {
                // Move off the anchor plane along its normal within Σ′.
                let p = anchors.anchor_plane();
                let d = &x0 - p.project(&x0);
                if d.norm() > 0.0 {
                    d
                } else {
                    a.row(k1 - 1).transpose()
                }
            }
            Classification::InU => {
                let c = anchors.pencil_constraints(&x0);
                let (i, _) = c
                    .iter()
                    .enumerate()
                    .max_by(|p, q| p.1.abs().total_cmp(&q.1.abs()))
                    .expect("anchors");
                &anchors.points[i] - &x0 * 2.0
            }
        };
        // Project the direction into the plane directions (first k+1 rows of A).
        let coords: Vec<f64> = (0..k1).map(|i| a.row(i).transpose().dot(&grad)).collect();
        let mut du = Vector::from_vec(coords);
        if du.norm() < 1e-300 {
            du = Vector::zeros(k1);
            du[k1 - 1] = 1.0;
        }
        du /= du.norm();
        u += du * eps;
        x0 = build(&u);
        moved = true;
    }
    (x0, moved)
}

/// Samples the pencil oracle on the parallel-beam grid of `covering`.
pub fn gather_plane_data<F>(anchors: &AnchorSet, covering: &CoveringPlane, oracle: F, beam: ParallelBeam) -> Result<PlaneRadonData>
where
    F: Fn(&Vector) -> Result<f64> + Sync,
{
    if anchors.k() != 1 {
        return Err(Error::Unsupported(format!(
            "parallel-beam gathering needs k + 1 = 2, got k = {}",
            anchors.k()
        )));
    }
    if beam.n_theta < 2 || beam.n_s < 4 || !(beam.r_max > 0.0) {
        return validation("gather_plane_data: beam grid too small");
    }
    let omega = covering.omega_vectors();
    let a = canonical_rotation(anchors, &omega)?;
    let k1 = anchors.k() + 1;
    let ax = &a * anchors.last();
    let u0: Vec<f64> = ax.iter().skip(k1).copied().collect();
    let rows: Vec<(Vec<f64>, usize)> = (0..beam.n_theta)
        .into_par_iter()
        .map(|j| {
            let mut moved = 0;
            let vals = (0..beam.n_s)
                .map(|i| {
                    let (r, sigma) = beam.hyperplane(j, i);
                    let (x0, m) = pencil_point(anchors, &a, &u0, r, &sigma);
                    moved += m as usize;
                    oracle(&x0)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((vals, moved))
        })
        .collect::<Result<Vec<_>>>()?;
    let perturbed = rows.iter().map(|r| r.1).sum();
    Ok(PlaneRadonData {
        covering: covering.clone(),
        rotation: (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect(),
        u0,
        beam,
        values: rows.into_iter().flat_map(|r| r.0).collect(),
        perturbed,
    })
}

/// Ram–Lak filtered projections q_j = ds·(p_j * h), h the discrete ramp kernel.
pub fn filter_projections(values: &[f64], beam: &ParallelBeam) -> Vec<Vec<f64>> {
    let ns = beam.n_s;
    let ds = beam.ds();
    let len = (2 * ns).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(len);
    let ifft = planner.plan_fft_inverse(len);
    let mut kern = vec![Complex64::new(0.0, 0.0); len];
    for k in -(ns as i64 - 1)..ns as i64 {
        let v = if k == 0 {
            1.0 / (4.0 * ds * ds)
        } else if k % 2 != 0 {
            -1.0 / (PI * PI * (k * k) as f64 * ds * ds)
        } else {
            0.0
        };
        kern[k.rem_euclid(len as i64) as usize] = Complex64::new(v, 0.0);
    }
    fft.process(&mut kern);
    (0..beam.n_theta)
        .into_par_iter()
        .map(|j| {
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            for i in 0..ns {
                buf[i] = Complex64::new(values[j * ns + i], 0.0);
            }
            fft.process(&mut buf);
            for (b, k) in buf.iter_mut().zip(&kern) {
                *b *= *k;
            }
            ifft.process(&mut buf);
            (0..ns).map(|i| buf[i].re * ds / len as f64).collect()
        })
        .collect()
}

/// Backprojection (π/n_θ) Σ_j q_j(⟨x′, σ_j⟩) at intrinsic points, linear interpolation.
pub fn backproject(filtered: &[Vec<f64>], beam: &ParallelBeam, points: &[[f64; 2]]) -> Vec<f64> {
    let trig: Vec<(f64, f64)> = (0..beam.n_theta).map(|j| beam.theta(j).sin_cos()).collect();
    let ds = beam.ds();
    let ns = beam.n_s;
    points
        .par_iter()
        .map(|p| {
            let mut acc = 0.0;
            for (q, (st, ct)) in filtered.iter().zip(&trig) {
                let t = p[0] * ct + p[1] * st;
                let x = (t + beam.r_max) / ds;
                if x < 0.0 || x > (ns - 1) as f64 {
                    continue;
                }
                let i = (x.floor() as usize).min(ns - 2);
                let w = x - i as f64;
                acc += q[i] * (1.0 - w) + q[i + 1] * w;
            }
            acc * PI / beam.n_theta as f64
        })
        .collect()
}

/// Reconstructed restriction of f to a covering 2-plane on an intrinsic square grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneImage {
    /// Pixel centres run over [-extent, extent] in both intrinsic coordinates.
    pub extent: f64,
    pub size: usize,
    /// `values[row * size + col]`, row along the second coordinate.
    pub values: Vec<f64>,
}

impl PlaneImage {
    pub fn coordinate(&self, i: usize) -> f64 {
        -self.extent + 2.0 * self.extent * i as f64 / (self.size - 1) as f64
    }

    pub fn points(extent: f64, size: usize) -> Vec<[f64; 2]> {
        let c = |i: usize| -extent + 2.0 * extent * i as f64 / (size - 1) as f64;
        (0..size * size).map(|idx| [c(idx % size), c(idx / size)]).collect()
    }
}

/// Filtered backprojection on the plane; the image covers the beam's r_max disk.
pub fn invert_plane(data: &PlaneRadonData, size: usize) -> Result<PlaneImage> {
    let k1 = data.rotation.len() - data.u0.len();
    if k1 != 2 {
        return Err(Error::Unsupported(format!(
            "classical Radon inversion is implemented for planes of dimension 2, got {k1}"
        )));
    }
    if size < 2 {
        return validation("invert_plane: image size must be at least 2");
    }
    let filtered = filter_projections(&data.values, &data.beam);
    let extent = data.beam.r_max / std::f64::consts::SQRT_2;
    let values = backproject(&filtered, &data.beam, &PlaneImage::points(extent, size));
    Ok(PlaneImage { extent, size, values })
}

/// r_max for a plane: support radius projected into the plane, plus 10%.
/// `None` when the plane misses the support ball.
pub fn plane_r_max(support_radius: f64, u0: &[f64]) -> Option<f64> {
    let d2: f64 = u0.iter().map(|v| v * v).sum();
    let r2 = support_radius * support_radius - d2;
    if r2 <= 0.0 {
        None
    } else {
        Some(1.1 * r2.sqrt())
    }
}

/// Quantized ω frame used as the plane cache key.
fn omega_key(c: &CoveringPlane) -> Vec<i64> {
    c.omega
        .iter()
        .flat_map(|w| w.iter().map(|v| (v / 1e-6).round() as i64))
        .collect()
}

/// One covering plane of a volume plan with the targets it serves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPlane {
    pub covering: CoveringPlane,
    /// `None` when the plane misses the support ball.
    pub beam: Option<ParallelBeam>,
    pub targets: Vec<usize>,
}

/// Covering planes needed for a set of target points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumePlan {
    pub planes: Vec<PlannedPlane>,
    pub n_targets: usize,
}

impl VolumePlan {
    /// Number of pencil samples the plan gathers.
    pub fn sample_count(&self) -> usize {
        self.planes
            .iter()
            .filter_map(|p| p.beam.map(|b| b.n_theta * b.n_s))
            .sum()
    }
}

/// Groups targets by their quantized covering-plane frame.
pub fn plan_volume(
    anchors: &AnchorSet,
    support_radius: f64,
    targets: &[Vector],
    n_theta: usize,
    n_s: usize,
) -> Result<VolumePlan> {
    if anchors.k() != 1 {
        return Err(Error::Unsupported("volume assembly is implemented for k = 1".into()));
    }
    let mut groups: BTreeMap<Vec<i64>, (CoveringPlane, Vec<usize>)> = BTreeMap::new();
    for (idx, z) in targets.iter().enumerate() {
        let c = covering_plane_for(z, anchors)?;
        groups.entry(omega_key(&c)).or_insert_with(|| (c, Vec::new())).1.push(idx);
    }
    let planes = groups
        .into_values()
        .map(|(covering, targets)| {
            let a = canonical_rotation(anchors, &covering.omega_vectors())?;
            let u0: Vec<f64> = (&a * anchors.last()).iter().skip(2).copied().collect();
            let beam = plane_r_max(support_radius, &u0).map(|r_max| ParallelBeam { n_theta, n_s, r_max });
            Ok(PlannedPlane { covering, beam, targets })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VolumePlan {
        planes,
        n_targets: targets.len(),
    })
}

/// Gathers Radon data for every plane of the plan that meets the support.
pub fn gather_volume<F>(anchors: &AnchorSet, plan: &VolumePlan, oracle: F) -> Result<Vec<Option<PlaneRadonData>>>
where
    F: Fn(&Vector) -> Result<f64> + Sync,
{
    plan.planes
        .par_iter()
        .map(|p| match p.beam {
            Some(beam) => gather_plane_data(anchors, &p.covering, &oracle, beam).map(Some),
            None => Ok(None),
        })
        .collect()
}

/// Entry of the per-run plane manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneManifestEntry {
    pub omega: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub r_max: f64,
    pub targets: usize,
    pub perturbed: usize,
    pub max_abs_sample: f64,
}

/// Volume reconstruction at target points plus the manifest of planes used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeReconstruction {
    pub values: Vec<f64>,
    pub planes: Vec<PlaneManifestEntry>,
}

/// Backprojects each plane's data at its own targets.
pub fn reconstruct_volume(
    plan: &VolumePlan,
    data: &[Option<PlaneRadonData>],
    targets: &[Vector],
) -> Result<VolumeReconstruction> {
    if data.len() != plan.planes.len() || targets.len() != plan.n_targets {
        return validation("reconstruct_volume: data does not match the plan");
    }
    let results: Vec<(Vec<f64>, PlaneManifestEntry)> = plan
        .planes
        .par_iter()
        .zip(data)
        .map(|(p, d)| {
            let mut entry = PlaneManifestEntry {
                omega: p.covering.omega.clone(),
                mu: p.covering.mu.clone(),
                r_max: 0.0,
                targets: p.targets.len(),
                perturbed: 0,
                max_abs_sample: 0.0,
            };
            let Some(d) = d else {
                return (vec![0.0; p.targets.len()], entry);
            };
            entry.r_max = d.beam.r_max;
            entry.perturbed = d.perturbed;
            entry.max_abs_sample = d.values.iter().fold(0.0, |m, v| m.max(v.abs()));
            let filtered = filter_projections(&d.values, &d.beam);
            let pts: Vec<[f64; 2]> = p
                .targets
                .iter()
                .map(|&i| {
                    let u = d.intrinsic(&targets[i]);
                    [u[0], u[1]]
                })
                .collect();
            // Outside the support disk the restriction vanishes; backprojection there
            // would only see part of the angular range.
            let inside = d.beam.r_max / 1.1;
            let mut vals = backproject(&filtered, &d.beam, &pts);
            for (v, q) in vals.iter_mut().zip(&pts) {
                if q[0].hypot(q[1]) > inside {
                    *v = 0.0;
                }
            }
            (vals, entry)
        })
        .collect();
    let mut values = vec![0.0; targets.len()];
    let mut planes = Vec::with_capacity(results.len());
    for (p, (vals, entry)) in plan.planes.iter().zip(results) {
        for (&i, v) in p.targets.iter().zip(vals) {
            values[i] = v;
        }
        planes.push(entry);
    }
    Ok(VolumeReconstruction { values, planes })
}

/// Default beam size per plane for volume assembly.
pub const VOLUME_BEAM: usize = 64;

/// Plans, gathers and reconstructs f at every target point.
pub fn assemble_volume<F>(
    anchors: &AnchorSet,
    oracle: F,
    support_radius: f64,
    targets: &[Vector],
    n_theta: usize,
    n_s: usize,
) -> Result<VolumeReconstruction>
where
    F: Fn(&Vector) -> Result<f64> + Sync,
{
    let plan = plan_volume(anchors, support_radius, targets, n_theta, n_s)?;
    let data = gather_volume(anchors, &plan, oracle)?;
    reconstruct_volume(&plan, &data, targets)
}

/// Cubic grid of m³ cell centres on [-h, h]³, x fastest.
pub fn cube_targets(m: usize, h: f64) -> Vec<Vector> {
    let c = |q: usize| -h + 2.0 * h * (q as f64 + 0.5) / m as f64;
    (0..m * m * m)
        .map(|i| Vector::from_vec(vec![c(i % m), c((i / m) % m), c(i / (m * m))]))
        .collect()
}
