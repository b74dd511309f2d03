//! Affine geometry of the point-pencil family and the two line families in R³.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Result};

pub type Vector = DVector<f64>;

const PIVOT: f64 = 1e-12;
/// Tolerance of the exceptional-set classification.
pub const EXCEPTIONAL_TOL: f64 = 1e-10;

/// Modified Gram–Schmidt. Vectors whose residual norm falls below `PIVOT`
/// times their original norm (or an absolute 1e-14) are dropped.
pub fn gram_schmidt(vectors: &[Vector]) -> Vec<Vector> {
    let mut basis: Vec<Vector> = Vec::new();
    for v in vectors {
        let scale = v.norm();
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w.axpy(-c, b, 1.0);
            }
        }
        let nw = w.norm();
        if nw > PIVOT * scale.max(1.0) && nw > 1e-14 {
            basis.push(w / nw);
        }
    }
    basis
}

/// Orthonormal basis of the orthogonal complement of span(`basis`) in Rⁿ,
/// completed from the standard basis in index order.
pub fn orthogonal_complement(basis: &[Vector], n: usize) -> Vec<Vector> {
    let on = gram_schmidt(basis);
    let mut all = on.clone();
    let mut out = Vec::new();
    for i in 0..n {
        if all.len() == n {
            break;
        }
        let e = Vector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 });
        let before = all.len();
        let mut cand = all.clone();
        cand.push(e);
        let g = gram_schmidt(&cand);
        if g.len() > before {
            let v = g[before].clone();
            all.push(v.clone());
            out.push(v);
        }
    }
    out
}

/// Flips the sign so that the first component above 1e-9 is positive.
fn canonical_sign(mut v: Vector) -> Vector {
    if let Some(x) = v.iter().find(|x| x.abs() > 1e-9) {
        if *x < 0.0 {
            v.neg_mut();
        }
    }
    v
}

/// Affine plane stored as a base point and an orthonormal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePlane {
    pub base: Vector,
    pub frame: Vec<Vector>,
}

#[derive(Serialize, Deserialize)]
struct PlaneJson {
    schema: u32,
    dimension: usize,
    base: Vec<f64>,
    frame: Vec<Vec<f64>>,
}

impl Serialize for AffinePlane {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PlaneJson {
            schema: 1,
            dimension: self.dim(),
            base: self.base.iter().copied().collect(),
            frame: self.frame.iter().map(|v| v.iter().copied().collect()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AffinePlane {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let p = PlaneJson::deserialize(d)?;
        if p.frame.len() != p.dimension {
            return Err(serde::de::Error::custom("frame length differs from dimension"));
        }
        Ok(AffinePlane {
            base: Vector::from_vec(p.base),
            frame: p.frame.into_iter().map(Vector::from_vec).collect(),
        })
    }
}

impl AffinePlane {
    pub fn new(base: Vector, frame: Vec<Vector>) -> Result<Self> {
        let p = Self { base, frame };
        if p.frame.iter().any(|v| v.len() != p.base.len()) {
            return validation("affine plane: frame vectors and base differ in length");
        }
        if p.orthonormality_residual() > 1e-12 {
            return validation("affine plane: frame is not orthonormal");
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.frame.len()
    }

    pub fn ambient(&self) -> usize {
        self.base.len()
    }

    /// max |⟨f_i, f_j⟩ - δ_ij|.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for (i, a) in self.frame.iter().enumerate() {
            for (j, b) in self.frame.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                r = r.max((a.dot(b) - target).abs());
            }
        }
        r
    }

    /// base + Σ c_i f_i.
    pub fn point(&self, coords: &[f64]) -> Vector {
        let mut p = self.base.clone();
        for (c, f) in coords.iter().zip(&self.frame) {
            p.axpy(*c, f, 1.0);
        }
        p
    }

    /// Frame coordinates of the orthogonal projection of x.
    pub fn coords(&self, x: &Vector) -> Vec<f64> {
        let d = x - &self.base;
        self.frame.iter().map(|f| f.dot(&d)).collect()
    }

    pub fn project(&self, x: &Vector) -> Vector {
        self.point(&self.coords(x))
    }

    pub fn distance(&self, x: &Vector) -> f64 {
        (x - self.project(x)).norm()
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        self.distance(x) <= tol * (1.0 + x.norm())
    }

    /// Closest point of the plane to the origin.
    pub fn closest_point_to_origin(&self) -> Vector {
        self.project(&Vector::zeros(self.ambient()))
    }

    /// True when every frame vector of `other` lies in this plane's direction
    /// space and `other.base` lies in the plane.
    pub fn contains_plane(&self, other: &AffinePlane, tol: f64) -> bool {
        if !self.contains(&other.base, tol) {
            return false;
        }
        other.frame.iter().all(|v| {
            let c: Vec<f64> = self.frame.iter().map(|f| f.dot(v)).collect();
            let mut w = v.clone();
            for (ci, f) in c.iter().zip(&self.frame) {
                w.axpy(-*ci, f, 1.0);
            }
            w.norm() <= tol
        })
    }
}

/// Anchor points x₁, …, x_{k+1} in general position.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    pub points: Vec<Vector>,
    /// Orthonormalized differences y_i spanning {x_{k+1} - x_i}.
    pub y: Vec<Vector>,
}

/// Result of the exceptional-set test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Ok,
    InAnchorPlane,
    InU,
}

impl AnchorSet {
    pub fn new(points: Vec<Vector>) -> Result<Self> {
        if points.len() < 2 {
            return validation("anchor set: need at least two points");
        }
        let n = points[0].len();
        if points.iter().any(|p| p.len() != n) {
            return validation("anchor set: points differ in dimension");
        }
        let k = points.len() - 1;
        if k + 2 > n {
            return validation(format!("anchor set: k = {k} requires ambient dimension ≥ {}", k + 2));
        }
        let last = &points[k];
        let diffs: Vec<Vector> = points[..k].iter().map(|p| last - p).collect();
        let y = gram_schmidt(&diffs);
        if y.len() != k {
            return validation("anchor set: points are not in general position (rank deficient differences)");
        }
        Ok(Self { points, y })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows.iter().map(|r| Vector::from_vec(r.clone())).collect())
    }

    pub fn k(&self) -> usize {
        self.points.len() - 1
    }

    pub fn n(&self) -> usize {
        self.points[0].len()
    }

    pub fn last(&self) -> &Vector {
        &self.points[self.k()]
    }

    /// Same anchor plane with a different orthonormalization of its span.
    pub fn with_frame(&self, y: Vec<Vector>) -> Result<Self> {
        if y.len() != self.k() {
            return validation("anchor frame has the wrong size");
        }
        let residual = self.span_residual(&y);
        if residual > 1e-10 {
            return validation("anchor frame does not span the anchor differences");
        }
        Ok(Self {
            points: self.points.clone(),
            y,
        })
    }

    /// Mutual projection residual between span{y} and span{x_{k+1} - x_i}.
    pub fn span_residual(&self, y: &[Vector]) -> f64 {
        let last = self.last();
        let diffs: Vec<Vector> = self.points[..self.k()].iter().map(|p| last - p).collect();
        let res = |v: &Vector, basis: &[Vector]| {
            let mut w = v.clone();
            for b in basis {
                let c = b.dot(&w);
                w.axpy(-c, b, 1.0);
            }
            w.norm() / v.norm().max(1e-300)
        };
        let dbasis = gram_schmidt(&diffs);
        let a = diffs.iter().map(|d| res(d, y)).fold(0.0, f64::max);
        let b = y.iter().map(|v| res(v, &dbasis)).fold(0.0, f64::max);
        a.max(b)
    }

    /// The anchor k-plane through x₁, …, x_{k+1}.
    pub fn anchor_plane(&self) -> AffinePlane {
        let frame = self.y.clone();
        let mut p = AffinePlane {
            base: self.last().clone(),
            frame,
        };
        p.base = p.closest_point_to_origin();
        p
    }

    /// ⟨x_i - x, x⟩ for every anchor.
    pub fn pencil_constraints(&self, x: &Vector) -> Vec<f64> {
        self.points.iter().map(|p| (p - x).dot(x)).collect()
    }
}

/// Classifies x₀ against U and the anchor plane with tolerance 1e-10.
pub fn exceptional_set_test(x0: &Vector, anchors: &AnchorSet) -> Classification {
    let scale = 1.0 + x0.norm() * (x0.norm() + anchors.points.iter().map(|p| p.norm()).fold(0.0, f64::max));
    let c = anchors.pencil_constraints(x0);
    if c.iter().all(|v| v.abs() <= EXCEPTIONAL_TOL * scale) {
        return Classification::InU;
    }
    if anchors.anchor_plane().distance(x0) <= EXCEPTIONAL_TOL * (1.0 + x0.norm()) {
        return Classification::InAnchorPlane;
    }
    Classification::Ok
}

/// Σ_{x₀} = H{x₀, x₁, …, x_{k+1}} ∩ H_{x₀}, based at x₀.
pub fn sigma_plane(x0: &Vector, anchors: &AnchorSet) -> Result<AffinePlane> {
    if x0.len() != anchors.n() {
        return validation("sigma_plane: x₀ has the wrong dimension");
    }
    match exceptional_set_test(x0, anchors) {
        Classification::Ok => {}
        c => {
            return domain(format!("sigma_plane: x₀ is exceptional ({c:?})"));
        }
    }
    let diffs: Vec<Vector> = anchors.points.iter().map(|p| p - x0).collect();
    let v = gram_schmidt(&diffs);
    if v.len() != anchors.k() + 1 {
        return domain("sigma_plane: degenerate span through x₀");
    }
    let kk = v.len();
    let c = DVector::from_iterator(kk, v.iter().map(|b| b.dot(x0)));
    // Directions in span V orthogonal to x₀: V·(c^⊥ in R^{k+1}).
    let perp = orthogonal_complement(&[c], kk);
    let frame: Vec<Vector> = perp
        .iter()
        .map(|a| {
            let mut w = Vector::zeros(x0.len());
            for (ai, b) in a.iter().zip(&v) {
                w.axpy(*ai, b, 1.0);
            }
            w
        })
        .collect();
    let frame = gram_schmidt(&frame);
    if frame.len() != anchors.k() {
        return domain("sigma_plane: intersection has the wrong dimension");
    }
    Ok(AffinePlane {
        base: x0.clone(),
        frame,
    })
}

/// A (k+1)-plane Σ′_ω of the covering family with its normal frame ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringPlane {
    pub plane: AffinePlane,
    pub omega: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
}

impl CoveringPlane {
    pub fn omega_vectors(&self) -> Vec<Vector> {
        self.omega.iter().map(|w| Vector::from_vec(w.clone())).collect()
    }
}

fn check_omega(anchors: &AnchorSet, omega: &[Vector]) -> Result<()> {
    let n = anchors.n();
    let k = anchors.k();
    if omega.len() != n - k - 1 {
        return validation(format!("ω frame needs {} vectors, got {}", n - k - 1, omega.len()));
    }
    for (i, a) in omega.iter().enumerate() {
        if a.len() != n {
            return validation("ω vector has the wrong dimension");
        }
        for (j, b) in omega.iter().enumerate() {
            let t = if i == j { 1.0 } else { 0.0 };
            if (a.dot(b) - t).abs() > 1e-10 {
                return validation("ω frame is not orthonormal");
            }
        }
        for p in &anchors.points[..k] {
            if (anchors.last() - p).dot(a).abs() > 1e-10 * (1.0 + (anchors.last() - p).norm()) {
                return validation("ω vector is not orthogonal to the anchor differences");
            }
        }
    }
    Ok(())
}

/// Σ′_ω = {x : ⟨x - x_{k+1}, ω_i⟩ = 0}. The frame is (y₁, …, y_k, v) with v
/// completing the direction space; the base is the point closest to the origin.
pub fn pencil_plane_family(anchors: &AnchorSet, omega: &[Vector]) -> Result<CoveringPlane> {
    check_omega(anchors, omega)?;
    let n = anchors.n();
    let mut spanned: Vec<Vector> = anchors.y.clone();
    spanned.extend(omega.iter().cloned());
    let rest = orthogonal_complement(&spanned, n);
    if rest.len() != 1 {
        return domain("pencil_plane_family: direction space has the wrong dimension");
    }
    let mut frame = anchors.y.clone();
    frame.push(canonical_sign(rest[0].clone()));
    let mu: Vec<f64> = omega.iter().map(|w| anchors.last().dot(w)).collect();
    let mut base = Vector::zeros(n);
    for (m, w) in mu.iter().zip(omega) {
        base.axpy(*m, w, 1.0);
    }
    Ok(CoveringPlane {
        plane: AffinePlane { base, frame },
        omega: omega.iter().map(|w| w.iter().copied().collect()).collect(),
        mu,
    })
}

/// A covering plane through z₀: ω spans part of W^⊥ with
/// W = span{x_{k+1} - x_i, x_{k+1} - z₀}.
pub fn covering_plane_for(z0: &Vector, anchors: &AnchorSet) -> Result<CoveringPlane> {
    let n = anchors.n();
    let k = anchors.k();
    if z0.len() != n {
        return validation("covering_plane_for: z₀ has the wrong dimension");
    }
    let mut w: Vec<Vector> = anchors.y.clone();
    w.push(anchors.last() - z0);
    let perp = orthogonal_complement(&w, n);
    let omega: Vec<Vector> = perp
        .into_iter()
        .take(n - k - 1)
        .map(canonical_sign)
        .collect();
    pencil_plane_family(anchors, &omega)
}

/// Rotation A with A y_i = e_i, A ω_j = e_{k+1+j} and A v = ±e_{k+1}, det A = +1.
pub fn canonical_rotation(anchors: &AnchorSet, omega: &[Vector]) -> Result<DMatrix<f64>> {
    let n = anchors.n();
    let k = anchors.k();
    let mut rows: Vec<Vector> = anchors.y.clone();
    let mut spanned = anchors.y.clone();
    spanned.extend(omega.iter().cloned());
    for (i, a) in spanned.iter().enumerate() {
        for (j, b) in spanned.iter().enumerate() {
            let t = if i == j { 1.0 } else { 0.0 };
            if (a.dot(b) - t).abs() > 1e-10 {
                return validation("canonical_rotation: combined frame is not orthonormal");
            }
        }
    }
    let rest = orthogonal_complement(&spanned, n);
    if rest.len() != 1 || spanned.len() != n - 1 {
        return validation("canonical_rotation: frame does not leave exactly one free direction");
    }
    rows.push(canonical_sign(rest[0].clone()));
    rows.extend(omega.iter().cloned());
    let mut a = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    if a.determinant() < 0.0 {
        for j in 0..n {
            a[(k, j)] = -a[(k, j)];
        }
    }
    Ok(a)
}

/// (r, σ) with u = rσ the first k+1 coordinates of A x₀.
pub fn projected_hyperplane(
    x0: &Vector,
    anchors: &AnchorSet,
    omega: &[Vector],
) -> Result<(f64, Vector)> {
    let k = anchors.k();
    for w in omega {
        let r = (x0 - anchors.last()).dot(w);
        if r.abs() > 1e-10 * (1.0 + x0.norm()) {
            return validation("projected_hyperplane: Σ_{x₀} is not contained in Σ′_ω");
        }
    }
    let a = canonical_rotation(anchors, omega)?;
    let xp = &a * x0;
    let u = Vector::from_iterator(k + 1, xp.iter().take(k + 1).copied());
    let r = u.norm();
    if r <= 1e-14 * (1.0 + x0.norm()) {
        return domain("projected_hyperplane: u = 0 is a degenerate pencil point");
    }
    Ok((r, u / r))
}

/// Residuals of conditions (i*) and (ii*) at x₀ for the frame ω.
/// (ii*) uses the index i maximizing |⟨x_i - x₀, x₀⟩|.
pub fn containment_conditions(x0: &Vector, anchors: &AnchorSet, omega: &[Vector]) -> (f64, f64) {
    let mu: Vec<f64> = omega.iter().map(|w| anchors.last().dot(w)).collect();
    let r1 = omega
        .iter()
        .zip(&mu)
        .map(|(w, m)| (x0.dot(w) - m).abs() / (1.0 + m.abs()))
        .fold(0.0, f64::max);
    let c = anchors.pencil_constraints(x0);
    let (istar, _) = c
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("anchors are non-empty");
    let di = &anchors.points[istar] - x0;
    let mut r2: f64 = 0.0;
    for w in omega {
        for (j, p) in anchors.points.iter().enumerate() {
            if j == istar {
                continue;
            }
            let dj = p - x0;
            let lhs = c[istar] * dj.dot(w);
            let rhs = c[j] * di.dot(w);
            let scale = (di.norm() * x0.norm() * dj.norm()).max(1e-300);
            r2 = r2.max((lhs - rhs).abs() / scale);
        }
    }
    (r1, r2)
}

/// Line family tag and parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LineParams {
    /// Ruling at angle φ of the cone with apex λ e₃ tangent to the unit sphere.
    TangentRuling { lambda: f64, phi: f64 },
    /// Line l_{λ,θ,φ} equidistant from ±e₃.
    Equidistant { lambda: f64, theta: f64, phi: f64 },
}

/// Line in R³ as point + t·direction with unit-speed parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamLine {
    pub params: LineParams,
    pub point: [f64; 3],
    pub direction: [f64; 3],
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl ParamLine {
    /// Ruling (t cos φ, t sin φ, λ + t√(λ²-1)) reparametrized by arclength.
    pub fn tangent_ruling(lambda: f64, phi: f64) -> Result<Self> {
        if !(lambda >= 1.0) {
            return domain(format!("tangent ruling: λ = {lambda} must be at least 1"));
        }
        let c = (lambda * lambda - 1.0).sqrt();
        let (s, co) = phi.sin_cos();
        Ok(Self {
            params: LineParams::TangentRuling { lambda, phi },
            point: [0.0, 0.0, lambda],
            direction: [co / lambda, s / lambda, c / lambda],
        })
    }

    /// l_{λ,θ,φ} = (λ cos φ - t cos θ sin φ, λ sin φ + t cos θ cos φ, t sin θ).
    pub fn equidistant(lambda: f64, theta: f64, phi: f64) -> Self {
        let (sp, cp) = phi.sin_cos();
        let (st, ct) = theta.sin_cos();
        Self {
            params: LineParams::Equidistant { lambda, theta, phi },
            point: [lambda * cp, lambda * sp, 0.0],
            direction: [-ct * sp, ct * cp, st],
        }
    }

    #[inline]
    pub fn at(&self, t: f64) -> [f64; 3] {
        [
            self.point[0] + t * self.direction[0],
            self.point[1] + t * self.direction[1],
            self.point[2] + t * self.direction[2],
        ]
    }

    pub fn distance_to(&self, q: [f64; 3]) -> f64 {
        let d = [q[0] - self.point[0], q[1] - self.point[1], q[2] - self.point[2]];
        let t = dot3(&d, &self.direction) / dot3(&self.direction, &self.direction);
        let p = self.at(t);
        ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) + (q[2] - p[2]).powi(2)).sqrt()
    }

    /// Parameter of the closest point to the origin.
    pub fn closest_parameter(&self) -> f64 {
        -dot3(&self.point, &self.direction) / dot3(&self.direction, &self.direction)
    }

    pub fn closest_point(&self) -> [f64; 3] {
        self.at(self.closest_parameter())
    }
}

/// Lines in the equidistant family satisfy d(l, e₃) = d(l, -e₃).
pub fn equidistance_residual(line: &ParamLine) -> f64 {
    (line.distance_to([0.0, 0.0, 1.0]) - line.distance_to([0.0, 0.0, -1.0])).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_vec(x.to_vec())
    }

    #[test]
    fn worked_sigma_example() {
        let a = AnchorSet::new(vec![v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0])]).unwrap();
        let s = sigma_plane(&v(&[0.0, 0.0, 1.0]), &a).unwrap();
        assert_eq!(s.dim(), 1);
        let d = &s.frame[0];
        let expect = v(&[1.0, -1.0, 0.0]) / 2f64.sqrt();
        assert!((d - &expect).norm() < 1e-12 || (d + &expect).norm() < 1e-12);
        assert!((s.base.clone() - v(&[0.0, 0.0, 1.0])).norm() < 1e-15);
    }

    #[test]
    fn exceptional_points() {
        let a = AnchorSet::new(vec![v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0])]).unwrap();
        assert_eq!(exceptional_set_test(&v(&[0.0, 0.0, 0.0]), &a), Classification::InU);
        assert_eq!(exceptional_set_test(&v(&[1.0, 0.0, 0.0]), &a), Classification::InAnchorPlane);
        assert_eq!(exceptional_set_test(&v(&[3.0, 2.0, 5.0]), &a), Classification::Ok);
    }

    #[test]
    fn plane_family_example() {
        let a = AnchorSet::new(vec![v(&[0.0, 0.0, 0.0]), v(&[1.0, 0.0, 0.0])]).unwrap();
        let p = pencil_plane_family(&a, &[v(&[0.0, 0.0, 1.0])]).unwrap();
        assert!(p.plane.contains(&v(&[3.0, -2.0, 0.0]), 1e-14));
        assert!(!p.plane.contains(&v(&[0.0, 0.0, 0.1]), 1e-6));
        assert!(pencil_plane_family(&a, &[v(&[1.0, 0.0, 0.0])]).is_err());
    }

    #[test]
    fn rulings_are_tangent_and_lines_equidistant() {
        for &(l, p) in &[(1.0, 0.3), (2.5, -1.0), (40.0, 2.0)] {
            let r = ParamLine::tangent_ruling(l, p).unwrap();
            assert!((r.distance_to([0.0; 3]) - 1.0).abs() < 1e-12);
        }
        assert!(ParamLine::tangent_ruling(0.5, 0.0).is_err());
        let l = ParamLine::equidistant(0.7, 0.4, 1.3);
        assert!(equidistance_residual(&l) < 1e-12);
        assert!(l.closest_point()[2].abs() < 1e-15);
    }

    #[test]
    fn plane_json_round_trip() {
        let p = AffinePlane::new(v(&[0.0, 0.0, 1.0]), vec![v(&[1.0, 0.0, 0.0])]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let q: AffinePlane = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
