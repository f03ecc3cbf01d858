//! The ν-parameterized decomposition of the plane for an order-n exponential
//! sum: the regular n-gon P(ν) with apothem ν, the n rotated half-strips Q_k
//! of half-width τ, and the n unbounded sector components R_p left over.
//! Also the corner-cut polygon P'(ν) whose boundary keeps |f| large.

use crate::error::{Error, Result};
use crate::expsum::ExpSum;
use num_complex::Complex64;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

/// Where a point sits relative to the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    InPolygon,
    InStrip(usize),
    InComponent(usize),
    OnBoundary,
}

/// An infinite oriented line: a point on it and a unit direction. The signed
/// distance is positive on the left of the direction.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OrientedLine {
    pub point: Complex64,
    pub dir: Complex64,
}

impl OrientedLine {
    pub fn signed_distance(&self, z: Complex64) -> f64 {
        (self.dir.conj() * (z - self.point)).im
    }

    pub fn angle(&self) -> f64 {
        self.dir.arg()
    }
}

/// The ν-dependent partition of the plane for a given family member.
#[derive(Debug, Clone)]
pub struct RegionDecomposition {
    f: ExpSum,
    nu: f64,
    tau: f64,
}

impl RegionDecomposition {
    pub fn new(f: &ExpSum, nu: f64, tau: f64) -> Result<Self> {
        if !(nu > 0.0) || !(tau > 0.0) {
            return Err(Error::Precondition("nu and tau must be positive".into()));
        }
        Ok(RegionDecomposition {
            f: f.clone(),
            nu,
            tau,
        })
    }

    pub fn order(&self) -> usize {
        self.f.order()
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn family(&self) -> &ExpSum {
        &self.f
    }

    /// Vertex j of P(ν): (ν / cos(π/n)) · e^{(2j+1)iπ/n}.
    pub fn vertex(&self, j: usize) -> Complex64 {
        let n = self.order() as f64;
        let r = self.nu / (std::f64::consts::PI / n).cos();
        r * Complex64::cis((2.0 * j as f64 + 1.0) * std::f64::consts::PI / n)
    }

    /// Axis angle of strip Q_k: (1 - 2k)π/n. Vertex (n - k) mod n sits
    /// centrally in strip k.
    pub fn strip_axis_angle(&self, k: usize) -> f64 {
        let n = self.order() as f64;
        (1.0 - 2.0 * k as f64) * std::f64::consts::PI / n
    }

    /// Rotate z into the frame of strip k (axis along positive reals).
    fn strip_frame(&self, k: usize, z: Complex64) -> Complex64 {
        z * Complex64::cis(-self.strip_axis_angle(k))
    }

    pub fn in_strip(&self, k: usize, z: Complex64) -> bool {
        let w = self.strip_frame(k, z);
        w.re > 0.0 && w.im.abs() < self.tau
    }

    /// Euclidean distance from z to the closure of strip k.
    pub fn strip_distance(&self, k: usize, z: Complex64) -> f64 {
        let w = self.strip_frame(k, z);
        let dx = (-w.re).max(0.0);
        let dy = (w.im.abs() - self.tau).max(0.0);
        dx.hypot(dy)
    }

    /// Distance from z to the boundary of strip k (the two edges plus the cap).
    fn strip_boundary_distance(&self, k: usize, z: Complex64) -> f64 {
        let w = self.strip_frame(k, z);
        if w.re >= 0.0 && w.im.abs() <= self.tau {
            (self.tau - w.im.abs()).min(w.re)
        } else {
            self.strip_distance(k, z)
        }
    }

    /// max_p Re(ω^p z); the polygon interior is where this is < ν.
    pub fn polygon_support(&self, z: Complex64) -> f64 {
        (0..self.order())
            .map(|p| (self.f.omega_pow(p) * z).re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn in_polygon(&self, z: Complex64) -> bool {
        self.polygon_support(z) < self.nu
    }

    /// Endpoints of side p of P(ν) (the side on the line Re(ω^p z) = ν).
    pub fn side_endpoints(&self, p: usize) -> (Complex64, Complex64) {
        let n = self.order();
        (self.vertex((2 * n - p - 1) % n), self.vertex((n - p) % n))
    }

    /// Distance from z to the polygon boundary (side segments).
    pub fn polygon_boundary_distance(&self, z: Complex64) -> f64 {
        (0..self.order())
            .map(|p| {
                let (a, b) = self.side_endpoints(p);
                dist_to_segment(z, a, b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of the sector whose central direction is nearest to z; only
    /// meaningful for points outside the polygon and the strips.
    pub fn sector_index(&self, z: Complex64) -> usize {
        let n = self.order() as f64;
        let p = (-z.arg() * n / (2.0 * std::f64::consts::PI)).round() as i64;
        p.rem_euclid(self.order() as i64) as usize
    }

    /// Classify z. Ties within tolerance resolve toward OnBoundary.
    pub fn locate(&self, z: Complex64) -> Region {
        let tol = 1e-12 * z.norm().max(1.0);
        let support = self.polygon_support(z);
        if (support - self.nu).abs() <= tol {
            return Region::OnBoundary;
        }
        let outside_polygon = support > self.nu;
        if outside_polygon {
            for k in 0..self.order() {
                if self.strip_boundary_distance(k, z) <= tol {
                    return Region::OnBoundary;
                }
            }
        } else {
            return Region::InPolygon;
        }
        for k in 0..self.order() {
            if self.in_strip(k, z) {
                return Region::InStrip(k);
            }
        }
        Region::InComponent(self.sector_index(z))
    }

    /// Distance from z to the boundary of the region containing it.
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        match self.locate(z) {
            Region::OnBoundary => 0.0,
            Region::InPolygon => self.polygon_boundary_distance(z),
            Region::InStrip(k) => self
                .strip_boundary_distance(k, z)
                .min(self.polygon_boundary_distance(z)),
            Region::InComponent(_) => (0..self.order())
                .map(|k| self.strip_distance(k, z))
                .fold(self.polygon_boundary_distance(z), f64::min),
        }
    }

    /// The infinite line through the polygon side facing component R_p;
    /// signed distance is positive on the sector side.
    pub fn gamma_line(&self, p: usize) -> OrientedLine {
        let wp_inv = self.f.omega_pow(p).conj();
        OrientedLine {
            point: self.nu * wp_inv,
            dir: Complex64::new(0.0, -1.0) * wp_inv,
        }
    }
}

fn dist_to_segment(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = ((z - a).re * ab.re + (z - a).im * ab.im) / len2;
    let t = t.clamp(0.0, 1.0);
    (z - (a + t * ab)).norm()
}

/// Which construction produced a polyline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PolyTag {
    Full,
    Truncated,
}

/// A simple, positively oriented closed polygon.
#[derive(Debug, Clone)]
pub struct ClosedPolyline {
    pub vertices: Vec<Complex64>,
    pub tag: PolyTag,
}

impl Serialize for ClosedPolyline {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.vertices.len()))?;
        for v in &self.vertices {
            seq.serialize_element(&[v.re, v.im])?;
        }
        seq.end()
    }
}

impl ClosedPolyline {
    pub fn new(vertices: Vec<Complex64>, tag: PolyTag) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::Precondition(
                "polygon needs at least 3 vertices".into(),
            ));
        }
        let poly = ClosedPolyline { vertices, tag };
        if poly.signed_area() <= 0.0 {
            return Err(Error::Precondition(
                "polygon must be positively oriented".into(),
            ));
        }
        if !poly.is_simple() {
            return Err(Error::Precondition("polygon must be simple".into()));
        }
        Ok(poly)
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let mut acc = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            acc += a.re * b.im - b.re * a.im;
        }
        acc / 2.0
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| (self.vertices[(i + 1) % n] - self.vertices[i]).norm())
            .sum()
    }

    /// Pairwise check that non-adjacent edges do not intersect.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        let seg = |i: usize| (self.vertices[i], self.vertices[(i + 1) % n]);
        for i in 0..n {
            for j in i + 1..n {
                if j == i || (j + 1) % n == i || (i + 1) % n == j {
                    continue;
                }
                let (a, b) = seg(i);
                let (c, d) = seg(j);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    /// Integer winding number of the polygon around `z`.
    pub fn winding_number(&self, z: Complex64) -> i32 {
        let n = self.vertices.len();
        let mut w = 0i32;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if a.im <= z.im {
                if b.im > z.im && cross(b - a, z - a) > 0.0 {
                    w += 1;
                }
            } else if b.im <= z.im && cross(b - a, z - a) < 0.0 {
                w -= 1;
            }
        }
        w
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.winding_number(z) != 0
    }

    pub fn point_on_boundary(&self, z: Complex64, tol: f64) -> bool {
        let n = self.vertices.len();
        (0..n).any(|i| dist_to_segment(z, self.vertices[i], self.vertices[(i + 1) % n]) <= tol)
    }

    /// Arc-length-uniform boundary samples in order, with the first point
    /// repeated at the end for winding accumulation.
    pub fn sample_boundary(&self, count: usize) -> Result<Vec<Complex64>> {
        if count < self.vertices.len() {
            return Err(Error::Precondition(format!(
                "need at least {} samples for a {}-gon",
                self.vertices.len(),
                self.vertices.len()
            )));
        }
        let per = self.perimeter();
        let step = per / count as f64;
        let n = self.vertices.len();
        let mut out = Vec::with_capacity(count + 1);
        let mut seg_idx = 0usize;
        let mut seg_start = self.vertices[0];
        let mut seg_end = self.vertices[1];
        let mut seg_len = (seg_end - seg_start).norm();
        let mut seg_offset = 0.0;
        for i in 0..count {
            let target = i as f64 * step;
            while target > seg_offset + seg_len && seg_idx + 1 < n {
                seg_offset += seg_len;
                seg_idx += 1;
                seg_start = self.vertices[seg_idx];
                seg_end = self.vertices[(seg_idx + 1) % n];
                seg_len = (seg_end - seg_start).norm();
            }
            let t = ((target - seg_offset) / seg_len).clamp(0.0, 1.0);
            out.push(seg_start + t * (seg_end - seg_start));
        }
        out.push(out[0]);
        Ok(out)
    }

    pub fn min_abs(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                dist_to_segment(
                    Complex64::new(0.0, 0.0),
                    self.vertices[i],
                    self.vertices[(i + 1) % n],
                )
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn segments_intersect(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// The two exponential-term indices dominant at vertex j: the sides meeting
/// there are Γ_u and Γ_v with u = (-j) mod n, v = (-j-1) mod n.
pub fn vertex_term_indices(n: usize, j: usize) -> (usize, usize) {
    let u = (n - j % n) % n;
    let v = (2 * n - j % n - 1) % n;
    (u, v)
}

/// The cut line for vertex j at index m: Im((ω^v - ω^u) z + c_j) = 2mπ with
/// c_j = Log(a_v / a_u) (principal branch; the selection rule below makes the
/// construction branch-independent).
pub fn cut_line(f: &ExpSum, j: usize, m: i64) -> OrientedLine {
    cut_line_with_shift(f, j, m, 0.0)
}

pub(crate) fn cut_line_with_shift(f: &ExpSum, j: usize, m: i64, c_im_shift: f64) -> OrientedLine {
    let n = f.order();
    let (u, v) = vertex_term_indices(n, j);
    let a = f.omega_pow(v) - f.omega_pow(u);
    let c_im = (f.coeffs()[v] / f.coeffs()[u]).ln().im + c_im_shift;
    let d = (2.0 * std::f64::consts::PI * m as f64 - c_im) / a.norm();
    let normal = Complex64::new(0.0, 1.0) * a.conj() / a.norm();
    OrientedLine {
        point: d * normal,
        dir: a.conj() / a.norm(),
    }
}

/// μ(z) = Im((ω^v - ω^u) z + c_j) / 2π: z lies on the vertex-j cut line of
/// index m exactly when μ(z) = m.
fn cut_index_at(f: &ExpSum, j: usize, z: Complex64, c_im_shift: f64) -> f64 {
    let (u, v) = vertex_term_indices(f.order(), j);
    let a = f.omega_pow(v) - f.omega_pow(u);
    ((a * z).im + (f.coeffs()[v] / f.coeffs()[u]).ln().im + c_im_shift)
        / (2.0 * std::f64::consts::PI)
}

fn line_intersection(l1: &OrientedLine, l2: &OrientedLine) -> Option<Complex64> {
    // solve l1.point + t l1.dir = l2.point + s l2.dir
    let denom = cross(l1.dir, l2.dir);
    if denom.abs() < 1e-14 {
        return None;
    }
    let t = cross(l2.point - l1.point, l2.dir) / denom;
    Some(l1.point + t * l1.dir)
}

struct VertexCut {
    on_u: Complex64,
    on_v: Complex64,
    m: i64,
}

/// For vertex j, the least cut index m whose line crosses both adjacent side
/// segments strictly outside the vertex strip, and the two crossing points.
fn select_vertex_cut(
    f: &ExpSum,
    dec: &RegionDecomposition,
    j: usize,
    c_im_shift: f64,
) -> Result<VertexCut> {
    let n = f.order();
    let (u, v) = vertex_term_indices(n, j);
    let strip = u; // vertex j sits centrally in strip (-j) mod n = u
    let (ua, ub) = dec.side_endpoints(u);
    let (va, vb) = dec.side_endpoints(v);
    let mu = |z: Complex64| cut_index_at(f, j, z, c_im_shift);
    let lo = mu(ua).min(mu(ub)).max(mu(va).min(mu(vb)));
    let hi = mu(ua).max(mu(ub)).min(mu(va).max(mu(vb)));
    // guards only against floating noise; cut offsets are O(τ) absolute, so
    // the inset must not scale up with ν
    let inset = (1e-12 * dec.nu()).max(1e-9);
    let admissible = |m: i64| -> Option<(Complex64, Complex64)> {
        let line = cut_line_with_shift(f, j, m, c_im_shift);
        let on_u = line_intersection(&line, &dec.gamma_line(u))?;
        let on_v = line_intersection(&line, &dec.gamma_line(v))?;
        for (pt, (a, b)) in [(on_u, (ua, ub)), (on_v, (va, vb))] {
            let t = ((pt - a).re * (b - a).re + (pt - a).im * (b - a).im) / (b - a).norm_sqr();
            let seg_len = (b - a).norm();
            if !(t * seg_len > inset && (1.0 - t) * seg_len > inset) {
                return None;
            }
            if dec.in_strip(strip, pt) {
                return None;
            }
        }
        Some((on_u, on_v))
    };
    // The strip carves an m-interval out of the bracket; jump past it rather
    // than scanning (the bracket width grows linearly with nu).
    let mut candidates: Vec<i64> = vec![lo.ceil() as i64];
    for (a, b) in [(ua, ub), (va, vb)] {
        // m-values where the crossing point sits on each strip edge
        for edge in [-1.0, 1.0] {
            // parametrize the side, find where it meets the strip edge line
            let theta = dec.strip_axis_angle(strip);
            let rot = Complex64::cis(-theta);
            let (wa, wb) = (a * rot, b * rot);
            let dy = wb.im - wa.im;
            if dy.abs() > 1e-14 {
                let t = (edge * dec.tau() - wa.im) / dy;
                let pt = a + t * (b - a);
                candidates.push(mu(pt).ceil() as i64);
            }
        }
    }
    candidates.sort_unstable();
    candidates.dedup();
    for m in candidates {
        for probe in [m, m + 1] {
            if (probe as f64) < lo || (probe as f64) > hi {
                continue;
            }
            if let Some((on_u, on_v)) = admissible(probe) {
                // verify minimality: no admissible index below in the bracket
                let mut least = probe;
                while least > lo.ceil() as i64 && admissible(least - 1).is_some() {
                    least -= 1;
                }
                let (on_u, on_v) = if least == probe {
                    (on_u, on_v)
                } else {
                    admissible(least).unwrap()
                };
                return Ok(VertexCut {
                    on_u,
                    on_v,
                    m: least,
                });
            }
        }
    }
    Err(Error::NuTooSmall {
        nu: dec.nu(),
        vertex: j,
    })
}

/// The corner-cut polygon P'(ν): each vertex of P(ν) replaced by the chord of
/// its least admissible cut line. Returns the 2n-gon; every boundary point z
/// satisfies ν ≤ |z| ≤ 2ν (checked).
pub fn truncated_polygon(f: &ExpSum, nu: f64, tau: f64) -> Result<ClosedPolyline> {
    truncated_polygon_with_shift(f, nu, tau, 0.0).map(|(p, _)| p)
}

/// Chosen cut indices alongside the polygon (reports record them).
pub fn truncated_polygon_with_cuts(
    f: &ExpSum,
    nu: f64,
    tau: f64,
) -> Result<(ClosedPolyline, Vec<i64>)> {
    truncated_polygon_with_shift(f, nu, tau, 0.0)
}

pub(crate) fn truncated_polygon_with_shift(
    f: &ExpSum,
    nu: f64,
    tau: f64,
    c_im_shift: f64,
) -> Result<(ClosedPolyline, Vec<i64>)> {
    let n = f.order();
    if n < 3 {
        return Err(Error::Precondition("corner cuts need order n >= 3".into()));
    }
    let dec = RegionDecomposition::new(f, nu, tau)?;
    let mut vertices = Vec::with_capacity(2 * n);
    let mut cut_indices = Vec::with_capacity(n);
    for j in 0..n {
        let cut = select_vertex_cut(f, &dec, j, c_im_shift)?;
        vertices.push(cut.on_u);
        vertices.push(cut.on_v);
        cut_indices.push(cut.m);
    }
    // adjacent cuts must leave a positively oriented piece of each side,
    // otherwise the chords cross and ν is too small for the construction
    for j in 0..n {
        let b_j = vertices[2 * j + 1];
        let a_next = vertices[(2 * j + 2) % (2 * n)];
        let side = (2 * n - j - 1) % n; // both points lie on Γ_side
        let dir = Complex64::new(0.0, 1.0) * f.omega_pow(side).conj();
        if (dir.conj() * (a_next - b_j)).re <= 1e-9 * nu {
            return Err(Error::NuTooSmall { nu, vertex: j });
        }
    }
    let poly = ClosedPolyline::new(vertices, PolyTag::Truncated)?;
    let (min_abs, max_abs) = (poly.min_abs(), poly.max_abs());
    if min_abs < nu * (1.0 - 1e-9) || max_abs > 2.0 * nu * (1.0 + 1e-9) {
        return Err(Error::NuTooSmall {
            nu,
            vertex: usize::MAX,
        });
    }
    Ok((poly, cut_indices))
}

/// P(ν) itself as a polyline (vertex order is counterclockwise).
pub fn full_polygon(dec: &RegionDecomposition) -> ClosedPolyline {
    let n = dec.order();
    let vertices = (0..n).map(|j| dec.vertex(j)).collect();
    ClosedPolyline::new(vertices, PolyTag::Full).expect("regular polygon is simple")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosx() -> ExpSum {
        ExpSum::new(vec![Complex64::new(0.5, 0.0); 4]).unwrap()
    }

    fn equal(n: usize) -> ExpSum {
        ExpSum::new(vec![Complex64::new(1.0, 0.0); n]).unwrap()
    }

    #[test]
    fn apothem_equals_nu() {
        for n in [3usize, 4, 5, 7] {
            let f = equal(n);
            let dec = RegionDecomposition::new(&f, 10.0, 3.0).unwrap();
            for p in 0..n {
                let (a, b) = dec.side_endpoints(p);
                let mid = (a + b) / 2.0;
                assert!(
                    (mid.norm() - 10.0).abs() <= 1e-9 * 10.0,
                    "n={n} p={p}: apothem {}",
                    mid.norm()
                );
                // side lies on the gamma line
                assert!(dec.gamma_line(p).signed_distance(a).abs() < 1e-9);
                assert!(dec.gamma_line(p).signed_distance(b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn locate_examples() {
        let f = equal(3);
        let dec = RegionDecomposition::new(&f, 10.0, 5.0).unwrap();
        assert_eq!(
            dec.locate(Complex64::new(15.0, 0.0)),
            Region::InComponent(0)
        );
        assert_eq!(dec.locate(Complex64::new(0.0, 0.0)), Region::InPolygon);
    }

    #[test]
    fn vertices_sit_in_strips() {
        let f = equal(5);
        let dec = RegionDecomposition::new(&f, 20.0, 5.89).unwrap();
        for j in 0..5 {
            let pushed = dec.vertex(j) * 1.0001;
            match dec.locate(pushed) {
                Region::InStrip(k) => assert_eq!((5 - k) % 5, j, "vertex {j} got strip {k}"),
                other => panic!("vertex {j} push classified as {other:?}"),
            }
        }
    }

    #[test]
    fn locate_is_rotation_equivariant() {
        let f = equal(5);
        let dec = RegionDecomposition::new(&f, 20.0, 5.89).unwrap();
        let rot = Complex64::cis(-2.0 * std::f64::consts::PI / 5.0);
        let mut state = 42u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..2000 {
            let z = Complex64::new(next() * 160.0 - 80.0, next() * 160.0 - 80.0);
            let (a, b) = (dec.locate(z), dec.locate(z * rot));
            match (a, b) {
                (Region::OnBoundary, _) | (_, Region::OnBoundary) => {}
                (Region::InPolygon, Region::InPolygon) => {}
                (Region::InStrip(k1), Region::InStrip(k2)) => assert_eq!((k1 + 1) % 5, k2),
                (Region::InComponent(p1), Region::InComponent(p2)) => {
                    assert_eq!((p1 + 1) % 5, p2)
                }
                other => panic!("equivariance broken at {z}: {other:?}"),
            }
        }
    }

    #[test]
    fn partition_gives_exactly_one_label() {
        // locate returns one label by construction; check its label agrees
        // with the raw predicates for non-boundary points.
        let f = cosx();
        let dec = RegionDecomposition::new(&f, 12.0, 4.74).unwrap();
        let mut state = 7u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100_000 {
            let z = Complex64::new(next() * 100.0 - 50.0, next() * 100.0 - 50.0);
            match dec.locate(z) {
                Region::InPolygon => assert!(dec.in_polygon(z)),
                Region::InStrip(k) => {
                    assert!(dec.in_strip(k, z) && !dec.in_polygon(z));
                }
                Region::InComponent(_) => {
                    assert!(!dec.in_polygon(z));
                    assert!((0..4).all(|k| !dec.in_strip(k, z)));
                }
                Region::OnBoundary => {}
            }
        }
    }

    #[test]
    fn boundary_distance_cases() {
        let f = equal(3);
        let dec = RegionDecomposition::new(&f, 10.0, 3.8).unwrap();
        let z = Complex64::new(15.0, 0.0);
        let d = dec.boundary_distance(z);
        let strip_d = (0..3)
            .map(|k| dec.strip_distance(k, z))
            .fold(f64::INFINITY, f64::min);
        assert!((d - (15.0f64 - 10.0).min(strip_d)).abs() < 1e-9);
        // on a side
        let (a, b) = dec.side_endpoints(0);
        let on_side = (a + b) / 2.0;
        assert_eq!(dec.locate(on_side), Region::OnBoundary);
        assert_eq!(dec.boundary_distance(on_side), 0.0);
    }

    #[test]
    fn boundary_distance_is_lipschitz() {
        let f = cosx();
        let dec = RegionDecomposition::new(&f, 12.0, 4.74).unwrap();
        let mut state = 99u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut tested = 0;
        while tested < 500 {
            let z1 = Complex64::new(next() * 80.0 - 40.0, next() * 80.0 - 40.0);
            let z2 = z1 + Complex64::new(next() * 2.0 - 1.0, next() * 2.0 - 1.0);
            if dec.locate(z1) == dec.locate(z2) {
                let (d1, d2) = (dec.boundary_distance(z1), dec.boundary_distance(z2));
                assert!((d1 - d2).abs() <= (z1 - z2).norm() + 1e-12);
                tested += 1;
            }
        }
    }

    #[test]
    fn gamma_line_zero_is_re_equals_nu() {
        let f = equal(4);
        let dec = RegionDecomposition::new(&f, 7.0, 3.0).unwrap();
        let line = dec.gamma_line(0);
        for &(x, y) in &[(7.0, 0.0), (7.0, 11.0), (3.0, -2.0), (9.5, 4.0)] {
            let z = Complex64::new(x, y);
            assert!((line.signed_distance(z) - (x - 7.0)).abs() < 1e-12);
        }
        // adjacent side lines meet at the polygon interior angle
        let l0 = dec.gamma_line(0);
        let l1 = dec.gamma_line(1);
        let mut ang = (l1.angle() - l0.angle()).abs();
        if ang > std::f64::consts::PI {
            ang = 2.0 * std::f64::consts::PI - ang;
        }
        let expected = 2.0 * std::f64::consts::PI / 4.0;
        assert!((ang - expected).abs() < 1e-12);
    }

    #[test]
    fn cut_line_slope_formula_and_perpendicularity() {
        for n in [3usize, 4, 5] {
            let f = equal(n);
            let pi_n = std::f64::consts::PI / n as f64;
            for m in [-3i64, 0, 2] {
                let line = cut_line(&f, 0, m);
                // explicit slope form: Im z = -cot(π/n) Re z + (Im c0 - 2mπ)/(2 sin²(π/n))
                let c0_im = 0.0; // equal coefficients
                let intercept =
                    (c0_im - 2.0 * m as f64 * std::f64::consts::PI) / (2.0 * pi_n.sin().powi(2));
                for t in [-5.0, 0.0, 7.0] {
                    let z = line.point + t * line.dir;
                    let predicted = -1.0 / pi_n.tan() * z.re + intercept;
                    assert!((z.im - predicted).abs() < 1e-9 * (1.0 + z.norm()));
                }
                // perpendicular to the boundary of Q_0 (axis angle π/n)
                let axis = Complex64::cis(pi_n);
                let dot = line.dir.re * axis.re + line.dir.im * axis.im;
                assert!(dot.abs() < 1e-9, "n={n}: |cos angle| = {}", dot.abs());
            }
        }
    }

    #[test]
    fn cut_line_equal_coefficients_m0_through_origin() {
        let f = equal(4);
        let line = cut_line(&f, 0, 0);
        assert!(line.signed_distance(Complex64::new(0.0, 0.0)).abs() < 1e-12);
    }

    #[test]
    fn two_term_factor_dominates_on_cut_line() {
        // |1 + e^((ω^v-ω^u)z + c)| >= 1 on the line, so |g_j| >= |a_u e^(ω^u z)|
        let g = cosx();
        for j in 0..4 {
            let (u, v) = vertex_term_indices(4, j);
            let c = (g.coeffs()[v] / g.coeffs()[u]).ln();
            let line = cut_line(&g, j, -2);
            for i in 0..100 {
                let z = line.point + (i as f64 - 50.0) * 0.3 * line.dir;
                let w = ((g.omega_pow(v) - g.omega_pow(u)) * z + c).exp();
                assert!(
                    (Complex64::new(1.0, 0.0) + w).norm() >= 1.0 - 1e-12,
                    "j={j}, i={i}"
                );
            }
        }
    }

    #[test]
    fn truncated_polygon_shape_and_radial_bounds() {
        let g = cosx();
        let tau = 4.740_73; // strip half-width floor for this family at η = 51
        let (poly, cuts) = truncated_polygon_with_cuts(&g, 20.0, tau).unwrap();
        assert_eq!(poly.vertices.len(), 8);
        assert!(poly.is_simple());
        assert_eq!(cuts.len(), 4);
        // ν ≤ |z| ≤ 2ν on the boundary, by dense sampling
        let samples = poly.sample_boundary(4000).unwrap();
        for z in &samples {
            assert!(z.norm() >= 20.0 * (1.0 - 1e-9));
            assert!(z.norm() <= 40.0 * (1.0 + 1e-9));
        }
        // chord length consistency with the strip-crossing geometry
        let pi_n = std::f64::consts::PI / 4.0;
        let chord = (poly.vertices[1] - poly.vertices[0]).norm();
        assert!(
            chord >= 2.0 * tau * pi_n.tan() * pi_n.cos() - 1e-9,
            "chord = {chord}"
        );
    }

    #[test]
    fn truncated_polygon_nested_in_full_polygon() {
        let g = cosx();
        let dec = RegionDecomposition::new(&g, 20.0, 4.74).unwrap();
        let full = full_polygon(&dec);
        let (poly, _) = truncated_polygon_with_cuts(&g, 20.0, 4.74).unwrap();
        for v in &poly.vertices {
            assert!(full.contains(*v * (1.0 - 1e-12)));
        }
        // contains the shrunken inscribed disc
        let r = 20.0 * (std::f64::consts::PI / 4.0).cos();
        for i in 0..256 {
            let z = r * Complex64::cis(2.0 * std::f64::consts::PI * i as f64 / 256.0);
            assert!(poly.contains(z), "missing disc point {z}");
        }
    }

    #[test]
    fn cut_selection_is_branch_independent() {
        // adding 2π to Im(c_j) shifts every admissible index by one but picks
        // out the same geometric line
        let f = ExpSum::new(vec![
            Complex64::new(0.8, 0.3),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.4, -0.9),
            Complex64::new(1.2, 0.1),
        ])
        .unwrap();
        let tau = 6.0;
        let (p0, m0) = truncated_polygon_with_shift(&f, 25.0, tau, 0.0).unwrap();
        let (p1, m1) =
            truncated_polygon_with_shift(&f, 25.0, tau, 2.0 * std::f64::consts::PI).unwrap();
        for (a, b) in p0.vertices.iter().zip(&p1.vertices) {
            assert!((a - b).norm() < 1e-9 * 25.0, "{a} vs {b}");
        }
        for (a, b) in m0.iter().zip(&m1) {
            assert_eq!(a + 1, *b);
        }
    }

    #[test]
    fn nu_too_small_is_rejected() {
        let g = cosx();
        assert!(matches!(
            truncated_polygon(&g, 0.5, 4.74),
            Err(Error::NuTooSmall { .. }) | Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn sample_boundary_square() {
        let square = ClosedPolyline::new(
            vec![
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 1.0),
                Complex64::new(0.0, 1.0),
            ],
            PolyTag::Full,
        )
        .unwrap();
        let pts = square.sample_boundary(4).unwrap();
        assert_eq!(pts.len(), 5);
        assert_eq!(pts[0], pts[4]);
        for w in pts.windows(2) {
            let gap = (w[1] - w[0]).norm();
            assert!((gap - 1.0).abs() < 1e-12);
        }
        let pts = square.sample_boundary(64).unwrap();
        for p in &pts {
            assert!(square.point_on_boundary(*p, 1e-12));
        }
    }

    #[test]
    fn polyline_serializes_to_pairs() {
        let square = ClosedPolyline::new(
            vec![
                Complex64::new(0.0, 0.0),
                Complex64::new(2.0, 0.0),
                Complex64::new(2.0, 2.0),
                Complex64::new(0.0, 2.0),
            ],
            PolyTag::Full,
        )
        .unwrap();
        let json = serde_json::to_string(&square).unwrap();
        assert_eq!(json, "[[0.0,0.0],[2.0,0.0],[2.0,2.0],[0.0,2.0]]");
    }
}
