//! Bounded convex polytopes with incremental half-space clipping and exact
//! second moments.
//!
//! A polytope is stored as a vertex list plus faces given as vertex-index
//! rings, counter-clockwise when seen from outside. Each face remembers the
//! half-space whose boundary it lies on. Clipping walks every face ring
//! once (a 3D Sutherland–Hodgman pass) and closes the cut with a new face
//! on the clipping plane.

use super::tensor::SymTensor3;
use super::vec3::Vec3;

/// Relative tolerance, scaled by the polytope diameter, for deciding that a
/// vertex lies on a clipping plane and for merging coincident cut vertices.
pub const REL_TOL: f64 = 1e-9;

/// The closed half-space `{x : normal · x <= offset}` with a unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfSpace {
    pub normal: Vec3,
    pub offset: f64,
}

impl HalfSpace {
    /// Normalizes `normal`; the offset is rescaled accordingly.
    ///
    /// Panics on a zero normal.
    pub fn new(normal: Vec3, offset: f64) -> Self {
        let len = normal.norm();
        assert!(len > 0.0, "half-space normal must be nonzero");
        HalfSpace {
            normal: normal / len,
            offset: offset / len,
        }
    }

    /// Signed distance of `x` to the boundary plane, positive outside.
    #[inline]
    pub fn signed_distance(&self, x: Vec3) -> f64 {
        self.normal.dot(x) - self.offset
    }

    pub fn contains(&self, x: Vec3, tol: f64) -> bool {
        self.signed_distance(x) <= tol
    }

    pub fn translated(&self, t: Vec3) -> HalfSpace {
        HalfSpace {
            normal: self.normal,
            offset: self.offset + self.normal.dot(t),
        }
    }

    pub fn scaled(&self, s: f64) -> HalfSpace {
        HalfSpace {
            normal: self.normal,
            offset: self.offset * s,
        }
    }
}

/// Result of clipping a polytope in place.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClipOutcome {
    /// The half-space contained the whole polytope.
    Unchanged,
    Clipped,
    /// Nothing with positive volume survived; the polytope is now empty.
    Empty,
}

/// A bounded convex polytope, possibly empty.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvexPolytope {
    vertices: Vec<Vec3>,
    /// Concatenated face rings; face `f` is `ring[starts[f]..starts[f + 1]]`.
    ring: Vec<u32>,
    starts: Vec<u32>,
    planes: Vec<HalfSpace>,
}

impl ConvexPolytope {
    pub fn empty() -> Self {
        ConvexPolytope {
            starts: vec![0],
            ..Default::default()
        }
    }

    /// Builds a polytope from explicit data. Rings must be outward oriented
    /// and `planes[f]` must support face `f`.
    pub fn from_parts(vertices: Vec<Vec3>, faces: &[Vec<usize>], planes: Vec<HalfSpace>) -> Self {
        assert_eq!(faces.len(), planes.len());
        let mut ring = Vec::new();
        let mut starts = vec![0u32];
        for f in faces {
            ring.extend(f.iter().map(|&i| i as u32));
            starts.push(ring.len() as u32);
        }
        ConvexPolytope {
            vertices,
            ring,
            starts,
            planes,
        }
    }

    /// The axis-aligned box `[min, max]`.
    pub fn cuboid(min: Vec3, max: Vec3) -> Self {
        let v = |i: usize| {
            Vec3::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            )
        };
        let vertices: Vec<Vec3> = (0..8).map(v).collect();
        let faces = vec![
            vec![0, 4, 6, 2], // -x
            vec![1, 3, 7, 5], // +x
            vec![0, 1, 5, 4], // -y
            vec![2, 6, 7, 3], // +y
            vec![0, 2, 3, 1], // -z
            vec![4, 5, 7, 6], // +z
        ];
        let planes = vec![
            HalfSpace::new(-Vec3::X, -min.x),
            HalfSpace::new(Vec3::X, max.x),
            HalfSpace::new(-Vec3::Y, -min.y),
            HalfSpace::new(Vec3::Y, max.y),
            HalfSpace::new(-Vec3::Z, -min.z),
            HalfSpace::new(Vec3::Z, max.z),
        ];
        ConvexPolytope::from_parts(vertices, &faces, planes)
    }

    /// Intersection of `half_spaces` with a bounding box that must contain it.
    pub fn from_half_spaces(half_spaces: &[HalfSpace], bound_min: Vec3, bound_max: Vec3) -> Self {
        let mut poly = ConvexPolytope::cuboid(bound_min, bound_max);
        let mut clipper = Clipper::default();
        for h in half_spaces {
            if clipper.clip(&mut poly, h) == ClipOutcome::Empty {
                break;
            }
        }
        poly
    }

    pub fn is_empty(&self) -> bool {
        self.face_count() == 0
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn face_count(&self) -> usize {
        self.planes.len()
    }

    pub fn face(&self, f: usize) -> impl ExactSizeIterator<Item = usize> + '_ {
        let (a, b) = (self.starts[f] as usize, self.starts[f + 1] as usize);
        self.ring[a..b].iter().map(|&i| i as usize)
    }

    pub fn faces(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.face_count()).map(move |f| self.face(f).collect())
    }

    /// The defining half-space of every face, in face order.
    pub fn planes(&self) -> &[HalfSpace] {
        &self.planes
    }

    pub fn edge_count(&self) -> usize {
        self.ring.len() / 2
    }

    /// `V − E + F`; equals 2 for every nonempty valid polytope.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.face_count() as i64
    }

    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(
            self.vertices
                .iter()
                .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        )
    }

    /// Bounding-box diagonal, used as the length scale for tolerances.
    pub fn diameter(&self) -> f64 {
        self.bounding_box().map_or(0.0, |(lo, hi)| (hi - lo).norm())
    }

    /// Largest distance from `p` to a vertex.
    pub fn max_distance_from(&self, p: Vec3) -> f64 {
        self.vertices
            .iter()
            .fold(0.0f64, |m, v| m.max(v.distance_squared(p)))
            .sqrt()
    }

    /// Mean of the vertices; an interior point of a nonempty polytope.
    pub fn vertex_centroid(&self) -> Vec3 {
        if self.vertices.is_empty() {
            return Vec3::ZERO;
        }
        let mut c = Vec3::ZERO;
        for &v in &self.vertices {
            c += v;
        }
        c / self.vertices.len() as f64
    }

    pub fn contains(&self, x: Vec3, tol: f64) -> bool {
        !self.is_empty() && self.planes.iter().all(|h| h.contains(x, tol))
    }

    /// Largest distance of a face vertex to its supporting plane.
    pub fn max_planarity_error(&self) -> f64 {
        let mut err = 0.0f64;
        for f in 0..self.face_count() {
            let h = self.planes[f];
            for i in self.face(f) {
                err = err.max(h.signed_distance(self.vertices[i]).abs());
            }
        }
        err
    }

    pub fn translate(&mut self, t: Vec3) {
        for v in &mut self.vertices {
            *v += t;
        }
        for h in &mut self.planes {
            *h = h.translated(t);
        }
    }

    pub fn scale(&mut self, s: f64) {
        assert!(s > 0.0);
        for v in &mut self.vertices {
            *v = *v * s;
        }
        for h in &mut self.planes {
            *h = h.scaled(s);
        }
    }

    /// Returns `self ∩ h` as a new polytope.
    pub fn clip(&self, h: &HalfSpace) -> ConvexPolytope {
        let mut out = self.clone();
        Clipper::default().clip(&mut out, h);
        out
    }

    /// Fan decomposition into tetrahedra `(apex, a, b, c)` joining every
    /// boundary triangle to the vertex centroid.
    pub fn tetrahedra(&self) -> impl Iterator<Item = [Vec3; 4]> + '_ {
        let c = self.vertex_centroid();
        (0..self.face_count()).flat_map(move |f| {
            let (a, b) = (self.starts[f] as usize, self.starts[f + 1] as usize);
            let ring = &self.ring[a..b];
            let v0 = self.vertices[ring[0] as usize];
            (1..ring.len() - 1).map(move |i| {
                [
                    c,
                    v0,
                    self.vertices[ring[i] as usize],
                    self.vertices[ring[i + 1] as usize],
                ]
            })
        })
    }

    pub fn volume(&self) -> f64 {
        self.tetrahedra()
            .map(|[a, b, c, d]| signed_tetra_volume(a, b, c, d))
            .sum()
    }

    /// `∫ (x − base) ⊗ (x − base) dx` over the polytope.
    pub fn second_moment(&self, base: Vec3) -> SymTensor3 {
        polytope_second_moment(self, base)
    }

    /// Wavefront OBJ polygon soup; vertex indices are offset by `first_index`
    /// (OBJ indices start at 1).
    pub fn write_obj(&self, name: &str, first_index: usize, out: &mut impl std::io::Write) -> std::io::Result<usize> {
        writeln!(out, "o {name}")?;
        for v in &self.vertices {
            writeln!(out, "v {:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
        }
        for f in 0..self.face_count() {
            write!(out, "f")?;
            for i in self.face(f) {
                write!(out, " {}", i + first_index)?;
            }
            writeln!(out)?;
        }
        Ok(self.vertices.len())
    }
}

/// Reusable scratch buffers for repeated in-place clipping.
#[derive(Debug, Default)]
pub struct Clipper {
    dist: Vec<f64>,
    remap: Vec<u32>,
    cut_edges: Vec<(u32, u32, u32)>,
    cut_points: Vec<Vec3>,
    cap: Vec<u32>,
    new_vertices: Vec<Vec3>,
    new_ring: Vec<u32>,
    new_starts: Vec<u32>,
    new_planes: Vec<HalfSpace>,
    cap_sort: Vec<(f64, u32)>,
}

const UNMAPPED: u32 = u32::MAX;

impl Clipper {
    /// Replaces `poly` by `poly ∩ h`.
    pub fn clip(&mut self, poly: &mut ConvexPolytope, h: &HalfSpace) -> ClipOutcome {
        if poly.is_empty() {
            return ClipOutcome::Empty;
        }
        let eps = REL_TOL * poly.diameter();
        self.dist.clear();
        self.dist
            .extend(poly.vertices.iter().map(|&v| h.signed_distance(v)));
        let max = self.dist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max <= eps {
            return ClipOutcome::Unchanged;
        }
        let min = self.dist.iter().copied().fold(f64::INFINITY, f64::min);
        if min >= -eps {
            *poly = ConvexPolytope::empty();
            return ClipOutcome::Empty;
        }

        self.new_vertices.clear();
        self.new_ring.clear();
        self.new_starts.clear();
        self.new_starts.push(0);
        self.new_planes.clear();
        self.cap.clear();
        self.cut_edges.clear();
        self.cut_points.clear();
        self.remap.clear();
        self.remap.resize(poly.vertices.len(), UNMAPPED);

        // Vertices on the plane belong to the cap.
        for (i, &d) in self.dist.iter().enumerate() {
            if d.abs() <= eps {
                let id = self.new_vertices.len() as u32;
                self.remap[i] = id;
                self.new_vertices.push(poly.vertices[i]);
                self.cap.push(id);
            }
        }

        // Crossing edges, each visited from both adjacent faces; merge
        // intersection points that coincide with each other or with an
        // on-plane vertex.
        for f in 0..poly.face_count() {
            let (a, b) = (poly.starts[f] as usize, poly.starts[f + 1] as usize);
            let ring = &poly.ring[a..b];
            for k in 0..ring.len() {
                let (i, j) = (ring[k], ring[(k + 1) % ring.len()]);
                let (di, dj) = (self.dist[i as usize], self.dist[j as usize]);
                let crossing = (di < -eps && dj > eps) || (di > eps && dj < -eps);
                if !crossing {
                    continue;
                }
                let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                if self.cut_edges.iter().any(|e| e.0 == lo && e.1 == hi) {
                    continue;
                }
                let (dl, dh) = (self.dist[lo as usize], self.dist[hi as usize]);
                let (vl, vh) = (poly.vertices[lo as usize], poly.vertices[hi as usize]);
                let t = dl / (dl - dh);
                let x = vl + (vh - vl) * t;
                let id = match self
                    .cap
                    .iter()
                    .find(|&&c| self.new_vertices[c as usize].distance(x) <= eps)
                {
                    Some(&c) => c,
                    None => {
                        let id = self.new_vertices.len() as u32;
                        self.new_vertices.push(x);
                        self.cap.push(id);
                        id
                    }
                };
                self.cut_edges.push((lo, hi, id));
            }
        }

        // Clip every face ring.
        for f in 0..poly.face_count() {
            let (a, b) = (poly.starts[f] as usize, poly.starts[f + 1] as usize);
            let ring = &poly.ring[a..b];
            let face_start = self.new_ring.len();
            for k in 0..ring.len() {
                let (i, j) = (ring[k], ring[(k + 1) % ring.len()]);
                let (di, dj) = (self.dist[i as usize], self.dist[j as usize]);
                if di <= eps {
                    if self.remap[i as usize] == UNMAPPED {
                        self.remap[i as usize] = self.new_vertices.len() as u32;
                        self.new_vertices.push(poly.vertices[i as usize]);
                    }
                    push_distinct(&mut self.new_ring, face_start, self.remap[i as usize]);
                }
                if (di < -eps && dj > eps) || (di > eps && dj < -eps) {
                    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                    let id = self
                        .cut_edges
                        .iter()
                        .find(|e| e.0 == lo && e.1 == hi)
                        .map(|e| e.2)
                        .expect("crossing edge registered");
                    push_distinct(&mut self.new_ring, face_start, id);
                }
            }
            // Close the ring: drop a trailing duplicate of the first vertex.
            while self.new_ring.len() > face_start + 1
                && self.new_ring[self.new_ring.len() - 1] == self.new_ring[face_start]
            {
                self.new_ring.pop();
            }
            if self.new_ring.len() - face_start >= 3 {
                self.new_starts.push(self.new_ring.len() as u32);
                self.new_planes.push(poly.planes[f]);
            } else {
                self.new_ring.truncate(face_start);
            }
        }

        // Close the cut with the cap polygon, ordered counter-clockwise
        // around the outward normal h.normal.
        if self.cap.len() >= 3 {
            let n = h.normal;
            let u = n.any_orthonormal();
            let w = n.cross(u);
            let mut c = Vec3::ZERO;
            for &id in &self.cap {
                c += self.new_vertices[id as usize];
            }
            c = c / self.cap.len() as f64;
            self.cap_sort.clear();
            for &id in &self.cap {
                let d = self.new_vertices[id as usize] - c;
                self.cap_sort.push((d.dot(w).atan2(d.dot(u)), id));
            }
            self.cap_sort
                .sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            self.new_ring.extend(self.cap_sort.iter().map(|e| e.1));
            self.new_starts.push(self.new_ring.len() as u32);
            self.new_planes.push(*h);
        }

        if self.new_planes.len() < 4 {
            *poly = ConvexPolytope::empty();
            return ClipOutcome::Empty;
        }

        // Compact away cap vertices no ring uses (possible only through merging).
        let mut used = vec![false; self.new_vertices.len()];
        for &i in &self.new_ring {
            used[i as usize] = true;
        }
        if used.iter().all(|&u| u) {
            std::mem::swap(&mut poly.vertices, &mut self.new_vertices);
        } else {
            let mut map = vec![UNMAPPED; used.len()];
            poly.vertices.clear();
            for (i, &u) in used.iter().enumerate() {
                if u {
                    map[i] = poly.vertices.len() as u32;
                    poly.vertices.push(self.new_vertices[i]);
                }
            }
            for i in &mut self.new_ring {
                *i = map[*i as usize];
            }
        }
        std::mem::swap(&mut poly.ring, &mut self.new_ring);
        std::mem::swap(&mut poly.starts, &mut self.new_starts);
        std::mem::swap(&mut poly.planes, &mut self.new_planes);
        ClipOutcome::Clipped
    }
}

fn push_distinct(ring: &mut Vec<u32>, face_start: usize, id: u32) {
    if ring.len() == face_start || *ring.last().unwrap() != id {
        ring.push(id);
    }
}

/// `det(b − a, c − a, d − a) / 6`, positive when `(b, c, d)` is
/// counter-clockwise seen from outside with `a` behind the triangle.
#[inline]
pub fn signed_tetra_volume(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> f64 {
    (b - a).dot((c - a).cross(d - a)) / 6.0
}

/// `∫_T (x − base) ⊗ (x − base) dx` over the tetrahedron `T = (a, b, c, d)`,
/// signed by its orientation, together with its signed volume.
///
/// With `vᵢ` the vertices relative to `base` and `s = Σ vᵢ`, the integral
/// is `V/20 · (Σ vᵢ ⊗ vᵢ + s ⊗ s)`.
pub fn tetra_second_moment(a: Vec3, b: Vec3, c: Vec3, d: Vec3, base: Vec3) -> (SymTensor3, f64) {
    let (a, b, c, d) = (a - base, b - base, c - base, d - base);
    let vol = signed_tetra_volume(a, b, c, d);
    if vol == 0.0 {
        return (SymTensor3::ZERO, 0.0);
    }
    let s = a + b + c + d;
    let sum = SymTensor3::outer(a)
        + SymTensor3::outer(b)
        + SymTensor3::outer(c)
        + SymTensor3::outer(d)
        + SymTensor3::outer(s);
    (sum * (vol / 20.0), vol)
}

/// `∫_P (x − base) ⊗ (x − base) dx` by signed tetrahedral decomposition;
/// zero for the empty polytope.
pub fn polytope_second_moment(poly: &ConvexPolytope, base: Vec3) -> SymTensor3 {
    let mut acc = SymTensor3::ZERO;
    for [a, b, c, d] in poly.tetrahedra() {
        acc += tetra_second_moment(a, b, c, d, base).0;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube() -> ConvexPolytope {
        ConvexPolytope::cuboid(Vec3::splat(-1.0), Vec3::splat(1.0))
    }

    fn assert_valid(p: &ConvexPolytope) {
        assert_eq!(p.euler_characteristic(), 2);
        assert!(p.max_planarity_error() <= 1e-9 * p.diameter());
        assert!(p.volume() > 0.0);
        // outward orientation: the centroid is inside every face plane
        let c = p.vertex_centroid();
        assert!(p.contains(c, 0.0));
    }

    #[test]
    fn cube_is_valid() {
        let c = cube();
        assert_valid(&c);
        assert!((c.volume() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn clip_half_cube() {
        let p = cube().clip(&HalfSpace::new(Vec3::X, 0.0));
        assert_valid(&p);
        assert!((p.volume() - 4.0).abs() < 1e-12);
        let (lo, hi) = p.bounding_box().unwrap();
        assert_eq!(lo, Vec3::splat(-1.0));
        assert_eq!(hi, Vec3::new(0.0, 1.0, 1.0));
    }

    #[test]
    fn clip_identity_and_empty() {
        let c = cube();
        assert_eq!(c.clip(&HalfSpace::new(Vec3::X, 2.0)), c);
        let mut p = c.clone();
        assert_eq!(
            Clipper::default().clip(&mut p, &HalfSpace::new(Vec3::X, -2.0)),
            ClipOutcome::Empty
        );
        assert!(p.is_empty());
        assert_eq!(p.volume(), 0.0);
        assert_eq!(p.second_moment(Vec3::ZERO), SymTensor3::ZERO);
    }

    #[test]
    fn clip_through_vertices_and_faces() {
        // plane through four cube vertices: the diagonal slab
        let p = cube().clip(&HalfSpace::new(Vec3::new(1.0, 1.0, 0.0), 0.0));
        assert_valid(&p);
        assert!((p.volume() - 4.0).abs() < 1e-12);
        // plane coinciding with a face, kept side: unchanged
        let q = cube().clip(&HalfSpace::new(Vec3::Z, 1.0));
        assert_eq!(q, cube());
        // coinciding face, other side: empty
        let r = cube().clip(&HalfSpace::new(-Vec3::Z, -1.0));
        assert!(r.is_empty());
        // corner cut through three vertices
        let s = cube().clip(&HalfSpace::new(Vec3::new(1.0, 1.0, 1.0), 1.0));
        assert_valid(&s);
        assert!((s.volume() - (8.0 - 4.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn tetra_canonical_simplex() {
        let (m, v) = tetra_second_moment(Vec3::ZERO, Vec3::X, Vec3::Y, Vec3::Z, Vec3::ZERO);
        assert!((v - 1.0 / 6.0).abs() < 1e-15);
        for d in [m.xx, m.yy, m.zz] {
            assert!((d - 1.0 / 60.0).abs() < 1e-15);
        }
        for o in [m.xy, m.xz, m.yz] {
            assert!((o - 1.0 / 120.0).abs() < 1e-15);
        }
        let (mf, vf) = tetra_second_moment(Vec3::X, Vec3::ZERO, Vec3::Y, Vec3::Z, Vec3::ZERO);
        assert!((vf + 1.0 / 6.0).abs() < 1e-15);
        assert!((mf + m).frobenius_norm() < 1e-15);
    }

    #[test]
    fn tetra_degenerate() {
        let (m, v) = tetra_second_moment(Vec3::X, Vec3::X, Vec3::Y, Vec3::Z, Vec3::ZERO);
        assert_eq!(v, 0.0);
        assert_eq!(m, SymTensor3::ZERO);
    }

    #[test]
    fn tetra_matches_dirichlet_monte_carlo() {
        // Uniform points in the simplex via sorted uniforms; independent of the closed form.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 400_000;
        let mut acc = SymTensor3::ZERO;
        for _ in 0..n {
            let mut u = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            u.sort_by(f64::total_cmp);
            let x = Vec3::new(u[0], u[1] - u[0], u[2] - u[1]);
            acc += SymTensor3::outer(x);
        }
        let mc = acc * (1.0 / 6.0 / n as f64);
        let (m, _) = tetra_second_moment(Vec3::ZERO, Vec3::X, Vec3::Y, Vec3::Z, Vec3::ZERO);
        assert!(m.max_abs_diff(&mc) < 2e-4);
    }

    #[test]
    fn cube_moments() {
        let m = cube().second_moment(Vec3::ZERO);
        assert!(m.max_abs_diff(&SymTensor3::diag(8.0 / 3.0, 8.0 / 3.0, 8.0 / 3.0)) < 1e-12);
        let c2 = ConvexPolytope::cuboid(Vec3::ZERO, Vec3::splat(2.0));
        let m2 = c2.second_moment(Vec3::splat(1.0));
        assert!(m2.max_abs_diff(&SymTensor3::diag(8.0 / 3.0, 8.0 / 3.0, 8.0 / 3.0)) < 1e-12);
    }

    #[test]
    fn obj_dump() {
        let mut buf = Vec::new();
        let n = cube().write_obj("cell_0", 1, &mut buf).unwrap();
        assert_eq!(n, 8);
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().filter(|l| l.starts_with("v ")).count(), 8);
        assert_eq!(s.lines().filter(|l| l.starts_with("f ")).count(), 6);
    }

    fn random_half_space(rng: &mut ChaCha8Rng) -> HalfSpace {
        let n = loop {
            let v = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if v.norm() > 0.1 && v.norm() <= 1.0 {
                break v;
            }
        };
        HalfSpace::new(n, rng.random_range(0.05..0.9) * n.norm())
    }

    fn random_polytope(rng: &mut ChaCha8Rng, cuts: usize) -> ConvexPolytope {
        let mut p = cube();
        let mut clipper = Clipper::default();
        for _ in 0..cuts {
            clipper.clip(&mut p, &random_half_space(rng));
        }
        p
    }

    #[test]
    fn random_clips_stay_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let p = random_polytope(&mut rng, 12);
            assert_valid(&p);
        }
    }

    #[test]
    fn subdivision_additivity() {
        // barycentric subdivision of a tetrahedron into four
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut r = || Vec3::new(rng.random(), rng.random(), rng.random());
        let (a, b, c, d, base) = (r(), r(), r(), r(), r());
        let g = (a + b + c + d) / 4.0;
        let (whole, vol) = tetra_second_moment(a, b, c, d, base);
        let parts = [
            tetra_second_moment(g, b, c, d, base),
            tetra_second_moment(a, g, c, d, base),
            tetra_second_moment(a, b, g, d, base),
            tetra_second_moment(a, b, c, g, base),
        ];
        let sum = parts.iter().fold(SymTensor3::ZERO, |s, p| s + p.0);
        let vsum: f64 = parts.iter().map(|p| p.1).sum();
        assert!((vsum - vol).abs() < 1e-14);
        assert!(sum.max_abs_diff(&whole) < 1e-14);
    }

    /// Rejection-sampling oracle for the second moment of a polytope.
    /// Returns per-entry means and standard errors; index 6 is the trace.
    fn mc_moment(p: &ConvexPolytope, base: Vec3, n: usize, seed: u64) -> ([f64; 7], [f64; 7]) {
        let (lo, hi) = p.bounding_box().unwrap();
        let ext = hi - lo;
        let box_vol = ext.x * ext.y * ext.z;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sum = [0.0; 7];
        let mut sum2 = [0.0; 7];
        for _ in 0..n {
            let x = lo + Vec3::new(ext.x * rng.random::<f64>(), ext.y * rng.random::<f64>(), ext.z * rng.random::<f64>());
            if p.contains(x, 0.0) {
                let t = SymTensor3::outer(x - base);
                let mut e = [0.0; 7];
                e[..6].copy_from_slice(&t.to_array());
                e[6] = t.trace();
                for k in 0..7 {
                    sum[k] += e[k];
                    sum2[k] += e[k] * e[k];
                }
            }
        }
        let nf = n as f64;
        let mut mean = [0.0; 7];
        let mut sigma = [0.0; 7];
        for k in 0..7 {
            let m = sum[k] / nf;
            mean[k] = m * box_vol;
            sigma[k] = ((sum2[k] / nf - m * m).max(0.0) / nf).sqrt() * box_vol;
        }
        (mean, sigma)
    }

    #[test]
    fn moments_match_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..100 {
            let p = random_polytope(&mut rng, 6);
            let base = Vec3::new(0.3, -0.2, 0.1);
            let exact = p.second_moment(base);
            let (m, s) = mc_moment(&p, base, 1_000_000, i);
            assert!(
                (exact.trace() - m[6]).abs() <= 3.0 * s[6],
                "trace: exact {} mc {} sigma {}",
                exact.trace(),
                m[6],
                s[6]
            );
            // six entries per polytope: a looser per-entry band keeps the
            // family-wise false alarm rate negligible
            let e = exact.to_array();
            for k in 0..6 {
                assert!((e[k] - m[k]).abs() <= 4.5 * s[k] + 1e-12, "entry {k}: {} vs {}", e[k], m[k]);
            }
        }
    }

    proptest! {
        #[test]
        fn clipping_is_monotone(nx in -1.0f64..1.0, ny in -1.0f64..1.0, nz in -1.0f64..1.0, b in -2.0f64..2.0) {
            prop_assume!(Vec3::new(nx, ny, nz).norm() > 1e-3);
            let c = cube();
            let p = c.clip(&HalfSpace::new(Vec3::new(nx, ny, nz), b));
            prop_assert!(p.volume() <= c.volume() + 1e-12);
            if !p.is_empty() {
                prop_assert_eq!(p.euler_characteristic(), 2);
            }
        }
    }
}
