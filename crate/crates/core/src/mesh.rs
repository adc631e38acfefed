//! Triangulations of rectangles and per-element geometry.
//!
//! Every triangle stores its vertices counterclockwise, and vertex 0 is the
//! distinguished vertex `P_0` used by the affine map `x̂ ↦ P_0 + B x̂` and by
//! the Θ construction in [`crate::nonlinearity`]. Generated meshes put the
//! right angle at vertex 0.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use crate::math;
use crate::{Error, Result};

/// Spatial dimension handled by the solver.
pub const DIM: usize = 2;

/// Angle slack used when deciding whether a triangle is nonobtuse.
pub const ANGLE_TOL: f64 = 1e-12;

/// Axis-aligned rectangle `(xmin, xmax) × (ymin, ymax)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub const fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        Self { xmin, xmax, ymin, ymax }
    }

    pub const fn unit_square() -> Self {
        Self::new(0.0, 1.0, 0.0, 1.0)
    }

    pub fn area(&self) -> f64 {
        (self.xmax - self.xmin) * (self.ymax - self.ymin)
    }

    fn is_valid(&self) -> bool {
        [self.xmin, self.xmax, self.ymin, self.ymax].iter().all(|v| v.is_finite())
            && self.xmax > self.xmin
            && self.ymax > self.ymin
    }
}

/// Cell subdivision used by [`build_structured_rect_mesh`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    /// Each cell split into two right triangles along its SW–NE diagonal.
    RightDiagonal,
    /// Each cell split into four triangles meeting at the cell centre.
    Crisscross,
}

/// Vertex indices of a triangle, counterclockwise, index 0 is `P_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle(pub [usize; 3]);

/// Identity tag of a mesh, derived from its vertex coordinates and
/// connectivity. Fields carry it so operators refuse foreign data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeshTag(pub u64);

/// `x = p0 + B x̂` mapping the reference triangle onto an element.
///
/// `b[r][c]` is row `r`, column `c`; the columns are `P_1 − P_0` and
/// `P_2 − P_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub b: [[f64; 2]; 2],
    pub p0: [f64; 2],
}

impl AffineMap {
    pub fn det(&self) -> f64 {
        self.b[0][0] * self.b[1][1] - self.b[0][1] * self.b[1][0]
    }

    pub fn apply(&self, xhat: [f64; 2]) -> [f64; 2] {
        [
            self.p0[0] + self.b[0][0] * xhat[0] + self.b[0][1] * xhat[1],
            self.p0[1] + self.b[1][0] * xhat[0] + self.b[1][1] * xhat[1],
        ]
    }

    pub fn transpose(&self) -> [[f64; 2]; 2] {
        [[self.b[0][0], self.b[1][0]], [self.b[0][1], self.b[1][1]]]
    }

    /// `(Bᵀ)⁻¹`, which maps reference gradients to physical ones.
    pub fn inverse_transpose(&self) -> [[f64; 2]; 2] {
        let det = self.det();
        [[self.b[1][1] / det, -self.b[1][0] / det], [-self.b[0][1] / det, self.b[0][0] / det]]
    }
}

/// Outcome of [`check_weakly_acute`].
#[derive(Debug, Clone, PartialEq)]
pub struct AcuteReport {
    pub ok: bool,
    /// Largest interior angle over the mesh, in radians.
    pub worst_angle: f64,
    pub offending_elems: Vec<usize>,
}

/// A conforming triangulation with cached element geometry.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<Triangle>,
    bounds: Rect,
    areas: Vec<f64>,
    gradients: Vec<[[f64; 2]; 3]>,
    h: f64,
    tag: MeshTag,
}

impl Mesh {
    /// Validates and wraps raw vertex/triangle data.
    ///
    /// Checks finite coordinates, index ranges, distinct vertices,
    /// counterclockwise orientation with nonzero area, and edge conformity
    /// (no edge shared by more than two triangles, shared edges traversed in
    /// opposite directions).
    pub fn from_parts(vertices: Vec<[f64; 2]>, triangles: Vec<Triangle>) -> Result<Self> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh needs vertices and triangles".into()));
        }
        for (i, v) in vertices.iter().enumerate() {
            for &c in v {
                if !c.is_finite() {
                    return Err(Error::NonFinite { vertex: i, value: c });
                }
            }
        }
        let n = vertices.len();
        let mut edges: BTreeMap<(usize, usize), (u8, i8)> = BTreeMap::new();
        let mut areas = Vec::with_capacity(triangles.len());
        let mut gradients = Vec::with_capacity(triangles.len());
        let mut h: f64 = 0.0;
        for (e, t) in triangles.iter().enumerate() {
            let [a, b, c] = t.0;
            if a >= n || b >= n || c >= n {
                return Err(Error::InvalidMesh(format!("element {e} references a missing vertex")));
            }
            if a == b || b == c || a == c {
                return Err(Error::InvalidMesh(format!("element {e} repeats a vertex")));
            }
            let map = map_of(&vertices, t);
            let det = map.det();
            let scale = diameter_of(&vertices, t);
            if !(det > 1e-14 * scale * scale) {
                return Err(Error::DegenerateElement { elem: e, area: 0.5 * det });
            }
            areas.push(0.5 * det);
            gradients.push(gradients_of(&map));
            h = h.max(scale);
            for (p, q) in [(a, b), (b, c), (c, a)] {
                let key = (p.min(q), p.max(q));
                let dir: i8 = if p < q { 1 } else { -1 };
                let entry = edges.entry(key).or_insert((0, 0));
                entry.0 += 1;
                entry.1 += dir;
                if entry.0 > 2 || entry.1.abs() > 1 {
                    return Err(Error::InvalidMesh(format!("edge ({}, {}) is not conforming", key.0, key.1)));
                }
            }
        }
        let mut bounds = Rect::new(f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for v in &vertices {
            bounds.xmin = bounds.xmin.min(v[0]);
            bounds.xmax = bounds.xmax.max(v[0]);
            bounds.ymin = bounds.ymin.min(v[1]);
            bounds.ymax = bounds.ymax.max(v[1]);
        }
        let tag = tag_of(&vertices, &triangles);
        Ok(Self { vertices, triangles, bounds, areas, gradients, h, tag })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> [f64; 2] {
        self.vertices[i]
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    /// Bounding box of the vertices; equals the domain for rectangle meshes.
    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    /// Maximum element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn tag(&self) -> MeshTag {
        self.tag
    }

    pub fn area(&self, elem: usize) -> f64 {
        self.areas[elem]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    /// `|Ω|` as the sum of element areas.
    pub fn domain_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Constant gradients of the three local hat functions on `elem`.
    pub fn basis_gradients(&self, elem: usize) -> &[[f64; 2]; 3] {
        &self.gradients[elem]
    }

    pub fn barycenter(&self, elem: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[elem].0;
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    pub fn diameter(&self, elem: usize) -> f64 {
        diameter_of(&self.vertices, &self.triangles[elem])
    }

    pub fn inradius(&self, elem: usize) -> f64 {
        let [a, b, c] = self.triangles[elem].0;
        let perimeter = dist(self.vertices[a], self.vertices[b])
            + dist(self.vertices[b], self.vertices[c])
            + dist(self.vertices[c], self.vertices[a]);
        2.0 * self.areas[elem] / perimeter
    }

    /// Max element diameter over min inradius; bounded for quasi-uniform
    /// families.
    pub fn shape_ratio(&self) -> f64 {
        let min_in = (0..self.num_triangles()).map(|e| self.inradius(e)).fold(f64::INFINITY, f64::min);
        self.h / min_in
    }

    /// `(φ_0(p), φ_1(p), φ_2(p))` for the local basis of `elem`.
    pub fn barycentric(&self, elem: usize, p: [f64; 2]) -> [f64; 3] {
        let g = &self.gradients[elem];
        let c = self.barycenter(elem);
        let d = sub(p, c);
        [0, 1, 2].map(|a| 1.0 / 3.0 + g[a][0] * d[0] + g[a][1] * d[1])
    }

    pub fn affine_map(&self, elem: usize) -> Result<AffineMap> {
        let t = self.triangles.get(elem).ok_or(Error::ElementIndex { elem, count: self.triangles.len() })?;
        Ok(map_of(&self.vertices, t))
    }

    /// Interior angles of `elem` at its vertices 0, 1, 2.
    pub fn angles(&self, elem: usize) -> [f64; 3] {
        let [a, b, c] = self.triangles[elem].0;
        let p = [self.vertices[a], self.vertices[b], self.vertices[c]];
        let mut out = [0.0; 3];
        for i in 0..3 {
            let o = p[i];
            let u = sub(p[(i + 1) % 3], o);
            let v = sub(p[(i + 2) % 3], o);
            let cos = (u[0] * v[0] + u[1] * v[1]) / (norm(u) * norm(v));
            out[i] = math::acos(cos);
        }
        out
    }
}

/// Builds a structured triangulation of `bounds` with `nx × ny` cells.
pub fn build_structured_rect_mesh(bounds: Rect, nx: usize, ny: usize, pattern: Pattern) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidMesh(format!("need nx, ny >= 1 (got {nx} x {ny})")));
    }
    if !bounds.is_valid() {
        return Err(Error::InvalidMesh(format!("bounds {bounds:?} are inverted or degenerate")));
    }
    let hx = (bounds.xmax - bounds.xmin) / nx as f64;
    let hy = (bounds.ymax - bounds.ymin) / ny as f64;
    let coord = |i: usize, j: usize| -> [f64; 2] {
        // Pin the far edges exactly to the bounds.
        let x = if i == nx { bounds.xmax } else { bounds.xmin + i as f64 * hx };
        let y = if j == ny { bounds.ymax } else { bounds.ymin + j as f64 * hy };
        [x, y]
    };
    let corner = |i: usize, j: usize| j * (nx + 1) + i;

    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(coord(i, j));
        }
    }
    let mut triangles = Vec::new();
    match pattern {
        Pattern::RightDiagonal => {
            triangles.reserve(2 * nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    let (sw, se, ne, nw) = (corner(i, j), corner(i + 1, j), corner(i + 1, j + 1), corner(i, j + 1));
                    triangles.push(Triangle([se, ne, sw]));
                    triangles.push(Triangle([nw, sw, ne]));
                }
            }
        }
        Pattern::Crisscross => {
            triangles.reserve(4 * nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    let (sw, se, ne, nw) = (corner(i, j), corner(i + 1, j), corner(i + 1, j + 1), corner(i, j + 1));
                    let m = vertices.len();
                    let (a, b) = (coord(i, j), coord(i + 1, j + 1));
                    vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                    triangles.push(Triangle([m, sw, se]));
                    triangles.push(Triangle([m, se, ne]));
                    triangles.push(Triangle([m, ne, nw]));
                    triangles.push(Triangle([m, nw, sw]));
                }
            }
        }
    }
    let mesh = Mesh::from_parts(vertices, triangles)?;
    let area = mesh.domain_area();
    if (area - bounds.area()).abs() > 1e-12 * bounds.area() {
        return Err(Error::InvalidMesh(format!("element areas sum to {area}, domain area is {}", bounds.area())));
    }
    let report = check_weakly_acute(&mesh);
    if !report.ok {
        return Err(Error::InvalidMesh(format!(
            "{} elements are obtuse (worst angle {} rad); use square cells for this pattern",
            report.offending_elems.len(),
            report.worst_angle
        )));
    }
    Ok(mesh)
}

/// Reports whether every interior angle is at most `π/2 + ANGLE_TOL`.
pub fn check_weakly_acute(mesh: &Mesh) -> AcuteReport {
    let mut worst: f64 = 0.0;
    let mut offending = Vec::new();
    for e in 0..mesh.num_triangles() {
        let max = mesh.angles(e).into_iter().fold(0.0, f64::max);
        worst = worst.max(max);
        if max > FRAC_PI_2 + ANGLE_TOL {
            offending.push(e);
        }
    }
    AcuteReport { ok: offending.is_empty(), worst_angle: worst, offending_elems: offending }
}

/// Barycentric coordinates below this are treated as outside an element.
pub const LOCATE_TOL: f64 = 1e-10;

/// Bucket grid over a mesh's bounding box for point location.
#[derive(Debug, Clone)]
pub struct PointLocator<'m> {
    mesh: &'m Mesh,
    bounds: Rect,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'m> PointLocator<'m> {
    pub fn new(mesh: &'m Mesh) -> Self {
        let bounds = mesh.bounds();
        let side = math::sqrt(mesh.num_triangles() as f64) as usize;
        let (cols, rows) = (side.max(1), side.max(1));
        let mut loc = Self { mesh, bounds, cols, rows, buckets: vec![Vec::new(); cols * rows] };
        for (k, t) in mesh.triangles().iter().enumerate() {
            let ps = t.0.map(|i| mesh.vertex(i));
            let lo = loc.cell([ps[0][0].min(ps[1][0]).min(ps[2][0]), ps[0][1].min(ps[1][1]).min(ps[2][1])]);
            let hi = loc.cell([ps[0][0].max(ps[1][0]).max(ps[2][0]), ps[0][1].max(ps[1][1]).max(ps[2][1])]);
            for r in lo.1..=hi.1 {
                for c in lo.0..=hi.0 {
                    loc.buckets[r * cols + c].push(k);
                }
            }
        }
        loc
    }

    fn cell(&self, p: [f64; 2]) -> (usize, usize) {
        let b = &self.bounds;
        let fx = (p[0] - b.xmin) / (b.xmax - b.xmin) * self.cols as f64;
        let fy = (p[1] - b.ymin) / (b.ymax - b.ymin) * self.rows as f64;
        let clamp = |f: f64, n: usize| (f.max(0.0) as usize).min(n - 1);
        (clamp(fx, self.cols), clamp(fy, self.rows))
    }

    /// Element containing `p` and the barycentric coordinates of `p` in it.
    /// Points on shared edges resolve to the element where `p` is deepest.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let (c, r) = self.cell(p);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &k in &self.buckets[r * self.cols + c] {
            let lam = self.mesh.barycentric(k, p);
            let depth = lam[0].min(lam[1]).min(lam[2]);
            if depth >= -LOCATE_TOL && best.is_none_or(|b| depth > b.2) {
                best = Some((k, lam, depth));
            }
        }
        best.map(|(k, lam, _)| (k, lam))
    }
}

fn map_of(vertices: &[[f64; 2]], t: &Triangle) -> AffineMap {
    let [a, b, c] = t.0;
    let p0 = vertices[a];
    let e1 = sub(vertices[b], p0);
    let e2 = sub(vertices[c], p0);
    AffineMap { b: [[e1[0], e2[0]], [e1[1], e2[1]]], p0 }
}

fn gradients_of(map: &AffineMap) -> [[f64; 2]; 3] {
    // ∇φ_j = B^{-T} ê_j for j = 1, 2 and ∇φ_0 = −∇φ_1 − ∇φ_2.
    let bit = map.inverse_transpose();
    let g1 = [bit[0][0], bit[1][0]];
    let g2 = [bit[0][1], bit[1][1]];
    [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2]
}

fn diameter_of(vertices: &[[f64; 2]], t: &Triangle) -> f64 {
    let [a, b, c] = t.0;
    dist(vertices[a], vertices[b]).max(dist(vertices[b], vertices[c])).max(dist(vertices[c], vertices[a]))
}

fn tag_of(vertices: &[[f64; 2]], triangles: &[Triangle]) -> MeshTag {
    // FNV-1a over coordinate bits and connectivity.
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |word: u64| {
        for byte in word.to_le_bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0100_0000_01b3);
        }
    };
    feed(vertices.len() as u64);
    for v in vertices {
        feed(v[0].to_bits());
        feed(v[1].to_bits());
    }
    feed(triangles.len() as u64);
    for t in triangles {
        for &i in &t.0 {
            feed(i as u64);
        }
    }
    MeshTag(hash)
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: [f64; 2]) -> f64 {
    math::hypot(a[0], a[1])
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    norm(sub(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::SQRT_2;

    fn single(p: [[f64; 2]; 3]) -> Mesh {
        Mesh::from_parts(p.to_vec(), vec![Triangle([0, 1, 2])]).unwrap()
    }

    #[test]
    fn unit_square_one_cell() {
        let m = build_structured_rect_mesh(Rect::unit_square(), 1, 1, Pattern::RightDiagonal).unwrap();
        assert_eq!(m.num_triangles(), 2);
        assert_eq!(m.num_vertices(), 4);
        assert_abs_diff_eq!(m.domain_area(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.h(), SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn counts_two_by_two() {
        let m = build_structured_rect_mesh(Rect::unit_square(), 2, 2, Pattern::RightDiagonal).unwrap();
        assert_eq!(m.num_triangles(), 8);
        assert_eq!(m.num_vertices(), 9);
        let c = build_structured_rect_mesh(Rect::unit_square(), 2, 2, Pattern::Crisscross).unwrap();
        assert_eq!(c.num_triangles(), 16);
        assert_eq!(c.num_vertices(), 13);
    }

    #[test]
    fn fine_mesh_diameter() {
        let m = build_structured_rect_mesh(Rect::new(-2.0, 2.0, -2.0, 2.0), 64, 64, Pattern::RightDiagonal).unwrap();
        assert_abs_diff_eq!(m.h(), 4.0 * SQRT_2 / 64.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.domain_area(), 16.0, epsilon = 16.0 * 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_structured_rect_mesh(Rect::unit_square(), 0, 3, Pattern::RightDiagonal).is_err());
        assert!(build_structured_rect_mesh(Rect::unit_square(), 3, 0, Pattern::Crisscross).is_err());
        assert!(build_structured_rect_mesh(Rect::new(1.0, 0.0, 0.0, 1.0), 2, 2, Pattern::RightDiagonal).is_err());
        assert!(build_structured_rect_mesh(Rect::new(0.0, 1.0, 0.0, 0.0), 2, 2, Pattern::RightDiagonal).is_err());
    }

    #[test]
    fn rejects_degenerate_and_clockwise() {
        let flat = Mesh::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], vec![Triangle([0, 1, 2])]);
        assert!(matches!(flat, Err(Error::DegenerateElement { .. })));
        let cw = Mesh::from_parts(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]], vec![Triangle([0, 1, 2])]);
        assert!(matches!(cw, Err(Error::DegenerateElement { .. })));
    }

    #[test]
    fn rejects_nonconforming_fan() {
        // Three triangles on one edge.
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.5, -1.0], [0.5, 2.0]];
        let t = vec![Triangle([0, 1, 2]), Triangle([1, 0, 3]), Triangle([0, 1, 4])];
        assert!(Mesh::from_parts(v, t).is_err());
    }

    #[test]
    fn affine_map_examples() {
        let m = single([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let a = m.affine_map(0).unwrap();
        assert_eq!(a.b, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(a.p0, [0.0, 0.0]);

        let m = single([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]);
        assert_eq!(m.affine_map(0).unwrap().b, [[2.0, 0.0], [0.0, 2.0]]);

        let m = single([[1.0, 1.0], [2.0, 1.0], [1.0, 3.0]]);
        let a = m.affine_map(0).unwrap();
        assert_eq!(a.b, [[1.0, 0.0], [0.0, 2.0]]);
        assert_eq!(a.p0, [1.0, 1.0]);
        assert_abs_diff_eq!(a.det().abs(), 2.0 * m.area(0), epsilon = 1e-15);

        assert!(matches!(m.affine_map(1), Err(Error::ElementIndex { .. })));
    }

    #[test]
    fn affine_map_round_trip_on_generated_mesh() {
        let m = build_structured_rect_mesh(Rect::new(-1.0, 3.0, 0.5, 2.0), 7, 5, Pattern::RightDiagonal).unwrap();
        for (e, t) in m.triangles().iter().enumerate() {
            let a = m.affine_map(e).unwrap();
            for (k, xhat) in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]].into_iter().enumerate() {
                let x = a.apply(xhat);
                let p = m.vertex(t.0[k]);
                assert!((x[0] - p[0]).abs() <= 1e-14 && (x[1] - p[1]).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn weak_acuteness() {
        let m = build_structured_rect_mesh(Rect::unit_square(), 4, 4, Pattern::RightDiagonal).unwrap();
        let r = check_weakly_acute(&m);
        assert!(r.ok);
        assert_abs_diff_eq!(r.worst_angle, FRAC_PI_2, epsilon = 1e-12);

        let m = single([[0.0, 0.0], [4.0, 0.0], [0.1, 0.3]]);
        let r = check_weakly_acute(&m);
        assert!(!r.ok);
        assert_eq!(r.offending_elems, vec![0]);
        // Law of cosines at (0.1, 0.3): sides to the other vertices.
        let (a2, b2, c2) = (0.1f64 * 0.1 + 0.09, 3.9f64 * 3.9 + 0.09, 16.0f64);
        let expected = ((a2 + b2 - c2) / (2.0 * (a2 * b2).sqrt())).acos();
        assert_abs_diff_eq!(r.worst_angle, expected, epsilon = 1e-12);

        let c = build_structured_rect_mesh(Rect::unit_square(), 3, 3, Pattern::Crisscross).unwrap();
        let r = check_weakly_acute(&c);
        assert!(r.ok);
        assert_abs_diff_eq!(r.worst_angle, FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn crisscross_on_stretched_cells_is_rejected() {
        assert!(build_structured_rect_mesh(Rect::new(0.0, 2.0, 0.0, 1.0), 2, 4, Pattern::Crisscross).is_err());
    }

    #[test]
    fn right_angle_sits_at_vertex_zero() {
        for pattern in [Pattern::RightDiagonal, Pattern::Crisscross] {
            let m = build_structured_rect_mesh(Rect::unit_square(), 3, 3, pattern).unwrap();
            for e in 0..m.num_triangles() {
                assert_abs_diff_eq!(m.angles(e)[0], FRAC_PI_2, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn shape_ratio_is_refinement_invariant() {
        for pattern in [Pattern::RightDiagonal, Pattern::Crisscross] {
            let ratios: Vec<f64> = [2, 4, 8, 16]
                .iter()
                .map(|&n| build_structured_rect_mesh(Rect::unit_square(), n, n, pattern).unwrap().shape_ratio())
                .collect();
            for r in &ratios[1..] {
                assert_abs_diff_eq!(*r, ratios[0], epsilon = 1e-9 * ratios[0]);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn areas_sum_to_domain(nx in 1usize..20, ny in 1usize..20, w in 0.1f64..5.0, hgt in 0.1f64..5.0, x0 in -3.0f64..3.0) {
                let r = Rect::new(x0, x0 + w, -hgt, 0.0);
                let m = build_structured_rect_mesh(r, nx, ny, Pattern::RightDiagonal).unwrap();
                prop_assert!((m.domain_area() - r.area()).abs() <= 1e-12 * r.area());
                prop_assert_eq!(m.num_triangles(), 2 * nx * ny);
                prop_assert_eq!(m.num_vertices(), (nx + 1) * (ny + 1));
            }
        }
    }
}
