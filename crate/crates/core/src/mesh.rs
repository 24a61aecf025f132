//! Conforming triangulations of partitioned squares and interval meshes.
//!
//! Two families of 2D domains are supported. `checkerboard(2)` and the
//! distorted four-subdomain partition live on `]-1/2,1/2[²` and are built
//! from four bilinearly mapped quadrilaterals meeting at an interior point.
//! `checkerboard(m)` for `m != 2` is a tensor grid on `]0,1[²`.
//! Subdomain ids are 0-based in memory and numbered row-major from the
//! bottom-left subdomain.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const DEFAULT_INTERIOR_POINT: [f64; 2] = [0.1, -0.08];

/// Edge points of the default distorted partition, ordered bottom, right, top, left.
pub const DEFAULT_EDGE_POINTS: [[f64; 2]; 4] = [[-0.08, -0.5], [0.5, 0.1], [-0.08, 0.5], [-0.5, 0.1]];

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum GeometryKind {
    Checkerboard { m: usize },
    /// Four quadrilaterals sharing `interior_point`; `edge_points` are the
    /// interface end points on the bottom, right, top and left sides.
    DistortedQuad { interior_point: [f64; 2], edge_points: [[f64; 2]; 4] },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub refinement_level: u32,
    pub grading_strength: f64,
}

impl GeometrySpec {
    pub fn checkerboard(m: usize, refinement_level: u32, grading_strength: f64) -> Self {
        Self { kind: GeometryKind::Checkerboard { m }, refinement_level, grading_strength }
    }

    pub fn distorted(refinement_level: u32, grading_strength: f64) -> Self {
        Self {
            kind: GeometryKind::DistortedQuad {
                interior_point: DEFAULT_INTERIOR_POINT,
                edge_points: DEFAULT_EDGE_POINTS,
            },
            refinement_level,
            grading_strength,
        }
    }

    pub fn num_subdomains(&self) -> usize {
        match self.kind {
            GeometryKind::Checkerboard { m } => m * m,
            GeometryKind::DistortedQuad { .. } => 4,
        }
    }

    /// Cells along each subdomain edge: `2^(refinement_level + 1)`.
    pub fn cells_per_edge(&self) -> usize {
        2usize << self.refinement_level
    }

    pub fn validate(&self) -> Result<()> {
        if !self.grading_strength.is_finite() || self.grading_strength < 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "grading strength must be finite and nonnegative, got {}",
                self.grading_strength
            )));
        }
        if self.refinement_level > 12 {
            return Err(Error::InvalidGeometry(format!(
                "refinement level {} is too large",
                self.refinement_level
            )));
        }
        match &self.kind {
            GeometryKind::Checkerboard { m } => {
                if *m == 0 {
                    return Err(Error::InvalidGeometry("checkerboard needs m >= 1".into()));
                }
            }
            GeometryKind::DistortedQuad { interior_point: p, edge_points: e } => {
                let inside = |q: [f64; 2]| q[0].abs() < 0.5 && q[1].abs() < 0.5;
                if !p.iter().all(|c| c.is_finite()) || !inside(*p) {
                    return Err(Error::InvalidGeometry(format!(
                        "interior point {p:?} is not strictly inside the domain"
                    )));
                }
                let on_side = [
                    e[0][1] == -0.5 && e[0][0].abs() < 0.5,
                    e[1][0] == 0.5 && e[1][1].abs() < 0.5,
                    e[2][1] == 0.5 && e[2][0].abs() < 0.5,
                    e[3][0] == -0.5 && e[3][1].abs() < 0.5,
                ];
                for (k, ok) in on_side.iter().enumerate() {
                    if !ok {
                        return Err(Error::InvalidGeometry(format!(
                            "edge point {k} = {:?} is not strictly inside its side",
                            e[k]
                        )));
                    }
                }
                for (k, quad) in four_quads(*p, *e).iter().enumerate() {
                    if !strictly_convex(&ccw_polygon(quad)) {
                        return Err(Error::InvalidGeometry(format!(
                            "subdomain {} is not a strictly convex quadrilateral",
                            k + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Mesh2D {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub subdomain_of_triangle: Vec<usize>,
    pub is_dirichlet_vertex: Vec<bool>,
    pub is_skeleton_vertex: Vec<bool>,
    pub num_subdomains: usize,
    /// Lower-left and upper-right corner of the square domain.
    pub bounds: [[f64; 2]; 2],
    /// Convex counterclockwise boundary polygon of each subdomain.
    pub subdomain_polygons: Vec<Vec<[f64; 2]>>,
    /// Vertex permutations induced by swapping the left/right and the
    /// bottom/top subdomains of a four-quadrilateral partition. On the
    /// symmetric checkerboard these are the coordinate reflections.
    pub reflections: Option<[Vec<usize>; 2]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryReport {
    pub symmetric: bool,
    pub violating_vertices: Vec<usize>,
    pub unmatched_triangles: usize,
    pub labels_consistent: bool,
}

/// Mesh of `]0,1[` split into `d` equal subintervals.
#[derive(Clone, Debug)]
pub struct IntervalMesh {
    pub d: usize,
    pub cells_per_subinterval: usize,
    pub nodes: Vec<f64>,
    pub subdomain_of_cell: Vec<usize>,
    pub is_skeleton_node: Vec<bool>,
}

impl IntervalMesh {
    pub fn num_cells(&self) -> usize {
        self.nodes.len() - 1
    }
}

pub fn build_interval_mesh(d: usize, cells_per_subinterval: usize) -> Result<IntervalMesh> {
    if d == 0 || cells_per_subinterval == 0 {
        return Err(Error::InvalidArgument(
            "interval mesh needs d >= 1 and at least one cell per subinterval".into(),
        ));
    }
    let n = d * cells_per_subinterval;
    let nodes: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    let subdomain_of_cell = (0..n).map(|c| c / cells_per_subinterval).collect();
    let is_skeleton_node =
        (0..=n).map(|k| k > 0 && k < n && k % cells_per_subinterval == 0).collect();
    Ok(IntervalMesh { d, cells_per_subinterval, nodes, subdomain_of_cell, is_skeleton_node })
}

/// Nodes on `[0,1]` whose cell widths shrink geometrically by `q` toward
/// each graded end.
fn graded_unit_nodes(n: usize, q: f64, grade_left: bool, grade_right: bool) -> Vec<f64> {
    let toward_one = |n: usize| -> Vec<f64> {
        let mut s: Vec<f64> = if q >= 1.0 {
            (0..=n).map(|j| j as f64 / n as f64).collect()
        } else {
            let qn = q.powi(n as i32);
            (0..=n).map(|j| 1.0 - (q.powi(j as i32) - qn) / (1.0 - qn)).collect()
        };
        s[0] = 0.0;
        s[n] = 1.0;
        s
    };
    match (grade_left, grade_right) {
        (false, false) => (0..=n).map(|j| j as f64 / n as f64).collect(),
        (false, true) => toward_one(n),
        (true, false) => toward_one(n).iter().rev().map(|s| 1.0 - s).collect(),
        (true, true) => {
            let h = n / 2;
            let half = toward_one(h);
            let mut out: Vec<f64> = half.iter().rev().map(|s| 0.5 * (1.0 - s)).collect();
            let right = toward_one(n - h);
            out.extend(right.iter().skip(1).map(|s| 0.5 + 0.5 * s));
            out
        }
    }
}

fn grading_ratio(strength: f64) -> f64 {
    (-strength).exp2()
}

/// Corner, horizontal-side point, vertical-side point and interior point of
/// each subdomain, in subdomain order.
fn four_quads(p: [f64; 2], e: [[f64; 2]; 4]) -> [[[f64; 2]; 4]; 4] {
    let [bottom, right, top, left] = e;
    [
        [[-0.5, -0.5], bottom, left, p],
        [[0.5, -0.5], bottom, right, p],
        [[-0.5, 0.5], top, left, p],
        [[0.5, 0.5], top, right, p],
    ]
}

fn ccw_polygon(quad: &[[f64; 2]; 4]) -> Vec<[f64; 2]> {
    let poly = vec![quad[0], quad[1], quad[3], quad[2]];
    if polygon_area(&poly) < 0.0 {
        poly.into_iter().rev().collect()
    } else {
        poly
    }
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|k| {
            let a = poly[k];
            let b = poly[(k + 1) % n];
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        * 0.5
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn strictly_convex(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    (0..n).all(|k| cross(poly[k], poly[(k + 1) % n], poly[(k + 2) % n]) > 1e-12)
}

fn point_key(p: [f64; 2]) -> (u64, u64) {
    let norm = |x: f64| if x == 0.0 { 0.0f64.to_bits() } else { x.to_bits() };
    (norm(p[0]), norm(p[1]))
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * cross(a, b, c)
}

struct Builder {
    vertices: Vec<[f64; 2]>,
    lookup: HashMap<(u64, u64), usize>,
    triangles: Vec<[usize; 3]>,
    labels: Vec<usize>,
}

impl Builder {
    fn new() -> Self {
        Self { vertices: Vec::new(), lookup: HashMap::new(), triangles: Vec::new(), labels: Vec::new() }
    }

    fn vertex(&mut self, p: [f64; 2]) -> usize {
        let p = [p[0] + 0.0, p[1] + 0.0];
        let next = self.vertices.len();
        let id = *self.lookup.entry(point_key(p)).or_insert(next);
        if id == next {
            self.vertices.push(p);
        }
        id
    }

    fn cell(&mut self, a: usize, b: usize, c: usize, d: usize, label: usize) {
        for mut t in [[a, b, c], [a, c, d]] {
            let v = &self.vertices;
            if signed_area(v[t[0]], v[t[1]], v[t[2]]) < 0.0 {
                t.swap(1, 2);
            }
            self.triangles.push(t);
            self.labels.push(label);
        }
    }

    fn finish(
        self,
        num_subdomains: usize,
        bounds: [[f64; 2]; 2],
        subdomain_polygons: Vec<Vec<[f64; 2]>>,
        reflections: Option<[Vec<usize>; 2]>,
    ) -> Mesh2D {
        let nv = self.vertices.len();
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut is_dirichlet_vertex = vec![false; nv];
        for (&(a, b), &c) in &edge_count {
            if c == 1 {
                is_dirichlet_vertex[a] = true;
                is_dirichlet_vertex[b] = true;
            }
        }
        let mut first_label = vec![usize::MAX; nv];
        let mut multi = vec![false; nv];
        for (t, &l) in self.triangles.iter().zip(&self.labels) {
            for &v in t {
                if first_label[v] == usize::MAX {
                    first_label[v] = l;
                } else if first_label[v] != l {
                    multi[v] = true;
                }
            }
        }
        let is_skeleton_vertex = (0..nv).map(|v| multi[v] && !is_dirichlet_vertex[v]).collect();
        Mesh2D {
            vertices: self.vertices,
            triangles: self.triangles,
            subdomain_of_triangle: self.labels,
            is_dirichlet_vertex,
            is_skeleton_vertex,
            num_subdomains,
            bounds,
            subdomain_polygons,
            reflections,
        }
    }
}

pub fn build_mesh(spec: &GeometrySpec) -> Result<Mesh2D> {
    spec.validate()?;
    match &spec.kind {
        GeometryKind::Checkerboard { m: 2 } => Ok(build_four_quads(
            spec,
            [0.0, 0.0],
            [[0.0, -0.5], [0.5, 0.0], [0.0, 0.5], [-0.5, 0.0]],
        )),
        GeometryKind::Checkerboard { m } => Ok(build_tensor_checkerboard(spec, *m)),
        GeometryKind::DistortedQuad { interior_point, edge_points } => {
            Ok(build_four_quads(spec, *interior_point, *edge_points))
        }
    }
}

fn build_four_quads(spec: &GeometrySpec, p: [f64; 2], e: [[f64; 2]; 4]) -> Mesh2D {
    let n = spec.cells_per_edge();
    let s = graded_unit_nodes(n, grading_ratio(spec.grading_strength), false, true);
    let quads = four_quads(p, e);
    let mut b = Builder::new();
    let mut ids = vec![vec![0usize; (n + 1) * (n + 1)]; 4];
    for (q, quad) in quads.iter().enumerate() {
        let [c, ea, eb, pp] = *quad;
        for j in 0..=n {
            for i in 0..=n {
                let (si, tj) = (s[i], s[j]);
                let w = [(1.0 - si) * (1.0 - tj), si * (1.0 - tj), (1.0 - si) * tj, si * tj];
                let x = w[0] * c[0] + w[1] * ea[0] + w[2] * eb[0] + w[3] * pp[0];
                let y = w[0] * c[1] + w[1] * ea[1] + w[2] * eb[1] + w[3] * pp[1];
                ids[q][j * (n + 1) + i] = b.vertex([x, y]);
            }
        }
        let id = |i: usize, j: usize| ids[q][j * (n + 1) + i];
        for j in 0..n {
            for i in 0..n {
                b.cell(id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1), q);
            }
        }
    }
    let nv = b.vertices.len();
    let mut refl = [vec![0usize; nv], vec![0usize; nv]];
    let swaps = [[1usize, 0, 3, 2], [2, 3, 0, 1]];
    for (r, swap) in swaps.iter().enumerate() {
        for q in 0..4 {
            for k in 0..(n + 1) * (n + 1) {
                refl[r][ids[q][k]] = ids[swap[q]][k];
            }
        }
    }
    let polygons = quads.iter().map(ccw_polygon).collect();
    b.finish(4, [[-0.5, -0.5], [0.5, 0.5]], polygons, Some(refl))
}

fn build_tensor_checkerboard(spec: &GeometrySpec, m: usize) -> Mesh2D {
    let n = spec.cells_per_edge();
    let q = grading_ratio(spec.grading_strength);
    let mut coords = vec![0.0];
    for k in 0..m {
        let local = graded_unit_nodes(n, q, k > 0, k + 1 < m);
        for &t in &local[1..n] {
            coords.push((k as f64 + t) / m as f64);
        }
        coords.push((k + 1) as f64 / m as f64);
    }
    let nc = coords.len();
    let mut b = Builder::new();
    let mut ids = vec![0usize; nc * nc];
    for j in 0..nc {
        for i in 0..nc {
            ids[j * nc + i] = b.vertex([coords[i], coords[j]]);
        }
    }
    for j in 0..nc - 1 {
        for i in 0..nc - 1 {
            let label = (j / n) * m + i / n;
            b.cell(ids[j * nc + i], ids[j * nc + i + 1], ids[(j + 1) * nc + i + 1], ids[(j + 1) * nc + i], label);
        }
    }
    let mut polygons = Vec::with_capacity(m * m);
    for r in 0..m {
        for c in 0..m {
            let (x0, x1) = (c as f64 / m as f64, (c + 1) as f64 / m as f64);
            let (y0, y1) = (r as f64 / m as f64, (r + 1) as f64 / m as f64);
            polygons.push(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]);
        }
    }
    b.finish(m * m, [[0.0, 0.0], [1.0, 1.0]], polygons, None)
}

fn inside_convex(poly: &[[f64; 2]], p: [f64; 2], tol: f64) -> bool {
    let n = poly.len();
    (0..n).all(|k| {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        cross(a, b, p) >= -tol * len
    })
}

fn on_polygon_boundary(poly: &[[f64; 2]], p: [f64; 2], tol: f64) -> bool {
    let n = poly.len();
    (0..n).any(|k| {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let within = (p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1]);
        cross(a, b, p).abs() <= tol * len && within >= -tol && within <= len * len + tol
    })
}

impl Mesh2D {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn domain_area(&self) -> f64 {
        let [lo, hi] = self.bounds;
        (hi[0] - lo[0]) * (hi[1] - lo[1])
    }

    pub fn num_skeleton_vertices(&self) -> usize {
        self.is_skeleton_vertex.iter().filter(|&&s| s).count()
    }

    fn on_domain_boundary(&self, p: [f64; 2], tol: f64) -> bool {
        let [lo, hi] = self.bounds;
        (p[0] - lo[0]).abs() <= tol
            || (p[0] - hi[0]).abs() <= tol
            || (p[1] - lo[1]).abs() <= tol
            || (p[1] - hi[1]).abs() <= tol
    }

    /// Checks orientation, conformity, interface alignment and the skeleton flags.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGeometry(msg));
        if self.subdomain_of_triangle.len() != self.triangles.len()
            || self.is_dirichlet_vertex.len() != self.vertices.len()
            || self.is_skeleton_vertex.len() != self.vertices.len()
        {
            return bad("inconsistent array lengths".into());
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= self.vertices.len()) {
                return bad(format!("triangle {t} references a missing vertex"));
            }
            if self.triangle_area(t) <= 0.0 {
                return bad(format!("triangle {t} is not counterclockwise with positive area"));
            }
            if self.subdomain_of_triangle[t] >= self.num_subdomains {
                return bad(format!("triangle {t} has an invalid subdomain label"));
            }
        }
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let scale = self.domain_area().sqrt();
        let tol = 1e-12 * scale;
        for (&(a, b), &count) in &edges {
            if count > 2 {
                return bad(format!("edge ({a},{b}) is shared by {count} triangles"));
            }
            if count == 1 {
                let (pa, pb) = (self.vertices[a], self.vertices[b]);
                let [lo, hi] = self.bounds;
                let same_side = ((pa[0] - lo[0]).abs() <= tol && (pb[0] - lo[0]).abs() <= tol)
                    || ((pa[0] - hi[0]).abs() <= tol && (pb[0] - hi[0]).abs() <= tol)
                    || ((pa[1] - lo[1]).abs() <= tol && (pb[1] - lo[1]).abs() <= tol)
                    || ((pa[1] - hi[1]).abs() <= tol && (pb[1] - hi[1]).abs() <= tol);
                if !same_side {
                    return bad(format!("edge ({a},{b}) is unmatched inside the domain"));
                }
            }
        }
        let area = self.total_area();
        if ((area - self.domain_area()) / self.domain_area()).abs() > 1e-12 {
            return bad(format!("triangle areas sum to {area}, expected {}", self.domain_area()));
        }
        if !self.subdomain_polygons.is_empty() {
            for (t, tri) in self.triangles.iter().enumerate() {
                let poly = &self.subdomain_polygons[self.subdomain_of_triangle[t]];
                if tri.iter().any(|&v| !inside_convex(poly, self.vertices[v], tol)) {
                    return bad(format!("triangle {t} crosses a subdomain interface"));
                }
            }
            for v in 0..self.vertices.len() {
                if self.is_skeleton_vertex[v] {
                    let p = self.vertices[v];
                    if self.on_domain_boundary(p, tol)
                        || !self.subdomain_polygons.iter().any(|poly| on_polygon_boundary(poly, p, tol))
                    {
                        return bad(format!("skeleton vertex {v} is not on an interior interface"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Tests whether both coordinate reflections through the centre of the
    /// domain map the mesh onto itself.
    pub fn check_reflection_symmetry(&self) -> SymmetryReport {
        let [lo, hi] = self.bounds;
        let centre = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        let key = |x: f64| (x / SYMMETRY_TOL).round() as i64;
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (v, p) in self.vertices.iter().enumerate() {
            grid.entry((key(p[0]), key(p[1]))).or_default().push(v);
        }
        let find = |p: [f64; 2]| -> Option<usize> {
            let (kx, ky) = (key(p[0]), key(p[1]));
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(list) = grid.get(&(kx + dx, ky + dy)) {
                        for &w in list {
                            let q = self.vertices[w];
                            if (q[0] - p[0]).abs() <= SYMMETRY_TOL && (q[1] - p[1]).abs() <= SYMMETRY_TOL {
                                return Some(w);
                            }
                        }
                    }
                }
            }
            None
        };
        let mut violating = Vec::new();
        let mut maps = Vec::with_capacity(2);
        for axis in 0..2 {
            let mut map = vec![usize::MAX; self.vertices.len()];
            for (v, p) in self.vertices.iter().enumerate() {
                let mut r = *p;
                r[axis] = 2.0 * centre[axis] - r[axis];
                match find(r) {
                    Some(w) => map[v] = w,
                    None => violating.push(v),
                }
            }
            maps.push(map);
        }
        violating.sort_unstable();
        violating.dedup();
        let mut tri_index: HashMap<[usize; 3], usize> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            let mut s = *tri;
            s.sort_unstable();
            tri_index.insert(s, t);
        }
        let mut unmatched = 0;
        let mut labels_consistent = true;
        for map in &maps {
            let mut label_map = vec![usize::MAX; self.num_subdomains];
            for (t, tri) in self.triangles.iter().enumerate() {
                if tri.iter().any(|&v| map[v] == usize::MAX) {
                    unmatched += 1;
                    continue;
                }
                let mut s = [map[tri[0]], map[tri[1]], map[tri[2]]];
                s.sort_unstable();
                match tri_index.get(&s) {
                    Some(&u) => {
                        let (a, b) = (self.subdomain_of_triangle[t], self.subdomain_of_triangle[u]);
                        if label_map[a] == usize::MAX {
                            label_map[a] = b;
                        } else if label_map[a] != b {
                            labels_consistent = false;
                        }
                    }
                    None => unmatched += 1,
                }
            }
        }
        SymmetryReport {
            symmetric: violating.is_empty() && unmatched == 0 && labels_consistent,
            violating_vertices: violating,
            unmatched_triangles: unmatched,
            labels_consistent,
        }
    }

    /// Writes `NV NT d`, then `x y dirichlet skeleton` per vertex and
    /// `v0 v1 v2 subdomain` per triangle with 1-based subdomain ids.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.num_vertices(), self.num_triangles(), self.num_subdomains)?;
        for (v, p) in self.vertices.iter().enumerate() {
            writeln!(
                w,
                "{:.17e} {:.17e} {} {}",
                p[0],
                p[1],
                self.is_dirichlet_vertex[v] as u8,
                self.is_skeleton_vertex[v] as u8
            )?;
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            writeln!(w, "{} {} {} {}", tri[0], tri[1], tri[2], self.subdomain_of_triangle[t] + 1)?;
        }
        Ok(())
    }

    /// Reads the format produced by [`Mesh2D::write_to`]. The domain bounds
    /// are taken from the vertex bounding box.
    pub fn read_from<R: BufRead>(r: R) -> Result<Mesh2D> {
        let mut lines = r.lines();
        let mut next = || -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| Error::Parse("unexpected end of mesh file".into()))??;
            Ok(line.split_whitespace().map(str::to_owned).collect())
        };
        let num = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s}: {e}")));
        let real = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}")));
        let head = next()?;
        if head.len() != 3 {
            return Err(Error::Parse("header must be `NV NT d`".into()));
        }
        let (nv, nt, d) = (num(&head[0])?, num(&head[1])?, num(&head[2])?);
        let mut vertices = Vec::with_capacity(nv);
        let mut is_dirichlet_vertex = Vec::with_capacity(nv);
        let mut is_skeleton_vertex = Vec::with_capacity(nv);
        for _ in 0..nv {
            let f = next()?;
            if f.len() != 4 {
                return Err(Error::Parse("vertex line must have 4 fields".into()));
            }
            vertices.push([real(&f[0])?, real(&f[1])?]);
            is_dirichlet_vertex.push(num(&f[2])? != 0);
            is_skeleton_vertex.push(num(&f[3])? != 0);
        }
        let mut triangles = Vec::with_capacity(nt);
        let mut subdomain_of_triangle = Vec::with_capacity(nt);
        for _ in 0..nt {
            let f = next()?;
            if f.len() != 4 {
                return Err(Error::Parse("triangle line must have 4 fields".into()));
            }
            triangles.push([num(&f[0])?, num(&f[1])?, num(&f[2])?]);
            let s = num(&f[3])?;
            if s == 0 || s > d {
                return Err(Error::Parse(format!("subdomain id {s} outside 1..{d}")));
            }
            subdomain_of_triangle.push(s - 1);
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Ok(Mesh2D {
            vertices,
            triangles,
            subdomain_of_triangle,
            is_dirichlet_vertex,
            is_skeleton_vertex,
            num_subdomains: d,
            bounds: [lo, hi],
            subdomain_polygons: Vec::new(),
            reflections: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_checkerboard_is_valid_and_symmetric() {
        let mesh = build_mesh(&GeometrySpec::checkerboard(2, 0, 0.0)).unwrap();
        mesh.validate().unwrap();
        assert_eq!(mesh.num_vertices(), 25);
        assert_eq!(mesh.num_triangles(), 32);
        assert!(mesh.check_reflection_symmetry().symmetric);
        assert_eq!(mesh.num_skeleton_vertices(), 5);
    }

    #[test]
    fn graded_checkerboard_stays_symmetric() {
        for (r, g) in [(1, 0.3), (2, 0.15), (3, 0.05)] {
            let mesh = build_mesh(&GeometrySpec::checkerboard(2, r, g)).unwrap();
            mesh.validate().unwrap();
            let report = mesh.check_reflection_symmetry();
            assert!(report.symmetric, "{report:?}");
        }
    }

    #[test]
    fn logical_reflections_match_geometry_on_checkerboard() {
        let mesh = build_mesh(&GeometrySpec::checkerboard(2, 2, 0.2)).unwrap();
        let refl = mesh.reflections.as_ref().unwrap();
        for (v, p) in mesh.vertices.iter().enumerate() {
            let q = mesh.vertices[refl[0][v]];
            assert!(q[0] == -p[0] && q[1] == p[1]);
            let q = mesh.vertices[refl[1][v]];
            assert!(q[0] == p[0] && q[1] == -p[1]);
        }
    }

    #[test]
    fn grading_shrinks_cells_toward_the_interface() {
        let s = graded_unit_nodes(8, grading_ratio(0.5), false, true);
        let w: Vec<f64> = s.windows(2).map(|p| p[1] - p[0]).collect();
        assert!(w.windows(2).all(|p| p[1] < p[0]));
        let uniform = graded_unit_nodes(8, grading_ratio(0.0), false, true);
        assert!(uniform.iter().enumerate().all(|(j, &x)| x == j as f64 / 8.0));
    }

    #[test]
    fn distorted_mesh_is_valid_but_not_symmetric() {
        let mesh = build_mesh(&GeometrySpec::distorted(1, 0.2)).unwrap();
        mesh.validate().unwrap();
        let report = mesh.check_reflection_symmetry();
        assert!(!report.symmetric);
        assert!(!report.violating_vertices.is_empty());
    }

    #[test]
    fn perturbed_vertex_is_reported() {
        let mut mesh = build_mesh(&GeometrySpec::checkerboard(2, 1, 0.0)).unwrap();
        let v = mesh.vertices.iter().position(|p| p[0] > 0.1 && p[1] > 0.1 && p[0] < 0.4).unwrap();
        mesh.vertices[v][0] += 1e-6;
        let report = mesh.check_reflection_symmetry();
        assert!(!report.symmetric);
        assert!(report.violating_vertices.contains(&v));
    }

    #[test]
    fn rejects_bad_distorted_specs() {
        let mut spec = GeometrySpec::distorted(0, 0.0);
        spec.kind = GeometryKind::DistortedQuad { interior_point: [0.7, 0.0], edge_points: DEFAULT_EDGE_POINTS };
        assert!(build_mesh(&spec).is_err());
        spec.kind = GeometryKind::DistortedQuad { interior_point: [0.0, -0.5], edge_points: DEFAULT_EDGE_POINTS };
        assert!(build_mesh(&spec).is_err());
        let mut edges = DEFAULT_EDGE_POINTS;
        edges[0] = [0.0, -0.4];
        spec.kind = GeometryKind::DistortedQuad { interior_point: [0.0, 0.0], edge_points: edges };
        assert!(build_mesh(&spec).is_err());
        assert!(build_mesh(&GeometrySpec::checkerboard(0, 0, 0.0)).is_err());
        assert!(build_mesh(&GeometrySpec::checkerboard(2, 0, -1.0)).is_err());
    }

    #[test]
    fn tensor_checkerboard_has_sixteen_subdomains() {
        let mesh = build_mesh(&GeometrySpec::checkerboard(4, 0, 0.3)).unwrap();
        mesh.validate().unwrap();
        assert_eq!(mesh.num_subdomains, 16);
        let nodes_per_axis = 4 * 2 + 1;
        assert_eq!(mesh.num_vertices(), nodes_per_axis * nodes_per_axis);
        assert_eq!(mesh.num_skeleton_vertices(), 49 - 16);
    }

    #[test]
    fn interval_mesh_examples() {
        let m = build_interval_mesh(1, 2).unwrap();
        assert_eq!(m.nodes, vec![0.0, 0.5, 1.0]);
        let m = build_interval_mesh(4, 8).unwrap();
        assert_eq!(m.nodes.len(), 33);
        for x in [0.25, 0.5, 0.75] {
            let k = m.nodes.iter().position(|&n| n == x).unwrap();
            assert!(m.is_skeleton_node[k]);
        }
        assert_eq!(m.is_skeleton_node.iter().filter(|&&s| s).count(), 3);
        assert!(build_interval_mesh(0, 3).is_err());
    }

    #[test]
    fn write_read_round_trip() {
        let mesh = build_mesh(&GeometrySpec::distorted(0, 0.1)).unwrap();
        let mut buf = Vec::new();
        mesh.write_to(&mut buf).unwrap();
        let back = Mesh2D::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.vertices, mesh.vertices);
        assert_eq!(back.triangles, mesh.triangles);
        assert_eq!(back.subdomain_of_triangle, mesh.subdomain_of_triangle);
        assert_eq!(back.is_dirichlet_vertex, mesh.is_dirichlet_vertex);
        assert_eq!(back.is_skeleton_vertex, mesh.is_skeleton_vertex);
        back.validate().unwrap();
    }
}
