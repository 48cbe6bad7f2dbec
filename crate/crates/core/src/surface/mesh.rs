//! Nested triangle meshes of a polyhedral surface.
//!
//! Level 0 is the input triangulation. Each refinement splits every triangle
//! into four; an edge with exactly one graded endpoint is split at fraction
//! 2^-μ from that endpoint, so elements touching a graded vertex shrink like
//! 2^-μL while the corner child stays similar to its parent.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::{corner_angle, dist, signed_area, Point, PolyhedralSurface, SurfaceError};

/// Grading exponent μ per base vertex class; absent classes use μ = 1.
pub type Grading = BTreeMap<usize, f64>;

/// Smallest interior angle a refinement may produce (1°).
pub const DEFAULT_MIN_ANGLE: f64 = PI / 180.0;

/// Vertices, chart corners and (edge id, forward) per side of a child triangle.
type Child = ([usize; 3], [Point; 3], [(usize, bool); 3]);

/// μ = max(1, β/2π + 1/2) at every cone point.
pub fn default_grading(surface: &PolyhedralSurface) -> Grading {
    surface
        .cone_points()
        .into_iter()
        .map(|c| (c.vertex_class, (c.angle / (2.0 * PI) + 0.5).max(1.0)))
        .filter(|&(_, mu)| mu > 1.0)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshTriangle {
    pub vertices: [usize; 3],
    /// Corner positions in the chart of the base triangle `chart`.
    pub coords: [Point; 3],
    pub edges: [usize; 3],
    /// Whether triangle edge i runs along the stored direction of `edges[i]`.
    pub forward: [bool; 3],
    pub chart: usize,
    pub parent: Option<usize>,
}

impl MeshTriangle {
    pub fn area(&self) -> f64 {
        signed_area(&self.coords)
    }

    pub fn diameter(&self) -> f64 {
        (0..3)
            .map(|i| dist(self.coords[i], self.coords[(i + 1) % 3]))
            .fold(0.0, f64::max)
    }

    pub fn min_angle(&self) -> f64 {
        (0..3).map(|i| corner_angle(&self.coords, i)).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshLevel {
    level: usize,
    vertex_count: usize,
    base_vertex_count: usize,
    triangles: Vec<MeshTriangle>,
    edges: Vec<[usize; 2]>,
    grading: Grading,
    min_angle_floor: f64,
}

impl MeshLevel {
    pub fn base(surface: &PolyhedralSurface) -> Self {
        let gl = surface.gluings();
        let mut triangles: Vec<MeshTriangle> = surface
            .triangles()
            .iter()
            .enumerate()
            .map(|(t, c)| MeshTriangle {
                vertices: [0, 1, 2].map(|i| surface.corner_class(t, i)),
                coords: *c,
                edges: [0; 3],
                forward: [true; 3],
                chart: t,
                parent: None,
            })
            .collect();
        let mut edges = Vec::with_capacity(gl.len());
        for (g, &(a, b)) in gl.iter().enumerate() {
            let ta = &triangles[a.triangle];
            edges.push([ta.vertices[a.edge], ta.vertices[(a.edge + 1) % 3]]);
            triangles[a.triangle].edges[a.edge] = g;
            triangles[a.triangle].forward[a.edge] = true;
            triangles[b.triangle].edges[b.edge] = g;
            triangles[b.triangle].forward[b.edge] = false;
        }
        Self {
            level: 0,
            vertex_count: surface.vertex_count(),
            base_vertex_count: surface.vertex_count(),
            triangles,
            edges,
            grading: Grading::new(),
            min_angle_floor: DEFAULT_MIN_ANGLE,
        }
    }

    pub fn with_min_angle(mut self, floor: f64) -> Self {
        self.min_angle_floor = floor;
        self
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Vertices `0..base_vertex_count()` are the vertex classes of the surface.
    pub fn base_vertex_count(&self) -> usize {
        self.base_vertex_count
    }

    pub fn triangles(&self) -> &[MeshTriangle] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Grading that produced this level (empty at level 0).
    pub fn grading(&self) -> &Grading {
        &self.grading
    }

    pub fn h(&self) -> f64 {
        self.triangles.iter().map(MeshTriangle::diameter).fold(0.0, f64::max)
    }

    pub fn min_angle(&self) -> f64 {
        self.triangles
            .iter()
            .map(MeshTriangle::min_angle)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn area(&self) -> f64 {
        self.triangles.iter().map(MeshTriangle::area).sum()
    }

    fn mu(&self, grading: &Grading, v: usize) -> f64 {
        if v < self.base_vertex_count {
            grading.get(&v).copied().unwrap_or(1.0)
        } else {
            1.0
        }
    }

    /// One level of 1-to-4 refinement.
    pub fn refine(&self, grading: &Grading) -> Result<MeshLevel, SurfaceError> {
        for (&v, &mu) in grading {
            if !(mu >= 1.0) || !mu.is_finite() {
                return Err(SurfaceError::InvalidGrading { vertex: v, mu });
            }
        }
        let ne = self.edges.len();
        let nt = self.triangles.len();
        // split fraction measured from the stored start of each edge
        let split: Vec<f64> = self
            .edges
            .iter()
            .map(|&[u, v]| {
                let (mu_u, mu_v) = (self.mu(grading, u), self.mu(grading, v));
                match (mu_u > 1.0, mu_v > 1.0) {
                    (true, false) => 2f64.powf(-mu_u),
                    (false, true) => 1.0 - 2f64.powf(-mu_v),
                    _ => 0.5,
                }
            })
            .collect();

        let mut edges = Vec::with_capacity(2 * ne + 3 * nt);
        for (e, &[u, v]) in self.edges.iter().enumerate() {
            let m = self.vertex_count + e;
            edges.push([u, m]);
            edges.push([m, v]);
        }
        let mut triangles = Vec::with_capacity(4 * nt);
        for (t, tri) in self.triangles.iter().enumerate() {
            let mid = |i: usize| self.vertex_count + tri.edges[i];
            let pos = |i: usize| {
                let s = split[tri.edges[i]];
                let s = if tri.forward[i] { s } else { 1.0 - s };
                let (p, q) = (tri.coords[i], tri.coords[(i + 1) % 3]);
                [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]
            };
            // halves of a parent edge, seen from the triangle's traversal
            let start_half = |i: usize| {
                let e = tri.edges[i];
                if tri.forward[i] {
                    (2 * e, true)
                } else {
                    (2 * e + 1, false)
                }
            };
            let end_half = |i: usize| {
                let e = tri.edges[i];
                if tri.forward[i] {
                    (2 * e + 1, true)
                } else {
                    (2 * e, false)
                }
            };
            let [a, b, c] = tri.vertices;
            let [pa, pb, pc] = tri.coords;
            let (m0, m1, m2) = (mid(0), mid(1), mid(2));
            let (q0, q1, q2) = (pos(0), pos(1), pos(2));
            let i0 = 2 * ne + 3 * t;
            edges.push([m0, m1]);
            edges.push([m1, m2]);
            edges.push([m2, m0]);
            let children: [Child; 4] = [
                ([a, m0, m2], [pa, q0, q2], [start_half(0), (i0 + 2, false), end_half(2)]),
                ([m0, b, m1], [q0, pb, q1], [end_half(0), start_half(1), (i0, false)]),
                ([m2, m1, c], [q2, q1, pc], [(i0 + 1, false), end_half(1), start_half(2)]),
                ([m0, m1, m2], [q0, q1, q2], [(i0, true), (i0 + 1, true), (i0 + 2, true)]),
            ];
            for (vertices, coords, ef) in children {
                triangles.push(MeshTriangle {
                    vertices,
                    coords,
                    edges: ef.map(|x| x.0),
                    forward: ef.map(|x| x.1),
                    chart: tri.chart,
                    parent: Some(t),
                });
            }
        }
        let out = MeshLevel {
            level: self.level + 1,
            vertex_count: self.vertex_count + ne,
            base_vertex_count: self.base_vertex_count,
            triangles,
            edges,
            grading: grading.clone(),
            min_angle_floor: self.min_angle_floor,
        };
        let angle = out.min_angle();
        if angle < self.min_angle_floor {
            return Err(SurfaceError::MinAngleViolation {
                angle,
                floor: self.min_angle_floor,
            });
        }
        Ok(out)
    }

    /// Refines `levels` times with a fixed grading.
    pub fn refine_n(&self, grading: &Grading, levels: usize) -> Result<MeshLevel, SurfaceError> {
        let mut m = self.clone();
        for _ in 0..levels {
            m = m.refine(grading)?;
        }
        Ok(m)
    }

    /// Euler characteristic of the mesh complex.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    /// Total angle at every mesh vertex.
    pub fn vertex_angles(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.vertex_count];
        for t in &self.triangles {
            for i in 0..3 {
                out[t.vertices[i]] += corner_angle(&t.coords, i);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::square_torus_doc;
    use super::*;

    fn torus() -> PolyhedralSurface {
        PolyhedralSurface::from_document(&square_torus_doc()).unwrap()
    }

    #[test]
    fn refinement_preserves_topology_and_area() {
        let s = torus();
        let mut m = MeshLevel::base(&s);
        for l in 1..=4 {
            m = m.refine(&Grading::new()).unwrap();
            assert_eq!(m.level(), l);
            assert_eq!(m.triangles().len(), 2 * 4usize.pow(l as u32));
            assert_eq!(m.euler_characteristic(), 0);
            assert!((m.area() - 1.0).abs() < 1e-13);
            for a in m.vertex_angles() {
                assert!((a - 2.0 * PI).abs() < 1e-10);
            }
        }
        assert!((m.h() - 2f64.sqrt() / 16.0).abs() < 1e-14);
    }

    #[test]
    fn glued_edges_agree_after_refinement() {
        let s = torus();
        let m = MeshLevel::base(&s).refine_n(&Grading::new(), 3).unwrap();
        let mut len = vec![Vec::new(); m.edges().len()];
        let mut ends = vec![Vec::new(); m.edges().len()];
        for t in m.triangles() {
            for i in 0..3 {
                let (p, q) = (t.coords[i], t.coords[(i + 1) % 3]);
                len[t.edges[i]].push(dist(p, q));
                let (u, v) = (t.vertices[i], t.vertices[(i + 1) % 3]);
                ends[t.edges[i]].push(if t.forward[i] { [u, v] } else { [v, u] });
            }
        }
        for (e, l) in len.iter().enumerate() {
            assert_eq!(l.len(), 2);
            assert!((l[0] - l[1]).abs() < 1e-14);
            assert_eq!(ends[e][0], m.edges()[e]);
            assert_eq!(ends[e][1], m.edges()[e]);
        }
    }

    #[test]
    fn graded_split_fraction() {
        let s = torus();
        let mut g = Grading::new();
        g.insert(0, 2.0);
        // the single torus vertex terminates every edge at both ends: midpoints
        let m = MeshLevel::base(&s).refine(&g).unwrap();
        let corner = &m.triangles()[0];
        assert!((corner.coords[1][0] - 0.5).abs() < 1e-15);
        // one more level: new edges from vertex 0 split at 1/4
        let m2 = m.refine(&g).unwrap();
        let c = &m2.triangles()[0];
        assert!((dist(c.coords[0], c.coords[1]) - 0.125).abs() < 1e-14);
        assert!((m2.area() - 1.0).abs() < 1e-13);
        assert!(MeshLevel::base(&s).refine(&BTreeMap::from([(0, 0.5)])).is_err());
    }

    #[test]
    fn angle_floor_is_enforced() {
        let s = torus();
        let m = MeshLevel::base(&s).with_min_angle(0.9).refine(&Grading::new());
        assert!(matches!(m, Err(SurfaceError::MinAngleViolation { .. })));
    }
}
