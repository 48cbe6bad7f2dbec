//! Compact polyhedral surfaces glued from Euclidean triangles.
//!
//! Every triangle lives in its own planar chart. Edge `e` of a triangle runs
//! from corner `e` to corner `(e + 1) % 3`; a gluing identifies two edges with
//! opposite directions, i.e. the start of one edge is the end of the other.
//! Triangles must share one handedness across every gluing; a surface given
//! entirely in clockwise charts is reflected on load.

mod builders;
mod mesh;

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builders::{
    flat_torus_corner,
    build_flat_torus, build_translation_surface, Cut, Parallelogram, TranslationSurfaceDocument, TranslationSurfaceSpec,
};
pub use mesh::{default_grading, Grading, MeshLevel, MeshTriangle, DEFAULT_MIN_ANGLE};

pub type Point = [f64; 2];

/// Relative tolerance on glued edge lengths.
pub const LENGTH_TOL: f64 = 1e-12;
/// Angles within this distance of 2π are treated as regular points.
pub const FLAT_ANGLE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("glued edges ({t1},{e1}) and ({t2},{e2}) differ in length: {l1} vs {l2}")]
    LengthMismatch {
        t1: usize,
        e1: usize,
        t2: usize,
        e2: usize,
        l1: f64,
        l2: f64,
    },
    #[error("edge ({triangle},{edge}) has no gluing partner")]
    DanglingEdge { triangle: usize, edge: usize },
    #[error("edge ({triangle},{edge}) appears in more than one gluing")]
    DuplicateEdge { triangle: usize, edge: usize },
    #[error("gluing {gluing} joins triangles of opposite handedness")]
    NonOrientable { gluing: usize },
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
    #[error("gluing {gluing} references a missing triangle or edge")]
    InvalidReference { gluing: usize },
    #[error("surface is not connected")]
    Disconnected,
    #[error("surface has no triangles")]
    Empty,
    #[error("Euler characteristic {0} is not that of a closed orientable surface")]
    InvalidTopology(i64),
    #[error("refinement would create an angle of {angle:.3e} rad, below the floor {floor:.3e}")]
    MinAngleViolation { angle: f64, floor: f64 },
    #[error("grading exponent {mu} for vertex {vertex} must be >= 1")]
    InvalidGrading { vertex: usize, mu: f64 },
    #[error("modulus must satisfy Im sigma > 0, got {0}")]
    LowerHalfPlane(f64),
    #[error("subdivision count must be positive")]
    InvalidSubdivision,
    #[error("parallelogram {0} has non-positive area")]
    DegenerateParallelogram(usize),
    #[error("cut {cut} is not strictly inside parallelogram {parallelogram}")]
    CutOutsideParallelogram { cut: usize, parallelogram: usize },
    #[error("cuts {0} and {1} overlap")]
    CutOverlap(usize, usize),
    #[error("cut {0} is invalid: {1}")]
    InvalidCut(usize, String),
    #[error("malformed surface document: {0}")]
    Parse(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

/// JSON surface schema: triangles in chart coordinates and edge gluings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDocument {
    pub triangles: Vec<[Point; 3]>,
    pub gluings: Vec<[[usize; 2]; 2]>,
}

/// Either accepted input document.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum AnySurfaceDocument {
    Triangles(SurfaceDocument),
    Translation(TranslationSurfaceDocument),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeRef {
    pub triangle: usize,
    pub edge: usize,
}

impl EdgeRef {
    pub fn new(triangle: usize, edge: usize) -> Self {
        Self { triangle, edge }
    }
}

/// A vertex class whose total angle differs from 2π.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConePoint {
    pub vertex_class: usize,
    pub angle: f64,
    pub order: f64,
}

impl ConePoint {
    pub fn from_angle(vertex_class: usize, angle: f64) -> Self {
        Self {
            vertex_class,
            angle,
            order: angle / (2.0 * PI) - 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralSurface {
    triangles: Vec<[Point; 3]>,
    gluings: Vec<(EdgeRef, EdgeRef)>,
    partner: Vec<[EdgeRef; 3]>,
    corner_class: Vec<[usize; 3]>,
    class_angles: Vec<f64>,
    area: f64,
    genus: usize,
}

fn signed_area(t: &[Point; 3]) -> f64 {
    0.5 * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Interior angle at corner `i`, via atan2 of the two edge vectors.
pub(crate) fn corner_angle(t: &[Point; 3], i: usize) -> f64 {
    let p = t[i];
    let a = t[(i + 1) % 3];
    let b = t[(i + 2) % 3];
    let u = [a[0] - p[0], a[1] - p[1]];
    let v = [b[0] - p[0], b[1] - p[1]];
    let cross = u[0] * v[1] - u[1] * v[0];
    let dot = u[0] * v[0] + u[1] * v[1];
    cross.abs().atan2(dot)
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so class numbering follows input order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

impl PolyhedralSurface {
    /// Validates triangles and gluings and derives topology and cone data.
    pub fn from_parts(mut triangles: Vec<[Point; 3]>, gluings: Vec<(EdgeRef, EdgeRef)>) -> Result<Self, SurfaceError> {
        let nt = triangles.len();
        if nt == 0 {
            return Err(SurfaceError::Empty);
        }
        for (i, t) in triangles.iter().enumerate() {
            let scale = (0..3).map(|e| dist(t[e], t[(e + 1) % 3])).fold(0.0, f64::max);
            let a = signed_area(t);
            if !a.is_finite() || a.abs() <= 1e-14 * scale * scale || scale == 0.0 {
                return Err(SurfaceError::DegenerateTriangle(i));
            }
        }

        let unset = EdgeRef::new(usize::MAX, usize::MAX);
        let mut partner = vec![[unset; 3]; nt];
        for (g, &(a, b)) in gluings.iter().enumerate() {
            for r in [a, b] {
                if r.triangle >= nt || r.edge >= 3 {
                    return Err(SurfaceError::InvalidReference { gluing: g });
                }
            }
            if a == b {
                return Err(SurfaceError::InvalidReference { gluing: g });
            }
            for (r, other) in [(a, b), (b, a)] {
                if partner[r.triangle][r.edge] != unset {
                    return Err(SurfaceError::DuplicateEdge {
                        triangle: r.triangle,
                        edge: r.edge,
                    });
                }
                partner[r.triangle][r.edge] = other;
            }
        }
        for (t, p) in partner.iter().enumerate() {
            for (e, r) in p.iter().enumerate() {
                if *r == unset {
                    return Err(SurfaceError::DanglingEdge { triangle: t, edge: e });
                }
            }
        }

        for &(a, b) in &gluings {
            let la = edge_length(&triangles[a.triangle], a.edge);
            let lb = edge_length(&triangles[b.triangle], b.edge);
            if (la - lb).abs() > LENGTH_TOL * la.max(lb) {
                return Err(SurfaceError::LengthMismatch {
                    t1: a.triangle,
                    e1: a.edge,
                    t2: b.triangle,
                    e2: b.edge,
                    l1: la,
                    l2: lb,
                });
            }
        }

        // handedness must agree across every gluing; connectivity by BFS
        let sign: Vec<bool> = triangles.iter().map(|t| signed_area(t) > 0.0).collect();
        for (g, &(a, b)) in gluings.iter().enumerate() {
            if sign[a.triangle] != sign[b.triangle] {
                return Err(SurfaceError::NonOrientable { gluing: g });
            }
        }
        let mut seen = vec![false; nt];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(t) = stack.pop() {
            for r in partner[t] {
                if !seen[r.triangle] {
                    seen[r.triangle] = true;
                    stack.push(r.triangle);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(SurfaceError::Disconnected);
        }
        if !sign[0] {
            for t in triangles.iter_mut() {
                for p in t.iter_mut() {
                    p[1] = -p[1];
                }
            }
        }

        let mut uf = UnionFind::new(3 * nt);
        for &(a, b) in &gluings {
            let (a0, a1) = (3 * a.triangle + a.edge, 3 * a.triangle + (a.edge + 1) % 3);
            let (b0, b1) = (3 * b.triangle + b.edge, 3 * b.triangle + (b.edge + 1) % 3);
            uf.union(a0, b1);
            uf.union(a1, b0);
        }
        let mut root_to_class = std::collections::BTreeMap::new();
        let mut corner_class = vec![[0usize; 3]; nt];
        for (t, classes) in corner_class.iter_mut().enumerate() {
            for (i, class) in classes.iter_mut().enumerate() {
                let r = uf.find(3 * t + i);
                let next = root_to_class.len();
                *class = *root_to_class.entry(r).or_insert(next);
            }
        }
        let nv = root_to_class.len();
        let mut class_angles = vec![0.0; nv];
        for t in 0..nt {
            for i in 0..3 {
                class_angles[corner_class[t][i]] += corner_angle(&triangles[t], i);
            }
        }

        let chi = nv as i64 - gluings.len() as i64 + nt as i64;
        if chi > 2 || chi % 2 != 0 {
            return Err(SurfaceError::InvalidTopology(chi));
        }
        let genus = ((2 - chi) / 2) as usize;
        let area = triangles.iter().map(|t| signed_area(t).abs()).sum();
        Ok(Self {
            triangles,
            gluings,
            partner,
            corner_class,
            class_angles,
            area,
            genus,
        })
    }

    pub fn from_document(doc: &SurfaceDocument) -> Result<Self, SurfaceError> {
        let gluings = doc
            .gluings
            .iter()
            .map(|[a, b]| (EdgeRef::new(a[0], a[1]), EdgeRef::new(b[0], b[1])))
            .collect();
        Self::from_parts(doc.triangles.clone(), gluings)
    }

    pub fn to_document(&self) -> SurfaceDocument {
        SurfaceDocument {
            triangles: self.triangles.clone(),
            gluings: self
                .gluings
                .iter()
                .map(|(a, b)| [[a.triangle, a.edge], [b.triangle, b.edge]])
                .collect(),
        }
    }

    pub fn triangles(&self) -> &[[Point; 3]] {
        &self.triangles
    }

    pub fn gluings(&self) -> &[(EdgeRef, EdgeRef)] {
        &self.gluings
    }

    pub fn partner(&self, r: EdgeRef) -> EdgeRef {
        self.partner[r.triangle][r.edge]
    }

    pub fn corner_class(&self, triangle: usize, corner: usize) -> usize {
        self.corner_class[triangle][corner]
    }

    pub fn vertex_count(&self) -> usize {
        self.class_angles.len()
    }

    pub fn edge_count(&self) -> usize {
        self.gluings.len()
    }

    pub fn face_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edge_count() as i64 + self.face_count() as i64
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    /// Total angle around every vertex class.
    pub fn vertex_angles(&self) -> &[f64] {
        &self.class_angles
    }

    /// Vertex classes whose total angle is not 2π.
    pub fn cone_points(&self) -> Vec<ConePoint> {
        self.class_angles
            .iter()
            .enumerate()
            .filter(|(_, &a)| (a - 2.0 * PI).abs() > FLAT_ANGLE_TOL)
            .map(|(c, &a)| ConePoint::from_angle(c, a))
            .collect()
    }

    /// Σ b_k − (2g − 2) over the cone points.
    pub fn gauss_bonnet_residual(&self) -> f64 {
        gauss_bonnet_residual(&self.cone_points(), self.genus)
    }

    /// Shortest edge of the input triangulation.
    pub fn shortest_edge(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |e| edge_length(t, e)))
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn gauss_bonnet_residual(cones: &[ConePoint], genus: usize) -> f64 {
    let sum: f64 = cones.iter().map(|c| c.order).sum();
    sum - (2.0 * genus as f64 - 2.0)
}

pub(crate) fn edge_length(t: &[Point; 3], e: usize) -> f64 {
    dist(t[e], t[(e + 1) % 3])
}

/// Parses either the triangle schema or the translation-surface schema.
pub fn load_surface(document: &str) -> Result<PolyhedralSurface, SurfaceError> {
    let doc: AnySurfaceDocument = serde_json::from_str(document).map_err(|e| SurfaceError::Parse(e.to_string()))?;
    match doc {
        AnySurfaceDocument::Triangles(d) => PolyhedralSurface::from_document(&d),
        AnySurfaceDocument::Translation(d) => build_translation_surface(&TranslationSurfaceSpec::try_from(&d)?),
    }
}

pub fn load_surface_file(path: &Path) -> Result<PolyhedralSurface, SurfaceError> {
    let text = std::fs::read_to_string(path).map_err(|e| SurfaceError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_surface(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn square_torus_doc() -> SurfaceDocument {
        // unit square split along the diagonal (0,0)-(1,1)
        SurfaceDocument {
            triangles: vec![[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]], [[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]]],
            // bottom ↔ top, right ↔ left, diagonal ↔ diagonal
            gluings: vec![[[0, 0], [1, 1]], [[0, 1], [1, 2]], [[0, 2], [1, 0]]],
        }
    }

    #[test]
    fn square_torus_topology() {
        let s = PolyhedralSurface::from_document(&square_torus_doc()).unwrap();
        assert_eq!(s.genus(), 1);
        assert_eq!(s.vertex_count(), 1);
        assert!((s.area() - 1.0).abs() < 1e-15);
        assert!(s.cone_points().is_empty());
        assert!((s.vertex_angles()[0] - 2.0 * PI).abs() < 1e-12);
        assert!(s.gauss_bonnet_residual().abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_gluings() {
        let mut d = square_torus_doc();
        d.gluings.pop();
        assert!(matches!(
            PolyhedralSurface::from_document(&d),
            Err(SurfaceError::DanglingEdge { .. })
        ));

        let mut d = square_torus_doc();
        d.triangles[0][1] = [1.1, 0.0];
        assert!(matches!(
            PolyhedralSurface::from_document(&d),
            Err(SurfaceError::LengthMismatch { .. })
        ));

        let mut d = square_torus_doc();
        d.triangles[1] = [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        assert!(PolyhedralSurface::from_document(&d).is_err());

        let mut d = square_torus_doc();
        d.triangles[0] = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert!(matches!(
            PolyhedralSurface::from_document(&d),
            Err(SurfaceError::DegenerateTriangle(0))
        ));

        let mut d = square_torus_doc();
        d.gluings.push([[0, 0], [1, 1]]);
        assert!(matches!(
            PolyhedralSurface::from_document(&d),
            Err(SurfaceError::DuplicateEdge { .. })
        ));
    }

    #[test]
    fn mixed_handedness_is_rejected() {
        // reflect only the second triangle: its gluings now reverse orientation
        let mut d = square_torus_doc();
        for p in d.triangles[1].iter_mut() {
            p[1] = -p[1];
        }
        assert!(matches!(
            PolyhedralSurface::from_document(&d),
            Err(SurfaceError::NonOrientable { .. })
        ));
    }

    #[test]
    fn clockwise_input_is_reflected() {
        let mut d = square_torus_doc();
        for t in d.triangles.iter_mut() {
            for p in t.iter_mut() {
                p[1] = -p[1];
            }
        }
        let s = PolyhedralSurface::from_document(&d).unwrap();
        assert!(s.triangles().iter().all(|t| signed_area(t) > 0.0));
        assert_eq!(s.genus(), 1);
    }

    #[test]
    fn document_round_trip() {
        let s = PolyhedralSurface::from_document(&square_torus_doc()).unwrap();
        let text = serde_json::to_string(&s.to_document()).unwrap();
        let t = load_surface(&text).unwrap();
        assert_eq!(s, t);
    }

    fn fixture(name: &str) -> PolyhedralSurface {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
        load_surface_file(&path).unwrap()
    }

    #[test]
    fn fixture_cone_data() {
        let cube = fixture("cube.json");
        assert_eq!(cube.genus(), 0);
        let c = cube.cone_points();
        assert_eq!(c.len(), 8);
        assert!(c.iter().all(|p| (p.angle - 1.5 * PI).abs() < 1e-12 && (p.order + 0.25).abs() < 1e-12));

        let pillow = fixture("pillowcase.json");
        assert_eq!(pillow.genus(), 0);
        assert!((pillow.area() - 2.0).abs() < 1e-14);
        let c = pillow.cone_points();
        assert_eq!(c.len(), 4);
        assert!(c.iter().all(|p| (p.angle - PI).abs() < 1e-12));

        let l = fixture("lshape.json");
        assert_eq!(l.genus(), 2);
        let c = l.cone_points();
        assert_eq!(c.len(), 1);
        assert!((c[0].angle - 6.0 * PI).abs() < 1e-12);

        let t = fixture("two_tori_slit.json");
        assert_eq!(t.genus(), 2);
        assert_eq!(fixture("torus_translation.json").genus(), 1);
        assert!(fixture("torus_i.json").cone_points().is_empty());
        for s in [cube, pillow, l, t] {
            assert!(s.gauss_bonnet_residual().abs() < 1e-10);
        }
    }
}
