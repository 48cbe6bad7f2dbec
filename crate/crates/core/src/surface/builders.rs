//! Constructors for flat tori and slit-glued translation surfaces.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{EdgeRef, Point, PolyhedralSurface, SurfaceError};

/// Flat torus C/(Z + σZ) cut into an n×n grid of cells, two triangles each.
///
/// Charts are genuine z coordinates inside the fundamental parallelogram.
/// Grid vertex (i, j) sits at (i + jσ)/n and is corner 0 of triangle
/// [`flat_torus_corner`]`(n, i, j)`.
pub fn build_flat_torus(sigma: Complex64, n: usize) -> Result<PolyhedralSurface, SurfaceError> {
    if sigma.im <= 0.0 || !sigma.im.is_finite() || !sigma.re.is_finite() {
        return Err(SurfaceError::LowerHalfPlane(sigma.im));
    }
    if n == 0 {
        return Err(SurfaceError::InvalidSubdivision);
    }
    let z = |i: usize, j: usize| {
        let w = (i as f64 + j as f64 * sigma) / n as f64;
        [w.re, w.im]
    };
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([z(i, j), z(i + 1, j), z(i + 1, j + 1)]);
            triangles.push([z(i, j), z(i + 1, j + 1), z(i, j + 1)]);
        }
    }
    let cell = |i: usize, j: usize| 2 * ((i % n) + n * (j % n));
    let mut gluings = Vec::with_capacity(3 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (l, u) = (cell(i, j), cell(i, j) + 1);
            gluings.push((EdgeRef::new(l, 2), EdgeRef::new(u, 0)));
            gluings.push((EdgeRef::new(l, 1), EdgeRef::new(cell(i + 1, j) + 1, 2)));
            gluings.push((EdgeRef::new(l, 0), EdgeRef::new(cell(i, j + n - 1) + 1, 1)));
        }
    }
    PolyhedralSurface::from_parts(triangles, gluings)
}

/// Triangle whose corner 0 is grid vertex (i, j) of [`build_flat_torus`].
pub fn flat_torus_corner(n: usize, i: usize, j: usize) -> usize {
    2 * ((i % n) + n * (j % n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parallelogram {
    pub a: Complex64,
    pub b: Complex64,
}

impl Parallelogram {
    pub fn area(&self) -> f64 {
        (self.a.conj() * self.b).im
    }

    fn to_unit(self, z: Complex64) -> Point {
        let det = self.area();
        let s = (z.conj() * self.b).im / det;
        let t = (self.a.conj() * z).im / det;
        [s, t]
    }

    fn to_chart(self, p: Point) -> Point {
        let z = p[0] * self.a + p[1] * self.b;
        [z.re, z.im]
    }
}

/// A slit on two parallelograms; crossing it on one sheet lands on the other.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cut {
    pub from: Complex64,
    pub to: Complex64,
    pub on: [usize; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationSurfaceSpec {
    pub parallelograms: Vec<Parallelogram>,
    pub cuts: Vec<Cut>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ParallelogramDoc {
    #[serde(rename = "A")]
    pub a: [f64; 2],
    #[serde(rename = "B")]
    pub b: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CutDoc {
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub on: [usize; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TranslationSurfaceDocument {
    pub parallelograms: Vec<ParallelogramDoc>,
    #[serde(default)]
    pub cuts: Vec<CutDoc>,
}

impl TryFrom<&TranslationSurfaceDocument> for TranslationSurfaceSpec {
    type Error = SurfaceError;

    fn try_from(d: &TranslationSurfaceDocument) -> Result<Self, SurfaceError> {
        let c = |p: [f64; 2]| Complex64::new(p[0], p[1]);
        Ok(Self {
            parallelograms: d
                .parallelograms
                .iter()
                .map(|p| Parallelogram { a: c(p.a), b: c(p.b) })
                .collect(),
            cuts: d
                .cuts
                .iter()
                .map(|k| Cut {
                    from: c(k.from),
                    to: c(k.to),
                    on: k.on,
                })
                .collect(),
        })
    }
}

const EPS: f64 = 1e-10;

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn lerp(p: Point, q: Point, t: f64) -> Point {
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

fn close(p: Point, q: Point) -> bool {
    (p[0] - q[0]).abs() < EPS && (p[1] - q[1]).abs() < EPS
}

/// Parameter of `x` along segment pq if it lies on it (within EPS).
fn on_segment(p: Point, q: Point, x: Point) -> Option<f64> {
    let d = [q[0] - p[0], q[1] - p[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = ((x[0] - p[0]) * d[0] + (x[1] - p[1]) * d[1]) / l2;
    let off = cross(p, q, x).abs() / l2.sqrt();
    (off < EPS && t > -EPS / l2.sqrt() && t < 1.0 + EPS / l2.sqrt()).then_some(t)
}

fn segments_touch(p: Point, q: Point, r: Point, s: Point) -> bool {
    let d1 = cross(p, q, r);
    let d2 = cross(p, q, s);
    let d3 = cross(r, s, p);
    let d4 = cross(r, s, q);
    if ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS)) && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS)) {
        return true;
    }
    on_segment(p, q, r).is_some()
        || on_segment(p, q, s).is_some()
        || on_segment(r, s, p).is_some()
        || on_segment(r, s, q).is_some()
}

/// Whether the open segment pq passes through the interior of a ccw convex polygon.
fn crosses_interior(poly: &[Point], p: Point, q: Point) -> bool {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let n = poly.len();
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        let f0 = cross(a, b, p);
        let f1 = cross(a, b, q);
        let fd = f1 - f0;
        // need f0 + t fd > EPS on a sub-interval
        if fd.abs() < 1e-300 {
            if f0 <= EPS {
                return false;
            }
        } else {
            let t = (EPS - f0) / fd;
            if fd > 0.0 {
                lo = lo.max(t);
            } else {
                hi = hi.min(t);
            }
        }
    }
    hi - lo > EPS
}

fn split_polygon(poly: &[Point], p: Point, q: Point) -> (Vec<Point>, Vec<Point>) {
    let n = poly.len();
    let sd: Vec<f64> = poly.iter().map(|&v| cross(p, q, v)).collect();
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for k in 0..n {
        let (v, w) = (poly[k], poly[(k + 1) % n]);
        let (a, b) = (sd[k], sd[(k + 1) % n]);
        if a >= -EPS {
            left.push(v);
        }
        if a <= EPS {
            right.push(v);
        }
        if (a > EPS && b < -EPS) || (a < -EPS && b > EPS) {
            let x = lerp(v, w, a / (a - b));
            left.push(x);
            right.push(x);
        }
    }
    (left, right)
}

struct PointSet(Vec<Point>);

impl PointSet {
    fn id(&mut self, p: Point) -> usize {
        if let Some(i) = self.0.iter().position(|&q| close(p, q)) {
            return i;
        }
        self.0.push(p);
        self.0.len() - 1
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Side {
    Left,
    Right,
}

fn frac(x: f64) -> f64 {
    x - x.floor()
}

/// Slit endpoints inside the unit square shifted by `shift`.
fn place(p: Point, d: Point, shift: Point) -> (Point, Point) {
    let a = [frac(p[0] - shift[0]), frac(p[1] - shift[1])];
    (a, [a[0] + d[0], a[1] + d[1]])
}

/// Domain offset keeping every slit at least 1e-6 away from the boundary,
/// preferring the given domain and otherwise maximizing the clearance.
fn fit_domain(slits: &[(usize, Point, Point)]) -> Option<Point> {
    let clearance = |shift: Point| {
        slits
            .iter()
            .flat_map(|&(_, p, d)| {
                let (a, b) = place(p, d, shift);
                [a[0], a[1], b[0], b[1]]
            })
            .map(|u| u.min(1.0 - u))
            .fold(f64::INFINITY, f64::min)
    };
    if clearance([0.0, 0.0]) >= 0.05 {
        return Some([0.0, 0.0]);
    }
    const G: usize = 40;
    let (mut best, mut arg) = (1e-6, None);
    for a in 0..G {
        for b in 0..G {
            let shift = [a as f64 / G as f64, b as f64 / G as f64];
            let c = clearance(shift);
            if c > best {
                best = c;
                arg = Some(shift);
            }
        }
    }
    arg
}

/// Glues parallelograms (each a torus) along the given slits.
pub fn build_translation_surface(spec: &TranslationSurfaceSpec) -> Result<PolyhedralSurface, SurfaceError> {
    let np = spec.parallelograms.len();
    if np == 0 {
        return Err(SurfaceError::Empty);
    }
    for (i, p) in spec.parallelograms.iter().enumerate() {
        if !(p.area() > 0.0) || !p.area().is_finite() {
            return Err(SurfaceError::DegenerateParallelogram(i));
        }
    }
    // slit start and displacement in unit coordinates, per parallelogram
    let mut raw: Vec<Vec<(usize, Point, Point)>> = vec![Vec::new(); np];
    for (c, cut) in spec.cuts.iter().enumerate() {
        let [i, j] = cut.on;
        if i >= np || j >= np {
            return Err(SurfaceError::InvalidCut(c, "parallelogram index out of range".into()));
        }
        if i == j {
            return Err(SurfaceError::InvalidCut(c, "a cut must join two distinct parallelograms".into()));
        }
        if (cut.to - cut.from).norm() <= EPS {
            return Err(SurfaceError::InvalidCut(c, "zero length".into()));
        }
        for k in [i, j] {
            let par = spec.parallelograms[k];
            let (p, q) = (par.to_unit(cut.from), par.to_unit(cut.to));
            raw[k].push((c, p, [q[0] - p[0], q[1] - p[1]]));
        }
    }
    // cut positions are taken mod the lattice: pick a fundamental domain
    // of each parallelogram that holds all of its cuts in the interior
    let mut shifts = Vec::with_capacity(np);
    let mut slits: Vec<Vec<(usize, Point, Point)>> = Vec::with_capacity(np);
    for (k, r) in raw.iter().enumerate() {
        let shift = fit_domain(r).ok_or(SurfaceError::CutOutsideParallelogram {
            cut: r.first().map_or(0, |x| x.0),
            parallelogram: k,
        })?;
        slits.push(
            r.iter()
                .map(|&(c, p, d)| {
                    let (a, b) = place(p, d, shift);
                    (c, a, b)
                })
                .collect(),
        );
        shifts.push(shift);
    }
    for s in &slits {
        for (x, &(c1, p1, q1)) in s.iter().enumerate() {
            for &(c2, p2, q2) in &s[x + 1..] {
                if segments_touch(p1, q1, p2, q2) {
                    return Err(SurfaceError::CutOverlap(c1, c2));
                }
            }
        }
    }

    // convex partitions along every slit line
    let mut polys: Vec<Vec<Vec<Point>>> = Vec::with_capacity(np);
    let mut points: Vec<PointSet> = Vec::with_capacity(np);
    for s in &slits {
        let mut cur = vec![vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]];
        for &(_, p, q) in s {
            let mut next = Vec::new();
            for poly in cur {
                if crosses_interior(&poly, p, q) {
                    let (l, r) = split_polygon(&poly, p, q);
                    next.push(l);
                    next.push(r);
                } else {
                    next.push(poly);
                }
            }
            cur = next;
        }
        let mut set = PointSet(Vec::new());
        for poly in &cur {
            for &v in poly {
                set.id(v);
            }
        }
        for &(_, p, q) in s {
            set.id(p);
            set.id(q);
        }
        polys.push(cur);
        points.push(set);
    }
    // mirror boundary points onto the opposite side
    for set in points.iter_mut() {
        let snapshot = set.0.clone();
        for p in snapshot {
            if p[0].abs() < EPS || (p[0] - 1.0).abs() < EPS {
                set.id([1.0 - p[0].round(), p[1]]);
            }
            if p[1].abs() < EPS || (p[1] - 1.0).abs() < EPS {
                set.id([p[0], 1.0 - p[1].round()]);
            }
        }
    }
    // common subdivision of each slit on both of its sheets
    let mut slit_params: Vec<Vec<f64>> = vec![Vec::new(); spec.cuts.len()];
    for (k, s) in slits.iter().enumerate() {
        for &(c, p, q) in s {
            for &x in &points[k].0 {
                if let Some(t) = on_segment(p, q, x) {
                    slit_params[c].push(t.clamp(0.0, 1.0));
                }
            }
        }
    }
    for v in slit_params.iter_mut() {
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    }
    for (k, s) in slits.iter().enumerate() {
        for &(c, p, q) in s {
            for &t in &slit_params[c] {
                points[k].id(lerp(p, q, t));
            }
        }
    }

    let mut triangles: Vec<[Point; 3]> = Vec::new();
    let mut gluings = Vec::new();
    // (cut, interval, parallelogram, side) -> edge on the slit
    let mut slit_edges: HashMap<(usize, usize, usize, Side), EdgeRef> = HashMap::new();
    for k in 0..np {
        let par = spec.parallelograms[k];
        let sh = shifts[k];
        let chart = |p: Point| par.to_chart([p[0] + sh[0], p[1] + sh[1]]);
        let set = &mut points[k];
        let boundary: Vec<Point> = set.0.clone();
        let mut interior: HashMap<(usize, usize), EdgeRef> = HashMap::new();
        let mut border: HashMap<(usize, usize), EdgeRef> = HashMap::new();
        for poly in &polys[k] {
            let n = poly.len();
            let mut ring = Vec::new();
            for e in 0..n {
                let (a, b) = (poly[e], poly[(e + 1) % n]);
                let mut on: Vec<(f64, Point)> = boundary
                    .iter()
                    .filter_map(|&x| on_segment(a, b, x).map(|t| (t, x)))
                    .filter(|&(t, _)| t > 1e-9 && t < 1.0 - 1e-9)
                    .collect();
                on.sort_by(|x, y| x.0.total_cmp(&y.0));
                ring.push(a);
                ring.extend(on.into_iter().map(|x| x.1));
            }
            let cen = poly.iter().fold([0.0, 0.0], |acc, v| [acc[0] + v[0], acc[1] + v[1]]);
            let cen = [cen[0] / n as f64, cen[1] / n as f64];
            let cid = set.id(cen);
            let m = ring.len();
            for e in 0..m {
                let (w0, w1) = (ring[e], ring[(e + 1) % m]);
                let (i0, i1) = (set.id(w0), set.id(w1));
                let t = triangles.len();
                triangles.push([chart(cen), chart(w0), chart(w1)]);
                for (edge, u, v) in [(0, cid, i0), (2, i1, cid)] {
                    let key = (u.min(v), u.max(v));
                    match interior.remove(&key) {
                        Some(other) => gluings.push((other, EdgeRef::new(t, edge))),
                        None => {
                            interior.insert(key, EdgeRef::new(t, edge));
                        }
                    }
                }
                let r = EdgeRef::new(t, 1);
                let on_side = |f: fn(Point) -> f64, v: f64| (f(w0) - v).abs() < EPS && (f(w1) - v).abs() < EPS;
                let sx = |p: Point| p[0];
                let sy = |p: Point| p[1];
                if on_side(sx, 0.0) || on_side(sx, 1.0) || on_side(sy, 0.0) || on_side(sy, 1.0) {
                    border.insert((i0, i1), r);
                    continue;
                }
                let slit = slits[k].iter().find(|&&(_, p, q)| {
                    on_segment(p, q, w0).is_some() && on_segment(p, q, w1).is_some()
                });
                match slit {
                    Some(&(c, p, q)) => {
                        let (t0, t1) = (on_segment(p, q, w0).unwrap(), on_segment(p, q, w1).unwrap());
                        let lo = t0.min(t1);
                        let interval = slit_params[c]
                            .iter()
                            .position(|&x| (x - lo).abs() < 1e-8)
                            .expect("slit subdivision is shared");
                        let side = if cross(p, q, cen) > 0.0 { Side::Left } else { Side::Right };
                        slit_edges.insert((c, interval, k, side), r);
                    }
                    None => {
                        let key = (i0.min(i1), i0.max(i1));
                        match interior.remove(&key) {
                            Some(other) => gluings.push((other, r)),
                            None => {
                                interior.insert(key, r);
                            }
                        }
                    }
                }
            }
        }
        debug_assert!(interior.is_empty());
        // opposite sides of the parallelogram
        let pts = &set.0;
        let keys: Vec<(usize, usize)> = border.keys().copied().collect();
        for (i0, i1) in keys {
            let Some(&r) = border.get(&(i0, i1)) else { continue };
            let (a, b) = (pts[i0], pts[i1]);
            // corners lie on two sides; mirror across the side both points share
            let vertical = a[0].abs() < EPS && b[0].abs() < EPS || (a[0] - 1.0).abs() < EPS && (b[0] - 1.0).abs() < EPS;
            let m = |p: Point| {
                if vertical {
                    [1.0 - p[0].round(), p[1]]
                } else {
                    [p[0], 1.0 - p[1].round()]
                }
            };
            let (j0, j1) = (
                pts.iter().position(|&x| close(x, m(a))).expect("mirrored point"),
                pts.iter().position(|&x| close(x, m(b))).expect("mirrored point"),
            );
            let other = border.remove(&(j1, j0)).expect("opposite edge");
            border.remove(&(i0, i1));
            gluings.push((r, other));
        }
    }
    for (c, cut) in spec.cuts.iter().enumerate() {
        let [i, j] = cut.on;
        for interval in 0..slit_params[c].len().saturating_sub(1) {
            let get = |k: usize, s: Side| {
                slit_edges
                    .get(&(c, interval, k, s))
                    .copied()
                    .ok_or_else(|| SurfaceError::InvalidCut(c, "slit subdivision mismatch".into()))
            };
            gluings.push((get(i, Side::Left)?, get(j, Side::Right)?));
            gluings.push((get(i, Side::Right)?, get(j, Side::Left)?));
        }
    }
    PolyhedralSurface::from_parts(triangles, gluings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn flat_torus_is_regular() {
        let s = build_flat_torus(Complex64::new(0.3, 1.2), 4).unwrap();
        assert_eq!(s.genus(), 1);
        assert_eq!(s.vertex_count(), 16);
        assert!((s.area() - 1.2).abs() < 1e-14);
        assert!(s.cone_points().is_empty());
        assert!(build_flat_torus(Complex64::new(0.0, -1.0), 2).is_err());
        assert!(build_flat_torus(Complex64::new(0.0, 1.0), 0).is_err());
        // grid vertices are distinct classes
        let mut seen: Vec<usize> = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| s.corner_class(flat_torus_corner(4, i, j), 0))
            .collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 16);
    }

    fn two_tori(from: Complex64, to: Complex64) -> TranslationSurfaceSpec {
        let sq = Parallelogram {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 1.0),
        };
        TranslationSurfaceSpec {
            parallelograms: vec![sq, sq],
            cuts: vec![Cut { from, to, on: [0, 1] }],
        }
    }

    #[test]
    fn slit_tori_make_genus_two() {
        let s = build_translation_surface(&two_tori(Complex64::new(0.25, 0.5), Complex64::new(0.75, 0.5))).unwrap();
        assert_eq!(s.genus(), 2);
        assert!((s.area() - 2.0).abs() < 1e-13);
        let cones = s.cone_points();
        assert_eq!(cones.len(), 2);
        for c in &cones {
            assert!((c.angle - 4.0 * PI).abs() < 1e-10);
        }
        assert!(s.gauss_bonnet_residual().abs() < 1e-12);
    }

    #[test]
    fn oblique_slit_and_parallelogram() {
        let p = Parallelogram {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.4, 0.9),
        };
        let spec = TranslationSurfaceSpec {
            parallelograms: vec![p, p],
            cuts: vec![Cut {
                from: Complex64::new(0.3, 0.2),
                to: Complex64::new(0.9, 0.7),
                on: [0, 1],
            }],
        };
        let s = build_translation_surface(&spec).unwrap();
        assert_eq!(s.genus(), 2);
        assert!((s.area() - 1.8).abs() < 1e-12);
        assert_eq!(s.cone_points().len(), 2);
    }

    #[test]
    fn three_sheets_with_two_slits() {
        let sq = Parallelogram {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 1.0),
        };
        let spec = TranslationSurfaceSpec {
            parallelograms: vec![sq, sq, sq],
            cuts: vec![
                Cut {
                    from: Complex64::new(0.2, 0.3),
                    to: Complex64::new(0.6, 0.3),
                    on: [0, 1],
                },
                Cut {
                    from: Complex64::new(0.5, 0.6),
                    to: Complex64::new(0.5, 0.9),
                    on: [1, 2],
                },
            ],
        };
        let s = build_translation_surface(&spec).unwrap();
        assert_eq!(s.genus(), 3);
        assert!(s.gauss_bonnet_residual().abs() < 1e-12);
    }

    #[test]
    fn cut_from_lattice_point() {
        let s = build_translation_surface(&two_tori(Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.25))).unwrap();
        assert_eq!(s.genus(), 2);
        assert!((s.area() - 2.0).abs() < 1e-13);
        let orders: Vec<f64> = s.cone_points().iter().map(|c| c.order).collect();
        assert_eq!(orders.len(), 2);
        assert!(orders.iter().all(|b| (b - 1.0).abs() < 1e-10));
    }

    #[test]
    fn area_is_sum_of_parallelograms() {
        let spec = TranslationSurfaceSpec {
            parallelograms: vec![
                Parallelogram {
                    a: Complex64::new(1.0, 0.0),
                    b: Complex64::new(0.0, 1.0),
                },
                Parallelogram {
                    a: Complex64::new(1.0, 0.0),
                    b: Complex64::new(0.0, 2.0),
                },
            ],
            cuts: vec![Cut {
                from: Complex64::new(0.3, 0.4),
                to: Complex64::new(0.6, 0.5),
                on: [0, 1],
            }],
        };
        let s = build_translation_surface(&spec).unwrap();
        assert!((s.area() - 3.0).abs() < 1e-12);
        assert_eq!(s.genus(), 2);
    }

    #[test]
    fn invalid_cuts() {
        let bad = two_tori(Complex64::new(0.25, 0.5), Complex64::new(1.25, 0.5));
        assert!(matches!(
            build_translation_surface(&bad),
            Err(SurfaceError::CutOutsideParallelogram { .. })
        ));
        let mut overlap = two_tori(Complex64::new(0.2, 0.5), Complex64::new(0.6, 0.5));
        overlap.cuts.push(Cut {
            from: Complex64::new(0.4, 0.5),
            to: Complex64::new(0.8, 0.5),
            on: [0, 1],
        });
        assert!(matches!(
            build_translation_surface(&overlap),
            Err(SurfaceError::CutOverlap(0, 1))
        ));
    }
}
