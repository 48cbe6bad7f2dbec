//! Flat conical metrics on tori built from a real divisor Σ b_k p_k.
//!
//! With F(w) = |θ₁(w)|·exp(−π(Im w)²/Im σ), which is invariant under the
//! lattice ⟨1, σ⟩, the density in the flat coordinate z is
//! ρ(z) = c·∏ F(z − p_k)^{2b_k}
//!      = c'·∏|θ₁(z − p_k)|^{2b_k}·exp(4π Im z·Σ b_k Im p_k / Im σ)
//! when Σ b_k = 0, where c' absorbs exp(−2π Σ b_k (Im p_k)² / Im σ). The
//! F form does not depend on the representatives chosen for p_k, so
//! translating the divisor translates the density. log ρ is harmonic away
//! from the divisor and ρ ≈ h_k|z − p_k|^{2b_k} near p_k, a cone of angle
//! 2π(b_k + 1).

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{SingularTriangleQuadrature, Singularity};
use crate::spectral::Density;
use crate::specialfn::{ln_abs_eta, ln_abs_theta1, ln_abs_theta1_prime0, Modulus, SpecialFnError};

/// Smallest allowed lattice distance between two divisor points.
pub const MIN_POINT_DISTANCE: f64 = 1e-3;
const ORDER_SUM_TOL: f64 = 1e-12;
const CONE_POINT_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error(transparent)]
    SpecialFn(#[from] SpecialFnError),
    #[error("order b = {b} at divisor point {index} must be > -1")]
    InvalidOrder { index: usize, b: f64 },
    #[error("divisor orders sum to {0}, expected 0")]
    OrdersDoNotSumToZero(f64),
    #[error("divisor points {i} and {j} are {distance:e} apart (minimum {MIN_POINT_DISTANCE})")]
    PointsTooClose { i: usize, j: usize, distance: f64 },
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("non-finite divisor coordinate at point {0}")]
    NonFinite(usize),
    #[error("density evaluated at divisor point {index}")]
    EvaluationAtConePoint { index: usize },
    #[error("divisor index {index} out of range ({len} points)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("divisors intersect: points {distance:e} apart")]
    DivisorsIntersect { distance: f64 },
    #[error("metrics live on different tori: {0} vs {1}")]
    ModulusMismatch(Complex64, Complex64),
    #[error("area quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivisorPoint {
    pub u: f64,
    pub v: f64,
    pub b: f64,
}

/// JSON schema of a metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricDocument {
    pub sigma: [f64; 2],
    pub scale: f64,
    #[serde(default)]
    pub divisor: Vec<DivisorPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaEstimate {
    pub value: f64,
    pub error: f64,
}

/// Scale factors at a divisor point: |g| is the density coefficient in the
/// z-chart, |f| = |dz/dx|(0) with x the distinguished parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistinguishedScale {
    pub h: f64,
    pub g_abs: f64,
    pub f_abs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicalTorusMetric {
    modulus: Modulus,
    scale: f64,
    divisor: Vec<DivisorPoint>,
    points: Vec<Complex64>,
}

impl ConicalTorusMetric {
    /// Validates the divisor and reduces (u, v) into [0, 1).
    pub fn new(sigma: Complex64, scale: f64, divisor: Vec<DivisorPoint>) -> Result<Self, MetricError> {
        let modulus = Modulus::new(sigma)?;
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(MetricError::InvalidScale(scale));
        }
        let mut reduced = Vec::with_capacity(divisor.len());
        for (index, d) in divisor.iter().enumerate() {
            if !d.u.is_finite() || !d.v.is_finite() || !d.b.is_finite() {
                return Err(MetricError::NonFinite(index));
            }
            if !(d.b > -1.0) {
                return Err(MetricError::InvalidOrder { index, b: d.b });
            }
            reduced.push(DivisorPoint {
                u: d.u.rem_euclid(1.0),
                v: d.v.rem_euclid(1.0),
                b: d.b,
            });
        }
        let total: f64 = reduced.iter().map(|d| d.b).sum();
        if total.abs() > ORDER_SUM_TOL {
            return Err(MetricError::OrdersDoNotSumToZero(total));
        }
        let points: Vec<Complex64> = reduced.iter().map(|d| d.u + d.v * sigma).collect();
        for i in 0..points.len() {
            for j in 0..i {
                let distance = lattice_distance(points[i] - points[j], sigma);
                if distance < MIN_POINT_DISTANCE {
                    return Err(MetricError::PointsTooClose { i: j, j: i, distance });
                }
            }
        }
        Ok(Self {
            modulus,
            scale,
            divisor: reduced,
            points,
        })
    }

    /// The smooth flat metric c|dz|².
    pub fn flat(sigma: Complex64, scale: f64) -> Result<Self, MetricError> {
        Self::new(sigma, scale, Vec::new())
    }

    pub fn from_document(doc: &MetricDocument) -> Result<Self, MetricError> {
        Self::new(Complex64::new(doc.sigma[0], doc.sigma[1]), doc.scale, doc.divisor.clone())
    }

    pub fn to_document(&self) -> MetricDocument {
        let s = self.sigma();
        MetricDocument {
            sigma: [s.re, s.im],
            scale: self.scale,
            divisor: self.divisor.clone(),
        }
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn sigma(&self) -> Complex64 {
        self.modulus.sigma()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn divisor(&self) -> &[DivisorPoint] {
        &self.divisor
    }

    /// Divisor points p_k = u + vσ with (u, v) in [0, 1)².
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Cone angles 2π(b_k + 1).
    pub fn cone_angles(&self) -> Vec<f64> {
        self.divisor.iter().map(|d| 2.0 * PI * (d.b + 1.0)).collect()
    }

    /// The same metric multiplied by κ.
    pub fn scaled(&self, kappa: f64) -> Result<Self, MetricError> {
        Self::new(self.sigma(), self.scale * kappa, self.divisor.clone())
    }

    /// The divisor shifted by du + dv·σ.
    pub fn translated(&self, du: f64, dv: f64) -> Result<Self, MetricError> {
        let divisor = self
            .divisor
            .iter()
            .map(|d| DivisorPoint {
                u: d.u + du,
                v: d.v + dv,
                b: d.b,
            })
            .collect();
        Self::new(self.sigma(), self.scale, divisor)
    }

    /// ln ρ without the cone-point check; −∞ or +∞ exactly at divisor points.
    pub fn ln_density_unchecked(&self, z: Complex64) -> f64 {
        let mut acc = self.scale.ln();
        for (d, p) in self.divisor.iter().zip(&self.points) {
            if d.b != 0.0 {
                acc += 2.0 * d.b * ln_invariant_theta(z - p, &self.modulus);
            }
        }
        acc
    }

    pub fn ln_density(&self, z: Complex64) -> Result<f64, MetricError> {
        let sigma = self.sigma();
        if let Some(index) = self
            .points
            .iter()
            .position(|p| lattice_distance(z - p, sigma) <= CONE_POINT_TOL)
        {
            return Err(MetricError::EvaluationAtConePoint { index });
        }
        Ok(self.ln_density_unchecked(z))
    }

    pub fn density(&self, z: Complex64) -> Result<f64, MetricError> {
        self.ln_density(z).map(f64::exp)
    }

    /// Singular points of the density whose translates meet the box [lo, hi].
    fn singularities_near(&self, lo: [f64; 2], hi: [f64; 2]) -> Vec<Singularity> {
        let sigma = self.sigma();
        let mut out = Vec::new();
        // translates needed to cover the box, padded by one cell
        let v_lo = (lo[1] / sigma.im).floor() as i64 - 1;
        let v_hi = (hi[1] / sigma.im).ceil() as i64 + 1;
        for (d, p) in self.divisor.iter().zip(&self.points) {
            if d.b == 0.0 {
                continue;
            }
            for n in v_lo..=v_hi {
                let base = p + n as f64 * sigma;
                let u_lo = (lo[0] - base.re).floor() as i64 - 1;
                let u_hi = (hi[0] - base.re).ceil() as i64 + 1;
                for m in u_lo..=u_hi {
                    let q = base + m as f64;
                    if q.re >= lo[0] - 1.0 && q.re <= hi[0] + 1.0 && q.im >= lo[1] - sigma.im && q.im <= hi[1] + sigma.im {
                        out.push(Singularity {
                            at: [q.re, q.im],
                            order: d.b,
                        });
                    }
                }
            }
        }
        out
    }

    fn quadrature(&self) -> SingularTriangleQuadrature {
        SingularTriangleQuadrature::new(8, 16, 24).with_orders(self.divisor.iter().map(|d| d.b))
    }

    /// ∫ρ over the fundamental parallelogram split into n×n cells.
    pub fn area_on_grid(&self, n: usize) -> Result<f64, MetricError> {
        if n == 0 {
            return Err(MetricError::QuadratureFailure("empty grid".into()));
        }
        let sigma = self.sigma();
        let sing = self.singularities_near([sigma.re.min(0.0), 0.0], [1.0 + sigma.re.max(0.0), sigma.im]);
        let quad = self.quadrature();
        let corner = |i: usize, j: usize| {
            let z = (i as f64 / n as f64) + (j as f64 / n as f64) * sigma;
            [z.re, z.im]
        };
        let f = |x: [f64; 2]| [self.ln_density_unchecked(Complex64::new(x[0], x[1])).exp()];
        let mut total = 0.0;
        for j in 0..n {
            for i in 0..n {
                let (a, b, c, d) = (corner(i, j), corner(i + 1, j), corner(i + 1, j + 1), corner(i, j + 1));
                total += quad.integrate([a, b, c], &sing, &f)[0];
                total += quad.integrate([a, c, d], &sing, &f)[0];
            }
        }
        if !total.is_finite() || total <= 0.0 {
            return Err(MetricError::QuadratureFailure(format!("area evaluated to {total}")));
        }
        Ok(total)
    }

    /// Area with an error estimate from one grid halving.
    pub fn area(&self) -> Result<AreaEstimate, MetricError> {
        if self.divisor.iter().all(|d| d.b == 0.0) {
            return Ok(AreaEstimate {
                value: self.scale * self.sigma().im,
                error: 0.0,
            });
        }
        let coarse = self.area_on_grid(4)?;
        let fine = self.area_on_grid(8)?;
        let error = (fine - coarse).abs();
        if error > 1e-8 * fine {
            return Err(MetricError::QuadratureFailure(format!(
                "area estimates {coarse} and {fine} disagree beyond 1e-8"
            )));
        }
        Ok(AreaEstimate { value: fine, error })
    }

    fn check_index(&self, k: usize) -> Result<(), MetricError> {
        if k >= self.divisor.len() {
            return Err(MetricError::IndexOutOfRange {
                index: k,
                len: self.divisor.len(),
            });
        }
        Ok(())
    }

    /// ln h_k where ρ(z) ≈ h_k|z − p_k|^{2b_k} near p_k.
    pub fn ln_h(&self, k: usize) -> Result<f64, MetricError> {
        self.check_index(k)?;
        let pk = self.points[k];
        let mut acc = self.scale.ln() + 2.0 * self.divisor[k].b * ln_abs_theta1_prime0(&self.modulus);
        for (j, (d, p)) in self.divisor.iter().zip(&self.points).enumerate() {
            if j != k && d.b != 0.0 {
                acc += 2.0 * d.b * ln_invariant_theta(pk - p, &self.modulus);
            }
        }
        Ok(acc)
    }

    pub fn distinguished_scale(&self, k: usize) -> Result<DistinguishedScale, MetricError> {
        let ln_h = self.ln_h(k)?;
        let b = self.divisor[k].b;
        Ok(DistinguishedScale {
            h: ln_h.exp(),
            g_abs: (0.5 * ln_h).exp(),
            f_abs: (-ln_h / (2.0 * (b + 1.0))).exp(),
        })
    }

    /// ln of the determinant predictor Im σ·Area·|η|⁴·∏|f_k|^{−b_k/6}.
    pub fn ln_mt_predictor(&self) -> Result<f64, MetricError> {
        let area = self.area()?.value;
        let mut acc = self.sigma().im.ln() + area.ln() + 4.0 * ln_abs_eta(&self.modulus);
        for (k, d) in self.divisor.iter().enumerate() {
            let ln_f = -self.ln_h(k)? / (2.0 * (d.b + 1.0));
            acc -= d.b / 6.0 * ln_f;
        }
        Ok(acc)
    }

    pub fn mt_predictor(&self) -> Result<f64, MetricError> {
        self.ln_mt_predictor().map(f64::exp)
    }
}

impl Density for ConicalTorusMetric {
    fn ln_density(&self, z: [f64; 2]) -> f64 {
        self.ln_density_unchecked(Complex64::new(z[0], z[1]))
    }

    fn singularities(&self, lo: [f64; 2], hi: [f64; 2]) -> Vec<Singularity> {
        self.singularities_near(lo, hi)
    }
}

/// ln F(w) = ln|θ₁(w)| − π(Im w)²/Im σ, evaluated at the representative of
/// w nearest the origin so the two terms never cancel catastrophically.
fn ln_invariant_theta(w: Complex64, m: &Modulus) -> f64 {
    let sigma = m.sigma();
    let y = (w.im / sigma.im).round();
    let x = (w.re - y * sigma.re).round();
    let w0 = w - x - y * sigma;
    ln_abs_theta1(w0, m) - PI * w0.im * w0.im / sigma.im
}

/// Distance from d to the nearest point of the lattice ⟨1, σ⟩.
pub fn lattice_distance(d: Complex64, sigma: Complex64) -> f64 {
    let y = (d.im / sigma.im).round();
    let x = (d.re - y * sigma.re).round();
    let mut best = f64::INFINITY;
    for dy in -1..=1 {
        for dx in -1..=1 {
            let w = d - (x + dx as f64) - (y + dy as f64) * sigma;
            best = best.min(w.norm());
        }
    }
    best
}

fn same_torus(a: &ConicalTorusMetric, b: &ConicalTorusMetric) -> Result<(), MetricError> {
    if (a.sigma() - b.sigma()).norm() > 1e-14 * a.sigma().norm() {
        return Err(MetricError::ModulusMismatch(a.sigma(), b.sigma()));
    }
    Ok(())
}

fn check_disjoint(a: &ConicalTorusMetric, b: &ConicalTorusMetric) -> Result<(), MetricError> {
    let sigma = a.sigma();
    for p in &a.points {
        for q in &b.points {
            let distance = lattice_distance(p - q, sigma);
            if distance < MIN_POINT_DISTANCE {
                return Err(MetricError::DivisorsIntersect { distance });
            }
        }
    }
    Ok(())
}

/// ln of Area(m1)/Area(m2)·∏|g_l|^{b_l/6}/∏|f_k|^{a_k/6}, where f_k is m2
/// written in m1's distinguished parameter at P_k and g_l is m1 written in
/// m2's distinguished parameter at Q_l.
pub fn ln_polyakov_ratio(m1: &ConicalTorusMetric, m2: &ConicalTorusMetric) -> Result<f64, MetricError> {
    same_torus(m1, m2)?;
    check_disjoint(m1, m2)?;
    let mut acc = m1.area()?.value.ln() - m2.area()?.value.ln();
    for (k, (d, p)) in m1.divisor.iter().zip(&m1.points).enumerate() {
        let ln_f = 0.5 * m2.ln_density_unchecked(*p) - m1.ln_h(k)? / (2.0 * (d.b + 1.0));
        acc -= d.b / 6.0 * ln_f;
    }
    for (l, (d, q)) in m2.divisor.iter().zip(&m2.points).enumerate() {
        let ln_g = 0.5 * m1.ln_density_unchecked(*q) - m2.ln_h(l)? / (2.0 * (d.b + 1.0));
        acc += d.b / 6.0 * ln_g;
    }
    Ok(acc)
}

pub fn polyakov_ratio(m1: &ConicalTorusMetric, m2: &ConicalTorusMetric) -> Result<f64, MetricError> {
    ln_polyakov_ratio(m1, m2).map(f64::exp)
}

/// ln of ∏[l/m(R_i)]^{c_i}·∏[m/n(P_j)]^{a_j}·∏[n/l(Q_k)]^{b_k}.
pub fn ln_three_polyhedra_product(
    l: &ConicalTorusMetric,
    m: &ConicalTorusMetric,
    n: &ConicalTorusMetric,
) -> Result<f64, MetricError> {
    same_torus(l, m)?;
    same_torus(l, n)?;
    check_disjoint(l, m)?;
    check_disjoint(m, n)?;
    check_disjoint(n, l)?;
    let term = |at: &ConicalTorusMetric, num: &ConicalTorusMetric, den: &ConicalTorusMetric| -> f64 {
        at.divisor
            .iter()
            .zip(&at.points)
            .map(|(d, p)| d.b * (num.ln_density_unchecked(*p) - den.ln_density_unchecked(*p)))
            .sum()
    };
    Ok(term(n, l, m) + term(l, m, n) + term(m, n, l))
}

pub fn three_polyhedra_product(
    l: &ConicalTorusMetric,
    m: &ConicalTorusMetric,
    n: &ConicalTorusMetric,
) -> Result<f64, MetricError> {
    ln_three_polyhedra_product(l, m, n).map(f64::exp)
}

pub fn load_metric(document: &str) -> Result<ConicalTorusMetric, MetricError> {
    let doc: MetricDocument = serde_json::from_str(document).map_err(|e| MetricError::Parse(e.to_string()))?;
    ConicalTorusMetric::from_document(&doc)
}

pub fn load_metric_file(path: &Path) -> Result<ConicalTorusMetric, MetricError> {
    let text = std::fs::read_to_string(path).map_err(|e| MetricError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_metric(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dp(u: f64, v: f64, b: f64) -> DivisorPoint {
        DivisorPoint { u, v, b }
    }

    fn half() -> ConicalTorusMetric {
        ConicalTorusMetric::new(c(0.0, 1.0), 1.0, vec![dp(0.25, 0.25, 0.5), dp(0.75, 0.75, -0.5)]).unwrap()
    }

    fn random_metric(rng: &mut ChaCha8Rng, sigma: Complex64, n: usize) -> ConicalTorusMetric {
        loop {
            let mut bs: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-0.6..0.6)).collect();
            let last = -bs.iter().sum::<f64>();
            if last <= -0.9 {
                continue;
            }
            bs.push(last);
            let divisor = bs.iter().map(|&b| dp(rng.random(), rng.random(), b)).collect();
            if let Ok(m) = ConicalTorusMetric::new(sigma, rng.random_range(0.5..2.0), divisor) {
                return m;
            }
        }
    }

    #[test]
    fn rejects_bad_divisors() {
        let s = c(0.0, 1.0);
        assert!(matches!(
            ConicalTorusMetric::new(s, 1.0, vec![dp(0.1, 0.1, 0.5), dp(0.2, 0.2, -0.4)]),
            Err(MetricError::OrdersDoNotSumToZero(_))
        ));
        assert!(matches!(
            ConicalTorusMetric::new(s, 1.0, vec![dp(0.1, 0.1, 1.5), dp(0.2, 0.2, -1.5)]),
            Err(MetricError::InvalidOrder { index: 1, .. })
        ));
        assert!(matches!(
            ConicalTorusMetric::new(s, 1.0, vec![dp(0.0, 0.0, 0.5), dp(0.9999, 1.0, -0.5)]),
            Err(MetricError::PointsTooClose { .. })
        ));
        assert!(matches!(ConicalTorusMetric::new(s, 0.0, vec![]), Err(MetricError::InvalidScale(_))));
        let m = half();
        assert!(matches!(
            m.density(c(1.25, 0.25)),
            Err(MetricError::EvaluationAtConePoint { index: 0 })
        ));
        assert!(matches!(m.distinguished_scale(2), Err(MetricError::IndexOutOfRange { .. })));
    }

    #[test]
    fn empty_divisor_is_constant() {
        let m = ConicalTorusMetric::flat(c(0.3, 1.2), 2.5).unwrap();
        assert_eq!(m.density(c(0.1, 0.7)).unwrap(), 2.5);
        let a = m.area().unwrap();
        assert!((a.value - 2.5 * 1.2).abs() < 1e-15);
        let m1 = ConicalTorusMetric::flat(c(0.3, 1.2), 1.0).unwrap();
        assert!((m1.area_on_grid(3).unwrap() - 1.2).abs() < 1e-13);
    }

    #[test]
    fn density_is_doubly_periodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for sigma in [c(0.0, 1.0), c(0.5, 1.0), c(-0.2, 0.8)] {
            let m = random_metric(&mut rng, sigma, 3);
            for _ in 0..20 {
                let z = c(rng.random(), rng.random::<f64>() * sigma.im);
                let r = m.ln_density(z).unwrap();
                assert!((m.ln_density(z + 1.0).unwrap() - r).abs() < 1e-10);
                assert!((m.ln_density(z + sigma).unwrap() - r).abs() < 1e-10);
                assert!((m.ln_density(z - 2.0 * sigma + 3.0).unwrap() - r).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn log_density_is_harmonic() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = random_metric(&mut rng, c(0.2, 1.1), 3);
        let lap = |z: Complex64, h: f64| {
            let f = |w: Complex64| m.ln_density(w).unwrap();
            (f(z + h) + f(z - h) + f(z + c(0.0, h)) + f(z - c(0.0, h)) - 4.0 * f(z)) / (h * h)
        };
        let mut checked = 0;
        while checked < 10 {
            let z = c(rng.random(), rng.random::<f64>() * 1.1);
            if m.points().iter().any(|p| lattice_distance(z - p, m.sigma()) < 0.25) {
                continue;
            }
            let (a, b) = (lap(z, 1e-2), lap(z, 5e-3));
            // the five-point stencil error is O(h²); the residual must shrink fourfold
            assert!(b.abs() < 5e-2, "laplacian {b}");
            assert!(b.abs() < 0.3 * a.abs() + 1e-6, "{a} -> {b}");
            checked += 1;
        }
    }

    #[test]
    fn local_power_law_matches_order() {
        let m = half();
        for (k, p) in m.points().iter().enumerate() {
            let b = m.divisor()[k].b;
            let dir = Complex64::from_polar(1.0, 0.7);
            let xs: Vec<f64> = (0..8).map(|i| (1e-3 * 0.5f64.powi(i)).ln()).collect();
            let ys: Vec<f64> = xs
                .iter()
                .map(|&lr| m.ln_density(p + dir * lr.exp()).unwrap())
                .collect();
            let n = xs.len() as f64;
            let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
            let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
                / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
            assert!((slope - 2.0 * b).abs() < 1e-3, "slope {slope} vs {}", 2.0 * b);
        }
    }

    #[test]
    fn h_is_the_local_coefficient_in_any_chart() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let m = random_metric(&mut rng, c(0.4, 0.9), 4);
        for k in 0..4 {
            let b = m.divisor()[k].b;
            let ln_h = m.ln_h(k).unwrap();
            for shift in [c(0.0, 0.0), c(1.0, 0.0), c(0.4, 0.9) * 2.0 - 1.0] {
                let p = m.points()[k] + shift;
                let eps = 1e-7;
                let z = p + Complex64::from_polar(eps, 1.3);
                let est = m.ln_density(z).unwrap() - 2.0 * b * eps.ln();
                assert!((est - ln_h).abs() < 1e-6, "{est} vs {ln_h}");
            }
        }
    }

    #[test]
    fn scale_laws() {
        let m = half();
        let s = m.scaled(3.0).unwrap();
        for k in 0..2 {
            let (a, b) = (m.distinguished_scale(k).unwrap(), s.distinguished_scale(k).unwrap());
            let bk = m.divisor()[k].b;
            assert!((b.h / a.h - 3.0).abs() < 1e-12);
            assert!((b.f_abs / a.f_abs - 3f64.powf(-1.0 / (2.0 * (bk + 1.0)))).abs() < 1e-12);
        }
        let zero = ConicalTorusMetric::new(c(0.0, 1.0), 2.0, vec![dp(0.1, 0.2, 0.0), dp(0.5, 0.5, 0.3), dp(0.7, 0.1, -0.3)]).unwrap();
        let d = zero.distinguished_scale(0).unwrap();
        let rho = zero.ln_density_unchecked(zero.points()[0]).exp();
        assert!((d.h / rho - 1.0).abs() < 1e-12);
        assert!((d.f_abs - rho.powf(-0.5)).abs() < 1e-12);
    }

    #[test]
    fn area_is_accurate_and_translation_invariant() {
        let m = half();
        let a = m.area().unwrap();
        assert!(a.error < 1e-8 * a.value);
        let t = m.translated(0.31, -0.17).unwrap();
        let b = t.area().unwrap();
        assert!((a.value - b.value).abs() < 1e-8 * a.value, "{} vs {}", a.value, b.value);
        assert!((m.scaled(2.0).unwrap().area().unwrap().value / a.value - 2.0).abs() < 1e-10);
        // self-convergence of the grid estimate
        let e1 = (m.area_on_grid(2).unwrap() - a.value).abs();
        let e2 = (m.area_on_grid(4).unwrap() - a.value).abs();
        assert!(e2 <= e1 + 1e-13);
    }

    #[test]
    fn mt_predictor_laws() {
        let sigma = c(0.1, 1.3);
        let flat = ConicalTorusMetric::flat(sigma, 1.0).unwrap();
        let eta4 = 4.0 * ln_abs_eta(flat.modulus());
        assert!((flat.ln_mt_predictor().unwrap() - (2.0 * sigma.im.ln() + eta4)).abs() < 1e-13);
        let m = half();
        let kappa = 1.7f64;
        let exponent = 1.0 + m.divisor().iter().map(|d| d.b / (12.0 * (d.b + 1.0))).sum::<f64>();
        let diff = m.scaled(kappa).unwrap().ln_mt_predictor().unwrap() - m.ln_mt_predictor().unwrap();
        assert!((diff - exponent * kappa.ln()).abs() < 1e-9);
        let moved = m.translated(1.0, -1.0).unwrap();
        assert!((moved.ln_mt_predictor().unwrap() - m.ln_mt_predictor().unwrap()).abs() < 1e-10);
    }

    #[test]
    fn polyakov_ratio_antisymmetry_and_cocycle() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let sigma = c(0.3, 1.1);
        for _ in 0..5 {
            let m1 = random_metric(&mut rng, sigma, 2);
            let m2 = random_metric(&mut rng, sigma, 3);
            let m3 = random_metric(&mut rng, sigma, 2);
            let (Ok(r12), Ok(r21), Ok(r23), Ok(r31)) = (
                ln_polyakov_ratio(&m1, &m2),
                ln_polyakov_ratio(&m2, &m1),
                ln_polyakov_ratio(&m2, &m3),
                ln_polyakov_ratio(&m3, &m1),
            ) else {
                continue;
            };
            assert!((r12 + r21).abs() < 1e-12);
            assert!((r12 + r23 + r31).abs() < 1e-8, "cocycle {}", r12 + r23 + r31);
        }
        let flat = ConicalTorusMetric::flat(c(0.0, 1.0), 1.0).unwrap();
        assert!(ln_polyakov_ratio(&flat, &flat).unwrap().abs() < 1e-15);
        assert!(matches!(ln_polyakov_ratio(&half(), &half()), Err(MetricError::DivisorsIntersect { .. })));
        assert!(matches!(
            ln_polyakov_ratio(&half(), &ConicalTorusMetric::flat(c(0.0, 2.0), 1.0).unwrap()),
            Err(MetricError::ModulusMismatch(..))
        ));
    }

    #[test]
    fn three_polyhedra_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut done = 0;
        while done < 20 {
            let sigma = c(rng.random_range(-0.5..0.5), rng.random_range(0.7..2.0));
            let l = random_metric(&mut rng, sigma, 2);
            let m = random_metric(&mut rng, sigma, 3);
            let n = random_metric(&mut rng, sigma, 2);
            if let Ok(v) = three_polyhedra_product(&l, &m, &n) {
                assert!((v - 1.0).abs() < 1e-8, "product {v}");
                let v2 = three_polyhedra_product(&l.scaled(4.0).unwrap(), &m, &n).unwrap();
                assert!((v2 - 1.0).abs() < 1e-8);
                done += 1;
            }
        }
        let m = half();
        assert!(matches!(three_polyhedra_product(&m, &m, &m), Err(MetricError::DivisorsIntersect { .. })));
    }

    #[test]
    fn document_round_trip() {
        let m = half();
        let text = serde_json::to_string(&m.to_document()).unwrap();
        assert_eq!(load_metric(&text).unwrap(), m);
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/metric_half.json");
        assert_eq!(load_metric_file(Path::new(path)).unwrap(), m);
        assert!(matches!(load_metric("{\"sigma\":[0,1]}"), Err(MetricError::Parse(_))));
    }
}
