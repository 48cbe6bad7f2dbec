//! Verification suites behind `conedet verify …`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde_json::json;

use super::report::{ErrorKind, ReportBuilder, VerificationReport};
use super::CliError;
use crate::conekernel::{trace_defect_closed, trace_defect_numeric, ConeParams};
use crate::spectral::{
    fit_heat_coefficients, log_det, rescaling_exponent, surface_spectrum, weyl_slope, zeta_zero,
    ConstantDensity, Density, HeatCoefficients, Spectrum, SpectrumOptions, ZetaDetResult, CERTIFIED_LAMBDA_T,
};
use crate::specialfn::{ln_abs_eta, Modulus};
use crate::surface::{build_flat_torus, default_grading, MeshLevel, PolyhedralSurface};
use crate::torusmetrics::{
    lattice_distance, ln_three_polyhedra_product, ConicalTorusMetric, MetricError,
};

/// Eigenvalues per unit area (for unit-scale geometry) used by the suites.
pub const COUNT_PER_AREA: f64 = 120.0;
/// Subdivision of the base torus triangulation before refinement.
pub const TORUS_BASE: usize = 4;

/// Smallest number of refinement levels whose second-finest mesh has at
/// least `4·count` vertices, so Richardson pairs are resolved on both.
pub fn plan_levels(surface: &PolyhedralSurface, count: usize) -> Result<usize, CliError> {
    let grading = default_grading(surface);
    let mut mesh = MeshLevel::base(surface);
    let mut refinements = 0;
    while mesh.vertex_count() < 4 * count {
        if refinements >= 8 {
            return Err(CliError::Usage(format!("{count} eigenvalues need an unreasonably fine mesh")));
        }
        mesh = mesh.refine(&grading)?;
        refinements += 1;
    }
    Ok(refinements + 1)
}

fn count_for_area(area: f64, per_area: f64) -> usize {
    (per_area * area).round().max(8.0) as usize
}

/// FEM spectrum with automatic level planning when `levels` is None.
pub fn fem_spectrum(
    surface: &PolyhedralSurface,
    density: Option<&dyn Density>,
    levels: Option<usize>,
    count: usize,
) -> Result<Spectrum, CliError> {
    let levels = match levels {
        Some(l) => l,
        None => plan_levels(surface, count)?,
    };
    Ok(surface_spectrum(surface, density, &SpectrumOptions::new(levels, count))?)
}

/// FEM log det of a conical torus metric on the flat torus of the same σ.
pub fn metric_log_det(
    metric: &ConicalTorusMetric,
    surface: Option<&PolyhedralSurface>,
    levels: Option<usize>,
    count: Option<usize>,
) -> Result<(ZetaDetResult, Spectrum), CliError> {
    let owned;
    let surface = match surface {
        Some(s) => {
            check_metric_charts(s, metric)?;
            s
        }
        None => {
            owned = build_flat_torus(metric.sigma(), TORUS_BASE)?;
            &owned
        }
    };
    let area = metric.area()?.value;
    let count = count.unwrap_or_else(|| count_for_area(area, COUNT_PER_AREA));
    let levels = levels.unwrap_or(5);
    let spec = fem_spectrum(surface, Some(metric), Some(levels), count)?;
    let coeffs = HeatCoefficients::from_cones(area, &metric.cone_angles(), 1)?;
    Ok((log_det(&spec, &coeffs, None)?, spec))
}

/// The metric density lives on z-coordinates, so every gluing of the surface
/// must identify chart points that differ by a lattice vector.
pub fn check_metric_charts(surface: &PolyhedralSurface, metric: &ConicalTorusMetric) -> Result<(), CliError> {
    let sigma = metric.sigma();
    if surface.genus() != 1 || !surface.cone_points().is_empty() {
        return Err(CliError::Usage("a metric needs a smooth flat torus surface".into()));
    }
    if (surface.area() - sigma.im).abs() > 1e-9 * sigma.im {
        return Err(CliError::Usage(format!(
            "surface area {} does not match Im sigma = {}",
            surface.area(),
            sigma.im
        )));
    }
    let tris = surface.triangles();
    for (a, b) in surface.gluings() {
        let pa = tris[a.triangle];
        let pb = tris[b.triangle];
        let a0 = pa[a.edge];
        let b1 = pb[(b.edge + 1) % 3];
        let d = Complex64::new(a0[0] - b1[0], a0[1] - b1[1]);
        if lattice_distance(d, sigma) > 1e-9 {
            return Err(CliError::Usage(format!(
                "triangle {} and {} charts are not related by a lattice translation",
                a.triangle, b.triangle
            )));
        }
    }
    Ok(())
}

pub fn cone_defect(betas: &[f64], t: f64, radius: f64, tol: f64, timings: bool) -> Result<VerificationReport, CliError> {
    let mut r = ReportBuilder::new("cone-defect", timings);
    let mut rows = Vec::new();
    for &beta in betas {
        r.start();
        let params = ConeParams::new(beta)?;
        let numeric = trace_defect_numeric(&params, radius, t)?;
        let closed = trace_defect_closed(beta)?;
        r.check(
            &format!("defect beta={beta}"),
            json!({"beta": beta, "t": t, "radius": radius}),
            closed,
            numeric,
            ErrorKind::Absolute,
            tol,
        );
        rows.push(json!({"beta": beta, "numeric": numeric, "closed_form": closed, "abs_error": (numeric - closed).abs()}));
    }
    if let [row] = rows.as_slice() {
        for key in ["numeric", "closed_form", "abs_error"] {
            r.summary(key, &row[key]);
        }
    } else {
        r.summary("results", rows);
    }
    Ok(r.finish())
}

/// Closed-form ζ(0) consistency plus a₀ fitted from the FEM heat trace.
pub fn zeta_zero_suite(
    surface: &PolyhedralSurface,
    levels: Option<usize>,
    count: Option<usize>,
    tol: f64,
    timings: bool,
) -> Result<VerificationReport, CliError> {
    let mut r = ReportBuilder::new("zeta-zero", timings);
    let angles: Vec<f64> = surface.cone_points().iter().map(|c| c.angle).collect();
    let z = zeta_zero(&angles, surface.genus())?;
    let inputs = json!({"cone_angles": angles, "genus": surface.genus(), "area": surface.area()});
    r.check("closed forms agree", inputs.clone(), z.value, z.cross_check, ErrorKind::Absolute, 1e-14);
    r.check(
        "gauss-bonnet residual",
        inputs.clone(),
        0.0,
        surface.gauss_bonnet_residual(),
        ErrorKind::Absolute,
        1e-10,
    );
    r.start();
    let count = count.unwrap_or_else(|| count_for_area(surface.area() / surface.shortest_edge().powi(2), 130.0));
    let spec = fem_spectrum(surface, None, levels, count)?;
    let fit = fit_a0(&spec, surface.area())?;
    r.check(
        "fem heat-trace zeta(0)",
        json!({"surface": inputs, "eigenvalues": spec.len(), "vertices": spec.vertex_count}),
        z.value,
        fit.a0 - 1.0,
        ErrorKind::Absolute,
        tol,
    );
    r.summary("zeta0_closed", z.value);
    r.summary("zeta0_fitted", fit.a0 - 1.0);
    r.summary("fit", fit);
    Ok(r.finish())
}

/// a₀ from the heat trace at five closely spaced times just above the
/// certified limit, with a_{−1} = Area/4π known. Larger t picks up the
/// e^{−ℓ²/4t} terms of closed geodesics.
pub fn fit_a0(spec: &Spectrum, area: f64) -> Result<crate::spectral::HeatFit, CliError> {
    let t0 = 1.01 * CERTIFIED_LAMBDA_T / spec.largest();
    let times: Vec<f64> = (0..5).map(|k| t0 * 1.05f64.powi(k)).collect();
    Ok(fit_heat_coefficients(spec, &times, Some(area / (4.0 * PI)))?)
}

/// log det of κ·m against m: the difference must be e·ln κ.
pub fn rescaling_suite(
    surface: &PolyhedralSurface,
    kappa: f64,
    levels: Option<usize>,
    count: Option<usize>,
    tol: f64,
    timings: bool,
) -> Result<VerificationReport, CliError> {
    let mut r = ReportBuilder::new("rescaling", timings);
    let angles: Vec<f64> = surface.cone_points().iter().map(|c| c.angle).collect();
    let exponent = rescaling_exponent(&angles, surface.genus())?;
    let z = zeta_zero(&angles, surface.genus())?;
    let inputs = json!({"cone_angles": angles, "genus": surface.genus(), "kappa": kappa});
    r.check("exponent equals -zeta(0)", inputs.clone(), -z.value, exponent, ErrorKind::Absolute, 1e-14);
    r.start();
    let count = count.unwrap_or_else(|| count_for_area(surface.area() / surface.shortest_edge().powi(2), 100.0));
    let base = fem_spectrum(surface, None, levels, count)?;
    let scaled = fem_spectrum(surface, Some(&ConstantDensity(kappa)), levels, count)?;
    let c1 = HeatCoefficients::for_surface(surface)?;
    let c2 = HeatCoefficients::from_cones(kappa * surface.area(), &angles, surface.genus())?;
    let d1 = log_det(&base, &c1, None)?;
    let d2 = log_det(&scaled, &c2, None)?;
    r.check(
        "fem log det shift",
        inputs,
        exponent * kappa.ln(),
        d2.log_det - d1.log_det,
        ErrorKind::Absolute,
        tol,
    );
    r.summary("exponent", exponent);
    r.summary("log_det", d1.log_det);
    r.summary("log_det_scaled", d2.log_det);
    Ok(r.finish())
}

pub fn weyl_suite(
    surface: &PolyhedralSurface,
    lo: f64,
    hi: f64,
    levels: Option<usize>,
    tol: f64,
    timings: bool,
) -> Result<VerificationReport, CliError> {
    let mut r = ReportBuilder::new("weyl", timings);
    let weyl = surface.area() / (4.0 * PI);
    let count = (1.5 * weyl * hi).ceil() as usize + 16;
    let spec = fem_spectrum(surface, None, levels, count)?;
    let slope = weyl_slope(&spec, lo, hi)?;
    r.check(
        "counting slope",
        json!({"area": surface.area(), "lo": lo, "hi": hi, "eigenvalues": spec.len()}),
        weyl,
        slope,
        ErrorKind::Relative,
        tol,
    );
    r.summary("slope", slope);
    r.summary("weyl_slope", weyl);
    Ok(r.finish())
}

/// ln(Im σ²|η(σ)|⁴), the σ-dependent part of log det on a flat torus.
pub fn ray_singer_prediction(sigma: Complex64) -> Result<f64, CliError> {
    let m = Modulus::new(sigma)?;
    Ok(2.0 * sigma.im.ln() + 4.0 * ln_abs_eta(&m))
}

pub fn flat_torus_log_det(sigma: Complex64, levels: usize, per_area: f64) -> Result<ZetaDetResult, CliError> {
    let s = build_flat_torus(sigma, TORUS_BASE)?;
    let spec = fem_spectrum(&s, None, Some(levels), count_for_area(sigma.im, per_area))?;
    Ok(log_det(&spec, &HeatCoefficients::for_surface(&s)?, None)?)
}

/// FEM log-det differences against the first modulus.
pub fn ray_singer_suite(sigmas: &[Complex64], levels: usize, tol: f64, timings: bool) -> Result<VerificationReport, CliError> {
    if sigmas.len() < 2 {
        return Err(CliError::Usage("ray-singer needs at least two moduli".into()));
    }
    let mut r = ReportBuilder::new("ray-singer", timings);
    let mut dets = Vec::new();
    for &s in sigmas {
        dets.push((flat_torus_log_det(s, levels, COUNT_PER_AREA)?.log_det, ray_singer_prediction(s)?));
    }
    let (d0, p0) = dets[0];
    let mut rows = Vec::new();
    for (s, &(d, p)) in sigmas.iter().zip(&dets).skip(1) {
        r.check(
            &format!("log det({}) - log det({})", fmt_c(*s), fmt_c(sigmas[0])),
            json!({"sigma": [s.re, s.im], "reference": [sigmas[0].re, sigmas[0].im], "levels": levels}),
            p - p0,
            d - d0,
            ErrorKind::Relative,
            tol,
        );
        rows.push(json!({"sigma": [s.re, s.im], "fem_difference": d - d0, "predicted_difference": p - p0}));
    }
    r.summary("differences", rows);
    Ok(r.finish())
}

fn fmt_c(z: Complex64) -> String {
    format!("{}{:+}i", z.re, z.im)
}

/// Constancy of exp(log det − ln predictor) over several metrics with equal
/// cone orders. `fem` supplies precomputed log dets (None = compute).
pub fn mt_suite(
    metrics: &[ConicalTorusMetric],
    fem: &[Option<f64>],
    levels: Option<usize>,
    tol: f64,
    timings: bool,
) -> Result<VerificationReport, CliError> {
    if metrics.is_empty() || metrics.len() != fem.len() {
        return Err(CliError::Usage("mt needs one FEM result per metric".into()));
    }
    let mut orders: Vec<f64> = metrics[0].divisor().iter().map(|d| d.b).collect();
    orders.sort_by(f64::total_cmp);
    for m in metrics {
        let mut o: Vec<f64> = m.divisor().iter().map(|d| d.b).collect();
        o.sort_by(f64::total_cmp);
        if o.len() != orders.len() || o.iter().zip(&orders).any(|(a, b)| (a - b).abs() > 1e-12) {
            return Err(CliError::Usage("all metrics must share the cone orders".into()));
        }
    }
    let mut r = ReportBuilder::new("mt", timings);
    let mut ratios = Vec::new();
    let mut rows = Vec::new();
    for (m, given) in metrics.iter().zip(fem) {
        let ld = match given {
            Some(v) => *v,
            None => metric_log_det(m, None, levels, None)?.0.log_det,
        };
        let pred = m.ln_mt_predictor()?;
        ratios.push(ld - pred);
        rows.push(json!({"metric": m.to_document(), "log_det": ld, "ln_predictor": pred, "ln_ratio": ld - pred}));
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo).exp() - 1.0;
    r.check(
        "det / predictor spread",
        json!({"orders": orders, "configurations": metrics.len()}),
        0.0,
        spread,
        ErrorKind::Absolute,
        tol,
    );
    r.summary("configurations", rows);
    r.summary("ln_constant", ratios.iter().sum::<f64>() / ratios.len() as f64);
    Ok(r.finish())
}

pub fn three_polyhedra_suite(
    triples: &[(ConicalTorusMetric, ConicalTorusMetric, ConicalTorusMetric)],
    tol: f64,
    timings: bool,
) -> Result<VerificationReport, CliError> {
    let mut r = ReportBuilder::new("three-polyhedra", timings);
    for (i, (l, m, n)) in triples.iter().enumerate() {
        let v = ln_three_polyhedra_product(l, m, n)?.exp();
        r.check(
            &format!("triple {i}"),
            json!({"l": l.to_document(), "m": m.to_document(), "n": n.to_document()}),
            1.0,
            v,
            ErrorKind::Absolute,
            tol,
        );
    }
    Ok(r.finish())
}

/// Random admissible metric with `points` divisor points on the torus σ.
pub fn random_metric<R: rand::Rng>(rng: &mut R, sigma: Complex64, points: usize) -> Result<ConicalTorusMetric, MetricError> {
    use crate::torusmetrics::DivisorPoint;
    loop {
        let mut bs: Vec<f64> = (0..points.saturating_sub(1)).map(|_| rng.random_range(-0.7..0.7)).collect();
        let last = -bs.iter().sum::<f64>();
        if last <= -0.9 {
            continue;
        }
        bs.push(last);
        let divisor = bs
            .iter()
            .map(|&b| DivisorPoint {
                u: rng.random(),
                v: rng.random(),
                b,
            })
            .collect();
        match ConicalTorusMetric::new(sigma, rng.random_range(0.5..2.0), divisor) {
            Err(MetricError::PointsTooClose { .. }) => continue,
            other => return other,
        }
    }
}

/// `count` random triples with pairwise disjoint divisors.
pub fn random_triples(
    seed: u64,
    count: usize,
) -> Result<Vec<(ConicalTorusMetric, ConicalTorusMetric, ConicalTorusMetric)>, CliError> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let sigma = Complex64::new(rng.random_range(-0.5..0.5), rng.random_range(0.6..2.5));
        let sizes = [rng.random_range(2..5), rng.random_range(2..5), rng.random_range(2..5)];
        let l = random_metric(&mut rng, sigma, sizes[0])?;
        let m = random_metric(&mut rng, sigma, sizes[1])?;
        let n = random_metric(&mut rng, sigma, sizes[2])?;
        let disjoint = |a: &ConicalTorusMetric, b: &ConicalTorusMetric| {
            a.points()
                .iter()
                .all(|p| b.points().iter().all(|q| lattice_distance(p - q, sigma) >= 1e-3))
        };
        if disjoint(&l, &m) && disjoint(&m, &n) && disjoint(&n, &l) {
            out.push((l, m, n));
        }
    }
    Ok(out)
}
