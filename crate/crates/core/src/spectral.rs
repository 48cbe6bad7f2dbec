//! P1 discretization of the Friedrichs Laplacian, spectra, heat traces and
//! zeta-regularized determinants.
//!
//! The Dirichlet form is conformally invariant, so a metric ρ|dz|² on a flat
//! chart only changes the mass matrix: K is always assembled on the flat
//! charts and M carries the density.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{smallest_eigenvalues, CsrMatrix, EigenOptions, LinalgError};
use crate::quadrature::{exp_integral_e1, SingularTriangleQuadrature, Singularity, EULER_GAMMA};
use crate::surface::{default_grading, MeshLevel, PolyhedralSurface, SurfaceError};

/// Minimum λ_{K−1}·t for a certified truncated heat trace.
pub const CERTIFIED_LAMBDA_T: f64 = 30.0;
/// Default split time T = DEFAULT_SPLIT / λ_{K−1}.
pub const DEFAULT_SPLIT: f64 = 35.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("density singularity of order {order} at {at:?} is not integrable")]
    DensityNotIntegrable { at: [f64; 2], order: f64 },
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),
    #[error("eigensolver breakdown: {0}")]
    SolverBreakdown(String),
    #[error("truncation uncertified: lambda_max * t = {lambda_t} < {required}")]
    TruncationUncertified { lambda_t: f64, required: f64 },
    #[error("Gauss-Bonnet violated: residual {residual:e}")]
    GaussBonnetViolation { residual: f64 },
    #[error("heat coefficients inconsistent with the spectrum: zeta(0) numeric {numeric} vs closed {closed} (error bar {error:e})")]
    InconsistentCoefficients { numeric: f64, closed: f64, error: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Mesh(#[from] SurfaceError),
}

impl From<LinalgError> for SpectralError {
    fn from(e: LinalgError) -> Self {
        SpectralError::SolverBreakdown(e.to_string())
    }
}

/// A conformal factor ρ on the flat charts of a mesh.
pub trait Density: Sync {
    fn ln_density(&self, z: [f64; 2]) -> f64;
    /// Points inside (or near) the box [lo, hi] where ρ ~ |z − at|^{2·order}.
    fn singularities(&self, lo: [f64; 2], hi: [f64; 2]) -> Vec<Singularity>;
}

/// ρ ≡ κ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDensity(pub f64);

impl Density for ConstantDensity {
    fn ln_density(&self, _: [f64; 2]) -> f64 {
        self.0.ln()
    }

    fn singularities(&self, _: [f64; 2], _: [f64; 2]) -> Vec<Singularity> {
        Vec::new()
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteOperatorPair {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    /// 1ᵀM1, the discrete area.
    pub area: f64,
    pub h: f64,
    pub level: usize,
}

impl DiscreteOperatorPair {
    pub fn n(&self) -> usize {
        self.stiffness.n()
    }
}

fn local_stiffness(c: &[[f64; 2]; 3]) -> [f64; 6] {
    let d = |i: usize| {
        let (a, b) = (c[(i + 1) % 3], c[(i + 2) % 3]);
        [b[0] - a[0], b[1] - a[1]]
    };
    let ds = [d(0), d(1), d(2)];
    let area2 = (ds[2][0] * ds[0][1] - ds[2][1] * ds[0][0]).abs();
    let k = |i: usize, j: usize| (ds[i][0] * ds[j][0] + ds[i][1] * ds[j][1]) / (2.0 * area2);
    [k(0, 0), k(1, 1), k(2, 2), k(0, 1), k(1, 2), k(0, 2)]
}

fn local_mass_exact(c: &[[f64; 2]; 3]) -> [f64; 6] {
    let area = 0.5 * ((c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1])).abs();
    let (d, o) = (area / 6.0, area / 12.0);
    [d, d, d, o, o, o]
}

fn bbox(c: &[[f64; 2]; 3]) -> ([f64; 2], [f64; 2]) {
    let mut lo = c[0];
    let mut hi = c[0];
    for p in &c[1..] {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

/// Assembles P1 stiffness and mass on a mesh; with a density the mass is
/// ∫ρ φᵢφⱼ by singularity-adapted quadrature.
pub fn assemble(mesh: &MeshLevel, density: Option<&dyn Density>) -> Result<DiscreteOperatorPair, SpectralError> {
    let tris = mesh.triangles();
    let n = mesh.vertex_count();
    let mut global_lo = [f64::INFINITY; 2];
    let mut global_hi = [f64::NEG_INFINITY; 2];
    for t in tris {
        let (lo, hi) = bbox(&t.coords);
        for k in 0..2 {
            global_lo[k] = global_lo[k].min(lo[k]);
            global_hi[k] = global_hi[k].max(hi[k]);
        }
    }
    let (sing, quad) = match density {
        Some(d) => {
            let sing = d.singularities(global_lo, global_hi);
            if let Some(s) = sing.iter().find(|s| !(s.order > -1.0)) {
                return Err(SpectralError::DensityNotIntegrable { at: s.at, order: s.order });
            }
            let quad = SingularTriangleQuadrature::new(6, 12, 16).with_orders(sing.iter().map(|s| s.order));
            (sing, Some(quad))
        }
        None => (Vec::new(), None),
    };
    let locals: Vec<([f64; 6], [f64; 6])> = tris
        .par_iter()
        .map(|t| {
            let c = &t.coords;
            let k = local_stiffness(c);
            let m = match (density, &quad) {
                (Some(d), Some(quad)) => density_mass(c, d, &sing, quad),
                _ => local_mass_exact(c),
            };
            (k, m)
        })
        .collect();
    let pairs = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)];
    let mut kt = Vec::with_capacity(9 * tris.len());
    let mut mt = Vec::with_capacity(9 * tris.len());
    for (t, (k, m)) in tris.iter().zip(&locals) {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(SpectralError::QuadratureFailure(format!("non-finite mass entry on triangle {:?}", t.coords)));
        }
        for (e, &(i, j)) in pairs.iter().enumerate() {
            let (vi, vj) = (t.vertices[i], t.vertices[j]);
            kt.push((vi, vj, k[e]));
            mt.push((vi, vj, m[e]));
            if i != j {
                kt.push((vj, vi, k[e]));
                mt.push((vj, vi, m[e]));
            }
        }
    }
    let stiffness = CsrMatrix::from_triplets(n, kt);
    let mass = CsrMatrix::from_triplets(n, mt);
    let ones = vec![1.0; n];
    let area = mass.quad(&ones, &ones);
    Ok(DiscreteOperatorPair {
        stiffness,
        mass,
        area,
        h: mesh.h(),
        level: mesh.level(),
    })
}

fn density_mass(c: &[[f64; 2]; 3], d: &dyn Density, sing: &[Singularity], quad: &SingularTriangleQuadrature) -> [f64; 6] {
    let (lo, hi) = bbox(c);
    let pad = 2.0 * ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt();
    let near: Vec<Singularity> = sing
        .iter()
        .filter(|s| s.at[0] > lo[0] - pad && s.at[0] < hi[0] + pad && s.at[1] > lo[1] - pad && s.at[1] < hi[1] + pad)
        .copied()
        .collect();
    let area2 = (c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]);
    let f = |x: [f64; 2]| {
        let l1 = ((x[0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (x[1] - c[0][1])) / area2;
        let l2 = ((c[1][0] - c[0][0]) * (x[1] - c[0][1]) - (x[0] - c[0][0]) * (c[1][1] - c[0][1])) / area2;
        let l0 = 1.0 - l1 - l2;
        let r = d.ln_density(x).exp();
        [r * l0 * l0, r * l1 * l1, r * l2 * l2, r * l0 * l1, r * l1 * l2, r * l0 * l2]
    };
    quad.integrate(*c, &near, &f)
}

/// Ascending eigenvalues with per-value error estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub errors: Vec<f64>,
    pub area: f64,
    pub vertex_count: usize,
    pub level: usize,
    pub h: f64,
    pub extrapolated: bool,
    pub certified: bool,
}

impl Spectrum {
    /// A spectrum given directly, e.g. from an exact formula.
    pub fn from_values(mut eigenvalues: Vec<f64>, area: f64) -> Result<Self, SpectralError> {
        if eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(SpectralError::InvalidArgument("non-finite eigenvalue".into()));
        }
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Self {
            errors: vec![0.0; eigenvalues.len()],
            eigenvalues,
            area,
            vertex_count: 0,
            level: 0,
            h: 0.0,
            extrapolated: false,
            certified: true,
        })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn largest(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Every eigenvalue divided by κ, as for the metric κ·m.
    pub fn rescaled(&self, kappa: f64) -> Self {
        let mut s = self.clone();
        s.eigenvalues.iter_mut().for_each(|x| *x /= kappa);
        s.errors.iter_mut().for_each(|x| *x /= kappa);
        s.area *= kappa;
        s
    }

    /// Eigenvalues as a CSV table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue,error_estimate\n");
        for (i, (l, e)) in self.eigenvalues.iter().zip(&self.errors).enumerate() {
            out.push_str(&format!("{i},{l:.17e},{e:.6e}\n"));
        }
        out
    }
}

/// Smallest `count` eigenvalues of the pair.
pub fn eigenvalues(pair: &DiscreteOperatorPair, count: usize) -> Result<Spectrum, SpectralError> {
    if count == 0 || count > pair.n() {
        return Err(SpectralError::InvalidArgument(format!(
            "cannot compute {count} eigenvalues of a {}-dof problem",
            pair.n()
        )));
    }
    let mut opts = EigenOptions::new(count);
    // shift near the bottom of the nonzero spectrum keeps K + τM well conditioned
    opts.shift = 1.0 / pair.area.max(1e-300);
    let res = smallest_eigenvalues(&pair.stiffness, &pair.mass, &opts)?;
    let mut values = res.values;
    let scale = values.last().copied().unwrap_or(1.0).abs().max(1.0);
    let errors: Vec<f64> = values
        .iter()
        .zip(&res.residuals)
        .map(|(l, r)| r * l.abs().max(1e-16 * scale))
        .collect();
    normalize_zero_mode(&mut values)?;
    Ok(Spectrum {
        eigenvalues: values,
        errors,
        area: pair.area,
        vertex_count: pair.n(),
        level: pair.level,
        h: pair.h,
        extrapolated: false,
        certified: res.certified,
    })
}

fn normalize_zero_mode(values: &mut [f64]) -> Result<(), SpectralError> {
    if values.iter().any(|x| !x.is_finite()) {
        return Err(SpectralError::SolverBreakdown("non-finite eigenvalue".into()));
    }
    if values.len() >= 2 {
        let l1 = values[1];
        if values[0].abs() > 1e-9 * l1 {
            return Err(SpectralError::SolverBreakdown(format!(
                "lowest eigenvalue {} is not a zero mode (next {l1})",
                values[0]
            )));
        }
        // the constant mode is exact; roundoff may leave a tiny signed residue
        values[0] = values[0].clamp(0.0, 1e-10 * l1);
    }
    Ok(())
}

/// Relative coarse/fine gap beyond which an eigenvalue is not in the
/// asymptotic O(h²) regime and extrapolation stops.
pub const RICHARDSON_MAX_GAP: f64 = 0.5;

/// (4λ_fine − λ_coarse)/3 with error |λ_fine − λ_coarse|/3, truncated at the
/// first eigenvalue the coarse mesh does not resolve.
pub fn richardson(coarse: &Spectrum, fine: &Spectrum) -> Result<Spectrum, SpectralError> {
    let mut k = coarse.len().min(fine.len());
    if let Some(bad) = (1..k).find(|&i| coarse.eigenvalues[i] > (1.0 + RICHARDSON_MAX_GAP) * fine.eigenvalues[i]) {
        k = bad;
    }
    let mut values: Vec<f64> = (0..k)
        .map(|i| (4.0 * fine.eigenvalues[i] - coarse.eigenvalues[i]) / 3.0)
        .collect();
    let mut errors: Vec<f64> = (0..k)
        .map(|i| (fine.eigenvalues[i] - coarse.eigenvalues[i]).abs() / 3.0 + fine.errors[i])
        .collect();
    // keep the list ascending; crossing pairs are reordered with their errors
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    values = order.iter().map(|&i| values[i]).collect();
    errors = order.iter().map(|&i| errors[i]).collect();
    normalize_zero_mode(&mut values)?;
    Ok(Spectrum {
        eigenvalues: values,
        errors,
        area: fine.area,
        vertex_count: fine.vertex_count,
        level: fine.level,
        h: fine.h,
        extrapolated: true,
        certified: coarse.certified && fine.certified,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumOptions {
    /// Refinement levels above the base triangulation.
    pub levels: usize,
    pub count: usize,
    /// Richardson over the two finest levels.
    pub extrapolate: bool,
}

impl SpectrumOptions {
    pub fn new(levels: usize, count: usize) -> Self {
        Self {
            levels,
            count,
            extrapolate: true,
        }
    }
}

/// Graded refinement hierarchy with `levels` refinements of the base mesh.
pub fn mesh_hierarchy(surface: &PolyhedralSurface, levels: usize) -> Result<Vec<MeshLevel>, SpectralError> {
    let grading = default_grading(surface);
    let mut out = vec![MeshLevel::base(surface)];
    for _ in 0..levels {
        let next = out.last().expect("non-empty").refine(&grading)?;
        out.push(next);
    }
    Ok(out)
}

/// Spectrum of a surface (optionally with a density on its charts).
pub fn surface_spectrum(
    surface: &PolyhedralSurface,
    density: Option<&dyn Density>,
    opts: &SpectrumOptions,
) -> Result<Spectrum, SpectralError> {
    let meshes = mesh_hierarchy(surface, opts.levels)?;
    let fine_mesh = meshes.last().expect("non-empty");
    let fine = eigenvalues(&assemble(fine_mesh, density)?, opts.count)?;
    if !opts.extrapolate || meshes.len() < 2 {
        return Ok(fine);
    }
    let coarse_mesh = &meshes[meshes.len() - 2];
    let count = opts.count.min(coarse_mesh.vertex_count());
    let coarse = eigenvalues(&assemble(coarse_mesh, density)?, count)?;
    richardson(&coarse, &fine)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatTrace {
    pub t: f64,
    pub value: f64,
    /// Bound on the omitted Σ_{k ≥ K} e^{−λ_k t} from Weyl's law.
    pub tail_bound: f64,
    /// Propagated eigenvalue error Σ t·δλ_k·e^{−λ_k t}.
    pub discretization_error: f64,
}

/// Weyl-law bound on Σ_{λ > Λ} e^{−λt} for area A, with a factor 2 margin.
fn heat_tail_bound(area: f64, lambda: f64, t: f64) -> f64 {
    2.0 * area / (4.0 * PI * t) * (-lambda * t).exp()
}

/// Σ_k e^{−λ_k t} including the zero mode.
pub fn heat_trace(spectrum: &Spectrum, t: f64) -> Result<HeatTrace, SpectralError> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(SpectralError::InvalidArgument(format!("heat time must be positive, got {t}")));
    }
    let lt = spectrum.largest() * t;
    if lt < CERTIFIED_LAMBDA_T {
        return Err(SpectralError::TruncationUncertified {
            lambda_t: lt,
            required: CERTIFIED_LAMBDA_T,
        });
    }
    let mut value = 0.0;
    let mut err = 0.0;
    // smallest terms first
    for (l, e) in spectrum.eigenvalues.iter().zip(&spectrum.errors).rev() {
        let w = (-l * t).exp();
        value += w;
        err += t * e * w;
    }
    Ok(HeatTrace {
        t,
        value,
        tail_bound: heat_tail_bound(spectrum.area, spectrum.largest(), t),
        discretization_error: err,
    })
}

/// Least-squares fit of Θ(t) ≈ a_{−1}/t + a₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatFit {
    pub a_minus1: f64,
    pub a0: f64,
    pub max_residual: f64,
}

/// Fits a₀ (and a_{−1} unless given) to the heat trace at the given times.
pub fn fit_heat_coefficients(spectrum: &Spectrum, times: &[f64], a_minus1: Option<f64>) -> Result<HeatFit, SpectralError> {
    if times.len() < 2 {
        return Err(SpectralError::InvalidArgument("need at least two heat times".into()));
    }
    let samples: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| heat_trace(spectrum, t).map(|h| (t, h.value)))
        .collect::<Result<_, _>>()?;
    let (am1, a0) = match a_minus1 {
        Some(a) => {
            let a0 = samples.iter().map(|(t, v)| v - a / t).sum::<f64>() / samples.len() as f64;
            (a, a0)
        }
        None => {
            // normal equations in the basis (1/t, 1)
            let (mut sxx, mut sx, mut sxy, mut sy) = (0.0, 0.0, 0.0, 0.0);
            let n = samples.len() as f64;
            for &(t, v) in &samples {
                let x = 1.0 / t;
                sxx += x * x;
                sx += x;
                sxy += x * v;
                sy += v;
            }
            let det = n * sxx - sx * sx;
            ((n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det)
        }
    };
    let max_residual = samples
        .iter()
        .map(|(t, v)| (v - am1 / t - a0).abs())
        .fold(0.0, f64::max);
    Ok(HeatFit {
        a_minus1: am1,
        a0,
        max_residual,
    })
}

fn gauss_bonnet_check(angles: &[f64], genus: usize) -> Result<f64, SpectralError> {
    if angles.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
        return Err(SpectralError::InvalidArgument("cone angles must be positive".into()));
    }
    let chi = 2.0 - 2.0 * genus as f64;
    let excess: f64 = angles.iter().map(|b| b - 2.0 * PI).sum();
    let residual = excess + 2.0 * PI * chi;
    let scale = 1.0 + angles.iter().sum::<f64>();
    if residual.abs() > 1e-10 * scale {
        return Err(SpectralError::GaussBonnetViolation { residual });
    }
    Ok(chi)
}

/// ζ(0) from the cone angles, computed two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaZero {
    pub value: f64,
    pub cross_check: f64,
}

pub fn zeta_zero(angles: &[f64], genus: usize) -> Result<ZetaZero, SpectralError> {
    let chi = gauss_bonnet_check(angles, genus)?;
    let tp = 2.0 * PI;
    let value = angles.iter().map(|b| tp / b - b / tp).sum::<f64>() / 12.0 - 1.0;
    let cross_check = (chi / 6.0 - 1.0) + angles.iter().map(|b| tp / b + b / tp - 2.0).sum::<f64>() / 12.0;
    Ok(ZetaZero { value, cross_check })
}

/// The exponent e in det Δ^{κm} = κ^e det Δ^m.
pub fn rescaling_exponent(angles: &[f64], genus: usize) -> Result<f64, SpectralError> {
    let chi = gauss_bonnet_check(angles, genus)?;
    let tp = 2.0 * PI;
    Ok(-(chi / 6.0 - 1.0) - angles.iter().map(|b| tp / b + b / tp - 2.0).sum::<f64>() / 12.0)
}

/// Small-time heat coefficients Θ(t) ~ a_{−1}/t + a_{−1/2}/√t + a₀.
///
/// Closed flat surfaces have a_{−1/2} = 0; the term exists for synthetic
/// spectra such as λ_k = k².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatCoefficients {
    pub a_minus1: f64,
    pub a_minus_half: f64,
    pub a_0: f64,
}

impl HeatCoefficients {
    pub fn from_cones(area: f64, angles: &[f64], genus: usize) -> Result<Self, SpectralError> {
        let z = zeta_zero(angles, genus)?;
        Ok(Self {
            a_minus1: area / (4.0 * PI),
            a_minus_half: 0.0,
            a_0: z.value + 1.0,
        })
    }

    pub fn for_surface(surface: &PolyhedralSurface) -> Result<Self, SpectralError> {
        let angles: Vec<f64> = surface.cone_points().iter().map(|c| c.angle).collect();
        Self::from_cones(surface.area(), &angles, surface.genus())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaDetResult {
    pub zeta0_numeric: f64,
    pub zeta0_error: f64,
    pub zeta0_closed: f64,
    pub zeta_prime0: f64,
    pub log_det: f64,
    pub split_time: f64,
    pub lambda_k_t: f64,
    pub tail_bound: f64,
    pub eigenvalue_count: usize,
}

/// −ζ′(0) by splitting the Mellin integral at T:
/// ζ′(0) = (γ + ln T)(a₀ − 1) − a_{−1}/T − 2a_{−1/2}/√T + Σ_{λ>0} E₁(λT).
pub fn log_det(spectrum: &Spectrum, coeffs: &HeatCoefficients, split: Option<f64>) -> Result<ZetaDetResult, SpectralError> {
    if spectrum.len() < 2 {
        return Err(SpectralError::InvalidArgument("spectrum needs a nonzero eigenvalue".into()));
    }
    let lmax = spectrum.largest();
    let t = split.unwrap_or(DEFAULT_SPLIT / lmax);
    if !(t > 0.0) || !t.is_finite() {
        return Err(SpectralError::InvalidArgument(format!("split time must be positive, got {t}")));
    }
    let lt = lmax * t;
    if lt < CERTIFIED_LAMBDA_T {
        return Err(SpectralError::TruncationUncertified {
            lambda_t: lt,
            required: CERTIFIED_LAMBDA_T,
        });
    }
    let positive = &spectrum.eigenvalues[1..];
    let errors = &spectrum.errors[1..];
    let mut e1_sum = 0.0;
    let mut theta = 0.0;
    let mut theta_err = 0.0;
    for (l, e) in positive.iter().zip(errors).rev() {
        e1_sum += exp_integral_e1(l * t);
        let w = (-l * t).exp();
        theta += w;
        theta_err += t * e * w;
    }
    let a0m1 = coeffs.a_0 - 1.0;
    let zeta_prime0 = (EULER_GAMMA + t.ln()) * a0m1 - coeffs.a_minus1 / t - 2.0 * coeffs.a_minus_half / t.sqrt() + e1_sum;
    // Weyl bound on Σ_{λ>Λ} E₁(λT) ≤ 2·a_{−1}/T·e^{−ΛT}/(ΛT)
    let tail_bound = 2.0 * coeffs.a_minus1 / t * (-lt).exp() / lt;
    let theta_tail = heat_tail_bound(4.0 * PI * coeffs.a_minus1, lmax, t);
    let zeta0_numeric = theta - coeffs.a_minus1 / t - coeffs.a_minus_half / t.sqrt();
    let zeta0_error = theta_err + theta_tail;
    let diff = (zeta0_numeric - a0m1).abs();
    if diff > (10.0 * zeta0_error).max(0.05) {
        return Err(SpectralError::InconsistentCoefficients {
            numeric: zeta0_numeric,
            closed: a0m1,
            error: zeta0_error,
        });
    }
    Ok(ZetaDetResult {
        zeta0_numeric,
        zeta0_error,
        zeta0_closed: a0m1,
        zeta_prime0,
        log_det: -zeta_prime0,
        split_time: t,
        lambda_k_t: lt,
        tail_bound,
        eigenvalue_count: spectrum.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Counting {
    pub count: usize,
    /// N(λ)/λ.
    pub slope: f64,
    /// Area/4π.
    pub weyl_slope: f64,
}

/// N(λ) = #{0 < λ_k ≤ λ}; the zero mode is excluded.
pub fn counting_function(spectrum: &Spectrum, lambda: f64) -> Counting {
    let count = spectrum.eigenvalues.iter().skip(1).filter(|&&l| l <= lambda).count();
    Counting {
        count,
        slope: if lambda > 0.0 { count as f64 / lambda } else { 0.0 },
        weyl_slope: spectrum.area / (4.0 * PI),
    }
}

/// (N(hi) − N(lo))/(hi − lo).
pub fn weyl_slope(spectrum: &Spectrum, lo: f64, hi: f64) -> Result<f64, SpectralError> {
    if !(hi > lo) {
        return Err(SpectralError::InvalidArgument(format!("empty window [{lo}, {hi}]")));
    }
    if hi >= spectrum.largest() {
        return Err(SpectralError::TruncationUncertified {
            lambda_t: spectrum.largest() / hi,
            required: 1.0,
        });
    }
    let n = |x: f64| counting_function(spectrum, x).count as f64;
    Ok((n(hi) - n(lo)) / (hi - lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_flat_torus, load_surface_file};
    use num_complex::Complex64;
    use std::path::Path;

    fn fixture(name: &str) -> PolyhedralSurface {
        load_surface_file(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)).unwrap()
    }

    fn torus_lattice_spectrum(sigma: Complex64, lmax: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let r = ((lmax.sqrt() / (2.0 * PI)) * (1.0 + 2.0 * sigma.norm())).ceil() as i64 + 1;
        for m in -r..=r {
            for n in -r..=r {
                // dual lattice vector for periods 1, σ
                let w = Complex64::new(0.0, 1.0) * (m as f64 * sigma - n as f64) / sigma.im;
                let l = 4.0 * PI * PI * w.norm_sqr();
                if l <= lmax {
                    out.push(l);
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    #[test]
    fn assembly_invariants() {
        for name in ["torus_i.json", "pillowcase.json", "lshape.json", "cube.json"] {
            let s = fixture(name);
            let mesh = mesh_hierarchy(&s, 2).unwrap().pop().unwrap();
            let p = assemble(&mesh, None).unwrap();
            let k1 = p.stiffness.apply(&vec![1.0; p.n()]);
            assert!(k1.iter().all(|x| x.abs() < 1e-12), "{name}");
            assert!(p.stiffness.is_symmetric(1e-14));
            assert!((p.area - s.area()).abs() < 1e-12 * s.area().max(1.0), "{name}: {} vs {}", p.area, s.area());
            let q = assemble(&mesh, Some(&ConstantDensity(2.5))).unwrap();
            assert!((q.area - 2.5 * p.area).abs() < 1e-12);
            assert_eq!(q.stiffness, p.stiffness);
        }
        assert!((assemble(&MeshLevel::base(&fixture("pillowcase.json")), None).unwrap().area - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonintegrable_density() {
        struct Bad;
        impl Density for Bad {
            fn ln_density(&self, _: [f64; 2]) -> f64 {
                0.0
            }
            fn singularities(&self, _: [f64; 2], _: [f64; 2]) -> Vec<Singularity> {
                vec![Singularity { at: [0.5, 0.5], order: -1.0 }]
            }
        }
        let mesh = MeshLevel::base(&fixture("torus_i.json"));
        assert!(matches!(assemble(&mesh, Some(&Bad)), Err(SpectralError::DensityNotIntegrable { .. })));
    }

    #[test]
    fn unit_torus_first_eigenvalues() {
        let s = build_flat_torus(Complex64::new(0.0, 1.0), 4).unwrap();
        let spec = surface_spectrum(&s, None, &SpectrumOptions::new(3, 12)).unwrap();
        let target = 4.0 * PI * PI;
        assert!(spec.eigenvalues[0] <= 1e-10 * spec.eigenvalues[1]);
        for k in 1..5 {
            assert!((spec.eigenvalues[k] / target - 1.0).abs() < 5e-3, "{}", spec.eigenvalues[k]);
        }
        assert_eq!(counting_function(&spec, 50.0).count, 4);
        assert_eq!(counting_function(&spec, 30.0).count, 0);
    }

    #[test]
    fn mass_scaling_divides_eigenvalues() {
        let mesh = mesh_hierarchy(&fixture("pillowcase.json"), 2).unwrap().pop().unwrap();
        let p = assemble(&mesh, None).unwrap();
        let mut q = p.clone();
        q.mass = p.mass.scale(2.0);
        let (a, b) = (eigenvalues(&p, 10).unwrap(), eigenvalues(&q, 10).unwrap());
        for k in 1..10 {
            assert!((a.eigenvalues[k] / b.eigenvalues[k] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn refinement_is_monotone() {
        for name in ["torus_i.json", "pillowcase.json", "lshape.json"] {
            let meshes = mesh_hierarchy(&fixture(name), 4).unwrap();
            let specs: Vec<Spectrum> = meshes[2..]
                .iter()
                .map(|m| eigenvalues(&assemble(m, None).unwrap(), 8).unwrap())
                .collect();
            for w in specs.windows(2) {
                for k in 1..8 {
                    assert!(w[1].eigenvalues[k] <= w[0].eigenvalues[k] * (1.0 + 1e-10), "{name} k={k}");
                }
            }
        }
    }

    #[test]
    fn zeta_zero_examples() {
        let z = zeta_zero(&[], 1).unwrap();
        assert_eq!(z.value, -1.0);
        let z = zeta_zero(&[PI; 4], 0).unwrap();
        assert!((z.value + 0.5).abs() < 1e-15 && (z.cross_check + 0.5).abs() < 1e-15);
        let z = zeta_zero(&[6.0 * PI], 2).unwrap();
        assert!((z.value + 11.0 / 9.0).abs() < 1e-14 && (z.value - z.cross_check).abs() < 1e-14);
        assert!((rescaling_exponent(&[PI; 4], 0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(rescaling_exponent(&[], 1).unwrap(), 1.0);
        assert!(matches!(zeta_zero(&[PI; 3], 0), Err(SpectralError::GaussBonnetViolation { .. })));
    }

    #[test]
    fn heat_trace_matches_lattice_sum() {
        let sigma = Complex64::new(0.0, 1.0);
        let exact = Spectrum::from_values(torus_lattice_spectrum(sigma, 4000.0), 1.0).unwrap();
        let t = 0.05;
        let h = heat_trace(&exact, t).unwrap();
        let oracle: f64 = (-40..=40)
            .flat_map(|m: i64| (-40..=40).map(move |n: i64| (-4.0 * PI * PI * ((m * m + n * n) as f64) * t).exp()))
            .sum();
        assert!((h.value - oracle).abs() <= h.tail_bound + 1e-14);
        assert!(h.tail_bound < 1e-10);
        let late = Spectrum::from_values(torus_lattice_spectrum(sigma, 4000.0), 1.0).unwrap();
        assert!((heat_trace(&late, 10.0).unwrap().value - 1.0).abs() < 1e-12);
        assert!(matches!(heat_trace(&exact, 1e-3), Err(SpectralError::TruncationUncertified { .. })));
    }

    #[test]
    fn synthetic_square_spectrum_gives_log_two_pi() {
        let mut values = vec![0.0];
        values.extend((1..=400).map(|k| (k * k) as f64));
        let spec = Spectrum::from_values(values, 0.0).unwrap();
        let coeffs = HeatCoefficients {
            a_minus1: 0.0,
            a_minus_half: PI.sqrt() / 2.0,
            a_0: 0.5,
        };
        let r = log_det(&spec, &coeffs, None).unwrap();
        assert!((r.log_det - (2.0 * PI).ln()).abs() < 1e-6, "{}", r.log_det);
        assert!((r.zeta0_numeric + 0.5).abs() < 1e-6);
    }

    #[test]
    fn exact_torus_determinants() {
        use crate::specialfn::{ln_abs_eta, Modulus};
        let det = |sigma: Complex64, kappa: f64| {
            let spec = Spectrum::from_values(torus_lattice_spectrum(sigma, 8000.0), sigma.im).unwrap().rescaled(kappa);
            let c = HeatCoefficients::from_cones(sigma.im * kappa, &[], 1).unwrap();
            log_det(&spec, &c, Some(0.005 * kappa)).unwrap().log_det
        };
        let (i, two_i) = (Complex64::new(0.0, 1.0), Complex64::new(0.0, 2.0));
        let ratio = det(two_i, 1.0) - det(i, 1.0);
        let eta = |s| ln_abs_eta(&Modulus::new(s).unwrap());
        let predicted = 2.0 * (2.0f64).ln() + 4.0 * (eta(two_i) - eta(i));
        assert!((ratio - predicted).abs() < 1e-8, "{ratio} vs {predicted}");
        assert!((ratio - 0.5 * (2.0f64).ln()).abs() < 1e-8);
        assert!((det(i, 2.0) - det(i, 1.0) - (2.0f64).ln()).abs() < 1e-8);
    }

    #[test]
    fn weyl_slope_on_lattice() {
        let spec = Spectrum::from_values(torus_lattice_spectrum(Complex64::new(0.0, 1.0), 2000.0), 1.0).unwrap();
        let s = weyl_slope(&spec, 200.0, 800.0).unwrap();
        assert!((s * 4.0 * PI - 1.0).abs() < 0.05, "{s}");
        assert_eq!(counting_function(&spec, 50.0).count, 4);
    }
}
