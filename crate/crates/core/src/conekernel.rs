//! Heat kernel of the Friedrichs Laplacian on the infinite flat cone C_β.
//!
//! The kernel is evaluated from Carslaw's contour representation
//!
//! ```text
//! H_β = 1/(8πβ i t) · e^{−(r²+ρ²)/4t} ∫_{A_θ} e^{rρ cos(α−θ)/2t} cot(π(α−ψ)/β) dα
//! ```
//!
//! by pushing the contour onto the two vertical lines Re(α−θ) = ±a. Every
//! pole of the cotangent crossed on the way contributes a Gaussian image
//! (1/4πt)·exp(−|x − y_k|²/4t); what is left is a pair of line integrals whose
//! integrand decays like exp(−rρ|cos a|·cosh v / 2t). The default line
//! position is a = π; when a pole sits on (or too close to) that line the
//! contour is moved inward to a ∈ (π/2, π), which changes nothing but the
//! split between image and line contributions.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::quadrature::{adaptive_gauss, QuadratureError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error("time must be positive, got {0}")]
    NonpositiveTime(f64),
    #[error("cone angle must be positive, got {0}")]
    NonpositiveAngle(f64),
    #[error("image pole at angular offset {offset} lies on the integration line (|offset| = π within {tol:e})")]
    BoundaryPole { offset: f64, tol: f64 },
    #[error("time {t} too large for radius {radius}: need t <= radius^2/20")]
    TimeTooLarge { t: f64, radius: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// How the line integrals are placed when an image pole falls on Re(α−θ) = ±π.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContourMode {
    /// Refuse with [`ConeError::BoundaryPole`].
    Strict,
    /// Move both lines inward so that every pole is well separated from them.
    #[default]
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeParams {
    pub beta: f64,
    /// Gauss–Legendre nodes per panel of the line integrals (≥ 16).
    pub nodes: usize,
    pub image_tol: f64,
    pub contour: ContourMode,
    /// Absolute tolerance for the line integral, in units of the Gaussian scale 1/4πt.
    pub line_tol: f64,
}

impl ConeParams {
    pub fn new(beta: f64) -> Result<Self, ConeError> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(ConeError::NonpositiveAngle(beta));
        }
        Ok(Self {
            beta,
            nodes: 16,
            image_tol: 1e-9,
            contour: ContourMode::Shifted,
            line_tol: 1e-13,
        })
    }

    pub fn strict(mut self) -> Self {
        self.contour = ContourMode::Strict;
        self
    }
}

/// Gaussian heat kernel of the plane, (1/4πt)·exp(−|x−y|²/4t).
pub fn heat_kernel_plane(x: [f64; 2], y: [f64; 2], t: f64) -> Result<f64, ConeError> {
    if !(t > 0.0) {
        return Err(ConeError::NonpositiveTime(t));
    }
    let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
    Ok((-d2 / (4.0 * t)).exp() / (4.0 * PI * t))
}

/// Image and line contributions of the kernel at one pair of points.
#[derive(Debug, Clone, Copy)]
pub struct KernelParts {
    /// Sum of Gaussian images, excluding the direct term when requested.
    pub images: f64,
    pub line: f64,
    /// Number of image terms that were summed.
    pub image_count: usize,
    /// Line position a actually used.
    pub line_position: f64,
}

fn cot(w: Complex64) -> Complex64 {
    // cot(x+iy) = (sin 2x − i sinh 2y)/(cosh 2y − cos 2x), in overflow-safe form
    let (x2, y2) = (2.0 * w.re, 2.0 * w.im);
    if y2.abs() > 40.0 {
        let ch = y2.abs().exp() * 0.5;
        Complex64::new(x2.sin() / ch, -y2.signum()) / Complex64::new(1.0 - x2.cos() / ch, 0.0)
    } else {
        let den = y2.cosh() - x2.cos();
        Complex64::new(x2.sin() / den, -y2.sinh() / den)
    }
}

/// Offsets (α_pole − θ) of the cotangent poles, α_pole = ψ + jβ.
fn pole_offsets(beta: f64, d: f64, half_width: f64) -> impl Iterator<Item = f64> {
    let jmin = ((-half_width - d) / beta).floor() as i64 - 1;
    let jmax = ((half_width - d) / beta).ceil() as i64 + 1;
    (jmin..=jmax).map(move |j| d + j as f64 * beta)
}

fn min_pole_distance(beta: f64, d: f64, a: f64) -> f64 {
    pole_offsets(beta, d, a + beta)
        .map(|o| (o.abs() - a).abs())
        .fold(f64::INFINITY, f64::min)
}

fn choose_line(params: &ConeParams, d: f64) -> Result<f64, ConeError> {
    let beta = params.beta;
    let dist = min_pole_distance(beta, d, PI);
    match params.contour {
        ContourMode::Strict => {
            if dist <= params.image_tol {
                let offset = pole_offsets(beta, d, PI + beta)
                    .min_by(|p, q| (p.abs() - PI).abs().total_cmp(&(q.abs() - PI).abs()))
                    .unwrap_or(PI);
                return Err(ConeError::BoundaryPole {
                    offset,
                    tol: params.image_tol,
                });
            }
            Ok(PI)
        }
        ContourMode::Shifted => {
            let wanted = (0.25 * beta).min(0.1 * PI);
            if dist >= wanted {
                return Ok(PI);
            }
            let mut best = (PI, dist);
            for k in 1..=40 {
                let a = PI - 0.4 * PI * k as f64 / 40.0;
                let dd = min_pole_distance(beta, d, a);
                if dd > best.1 + 1e-12 {
                    best = (a, dd);
                }
                if dd >= wanted {
                    break;
                }
            }
            Ok(best.0)
        }
    }
}

/// Evaluates the contour representation split into images and the line part.
/// With `skip_direct`, the image at zero angular offset (the free-space term)
/// is left out; this is what the trace defect needs on the diagonal.
pub fn kernel_parts(
    params: &ConeParams,
    r: f64,
    theta: f64,
    rho: f64,
    psi: f64,
    t: f64,
    skip_direct: bool,
) -> Result<KernelParts, ConeError> {
    if !(t > 0.0) {
        return Err(ConeError::NonpositiveTime(t));
    }
    if !(r >= 0.0) || !(rho >= 0.0) {
        return Err(ConeError::InvalidArgument(format!("radii must be nonnegative: r={r}, rho={rho}")));
    }
    let beta = params.beta;
    // reduce ψ − θ to [−β/2, β/2)
    let d = (psi - theta + 0.5 * beta).rem_euclid(beta) - 0.5 * beta;
    let a = choose_line(params, d)?;

    let four_t = 4.0 * t;
    let mut images = 0.0;
    let mut image_count = 0;
    for off in pole_offsets(beta, d, a) {
        if off.abs() >= a {
            continue;
        }
        if skip_direct && off.abs() < 1e-15 {
            continue;
        }
        let d2 = r * r + rho * rho - 2.0 * r * rho * off.cos();
        images += (-d2.max(0.0) / four_t).exp() / (PI * four_t);
        image_count += 1;
    }

    let line = line_integral(params, r, rho, d, a, t)?;
    Ok(KernelParts {
        images,
        line,
        image_count,
        line_position: a,
    })
}

/// (1/4πβt)·Re ∫_0^∞ [E(−a,v) cot(π(−d−a+iv)/β) − E(a,v) cot(π(−d+a+iv)/β)] dv
/// with E(s,v) = exp(−(r²+ρ²−2rρ cos(s+iv))/4t) and d = ψ − θ.
fn line_integral(params: &ConeParams, r: f64, rho: f64, d: f64, a: f64, t: f64) -> Result<f64, ConeError> {
    let beta = params.beta;
    let k = PI / beta;
    let phi = -d; // θ − ψ
    let lead = r * r + rho * rho;
    let rr = r * rho;
    let (sa, ca) = a.sin_cos();
    let integrand = |v: f64| -> f64 {
        let (sh, ch) = (v.sinh(), v.cosh());
        // cos(±a + iv) = cos a cosh v ∓ i sin a sinh v
        let base = (-lead + 2.0 * rr * ca * ch) / (4.0 * t);
        let im_part = 2.0 * rr * sa * sh / (4.0 * t);
        let e_minus = Complex64::from_polar(base.exp(), im_part); // s = −a: −i sin(−a) sinh = +i sa sh
        let e_plus = Complex64::from_polar(base.exp(), -im_part);
        let c_minus = cot(Complex64::new(k * (phi - a), k * v));
        let c_plus = cot(Complex64::new(k * (phi + a), k * v));
        (e_minus * c_minus - e_plus * c_plus).re
    };
    // truncation: exponential decay from the Gaussian factor or from the
    // cotangent difference, whichever is reached first
    let v_gauss = if rr * ca.abs() > 0.0 {
        (1.0 + 80.0 * t / (rr * ca.abs())).acosh() + 5.0
    } else {
        f64::INFINITY
    };
    let v_cot = 40.0 / (2.0 * k) + 1.0;
    let v_max = v_gauss.min(v_cot);
    let scale = 1.0 / (4.0 * PI * beta * t);
    let tol = params.line_tol / (4.0 * PI * t) / scale;
    let depth = 40;
    // split near v = 0 where poles close to the line produce narrow peaks
    let mut total = 0.0;
    let panels = (params.nodes / 4).max(4);
    let h = v_max / panels as f64;
    for p in 0..panels {
        let (lo, hi) = (p as f64 * h, (p + 1) as f64 * h);
        let (v, _) = adaptive_gauss(&integrand, lo, hi, tol / panels as f64, depth)?;
        total += v;
    }
    Ok(scale * total)
}

/// Heat kernel H_β(r, θ; ρ, ψ; t) of the Friedrichs Laplacian on C_β.
pub fn heat_kernel_cone(params: &ConeParams, r: f64, theta: f64, rho: f64, psi: f64, t: f64) -> Result<f64, ConeError> {
    let parts = kernel_parts(params, r, theta, rho, psi, t, false)?;
    Ok(parts.images + parts.line)
}

/// ∫_{C_β(R)} (H_β(x, x; t) − 1/4πt) dx by radial quadrature of the diagonal
/// contour representation.
pub fn trace_defect_numeric(params: &ConeParams, radius: f64, t: f64) -> Result<f64, ConeError> {
    if !(t > 0.0) {
        return Err(ConeError::NonpositiveTime(t));
    }
    if !(radius > 0.0) {
        return Err(ConeError::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    if t > radius * radius / 20.0 {
        return Err(ConeError::TimeTooLarge { t, radius });
    }
    let beta = params.beta;
    let err = std::cell::Cell::new(None);
    let f = |r: f64| -> f64 {
        match kernel_parts(params, r, 0.0, r, 0.0, t, true) {
            Ok(p) => beta * r * (p.images + p.line),
            Err(e) => {
                err.set(Some(e));
                0.0
            }
        }
    };
    // the excess is concentrated within a few √t of the tip
    let knee = (12.0 * t.sqrt()).min(radius);
    let (inner, _) = adaptive_gauss(&f, 0.0, knee, 1e-12, 30)?;
    let outer = if knee < radius {
        adaptive_gauss(&f, knee, radius, 1e-12, 30)?.0
    } else {
        0.0
    };
    if let Some(e) = err.take() {
        return Err(e);
    }
    Ok(inner + outer)
}

/// (1/12)(2π/β − β/2π), the constant term contributed by one cone tip.
pub fn trace_defect_closed(beta: f64) -> Result<f64, ConeError> {
    if !(beta > 0.0) {
        return Err(ConeError::NonpositiveAngle(beta));
    }
    Ok((2.0 * PI / beta - beta / (2.0 * PI)) / 12.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarmonicSign {
    Plus,
    Minus,
}

/// Formal harmonic V±^k on C_β: r^{±2πk/β} e^{2πikθ/β}, with V₊⁰ = 1 and V₋⁰ = ln r.
pub fn cone_harmonic(beta: f64, k: u32, sign: HarmonicSign, r: f64, theta: f64) -> Result<Complex64, ConeError> {
    if !(beta > 0.0) {
        return Err(ConeError::NonpositiveAngle(beta));
    }
    if r < 0.0 || (sign == HarmonicSign::Minus && r == 0.0) {
        return Err(ConeError::InvalidArgument(format!("radius {r} not admissible")));
    }
    if k == 0 {
        return Ok(match sign {
            HarmonicSign::Plus => Complex64::new(1.0, 0.0),
            HarmonicSign::Minus => Complex64::new(r.ln(), 0.0),
        });
    }
    let nu = 2.0 * PI * k as f64 / beta;
    let modulus = match sign {
        HarmonicSign::Plus => r.powf(nu),
        HarmonicSign::Minus => r.powf(-nu),
    };
    Ok(Complex64::from_polar(modulus, nu * theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn polar(r: f64, th: f64) -> [f64; 2] {
        [r * th.cos(), r * th.sin()]
    }

    #[test]
    fn plane_kernel_values() {
        let v = heat_kernel_plane([0.3, 0.1], [0.3, 0.1], 1.0).unwrap();
        assert!((v - 1.0 / (4.0 * PI)).abs() < 1e-16);
        assert!((v - 0.079_577_471_545_947_67).abs() < 1e-15);
        let v = heat_kernel_plane([0.0, 0.0], [2.0, 0.0], 1.0).unwrap();
        assert!((v - (-1.0f64).exp() / (4.0 * PI)).abs() < 1e-16);
        assert!(matches!(heat_kernel_plane([0.0; 2], [0.0; 2], 0.0), Err(ConeError::NonpositiveTime(_))));
    }

    #[test]
    fn full_angle_reduces_to_plane() {
        let p = ConeParams::new(2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (r, th) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0 * PI));
            let (rho, ps) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0 * PI));
            let t = rng.random_range(0.05..1.0);
            let h = heat_kernel_cone(&p, r, th, rho, ps, t).unwrap();
            let g = heat_kernel_plane(polar(r, th), polar(rho, ps), t).unwrap();
            assert!((h - g).abs() < 1e-10, "{h} vs {g}");
        }
    }

    #[test]
    fn half_angle_is_two_images() {
        let p = ConeParams::new(PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let (r, th) = (rng.random_range(0.0..2.0), rng.random_range(0.0..PI));
            let (rho, ps) = (rng.random_range(0.0..2.0), rng.random_range(0.0..PI));
            let t = rng.random_range(0.05..1.0);
            let h = heat_kernel_cone(&p, r, th, rho, ps, t).unwrap();
            let y = polar(rho, ps);
            let oracle = heat_kernel_plane(polar(r, th), y, t).unwrap()
                + heat_kernel_plane(polar(r, th), [-y[0], -y[1]], t).unwrap();
            assert!((h - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn rational_angles_have_no_line_part() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=4u32 {
            let beta = 2.0 * PI / n as f64;
            // lines pinned at ±π, where the cotangent is 2π-periodic
            let p = ConeParams::new(beta).unwrap().strict();
            for _ in 0..20 {
                let (r, th) = (rng.random_range(0.1..1.5), rng.random_range(0.0..beta));
                let (rho, ps) = (rng.random_range(0.1..1.5), rng.random_range(0.0..beta));
                let t = rng.random_range(0.05..0.5);
                let parts = kernel_parts(&p, r, th, rho, ps, t, false).unwrap();
                assert!(parts.line.abs() < 1e-12, "n={n} line={}", parts.line);
                // direct image sum over the cyclic group
                let x = polar(r, th);
                let oracle: f64 = (0..n)
                    .map(|k| heat_kernel_plane(x, polar(rho, ps + k as f64 * beta), t).unwrap())
                    .sum();
                assert!((parts.images + parts.line - oracle).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn strict_mode_reports_boundary_pole() {
        let p = ConeParams::new(PI).unwrap().strict();
        let e = heat_kernel_cone(&p, 0.5, 0.0, 0.5, 0.0, 0.1).unwrap_err();
        assert!(matches!(e, ConeError::BoundaryPole { .. }));
        // shifted mode evaluates the same point
        let q = ConeParams::new(PI).unwrap();
        let h = heat_kernel_cone(&q, 0.5, 0.0, 0.5, 0.0, 0.1).unwrap();
        let oracle = heat_kernel_plane([0.5, 0.0], [0.5, 0.0], 0.1).unwrap()
            + heat_kernel_plane([0.5, 0.0], [-0.5, 0.0], 0.1).unwrap();
        assert!((h - oracle).abs() < 1e-12);
    }

    #[test]
    fn symmetric_positive_periodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for beta in [PI / 2.0, PI, 1.5 * PI, 2.0 * PI, 3.0 * PI, 4.0 * PI, 6.0 * PI] {
            let p = ConeParams::new(beta).unwrap();
            for _ in 0..10 {
                let (r, th) = (rng.random_range(0.0..1.5), rng.random_range(0.0..beta));
                let (rho, ps) = (rng.random_range(0.0..1.5), rng.random_range(0.0..beta));
                let t = rng.random_range(0.05..0.5);
                let h1 = heat_kernel_cone(&p, r, th, rho, ps, t).unwrap();
                let h2 = heat_kernel_cone(&p, rho, ps, r, th, t).unwrap();
                let h3 = heat_kernel_cone(&p, r, th + beta, rho, ps, t).unwrap();
                let scale = 1.0 / (4.0 * PI * t);
                assert!(h1 > 0.0, "beta={beta}");
                assert!((h1 - h2).abs() < 1e-12 * scale, "beta={beta}: {h1} {h2}");
                assert!((h1 - h3).abs() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn closed_defect_values() {
        assert!(trace_defect_closed(2.0 * PI).unwrap().abs() < 1e-16);
        assert!((trace_defect_closed(1.5 * PI).unwrap() - 7.0 / 144.0).abs() < 1e-15);
        assert!((trace_defect_closed(6.0 * PI).unwrap() + 2.0 / 9.0).abs() < 1e-15);
        assert!((trace_defect_closed(4.0 * PI).unwrap() + 1.0 / 8.0).abs() < 1e-15);
        assert!((trace_defect_closed(PI).unwrap() - 1.0 / 8.0).abs() < 1e-15);
        assert!(trace_defect_closed(0.0).is_err());
    }

    #[test]
    fn numeric_defect_matches_closed_form() {
        for beta in [PI, 4.0 * PI, 2.0 * PI] {
            let p = ConeParams::new(beta).unwrap();
            let num = trace_defect_numeric(&p, 1.0, 0.01).unwrap();
            let closed = trace_defect_closed(beta).unwrap();
            assert!((num - closed).abs() < 1e-6, "beta={beta}: {num} vs {closed}");
        }
        let p = ConeParams::new(PI).unwrap();
        assert!(matches!(trace_defect_numeric(&p, 1.0, 0.1), Err(ConeError::TimeTooLarge { .. })));
    }

    #[test]
    fn harmonics() {
        let beta = 3.0 * PI;
        let v = cone_harmonic(beta, 0, HarmonicSign::Plus, 0.7, 1.1).unwrap();
        assert_eq!(v, Complex64::new(1.0, 0.0));
        let v = cone_harmonic(beta, 0, HarmonicSign::Minus, std::f64::consts::E, 0.3).unwrap();
        assert!((v.re - 1.0).abs() < 1e-15);
        assert!(cone_harmonic(beta, 1, HarmonicSign::Minus, 0.0, 0.3).is_err());

        // five-point Laplacian of Re V₊¹ in polar form: u_rr + u_r/r + u_θθ/r²
        let u = |r: f64, th: f64| cone_harmonic(beta, 1, HarmonicSign::Plus, r, th).unwrap().re;
        let (r0, th0) = (0.8, 0.9);
        let mut prev = f64::INFINITY;
        for h in [1e-2, 5e-3, 2.5e-3] {
            let urr = (u(r0 + h, th0) - 2.0 * u(r0, th0) + u(r0 - h, th0)) / (h * h);
            let ur = (u(r0 + h, th0) - u(r0 - h, th0)) / (2.0 * h);
            let utt = (u(r0, th0 + h) - 2.0 * u(r0, th0) + u(r0, th0 - h)) / (h * h);
            let lap = urr + ur / r0 + utt / (r0 * r0);
            assert!(lap.abs() < 10.0 * h * h, "h={h}: {lap}");
            assert!(lap.abs() < prev);
            prev = lap.abs();
        }
    }
}
