//! Dedekind eta and Jacobi theta-1 on the upper half plane.
//!
//! Both evaluators first move the modulus into the standard fundamental
//! domain (|Re σ| ≤ 1/2, |σ| ≥ 1) with the usual modular transformation laws,
//! so the nome satisfies |q| ≤ e^{-π√3/2} before any series is summed.
//! Multipliers are carried in logarithmic form so that quasi-periodic
//! factors never overflow.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Maximum number of terms of the theta-1 series after reduction.
pub const THETA_MAX_TERMS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecialFnError {
    #[error("modulus {0} is not in the upper half plane")]
    LowerHalfPlane(Complex64),
    #[error("theta1'(0) = {series} disagrees with 2*pi*eta^3 = {eta} (relative {rel:e})")]
    ConsistencyFailure {
        series: Complex64,
        eta: Complex64,
        rel: f64,
    },
}

/// A point σ of the upper half plane, the period ratio of the lattice ⟨1, σ⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modulus {
    sigma: Complex64,
}

impl Modulus {
    pub fn new(sigma: Complex64) -> Result<Self, SpecialFnError> {
        if !(sigma.im > 0.0) || !sigma.re.is_finite() || !sigma.im.is_finite() {
            return Err(SpecialFnError::LowerHalfPlane(sigma));
        }
        Ok(Self { sigma })
    }

    pub fn from_parts(re: f64, im: f64) -> Result<Self, SpecialFnError> {
        Self::new(Complex64::new(re, im))
    }

    pub fn sigma(&self) -> Complex64 {
        self.sigma
    }

    /// q = exp(2πiσ).
    pub fn nome(&self) -> Complex64 {
        (2.0 * PI * I * self.sigma).exp()
    }
}

/// Neumaier-compensated complex accumulator.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: Complex64,
    comp: Complex64,
}

impl CompensatedSum {
    fn add(&mut self, x: Complex64) {
        self.sum.re = neumaier_step(self.sum.re, x.re, &mut self.comp.re);
        self.sum.im = neumaier_step(self.sum.im, x.im, &mut self.comp.im);
    }

    fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}

fn neumaier_step(sum: f64, x: f64, comp: &mut f64) -> f64 {
    let t = sum + x;
    if sum.abs() >= x.abs() {
        *comp += (sum - t) + x;
    } else {
        *comp += (x - t) + sum;
    }
    t
}

/// Principal square root of -iτ, which has positive real part for Im τ > 0.
fn ln_sqrt_minus_i(tau: Complex64) -> Complex64 {
    0.5 * (-I * tau).ln()
}

/// η(σ) = q^{1/24} ∏ (1 − qⁿ), evaluated after modular reduction.
pub fn dedekind_eta(m: &Modulus) -> Complex64 {
    let (ln_mult, tau) = reduce_eta(m.sigma);
    ln_mult.exp() * eta_series(tau)
}

/// ln |η(σ)|, stable for moduli with large imaginary part.
pub fn ln_abs_eta(m: &Modulus) -> f64 {
    let (ln_mult, tau) = reduce_eta(m.sigma);
    ln_mult.re + eta_series(tau).norm().ln()
}

/// Returns (ln multiplier, reduced τ) with η(σ) = exp(ln multiplier)·η(τ).
fn reduce_eta(sigma: Complex64) -> (Complex64, Complex64) {
    let mut tau = sigma;
    let mut ln_mult = Complex64::new(0.0, 0.0);
    for _ in 0..200 {
        let n = tau.re.round();
        if n != 0.0 {
            // η(τ' + n) = e^{iπn/12} η(τ')
            tau.re -= n;
            ln_mult += I * PI * n / 12.0;
        }
        if tau.norm_sqr() < 1.0 - 1e-15 {
            // η(τ) = η(−1/τ) / √(−iτ)
            ln_mult -= ln_sqrt_minus_i(tau);
            tau = -1.0 / tau;
        } else {
            break;
        }
    }
    (ln_mult, tau)
}

/// q^{1/24} Σ_k (−1)^k q^{k(3k−1)/2} (pentagonal number series).
fn eta_series(tau: Complex64) -> Complex64 {
    let prefactor = (I * PI * tau / 12.0).exp();
    let mut acc = CompensatedSum::default();
    acc.add(Complex64::new(1.0, 0.0));
    for k in 1..64i64 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let mut added = 0.0f64;
        for kk in [k, -k] {
            let e = (kk * (3 * kk - 1) / 2) as f64;
            let term = sign * (2.0 * PI * I * tau * e).exp();
            added = added.max(term.norm());
            acc.add(term);
        }
        if added < 1e-18 {
            break;
        }
    }
    prefactor * acc.value()
}

/// Result of a theta evaluation split into a logarithmic multiplier and a
/// moderately sized series value: θ₁ = exp(ln_mult)·series.
#[derive(Debug, Clone, Copy)]
struct ThetaParts {
    ln_mult: Complex64,
    series: Complex64,
}

struct ThetaReduction {
    z: Complex64,
    tau: Complex64,
    ln_mult: Complex64,
    /// ln dz'/dz accumulated over the inversions
    ln_dz: Complex64,
}

/// Modular reduction of the theta modulus, with
/// θ₁(z|σ) = exp(ln_mult)·θ₁(z'|τ).
fn reduce_theta(z: Complex64, sigma: Complex64) -> ThetaReduction {
    let mut tau = sigma;
    let mut zz = z;
    let mut ln_mult = Complex64::new(0.0, 0.0);
    let mut ln_dz = Complex64::new(0.0, 0.0);
    for _ in 0..200 {
        let n = tau.re.round();
        if n != 0.0 {
            // θ₁(z|τ'+n) = e^{iπn/4} θ₁(z|τ')
            tau.re -= n;
            ln_mult += I * PI * n / 4.0;
        }
        if tau.norm_sqr() < 1.0 - 1e-15 {
            // θ₁(z|τ) = i (−iτ)^{−1/2} e^{−iπz²/τ} θ₁(z/τ | −1/τ)
            ln_mult += I * PI / 2.0 - ln_sqrt_minus_i(tau) - I * PI * zz * zz / tau;
            ln_dz -= tau.ln();
            zz /= tau;
            tau = -1.0 / tau;
        } else {
            break;
        }
    }
    ThetaReduction {
        z: zz,
        tau,
        ln_mult,
        ln_dz,
    }
}

fn theta1_parts(z: Complex64, sigma: Complex64) -> ThetaParts {
    let ThetaReduction {
        z, tau, mut ln_mult, ..
    } = reduce_theta(z, sigma);
    // lattice reduction of the argument: z = z0 + m + nτ
    let n = (z.im / tau.im).round();
    let m = (z - n * tau).re.round();
    let z0 = z - m - n * tau;
    if n != 0.0 || m != 0.0 {
        let parity = (m + n).rem_euclid(2.0);
        ln_mult += -I * PI * n * n * tau - 2.0 * PI * I * n * z0;
        if parity != 0.0 {
            ln_mult += I * PI;
        }
    }
    ThetaParts {
        ln_mult,
        series: theta1_series(z0, tau),
    }
}

/// 2 Σ_{k≥0} (−1)^k e^{iπτ(k+1/2)²} sin((2k+1)πz).
fn theta1_series(z: Complex64, tau: Complex64) -> Complex64 {
    let mut acc = CompensatedSum::default();
    for k in 0..THETA_MAX_TERMS {
        let kf = k as f64 + 0.5;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let weight = (I * PI * tau * kf * kf).exp();
        let term = sign * weight * ((2.0 * kf) * PI * z).sin();
        acc.add(term);
        let partial = acc.value().norm();
        if term.norm() <= 1e-17 * partial.max(f64::MIN_POSITIVE) && k > 0 {
            break;
        }
    }
    2.0 * acc.value()
}

/// Jacobi θ₁(z|σ).
pub fn theta1(z: Complex64, m: &Modulus) -> Complex64 {
    let p = theta1_parts(z, m.sigma);
    p.ln_mult.exp() * p.series
}

/// ln |θ₁(z|σ)|; −∞ at lattice points.
pub fn ln_abs_theta1(z: Complex64, m: &Modulus) -> f64 {
    let p = theta1_parts(z, m.sigma);
    p.ln_mult.re + p.series.norm().ln()
}

fn theta1_prime0_series(sigma: Complex64) -> Complex64 {
    let r = reduce_theta(Complex64::new(0.0, 0.0), sigma);
    let tau = r.tau;
    let ln_mult = r.ln_mult + r.ln_dz;
    let mut acc = CompensatedSum::default();
    for k in 0..THETA_MAX_TERMS {
        let kf = k as f64 + 0.5;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * (2.0 * kf) * (I * PI * tau * kf * kf).exp();
        acc.add(term);
        if term.norm() <= 1e-17 * acc.value().norm() && k > 0 {
            break;
        }
    }
    ln_mult.exp() * 2.0 * PI * acc.value()
}

/// θ₁′(0|σ), checked against the Jacobi identity θ₁′(0) = 2πη(σ)³.
pub fn theta1_prime0(m: &Modulus) -> Result<Complex64, SpecialFnError> {
    let series = theta1_prime0_series(m.sigma);
    let eta = dedekind_eta(m);
    let from_eta = 2.0 * PI * eta * eta * eta;
    let rel = (series - from_eta).norm() / from_eta.norm();
    if rel > 1e-12 {
        return Err(SpecialFnError::ConsistencyFailure {
            series,
            eta: from_eta,
            rel,
        });
    }
    Ok(series)
}

/// ln |θ₁′(0|σ)| = ln 2π + 3 ln|η(σ)|.
pub fn ln_abs_theta1_prime0(m: &Modulus) -> f64 {
    (2.0 * PI).ln() + 3.0 * ln_abs_eta(m)
}
