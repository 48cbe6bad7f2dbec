//! `conedet` command line.

pub mod report;
pub mod suites;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::conekernel::{kernel_parts, ConeError, ConeParams};
use crate::specialfn::{dedekind_eta, ln_abs_eta, theta1, theta1_prime0, Modulus, SpecialFnError};
use crate::spectral::{
    fit_heat_coefficients, heat_trace, log_det, rescaling_exponent, zeta_zero, HeatCoefficients, SpectralError,
    SpectrumOptions, ZetaDetResult, CERTIFIED_LAMBDA_T,
};
use crate::surface::{load_surface_file, PolyhedralSurface, SurfaceError};
use crate::torusmetrics::{load_metric_file, ConicalTorusMetric, MetricError};
use report::{to_json, write_atomic, VerificationReport};

pub const THREADS_ENV: &str = "CONEDET_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("SurfaceError: {0}")]
    Surface(#[from] SurfaceError),
    #[error("SpectralError: {0}")]
    Spectral(#[from] SpectralError),
    #[error("ConeError: {0}")]
    Cone(#[from] ConeError),
    #[error("SpecialFnError: {0}")]
    SpecialFn(#[from] SpecialFnError),
    #[error("MetricError: {0}")]
    Metric(#[from] MetricError),
    #[error("IoError: {path}: {message}")]
    Io { path: String, message: String },
    #[error("ToleranceExceeded: {0}")]
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "conedet", version, about = "Spectral invariants of flat surfaces with conical points")]
struct Cli {
    /// Worker threads (overrides CONEDET_THREADS; default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Record per-check wall time in reports (output is then not reproducible).
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Surface inspection.
    Surface {
        #[command(subcommand)]
        command: SurfaceCommand,
    },
    /// Laplacian eigenvalues as CSV (index, eigenvalue, error_estimate).
    Spectrum(SpectrumArgs),
    /// Heat trace at the given times, with a fit of the small-time coefficients.
    HeatTrace(HeatTraceArgs),
    /// Zeta-regularized log determinant.
    Det(DetArgs),
    /// Dedekind eta.
    Eta {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        sigma: Complex64,
    },
    /// Jacobi theta_1(z | sigma).
    Theta1 {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        z: Complex64,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        sigma: Complex64,
    },
    /// Heat kernel of the infinite cone of angle beta, in polar coordinates.
    ConeKernel {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        r: f64,
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long, allow_hyphen_values = true)]
        psi: f64,
        #[arg(long)]
        t: f64,
    },
    /// Verification suites; exit 0 iff every check passes.
    Verify {
        #[command(subcommand)]
        suite: Suite,
    },
}

#[derive(Debug, Subcommand)]
enum SurfaceCommand {
    /// Topology, area and cone data as JSON.
    Info {
        #[arg(long)]
        surface: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct MeshArgs {
    /// Refinements above the base triangulation.
    #[arg(long)]
    levels: Option<usize>,
    /// Number of eigenvalues, including the zero mode.
    #[arg(long)]
    count: Option<usize>,
    /// Use the finest level only (no Richardson extrapolation).
    #[arg(long)]
    no_extrapolate: bool,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[arg(long)]
    surface: Option<PathBuf>,
    /// Conical torus metric applied as a density on a flat torus surface.
    #[arg(long)]
    metric: Option<PathBuf>,
    #[command(flatten)]
    mesh: MeshArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HeatTraceArgs {
    #[arg(long)]
    surface: Option<PathBuf>,
    #[arg(long)]
    metric: Option<PathBuf>,
    #[command(flatten)]
    mesh: MeshArgs,
    /// Times (comma separated or repeated).
    #[arg(long, value_delimiter = ',', required = true)]
    t: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DetArgs {
    #[arg(long)]
    surface: Option<PathBuf>,
    #[arg(long)]
    metric: Option<PathBuf>,
    #[command(flatten)]
    mesh: MeshArgs,
    /// Split time T of the Mellin integral (default 35/lambda_max).
    #[arg(long)]
    split: Option<f64>,
    /// Fail unless the spectrum reproduces the closed-form zeta(0) to this accuracy.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Suite {
    /// Cone heat-trace defect against its closed form.
    ConeDefect {
        #[arg(long, value_delimiter = ',', required = true)]
        beta: Vec<f64>,
        #[arg(long, default_value_t = 0.01)]
        t: f64,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// zeta(0) from cone angles and from the FEM heat trace.
    ZetaZero {
        #[arg(long)]
        surface: PathBuf,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value_t = 1e-2)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// log det under metric scaling by kappa.
    Rescaling {
        #[arg(long)]
        surface: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        kappa: f64,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Eigenvalue counting slope against area/4pi.
    Weyl {
        #[arg(long)]
        surface: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        lo: f64,
        #[arg(long, default_value_t = 2000.0)]
        hi: f64,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Flat-torus log det differences against ln(Im sigma^2 |eta|^4).
    RaySinger {
        /// Moduli re,im; the first one is the reference.
        #[arg(long = "sigma", value_parser = parse_complex, allow_hyphen_values = true,
              default_values = ["0,1", "0,1.5", "0,2", "0.5,1"])]
        sigmas: Vec<Complex64>,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Constancy of det / predictor over metrics with equal cone orders.
    Mt {
        #[arg(long = "metric", required = true)]
        metrics: Vec<PathBuf>,
        /// Precomputed `conedet det` outputs, one per metric in order.
        #[arg(long = "fem-det")]
        fem_dets: Vec<PathBuf>,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Three-polyhedra product identity.
    ThreePolyhedra {
        #[arg(long, requires_all = ["m", "n"], conflicts_with = "random")]
        l: Option<PathBuf>,
        #[arg(long)]
        m: Option<PathBuf>,
        #[arg(long)]
        n: Option<PathBuf>,
        /// Number of random triples instead of files.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected re,im, got {s:?}"))?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    Ok(Complex64::new(p(re)?, p(im)?))
}

/// Thread count: flag, then CONEDET_THREADS, then all cores.
pub fn resolve_threads(flag: Option<usize>, env: Option<&str>) -> Result<Option<usize>, CliError> {
    let n = match (flag, env) {
        (Some(n), _) => Some(n),
        (None, Some(v)) if !v.trim().is_empty() => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("{THREADS_ENV}={v:?} is not a thread count")))?,
        ),
        _ => None,
    };
    if n == Some(0) {
        return Err(CliError::Usage("thread count must be at least 1".into()));
    }
    Ok(n)
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(pass) => i32::from(!pass),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let env = std::env::var(THREADS_ENV).ok();
    if let Some(n) = resolve_threads(cli.threads, env.as_deref())? {
        // a pool may already exist when run() is called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let timings = cli.timings;
    match cli.command {
        Command::Surface {
            command: SurfaceCommand::Info { surface, out },
        } => {
            let s = read_surface(&surface)?;
            emit_json(&surface_info(&s), out.as_deref())?;
            Ok(true)
        }
        Command::Spectrum(a) => {
            let (s, m) = surface_and_metric(a.surface.as_deref(), a.metric.as_deref())?;
            let spec = compute_spectrum(&s, m.as_ref(), &a.mesh)?;
            emit(spec.to_csv().as_bytes(), a.out.as_deref())?;
            Ok(true)
        }
        Command::HeatTrace(a) => {
            let (s, m) = surface_and_metric(a.surface.as_deref(), a.metric.as_deref())?;
            let spec = compute_spectrum(&s, m.as_ref(), &a.mesh)?;
            let traces = a.t.iter().map(|&t| heat_trace(&spec, t)).collect::<Result<Vec<_>, _>>()?;
            let fit = if a.t.len() >= 2 {
                Some(fit_heat_coefficients(&spec, &a.t, None)?)
            } else {
                None
            };
            let doc = json!({
                "eigenvalue_count": spec.len(),
                "certified_min_t": CERTIFIED_LAMBDA_T / spec.largest(),
                "traces": traces,
                "fit": fit,
            });
            emit_json(&doc, a.out.as_deref())?;
            Ok(true)
        }
        Command::Det(a) => {
            let r = det(&a)?;
            emit_json(&r, a.out.as_deref())?;
            if let Some(tol) = a.tol {
                let diff = (r.zeta0_numeric - r.zeta0_closed).abs();
                if diff > tol {
                    return Err(CliError::Tolerance(format!(
                        "zeta(0) from the spectrum is off by {diff:e} (> {tol:e})"
                    )));
                }
            }
            Ok(true)
        }
        Command::Eta { sigma } => {
            let m = Modulus::new(sigma)?;
            let e = dedekind_eta(&m);
            emit_json(
                &json!({"sigma": [sigma.re, sigma.im], "eta": [e.re, e.im], "ln_abs_eta": ln_abs_eta(&m)}),
                None,
            )?;
            Ok(true)
        }
        Command::Theta1 { z, sigma } => {
            let m = Modulus::new(sigma)?;
            let v = theta1(z, &m);
            let d = theta1_prime0(&m)?;
            emit_json(
                &json!({"z": [z.re, z.im], "sigma": [sigma.re, sigma.im], "theta1": [v.re, v.im], "theta1_prime0": [d.re, d.im]}),
                None,
            )?;
            Ok(true)
        }
        Command::ConeKernel {
            beta,
            r,
            theta,
            rho,
            psi,
            t,
        } => {
            let p = kernel_parts(&ConeParams::new(beta)?, r, theta, rho, psi, t, false)?;
            emit_json(
                &json!({
                    "beta": beta, "r": r, "theta": theta, "rho": rho, "psi": psi, "t": t,
                    "value": p.images + p.line, "images": p.images, "line": p.line,
                    "image_count": p.image_count,
                }),
                None,
            )?;
            Ok(true)
        }
        Command::Verify { suite } => {
            let (report, out) = verify(suite, timings)?;
            emit_json(&report, out.as_deref())?;
            Ok(report.pass)
        }
    }
}

fn verify(suite: Suite, timings: bool) -> Result<(VerificationReport, Option<PathBuf>), CliError> {
    Ok(match suite {
        Suite::ConeDefect {
            beta,
            t,
            radius,
            tol,
            out,
        } => (suites::cone_defect(&beta, t, radius, tol, timings)?, out),
        Suite::ZetaZero {
            surface,
            levels,
            count,
            tol,
            out,
        } => {
            let s = read_surface(&surface)?;
            (suites::zeta_zero_suite(&s, levels, count, tol, timings)?, out)
        }
        Suite::Rescaling {
            surface,
            kappa,
            levels,
            count,
            tol,
            out,
        } => {
            if !(kappa > 0.0) || !kappa.is_finite() {
                return Err(CliError::Usage(format!("kappa must be positive, got {kappa}")));
            }
            let s = read_surface(&surface)?;
            (suites::rescaling_suite(&s, kappa, levels, count, tol, timings)?, out)
        }
        Suite::Weyl {
            surface,
            lo,
            hi,
            levels,
            tol,
            out,
        } => {
            let s = read_surface(&surface)?;
            (suites::weyl_suite(&s, lo, hi, levels, tol, timings)?, out)
        }
        Suite::RaySinger {
            sigmas,
            levels,
            tol,
            out,
        } => (suites::ray_singer_suite(&sigmas, levels, tol, timings)?, out),
        Suite::Mt {
            metrics,
            fem_dets,
            levels,
            tol,
            out,
        } => {
            if !fem_dets.is_empty() && fem_dets.len() != metrics.len() {
                return Err(CliError::Usage(format!(
                    "{} --fem-det files for {} metrics",
                    fem_dets.len(),
                    metrics.len()
                )));
            }
            let ms = metrics.iter().map(|p| read_metric(p)).collect::<Result<Vec<_>, _>>()?;
            let dets = if fem_dets.is_empty() {
                vec![None; ms.len()]
            } else {
                fem_dets
                    .iter()
                    .map(|p| read_det(p).map(|d| Some(d.log_det)))
                    .collect::<Result<Vec<_>, _>>()?
            };
            (suites::mt_suite(&ms, &dets, levels, tol, timings)?, out)
        }
        Suite::ThreePolyhedra {
            l,
            m,
            n,
            random,
            seed,
            tol,
            out,
        } => {
            let triples = match (l, m, n, random) {
                (Some(l), Some(m), Some(n), None) => vec![(read_metric(&l)?, read_metric(&m)?, read_metric(&n)?)],
                (None, None, None, Some(k)) if k > 0 => suites::random_triples(seed, k)?,
                _ => return Err(CliError::Usage("give --l, --m and --n, or --random N".into())),
            };
            (suites::three_polyhedra_suite(&triples, tol, timings)?, out)
        }
    })
}

fn det(a: &DetArgs) -> Result<ZetaDetResult, CliError> {
    let (s, m) = surface_and_metric(a.surface.as_deref(), a.metric.as_deref())?;
    let spec = compute_spectrum(&s, m.as_ref(), &a.mesh)?;
    let coeffs = match &m {
        Some(m) => HeatCoefficients::from_cones(m.area()?.value, &m.cone_angles(), 1)?,
        None => HeatCoefficients::for_surface(&s)?,
    };
    Ok(log_det(&spec, &coeffs, a.split)?)
}

fn compute_spectrum(
    s: &PolyhedralSurface,
    m: Option<&ConicalTorusMetric>,
    mesh: &MeshArgs,
) -> Result<crate::spectral::Spectrum, CliError> {
    let count = match mesh.count {
        Some(c) if c >= 2 => c,
        Some(c) => return Err(CliError::Usage(format!("--count must be at least 2, got {c}"))),
        None => {
            let area = match m {
                Some(m) => m.area()?.value,
                None => s.area(),
            };
            (suites::COUNT_PER_AREA * area / s.shortest_edge().powi(2)).round().max(8.0) as usize
        }
    };
    let levels = match mesh.levels {
        Some(l) => l,
        None => suites::plan_levels(s, count)?,
    };
    let opts = SpectrumOptions {
        extrapolate: !mesh.no_extrapolate,
        ..SpectrumOptions::new(levels, count)
    };
    let density = m.map(|m| m as &dyn crate::spectral::Density);
    Ok(crate::spectral::surface_spectrum(s, density, &opts)?)
}

fn surface_and_metric(
    surface: Option<&Path>,
    metric: Option<&Path>,
) -> Result<(PolyhedralSurface, Option<ConicalTorusMetric>), CliError> {
    match (surface, metric) {
        (Some(s), None) => Ok((read_surface(s)?, None)),
        (s, Some(m)) => {
            let m = read_metric(m)?;
            let s = match s {
                Some(p) => {
                    let s = read_surface(p)?;
                    suites::check_metric_charts(&s, &m)?;
                    s
                }
                None => crate::surface::build_flat_torus(m.sigma(), suites::TORUS_BASE)?,
            };
            Ok((s, Some(m)))
        }
        (None, None) => Err(CliError::Usage("give --surface and/or --metric".into())),
    }
}

pub fn surface_info(s: &PolyhedralSurface) -> serde_json::Value {
    let angles: Vec<f64> = s.cone_points().iter().map(|c| c.angle).collect();
    json!({
        "genus": s.genus(),
        "vertices": s.vertex_count(),
        "edges": s.edge_count(),
        "faces": s.face_count(),
        "euler_characteristic": s.euler_characteristic(),
        "area": s.area(),
        "cone_points": s.cone_points(),
        "gauss_bonnet_residual": s.gauss_bonnet_residual(),
        "zeta0": zeta_zero(&angles, s.genus()).ok().map(|z| z.value),
        "rescaling_exponent": rescaling_exponent(&angles, s.genus()).ok(),
    })
}

fn read_surface(p: &Path) -> Result<PolyhedralSurface, CliError> {
    Ok(load_surface_file(p)?)
}

fn read_metric(p: &Path) -> Result<ConicalTorusMetric, CliError> {
    Ok(load_metric_file(p)?)
}

fn read_det(p: &Path) -> Result<ZetaDetResult, CliError> {
    let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: not a det result: {e}", p.display())))
}

fn io_err(p: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: p.display().to_string(),
        message: e.to_string(),
    }
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    emit(to_json(value).as_bytes(), out)
}

fn emit(bytes: &[u8], out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => write_atomic(p, bytes).map_err(|e| io_err(p, e)),
        None => std::io::stdout()
            .lock()
            .write_all(bytes)
            .map_err(|e| io_err(Path::new("<stdout>"), e)),
    }
}
