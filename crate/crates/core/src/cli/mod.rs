//! Command dispatch for batch computations: configuration ingestion, the
//! drivers, and report emission.
//!
//! Exit codes: 0 all passes; 2 verification failure; 3 non-convergence;
//! 4 config error; 5 numerical failure.

pub mod config;
pub mod emit;

use std::path::{Path, PathBuf};

use crate::backgrounds::{BackgroundKind, SampleSpec};
use crate::charge::{total_charge, ChargeError};
use crate::numeric::adm_constant;
use crate::verify;
use crate::verify::corpus;

pub use config::{ConfigError, RunConfig};
pub use emit::{config_hash, ReportBundle, RunMeta};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 2;
pub const EXIT_NONCONVERGENT: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_NUMERICAL: i32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Compute,
    Invariance,
    Cancel,
    Kid,
    Equivariance,
    Bounds,
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Compute => "compute",
            Command::Invariance => "invariance",
            Command::Cancel => "cancel",
            Command::Kid => "kid",
            Command::Equivariance => "equivariance",
            Command::Bounds => "bounds",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Options {
    pub command: Command,
    pub config_path: PathBuf,
    pub workers: Option<usize>,
    pub normalize: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub timestamp: bool,
}

/// Run a command; returns the exit code. Human diagnostics go to stderr,
/// summary lines to stdout, reports to the output directory.
pub fn execute(opts: &Options) -> i32 {
    match execute_inner(opts) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Failure {
        Failure {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }
}

impl From<verify::VerifyError> for Failure {
    fn from(e: verify::VerifyError) -> Failure {
        match e {
            verify::VerifyError::Charge(ChargeError::NonConvergent { reason, .. }) => Failure {
                code: EXIT_NONCONVERGENT,
                message: reason,
            },
            other => Failure {
                code: EXIT_NUMERICAL,
                message: other.to_string(),
            },
        }
    }
}

impl From<ChargeError> for Failure {
    fn from(e: ChargeError) -> Failure {
        match e {
            ChargeError::NonConvergent { reason, .. } => Failure {
                code: EXIT_NONCONVERGENT,
                message: reason,
            },
            other => Failure {
                code: EXIT_NUMERICAL,
                message: other.to_string(),
            },
        }
    }
}

impl From<emit::EmitError> for Failure {
    fn from(e: emit::EmitError) -> Failure {
        Failure {
            code: EXIT_NUMERICAL,
            message: e.to_string(),
        }
    }
}

fn require<T>(value: Option<T>, what: &str) -> Result<T, Failure> {
    value.ok_or_else(|| Failure {
        code: EXIT_CONFIG,
        message: format!("this command needs the `{what}` config block"),
    })
}

fn execute_inner(opts: &Options) -> Result<i32, Failure> {
    if let Some(n) = opts.workers {
        // Deterministic results do not depend on the pool size; this only
        // bounds parallelism. Ignore failure if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let text = std::fs::read_to_string(&opts.config_path).map_err(|e| Failure {
        code: EXIT_CONFIG,
        message: format!("cannot read {}: {e}", opts.config_path.display()),
    })?;
    let mut cfg = RunConfig::from_file(&opts.config_path)?;
    if let Some(norm) = &opts.normalize {
        let out = cfg.output.get_or_insert_with(|| config::OutputConfig {
            dir: None,
            formats: None,
            normalize: None,
        });
        out.normalize = Some(norm.clone());
    }
    let built = cfg.build()?;
    let hash = config_hash(&text).map_err(|e| Failure {
        code: EXIT_CONFIG,
        message: format!("config is not valid JSON: {e}"),
    })?;

    if opts.command == Command::Validate {
        return validate_summary(&cfg, &built, &hash);
    }

    let mut bundle = ReportBundle {
        meta: RunMeta {
            tool: "asympcharge".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: opts.command.name().into(),
            config_hash: hash,
            workers: rayon::current_num_threads(),
            timestamp: if opts.timestamp {
                Some(format!("{:?}", std::time::SystemTime::now()))
            } else {
                None
            },
        },
        charges: Vec::new(),
        verifications: Vec::new(),
    };

    let mut code = EXIT_OK;
    match opts.command {
        Command::Compute => {
            let e = require(built.perturbation.as_ref(), "data")?;
            if built.potentials.is_empty() {
                return Err(Failure {
                    code: EXIT_CONFIG,
                    message: "compute needs the `potential` block".into(),
                });
            }
            if built.surfaces.is_empty() {
                return Err(Failure {
                    code: EXIT_CONFIG,
                    message: "compute needs the `surfaces` block".into(),
                });
            }
            for v in &built.potentials {
                match total_charge(
                    built.kind,
                    &built.bg,
                    v,
                    e,
                    &built.surfaces,
                    &built.extrapolation,
                    built.normalization,
                ) {
                    Ok(report) => {
                        println!(
                            "charge[{}] = {} (fit exponent {:.4})",
                            report.potential,
                            report
                                .extrapolated
                                .map(|v| emit::format_sig17(v))
                                .unwrap_or_else(|| "n/a".into()),
                            report.fit_exponent.unwrap_or(f64::NAN),
                        );
                        bundle.charges.push(report);
                    }
                    Err(ChargeError::NonConvergent { reason, report }) => {
                        eprintln!("charge[{}] did not converge: {reason}", report.potential);
                        bundle.charges.push(*report);
                        code = EXIT_NONCONVERGENT;
                    }
                    Err(other) => return Err(other.into()),
                }
            }
        }
        Command::Kid => {
            if built.potentials.is_empty() {
                return Err(Failure {
                    code: EXIT_CONFIG,
                    message: "kid needs the `potential` block".into(),
                });
            }
            let spec = built.samples.clone().unwrap_or_else(|| {
                SampleSpec::new(1000, 37, default_r_range(&built.bg))
            });
            for v in &built.potentials {
                let (report, ms) = verify::timed(|| {
                    verify::check_kid(&built.bg, built.kind, v, &spec, built.tolerances.kid)
                });
                let report = report?;
                let ver = report.verification(ms);
                print_verification(&ver);
                if !ver.pass {
                    code = EXIT_VERIFICATION;
                }
                bundle.verifications.push(ver);
            }
        }
        Command::Cancel => {
            let (zeta, _tau, zlabel) = require(built.zeta.clone(), "zeta")?;
            if built.potentials.is_empty() || built.surfaces.is_empty() {
                return Err(Failure {
                    code: EXIT_CONFIG,
                    message: "cancel needs `potential` and `surfaces` blocks".into(),
                });
            }
            let mut surfaces = built.surfaces.clone();
            if let Some(ell) = &built.ellipsoid {
                surfaces.push(ell.clone());
            }
            let spec = built
                .samples
                .clone()
                .unwrap_or_else(|| SampleSpec::new(200, 41, default_r_range(&built.bg)));
            for v in &built.potentials {
                let (report, ms) = verify::timed(|| {
                    verify::check_cancellation(
                        &built.bg,
                        built.kind,
                        v,
                        &zeta,
                        &zlabel,
                        &surfaces,
                        &spec,
                        built.tolerances.cancellation,
                    )
                });
                let report = report?;
                let ver = report.verification(ms);
                print_verification(&ver);
                if !ver.pass {
                    code = EXIT_VERIFICATION;
                }
                bundle.verifications.push(ver);
            }
        }
        Command::Invariance => {
            let e1 = require(built.perturbation.as_ref(), "data")?;
            let (zeta, _tau, zlabel) = require(built.zeta.clone(), "zeta")?;
            if built.potentials.is_empty() || built.surfaces.is_empty() {
                return Err(Failure {
                    code: EXIT_CONFIG,
                    message: "invariance needs `potential` and `surfaces` blocks".into(),
                });
            }
            let cert_spec = built.samples.clone().unwrap_or_else(|| {
                let radii: Vec<f64> = built
                    .surfaces
                    .iter()
                    .filter_map(|s| s.radius())
                    .collect();
                let lo = radii.first().copied().unwrap_or(1.0) * 0.8;
                let hi = radii.last().copied().unwrap_or(10.0) * 1.05;
                SampleSpec::new(120, 20_240_601, (lo, hi))
            });
            let atol = built.tolerances.invariance_atol_cn * adm_constant(built.bg.dim());
            for v in &built.potentials {
                let (report, ms) = verify::timed(|| {
                    verify::check_invariance(
                        &built.bg,
                        built.kind,
                        e1,
                        &zeta,
                        &zlabel,
                        v,
                        &built.surfaces,
                        &built.extrapolation,
                        atol,
                        built.tolerances.invariance_rtol,
                        &cert_spec,
                    )
                });
                let report = report?;
                let ver = report.verification(ms);
                print_verification(&ver);
                if !ver.pass {
                    code = EXIT_VERIFICATION;
                }
                bundle.charges.push(report.charge1.clone());
                bundle.charges.push(report.charge2.clone());
                bundle.verifications.push(ver);
            }
        }
        Command::Equivariance => {
            let e = require(built.perturbation.as_ref(), "data")?;
            let iso = require(built.isometry.as_ref(), "isometry")?;
            if built.potentials.is_empty() || built.surfaces.is_empty() {
                return Err(Failure {
                    code: EXIT_CONFIG,
                    message: "equivariance needs `potential` and `surfaces` blocks".into(),
                });
            }
            for v in &built.potentials {
                let (report, ms) = verify::timed(|| {
                    verify::check_equivariance(
                        &built.bg,
                        built.kind,
                        e,
                        iso,
                        v,
                        &built.surfaces,
                        &built.extrapolation,
                        built.tolerances.equivariance_rtol,
                        1e-9,
                    )
                });
                let report = report?;
                let ver = report.verification(ms);
                print_verification(&ver);
                if !ver.pass {
                    code = EXIT_VERIFICATION;
                }
                bundle.charges.push(report.left.clone());
                bundle.charges.push(report.right.clone());
                bundle.verifications.push(ver);
            }
        }
        Command::Bounds => {
            let b = &built.bounds;
            for ell in [0usize, 1] {
                let (report, ms) = verify::timed(|| {
                    verify::measure_r1_bound(
                        &built.bg,
                        built.kind,
                        ell,
                        b.draws,
                        b.seed,
                        b.geodesic_samples,
                    )
                });
                let report = report?;
                let ver = report.verification(ms);
                print_verification(&ver);
                if !ver.pass {
                    code = EXIT_VERIFICATION;
                }
                bundle.verifications.push(ver);
            }
            // Certificates over the bundled small-gradient ζ corpus.
            let zetas = corpus::random_zeta_family(&built.bg, b.seed.wrapping_add(9), 8, 0.25);
            let spec = SampleSpec::new(60, 53, default_r_range(&built.bg));
            let (cert_ver, ms) = verify::timed(|| -> Result<_, verify::VerifyError> {
                let mut worst = 0.0f64;
                let mut all_pass = true;
                let mut details = Vec::new();
                for z in &zetas {
                    let psi = crate::diffeo::DiffeoAtInfinity::new(built.bg.clone(), z.field.clone());
                    let cert = crate::diffeo::check_quasi_isometry(&psi, &spec)?;
                    if cert.sup_grad_zeta <= 0.1 {
                        all_pass &= cert.certified;
                        worst = worst.max((cert.eig_max - 1.0).abs().max((cert.eig_min - 1.0).abs()));
                        details.push(format!(
                            "{}: eig ∈ [{:.4}, {:.4}], sup|∇ζ| = {:.3e}, certified {}",
                            z.label, cert.eig_min, cert.eig_max, cert.sup_grad_zeta, cert.certified
                        ));
                    }
                }
                Ok(verify::VerificationReport {
                    claim: "quasi-isometry-corpus".into(),
                    inputs: format!("{} bundled ζ", zetas.len()),
                    residuals: vec![worst],
                    tolerance: 3.0,
                    pass: all_pass,
                    details,
                    runtime_ms: 0,
                })
            });
            let mut cert_ver = cert_ver?;
            cert_ver.runtime_ms = ms;
            print_verification(&cert_ver);
            if !cert_ver.pass {
                code = EXIT_VERIFICATION;
            }
            bundle.verifications.push(cert_ver);
        }
        Command::Validate => unreachable!("handled above"),
    }

    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| {
            cfg.output
                .as_ref()
                .and_then(|o| o.dir.as_ref())
                .map(PathBuf::from)
        })
        .unwrap_or_else(|| PathBuf::from("."));
    let written = emit::write_bundle(&bundle, Path::new(&out_dir))?;
    for path in written {
        eprintln!("wrote {path}");
    }
    Ok(code)
}

fn default_r_range(bg: &crate::backgrounds::Background) -> (f64, f64) {
    match bg.kind() {
        BackgroundKind::Flat => (1.0, 8.0),
        BackgroundKind::Hyperbolic => (0.8, 3.0),
    }
}

fn print_verification(v: &verify::VerificationReport) {
    println!(
        "[{}] {} — {} (worst residual {:.3e}, tol {:.3e}, {} ms)",
        if v.pass { "PASS" } else { "FAIL" },
        v.claim,
        v.inputs,
        v.residuals.iter().copied().fold(0.0f64, f64::max),
        v.tolerance,
        v.runtime_ms
    );
    for d in &v.details {
        println!("    {d}");
    }
}

fn validate_summary(
    cfg: &RunConfig,
    built: &config::BuiltRun,
    hash: &str,
) -> Result<i32, Failure> {
    let n = built.bg.dim();
    println!("OK");
    println!("  config hash: {hash}");
    println!(
        "  background: {:?} n={} λ₀={} r_min={}",
        built.bg.kind(),
        n,
        built.bg.lambda0(),
        built.bg.r_min()
    );
    println!("  operator: {:?}", built.kind);
    println!(
        "  c_n = 2(n−1)ω_(n−1) = {}",
        emit::format_sig17(adm_constant(n))
    );
    match built.bg.kernel_basis(built.kind) {
        Ok(basis) => println!("  kernel basis size: {}", basis.len()),
        Err(e) => println!("  kernel basis: unavailable ({e})"),
    }
    if !built.potentials.is_empty() {
        println!(
            "  potentials: {}",
            built
                .potentials
                .iter()
                .map(|p| p.label.clone())
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    if !built.surfaces.is_empty() {
        println!(
            "  surfaces: {} spheres (+{} parametrized), polar×phi = {}×{}",
            built.surfaces.len(),
            built.ellipsoid.is_some() as usize,
            built.surfaces[0].orders.polar,
            built.surfaces[0].orders.phi
        );
    }
    if let Some((_, tau, label)) = &built.zeta {
        println!(
            "  zeta: {label}{}",
            tau.map(|t| format!(" (declared τ = {t})")).unwrap_or_default()
        );
    }
    let _ = cfg;
    Ok(EXIT_OK)
}
