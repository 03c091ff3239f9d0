//! Command-line front end: noise synthesis, denoising, verification suites
//! and pointwise Hamilton–Jacobi evaluation.
//!
//! Exit status: 0 success, 1 usage or input error, 2 solver failure,
//! 3 verification failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hjdenoise::battery::{Suite, DEFAULT_SEED};
use hjdenoise::hj::HjProblem;
use hjdenoise::io::{read_image, write_image, ImageFormat, Sidecar};
use hjdenoise::noise::{NoiseKind, NoiseSpec};
use hjdenoise::protocol::protocol_config;
use hjdenoise::{AdmmConfig, Error, Image, Model, SolveReport};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InnerSolver { .. } | Error::NotConverged { .. } | Error::Infeasible(_) | Error::Identity(_) => {
                EXIT_SOLVER
            }
            _ => EXIT_USAGE,
        };
        CliError { code, message: e.to_string() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hjdenoise", version, about = "Poisson and multiplicative-noise TV denoising")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corrupt an image; writes x/t, the raw x and a sidecar.
    Noise(NoiseArgs),
    /// Denoise an observation produced by `noise`.
    Denoise(DenoiseArgs),
    /// Run a verification suite (moreau, hj, asymptotic, bregman, duality).
    Verify(VerifyArgs),
    /// Evaluate S, F and the PDE residuals at one point.
    HjEval(HjEvalArgs),
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Clean image (PGM, scaled to [0, 1], or float text).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Observed image x/t, float text. The sidecar goes to `<out>.meta` and
    /// the raw x to `<out>.counts`.
    #[arg(long)]
    pub out: PathBuf,
    /// Selects the noise kind: poisson-* models get Poisson noise, mult-* Gamma.
    #[arg(long)]
    pub model: Model,
    /// Exposure time (Poisson) or number of looks (Gamma).
    #[arg(long)]
    pub t: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Observation written by `noise`; its sidecar is `<in>.meta`.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Restored image; `.pgm` for display, otherwise float text. The display
    /// residual goes next to it as `<stem>.residual.<ext>`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub model: Model,
    #[arg(long)]
    pub alpha: f64,
    /// Overrides the sidecar's t.
    #[arg(long)]
    pub t: Option<f64>,
    /// ADMM penalty; defaults to a per-model value.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,
    /// Primal and dual RMS residual tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Report path; defaults to `<out>.report`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub suite: Suite,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HjEvalArgs {
    /// Point x as a float-text image.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// The Hamiltonian is taken from the model's noise type.
    #[arg(long)]
    pub model: Model,
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub fd_step: f64,
    /// key=value destination; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Runs a parsed command. Data without a `--report` path goes to `out`,
/// progress and summaries to `log`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write, log: &mut dyn std::io::Write) -> Result<(), CliError> {
    match cli.command {
        Command::Noise(a) => cmd_noise(&a, log),
        Command::Denoise(a) => cmd_denoise(&a, log),
        Command::Verify(a) => cmd_verify(&a, out, log),
        Command::HjEval(a) => cmd_hj_eval(&a, out),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn sidecar_path(observed: &Path) -> PathBuf {
    with_suffix(observed, ".meta")
}

/// `dir/name.ext` → `dir/name.residual.ext`.
pub fn residual_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}.residual.{}", ext.to_string_lossy()),
        None => format!("{stem}.residual"),
    };
    out.with_file_name(name)
}

fn noise_kind(model: Model) -> NoiseKind {
    if model.is_poisson() {
        NoiseKind::Poisson
    } else {
        NoiseKind::GammaMultiplicative
    }
}

fn log_line(log: &mut dyn std::io::Write, line: &str) {
    let _ = writeln!(log, "{line}");
}

pub fn cmd_noise(a: &NoiseArgs, log: &mut dyn std::io::Write) -> Result<(), CliError> {
    let clean = read_image(&a.input)?;
    let spec = NoiseSpec::new(noise_kind(a.model), a.t, a.seed);
    let x = spec.apply(&clean)?;
    let counts_path = with_suffix(&a.out, ".counts");
    write_image(&a.out, &x.scale(1.0 / a.t), ImageFormat::FloatText)?;
    write_image(&counts_path, &x, ImageFormat::FloatText)?;
    let counts_name = counts_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| CliError::usage("output path has no file name"))?;
    let mut meta = Sidecar::new();
    meta.set("kind", spec.kind.name())
        .set("t", format!("{:?}", a.t))
        .set("seed", a.seed)
        .set("counts", counts_name)
        .set("rows", x.rows())
        .set("cols", x.cols());
    meta.write(&sidecar_path(&a.out))?;
    log_line(log, &format!("wrote {} ({} noise, t={}, seed={})", a.out.display(), spec.kind.name(), a.t, a.seed));
    Ok(())
}

/// Observation, exact data `x` and `t` from a `noise` output.
pub fn load_observation(observed: &Path) -> Result<(Image, Image, Sidecar), CliError> {
    let meta_path = sidecar_path(observed);
    let meta = Sidecar::read(&meta_path)
        .map_err(|e| CliError::usage(format!("cannot read sidecar {}: {e}", meta_path.display())))?;
    let obs = read_image(observed)?;
    let counts = meta.require("counts")?;
    let counts_path = observed.parent().unwrap_or(Path::new("")).join(counts);
    let x = read_image(&counts_path)?;
    x.same_shape(&obs)?;
    Ok((obs, x, meta))
}

fn write_report(report: &SolveReport, x: &Image, t: f64, model: Model, cfg: &AdmmConfig, path: &Path) -> Result<f64, CliError> {
    let norm = report.residual_norm(x, t);
    let mut out = Sidecar::new();
    out.set("model", model.name())
        .set("t", format!("{t:?}"))
        .set("alpha", format!("{:?}", cfg.alpha))
        .set("lambda", format!("{:?}", cfg.lambda))
        .set("iterations", report.iterations)
        .set("converged", report.converged)
        .set("residual_norm", format!("{norm:?}"))
        .set("obj_nonadditive", format!("{:?}", report.obj_nonadditive))
        .set("primal_residual", format!("{:?}", report.primal_residuals.last().copied().unwrap_or(f64::NAN)))
        .set("dual_residual", format!("{:?}", report.dual_residuals.last().copied().unwrap_or(f64::NAN)))
        .set("max_tv_gap", format!("{:?}", report.max_tv_gap));
    if let Some(obj) = report.obj_additive {
        out.set("obj_additive", format!("{obj:?}"));
    }
    out.write(path)?;
    Ok(norm)
}

pub fn cmd_denoise(a: &DenoiseArgs, log: &mut dyn std::io::Write) -> Result<(), CliError> {
    let (_, x, meta) = load_observation(&a.input)?;
    let t = match a.t {
        Some(t) => t,
        None => meta.get_f64("t")?,
    };
    let base = protocol_config(a.model, t, a.alpha);
    let cfg = AdmmConfig {
        lambda: a.lambda.unwrap_or(base.lambda),
        max_iter: a.max_iter,
        primal_tol: a.tol,
        dual_tol: a.tol,
        ..base
    };
    let report_path = a.report.clone().unwrap_or_else(|| with_suffix(&a.out, ".report"));
    let report = match a.model.solve(&x, &cfg) {
        Ok(r) => r,
        Err(e) => {
            let partial = match &e {
                Error::InnerSolver { report, .. } | Error::NotConverged { report } => Some(report),
                _ => None,
            };
            if let Some(r) = partial {
                write_report(r, &x, t, a.model, &cfg, &report_path)?;
            }
            return Err(e.into());
        }
    };
    let norm = write_report(&report, &x, t, a.model, &cfg, &report_path)?;
    if !report.converged {
        return Err(CliError {
            code: EXIT_SOLVER,
            message: format!("{} did not converge in {} iterations (partial report written)", a.model, report.iterations),
        });
    }
    let format = ImageFormat::from_path(&a.out);
    write_image(&a.out, &report.v_bar, format)?;
    let display = x.zip_map(&report.v_bar, |xi, vi| (xi / t - vi + 0.5).clamp(0.0, 1.0));
    write_image(&residual_path(&a.out), &display, format)?;
    log_line(
        log,
        &format!("{}: {} iterations, ‖x/t − v̄‖ = {norm:.6}", a.model, report.iterations),
    );
    Ok(())
}

pub fn cmd_verify(a: &VerifyArgs, out: &mut dyn std::io::Write, log: &mut dyn std::io::Write) -> Result<(), CliError> {
    let report = a.suite.run(a.seed)?;
    let csv = report.to_csv();
    match &a.report {
        Some(path) => std::fs::write(path, &csv).map_err(Error::from)?,
        None => log_line(out, csv.trim_end()),
    }
    if report.passed() {
        log_line(log, &format!("{}: all {} cases passed", a.suite, report.cases.len()));
        Ok(())
    } else {
        let mut message = format!("{}: {} of {} cases failed", a.suite, report.failures().count(), report.cases.len());
        for c in report.failures() {
            let _ = write!(message, "\n  {} = {:e} (limit {:e})", c.name, c.value, c.limit);
        }
        Err(CliError { code: EXIT_VERIFY, message })
    }
}

fn join(v: &Image) -> String {
    v.as_slice().iter().map(|e| format!("{e:?}")).collect::<Vec<_>>().join(" ")
}

pub fn cmd_hj_eval(a: &HjEvalArgs, sink: &mut dyn std::io::Write) -> Result<(), CliError> {
    let x = read_image(&a.input)?;
    let problem = HjProblem::new(a.model.hamiltonian(), a.alpha);
    let sample = problem.sample(&x, a.t, a.fd_step)?;
    let moreau = problem.moreau_identity_check(&x, a.t)?;
    let mut out = Sidecar::new();
    out.set("hamiltonian", a.model.hamiltonian().name())
        .set("t", format!("{:?}", a.t))
        .set("alpha", format!("{:?}", a.alpha))
        .set("fd_step", format!("{:?}", a.fd_step))
        .set("S", format!("{:?}", sample.s))
        .set("F", format!("{:?}", sample.f))
        .set("moreau_residual", format!("{moreau:?}"))
        .set("grad_x_S", join(&sample.grad_x_s))
        .set("dS_dt", format!("{:?}", sample.ds_dt))
        .set("grad_x_F", join(&sample.grad_x_f))
        .set("dF_dt", format!("{:?}", sample.df_dt))
        .set("pde_residual_S", format!("{:?}", sample.pde_residual_s))
        .set("pde_residual_F", format!("{:?}", sample.pde_residual_f))
        .set("v_bar", join(&sample.v_bar))
        .set("recovered_from_S", join(&sample.recovered_from_s))
        .set("recovered_from_F", join(&sample.recovered_from_f));
    match &a.report {
        Some(path) => out.write(path)?,
        None => log_line(sink, out.to_text().trim_end()),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_path_inserts_before_extension() {
        assert_eq!(residual_path(Path::new("a/b.pgm")), PathBuf::from("a/b.residual.pgm"));
        assert_eq!(residual_path(Path::new("out")), PathBuf::from("out.residual"));
        assert_eq!(sidecar_path(Path::new("x.txt")), PathBuf::from("x.txt.meta"));
    }

    #[test]
    fn error_codes_follow_the_contract() {
        assert_eq!(CliError::from(Error::Config("bad".into())).code, EXIT_USAGE);
        assert_eq!(CliError::from(Error::Infeasible("x".into())).code, EXIT_SOLVER);
        assert_eq!(CliError::from(Error::Parse { offset: 3, message: "eof".into() }).code, EXIT_USAGE);
    }
}
