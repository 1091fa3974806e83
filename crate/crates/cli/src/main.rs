#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

mod commands;
mod config;
mod output;

use commands::Which;
use config::{default_jobs, default_regressor, parse_grid, parse_list, quadrature_from, FileConfig, Format, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] steininfo::Error),
    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use steininfo::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(E::UnknownModel(_) | E::InvalidParameter(_) | E::Domain { .. }) => 2,
            CliError::Core(_) | CliError::Output(_) => 3,
        }
    }

    fn kind(&self) -> String {
        match self {
            CliError::Usage(_) => "usage".into(),
            CliError::Core(e) => format!("{e:?}").split(['(', ' ', '{']).next().unwrap_or("core").to_string(),
            CliError::Output(_) => "output".into(),
        }
    }
}

/// Score functions, Stein kernels and information functionals of concrete
/// laws, with numeric checks of the identities and bounds relating them.
///
/// Every command writes a JSON envelope (configuration echo, version,
/// reports, pass flags, timings) or a CSV table. Exit status: 0 when every
/// asserted inequality holds, 1 when one fails, 2 on usage errors or
/// unknown models, 3 on numeric failure (a diagnostic JSON object is still
/// written).
#[derive(Debug, Parser)]
#[command(name = "steininfo", version, max_term_width = 100)]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for all sampling.
    #[arg(long, global = true, env = "STEININFO_SEED")]
    seed: Option<u64>,
    /// Worker threads [default: logical cores]. Results do not depend on it.
    #[arg(long, global = true, env = "STEININFO_JOBS")]
    jobs: Option<usize>,
    /// Monte Carlo sample size.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format; commands without a table form always write JSON.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Zero timings and omit the worker count so reruns compare byte for byte.
    #[arg(long, global = true)]
    canonical: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Registered laws.
    Models {
        #[command(subcommand)]
        action: ModelsAction,
    },
    /// Fisher information J, relative Fisher information, standardized
    /// Fisher information J_st, relative entropy D to the Gaussian and total
    /// variation distance, with the checks D <= J_st/2 (log-Sobolev) and
    /// 2 d_tv <= sqrt(2D) (Pinsker).
    Functionals {
        #[arg(long)]
        model: String,
        /// Sample means over draws from the law.
        #[arg(long, conflicts_with = "quad")]
        mc: bool,
        /// Adaptive quadrature (the default).
        #[arg(long)]
        quad: bool,
    },
    /// The Stein kernel tau(x) = f(x)^-1 int_x^inf y f(y) dy on a grid, as CSV (x, tau).
    SteinKernel {
        #[arg(long)]
        model: String,
        /// Grid a:b:n; points outside the support are skipped.
        #[arg(long, default_value = "-3:3:61", allow_hyphen_values = true)]
        grid: String,
    },
    /// Residuals of the score identity E[rho phi] = -E[phi'], the Stein
    /// identity E[tau phi'] = E[X phi], and the moments E[tau] = 1,
    /// E[rho] = 0, E[rho X] = -1.
    SteinCheck {
        #[arg(long)]
        model: String,
        /// Test hook: add this constant to the kernel.
        #[arg(long, hide = true)]
        corrupt_kernel: Option<f64>,
    },
    /// One representation of the score or of J_st for the Gaussian channel
    /// X_t = sqrt(t) X + sqrt(1 - t) Z, checked against quadrature.
    IdentityCheck {
        #[arg(long)]
        model: String,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum)]
        which: Which,
    },
    /// MMSE of X given X_t along a grid of t, with J_st(X_t) from the MMSE
    /// relation and from the Stein kernel, as CSV.
    MmseSweep {
        #[arg(long)]
        model: String,
        /// Comma-separated channel parameters.
        #[arg(long, value_parser = parse_list::<f64>)]
        t_grid: Option<::std::vec::Vec<f64>>,
    },
    /// Relative entropy from the de Bruijn integral of J_st(X_t)/(2t) over
    /// t in (0, 1), against direct quadrature.
    Debruijn {
        #[arg(long)]
        model: String,
        /// Gauss-Legendre nodes per half of the split integral.
        #[arg(long, default_value_t = steininfo::functionals::DEBRUIJN_NODES)]
        nodes: usize,
    },
    /// J_st of the smoothed normalized sum sqrt(t) W_n + sqrt(1 - t) Z
    /// against the bound t^2 E[(1 - tau)^2] / (n (1 - t)), the entropy and
    /// total variation chain, and the fitted log-log rate in n. Exits 1 if
    /// any cell is not dominated.
    CltRate {
        #[arg(long)]
        model: String,
        /// Comma-separated summand counts.
        #[arg(long = "n", value_parser = parse_list::<usize>)]
        n: Option<::std::vec::Vec<usize>>,
        #[arg(long, default_value_t = 0.5)]
        t: f64,
        /// Also estimate each cell by sampling and MMSE regression.
        #[arg(long)]
        cross_check: bool,
    },
    /// Supremum of (E[X phi(Y)])^2 over test functions phi of Y with zero
    /// mean and unit second moment in a Hermite basis, against the
    /// regression value E[E[X|Y]^2], for Y = sqrt(t) X + sqrt(1 - t) Z.
    PolySup {
        #[arg(long)]
        model_x: String,
        /// Channel parameter t.
        #[arg(long)]
        channel: f64,
        #[arg(long, default_value_t = 8)]
        degree: usize,
    },
    /// Relative Fisher information of W_n as a supremum of
    /// (E[phi'(W) - W phi(W)])^2 over a polynomial basis, against the
    /// conditional form built from summand kernels and scores.
    SteinRep {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        degree: usize,
        /// 1, or 2 for i.i.d. coordinates.
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
    /// The acceptance matrix: one line per check on stderr, the envelope (or
    /// per-check CSV) on stdout.
    VerifyAll {
        /// Comma-separated criterion numbers [default: all].
        #[arg(long, value_parser = parse_list::<u8>)]
        criteria: Option<::std::vec::Vec<u8>>,
        /// Test hook: perturb the Stein kernel so criterion 1 must fail.
        #[arg(long, hide = true)]
        corrupt_kernel: bool,
    },
}

#[derive(Debug, Subcommand)]
enum ModelsAction {
    /// Name, support, variance and whether a closed-form kernel exists.
    List,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Models { .. } => "models",
            Command::Functionals { .. } => "functionals",
            Command::SteinKernel { .. } => "stein-kernel",
            Command::SteinCheck { .. } => "stein-check",
            Command::IdentityCheck { .. } => "identity-check",
            Command::MmseSweep { .. } => "mmse-sweep",
            Command::Debruijn { .. } => "debruijn",
            Command::CltRate { .. } => "clt-rate",
            Command::PolySup { .. } => "poly-sup",
            Command::SteinRep { .. } => "stein-rep",
            Command::VerifyAll { .. } => "verify-all",
        }
    }

    fn models(&self) -> Vec<String> {
        match self {
            Command::Functionals { model, .. }
            | Command::SteinKernel { model, .. }
            | Command::SteinCheck { model, .. }
            | Command::IdentityCheck { model, .. }
            | Command::MmseSweep { model, .. }
            | Command::Debruijn { model, .. }
            | Command::CltRate { model, .. }
            | Command::SteinRep { model, .. } => vec![model.clone()],
            Command::PolySup { model_x, .. } => vec![model_x.clone()],
            Command::Models { .. } | Command::VerifyAll { .. } => vec![],
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::Models { .. } | Command::SteinKernel { .. } | Command::MmseSweep { .. } | Command::CltRate { .. } => Format::Csv,
            _ => Format::Json,
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut t_grid = file.grids.t.unwrap_or_else(|| steininfo::verify::CHANNEL_TS.to_vec());
    let mut n_grid = file.grids.n.unwrap_or_else(|| steininfo::verify::SUM_NS.to_vec());
    match &cli.command {
        Command::MmseSweep { t_grid: Some(t), .. } => t_grid = t.clone(),
        Command::CltRate { n: Some(n), .. } => n_grid = n.clone(),
        _ => {}
    }
    let workers = cli.jobs.or(file.run.jobs).unwrap_or_else(default_jobs);
    let canonical = cli.canonical;
    let cfg = RunConfig {
        command: cli.command.name().to_string(),
        models: cli.command.models(),
        seed: cli.seed.or(file.run.seed).unwrap_or(steininfo::numerics::mc::MCSpec::default().seed),
        samples: cli.samples.or(file.run.samples).unwrap_or(steininfo::numerics::mc::MCSpec::default().n_samples),
        jobs: (!canonical).then_some(workers),
        t_grid,
        n_grid,
        quadrature: quadrature_from(file.quadrature)?,
        regressor: file.regressor.unwrap_or_else(default_regressor),
        format: cli.format.or(file.run.format).unwrap_or_else(|| cli.command.default_format()),
        out: cli.out.clone().or(file.run.out),
        canonical,
        workers,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli, cfg: &RunConfig) -> Result<output::Outcome, CliError> {
    match &cli.command {
        Command::Models { action: ModelsAction::List } => commands::models_list(),
        Command::Functionals { model, mc, .. } => commands::functionals(cfg, model, *mc),
        Command::SteinKernel { model, grid } => commands::stein_kernel(model, &parse_grid(grid).map_err(CliError::Usage)?),
        Command::SteinCheck { model, corrupt_kernel } => commands::stein_check(cfg, model, *corrupt_kernel),
        Command::IdentityCheck { model, t, which } => commands::identity_check(cfg, model, *t, *which),
        Command::MmseSweep { model, .. } => commands::mmse_sweep_cmd(cfg, model),
        Command::Debruijn { model, nodes } => commands::debruijn(cfg, model, *nodes),
        Command::CltRate { model, t, cross_check, .. } => commands::clt_rate(cfg, model, *t, *cross_check),
        Command::PolySup { model_x, channel, degree } => commands::poly_sup_cmd(cfg, model_x, *channel, *degree),
        Command::SteinRep { model, n, degree, dim } => commands::stein_rep(cfg, model, *n, *degree, *dim),
        Command::VerifyAll { criteria, corrupt_kernel } => {
            let ids = criteria.clone().unwrap_or_else(|| (1..=11).collect());
            if let Some(bad) = ids.iter().find(|&&i| !(1..=11).contains(&i)) {
                return Err(CliError::Usage(format!("no criterion {bad}")));
            }
            commands::verify_all(cfg, &ids, *corrupt_kernel)
        }
    }
}

fn run(cli: Cli) -> Result<bool, (CliError, Option<Box<RunConfig>>)> {
    let cfg = resolve(&cli).map_err(|e| (e, None))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build_global()
        .map_err(|e| (CliError::Output(format!("worker pool: {e}")), None))?;
    let start = Instant::now();
    let outcome = dispatch(&cli, &cfg).map_err(|e| (e, Some(Box::new(cfg.clone()))))?;
    let passed = outcome.passed();
    for c in outcome.checks.iter().filter(|c| !c.passed) {
        eprintln!("check failed: {}", c.name);
    }
    let text = output::render(&cfg, outcome, start.elapsed().as_secs_f64()).map_err(|e| (e, Some(Box::new(cfg.clone()))))?;
    output::emit(&cfg, &text).map_err(|e| (e, Some(Box::new(cfg.clone()))))?;
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err((e, cfg)) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            if code == 3 {
                let diag = json!({
                    "error": e.kind(),
                    "message": e.to_string(),
                    "version": output::version(),
                    "config": cfg,
                });
                let text = serde_json::to_string_pretty(&diag).unwrap_or_default() + "\n";
                match cfg {
                    Some(c) if c.out.is_some() => {
                        if output::emit(&c, &text).is_err() {
                            print!("{text}");
                        }
                    }
                    _ => print!("{text}"),
                }
            }
            ExitCode::from(code)
        }
    }
}
