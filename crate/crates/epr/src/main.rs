//! Thin command-line front end over the experiment drivers in `epr`.
//!
//! Every run prints a JSON summary (scalars, verdicts, table sizes) to
//! stdout; `--out <dir>` additionally writes the CSV tables and a metadata
//! JSON. Failures print a JSON error object to stderr and exit nonzero.
//! `+∞` is rendered as the literal string `"inf"`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use epr::config::ModelConfig;
use epr::experiment::{
    cmd_check_range, cmd_decompose, cmd_ep, cmd_ep_curve, cmd_flip_check, cmd_simulate,
    write_result, EpMethod, EstimatorOptions, ExperimentResult,
};
use epr::estimate::EpMode;
use epr::integrate::Scheme;

#[derive(Parser)]
#[command(
    name = "epr",
    version,
    about = "Entropy production rate of stationary diffusions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Exact,
    Em,
    Bbk,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::Exact => Scheme::Exact,
            SchemeArg::Em => Scheme::EulerMaruyama,
            SchemeArg::Bbk => Scheme::Bbk,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Model configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for CSV tables and metadata JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// +∞ as soon as some pair is observed one way only.
    Strict,
    /// Symmetric smoothing of every observed pair.
    Pseudocount,
    /// Plug-in with only missing directions clamped (default).
    Clamped,
    /// Digamma-corrected log ratios (best near reversibility).
    Digamma,
}

#[derive(Args)]
struct EstimatorArgs {
    /// Bins per axis.
    #[arg(long, default_value_t = 30)]
    bins: usize,
    /// Grid bounds as `lo,hi`, applied to every axis.
    #[arg(long, default_value = "-4,4", value_parser = parse_grid)]
    grid: (f64, f64),
    /// Estimator for the per-pair log ratios.
    #[arg(long, value_enum, default_value_t = ModeArg::Clamped)]
    mode: ModeArg,
    /// α for the pseudocount/clamped modes.
    #[arg(long, default_value_t = 0.5)]
    pseudocount: f64,
    /// Independent paths per simulation.
    #[arg(long, default_value_t = 100)]
    paths: usize,
    /// Steps per path.
    #[arg(long, default_value_t = 1000)]
    steps: usize,
}

impl EstimatorArgs {
    fn options(&self) -> EstimatorOptions {
        EstimatorOptions {
            bins: self.bins,
            grid_lo: self.grid.0,
            grid_hi: self.grid.1,
            n_paths: self.paths,
            n_steps: self.steps,
            mode: match self.mode {
                ModeArg::Strict => EpMode::Strict,
                ModeArg::Pseudocount => EpMode::Pseudocount(self.pseudocount),
                ModeArg::Clamped => EpMode::Clamped(self.pseudocount),
                ModeArg::Digamma => EpMode::Digamma,
            },
            bootstrap_replicates: 200,
        }
    }
}

fn parse_grid(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("grid must be `lo,hi`".into());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    Ok((lo, hi))
}

#[derive(Clone, Debug)]
struct EpsList(Vec<f64>);

fn parse_eps_list(s: &str) -> Result<EpsList, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{e}")))
        .collect::<Result<Vec<f64>, String>>()
        .map(EpsList)
}

#[derive(Subcommand)]
enum Command {
    /// Helmholtz decomposition: D, Q, Π for linear models, pointwise
    /// b_rev/b_irr with divergence residuals otherwise.
    Decompose {
        #[command(flatten)]
        common: Common,
    },
    /// Simulate trajectories and emit them as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        /// Time step.
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 10)]
        paths: usize,
    },
    /// One e_p value: closed form, the ε-formula, or a binned estimate.
    Ep {
        #[command(flatten)]
        common: Common,
        /// `closed-form`, `eps:<lag>`, or `binned`.
        #[arg(long)]
        method: String,
        /// Lag for the binned estimate.
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[command(flatten)]
        estimator: EstimatorArgs,
    },
    /// Binned estimates across a list of lags, with analytic values where
    /// available.
    EpCurve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        /// Comma-separated lags, e.g. `0.5,0.2,0.1,0.05`.
        #[arg(long, value_parser = parse_eps_list)]
        eps: EpsList,
        #[command(flatten)]
        estimator: EstimatorArgs,
    },
    /// Fraction of probe points violating b_irr(x) ∈ im σ.
    CheckRange {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Momentum-flip identity residuals and generalised e_p(ε) for kinetic
    /// models.
    FlipCheck {
        #[command(flatten)]
        common: Common,
        /// Comma-separated lags.
        #[arg(long, value_parser = parse_eps_list, default_value = "0.01,0.1,1")]
        eps: EpsList,
    },
}

fn load_config(common: &Common) -> epr::Result<ModelConfig> {
    let mut cfg = ModelConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.rng_seed = Some(seed);
    }
    Ok(cfg)
}

fn run() -> epr::Result<(ExperimentResult, Option<PathBuf>)> {
    let cli = Cli::parse();
    match cli.command {
        Command::Decompose { common } => {
            let cfg = load_config(&common)?;
            Ok((cmd_decompose(&cfg)?, common.out))
        }
        Command::Simulate {
            common,
            scheme,
            eps,
            steps,
            paths,
        } => {
            let cfg = load_config(&common)?;
            Ok((
                cmd_simulate(&cfg, scheme.into(), eps, steps, paths)?,
                common.out,
            ))
        }
        Command::Ep {
            common,
            method,
            eps,
            estimator,
        } => {
            let cfg = load_config(&common)?;
            let method = match method.as_str() {
                "closed-form" => EpMethod::ClosedForm,
                m if m.starts_with("eps:") => {
                    let lag: f64 = m[4..].parse().map_err(|e| {
                        epr::EprError::InvalidArgument(format!("bad lag in `{m}`: {e}"))
                    })?;
                    EpMethod::EpsFormula(lag)
                }
                "binned" => EpMethod::Binned {
                    eps,
                    opts: estimator.options(),
                },
                other => {
                    return Err(epr::EprError::InvalidArgument(format!(
                        "unknown method `{other}` (closed-form | eps:<lag> | binned)"
                    )))
                }
            };
            Ok((cmd_ep(&cfg, &method)?, common.out))
        }
        Command::EpCurve {
            common,
            scheme,
            eps,
            estimator,
        } => {
            let cfg = load_config(&common)?;
            Ok((
                cmd_ep_curve(&cfg, scheme.into(), &eps.0, &estimator.options())?,
                common.out,
            ))
        }
        Command::CheckRange {
            common,
            points,
            tol,
        } => {
            let cfg = load_config(&common)?;
            Ok((cmd_check_range(&cfg, points, tol)?, common.out))
        }
        Command::FlipCheck { common, eps } => {
            let cfg = load_config(&common)?;
            Ok((cmd_flip_check(&cfg, &eps.0)?, common.out))
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok((result, out)) => {
            if let Some(dir) = out {
                if let Err(e) = write_result(&result, &dir) {
                    eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
                    return ExitCode::FAILURE;
                }
            }
            match serde_json::to_string_pretty(&result) {
                Ok(s) => println!("{s}"),
                Err(e) => {
                    eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
                    return ExitCode::FAILURE;
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
