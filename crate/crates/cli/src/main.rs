//! `slowfast`: command-line front end.
//!
//! Exit status: 0 on success, 2 on usage errors, 3 on numerical failures (with a JSON
//! diagnostic on standard error).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use slowfast::command::{execute, Command, Format, Manifest};
use slowfast::metrics::Metric;
use slowfast::models::get_builtin;
use slowfast::par::{with_threads, Execution};
use slowfast::simulate::SimConfig;
use slowfast::Error;

#[derive(Parser, Debug)]
#[command(name = "slowfast", version, about = "Slow-fast averaging laboratory")]
struct Cli {
    /// Built-in model name (see `list-models`).
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Artifact path (standard output when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Flat TOML file with simulation settings (epsilon, dt, horizon, n_paths, seed,
    /// store, fast_step_factor, x0, y0).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel runs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run ensembles on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MetricArg {
    Tv,
    W1,
    Wbl,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Tv => Metric::Tv,
            MetricArg::W1 => Metric::W1,
            MetricArg::Wbl => Metric::Wbl,
        }
    }
}

/// Simulation overrides shared by the Monte Carlo subcommands.
#[derive(clap::Args, Debug, Default)]
struct SimArgs {
    #[arg(long, allow_negative_numbers = true)]
    n_paths: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    horizon: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    x0: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// List built-in models. CSV columns: name, slow_domain, fast_domain, analytic.
    ListModels,
    /// Invariant density of the frozen fast process. CSV columns: y, density.
    Stationary {
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, default_value_t = slowfast::stationary::DEFAULT_GRID_POINTS)]
        points: usize,
    },
    /// Ergodicity verdicts. CSV columns: quantity, side, value.
    Classify {
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
    },
    /// Distance between two invariant measures. CSV columns: metric, value, method, resolution.
    Distance {
        #[arg(long, value_enum)]
        metric: MetricArg,
        #[arg(long, allow_negative_numbers = true)]
        x1: f64,
        #[arg(long, allow_negative_numbers = true)]
        x2: f64,
    },
    /// Averaged coefficients on a grid. CSV columns: x, b_bar, a_bar, sigma_bar.
    Averaged {
        /// `start:stop:step` or a comma list.
        #[arg(long, allow_negative_numbers = true)]
        x_grid: String,
    },
    /// Power-law fit of distances between invariant measures. CSV columns: x1, x2, distance, bound.
    Holder {
        #[arg(long, value_enum)]
        metric: MetricArg,
        /// `x1,x2;x1,x2;...`
        #[arg(long, allow_negative_numbers = true)]
        pairs: String,
        /// Reference exponent of the power regime.
        #[arg(long, allow_negative_numbers = true)]
        exponent: f64,
        /// Crossover scale: the bound is linear for separations of at least 2 kappa.
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
    },
    /// Weak convergence over an epsilon ladder. CSV columns: epsilon, dt, w1_terminal, noise_floor.
    Converge {
        #[arg(long, default_value = "0.1,0.03,0.01")]
        epsilons: String,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Mean-square failure on `pure-fast-l2`. CSV columns: epsilon, dt, mean_square_gap,
    /// mc_standard_error, predicted_limit, relative_error, w1_terminal, noise_floor.
    L2fail {
        #[arg(long, default_value = "0.1,0.03,0.01")]
        epsilons: String,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Decay to stationarity. CSV columns: t, tv, w1_coupling.
    Decay {
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, allow_negative_numbers = true)]
        y0: f64,
        /// Second start of the synchronous coupling.
        #[arg(long, allow_negative_numbers = true)]
        y1: f64,
        #[arg(long, default_value = "0.5,1,2,4,8")]
        times: String,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Re-run a manifest; the artifact is byte-identical to the original.
    Replay {
        #[arg(long, allow_negative_numbers = true)]
        manifest: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Numerical(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownModel { .. }
            | Error::Config(_)
            | Error::Input(_)
            | Error::Domain { .. }
            | Error::InvalidDomain(_) => Failure::Usage(e.to_string()),
            other => Failure::Numerical(other),
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::UnknownModel { .. } => "unknown-model",
        Error::Domain { .. } => "domain",
        Error::InvalidDomain(_) => "invalid-domain",
        Error::Config(_) => "config",
        Error::BlowUp { .. } => "blow-up",
        Error::Degenerate(_) => "degenerate",
        Error::NotPositiveRecurrent { .. } => "not-positive-recurrent",
        Error::InfiniteMoment { .. } => "infinite-moment",
        Error::InfiniteAverage { .. } => "infinite-average",
        Error::Resolution { .. } => "resolution",
        Error::Conservation { .. } => "conservation",
        Error::Node { .. } => "node",
        Error::Input(_) => "input",
    }
}

fn model_name(cli: &Cli) -> Result<String, Failure> {
    let name = cli.model.clone().ok_or_else(|| Failure::Usage("this subcommand needs --model <name>".into()))?;
    get_builtin(&name)?;
    Ok(name)
}

fn sim_config(cli: &Cli, model: &str, args: &SimArgs) -> Result<SimConfig, Failure> {
    let mut cfg = SimConfig::for_model(&get_builtin(model)?);
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        config::apply_toml(&mut cfg, &text).map_err(Failure::Usage)?;
    }
    if let Some(n) = args.n_paths {
        cfg.n_paths = n;
    }
    if let Some(t) = args.horizon {
        cfg.horizon = t;
    }
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    if let Some(x0) = args.x0 {
        cfg.x0 = x0;
    }
    cfg.seed = cli.seed;
    Ok(cfg)
}

fn build(cli: &Cli) -> Result<Command, Failure> {
    let usage = Failure::Usage;
    Ok(match &cli.command {
        Sub::ListModels => Command::ListModels,
        Sub::Stationary { x, points } => Command::Stationary { model: model_name(cli)?, x: *x, points: *points },
        Sub::Classify { x } => Command::Classify { model: model_name(cli)?, x: *x },
        Sub::Distance { metric, x1, x2 } => {
            Command::Distance { model: model_name(cli)?, metric: (*metric).into(), x1: *x1, x2: *x2 }
        }
        Sub::Averaged { x_grid } => {
            Command::Averaged { model: model_name(cli)?, x_grid: config::parse_grid(x_grid).map_err(usage)? }
        }
        Sub::Holder { metric, pairs, exponent, kappa } => Command::Holder {
            model: model_name(cli)?,
            metric: (*metric).into(),
            pairs: config::parse_pairs(pairs).map_err(usage)?,
            exponent: *exponent,
            kappa: *kappa,
        },
        Sub::Converge { epsilons, sim } => {
            let model = model_name(cli)?;
            let sim = sim_config(cli, &model, sim)?;
            Command::Converge { model, epsilons: config::parse_list(epsilons).map_err(usage)?, sim }
        }
        Sub::L2fail { epsilons, sim } => {
            let sim = sim_config(cli, "pure-fast-l2", sim)?;
            Command::L2Fail { epsilons: config::parse_list(epsilons).map_err(usage)?, sim }
        }
        Sub::Decay { x, y0, y1, times, sim } => {
            let model = model_name(cli)?;
            let sim = sim_config(cli, &model, sim)?;
            Command::Decay { model, x: *x, y0: *y0, y1: *y1, times: config::parse_list(times).map_err(usage)?, sim }
        }
        Sub::Replay { .. } => unreachable!("handled separately"),
    })
}

fn manifest_path(out: Option<&Path>, command: &str) -> PathBuf {
    match out {
        Some(p) => {
            let mut s = p.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
        None => PathBuf::from(format!("{command}.manifest.json")),
    }
}

fn write_artifact(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Failure::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes).map_err(|e| Failure::Io(e.to_string()))
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let (cmd, format, seed) = match &cli.command {
        Sub::Replay { manifest } => {
            let text = std::fs::read_to_string(manifest)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", manifest.display())))?;
            let m: Manifest = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("bad manifest: {e}")))?;
            (m.to_command()?, m.format, m.seed)
        }
        _ => {
            let format = match cli.format {
                FormatArg::Json => Format::Json,
                FormatArg::Csv => Format::Csv,
            };
            (build(cli)?, format, cli.seed)
        }
    };
    let job = || execute(&cmd, format, exec);
    let bytes = match cli.threads {
        Some(0) => return Err(Failure::Usage("--threads must be positive".into())),
        Some(n) => with_threads(n, job),
        None => job(),
    }?;
    write_artifact(cli.out.as_deref(), &bytes)?;
    if !matches!(cli.command, Sub::Replay { .. }) {
        let manifest = Manifest::new(&cmd, seed, format);
        let path = manifest_path(cli.out.as_deref(), cmd.name());
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            let diag = json!({ "error": error_kind(&e), "message": e.to_string() });
            eprintln!("{diag}");
            ExitCode::from(3)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
