//! Regret intervals for a proposed decision policy against the status quo
//! under unmeasured confounding.
//!
//! Exit status: 0 on success, 1 for configuration errors, 2 for data errors,
//! 3 for numeric or model-fitting failures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use policy_regret::estimation::Estimator;
use policy_regret::ErrorKind;

use crate::config::{ConfigError, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "policy-regret", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate regret intervals on a CSV dataset.
    Analyze,
    /// Draw a synthetic dataset with its oracle outcomes.
    Simulate {
        #[arg(long)]
        n: Option<usize>,
        /// `world` or `healthcare`.
        #[arg(long)]
        generator: Option<String>,
    },
    /// Coverage of the oracle regret across sample sizes.
    Coverage {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        n_grid: Option<Vec<usize>>,
    },
    /// Coverage and widths along a world-parameter grid.
    Sweep {
        /// `lambda_star`, `beta0` or `beta1`.
        #[arg(long)]
        knob: Option<String>,
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Smallest sensitivity parameter at which each interval contains zero.
    Sensitivity {
        #[arg(long)]
        worlds: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Separation bound against measured width gaps on random fixtures.
    Separation {
        #[arg(long)]
        fixtures: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct Flags {
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// manski, msm, rosenbaum, iv, proximal_t or proximal_tw.
    #[arg(long, global = true)]
    assumption: Option<String>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    z_column: Option<String>,
    #[arg(long, global = true)]
    w_column: Option<String>,
    #[arg(long, global = true)]
    k_folds: Option<usize>,
    #[arg(long, global = true)]
    bootstrap: Option<usize>,
    /// plugin or doubly_robust.
    #[arg(long, global = true)]
    estimator: Option<String>,
    /// Comma-separated: accuracy, tpr, fpr, ppv, npv, utility:u00,u01,u10,u11,
    /// cost:<ratio>.
    #[arg(long, global = true, num_args = 1..)]
    measures: Option<Vec<String>>,
    #[arg(long, global = true)]
    group_column: Option<String>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Simulate { .. } => "simulate",
            Command::Coverage { .. } => "coverage",
            Command::Sweep { .. } => "sweep",
            Command::Sensitivity { .. } => "sensitivity",
            Command::Separation { .. } => "separation",
        }
    }
}

fn config_error(msg: String) -> anyhow::Error {
    ConfigError(msg).into()
}

fn build_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut config = match &cli.flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let f = &cli.flags;
    let estimator = match f.estimator.as_deref() {
        None => None,
        Some("plugin") => Some(Estimator::Plugin),
        Some("doubly_robust") => Some(Estimator::DoublyRobust),
        Some(other) => return Err(config_error(format!("unknown estimator `{other}`"))),
    };
    let overrides = Overrides {
        input: f.input.clone(),
        out: f.out.clone(),
        seed: f.seed,
        jobs: f.jobs,
        assumption: f.assumption.clone(),
        lambda: f.lambda,
        gamma: f.gamma,
        z_column: f.z_column.clone(),
        w_column: f.w_column.clone(),
        k_folds: f.k_folds,
        bootstrap: f.bootstrap,
        estimator,
        measures: f.measures.clone(),
        group_column: f.group_column.clone(),
    };
    config.apply(&overrides, cli.command.name())?;
    match &cli.command {
        Command::Analyze => {}
        Command::Simulate { n, generator } => {
            if let Some(n) = n {
                config.simulate.n = *n;
            }
            if let Some(g) = generator {
                config.simulate.generator = match g.as_str() {
                    "world" => config::Generator::World,
                    "healthcare" => config::Generator::Healthcare,
                    other => return Err(config_error(format!("unknown generator `{other}`"))),
                };
            }
        }
        Command::Coverage { trials, n_grid } => {
            if let Some(t) = trials {
                config.coverage.trials = *t;
            }
            if let Some(g) = n_grid {
                config.coverage.n_grid = g.clone();
            }
        }
        Command::Sweep { knob, grid, n, trials } => {
            if let Some(k) = knob {
                config.sweep.knob = k.parse().map_err(|e: policy_regret::Error| config_error(e.to_string()))?;
            }
            if let Some(g) = grid {
                config.sweep.grid = g.clone();
            }
            if let Some(n) = n {
                config.sweep.n = *n;
            }
            if let Some(t) = trials {
                config.sweep.trials = *t;
            }
        }
        Command::Sensitivity { worlds, n } => {
            if let Some(w) = worlds {
                config.sensitivity.worlds = *w;
            }
            if let Some(n) = n {
                config.sensitivity.n = *n;
            }
        }
        Command::Separation { fixtures } => {
            if let Some(k) = fixtures {
                config.separation.n_fixtures = *k;
            }
        }
    }
    config.validate(cli.command.name())?;
    Ok(config)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let config = build_config(cli)?;
    if let Some(jobs) = config.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| config_error(format!("cannot start {jobs} workers: {e}")))?;
    }
    match cli.command {
        Command::Analyze => commands::analyze(&config),
        Command::Simulate { .. } => commands::simulate(&config),
        Command::Coverage { .. } => commands::coverage(&config),
        Command::Sweep { .. } => commands::sweep(&config),
        Command::Sensitivity { .. } => commands::sensitivity(&config),
        Command::Separation { .. } => commands::separation(&config),
    }
}

fn exit_status(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<policy_regret::Error>() {
            return match e.kind() {
                ErrorKind::Config => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            for cause in err.chain().skip(1) {
                eprintln!("  caused by: {cause}");
            }
            eprintln!("  command: {}", cli.command.name());
            ExitCode::from(exit_status(&err))
        }
    }
}
