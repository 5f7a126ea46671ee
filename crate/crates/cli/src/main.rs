//! `voi`: regenerate figure data and run the verification suites.

mod commands;
mod output;
mod params;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use output::{Dataset, Format};
use params::{
    ConfigFile, DeeperParams, Family, KlParams, SingletonParams, SweepParams, VerifyParams,
    VersusParams,
};

#[derive(Debug, Parser)]
#[command(
    name = "voi",
    version,
    about = "Optimal sampling and the value of prior knowledge"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte-Carlo draws per configuration.
    #[arg(long, global = true)]
    draws: Option<usize>,
    /// TOML experiment file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "VOI_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Divergence from the flat prior against the number of states.
    FigKl(KlArgs),
    /// Value of J-deep knowledge against J.
    FigDeeper(DeeperArgs),
    /// Minimum sample size against J for fixed target values.
    FigVersus(VersusArgs),
    /// Value of a single observation as its direction rotates.
    FigSingleton(SingletonArgs),
    /// Run the numerical verification suites.
    Verify(VerifyArgs),
    /// Knowledge value of one prior family over a grid of precisions and depths.
    Sweep(SweepArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::FigKl(_) => "fig-kl",
            Command::FigDeeper(_) => "fig-deeper",
            Command::FigVersus(_) => "fig-versus",
            Command::FigSingleton(_) => "fig-singleton",
            Command::Verify(_) => "verify",
            Command::Sweep(_) => "sweep",
        }
    }
}

#[derive(Debug, Args)]
struct KlArgs {
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    sigma_m2: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    rho_grid: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct DeeperArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<f64>>,
    #[arg(long)]
    sigma_u2: Option<f64>,
}

#[derive(Debug, Args)]
struct VersusArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Target values `π₀`.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<f64>>,
    #[arg(long)]
    sigma_u2: Option<f64>,
}

#[derive(Debug, Args)]
struct SingletonArgs {
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    sigma_m2: Option<f64>,
    #[arg(long)]
    sigma_u2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t_max: Option<f64>,
    #[arg(long)]
    t_step: Option<f64>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Suites to run: bounds, waterfill, mc, mps, thresholds or all.
    #[arg(value_delimiter = ',')]
    suites: Vec<String>,
    /// Report passing cases too.
    #[arg(long)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    nu2: Option<f64>,
    #[arg(long)]
    sigma_m2: Option<f64>,
    #[arg(long)]
    sigma_u2: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<usize>>,
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

/// What a command produced.
enum Outcome {
    Data(Dataset),
    Verified { passed: bool, text: String },
}

fn execute(cli: &Cli, cfg: &ConfigFile, format: Format) -> Result<Outcome> {
    let defaults = voi_core::suites::SuiteOptions::default();
    let seed = cli.seed.or(cfg.seed).unwrap_or(defaults.seed);
    let draws = cli.draws.or(cfg.draws).unwrap_or(defaults.draws);
    let data = match &cli.command {
        Command::FigKl(a) => {
            let mut p: KlParams = cfg.parameters()?;
            set(&mut p.k_max, a.k_max);
            set(&mut p.sigma_m2, a.sigma_m2);
            set(&mut p.rho_grid, a.rho_grid.clone());
            p.validate()?;
            commands::fig_kl(&p)?
        }
        Command::FigDeeper(a) => {
            let mut p: DeeperParams = cfg.parameters()?;
            set(&mut p.k, a.k);
            set(&mut p.alphas, a.alphas.clone());
            set(&mut p.n_list, a.n_list.clone());
            set(&mut p.sigma_u2, a.sigma_u2);
            p.validate()?;
            commands::fig_deeper(&p)?
        }
        Command::FigVersus(a) => {
            let mut p: VersusParams = cfg.parameters()?;
            set(&mut p.k, a.k);
            set(&mut p.alphas, a.alphas.clone());
            set(&mut p.targets, a.targets.clone());
            set(&mut p.sigma_u2, a.sigma_u2);
            p.validate()?;
            commands::fig_versus(&p)?
        }
        Command::FigSingleton(a) => {
            let mut p: SingletonParams = cfg.parameters()?;
            set(&mut p.rho, a.rho);
            set(&mut p.sigma_m2, a.sigma_m2);
            set(&mut p.sigma_u2, a.sigma_u2);
            set(&mut p.t_min, a.t_min);
            set(&mut p.t_max, a.t_max);
            set(&mut p.t_step, a.t_step);
            p.validate()?;
            commands::fig_singleton(&p)?
        }
        Command::Sweep(a) => {
            let mut p: SweepParams = cfg.parameters()?;
            set(&mut p.family, a.family);
            set(&mut p.k, a.k);
            set(&mut p.rho, a.rho);
            set(&mut p.alpha, a.alpha);
            set(&mut p.nu2, a.nu2);
            set(&mut p.sigma_m2, a.sigma_m2);
            set(&mut p.sigma_u2, a.sigma_u2);
            set(&mut p.taus, a.taus.clone());
            set(&mut p.depths, a.depths.clone());
            p.validate()?;
            commands::sweep(&p)?
        }
        Command::Verify(a) => {
            let mut p: VerifyParams = cfg.parameters()?;
            if !a.suites.is_empty() {
                p.suites = a.suites.clone();
            }
            p.verbose |= a.verbose;
            if draws == 0 {
                bail!(params::ConfigError("draws must be positive".into()));
            }
            let v = commands::verify(&p, seed, draws, format)?;
            return Ok(Outcome::Verified {
                passed: v.passed,
                text: v.text,
            });
        }
    };
    Ok(Outcome::Data(data))
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(name) = &cfg.command {
        if name != cli.command.name() {
            bail!(
                "config is for `{name}` but `{}` was requested",
                cli.command.name()
            );
        }
    }
    if let Some(threads) = cli.threads {
        if threads == 0 {
            bail!("VOI_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("cannot build thread pool")?;
    }
    let format = cli.format.or(cfg.format).unwrap_or(Format::Csv);
    let (passed, text) = match execute(&cli, &cfg, format)? {
        Outcome::Data(d) => (true, d.render(format)),
        Outcome::Verified { passed, text } => (passed, text),
    };
    match cli.out.as_ref().or(cfg.out.as_ref()) {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .context("cannot write to stdout")?,
    }
    Ok(passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("voi: verification failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("voi: {e:#}");
            ExitCode::from(2)
        }
    }
}
