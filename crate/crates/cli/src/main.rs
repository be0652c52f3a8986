//! `tnlab`: runs norm, gradient-variance, polyomino and bound experiments and
//! writes plot-ready CSV or JSON files.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tnlab::gradient::LossKind;
use tnlab::polyomino::MAX_TORIC_SIZE;
use tnlab::Error;

use config::{Format, RunConfig, Size};

const EXIT_CHECK_FAILED: u8 = 3;
const EXIT_INVALID: u8 = 2;
const EXIT_RESOURCE: u8 = 4;

#[derive(Parser)]
#[command(name = "tnlab", version, about = "Random tensor-network state experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sampled norm moments against the exact partition function.
    NormStats(Common),
    /// Per-site gradient variance for each loss and lattice size.
    VarScan {
        #[command(flatten)]
        common: Common,
        /// Losses to scan; all four by default.
        #[arg(long, value_enum, value_delimiter = ',')]
        loss: Vec<LossArg>,
        /// Observable site of the local losses.
        #[arg(long, default_value_t = 0)]
        site: usize,
        #[arg(long, value_enum, default_value_t = ObservableArg::Plus)]
        observable: ObservableArg,
    },
    /// Polyomino enumeration against the series, and bridge checks on L x L tori.
    Polyomino(Common),
    /// Every closed-form bound next to the quantity it controls.
    Bounds(Common),
}

#[derive(Args)]
struct Common {
    /// Comma-separated lattice sizes, `RxC` or `L`.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<Size>,
    #[arg(long, default_value_t = 2)]
    bond_dim: usize,
    #[arg(long, default_value_t = 2)]
    phys_dim: usize,
    #[arg(long, default_value_t = 500)]
    samples: usize,
    /// Required: there is no clock-based default.
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum LossArg {
    GlobalPure,
    GlobalNormalized,
    LocalUnnormalized,
    LocalNormalized,
}

impl LossArg {
    fn stem(self) -> &'static str {
        match self {
            LossArg::GlobalPure => "global_pure",
            LossArg::GlobalNormalized => "global_normalized",
            LossArg::LocalUnnormalized => "local_unnormalized",
            LossArg::LocalNormalized => "local_normalized",
        }
    }
}

impl From<LossArg> for LossKind {
    fn from(a: LossArg) -> Self {
        match a {
            LossArg::GlobalPure => LossKind::GlobalPure,
            LossArg::GlobalNormalized => LossKind::GlobalNormalized,
            LossArg::LocalUnnormalized => LossKind::LocalUnnormalized,
            LossArg::LocalNormalized => LossKind::LocalNormalized,
        }
    }
}

/// Observable of the local losses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ObservableArg {
    /// `|+><+|`.
    Plus,
    /// `diag(1, -1, 0, ...)`.
    Traceless,
}

fn default_sizes(command: &str) -> &'static [&'static str] {
    match command {
        "norm-stats" => &["2x2", "2x3", "3x3"],
        "var-scan" => &["2x2", "2x3", "2x4", "3x3", "3x4", "4x4"],
        _ => &["2", "3", "4"],
    }
}

fn run_config(command: &str, c: Common) -> Result<RunConfig, Error> {
    let sizes = if c.sizes.is_empty() {
        default_sizes(command).iter().map(|s| s.parse().expect("default sizes parse")).collect()
    } else {
        c.sizes
    };
    if c.workers == Some(0) {
        return Err(Error::InvalidArgument("--workers must be positive".into()));
    }
    let cfg = RunConfig {
        command: command.into(),
        sizes,
        bond_dim: c.bond_dim,
        phys_dim: c.phys_dim,
        n_samples: c.samples,
        seed: c.seed,
        out_dir: c.out,
        format: c.format,
        workers: c.workers,
    };
    // caps are checked here so nothing runs on an oversized request
    match command {
        "norm-stats" | "var-scan" => {
            cfg.lattices()?;
        }
        "polyomino" => {
            cfg.tori(MAX_TORIC_SIZE, "toric enumeration")?;
        }
        _ => {
            tnlab::state::LatticeSpec::new(2, 2, cfg.bond_dim, cfg.phys_dim)?;
            cfg.tori(tnlab::bounds::MAX_EXACT_L, "exact chain comparison")?;
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<commands::Verdict, Error> {
    match cli.command {
        Command::NormStats(c) => commands::norm_stats(&setup("norm-stats", c)?),
        Command::VarScan { common, loss, site, observable } => {
            let cfg = setup("var-scan", common)?;
            let losses = if loss.is_empty() { LossArg::value_variants().to_vec() } else { loss };
            commands::var_scan(&cfg, &losses, site, observable)
        }
        Command::Polyomino(c) => commands::polyomino(&setup("polyomino", c)?),
        Command::Bounds(c) => commands::bounds(&setup("bounds", c)?),
    }
}

fn setup(name: &str, c: Common) -> Result<RunConfig, Error> {
    let cfg = run_config(name, c)?;
    if let Some(n) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Internal(format!("worker pool: {e}")))?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(v) if v.failures.is_empty() => ExitCode::SUCCESS,
        Ok(v) => {
            for f in &v.failures {
                eprintln!("check failed: {f}");
            }
            ExitCode::from(EXIT_CHECK_FAILED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::InvalidArgument(_) | Error::Shape(_) | Error::Domain(_) => EXIT_INVALID,
                Error::ResourceLimit(_) => EXIT_RESOURCE,
                _ => 1,
            })
        }
    }
}
