mod config;
mod failure;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Command, Grid, JobConfig};
use failure::Failure;

/// Pseudomode toolkit: effective densities, kernel fits, inversion, tilings and transmission.
#[derive(Parser, Debug)]
#[command(name = "pseudomode", version)]
struct Cli {
    /// TOML job description; flags given here override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV artifacts and report.json.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Option<Sub>,
}

#[derive(Args, Debug, Default)]
struct OmegaArgs {
    #[arg(long, allow_hyphen_values = true)]
    omega_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    omega_max: Option<f64>,
    #[arg(long)]
    omega_count: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Effective spectral density of a pseudomode bath.
    Jeff {
        #[arg(long)]
        bath: Option<PathBuf>,
        #[command(flatten)]
        omega: OmegaArgs,
    },
    /// Memory kernel of a bath (or of the configured model).
    Kernel {
        #[arg(long)]
        bath: Option<PathBuf>,
        #[arg(long)]
        model_csv: Option<PathBuf>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        t_count: Option<usize>,
    },
    /// Exponential-sum fit of a model's memory kernel.
    Fit {
        #[arg(long)]
        model_csv: Option<PathBuf>,
        #[arg(long)]
        modes: Option<usize>,
        /// Registered fit strategy (prony, diagonal-nm).
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        dense_windows: bool,
        #[command(flatten)]
        omega: OmegaArgs,
    },
    /// Pseudomode parameters reproducing an exponential fit.
    Invert {
        #[arg(long)]
        fit_table: Option<PathBuf>,
        /// Positivity search (random, nelder-mead, none).
        #[arg(long)]
        search: Option<String>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Many-mode tiling of a model.
    Tile {
        #[arg(long)]
        model_csv: Option<PathBuf>,
        /// Registered tiling (lorentzian, squared-lorentzian).
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        omega: OmegaArgs,
    },
    /// Infinite-tiling error factors.
    Eta {
        #[arg(long)]
        which: Option<u8>,
        #[arg(long, num_args = 1..)]
        r: Vec<f64>,
        #[arg(long)]
        cutoff: Option<usize>,
    },
    /// Transmission functions of a scattering setup.
    Transmit {
        #[arg(long)]
        setup: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[command(flatten)]
        omega: OmegaArgs,
    },
    /// Prony fit against the diagonal baseline for the semicircle.
    ReproduceFig2 {
        #[arg(long)]
        modes: Option<usize>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Lorentzian tiling of the semicircle.
    ReproduceFig3 {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Both tilings next to their infinite-mode envelopes.
    ReproduceFig4 {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        points: Option<usize>,
    },
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

fn apply_omega(cfg: &mut JobConfig, o: OmegaArgs) -> Result<(), Failure> {
    if o.omega_min.is_none() && o.omega_max.is_none() && o.omega_count.is_none() {
        return Ok(());
    }
    let base = cfg.omega.unwrap_or(Grid { min: f64::NAN, max: f64::NAN, count: 1001 });
    let g = Grid {
        min: o.omega_min.unwrap_or(base.min),
        max: o.omega_max.unwrap_or(base.max),
        count: o.omega_count.unwrap_or(base.count),
    };
    if g.min.is_nan() || g.max.is_nan() {
        return Err(Failure::config("--omega-min and --omega-max must be given together"));
    }
    cfg.omega = Some(g);
    Ok(())
}

fn build_config(cli: Cli) -> Result<JobConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => JobConfig::load(p)?,
        None => JobConfig::default(),
    };
    set_opt(&mut cfg.output, cli.out);
    set_opt(&mut cfg.threads, cli.threads);
    set_opt(&mut cfg.seed, cli.seed);
    let Some(sub) = cli.command else {
        return Ok(cfg);
    };
    let command = match sub {
        Sub::Jeff { bath, omega } => {
            set_opt(&mut cfg.inputs.bath, bath);
            apply_omega(&mut cfg, omega)?;
            Command::Jeff
        }
        Sub::Kernel { bath, model_csv, t_max, t_count } => {
            set_opt(&mut cfg.inputs.bath, bath);
            set_opt(&mut cfg.inputs.model_csv, model_csv);
            if t_max.is_some() || t_count.is_some() {
                let base = cfg.time.unwrap_or(Grid { min: 0.0, max: 20.0, count: 401 });
                cfg.time = Some(Grid { min: base.min, max: t_max.unwrap_or(base.max), count: t_count.unwrap_or(base.count) });
            }
            Command::Kernel
        }
        Sub::Fit { model_csv, modes, strategy, dense_windows, omega } => {
            set_opt(&mut cfg.inputs.model_csv, model_csv);
            set(&mut cfg.fit.modes, modes);
            set(&mut cfg.fit.strategy, strategy);
            cfg.fit.dense_windows |= dense_windows;
            apply_omega(&mut cfg, omega)?;
            Command::Fit
        }
        Sub::Invert { fit_table, search, budget } => {
            set_opt(&mut cfg.inputs.fit_table, fit_table);
            set(&mut cfg.invert.search, search);
            set(&mut cfg.invert.budget, budget);
            Command::Invert
        }
        Sub::Tile { model_csv, variant, n, omega } => {
            set_opt(&mut cfg.inputs.model_csv, model_csv);
            set(&mut cfg.tile.variant, variant);
            set(&mut cfg.tile.n, n);
            apply_omega(&mut cfg, omega)?;
            Command::Tile
        }
        Sub::Eta { which, r, cutoff } => {
            set(&mut cfg.eta.which, which);
            if !r.is_empty() {
                cfg.eta.r = r;
            }
            set(&mut cfg.eta.cutoff, cutoff);
            Command::Eta
        }
        Sub::Transmit { setup, reference, omega } => {
            set_opt(&mut cfg.inputs.setup, setup);
            set_opt(&mut cfg.inputs.reference, reference);
            apply_omega(&mut cfg, omega)?;
            Command::Transmit
        }
        Sub::ReproduceFig2 { modes, points } => {
            set(&mut cfg.figure.modes, modes);
            set(&mut cfg.figure.points, points);
            Command::ReproduceFig2
        }
        Sub::ReproduceFig3 { n, points } => {
            set_opt(&mut cfg.figure.n, n);
            set(&mut cfg.figure.points, points);
            Command::ReproduceFig3
        }
        Sub::ReproduceFig4 { n, points } => {
            set_opt(&mut cfg.figure.n, n);
            set(&mut cfg.figure.points, points);
            Command::ReproduceFig4
        }
    };
    cfg.command = Some(command);
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build_config(cli).and_then(|cfg| {
        cfg.validate()?;
        if let Some(n) = cfg.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::config(format!("thread pool: {e}")))?;
        }
        run::run(&cfg)
    });
    match result {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
