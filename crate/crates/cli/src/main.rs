//! `equicantor` command-line driver.
//!
//! Exit status: 0 on success, 1 when a run is infeasible or one of its
//! checks fails, 2 on usage errors.

mod commands;
mod config;
mod export;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Settings;

/// Misuse of the tool: bad flags, bad config, unusable output directory.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(
    name = "equicantor",
    version,
    about = "Cantor sets with flattened logarithmic potential"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Model {
    /// Spacing ceiling a.
    #[arg(long)]
    a: Option<f64>,
    /// Contraction ratio r.
    #[arg(long)]
    r: Option<f64>,
    /// line, roots:N or ring:n.
    #[arg(long)]
    alphabet: Option<String>,
    /// Generation to build.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file of settings (or a previous run's manifest.json).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Model {
    fn settings(&self) -> Settings {
        Settings {
            a: self.a,
            r: self.r,
            alphabet: self.alphabet.clone(),
            n: self.n,
            seed: self.seed,
            ..Settings::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the construction generation by generation.
    Calibrate {
        #[command(flatten)]
        model: Model,
        /// Self-similar control with every coefficient 1.
        #[arg(long)]
        control: bool,
        /// Keep going past budget violations (the run still exits 1).
        #[arg(long)]
        force: bool,
        /// naive or hier.
        #[arg(long)]
        method: Option<String>,
        /// Per-point error budget for hierarchical summation.
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Analytic bounds on the second and third increments.
    Bounds {
        #[command(flatten)]
        model: Model,
        /// Search for the largest feasible dimension instead.
        #[arg(long)]
        search: bool,
    },
    /// Green function ratios and the small-circle estimate.
    Green {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        control: bool,
        /// Samples per scale.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Empirical Ahlfors regularity constant.
    Ahlfors {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        control: bool,
        /// Number of ball centres.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Walk-on-spheres harmonic measure against the uniform measure.
    Wos {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        control: bool,
        #[arg(long)]
        walks: Option<usize>,
        /// Attribution depth.
        #[arg(long)]
        depth: Option<usize>,
        /// Termination tolerance.
        #[arg(long)]
        eps: Option<f64>,
        /// Pole as x,y.
        #[arg(long, value_parser = parse_pole)]
        pole: Option<[f64; 2]>,
    },
    /// Plot-ready CSVs from a finished run.
    Export {
        /// Run directory to read.
        run: PathBuf,
        /// Second run (typically the control) to merge into a comparison.
        #[arg(long)]
        compare: Option<PathBuf>,
        /// Output directory (default: <run>/plots).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_pole(s: &str) -> Result<[f64; 2], String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let x = x.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let y = y.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok([x, y])
}

fn resolve(flags: Settings, config: Option<&PathBuf>) -> anyhow::Result<(Settings, Vec<String>)> {
    let mut inputs = Vec::new();
    let file = match config {
        Some(p) => {
            inputs.push(p.display().to_string());
            Settings::load(p)?
        }
        None => Settings::default(),
    };
    Ok((flags.over(Settings::from_env()?).over(file), inputs))
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Calibrate {
            model,
            control,
            force,
            method,
            budget,
        } => {
            let flags = Settings {
                control: Settings::flag(control),
                force: Settings::flag(force),
                method,
                budget,
                ..model.settings()
            };
            let (s, inputs) = resolve(flags, model.config.as_ref())?;
            commands::calibrate(s, inputs, model.out)
        }
        Command::Bounds { model, search } => {
            let flags = Settings {
                search: Settings::flag(search),
                ..model.settings()
            };
            let (s, inputs) = resolve(flags, model.config.as_ref())?;
            commands::bounds(s, inputs, model.out)
        }
        Command::Green {
            model,
            control,
            samples,
        } => {
            let flags = Settings {
                control: Settings::flag(control),
                samples,
                ..model.settings()
            };
            let (s, inputs) = resolve(flags, model.config.as_ref())?;
            commands::green(s, inputs, model.out)
        }
        Command::Ahlfors {
            model,
            control,
            samples,
        } => {
            let flags = Settings {
                control: Settings::flag(control),
                samples,
                ..model.settings()
            };
            let (s, inputs) = resolve(flags, model.config.as_ref())?;
            commands::ahlfors(s, inputs, model.out)
        }
        Command::Wos {
            model,
            control,
            walks,
            depth,
            eps,
            pole,
        } => {
            let flags = Settings {
                control: Settings::flag(control),
                walks,
                depth,
                eps,
                pole,
                ..model.settings()
            };
            let (s, inputs) = resolve(flags, model.config.as_ref())?;
            commands::wos(s, inputs, model.out)
        }
        Command::Export { run, compare, out } => export::export(&run, compare.as_deref(), out),
    }
}

fn is_usage(err: &anyhow::Error) -> bool {
    if err.downcast_ref::<UsageError>().is_some() {
        return true;
    }
    use equicantor::Error as E;
    matches!(
        err.downcast_ref::<E>(),
        Some(
            E::Usage(_)
                | E::InvalidSpec(_)
                | E::Domain(_)
                | E::Budget { .. }
                | E::MemoryGuard { .. }
                | E::ParameterOutOfRange { .. }
        )
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match config::thread_cap() {
        Ok(Some(threads)) => equicantor::par::with_threads(threads, || dispatch(cli)),
        Ok(None) => dispatch(cli),
        Err(e) => Err(e),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_usage(&err) { 2 } else { 1 })
        }
    }
}
