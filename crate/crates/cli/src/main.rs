mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::{Common, ProfileArgs, VerdictGrid};

/// Input that fails validation; maps to exit code 1.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Parser)]
#[command(name = "nlslab", version, about = "Soliton stability toolkit for 1D nonlinear Schrödinger equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct IoArgs {
    /// TOML config; built-in defaults when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(short, long, default_value = "out")]
    output: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Ground-state profile on the configured grid
    Profile {
        #[command(flatten)]
        io: IoArgs,
        /// Pure-power exponent, overriding the configured nonlinearity
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Grid half-width
        #[arg(long = "L")]
        half_width: Option<f64>,
        /// Grid points
        #[arg(long = "N")]
        points: Option<usize>,
    },
    /// Discrete spectrum and spectral-hypothesis verdict
    Spectrum {
        #[command(flatten)]
        io: IoArgs,
        /// Skip the N -> 2N / L -> L+10 stability filter
        #[arg(long)]
        no_refine: bool,
    },
    /// Contour evaluation of H^{s/2} on a probe spinor
    Fracpow {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        s: Option<f64>,
    },
    /// Commutator identity and B(s) consistency at one time
    Commutator {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Perturbed-soliton stability run
    Simulate {
        #[command(flatten)]
        io: IoArgs,
        /// Do not attach a spectral verdict
        #[arg(long)]
        skip_verdict: bool,
        /// Half-width of the grid used for the spectral verdict
        #[arg(long, default_value_t = 25.0)]
        verdict_l: f64,
        #[arg(long, default_value_t = 256)]
        verdict_n: usize,
    },
    /// Validate a config, or print the defaults
    Check {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        print_defaults: bool,
    },
}

fn common(io: IoArgs, subcommand: &'static str) -> Common {
    Common { config_path: io.config, output: io.output, subcommand }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Profile { io, p, alpha, half_width, points } => {
            commands::profile(&common(io, "profile"), &ProfileArgs { p, alpha, half_width, points })
        }
        Command::Spectrum { io, no_refine } => commands::spectrum(&common(io, "spectrum"), !no_refine),
        Command::Fracpow { io, s } => commands::fracpow(&common(io, "fracpow"), s),
        Command::Commutator { io, s, t, dt } => commands::commutator(&common(io, "commutator"), s, t, dt),
        Command::Simulate { io, skip_verdict, verdict_l, verdict_n } => commands::simulate(
            &common(io, "simulate"),
            &VerdictGrid { skip: skip_verdict, half_width: verdict_l, points: verdict_n },
        ),
        Command::Check { io, print_defaults } => commands::check(&common(io, "check"), print_defaults),
    }
}

/// 1 for invalid input, 2 for numerical failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Invalid>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<nlslab::Error>() {
            return if e.is_validation() { 1 } else { 2 };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(64),
            };
        }
    };
    if let Some(n) = std::env::var("NLSLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        nlslab::par::set_threads(n);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
