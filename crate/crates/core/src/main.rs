use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use photostat::Error;

mod commands;

/// Simulate and analyse photocount statistics of triggered single-photon sources.
#[derive(Debug, Parser)]
#[command(name = "photostat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a timetag file, ground-truth sidecar and run manifest.
    Simulate(SimulateArgs),
    /// Photocount statistics, V_W trace, Q(T) curve and start-stop histogram.
    Analyze(AnalyzeArgs),
    /// Fit a saturation ramp or a Q(T) curve.
    Fit {
        #[command(subcommand)]
        kind: FitKind,
    },
    /// Start-stop delay histogram only.
    G2(G2Args),
    /// Convert a timetag file between binary and CSV (chosen by extension).
    Convert { input: PathBuf, output: PathBuf },
    /// Print a configuration preset.
    Preset {
        #[arg(value_parser = ["reference"])]
        name: String,
    },
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated seeds; one output set per seed.
    #[arg(long, value_delimiter = ',', conflicts_with = "seed")]
    seeds: Vec<u64>,
    #[arg(long)]
    pulses: Option<u64>,
    /// Timetag output; `.csv` selects the text format.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    input: PathBuf,
    /// Window size W for the V_W trace.
    #[arg(long, default_value_t = 100)]
    window: usize,
    /// Comma-separated window lengths k for Q(kτ_rep); powers of two by default.
    #[arg(long, value_delimiter = ',')]
    k_grid: Vec<u64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Radiative lifetime in seconds, if absent from the file metadata.
    #[arg(long)]
    rad_lifetime: Option<f64>,
    /// Late-photon cutoff in radiative lifetimes.
    #[arg(long)]
    reject_mult: Option<f64>,
    #[command(flatten)]
    histogram: HistogramArgs,
}

#[derive(Debug, Args)]
struct HistogramArgs {
    /// Histogram bin width in seconds.
    #[arg(long, default_value_t = 1e-9)]
    bin_width: f64,
    /// Histogram half-span in seconds.
    #[arg(long, default_value_t = 2e-6)]
    span: f64,
}

#[derive(Debug, Args)]
struct G2Args {
    input: PathBuf,
    #[command(flatten)]
    histogram: HistogramArgs,
    /// Histogram CSV output; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum FitKind {
    /// Two-step fit of rate versus pulse energy.
    Sat {
        input: PathBuf,
        /// τ_p/τ_rad held fixed.
        #[arg(long)]
        duration_ratio: Option<f64>,
        #[arg(long)]
        reject_sigmas: Option<f64>,
        #[arg(long)]
        reject_fraction: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weighted fit of Q(T) to the blinking model at fixed efficiency.
    Qcurve {
        input: PathBuf,
        #[arg(long)]
        efficiency: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter { .. } | Error::Config { .. } | Error::Inversion(_) => 2,
        Error::Format { .. } | Error::OutOfOrder { .. } | Error::Io(_) => 3,
        Error::Fit { .. } | Error::DegenerateInput(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a.config, a.seed, &a.seeds, a.pulses, &a.out),
        Command::Analyze(a) => commands::analyze(&commands::AnalyzeOptions {
            input: a.input,
            window: a.window,
            k_grid: a.k_grid,
            out_dir: a.out_dir,
            rad_lifetime: a.rad_lifetime,
            reject_mult: a.reject_mult,
            bin_width: a.histogram.bin_width,
            span: a.histogram.span,
        }),
        Command::Fit { kind } => match kind {
            FitKind::Sat {
                input,
                duration_ratio,
                reject_sigmas,
                reject_fraction,
                out,
            } => commands::fit_sat(&input, duration_ratio, reject_sigmas, reject_fraction, out.as_deref()),
            FitKind::Qcurve { input, efficiency, out } => commands::fit_qcurve(&input, efficiency, out.as_deref()),
        },
        Command::G2(a) => commands::g2(&a.input, a.histogram.bin_width, a.histogram.span, a.out.as_deref()),
        Command::Convert { input, output } => commands::convert(&input, &output),
        Command::Preset { .. } => {
            print!("{}", photostat::io::config::reference_config_text());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if let Error::Fit { diagnostics, .. } = &err {
                eprintln!("  {diagnostics}");
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
