//! Seismic monitoring pipeline CLI.
//!
//! Subcommands cover the full workflow: synthesize or calibrate ground
//! motion, choose sensor floors, optimize the observer feedback gain,
//! reconstruct the response from measured accelerations, and classify
//! building performance. Every command writes a run manifest; identical
//! inputs and seed give identical output bytes.
//!
//! Log verbosity comes from the RUST_LOG environment variable only.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use seismon::filter::FilterSpec;
use seismon::observer::Objective;
use seismon::Error;

#[derive(Parser)]
#[command(
    name = "seismon",
    version,
    about = "Seismic response reconstruction and performance classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    /// Trace of the displacement-error covariance.
    TraceP,
    /// Sum of the drift-error variances.
    TracePIsd,
}

impl From<ObjectiveArg> for Objective {
    fn from(a: ObjectiveArg) -> Objective {
        match a {
            ObjectiveArg::TraceP => Objective::TraceP,
            ObjectiveArg::TracePIsd => Objective::TracePIsd,
        }
    }
}

#[derive(Args)]
struct FilterArgs {
    /// High-pass Butterworth order.
    #[arg(long, default_value_t = 4)]
    filter_order: usize,
    /// High-pass cutoff (Hz).
    #[arg(long, default_value_t = 0.1)]
    filter_cutoff_hz: f64,
}

impl FilterArgs {
    fn spec(&self) -> FilterSpec {
        FilterSpec {
            order: self.filter_order,
            cutoff_hz: self.filter_cutoff_hz,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a ground-acceleration record from a spectral description.
    GenerateGm {
        /// Ground-motion spec JSON.
        #[arg(long)]
        gm_spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Calibrate the spectral intensity against a measured record.
    CalibrateGm {
        #[arg(long)]
        gm_spec: PathBuf,
        /// Measured ground-acceleration CSV.
        #[arg(long)]
        record: PathBuf,
        /// Required fraction of spectrum bins inside the ensemble band.
        #[arg(long)]
        target_coverage: Option<f64>,
        /// Calibration ensemble size.
        #[arg(long)]
        ensemble: Option<usize>,
        #[arg(long, default_value_t = 0x5e15)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Choose sensor floors by minimizing the estimation-error objective.
    Place {
        /// Placement problem JSON (model, candidates, budget, noise).
        #[arg(long)]
        problem: PathBuf,
        /// Greedy forward selection instead of exhaustive search.
        #[arg(long)]
        greedy: bool,
        /// Override the problem's objective.
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
        /// Override the drift-variance cap, e.g. 2.5e-7m2 or 1e-5ratio.
        #[arg(long)]
        sigma2_max: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize the observer damper gains for a fixed sensor layout.
    OptimizeGain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        gm_spec: PathBuf,
        /// Measurement-noise spectral density, (m/s)^2*s, two-sided in rad/s.
        #[arg(long)]
        phi_vv: f64,
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct the full response from measured story accelerations.
    Reconstruct {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        layout: PathBuf,
        /// Feedback gain JSON ({"e_diag": [...]}).
        #[arg(long)]
        gain: PathBuf,
        /// Glob over acceleration CSVs, one per measured story.
        #[arg(long)]
        records: String,
        /// Ground-motion spec for the design-stage covariance.
        #[arg(long)]
        gm_spec: Option<PathBuf>,
        /// Measurement-noise spectral density for the covariance.
        #[arg(long)]
        phi_vv: Option<f64>,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify performance from drift estimates or injected exceedance.
    Classify {
        /// Drift estimate JSON ({"mean_isd": [...], "sigma_isd": [...]}).
        #[arg(long)]
        drifts: Option<PathBuf>,
        /// Per-story exceedance JSON ([{"io":..,"ls":..,"cp":..}, ...]).
        #[arg(long)]
        story_exceedance: Option<PathBuf>,
        /// Thresholds JSON; defaults to the built-in drift limits.
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// Renormalize the drift Gaussian to non-negative values.
        #[arg(long)]
        truncate_at_zero: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct, estimate drifts, and classify in one run.
    Report {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        gain: PathBuf,
        #[arg(long)]
        records: String,
        #[arg(long)]
        gm_spec: PathBuf,
        #[arg(long)]
        phi_vv: f64,
        #[arg(long)]
        thresholds: Option<PathBuf>,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Exit codes by failure category: 2 bad input, 3 unit mismatch,
/// 4 numerical failure, 5 calibration failure, 6 enumeration cap.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Validation(_) | Error::Parse { .. } | Error::Io(_) | Error::Json(_) => 2,
        Error::UnitMismatch { .. } => 3,
        Error::NonConvergence { .. }
        | Error::Diverged { .. }
        | Error::Singular(_)
        | Error::OptimizerInit(_) => 4,
        Error::CalibrationFailure { .. } => 5,
        Error::EnumerationCap { .. } => 6,
    }
}

fn run(cli: Cli) -> seismon::Result<()> {
    match cli.command {
        Command::GenerateGm { gm_spec, seed, out } => {
            commands::generate_gm(&commands::GenerateGm { gm_spec, seed, out })
        }
        Command::CalibrateGm {
            gm_spec,
            record,
            target_coverage,
            ensemble,
            seed,
            out,
        } => commands::calibrate_gm(&commands::CalibrateGm {
            gm_spec,
            record,
            target_coverage,
            ensemble,
            seed,
            out,
        }),
        Command::Place {
            problem,
            greedy,
            objective,
            sigma2_max,
            out,
        } => {
            let sigma2_max = sigma2_max
                .as_deref()
                .map(commands::parse_sigma2_max)
                .transpose()?;
            commands::place(&commands::Place {
                problem,
                greedy,
                objective: objective.map(Into::into),
                sigma2_max,
                out,
            })
        }
        Command::OptimizeGain {
            model,
            layout,
            gm_spec,
            phi_vv,
            objective,
            out,
        } => commands::optimize_gain_cmd(&commands::OptimizeGain {
            model,
            layout,
            gm_spec,
            phi_vv,
            objective: objective.map(Into::into),
            out,
        }),
        Command::Reconstruct {
            model,
            layout,
            gain,
            records,
            gm_spec,
            phi_vv,
            filter,
            out,
        } => commands::reconstruct(&commands::Reconstruct {
            model,
            layout,
            gain,
            records,
            gm_spec,
            phi_vv,
            filter: filter.spec(),
            out,
        }),
        Command::Classify {
            drifts,
            story_exceedance,
            thresholds,
            truncate_at_zero,
            out,
        } => commands::classify(&commands::Classify {
            drifts,
            story_exceedance,
            thresholds,
            truncate_at_zero,
            out,
        }),
        Command::Report {
            model,
            layout,
            gain,
            records,
            gm_spec,
            phi_vv,
            thresholds,
            filter,
            out,
        } => commands::report(&commands::Report {
            reconstruct: commands::Reconstruct {
                model,
                layout,
                gain,
                records,
                gm_spec: Some(gm_spec),
                phi_vv: Some(phi_vv),
                filter: filter.spec(),
                out,
            },
            thresholds,
        }),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
