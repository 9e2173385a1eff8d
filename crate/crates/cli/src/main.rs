//! Benchmark CLI for the INS/DVL fusion pipeline.
//!
//! Subcommands mirror the experiment stages: `simulate` the sensor streams,
//! `train` the GP velocity front-end, `eval-velocity` for the front-end
//! RMSE-vs-bias comparison, `fuse` for one filter run, `report` for the
//! per-state RMSE tables, and `sweep` to run the whole protocol end to end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 input/IO error,
//! 4 numerical fault.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dvlnav::bench::{self, FrontendKind, FuseInputs, ReportEntry};
use dvlnav::config::ExperimentConfig;
use dvlnav::error::{Error, Result};
use dvlnav::gpr::GpModel;

#[derive(Parser)]
#[command(name = "dvlnav", version, about = "INS/DVL fusion benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config file (TOML sections; see README).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate truth, IMU, and per-bias-level beam CSVs for the `[sim]`
    /// trajectory.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Name used in the output file stems.
        #[arg(long, default_value = "sim")]
        name: String,
    },
    /// Train the GP front-end on beam CSVs and write the model file plus
    /// the NLL trace.
    Train {
        #[command(flatten)]
        common: Common,
        /// Training beam CSVs (the `beams_*_bias*.csv` outputs of simulate).
        #[arg(required = true)]
        beams: Vec<PathBuf>,
    },
    /// Compare LS and GP velocity RMSE per bias level on test beam CSVs.
    EvalVelocity {
        #[command(flatten)]
        common: Common,
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// Test beam CSVs named `*_bias<value>.csv`.
        #[arg(required = true)]
        beams: Vec<PathBuf>,
    },
    /// Run the error-state EKF over one IMU/beam stream pair.
    Fuse {
        #[command(flatten)]
        common: Common,
        /// Velocity front-end: ls, mogpr, or external.
        #[arg(long)]
        frontend: String,
        /// Use the front-end covariance as adaptive measurement noise
        /// (overrides the config when set).
        #[arg(long)]
        adaptive_r: bool,
        /// Trained model file (mogpr frontend).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Velocity CSV to replay (external frontend).
        #[arg(long)]
        external_csv: Option<PathBuf>,
        #[arg(long)]
        imu: PathBuf,
        #[arg(long)]
        beams: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Aggregate navigation logs into per-state RMSE tables and
    /// noise-over-time series.
    Report {
        #[command(flatten)]
        common: Common,
        /// Truth CSV the logs are scored against.
        #[arg(long)]
        truth: PathBuf,
        /// Navigation logs named `navlog_<traj>_<method>_bias<value>.csv`.
        #[arg(required = true)]
        navlogs: Vec<PathBuf>,
    },
    /// Run the full protocol: simulate, train, evaluate, fuse, report.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
}

/// Parses `<stem>_bias<value>.csv` into the bias level.
fn bias_from_filename(path: &Path) -> Result<f64> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::input(format!("bad file name {}", path.display())))?;
    let idx = stem
        .rfind("_bias")
        .ok_or_else(|| Error::input(format!("{}: expected a _bias<value> suffix", path.display())))?;
    stem[idx + 5..]
        .parse::<f64>()
        .map_err(|e| Error::input(format!("{}: bad bias value: {e}", path.display())))
}

/// Parses `navlog_<traj>_<method>_bias<value>.csv`.
fn navlog_parts(path: &Path) -> Result<(String, String, f64)> {
    let bias = bias_from_filename(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    let without_bias = &stem[..stem.rfind("_bias").unwrap_or(stem.len())];
    let rest = without_bias.strip_prefix("navlog_").ok_or_else(|| {
        Error::input(format!("{}: expected navlog_<traj>_<method>_bias<v>.csv", path.display()))
    })?;
    let (traj, method) = rest.rsplit_once('_').ok_or_else(|| {
        Error::input(format!("{}: expected navlog_<traj>_<method>_bias<v>.csv", path.display()))
    })?;
    Ok((traj.to_string(), method.to_string(), bias))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, name } => {
            let config = common.load()?;
            std::fs::create_dir_all(&config.output_dir)?;
            let spec = config.sim.spec(dvlnav::derive_seed(config.seed, &format!("traj/{name}")))?;
            let sim = bench::cmd_simulate(&config, &name, &spec, &config.output_dir)?;
            println!("{}", sim.truth.display());
            println!("{}", sim.imu.display());
            for (_, path) in &sim.beams {
                println!("{}", path.display());
            }
        }
        Command::Train { common, beams } => {
            let config = common.load()?;
            std::fs::create_dir_all(&config.output_dir)?;
            let model_path = config.output_dir.join("model.json");
            let trace_path = config.output_dir.join("nll_trace.csv");
            let summary = bench::cmd_train(&config, &beams, &model_path, &trace_path)?;
            println!("{}", summary.model_path.display());
            println!("{}", summary.trace_path.display());
            println!(
                "trained on {} of {} rows; nll {} -> {}",
                summary.used_rows, summary.total_rows, summary.initial_nll, summary.final_nll
            );
        }
        Command::EvalVelocity { common, model, beams } => {
            let config = common.load()?;
            std::fs::create_dir_all(&config.output_dir)?;
            let model = GpModel::load(&model)?;
            let mut levels = beams
                .iter()
                .map(|p| Ok((bias_from_filename(p)?, p.clone())))
                .collect::<Result<Vec<_>>>()?;
            levels.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite bias levels"));
            let out_csv = config.output_dir.join("velocity_rmse.csv");
            let rows = bench::cmd_eval_velocity(&config, &model, &levels, &out_csv, None)?;
            println!("{}", out_csv.display());
            for r in &rows {
                println!(
                    "bias {}: rmse_ls {:.6} rmse_mogpr {:.6} improvement {:.1}%",
                    r.bias, r.rmse_ls, r.rmse_mogpr, r.improvement_pct
                );
            }
        }
        Command::Fuse { common, frontend, adaptive_r, model, external_csv, imu, beams, truth } => {
            let config = common.load()?;
            std::fs::create_dir_all(&config.output_dir)?;
            let kind: FrontendKind = frontend.parse()?;
            let adaptive = adaptive_r || config.ekf.adaptive_r;
            let loaded_model = match (kind, &model) {
                (FrontendKind::Mogpr, Some(path)) => Some(GpModel::load(path)?),
                (FrontendKind::Mogpr, None) => {
                    return Err(Error::config("mogpr frontend requires --model"))
                }
                _ => None,
            };
            let out = config.output_dir.join(format!("navlog_{}.csv", kind.name()));
            bench::cmd_fuse(
                &config,
                kind,
                adaptive,
                &FuseInputs {
                    imu_csv: &imu,
                    beams_csv: &beams,
                    truth_csv: &truth,
                    model: loaded_model.as_ref(),
                    external_csv: external_csv.as_deref(),
                },
                &out,
            )?;
            println!("{}", out.display());
        }
        Command::Report { common, truth, navlogs } => {
            let config = common.load()?;
            std::fs::create_dir_all(&config.output_dir)?;
            let entries = navlogs
                .iter()
                .map(|p| {
                    let (trajectory, method, bias) = navlog_parts(p)?;
                    Ok(ReportEntry { trajectory, method, bias, navlog: p.clone(), truth: truth.clone() })
                })
                .collect::<Result<Vec<_>>>()?;
            let report_csv = config.output_dir.join("rmse_report.csv");
            let rows = bench::cmd_report(
                &entries,
                config.protocol.skip_seconds,
                &report_csv,
                &config.output_dir,
            )?;
            println!("{}", report_csv.display());
            for r in &rows {
                println!(
                    "{} bias {} {}: vel [{:.4} {:.4} {:.4}] m/s, ang [{:.4} {:.4} {:.4}] deg",
                    r.trajectory,
                    r.bias,
                    r.method,
                    r.rmse.velocity[0],
                    r.rmse.velocity[1],
                    r.rmse.velocity[2],
                    r.rmse.angles_deg[0],
                    r.rmse.angles_deg[1],
                    r.rmse.angles_deg[2]
                );
            }
        }
        Command::Sweep { common } => {
            let config = common.load()?;
            let summary = bench::cmd_sweep(&config)?;
            println!("model: {}", summary.model_path.display());
            for (name, rows) in &summary.eval_rows {
                println!("velocity RMSE vs bias ({name}):");
                for r in rows {
                    println!(
                        "  bias {}: ls {:.6}, mogpr {:.6}, improvement {:.1}%",
                        r.bias, r.rmse_ls, r.rmse_mogpr, r.improvement_pct
                    );
                }
            }
            println!("report: {}", summary.report_csv.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
