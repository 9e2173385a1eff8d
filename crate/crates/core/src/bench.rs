//! Experiment harness: simulate missions, train the GP front-end, sweep
//! beam-bias levels, fuse, and report per-state RMSE tables plus
//! noise-over-time series. The CLI is a thin wrapper over these functions.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::UnitQuaternion;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::ExperimentConfig;
use crate::csvio;
use crate::derive_seed;
use crate::ekf::{run_fusion, Frontend, FusionSetup, NavLogRow, NavState};
use crate::error::{Error, Result};
use crate::geometry::build_transform;
use crate::gpr::{self, Dataset, GpModel};
use crate::ls::LsEstimator;
use crate::sim::{
    generate_trajectory, synthesize_beams, synthesize_imu, BeamSample, GroundTruthSample,
    TrajectoryPattern, TrajectorySpec,
};

/// Velocity front-end selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontendKind {
    Ls,
    Mogpr,
    External,
}

impl std::str::FromStr for FrontendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ls" => Ok(Self::Ls),
            "mogpr" => Ok(Self::Mogpr),
            "external" => Ok(Self::External),
            other => Err(Error::config(format!("unknown frontend '{other}'"))),
        }
    }
}

impl FrontendKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ls => "ls",
            Self::Mogpr => "mogpr",
            Self::External => "external",
        }
    }
}

fn format_float(v: f64) -> String {
    format!("{v}")
}

pub fn truth_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("truth_{name}.csv"))
}

pub fn imu_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("imu_{name}.csv"))
}

pub fn beams_path(dir: &Path, name: &str, bias: f64) -> PathBuf {
    dir.join(format!("beams_{name}_bias{}.csv", format_float(bias)))
}

pub fn navlog_path(dir: &Path, name: &str, method: &str, bias: f64) -> PathBuf {
    dir.join(format!("navlog_{name}_{method}_bias{}.csv", format_float(bias)))
}

pub fn velocity_path(dir: &Path, name: &str, method: &str, bias: f64) -> PathBuf {
    dir.join(format!("velocity_{name}_{method}_bias{}.csv", format_float(bias)))
}

fn noise_series_path(dir: &Path, name: &str, method: &str, bias: f64) -> PathBuf {
    dir.join(format!("noise_std_{name}_{method}_bias{}.csv", format_float(bias)))
}

/// Files produced for one simulated mission.
#[derive(Debug, Clone)]
pub struct SimulatedTrajectory {
    pub name: String,
    pub truth: PathBuf,
    pub imu: PathBuf,
    /// One beam file per sweep bias level.
    pub beams: Vec<(f64, PathBuf)>,
}

/// Simulates one mission: ground truth at both rates, the 100 Hz IMU stream,
/// and one corrupted 1 Hz beam stream per sweep bias level.
pub fn cmd_simulate(
    config: &ExperimentConfig,
    name: &str,
    spec: &TrajectorySpec,
    out_dir: &Path,
) -> Result<SimulatedTrajectory> {
    let transform = build_transform(&config.geometry.build()?);
    let truth100 = generate_trajectory(spec, 100)?;
    let truth1 = generate_trajectory(spec, 1)?;
    let imu = synthesize_imu(
        &truth100,
        &config.imu_errors.spec(),
        derive_seed(config.seed, &format!("imu/{name}")),
    )?;

    let truth = truth_path(out_dir, name);
    csvio::write_truth_csv(&truth, &truth100)?;
    let imu_file = imu_path(out_dir, name);
    csvio::write_imu_csv(&imu_file, &imu)?;

    let mut beams = Vec::new();
    for (level, &bias) in config.sweep.iter().enumerate() {
        let errors = config.dvl_errors.spec_with_bias(bias);
        let stream = synthesize_beams(
            &truth1,
            &transform,
            &errors,
            derive_seed(config.seed, &format!("beams/{name}/{level}")),
        )?;
        let path = beams_path(out_dir, name, bias);
        csvio::write_beam_csv(&path, &stream)?;
        beams.push((bias, path));
    }
    Ok(SimulatedTrajectory { name: name.to_string(), truth, imu: imu_file, beams })
}

/// Mission list for the sweep protocol: `train0..train{k-1}` then
/// `test0..test{m-1}`. Training missions use the mixed pattern with
/// distinct seeds so their speed, turn, and depth variation covers what the
/// test missions fly; test missions use the `[sim]` block's pattern.
pub fn protocol_specs(config: &ExperimentConfig) -> Result<Vec<(String, TrajectorySpec)>> {
    let mut specs = Vec::new();
    for i in 0..config.protocol.train_trajectories {
        let name = format!("train{i}");
        let mut spec = config.sim.spec(0)?;
        spec.pattern = TrajectoryPattern::Mixed;
        spec.seed = derive_seed(config.seed, &format!("traj/{name}"));
        specs.push((name, spec));
    }
    for j in 0..config.protocol.test_trajectories {
        let name = format!("test{j}");
        let mut spec = config.sim.spec(0)?;
        spec.seed = derive_seed(config.seed, &format!("traj/{name}"));
        specs.push((name, spec));
    }
    Ok(specs)
}

/// Builds the GP training set from beam CSVs: inputs are the measured beams,
/// targets the uncorrupted sensor-frame velocities.
pub fn dataset_from_beam_csvs(paths: &[PathBuf]) -> Result<Dataset> {
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for path in paths {
        for b in csvio::read_beam_csv(path)? {
            inputs.push([b.beams[0], b.beams[1], b.beams[2], b.beams[3]]);
            targets.push([
                b.truth_velocity_dvl[0],
                b.truth_velocity_dvl[1],
                b.truth_velocity_dvl[2],
            ]);
        }
    }
    if inputs.is_empty() {
        return Err(Error::input("no training rows found in the given beam CSVs"));
    }
    Dataset::new(inputs, targets)
}

/// Summary of a training run.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub model_path: PathBuf,
    pub trace_path: PathBuf,
    pub total_rows: usize,
    pub used_rows: usize,
    pub initial_nll: f64,
    pub final_nll: f64,
}

/// Trains the GP on every row of the given beam CSVs (subsampled to
/// `max_points`), writes the model file and the NLL trace.
pub fn cmd_train(
    config: &ExperimentConfig,
    beam_csvs: &[PathBuf],
    model_path: &Path,
    trace_path: &Path,
) -> Result<TrainSummary> {
    let full = dataset_from_beam_csvs(beam_csvs)?;
    let total_rows = full.len();
    let sub_seed = config.gpr.seed.unwrap_or_else(|| derive_seed(config.seed, "gpr/subsample"));
    let dataset = gpr::subsample(&full, config.gpr.max_points, sub_seed)?;
    let used_rows = dataset.len();
    let init = gpr::init_hyperparams(&dataset, config.gpr.init_noise_std)?;
    let outcome = gpr::train(dataset, init, &config.gpr.optimizer())?;
    outcome.model.save(model_path)?;

    let mut trace = String::from("iteration,nll\n");
    for (i, v) in outcome.nll_trace.iter().enumerate() {
        let _ = writeln!(trace, "{},{v}", i + 1);
    }
    if let Some(parent) = trace_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::File::create(trace_path)?.write_all(trace.as_bytes())?;

    Ok(TrainSummary {
        model_path: model_path.to_path_buf(),
        trace_path: trace_path.to_path_buf(),
        total_rows,
        used_rows,
        initial_nll: *outcome.nll_trace.first().unwrap_or(&f64::NAN),
        final_nll: *outcome.nll_trace.last().unwrap_or(&f64::NAN),
    })
}

/// One row of the velocity-RMSE-vs-bias table.
#[derive(Debug, Clone)]
pub struct EvalRow {
    pub bias: f64,
    pub rmse_ls: f64,
    pub rmse_mogpr: f64,
    pub improvement_pct: f64,
}

/// Front-end comparison: per bias level, RMSE of the 3-D velocity error
/// norm for the least-squares and GP estimators. Optionally dumps the
/// per-epoch velocity estimates for replay.
pub fn cmd_eval_velocity(
    config: &ExperimentConfig,
    model: &GpModel,
    test_beams: &[(f64, PathBuf)],
    out_csv: &Path,
    velocity_dump_dir: Option<(&Path, &str)>,
) -> Result<Vec<EvalRow>> {
    let transform = build_transform(&config.geometry.build()?);
    let solver = LsEstimator::new(&transform, config.dvl_errors.noise_std_mps)?;
    let mut rows = Vec::new();
    for (bias, path) in test_beams {
        let beams = csvio::read_beam_csv(path)?;
        if beams.is_empty() {
            return Err(Error::input(format!("empty beam file {}", path.display())));
        }
        let mut se_ls = 0.0;
        let mut se_gp = 0.0;
        let mut ls_dump = Vec::new();
        let mut gp_dump = Vec::new();
        for b in &beams {
            let ls = solver.solve(&b.beams);
            se_ls += (ls.velocity_dvl - b.truth_velocity_dvl).norm_squared();
            let gp = Frontend::Mogpr(model).estimate(b)?;
            se_gp += (gp.velocity_dvl - b.truth_velocity_dvl).norm_squared();
            if velocity_dump_dir.is_some() {
                ls_dump.push((b.time, ls));
                gp_dump.push((b.time, gp));
            }
        }
        let n = beams.len() as f64;
        let rmse_ls = (se_ls / n).sqrt();
        let rmse_mogpr = (se_gp / n).sqrt();
        rows.push(EvalRow {
            bias: *bias,
            rmse_ls,
            rmse_mogpr,
            improvement_pct: 100.0 * (1.0 - rmse_mogpr / rmse_ls),
        });
        if let Some((dir, name)) = velocity_dump_dir {
            csvio::write_velocity_csv(&velocity_path(dir, name, "ls", *bias), &ls_dump)?;
            csvio::write_velocity_csv(&velocity_path(dir, name, "mogpr", *bias), &gp_dump)?;
        }
    }

    let mut out = String::from("bias,rmse_ls,rmse_mogpr,improvement_pct\n");
    for r in &rows {
        let _ = writeln!(out, "{},{},{},{}", r.bias, r.rmse_ls, r.rmse_mogpr, r.improvement_pct);
    }
    if let Some(parent) = out_csv.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::File::create(out_csv)?.write_all(out.as_bytes())?;
    Ok(rows)
}

/// Inputs resolved for a fusion run.
pub struct FuseInputs<'a> {
    pub imu_csv: &'a Path,
    pub beams_csv: &'a Path,
    pub truth_csv: &'a Path,
    pub model: Option<&'a GpModel>,
    pub external_csv: Option<&'a Path>,
}

/// Runs the loosely coupled filter over CSV streams and writes the
/// navigation log.
pub fn cmd_fuse(
    config: &ExperimentConfig,
    kind: FrontendKind,
    adaptive_r: bool,
    inputs: &FuseInputs,
    out_navlog: &Path,
) -> Result<Vec<NavLogRow>> {
    let transform = build_transform(&config.geometry.build()?);
    let imu = csvio::read_imu_csv(inputs.imu_csv)?;
    let beams = csvio::read_beam_csv(inputs.beams_csv)?;
    let truth = csvio::read_truth_csv(inputs.truth_csv)?;
    if truth.is_empty() {
        return Err(Error::input("truth stream is empty"));
    }

    let initial_nav = initial_nav_state(config, &truth[0]);
    let setup = FusionSetup {
        initial_nav,
        imu_errors: config.imu_errors.spec(),
        ekf: config.ekf.build(adaptive_r)?,
        transform: transform.clone(),
    };

    let solver = LsEstimator::new(&transform, config.dvl_errors.noise_std_mps)?;
    let external_rows = match (kind, inputs.external_csv) {
        (FrontendKind::External, Some(path)) => csvio::read_velocity_csv(path)?,
        (FrontendKind::External, None) => {
            return Err(Error::config("external frontend requires --external-csv"))
        }
        _ => Vec::new(),
    };
    let frontend = match kind {
        FrontendKind::Ls => Frontend::Ls(&solver),
        FrontendKind::Mogpr => Frontend::Mogpr(
            inputs.model.ok_or_else(|| Error::config("mogpr frontend requires --model"))?,
        ),
        FrontendKind::External => Frontend::External(&external_rows),
    };

    let rows = run_fusion(&imu, &beams, &frontend, &setup)?;
    csvio::write_navlog_csv(out_navlog, &rows)?;
    Ok(rows)
}

fn initial_nav_state(config: &ExperimentConfig, truth0: &GroundTruthSample) -> NavState {
    let mut nav = NavState::from_truth(truth0);
    if let Some(seed) = config.ekf.init_perturbation_seed {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut draw = |std: f64| {
            nalgebra::Vector3::from_fn(|_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                std * z
            })
        };
        nav.velocity_n += draw(config.ekf.init_velocity_std);
        let eps = draw(config.ekf.init_attitude_deg.to_radians());
        nav.attitude = UnitQuaternion::from_scaled_axis(-eps) * nav.attitude;
    }
    nav
}

/// Per-state RMSE of one navigation log against truth.
#[derive(Debug, Clone)]
pub struct StateRmse {
    pub velocity: [f64; 3],
    pub angles_deg: [f64; 3],
    pub velocity_norm: f64,
    pub angles_norm: f64,
}

/// Wraps a degree difference into (-180, 180].
pub fn wrap_degrees(d: f64) -> f64 {
    let wrapped = d - 360.0 * (d / 360.0).round();
    if wrapped <= -180.0 {
        wrapped + 360.0
    } else {
        wrapped
    }
}

/// RMSE of the six compared states over a log, excluding an optional
/// settling window. Log and truth must be epoch-aligned.
pub fn compute_rmse(log: &[NavLogRow], truth: &[GroundTruthSample], skip_seconds: f64) -> Result<StateRmse> {
    if log.len() != truth.len() {
        return Err(Error::input(format!(
            "log/truth length mismatch: {} vs {}",
            log.len(),
            truth.len()
        )));
    }
    let mut sq = [0.0; 6];
    let mut n = 0usize;
    for (row, t) in log.iter().zip(truth) {
        if (row.time - t.time).abs() > 1e-6 {
            return Err(Error::input(format!(
                "log/truth epoch mismatch at t = {} vs {}",
                row.time, t.time
            )));
        }
        if row.time < skip_seconds {
            continue;
        }
        let dv = row.velocity_n - t.velocity_n;
        let (roll, pitch, yaw) = t.attitude.euler_angles();
        let da = [
            wrap_degrees(row.roll_deg - roll.to_degrees()),
            wrap_degrees(row.pitch_deg - pitch.to_degrees()),
            wrap_degrees(row.yaw_deg - yaw.to_degrees()),
        ];
        for i in 0..3 {
            sq[i] += dv[i] * dv[i];
            sq[3 + i] += da[i] * da[i];
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::input("no epochs left after the settling window"));
    }
    let mean = |s: f64| (s / n as f64).sqrt();
    let velocity = [mean(sq[0]), mean(sq[1]), mean(sq[2])];
    let angles_deg = [mean(sq[3]), mean(sq[4]), mean(sq[5])];
    Ok(StateRmse {
        velocity,
        angles_deg,
        velocity_norm: velocity.iter().map(|v| v * v).sum::<f64>().sqrt(),
        angles_norm: angles_deg.iter().map(|v| v * v).sum::<f64>().sqrt(),
    })
}

/// One log to fold into the report.
#[derive(Debug, Clone)]
pub struct ReportEntry {
    pub trajectory: String,
    pub method: String,
    pub bias: f64,
    pub navlog: PathBuf,
    pub truth: PathBuf,
}

/// One line of the per-state RMSE table.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub trajectory: String,
    pub method: String,
    pub bias: f64,
    pub rmse: StateRmse,
}

/// Aggregates navigation logs into the per-state RMSE table and emits the
/// noise-over-time series for each log.
pub fn cmd_report(
    entries: &[ReportEntry],
    skip_seconds: f64,
    report_csv: &Path,
    noise_dir: &Path,
) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    let mut out = String::from(
        "trajectory,bias,method,rmse_vn,rmse_ve,rmse_vd,rmse_roll_deg,rmse_pitch_deg,rmse_yaw_deg,rmse_vel_norm,rmse_ang_norm\n",
    );
    for entry in entries {
        let log = csvio::read_navlog_csv(&entry.navlog)?;
        let truth = csvio::read_truth_csv(&entry.truth)?;
        let rmse = compute_rmse(&log, &truth, skip_seconds)?;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            entry.trajectory,
            entry.bias,
            entry.method,
            rmse.velocity[0],
            rmse.velocity[1],
            rmse.velocity[2],
            rmse.angles_deg[0],
            rmse.angles_deg[1],
            rmse.angles_deg[2],
            rmse.velocity_norm,
            rmse.angles_norm
        );

        // Fig-5-style series: measurement noise std over time at update epochs.
        let mut series = String::from("t,std_x,std_y,std_z\n");
        for row in log.iter().filter(|r| r.updated) {
            let _ = writeln!(
                series,
                "{},{},{},{}",
                row.time,
                row.r_diag.x.sqrt(),
                row.r_diag.y.sqrt(),
                row.r_diag.z.sqrt()
            );
        }
        let spath = noise_series_path(noise_dir, &entry.trajectory, &entry.method, entry.bias);
        if let Some(parent) = spath.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::File::create(&spath)?.write_all(series.as_bytes())?;

        rows.push(ReportRow {
            trajectory: entry.trajectory.clone(),
            method: entry.method.clone(),
            bias: entry.bias,
            rmse,
        });
    }
    if let Some(parent) = report_csv.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::File::create(report_csv)?.write_all(out.as_bytes())?;
    Ok(rows)
}

/// Everything the full sweep produced.
#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub model_path: PathBuf,
    pub eval_csvs: Vec<(String, PathBuf)>,
    pub eval_rows: Vec<(String, Vec<EvalRow>)>,
    pub report_csv: PathBuf,
    pub report_rows: Vec<ReportRow>,
}

/// The full protocol: simulate the train/test missions, train the GP on the
/// training beams across all bias levels, compare front-ends per level, run
/// both filter variants per level, and write the report tables.
pub fn cmd_sweep(config: &ExperimentConfig) -> Result<SweepSummary> {
    let out_dir = config.output_dir.clone();
    std::fs::create_dir_all(&out_dir)?;

    let specs = protocol_specs(config)?;
    let mut train_beams = Vec::new();
    let mut tests = Vec::new();
    for (name, spec) in &specs {
        let sim = cmd_simulate(config, name, spec, &out_dir)?;
        if name.starts_with("train") {
            train_beams.extend(sim.beams.iter().map(|(_, p)| p.clone()));
        } else {
            tests.push(sim);
        }
    }

    let model_path = out_dir.join("model.json");
    let trace_path = out_dir.join("nll_trace.csv");
    cmd_train(config, &train_beams, &model_path, &trace_path)?;
    let model = GpModel::load(&model_path)?;

    let mut eval_csvs = Vec::new();
    let mut eval_rows = Vec::new();
    let mut entries = Vec::new();
    for test in &tests {
        let eval_csv = out_dir.join(format!("velocity_rmse_{}.csv", test.name));
        let rows = cmd_eval_velocity(
            config,
            &model,
            &test.beams,
            &eval_csv,
            Some((&out_dir, test.name.as_str())),
        )?;
        eval_csvs.push((test.name.clone(), eval_csv));
        eval_rows.push((test.name.clone(), rows));

        for (bias, beam_csv) in &test.beams {
            for (kind, adaptive) in [(FrontendKind::Ls, false), (FrontendKind::Mogpr, true)] {
                let navlog = navlog_path(&out_dir, &test.name, kind.name(), *bias);
                cmd_fuse(
                    config,
                    kind,
                    adaptive,
                    &FuseInputs {
                        imu_csv: &test.imu,
                        beams_csv: beam_csv,
                        truth_csv: &test.truth,
                        model: Some(&model),
                        external_csv: None,
                    },
                    &navlog,
                )?;
                entries.push(ReportEntry {
                    trajectory: test.name.clone(),
                    method: kind.name().to_string(),
                    bias: *bias,
                    navlog,
                    truth: test.truth.clone(),
                });
            }
        }
    }

    let report_csv = out_dir.join("rmse_report.csv");
    let report_rows = cmd_report(&entries, config.protocol.skip_seconds, &report_csv, &out_dir)?;

    Ok(SweepSummary { model_path, eval_csvs, eval_rows, report_csv, report_rows })
}

/// Convenience for tests: beams of a stream as GP inputs.
pub fn beam_inputs(beams: &[BeamSample]) -> Vec<[f64; 4]> {
    beams.iter().map(|b| [b.beams[0], b.beams[1], b.beams[2], b.beams[3]]).collect()
}
