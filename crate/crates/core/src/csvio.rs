//! CSV schemas for every stream the pipeline reads or writes.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces values bit-exactly. Headers are fixed and
//! validated on read; files are plain comma-separated numerics with no
//! quoting.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3, Vector4};

use crate::ekf::{ExternalVelocity, NavLogRow};
use crate::error::{Error, Result};
use crate::ls::VelocityEstimate;
use crate::sim::{BeamSample, GroundTruthSample, ImuSample};

pub const TRUTH_HEADER: &str = "t,pn,pe,pd,vn,ve,vd,qw,qx,qy,qz,wx,wy,wz,fx,fy,fz";
pub const IMU_HEADER: &str = "t,ax,ay,az,gx,gy,gz";
pub const BEAM_HEADER: &str = "t,b1,b2,b3,b4,vx_true,vy_true,vz_true";
pub const VELOCITY_HEADER: &str = "t,vx,vy,vz,r11,r22,r33";
pub const NAVLOG_HEADER: &str = "t,vn,ve,vd,roll_deg,pitch_deg,yaw_deg,p_vn,p_ve,p_vd,p_roll,p_pitch,p_yaw,innov_x,innov_y,innov_z,r11,r22,r33,updated";

fn write_rows(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

fn join(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{v}");
    }
    s
}

/// Parses one line into exactly `n` floats.
fn parse_floats(line: &str, n: usize, path: &Path, lineno: usize) -> Result<Vec<f64>> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != n {
        return Err(Error::input(format!(
            "{}:{lineno}: expected {n} fields, found {}",
            path.display(),
            fields.len()
        )));
    }
    fields
        .iter()
        .map(|f| {
            f.trim().parse::<f64>().map_err(|e| {
                Error::input(format!("{}:{lineno}: bad float '{f}': {e}", path.display()))
            })
        })
        .collect()
}

fn read_lines(path: &Path, header: &str) -> Result<Vec<(usize, String)>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::input(format!("cannot open {}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    match lines.next() {
        Some((_, Ok(first))) if first.trim_end() == header => {}
        Some((_, Ok(first))) => {
            return Err(Error::input(format!(
                "{}: unexpected header '{}' (expected '{header}')",
                path.display(),
                first.trim_end()
            )))
        }
        _ => return Err(Error::input(format!("{}: empty file", path.display()))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

// --- trajectory truth ------------------------------------------------------

pub fn write_truth_csv(path: &Path, samples: &[GroundTruthSample]) -> Result<()> {
    write_rows(
        path,
        TRUTH_HEADER,
        samples.iter().map(|s| {
            let q = s.attitude.quaternion();
            join(&[
                s.time,
                s.position.x,
                s.position.y,
                s.position.z,
                s.velocity_n.x,
                s.velocity_n.y,
                s.velocity_n.z,
                q.w,
                q.i,
                q.j,
                q.k,
                s.angular_rate_b.x,
                s.angular_rate_b.y,
                s.angular_rate_b.z,
                s.specific_force_b.x,
                s.specific_force_b.y,
                s.specific_force_b.z,
            ])
        }),
    )
}

pub fn read_truth_csv(path: &Path) -> Result<Vec<GroundTruthSample>> {
    read_lines(path, TRUTH_HEADER)?
        .into_iter()
        .map(|(lineno, line)| {
            let v = parse_floats(&line, 17, path, lineno)?;
            Ok(GroundTruthSample {
                time: v[0],
                position: Vector3::new(v[1], v[2], v[3]),
                velocity_n: Vector3::new(v[4], v[5], v[6]),
                attitude: UnitQuaternion::from_quaternion(Quaternion::new(v[7], v[8], v[9], v[10])),
                angular_rate_b: Vector3::new(v[11], v[12], v[13]),
                specific_force_b: Vector3::new(v[14], v[15], v[16]),
            })
        })
        .collect()
}

// --- IMU --------------------------------------------------------------------

pub fn write_imu_csv(path: &Path, samples: &[ImuSample]) -> Result<()> {
    write_rows(
        path,
        IMU_HEADER,
        samples.iter().map(|s| {
            join(&[s.time, s.accel.x, s.accel.y, s.accel.z, s.gyro.x, s.gyro.y, s.gyro.z])
        }),
    )
}

pub fn read_imu_csv(path: &Path) -> Result<Vec<ImuSample>> {
    read_lines(path, IMU_HEADER)?
        .into_iter()
        .map(|(lineno, line)| {
            let v = parse_floats(&line, 7, path, lineno)?;
            Ok(ImuSample {
                time: v[0],
                accel: Vector3::new(v[1], v[2], v[3]),
                gyro: Vector3::new(v[4], v[5], v[6]),
            })
        })
        .collect()
}

// --- DVL beams ---------------------------------------------------------------

pub fn write_beam_csv(path: &Path, samples: &[BeamSample]) -> Result<()> {
    write_rows(
        path,
        BEAM_HEADER,
        samples.iter().map(|s| {
            join(&[
                s.time,
                s.beams[0],
                s.beams[1],
                s.beams[2],
                s.beams[3],
                s.truth_velocity_dvl.x,
                s.truth_velocity_dvl.y,
                s.truth_velocity_dvl.z,
            ])
        }),
    )
}

pub fn read_beam_csv(path: &Path) -> Result<Vec<BeamSample>> {
    read_lines(path, BEAM_HEADER)?
        .into_iter()
        .map(|(lineno, line)| {
            let v = parse_floats(&line, 8, path, lineno)?;
            Ok(BeamSample {
                time: v[0],
                beams: Vector4::new(v[1], v[2], v[3], v[4]),
                truth_velocity_dvl: Vector3::new(v[5], v[6], v[7]),
            })
        })
        .collect()
}

// --- velocity estimates ------------------------------------------------------

/// Writes front-end velocity estimates with the diagonal of their covariance.
pub fn write_velocity_csv(path: &Path, rows: &[(f64, VelocityEstimate)]) -> Result<()> {
    write_rows(
        path,
        VELOCITY_HEADER,
        rows.iter().map(|(t, e)| {
            join(&[
                *t,
                e.velocity_dvl.x,
                e.velocity_dvl.y,
                e.velocity_dvl.z,
                e.covariance[(0, 0)],
                e.covariance[(1, 1)],
                e.covariance[(2, 2)],
            ])
        }),
    )
}

/// Reads a velocity CSV for replay through the external front-end.
pub fn read_velocity_csv(path: &Path) -> Result<Vec<ExternalVelocity>> {
    read_lines(path, VELOCITY_HEADER)?
        .into_iter()
        .map(|(lineno, line)| {
            let v = parse_floats(&line, 7, path, lineno)?;
            Ok(ExternalVelocity {
                time: v[0],
                velocity_dvl: Vector3::new(v[1], v[2], v[3]),
                r_diag: Vector3::new(v[4], v[5], v[6]),
            })
        })
        .collect()
}

// --- navigation log -----------------------------------------------------------

pub fn write_navlog_csv(path: &Path, rows: &[NavLogRow]) -> Result<()> {
    write_rows(
        path,
        NAVLOG_HEADER,
        rows.iter().map(|r| {
            let mut s = join(&[
                r.time,
                r.velocity_n.x,
                r.velocity_n.y,
                r.velocity_n.z,
                r.roll_deg,
                r.pitch_deg,
                r.yaw_deg,
                r.p_vel.x,
                r.p_vel.y,
                r.p_vel.z,
                r.p_att.x,
                r.p_att.y,
                r.p_att.z,
                r.innovation.x,
                r.innovation.y,
                r.innovation.z,
                r.r_diag.x,
                r.r_diag.y,
                r.r_diag.z,
            ]);
            s.push(',');
            s.push(if r.updated { '1' } else { '0' });
            s
        }),
    )
}

pub fn read_navlog_csv(path: &Path) -> Result<Vec<NavLogRow>> {
    read_lines(path, NAVLOG_HEADER)?
        .into_iter()
        .map(|(lineno, line)| {
            let v = parse_floats(&line, 20, path, lineno)?;
            Ok(NavLogRow {
                time: v[0],
                velocity_n: Vector3::new(v[1], v[2], v[3]),
                roll_deg: v[4],
                pitch_deg: v[5],
                yaw_deg: v[6],
                p_vel: Vector3::new(v[7], v[8], v[9]),
                p_att: Vector3::new(v[10], v[11], v[12]),
                innovation: Vector3::new(v[13], v[14], v[15]),
                r_diag: Vector3::new(v[16], v[17], v[18]),
                updated: v[19] != 0.0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_trajectory, synthesize_imu, ImuErrorSpec, TrajectoryPattern, TrajectorySpec};

    #[test]
    fn truth_csv_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.csv");
        let spec = TrajectorySpec::new(TrajectoryPattern::Mixed, 30.0, 1.5).with_seed(9);
        let samples = generate_trajectory(&spec, 1).unwrap();
        write_truth_csv(&path, &samples).unwrap();
        let back = read_truth_csv(&path).unwrap();
        assert_eq!(back.len(), samples.len());
        for (a, b) in samples.iter().zip(&back) {
            assert_eq!(a.time.to_bits(), b.time.to_bits());
            assert_eq!(a.position, b.position);
            assert_eq!(a.velocity_n, b.velocity_n);
            assert_eq!(a.attitude.quaternion().coords, b.attitude.quaternion().coords);
            assert_eq!(a.specific_force_b, b.specific_force_b);
        }
    }

    #[test]
    fn imu_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("imu.csv");
        let spec = TrajectorySpec::new(TrajectoryPattern::Straight, 5.0, 1.0);
        let truth = generate_trajectory(&spec, 100).unwrap();
        let errors = ImuErrorSpec { accel_noise_std: 0.02, gyro_noise_std: 1e-4, ..Default::default() };
        let imu = synthesize_imu(&truth, &errors, 4).unwrap();
        write_imu_csv(&path, &imu).unwrap();
        let back = read_imu_csv(&path).unwrap();
        for (a, b) in imu.iter().zip(&back) {
            assert_eq!(a.accel, b.accel);
            assert_eq!(a.gyro, b.gyro);
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
        assert!(read_imu_csv(&path).is_err());
    }

    #[test]
    fn short_row_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("imu.csv");
        std::fs::write(&path, format!("{IMU_HEADER}\n0.0,1.0\n")).unwrap();
        let err = read_imu_csv(&path).unwrap_err();
        assert!(err.to_string().contains("expected 7 fields"));
    }
}
