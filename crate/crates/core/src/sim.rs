//! Synthetic AUV trajectories and sensor streams.
//!
//! Ground truth is evaluated analytically from piecewise motion primitives
//! (constant-rate turns, linear speed ramps, linear vertical-velocity ramps),
//! so positions, velocities, body rates and specific forces are mutually
//! consistent to machine precision instead of drifting with a numerical
//! integrator. Horizontal and vertical motion decouple: heading/speed evolve
//! on one timeline of segments, vertical velocity on another.
//!
//! Conventions: local NED navigation frame, constant gravity, body frame
//! coincident with the DVL frame, attitude = yaw-only rotation (the vehicle
//! stays level and crabs vertically).

use nalgebra::{UnitQuaternion, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::TransformMatrix;
use crate::GRAVITY;

/// Base tick of the motion timeline: 10 ms (100 Hz).
const TICK: f64 = 0.01;
const TICKS_PER_SECOND: u64 = 100;

/// Shape of a generated mission trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryPattern {
    Straight,
    Turn,
    Lawnmower,
    Mixed,
}

impl std::str::FromStr for TrajectoryPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "straight" => Ok(Self::Straight),
            "turn" => Ok(Self::Turn),
            "lawnmower" => Ok(Self::Lawnmower),
            "mixed" => Ok(Self::Mixed),
            other => Err(Error::config(format!("unsupported trajectory pattern '{other}'"))),
        }
    }
}

impl std::fmt::Display for TrajectoryPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Straight => "straight",
            Self::Turn => "turn",
            Self::Lawnmower => "lawnmower",
            Self::Mixed => "mixed",
        };
        f.write_str(s)
    }
}

/// Parameters of a synthetic mission. The seed fully determines every
/// stochastic draw used while laying out the mission.
#[derive(Debug, Clone)]
pub struct TrajectorySpec {
    pub pattern: TrajectoryPattern,
    pub duration_s: f64,
    pub cruise_speed_mps: f64,
    pub turn_rate_rps: f64,
    /// Depth knots (time s, depth m, down-positive). Empty selects a pattern
    /// default. Knots are reached exactly via continuous vertical-velocity
    /// ramps.
    pub depth_profile: Vec<(f64, f64)>,
    pub seed: u64,
}

impl TrajectorySpec {
    pub fn new(pattern: TrajectoryPattern, duration_s: f64, cruise_speed_mps: f64) -> Self {
        Self {
            pattern,
            duration_s,
            cruise_speed_mps,
            turn_rate_rps: 3f64.to_radians(),
            depth_profile: Vec::new(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_turn_rate(mut self, turn_rate_rps: f64) -> Self {
        self.turn_rate_rps = turn_rate_rps;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::config("trajectory duration must be positive"));
        }
        if !(self.cruise_speed_mps.is_finite() && self.cruise_speed_mps > 0.0) {
            return Err(Error::config("cruise speed must be positive"));
        }
        if !(self.turn_rate_rps.is_finite() && self.turn_rate_rps > 0.0) {
            return Err(Error::config("turn rate must be positive"));
        }
        Ok(())
    }
}

/// One ground-truth epoch. `specific_force_b` and `angular_rate_b` are
/// exactly what an error-free IMU strapped to the vehicle would measure.
#[derive(Debug, Clone)]
pub struct GroundTruthSample {
    pub time: f64,
    /// Local NED position, meters.
    pub position: Vector3<f64>,
    /// Velocity in the navigation frame, m/s.
    pub velocity_n: Vector3<f64>,
    /// Body-to-navigation rotation.
    pub attitude: UnitQuaternion<f64>,
    /// Body-frame angular rate, rad/s.
    pub angular_rate_b: Vector3<f64>,
    /// Body-frame specific force, m/s^2 (includes the gravity reaction).
    pub specific_force_b: Vector3<f64>,
}

impl GroundTruthSample {
    /// Velocity expressed in the DVL frame (coincident with the body frame).
    pub fn velocity_dvl(&self) -> Vector3<f64> {
        self.attitude.inverse_transform_vector(&self.velocity_n)
    }
}

// ---------------------------------------------------------------------------
// Motion primitives
// ---------------------------------------------------------------------------

/// Horizontal motion segment: either a constant-rate turn at constant speed
/// or a straight run with a linear speed ramp. Mixing both in one segment
/// would have no closed-form position, so the builders never do it.
#[derive(Debug, Clone)]
struct Segment {
    start_tick: u64,
    end_tick: u64,
    pn0: f64,
    pe0: f64,
    heading0: f64,
    speed0: f64,
    turn_rate: f64,
    speed_rate: f64,
}

impl Segment {
    fn eval(&self, tick: u64) -> HorizState {
        let s = (tick - self.start_tick) as f64 * TICK;
        let speed = self.speed0 + self.speed_rate * s;
        let heading = self.heading0 + self.turn_rate * s;
        let (sin_h, cos_h) = heading.sin_cos();
        let (pn, pe) = if self.turn_rate == 0.0 {
            let arc = self.speed0 * s + 0.5 * self.speed_rate * s * s;
            (self.pn0 + cos_h * arc, self.pe0 + sin_h * arc)
        } else {
            // Constant speed on a circular arc.
            let r = self.speed0 / self.turn_rate;
            (
                self.pn0 + r * (sin_h - self.heading0.sin()),
                self.pe0 - r * (cos_h - self.heading0.cos()),
            )
        };
        HorizState {
            pn,
            pe,
            vn: speed * cos_h,
            ve: speed * sin_h,
            an: self.speed_rate * cos_h - speed * self.turn_rate * sin_h,
            ae: self.speed_rate * sin_h + speed * self.turn_rate * cos_h,
            heading,
            heading_rate: self.turn_rate,
        }
    }

    /// State at the end of the segment, used to seed the next one.
    fn terminal(&self) -> (f64, f64, f64, f64) {
        let h = self.eval(self.end_tick);
        let speed = (h.vn * h.vn + h.ve * h.ve).sqrt();
        (h.pn, h.pe, h.heading, speed)
    }
}

struct HorizState {
    pn: f64,
    pe: f64,
    vn: f64,
    ve: f64,
    an: f64,
    ae: f64,
    heading: f64,
    heading_rate: f64,
}

/// Vertical interval with constant vertical acceleration.
#[derive(Debug, Clone)]
struct VerticalLeg {
    start_tick: u64,
    end_tick: u64,
    depth0: f64,
    vd0: f64,
    ad: f64,
}

impl VerticalLeg {
    fn eval(&self, tick: u64) -> (f64, f64, f64) {
        let s = (tick - self.start_tick) as f64 * TICK;
        (
            self.depth0 + self.vd0 * s + 0.5 * self.ad * s * s,
            self.vd0 + self.ad * s,
            self.ad,
        )
    }
}

/// Fully laid-out mission, evaluable at any tick.
#[derive(Debug, Clone)]
struct MotionPlan {
    segments: Vec<Segment>,
    vertical: Vec<VerticalLeg>,
    total_ticks: u64,
}

impl MotionPlan {
    fn eval(&self, tick: u64) -> GroundTruthSample {
        let seg = lookup(&self.segments, tick, |s| s.end_tick);
        let h = seg.eval(tick);
        let leg = lookup(&self.vertical, tick, |l| l.end_tick);
        let (depth, vd, ad) = leg.eval(tick);

        let attitude = UnitQuaternion::from_euler_angles(0.0, 0.0, h.heading);
        let accel_n = Vector3::new(h.an, h.ae, ad);
        let gravity_n = Vector3::new(0.0, 0.0, GRAVITY);
        let specific_force_b = attitude.inverse_transform_vector(&(accel_n - gravity_n));

        GroundTruthSample {
            time: tick as f64 * TICK,
            position: Vector3::new(h.pn, h.pe, depth),
            velocity_n: Vector3::new(h.vn, h.ve, vd),
            attitude,
            angular_rate_b: Vector3::new(0.0, 0.0, h.heading_rate),
            specific_force_b,
        }
    }
}

/// Finds the element covering `tick`; intervals are [start, end) with the
/// final one closed on the right.
fn lookup<T>(items: &[T], tick: u64, end: impl Fn(&T) -> u64) -> &T {
    for item in items {
        if tick < end(item) {
            return item;
        }
    }
    items.last().expect("motion plan has at least one element")
}

// ---------------------------------------------------------------------------
// Mission builders
// ---------------------------------------------------------------------------

struct PlanBuilder {
    segments: Vec<Segment>,
    tick: u64,
    pn: f64,
    pe: f64,
    heading: f64,
    speed: f64,
}

impl PlanBuilder {
    fn new(speed: f64) -> Self {
        Self { segments: Vec::new(), tick: 0, pn: 0.0, pe: 0.0, heading: 0.0, speed }
    }

    fn push(&mut self, duration_ticks: u64, turn_rate: f64, speed_rate: f64) {
        if duration_ticks == 0 {
            return;
        }
        debug_assert!(turn_rate == 0.0 || speed_rate == 0.0);
        let seg = Segment {
            start_tick: self.tick,
            end_tick: self.tick + duration_ticks,
            pn0: self.pn,
            pe0: self.pe,
            heading0: self.heading,
            speed0: self.speed,
            turn_rate,
            speed_rate,
        };
        let (pn, pe, heading, speed) = seg.terminal();
        self.segments.push(seg);
        self.tick += duration_ticks;
        self.pn = pn;
        self.pe = pe;
        self.heading = heading;
        self.speed = speed;
    }

    fn straight(&mut self, duration_ticks: u64) {
        self.push(duration_ticks, 0.0, 0.0);
    }

    fn turn(&mut self, duration_ticks: u64, rate: f64) {
        self.push(duration_ticks, rate, 0.0);
    }

    /// Linear speed change to `target` over `duration_ticks`.
    fn ramp_speed(&mut self, duration_ticks: u64, target: f64) {
        if duration_ticks == 0 {
            return;
        }
        let rate = (target - self.speed) / (duration_ticks as f64 * TICK);
        self.push(duration_ticks, 0.0, rate);
    }
}

fn seconds_to_ticks(s: f64) -> u64 {
    (s * TICKS_PER_SECOND as f64).round() as u64
}

/// Builds the continuous vertical-velocity profile that passes through the
/// given depth knots exactly (trapezoid recursion: each interval's terminal
/// velocity is chosen so the integral matches the depth change).
fn vertical_from_knots(knots: &[(f64, f64)], total_ticks: u64) -> Result<Vec<VerticalLeg>> {
    if knots.is_empty() {
        return Ok(vec![VerticalLeg {
            start_tick: 0,
            end_tick: total_ticks,
            depth0: 0.0,
            vd0: 0.0,
            ad: 0.0,
        }]);
    }
    if knots[0].0 != 0.0 {
        return Err(Error::config("depth profile must start at t = 0"));
    }
    let mut legs = Vec::new();
    let mut tick = 0u64;
    let mut depth = knots[0].1;
    let mut vd = 0.0;
    for win in knots.windows(2) {
        let (t0, d0) = win[0];
        let (t1, d1) = win[1];
        if t1 <= t0 {
            return Err(Error::config("depth profile knots must be strictly increasing in time"));
        }
        let start = seconds_to_ticks(t0);
        let end = seconds_to_ticks(t1).min(total_ticks);
        if start >= end {
            continue;
        }
        let dur = (end - start) as f64 * TICK;
        let vd_next = 2.0 * (d1 - d0) / dur - vd;
        let ad = (vd_next - vd) / dur;
        legs.push(VerticalLeg { start_tick: start, end_tick: end, depth0: depth, vd0: vd, ad });
        depth = d1;
        vd = vd_next;
        tick = end;
    }
    if tick < total_ticks {
        legs.push(VerticalLeg { start_tick: tick, end_tick: total_ticks, depth0: depth, vd0: vd, ad: 0.0 });
    }
    Ok(legs)
}

fn build_plan(spec: &TrajectorySpec) -> Result<MotionPlan> {
    let total_ticks = seconds_to_ticks(spec.duration_s);
    let mut b = PlanBuilder::new(spec.cruise_speed_mps);
    let mut depth_knots = spec.depth_profile.clone();

    match spec.pattern {
        TrajectoryPattern::Straight => {
            b.straight(total_ticks);
        }
        TrajectoryPattern::Turn => {
            let lead = seconds_to_ticks((spec.duration_s * 0.1).min(10.0));
            b.straight(lead.min(total_ticks));
            if total_ticks > b.tick {
                b.turn(total_ticks - b.tick, spec.turn_rate_rps);
            }
        }
        TrajectoryPattern::Lawnmower => {
            let leg = seconds_to_ticks(60.0);
            let u_turn = seconds_to_ticks(std::f64::consts::PI / spec.turn_rate_rps);
            let mut sign = 1.0;
            while b.tick < total_ticks {
                b.straight(leg.min(total_ticks - b.tick));
                if b.tick >= total_ticks {
                    break;
                }
                b.turn(u_turn.min(total_ticks - b.tick), sign * spec.turn_rate_rps);
                sign = -sign;
            }
        }
        TrajectoryPattern::Mixed => {
            let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
            while b.tick < total_ticks {
                // Speed ramp toward a new cruise multiplier, then hold.
                let target = spec.cruise_speed_mps * rng.gen_range(0.75..1.25);
                b.ramp_speed(seconds_to_ticks(8.0).min(total_ticks - b.tick), target);
                if b.tick >= total_ticks {
                    break;
                }
                let hold = seconds_to_ticks(rng.gen_range(15.0..35.0));
                b.straight(hold.min(total_ticks - b.tick));
                if b.tick >= total_ticks {
                    break;
                }
                // Turn through a random arc, direction chosen at random.
                let rate = spec.turn_rate_rps * rng.gen_range(0.5..1.0);
                let arc: f64 = rng.gen_range(45f64..180f64).to_radians();
                let dur = seconds_to_ticks(arc / rate);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                b.turn(dur.min(total_ticks - b.tick), sign * rate);
            }
            if depth_knots.is_empty() {
                // Gentle depth excursions around the starting depth.
                let mut knots = vec![(0.0, 0.0)];
                let mut t = 0.0;
                let mut d: f64 = 0.0;
                while t < spec.duration_s {
                    t += rng.gen_range(45.0..75.0);
                    d = (d + rng.gen_range(-4.0..4.0)).clamp(-6.0, 6.0);
                    knots.push((t.min(spec.duration_s), d));
                }
                depth_knots = knots;
            }
        }
    }
    // Pad in case rounding left the plan short.
    if b.tick < total_ticks {
        b.straight(total_ticks - b.tick);
    }

    let vertical = vertical_from_knots(&depth_knots, total_ticks)?;
    Ok(MotionPlan { segments: b.segments, vertical, total_ticks })
}

/// Generates ground-truth samples at `rate_hz` (1 or 100 Hz supported),
/// inclusive of both endpoints: a 600 s mission at 100 Hz yields 60001 rows.
pub fn generate_trajectory(spec: &TrajectorySpec, rate_hz: u32) -> Result<Vec<GroundTruthSample>> {
    spec.validate()?;
    let step = match rate_hz {
        100 => 1,
        1 => TICKS_PER_SECOND,
        other => {
            return Err(Error::config(format!("unsupported sample rate {other} Hz (1 or 100)")))
        }
    };
    let plan = build_plan(spec)?;
    let mut out = Vec::with_capacity((plan.total_ticks / step + 1) as usize);
    let mut tick = 0;
    while tick <= plan.total_ticks {
        out.push(plan.eval(tick));
        tick += step;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Sensor synthesis
// ---------------------------------------------------------------------------

/// Deterministic and stochastic error sources of the inertial unit.
#[derive(Debug, Clone, Default)]
pub struct ImuErrorSpec {
    pub accel_bias: Vector3<f64>,
    pub gyro_bias: Vector3<f64>,
    pub accel_noise_std: f64,
    pub gyro_noise_std: f64,
}

impl ImuErrorSpec {
    fn validate(&self) -> Result<()> {
        if self.accel_noise_std < 0.0 || self.gyro_noise_std < 0.0 {
            return Err(Error::config("IMU noise standard deviations must be non-negative"));
        }
        Ok(())
    }
}

/// One inertial measurement epoch (100 Hz stream).
#[derive(Debug, Clone)]
pub struct ImuSample {
    pub time: f64,
    /// Measured specific force, m/s^2.
    pub accel: Vector3<f64>,
    /// Measured angular rate, rad/s.
    pub gyro: Vector3<f64>,
}

/// Corrupts the truth stream into IMU measurements:
/// `measured = truth + bias + N(0, std^2 I)` per channel.
pub fn synthesize_imu(
    truth: &[GroundTruthSample],
    errors: &ImuErrorSpec,
    seed: u64,
) -> Result<Vec<ImuSample>> {
    errors.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let accel_noise = Normal::new(0.0, errors.accel_noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::config(e.to_string()))?;
    let gyro_noise = Normal::new(0.0, errors.gyro_noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::config(e.to_string()))?;
    let mut out = Vec::with_capacity(truth.len());
    for s in truth {
        let na = if errors.accel_noise_std > 0.0 {
            Vector3::from_fn(|_, _| accel_noise.sample(&mut rng))
        } else {
            Vector3::zeros()
        };
        let ng = if errors.gyro_noise_std > 0.0 {
            Vector3::from_fn(|_, _| gyro_noise.sample(&mut rng))
        } else {
            Vector3::zeros()
        };
        out.push(ImuSample {
            time: s.time,
            accel: s.specific_force_b + errors.accel_bias + na,
            gyro: s.angular_rate_b + errors.gyro_bias + ng,
        });
    }
    Ok(out)
}

/// Error model of the DVL beam measurements: per-beam additive bias,
/// element-wise scale factor on the sensor-frame velocity, and white noise.
#[derive(Debug, Clone, Default)]
pub struct DvlErrorSpec {
    pub beam_bias: Vector4<f64>,
    pub scale: Vector3<f64>,
    pub noise_std: f64,
}

impl DvlErrorSpec {
    /// Identical bias on all four beams, the sweep default.
    pub fn uniform_bias(bias: f64, noise_std: f64) -> Self {
        Self { beam_bias: Vector4::repeat(bias), scale: Vector3::zeros(), noise_std }
    }

    fn validate(&self) -> Result<()> {
        if self.noise_std < 0.0 {
            return Err(Error::config("DVL noise standard deviation must be non-negative"));
        }
        Ok(())
    }
}

/// One four-beam DVL epoch (1 Hz stream). `truth_velocity_dvl` carries the
/// uncorrupted sensor-frame velocity for training and evaluation.
#[derive(Debug, Clone)]
pub struct BeamSample {
    pub time: f64,
    pub beams: Vector4<f64>,
    pub truth_velocity_dvl: Vector3<f64>,
}

/// Corrupts the 1 Hz truth stream into beam measurements:
/// `beams = T [v .* (1 + s)] + b + N(0, std^2 I4)`.
pub fn synthesize_beams(
    truth: &[GroundTruthSample],
    transform: &TransformMatrix,
    errors: &DvlErrorSpec,
    seed: u64,
) -> Result<Vec<BeamSample>> {
    errors.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, errors.noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::config(e.to_string()))?;
    let ones_plus_scale = Vector3::repeat(1.0) + errors.scale;
    let mut out = Vec::with_capacity(truth.len());
    for s in truth {
        let v_dvl = s.velocity_dvl();
        let scaled = v_dvl.component_mul(&ones_plus_scale);
        let n = if errors.noise_std > 0.0 {
            Vector4::from_fn(|_, _| noise.sample(&mut rng))
        } else {
            Vector4::zeros()
        };
        out.push(BeamSample {
            time: s.time,
            beams: transform.apply(&scaled) + errors.beam_bias + n,
            truth_velocity_dvl: v_dvl,
        });
    }
    Ok(out)
}
