//! The closed loop: attitude control, reference governor, gait planner,
//! contact, integration and the two force estimators.

use std::time::Instant;

use nalgebra::{Matrix3x6, Matrix6, Vector3, Vector4, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::attitude::attitude_command;
use crate::contact::{grf_all, GrfSet};
use crate::dynamics::{
    bias_vector, dynamics_rhs, foot_jacobian_rate_times_velocity, foot_velocity_jacobian, forward_kinematics,
    mass_matrix,
};
use crate::erg::{predicted_grf, FrictionConstraint, ReferenceGovernor};
use crate::estimation::{constrained_grf, per_foot_forces, MomentumObserver};
use crate::gait::{joint_command, GaitPlanner, StancePair};
use crate::model::{BodyPose, BodyTwist, LegId, LegJoints, RobotState, Wrench};
use crate::so3::euler_zyx;

use super::config::{ConfigError, SimConfig};
use super::integrator::rk4_step;

/// Transient excluded from the estimator error statistics [s].
pub const ESTIMATOR_TRANSIENT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimFault {
    #[error("non-finite state or derivative at t = {time}")]
    NonFinite { time: f64 },
    #[error("Euler pitch {pitch} rad at singularity, t = {time}")]
    EulerSingularity { time: f64, pitch: f64 },
    #[error("body at height {height} m went below the ground, t = {time}")]
    BodyBelowGround { time: f64, height: f64 },
}

/// One row of telemetry. All forces are world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub time: f64,
    pub position: Vector3<f64>,
    /// Roll, pitch, yaw [rad].
    pub euler: Vector3<f64>,
    pub linear_velocity: Vector3<f64>,
    /// Body-frame angular velocity [rad/s].
    pub angular_velocity: Vector3<f64>,
    /// Applied reference x_w [m/s].
    pub applied_reference: Vector3<f64>,
    /// Predicted friction-pyramid margin used by the governor [N].
    pub erg_margin: f64,
    /// 0 for {FR, BL} in stance, 1 for {FL, BR}.
    pub stance_pair: u8,
    pub phase: f64,
    pub thrusts: Vector4<f64>,
    pub foot_positions: [Vector3<f64>; 4],
    pub true_grf: [Vector3<f64>; 4],
    pub contact: [bool; 4],
    pub observer_feet: [Vector3<f64>; 4],
    pub constrained_feet: [Vector3<f64>; 4],
    pub observer_residual: Vector6<f64>,
}

const BODY_COLUMNS: [&str; 23] = [
    "t", "px", "py", "pz", "roll", "pitch", "yaw", "vx", "vy", "vz", "wx", "wy", "wz", "ref_vx", "ref_vy",
    "ref_vz", "erg_margin", "stance_pair", "phase", "thrust_fr", "thrust_fl", "thrust_br", "thrust_bl",
];
const FOOT_COLUMNS: [&str; 13] = [
    "foot_x", "foot_y", "foot_z", "grf_x", "grf_y", "grf_z", "obs_x", "obs_y", "obs_z", "con_x", "con_y", "con_z",
    "contact",
];
const RESIDUAL_COLUMNS: [&str; 6] = ["r_fx", "r_fy", "r_fz", "r_mx", "r_my", "r_mz"];

/// Total number of CSV columns.
pub const COLUMN_COUNT: usize = BODY_COLUMNS.len() + 4 * FOOT_COLUMNS.len() + RESIDUAL_COLUMNS.len();

/// CSV header. Per-foot columns are suffixed with the leg name and grouped
/// leg by leg in FR, FL, BR, BL order.
pub fn column_names() -> Vec<String> {
    let mut names: Vec<String> = BODY_COLUMNS.iter().map(|s| s.to_string()).collect();
    for leg in LegId::ALL {
        let tag = leg.short_name().to_lowercase();
        names.extend(FOOT_COLUMNS.iter().map(|c| format!("{c}_{tag}")));
    }
    names.extend(RESIDUAL_COLUMNS.iter().map(|s| s.to_string()));
    names
}

fn v3(v: &[f64]) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

impl LogRecord {
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(COLUMN_COUNT);
        out.push(self.time);
        for v in [
            &self.position,
            &self.euler,
            &self.linear_velocity,
            &self.angular_velocity,
            &self.applied_reference,
        ] {
            out.extend(v.iter());
        }
        out.push(self.erg_margin);
        out.push(self.stance_pair as f64);
        out.push(self.phase);
        out.extend(self.thrusts.iter());
        for i in 0..4 {
            out.extend(self.foot_positions[i].iter());
            out.extend(self.true_grf[i].iter());
            out.extend(self.observer_feet[i].iter());
            out.extend(self.constrained_feet[i].iter());
            out.push(if self.contact[i] { 1.0 } else { 0.0 });
        }
        out.extend(self.observer_residual.iter());
        out
    }

    /// Inverse of [`LogRecord::values`].
    pub fn from_values(v: &[f64]) -> Option<Self> {
        if v.len() != COLUMN_COUNT {
            return None;
        }
        let foot = |i: usize, k: usize| v3(&v[BODY_COLUMNS.len() + FOOT_COLUMNS.len() * i + k..]);
        let base = BODY_COLUMNS.len() + 4 * FOOT_COLUMNS.len();
        Some(Self {
            time: v[0],
            position: v3(&v[1..]),
            euler: v3(&v[4..]),
            linear_velocity: v3(&v[7..]),
            angular_velocity: v3(&v[10..]),
            applied_reference: v3(&v[13..]),
            erg_margin: v[16],
            stance_pair: v[17] as u8,
            phase: v[18],
            thrusts: Vector4::new(v[19], v[20], v[21], v[22]),
            foot_positions: [0, 1, 2, 3].map(|i| foot(i, 0)),
            true_grf: [0, 1, 2, 3].map(|i| foot(i, 3)),
            observer_feet: [0, 1, 2, 3].map(|i| foot(i, 6)),
            constrained_feet: [0, 1, 2, 3].map(|i| foot(i, 9)),
            contact: [0, 1, 2, 3].map(|i| v[BODY_COLUMNS.len() + FOOT_COLUMNS.len() * i + 12] != 0.0),
            observer_residual: Vector6::from_column_slice(&v[base..base + 6]),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|x| x.is_finite())
    }
}

/// Everything computed during one control step, before integration.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub record: LogRecord,
    /// Sum of true normal forces [N].
    pub true_normal: f64,
    /// Normal component of the observer residual [N].
    pub observer_normal: f64,
    /// Sum of constrained-model normal forces [N].
    pub constrained_normal: f64,
    /// Worst `|u_a| − μ_s u_z` over feet carrying load [N].
    pub friction_excess: f64,
    /// Scheduled stance legs and the governor's force prediction for them.
    pub erg_stance: [LegId; 2],
    pub erg_prediction: [Vector3<f64>; 2],
}

/// Feet at or below the ground plane according to the kinematics alone.
pub fn kinematic_contacts(state: &RobotState, config: &SimConfig) -> [bool; 4] {
    LegId::ALL.map(|leg| forward_kinematics(state, &config.model, leg).z <= config.ground.height)
}

/// Summary of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub steps: usize,
    pub simulated_time: f64,
    pub mean_forward_speed: f64,
    /// Largest negative governor margin, as a positive number [N].
    pub max_erg_violation: f64,
    /// Largest `|u_a| − μ_s u_z` over loaded feet, floored at zero [N].
    pub max_friction_violation: f64,
    pub peak_normal: f64,
    pub observer_rms: f64,
    pub constrained_rms: f64,
    pub mean_step_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<LogRecord>,
    pub metrics: Metrics,
    pub fault: Option<SimFault>,
    /// Wall-clock time of each control step, logging excluded [s].
    pub step_seconds: Vec<f64>,
}

/// Closed-loop simulation state.
pub struct Simulation {
    config: SimConfig,
    state: RobotState,
    planner: GaitPlanner,
    governor: ReferenceGovernor,
    observer: MomentumObserver,
    mass: Matrix6<f64>,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    time: f64,
    step_index: usize,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let s = &config.scenario;
        let body = Vector3::new(0.0, 0.0, s.initial_height);
        let planner = GaitPlanner::standing(&config.model, config.gait.clone(), body, config.ground.height);
        let state = RobotState {
            pose: BodyPose::level(body),
            twist: BodyTwist::default(),
            legs: LegJoints::from_positions(planner.initial_joints(&config.model)),
        };
        let constraint = FrictionConstraint::new(config.ground.mu_static, config.erg.min_normal);
        let governor = ReferenceGovernor::new(s.desired_velocity, config.erg.clone(), constraint);
        let mass = mass_matrix(&config.model);
        let observer = MomentumObserver::new(
            config.observer.gain,
            &state.twist.as_vector(),
            &bias_vector(&state, &config.model),
            &mass,
        );
        let noise = (config.observer.velocity_noise > 0.0)
            .then(|| Normal::new(0.0, config.observer.velocity_noise).expect("validated noise level"));
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(s.seed),
            config,
            state,
            planner,
            governor,
            observer,
            mass,
            noise,
            time: 0.0,
            step_index: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn governor(&self) -> &ReferenceGovernor {
        &self.governor
    }

    pub fn planner(&self) -> &GaitPlanner {
        &self.planner
    }

    fn observed_velocity(&mut self) -> Vector6<f64> {
        let mut v = self.state.twist.as_vector();
        if let Some(noise) = &self.noise {
            for x in v.iter_mut() {
                *x += noise.sample(&mut self.rng);
            }
        }
        v
    }

    /// Runs one control step and advances the state by `dt`. The returned
    /// record describes the state at the start of the step.
    pub fn step(&mut self) -> Result<StepOutput, SimFault> {
        let cfg = &self.config;
        let dt = cfg.scenario.dt;
        let t = self.time;
        let model = &cfg.model;
        let state = self.state;

        let attitude = attitude_command(&state, &cfg.scenario.attitude_reference, &cfg.attitude, model)
            .map_err(|e| SimFault::EulerSingularity { time: t, pitch: e.pitch })?;
        let thrust: Wrench = attitude.wrench;

        let stance_now = self.planner.stance_at(t);
        let feet = stance_now.stance_legs().map(|leg| forward_kinematics(&state, model, leg));
        let horizon = cfg.erg.horizon;
        let tick = self
            .governor
            .step(|x_w| predicted_grf(&state, &feet, &thrust, x_w, model, horizon), dt);
        let applied = self.governor.applied();

        let plan = self.planner.update(t, &state, &applied, model, dt);
        let leg_accelerations = joint_command(&plan.reference, &state.legs, &cfg.joints);

        let truth: GrfSet = grf_all(&state, model, &cfg.ground);

        // Estimators see states, inputs and model parameters only.
        let contacts = kinematic_contacts(&state, cfg);
        let stance: Vec<LegId> = LegId::ALL.into_iter().filter(|l| contacts[l.index()]).collect();
        let jacobians: Vec<Matrix3x6<f64>> = stance.iter().map(|l| foot_velocity_jacobian(&state, model, *l)).collect();
        let rates: Vec<Vector3<f64>> =
            stance.iter().map(|l| foot_jacobian_rate_times_velocity(&state, model, *l)).collect();
        let u_gen_now = thrust.generalized(&state.pose.rotation);
        let h_now = bias_vector(&state, model);
        let constrained = constrained_grf(&u_gen_now, &h_now, &self.mass, &jacobians, &rates);
        let residual = *self.observer.residual();
        let split = per_foot_forces(&residual, &jacobians);
        let mut observer_feet = [Vector3::zeros(); 4];
        let mut constrained_feet = [Vector3::zeros(); 4];
        for (k, leg) in stance.iter().enumerate() {
            observer_feet[leg.index()] = split.forces[k];
            constrained_feet[leg.index()] = constrained.forces[k];
        }

        let mu = cfg.ground.mu_static;
        let friction_excess = LegId::ALL
            .iter()
            .filter(|l| truth.in_contact[l.index()])
            .map(|l| {
                let u = truth.forces[l.index()];
                u.x.abs().max(u.y.abs()) - mu * u.z
            })
            .fold(f64::NEG_INFINITY, f64::max);

        let record = LogRecord {
            time: t,
            position: state.pose.position,
            euler: euler_zyx(&state.pose.rotation),
            linear_velocity: state.twist.linear,
            angular_velocity: state.twist.angular,
            applied_reference: applied,
            erg_margin: tick.margin,
            stance_pair: match plan.stance {
                StancePair::FrBl => 0,
                StancePair::FlBr => 1,
            },
            phase: plan.phase,
            thrusts: attitude.allocation.thrusts,
            foot_positions: LegId::ALL.map(|leg| forward_kinematics(&state, model, leg)),
            true_grf: truth.forces,
            contact: truth.in_contact,
            observer_feet,
            constrained_feet,
            observer_residual: residual,
        };
        if !record.is_finite() {
            return Err(SimFault::NonFinite { time: t });
        }

        let ground = &cfg.ground;
        let next = rk4_step(
            |s: &RobotState| {
                let grf = grf_all(s, model, ground);
                dynamics_rhs(s, model, &grf, &thrust, &leg_accelerations)
            },
            &state,
            dt,
        )
        .map_err(|_| SimFault::NonFinite { time: t })?;
        if !next.is_finite() {
            return Err(SimFault::NonFinite { time: t + dt });
        }
        if next.pose.position.z < cfg.ground.height {
            return Err(SimFault::BodyBelowGround {
                time: t + dt,
                height: next.pose.position.z,
            });
        }

        let u_gen_next = thrust.generalized(&next.pose.rotation);
        self.state = next;
        let v_next = self.observed_velocity();
        let mut observed = self.state;
        observed.twist.angular = v_next.fixed_rows::<3>(3).into_owned();
        let h_next = bias_vector(&observed, &self.config.model);
        let u_avg = 0.5 * (u_gen_now + u_gen_next);
        self.observer.step(&v_next, &u_avg, &h_next, &self.mass, dt);

        self.step_index += 1;
        self.time = self.step_index as f64 * dt;

        Ok(StepOutput {
            true_normal: truth.total().z,
            observer_normal: residual[2],
            constrained_normal: constrained.total().z,
            friction_excess,
            erg_stance: stance_now.stance_legs(),
            erg_prediction: tick.prediction,
            record,
        })
    }
}

#[derive(Default)]
struct ErrorStats {
    observer_sq: f64,
    constrained_sq: f64,
    count: usize,
}

/// Runs a full scenario, keeping every `decimation`-th record.
pub fn run_scenario(config: SimConfig) -> Result<RunResult, ConfigError> {
    let mut sim = Simulation::new(config)?;
    let steps = sim.config.scenario.step_count();
    let decimation = sim.config.scenario.effective_decimation();
    let mut records = Vec::with_capacity(steps / decimation + 1);
    let mut step_seconds = Vec::with_capacity(steps);
    let mut metrics = Metrics::default();
    let mut stats = ErrorStats::default();
    let mut speed_sum = 0.0;
    let mut fault = None;

    for k in 0..steps {
        let started = Instant::now();
        let out = match sim.step() {
            Ok(out) => out,
            Err(f) => {
                fault = Some(f);
                break;
            }
        };
        step_seconds.push(started.elapsed().as_secs_f64());

        speed_sum += out.record.linear_velocity.x;
        metrics.max_erg_violation = metrics.max_erg_violation.max(-out.record.erg_margin);
        metrics.max_friction_violation = metrics.max_friction_violation.max(out.friction_excess);
        metrics.peak_normal = metrics.peak_normal.max(out.true_normal);
        if out.record.time >= ESTIMATOR_TRANSIENT {
            stats.observer_sq += (out.observer_normal - out.true_normal).powi(2);
            stats.constrained_sq += (out.constrained_normal - out.true_normal).powi(2);
            stats.count += 1;
        }
        if k % decimation == 0 {
            records.push(out.record);
        }
    }

    metrics.steps = sim.step_index();
    metrics.simulated_time = sim.time();
    if metrics.steps > 0 {
        metrics.mean_forward_speed = speed_sum / metrics.steps as f64;
        metrics.mean_step_seconds = step_seconds.iter().sum::<f64>() / step_seconds.len() as f64;
    }
    if stats.count > 0 {
        metrics.observer_rms = (stats.observer_sq / stats.count as f64).sqrt();
        metrics.constrained_rms = (stats.constrained_sq / stats.count as f64).sqrt();
    }
    Ok(RunResult {
        records,
        metrics,
        fault,
        step_seconds,
    })
}

/// Step wall-time statistics [s].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchReport {
    pub steps: usize,
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

pub fn bench_report(step_seconds: &[f64]) -> Option<BenchReport> {
    if step_seconds.is_empty() {
        return None;
    }
    let mut sorted = step_seconds.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pct = |p: f64| sorted[((sorted.len() - 1) as f64 * p).round() as usize];
    Some(BenchReport {
        steps: sorted.len(),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        p50: pct(0.5),
        p90: pct(0.9),
        p99: pct(0.99),
        max: sorted[sorted.len() - 1],
    })
}
