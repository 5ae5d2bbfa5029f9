//! Trot gait: diagonal stance pairs, swing-foot trajectories, Raibert-style
//! foot placement, leg inverse kinematics and the joint acceleration command.
//!
//! Joint references are generated against a *reference* body pose (level,
//! zero yaw, advancing at the applied velocity) rather than the measured one.
//! Stance feet are therefore pinned to their world foothold in the reference
//! frame, and any lag of the real body shows up as foot slip that friction
//! converts into propulsion.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::leg_jacobian;
use crate::model::{joints_within_limits, BodyPose, LegId, LegJoints, ModelParams, RobotState, Vector12};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StancePair {
    /// Front-right and back-left in stance.
    FrBl,
    /// Front-left and back-right in stance.
    FlBr,
}

impl StancePair {
    pub fn stance_legs(self) -> [LegId; 2] {
        match self {
            StancePair::FrBl => [LegId::FrontRight, LegId::BackLeft],
            StancePair::FlBr => [LegId::FrontLeft, LegId::BackRight],
        }
    }

    pub fn swing_legs(self) -> [LegId; 2] {
        self.other().stance_legs()
    }

    pub fn other(self) -> StancePair {
        match self {
            StancePair::FrBl => StancePair::FlBr,
            StancePair::FlBr => StancePair::FrBl,
        }
    }

    pub fn contains(self, leg: LegId) -> bool {
        self.stance_legs().contains(&leg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitSchedule {
    /// Full gait cycle [s]; each diagonal pair stands for half of it.
    pub cycle_period: f64,
    /// Swing apex height above the higher endpoint [m].
    pub swing_height: f64,
    /// Raibert velocity-feedback gain k_v [s].
    pub velocity_gain: f64,
}

impl Default for GaitSchedule {
    fn default() -> Self {
        Self {
            cycle_period: 0.8,
            swing_height: 0.05,
            velocity_gain: 0.03,
        }
    }
}

impl GaitSchedule {
    /// Duration of one stance (and one swing) phase.
    pub fn stance_duration(&self) -> f64 {
        0.5 * self.cycle_period
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.cycle_period > 0.0) {
            return Err(format!("gait cycle_period must be positive, got {}", self.cycle_period));
        }
        if !(self.swing_height >= 0.0) {
            return Err(format!("swing_height must be nonnegative, got {}", self.swing_height));
        }
        if !(self.velocity_gain >= 0.0) {
            return Err(format!("velocity_gain must be nonnegative, got {}", self.velocity_gain));
        }
        Ok(())
    }
}

/// Stance pair active at time `t` and the phase within the current half-cycle.
pub fn stance_pair(t: f64, sched: &GaitSchedule) -> (StancePair, f64) {
    let half = sched.stance_duration();
    let cycles = (t / half).floor();
    let phase = (t / half - cycles).clamp(0.0, 1.0 - f64::EPSILON);
    let pair = if (cycles as i64).rem_euclid(2) == 0 {
        StancePair::FrBl
    } else {
        StancePair::FlBr
    };
    (pair, phase)
}

fn horizontal(v: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(v.x, v.y, 0.0)
}

/// Touchdown point from the hip position and the horizontal velocities.
pub fn raibert_target(
    hip_world: &Vector3<f64>,
    v_actual: &Vector3<f64>,
    v_applied: &Vector3<f64>,
    sched: &GaitSchedule,
    ground_height: f64,
) -> Vector3<f64> {
    let v_cmd = horizontal(v_applied);
    let mut target = Vector3::new(hip_world.x, hip_world.y, ground_height);
    target += 0.5 * sched.stance_duration() * v_cmd;
    target += sched.velocity_gain * (horizontal(v_actual) - v_cmd);
    target
}

/// Raibert target for `leg` evaluated at the hip of `state`.
pub fn swing_foot_target(
    state: &RobotState,
    params: &ModelParams,
    leg: LegId,
    v_applied: &Vector3<f64>,
    sched: &GaitSchedule,
    ground_height: f64,
) -> Vector3<f64> {
    let hip = state.pose.position + state.pose.rotation * params.hip_offsets[leg.index()];
    raibert_target(&hip, &state.twist.linear, v_applied, sched, ground_height)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingSample {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
}

impl SwingSample {
    pub fn stationary(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            acceleration: Vector3::zeros(),
        }
    }
}

/// Swing foot path: smoothstep blend between the endpoints plus a raised
/// cosine arc in z. Velocity and acceleration are per unit time for a swing
/// lasting `duration` seconds.
pub fn swing_trajectory(
    phase: f64,
    liftoff: &Vector3<f64>,
    target: &Vector3<f64>,
    height: f64,
    duration: f64,
) -> SwingSample {
    use std::f64::consts::PI;
    let s = phase.clamp(0.0, 1.0);
    let blend = s * s * (3.0 - 2.0 * s);
    let d_blend = 6.0 * s * (1.0 - s);
    let dd_blend = 6.0 - 12.0 * s;
    let delta = target - liftoff;
    let lift = height + 0.5 * (target.z - liftoff.z).abs();
    let arc = 0.5 * lift * (1.0 - (2.0 * PI * s).cos());
    let d_arc = lift * PI * (2.0 * PI * s).sin();
    let dd_arc = 2.0 * lift * PI * PI * (2.0 * PI * s).cos();

    let mut position = liftoff + delta * blend;
    position.z += arc;
    let mut velocity = delta * d_blend;
    velocity.z += d_arc;
    let mut acceleration = delta * dd_blend;
    acceleration.z += dd_arc;
    SwingSample {
        position,
        velocity: velocity / duration,
        acceleration: acceleration / (duration * duration),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IkStatus {
    Exact,
    /// Target outside the workspace; the nearest reachable configuration was returned.
    Clamped,
    /// Target at the hip; leg direction undefined.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub joints: Vector3<f64>,
    pub status: IkStatus,
}

/// Leg joints `(γ, φ, ℓ)` from a hip-frame foot vector.
pub fn leg_inverse(d: &Vector3<f64>, params: &ModelParams) -> IkSolution {
    use std::f64::consts::FRAC_PI_2;
    let length = d.norm();
    if length < 1e-9 {
        return IkSolution {
            joints: Vector3::new(0.0, 0.0, params.leg_length_min),
            status: IkStatus::Degenerate,
        };
    }
    let gamma = (d.y / length).clamp(-1.0, 1.0).asin();
    let phi = (-d.x).atan2(-d.z);
    let mut status = IkStatus::Exact;
    let clamped_length = length.clamp(params.leg_length_min, params.leg_length_max);
    let clamped_phi = phi.clamp(-FRAC_PI_2, FRAC_PI_2);
    if clamped_length != length || clamped_phi != phi {
        status = IkStatus::Clamped;
    }
    IkSolution {
        joints: Vector3::new(gamma, clamped_phi, clamped_length),
        status,
    }
}

/// Inverts forward kinematics for a world-frame foot target at the given body pose.
pub fn inverse_kinematics(
    foot_target_world: &Vector3<f64>,
    pose: &BodyPose,
    params: &ModelParams,
    leg: LegId,
) -> IkSolution {
    let d = pose.rotation.transpose() * (foot_target_world - pose.position) - params.hip_offsets[leg.index()];
    leg_inverse(&d, params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointReference {
    pub positions: Vector12,
    pub rates: Vector12,
    pub accelerations: Vector12,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JointGains {
    pub kp: f64,
    pub kd: f64,
}

impl Default for JointGains {
    fn default() -> Self {
        Self { kp: 400.0, kd: 40.0 }
    }
}

/// `u_L = q̈_ref + K_p (q_ref − q) + K_d (q̇_ref − q̇)`.
pub fn joint_command(reference: &JointReference, legs: &LegJoints, gains: &JointGains) -> Vector12 {
    reference.accelerations
        + (reference.positions - legs.positions) * gains.kp
        + (reference.rates - legs.rates) * gains.kd
}

/// Output of one planner tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerOutput {
    pub reference: JointReference,
    pub stance: StancePair,
    pub phase: f64,
    /// Legs whose reference had to be clamped to the workspace this tick.
    pub clamped: [bool; 4],
}

/// Stateful trot planner.
#[derive(Debug, Clone)]
pub struct GaitPlanner {
    schedule: GaitSchedule,
    ground_height: f64,
    body_reference: Vector3<f64>,
    /// Stance foothold, or liftoff point while the leg swings.
    footholds: [Vector3<f64>; 4],
    targets: [Vector3<f64>; 4],
    pair: StancePair,
    half_cycle: i64,
}

impl GaitPlanner {
    /// Planner for a robot standing with every foot under its hip.
    pub fn standing(params: &ModelParams, schedule: GaitSchedule, body_position: Vector3<f64>, ground_height: f64) -> Self {
        let footholds = params
            .hip_offsets
            .map(|h| Vector3::new(body_position.x + h.x, body_position.y + h.y, ground_height));
        Self {
            schedule,
            ground_height,
            body_reference: body_position,
            footholds,
            targets: footholds,
            pair: StancePair::FrBl,
            half_cycle: 0,
        }
    }

    pub fn schedule(&self) -> &GaitSchedule {
        &self.schedule
    }

    pub fn footholds(&self) -> &[Vector3<f64>; 4] {
        &self.footholds
    }

    pub fn body_reference(&self) -> Vector3<f64> {
        self.body_reference
    }

    /// Stance pair scheduled at time `t`.
    pub fn stance_at(&self, t: f64) -> StancePair {
        stance_pair(t, &self.schedule).0
    }

    /// Joint positions placing every foot on its foothold at the reference pose.
    pub fn initial_joints(&self, params: &ModelParams) -> Vector12 {
        let pose = BodyPose::level(self.body_reference);
        let mut q = Vector12::zeros();
        for leg in LegId::ALL {
            let ik = inverse_kinematics(&self.footholds[leg.index()], &pose, params, leg);
            q.fixed_rows_mut::<3>(3 * leg.index()).copy_from(&ik.joints);
        }
        q
    }

    /// Computes joint references at time `t` and advances the body reference by `dt`.
    pub fn update(
        &mut self,
        t: f64,
        state: &RobotState,
        v_applied: &Vector3<f64>,
        params: &ModelParams,
        dt: f64,
    ) -> PlannerOutput {
        let (pair, phase) = stance_pair(t, &self.schedule);
        let half_cycle = (t / self.schedule.stance_duration()).floor() as i64;
        if half_cycle != self.half_cycle {
            if pair != self.pair {
                for leg in pair.stance_legs() {
                    self.footholds[leg.index()] = self.targets[leg.index()];
                }
            }
            self.pair = pair;
            self.half_cycle = half_cycle;
        }

        let v_ref = horizontal(v_applied);
        let pose = BodyPose::level(self.body_reference);
        let mut reference = JointReference {
            positions: Vector12::zeros(),
            rates: Vector12::zeros(),
            accelerations: Vector12::zeros(),
        };
        let mut clamped = [false; 4];
        for leg in LegId::ALL {
            let i = leg.index();
            let sample = if pair.contains(leg) {
                SwingSample::stationary(self.footholds[i])
            } else {
                let hip = self.body_reference + params.hip_offsets[i];
                self.targets[i] = raibert_target(&hip, &state.twist.linear, &v_ref, &self.schedule, self.ground_height);
                swing_trajectory(
                    phase,
                    &self.footholds[i],
                    &self.targets[i],
                    self.schedule.swing_height,
                    self.schedule.stance_duration(),
                )
            };
            let ik = inverse_kinematics(&sample.position, &pose, params, leg);
            let q = ik.joints;
            let (mut qd, mut qdd) = (Vector3::zeros(), Vector3::zeros());
            if ik.status == IkStatus::Exact {
                if let Some(j_inv) = leg_jacobian(&q).try_inverse() {
                    qd = j_inv * (sample.velocity - v_ref);
                    qdd = j_inv * (sample.acceleration - jacobian_rate_times_rate(&q, &qd));
                }
            } else {
                clamped[i] = true;
            }
            debug_assert!(joints_within_limits(&q, params));
            reference.positions.fixed_rows_mut::<3>(3 * i).copy_from(&q);
            reference.rates.fixed_rows_mut::<3>(3 * i).copy_from(&qd);
            reference.accelerations.fixed_rows_mut::<3>(3 * i).copy_from(&qdd);
        }
        self.body_reference += v_ref * dt;
        PlannerOutput {
            reference,
            stance: pair,
            phase,
            clamped,
        }
    }
}

/// `J̇(q) q̇` for the leg chain, by central difference of the Jacobian along `q̇`.
fn jacobian_rate_times_rate(q: &Vector3<f64>, qd: &Vector3<f64>) -> Vector3<f64> {
    let eps = 1e-6;
    let dj: Matrix3<f64> = (leg_jacobian(&(q + qd * eps)) - leg_jacobian(&(q - qd * eps))) / (2.0 * eps);
    dj * qd
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{forward_kinematics, leg_vector};
    use crate::model::BodyTwist;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn stance_pair_alternates() {
        let s = GaitSchedule::default();
        assert_eq!(stance_pair(0.0, &s), (StancePair::FrBl, 0.0));
        assert_eq!(stance_pair(s.cycle_period, &s).0, StancePair::FrBl);
        assert_eq!(stance_pair(s.cycle_period / 2.0, &s).0, StancePair::FlBr);
        for k in 0..200 {
            let t = k as f64 * 0.013;
            let a = stance_pair(t, &s).0.stance_legs();
            let b = stance_pair(t + s.cycle_period / 2.0, &s).0.stance_legs();
            assert!(a.iter().all(|l| !b.contains(l)));
        }
    }

    #[test]
    fn raibert_placement() {
        let s = GaitSchedule {
            cycle_period: 0.8,
            velocity_gain: 0.0,
            ..GaitSchedule::default()
        };
        let hip = Vector3::new(0.3, -0.1, 0.25);
        let zero = Vector3::zeros();
        assert_eq!(raibert_target(&hip, &zero, &zero, &s, 0.0), Vector3::new(0.3, -0.1, 0.0));
        let t = raibert_target(&hip, &zero, &Vector3::new(0.2, 0.0, 0.0), &s, 0.0);
        assert_relative_eq!(t, Vector3::new(0.34, -0.1, 0.0), epsilon = 1e-15);

        let s = GaitSchedule::default();
        let lateral = raibert_target(&hip, &Vector3::new(0.0, 0.1, 0.0), &zero, &s, 0.0);
        assert!(lateral.y > hip.y);
        let lateral = raibert_target(&hip, &Vector3::new(0.0, -0.1, 0.0), &zero, &s, 0.0);
        assert!(lateral.y < hip.y);
    }

    #[test]
    fn swing_endpoints_and_apex() {
        let a = Vector3::new(0.0, 0.1, 0.0);
        let b = Vector3::new(0.08, 0.12, 0.02);
        let start = swing_trajectory(0.0, &a, &b, 0.05, 0.4);
        let end = swing_trajectory(1.0, &a, &b, 0.05, 0.4);
        assert_eq!(start.position, a);
        assert_relative_eq!(end.position, b, epsilon = 1e-15);
        assert!(start.velocity.norm() < 1e-15);
        assert!(end.velocity.norm() < 1e-15);
        let apex = swing_trajectory(0.5, &a, &b, 0.05, 0.4);
        assert_relative_eq!(apex.position.z, 0.02 + 0.05, epsilon = 1e-15);
    }

    #[test]
    fn swing_derivatives_are_consistent() {
        let a = Vector3::new(0.0, 0.1, 0.0);
        let b = Vector3::new(0.08, 0.12, -0.01);
        let duration = 0.4;
        let h = 1e-6;
        for k in 1..20 {
            let s = k as f64 / 20.0;
            let mid = swing_trajectory(s, &a, &b, 0.05, duration);
            let fwd = swing_trajectory(s + h / duration, &a, &b, 0.05, duration);
            let bwd = swing_trajectory(s - h / duration, &a, &b, 0.05, duration);
            assert_relative_eq!((fwd.position - bwd.position) / (2.0 * h), mid.velocity, epsilon = 1e-6);
            assert_relative_eq!((fwd.velocity - bwd.velocity) / (2.0 * h), mid.acceleration, epsilon = 1e-4);
        }
    }

    #[test]
    fn ik_textbook_cases() {
        let p = ModelParams::default();
        let straight = leg_inverse(&Vector3::new(0.0, 0.0, -0.3), &p);
        assert_eq!(straight.status, IkStatus::Exact);
        assert_relative_eq!(straight.joints, Vector3::new(0.0, 0.0, 0.3), epsilon = 1e-15);
        let back = leg_inverse(&Vector3::new(-0.3, 0.0, 0.0), &p);
        assert_relative_eq!(back.joints, Vector3::new(0.0, FRAC_PI_2, 0.3), epsilon = 1e-15);
    }

    #[test]
    fn ik_flags_unreachable_and_degenerate() {
        let p = ModelParams::default();
        let far = leg_inverse(&Vector3::new(0.0, 0.0, -1.0), &p);
        assert_eq!(far.status, IkStatus::Clamped);
        assert_eq!(far.joints.z, p.leg_length_max);
        let near = leg_inverse(&Vector3::new(0.0, 0.0, -0.01), &p);
        assert_eq!(near.status, IkStatus::Clamped);
        assert_eq!(near.joints.z, p.leg_length_min);
        assert_eq!(leg_inverse(&Vector3::zeros(), &p).status, IkStatus::Degenerate);
    }

    #[test]
    fn joint_command_pd_law() {
        let gains = JointGains::default();
        let legs = LegJoints::from_positions(Vector12::zeros());
        let zero_ref = JointReference {
            positions: Vector12::zeros(),
            rates: Vector12::zeros(),
            accelerations: Vector12::zeros(),
        };
        assert_eq!(joint_command(&zero_ref, &legs, &gains), Vector12::zeros());

        let gains = JointGains { kp: 100.0, kd: 40.0 };
        let e = Vector12::from_fn(|i, _| 0.01 * i as f64 - 0.05);
        let ff = Vector12::repeat(0.7);
        let r = JointReference {
            positions: e,
            rates: Vector12::zeros(),
            accelerations: ff,
        };
        assert_relative_eq!(joint_command(&r, &legs, &gains), ff + e * 100.0, epsilon = 1e-12);
    }

    #[test]
    fn joint_loop_tracks_ramp_without_velocity_error() {
        // q̈ = u_L is a double integrator; simulate tracking of q_ref = 0.5 t.
        let gains = JointGains::default();
        let (mut q, mut qd) = (0.0f64, 0.0f64);
        let dt = 1e-4;
        for k in 0..20_000 {
            let t = k as f64 * dt;
            let u = 0.0 + gains.kp * (0.5 * t - q) + gains.kd * (0.5 - qd);
            qd += u * dt;
            q += qd * dt;
        }
        assert!((qd - 0.5).abs() < 1e-6, "velocity error {}", qd - 0.5);
        assert!((q - 0.5 * 2.0).abs() < 1e-3);
    }

    #[test]
    fn planner_references_stay_within_limits() {
        let params = ModelParams::default();
        let body = Vector3::new(0.0, 0.0, 0.3);
        let mut planner = GaitPlanner::standing(&params, GaitSchedule::default(), body, 0.0);
        let legs = LegJoints::from_positions(planner.initial_joints(&params));
        let mut state = RobotState {
            pose: BodyPose::level(body),
            twist: BodyTwist::default(),
            legs,
        };
        let v = Vector3::new(0.2, 0.0, 0.0);
        let dt = 5e-4;
        for k in 0..4000 {
            let out = planner.update(k as f64 * dt, &state, &v, &params, dt);
            for leg in LegId::ALL {
                let q = out.reference.positions.fixed_rows::<3>(3 * leg.index()).into_owned();
                assert!(joints_within_limits(&q, &params));
            }
            state.pose.position = planner.body_reference();
            state.twist.linear = v;
        }
    }

    #[test]
    fn stance_reference_pins_foot_in_world() {
        let params = ModelParams::default();
        let body = Vector3::new(0.0, 0.0, 0.3);
        let mut planner = GaitPlanner::standing(&params, GaitSchedule::default(), body, 0.0);
        let v = Vector3::new(0.2, 0.05, 0.0);
        let state = RobotState {
            pose: BodyPose::level(body),
            twist: BodyTwist::default(),
            legs: LegJoints::from_positions(planner.initial_joints(&params)),
        };
        let dt = 5e-4;
        for k in 0..300 {
            let body_now = planner.body_reference();
            let out = planner.update(k as f64 * dt, &state, &v, &params, dt);
            let probe = RobotState {
                pose: BodyPose::level(body_now),
                twist: BodyTwist { linear: v, angular: Vector3::zeros() },
                legs: LegJoints {
                    positions: out.reference.positions,
                    rates: out.reference.rates,
                },
            };
            for leg in out.stance.stance_legs() {
                let foot = forward_kinematics(&probe, &params, leg);
                assert_relative_eq!(foot, planner.footholds()[leg.index()], epsilon = 1e-12);
                let vel = crate::dynamics::foot_velocity(&probe, &params, leg);
                assert!(vel.norm() < 1e-10, "stance foot velocity {vel}");
            }
        }
    }

    proptest! {
        #[test]
        fn fk_ik_round_trip(
            gamma in -1.2f64..1.2,
            phi in -1.4f64..1.4,
            length in 0.15f64..0.45,
            roll in -0.5f64..0.5,
            pitch in -0.5f64..0.5,
            yaw in -3.0f64..3.0,
            x in -1.0f64..1.0,
            y in -1.0f64..1.0,
            z in 0.0f64..1.0,
        ) {
            let params = ModelParams::default();
            let pose = BodyPose::new(Vector3::new(x, y, z), crate::so3::from_euler_zyx(&Vector3::new(roll, pitch, yaw)));
            let leg = LegId::BackRight;
            let target = pose.position + pose.rotation * (params.hip_offsets[leg.index()] + leg_vector(&Vector3::new(gamma, phi, length)));
            let ik = inverse_kinematics(&target, &pose, &params, leg);
            prop_assert_eq!(ik.status, IkStatus::Exact);
            let mut legs = LegJoints::from_positions(Vector12::zeros());
            legs.set_leg(leg, &ik.joints);
            let state = RobotState { pose, twist: BodyTwist::default(), legs };
            prop_assert!((forward_kinematics(&state, &params, leg) - target).norm() < 1e-10);
        }

        #[test]
        fn swing_is_c1_in_phase(s in 0.0f64..1.0) {
            let a = Vector3::new(0.0, 0.0, 0.0);
            let b = Vector3::new(0.1, -0.02, 0.01);
            let h = 1e-7;
            let lo = swing_trajectory((s - h).max(0.0), &a, &b, 0.05, 1.0);
            let hi = swing_trajectory((s + h).min(1.0), &a, &b, 0.05, 1.0);
            prop_assert!((hi.position - lo.position).norm() < 1e-5);
            prop_assert!((hi.velocity - lo.velocity).norm() < 1e-4);
        }
    }
}
