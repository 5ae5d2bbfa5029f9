//! Robot description and state containers.

use std::fmt;

use nalgebra::{Matrix3, SVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::so3;

pub type Vector12 = SVector<f64, 12>;

/// Gravitational acceleration used by the defaults [m/s²].
pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LegId {
    FrontRight,
    FrontLeft,
    BackRight,
    BackLeft,
}

impl LegId {
    pub const ALL: [LegId; 4] = [LegId::FrontRight, LegId::FrontLeft, LegId::BackRight, LegId::BackLeft];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn short_name(self) -> &'static str {
        match self {
            LegId::FrontRight => "fr",
            LegId::FrontLeft => "fl",
            LegId::BackRight => "br",
            LegId::BackLeft => "bl",
        }
    }
}

impl fmt::Display for LegId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.short_name().to_uppercase())
    }
}

/// Physical parameters of the reduced-order model.
///
/// Per-leg arrays are indexed by [`LegId::index`]; per-thruster arrays use the
/// same corner ordering (front-right, front-left, back-right, back-left).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Total mass [kg].
    pub mass: f64,
    /// Body inertia about the COM, body frame [kg·m²].
    pub inertia: Matrix3<f64>,
    /// Hip joint locations, body frame [m].
    pub hip_offsets: [Vector3<f64>; 4],
    /// Thruster locations, body frame [m].
    pub thruster_offsets: [Vector3<f64>; 4],
    /// World-frame gravity [m/s²].
    pub gravity: Vector3<f64>,
    /// Per-thruster maximum force [N].
    pub max_thrust: f64,
    pub leg_length_min: f64,
    pub leg_length_max: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            mass: 8.0,
            inertia: Matrix3::from_diagonal(&Vector3::new(0.08, 0.30, 0.30)),
            hip_offsets: [
                Vector3::new(0.15, -0.10, 0.0),
                Vector3::new(0.15, 0.10, 0.0),
                Vector3::new(-0.15, -0.10, 0.0),
                Vector3::new(-0.15, 0.10, 0.0),
            ],
            thruster_offsets: [
                Vector3::new(0.15, -0.15, 0.0),
                Vector3::new(0.15, 0.15, 0.0),
                Vector3::new(-0.15, -0.15, 0.0),
                Vector3::new(-0.15, 0.15, 0.0),
            ],
            gravity: Vector3::new(0.0, 0.0, -STANDARD_GRAVITY),
            max_thrust: 2.0 * STANDARD_GRAVITY,
            leg_length_min: 0.15,
            leg_length_max: 0.45,
        }
    }
}

impl ModelParams {
    pub fn weight(&self) -> f64 {
        self.mass * self.gravity.norm()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(format!("mass must be positive, got {}", self.mass));
        }
        if (self.inertia - self.inertia.transpose()).amax() > 1e-12 * self.inertia.amax().max(1.0) {
            return Err("inertia tensor must be symmetric".into());
        }
        if self.inertia.cholesky().is_none() {
            return Err("inertia tensor must be positive definite".into());
        }
        if !(self.max_thrust.is_finite() && self.max_thrust >= 0.0) {
            return Err(format!("max_thrust must be nonnegative, got {}", self.max_thrust));
        }
        if !(self.leg_length_min > 0.0 && self.leg_length_min < self.leg_length_max) {
            return Err(format!(
                "leg length limits must satisfy 0 < min < max, got [{}, {}]",
                self.leg_length_min, self.leg_length_max
            ));
        }
        let finite = self.gravity.iter().all(|x| x.is_finite())
            && self.hip_offsets.iter().chain(&self.thruster_offsets).all(|v| v.iter().all(|x| x.is_finite()));
        if !finite {
            return Err("gravity and offsets must be finite".into());
        }
        Ok(())
    }
}

/// Body position and orientation (body → world rotation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyPose {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl BodyPose {
    pub fn new(position: Vector3<f64>, rotation: Matrix3<f64>) -> Self {
        Self { position, rotation }
    }

    pub fn level(position: Vector3<f64>) -> Self {
        Self::new(position, Matrix3::identity())
    }

    /// Z-Y-X Euler angles `(roll, pitch, yaw)`.
    pub fn euler(&self) -> Vector3<f64> {
        so3::euler_zyx(&self.rotation)
    }
}

/// World-frame linear velocity and body-frame angular velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyTwist {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
}

impl BodyTwist {
    pub fn as_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.linear);
        v.fixed_rows_mut::<3>(3).copy_from(&self.angular);
        v
    }
}

/// Leg coordinates `(γ, φ, ℓ)` per leg: hip-frontal angle, hip-sagittal angle
/// and leg length, stacked as four 3-blocks in [`LegId`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegJoints {
    pub positions: Vector12,
    pub rates: Vector12,
}

impl LegJoints {
    pub fn from_positions(positions: Vector12) -> Self {
        Self {
            positions,
            rates: Vector12::zeros(),
        }
    }

    pub fn leg(&self, leg: LegId) -> Vector3<f64> {
        self.positions.fixed_rows::<3>(3 * leg.index()).into_owned()
    }

    pub fn leg_rate(&self, leg: LegId) -> Vector3<f64> {
        self.rates.fixed_rows::<3>(3 * leg.index()).into_owned()
    }

    pub fn set_leg(&mut self, leg: LegId, joints: &Vector3<f64>) {
        self.positions.fixed_rows_mut::<3>(3 * leg.index()).copy_from(joints);
    }

    /// Checks the joint-limit invariant for every leg.
    pub fn within_limits(&self, params: &ModelParams) -> bool {
        LegId::ALL.iter().all(|&leg| joints_within_limits(&self.leg(leg), params))
    }
}

pub fn joints_within_limits(q: &Vector3<f64>, params: &ModelParams) -> bool {
    let half_pi = std::f64::consts::FRAC_PI_2;
    q.x.abs() <= half_pi && q.y.abs() <= half_pi && q.z >= params.leg_length_min && q.z <= params.leg_length_max
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub pose: BodyPose,
    pub twist: BodyTwist,
    pub legs: LegJoints,
}

impl RobotState {
    pub fn is_finite(&self) -> bool {
        self.pose.position.iter().all(|x| x.is_finite())
            && self.pose.rotation.iter().all(|x| x.is_finite())
            && self.twist.linear.iter().all(|x| x.is_finite())
            && self.twist.angular.iter().all(|x| x.is_finite())
            && self.legs.positions.iter().all(|x| x.is_finite())
            && self.legs.rates.iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    World,
    Body,
}

/// Force and moment expressed in a single declared frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
    pub frame: Frame,
}

impl Wrench {
    pub fn new(force: Vector3<f64>, moment: Vector3<f64>, frame: Frame) -> Self {
        Self { force, moment, frame }
    }

    pub fn zero(frame: Frame) -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros(), frame)
    }

    pub fn force_world(&self, rotation: &Matrix3<f64>) -> Vector3<f64> {
        match self.frame {
            Frame::World => self.force,
            Frame::Body => rotation * self.force,
        }
    }

    pub fn moment_body(&self, rotation: &Matrix3<f64>) -> Vector3<f64> {
        match self.frame {
            Frame::World => rotation.transpose() * self.moment,
            Frame::Body => self.moment,
        }
    }

    pub fn moment_world(&self, rotation: &Matrix3<f64>) -> Vector3<f64> {
        match self.frame {
            Frame::World => self.moment,
            Frame::Body => rotation * self.moment,
        }
    }

    /// Image in the generalized coordinates: world-frame force rows followed
    /// by body-frame moment rows.
    pub fn generalized(&self, rotation: &Matrix3<f64>) -> Vector6<f64> {
        let mut g = Vector6::zeros();
        g.fixed_rows_mut::<3>(0).copy_from(&self.force_world(rotation));
        g.fixed_rows_mut::<3>(3).copy_from(&self.moment_body(rotation));
        g
    }
}
