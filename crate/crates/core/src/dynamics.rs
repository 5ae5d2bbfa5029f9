//! Rigid-body model with massless legs.
//!
//! Generalized velocity is `v = [ṗ_B; ω_B]` with `ṗ_B` in the world frame and
//! `ω_B` in the body frame. The equations of motion read
//!
//! ```text
//! M v̇ + h = Σ B_iᵀ u_i + u_t,      Ṙ = R [ω]×,      q̈_L = u_L
//! ```
//!
//! where `B_i` maps `v` to the world velocity of foot `i` (body held rigid)
//! and `u_t` is the thruster wrench in generalized coordinates.

use std::ops::{Add, Div, Mul};

use nalgebra::{Matrix3, Matrix3x6, Matrix6, Vector3, Vector4, Vector6};
use thiserror::Error;

use crate::contact::GrfSet;
use crate::model::{Frame, LegId, ModelParams, RobotState, Vector12, Wrench};
use crate::so3::{rot_x, rot_y, skew};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ThrustError {
    #[error("thruster {index} command {value} N is negative")]
    Negative { index: usize, value: f64 },
    #[error("thruster {index} command {value} N exceeds the {max} N limit")]
    AboveLimit { index: usize, value: f64, max: f64 },
    #[error("thruster {index} command is not finite")]
    NonFinite { index: usize },
}

/// Leg vector from the hip to the foot in the body frame,
/// `R_y(φ) R_x(γ) [0, 0, −ℓ]ᵀ` for joints `(γ, φ, ℓ)`.
pub fn leg_vector(joints: &Vector3<f64>) -> Vector3<f64> {
    let (sg, cg) = joints.x.sin_cos();
    let (sp, cp) = joints.y.sin_cos();
    let l = joints.z;
    Vector3::new(-l * sp * cg, l * sg, -l * cp * cg)
}

/// ∂(leg_vector)/∂(γ, φ, ℓ).
pub fn leg_jacobian(joints: &Vector3<f64>) -> Matrix3<f64> {
    let (sg, cg) = joints.x.sin_cos();
    let (sp, cp) = joints.y.sin_cos();
    let l = joints.z;
    Matrix3::new(
        l * sp * sg,
        -l * cp * cg,
        -sp * cg,
        l * cg,
        0.0,
        sg,
        l * cp * sg,
        l * sp * cg,
        -cp * cg,
    )
}

/// Foot position relative to the COM, body frame.
pub fn foot_offset_body(state: &RobotState, params: &ModelParams, leg: LegId) -> Vector3<f64> {
    params.hip_offsets[leg.index()] + leg_vector(&state.legs.leg(leg))
}

/// World position of the foot: `p_B + R_B p_h + R_B R_y(φ) R_x(γ) [0,0,−ℓ]ᵀ`.
pub fn forward_kinematics(state: &RobotState, params: &ModelParams, leg: LegId) -> Vector3<f64> {
    state.pose.position + state.pose.rotation * foot_offset_body(state, params, leg)
}

/// Foot velocity sensitivity to `v = [ṗ_B; ω_B]` with the leg joints frozen:
/// `[I₃, −R_B [r]×]`.
pub fn foot_velocity_jacobian(state: &RobotState, params: &ModelParams, leg: LegId) -> Matrix3x6<f64> {
    let r = foot_offset_body(state, params, leg);
    let mut j = Matrix3x6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    j.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-state.pose.rotation * skew(&r)));
    j
}

/// `J̇ v` for a foot rigidly attached to the body at its current offset:
/// `R_B (ω × (ω × r))`.
pub fn foot_jacobian_rate_times_velocity(state: &RobotState, params: &ModelParams, leg: LegId) -> Vector3<f64> {
    let r = foot_offset_body(state, params, leg);
    let w = state.twist.angular;
    state.pose.rotation * w.cross(&w.cross(&r))
}

/// Full world-frame foot velocity, including the contribution of the leg
/// joint rates.
pub fn foot_velocity(state: &RobotState, params: &ModelParams, leg: LegId) -> Vector3<f64> {
    let q = state.legs.leg(leg);
    let qd = state.legs.leg_rate(leg);
    let r = foot_offset_body(state, params, leg);
    let w = state.twist.angular;
    state.twist.linear + state.pose.rotation * (w.cross(&r) + leg_jacobian(&q) * qd)
}

/// `blkdiag(m I₃, I_B)`; constant because the legs carry no mass.
pub fn mass_matrix(params: &ModelParams) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Matrix3::identity() * params.mass));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&params.inertia);
    m
}

/// `h = [−m g; ω × I_B ω]`.
pub fn bias_vector(state: &RobotState, params: &ModelParams) -> Vector6<f64> {
    let w = state.twist.angular;
    let mut h = Vector6::zeros();
    h.fixed_rows_mut::<3>(0).copy_from(&(-params.mass * params.gravity));
    h.fixed_rows_mut::<3>(3).copy_from(&w.cross(&(params.inertia * w)));
    h
}

/// Body-frame wrench of the four upward-only thrusters.
pub fn thruster_wrench(thrusts: &Vector4<f64>, params: &ModelParams) -> Result<Wrench, ThrustError> {
    let mut force = Vector3::zeros();
    let mut moment = Vector3::zeros();
    for (index, (&f, offset)) in thrusts.iter().zip(&params.thruster_offsets).enumerate() {
        if !f.is_finite() {
            return Err(ThrustError::NonFinite { index });
        }
        if f < 0.0 {
            return Err(ThrustError::Negative { index, value: f });
        }
        if f > params.max_thrust {
            return Err(ThrustError::AboveLimit {
                index,
                value: f,
                max: params.max_thrust,
            });
        }
        let fv = Vector3::new(0.0, 0.0, f);
        force += fv;
        moment += offset.cross(&fv);
    }
    Ok(Wrench::new(force, moment, Frame::Body))
}

/// `Σ B_iᵀ u_i` for the given contact forces.
pub fn generalized_grf(state: &RobotState, params: &ModelParams, grf: &GrfSet) -> Vector6<f64> {
    let rt = state.pose.rotation.transpose();
    let mut g = Vector6::zeros();
    for leg in LegId::ALL {
        let u = grf.forces[leg.index()];
        let r = foot_offset_body(state, params, leg);
        let mut f = g.fixed_rows_mut::<3>(0);
        f += u;
        let mut m = g.fixed_rows_mut::<3>(3);
        m += r.cross(&(rt * u));
    }
    g
}

/// Time derivative of [`RobotState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub linear_acceleration: Vector3<f64>,
    pub angular_acceleration: Vector3<f64>,
    pub leg_rates: Vector12,
    pub leg_accelerations: Vector12,
}

impl StateDerivative {
    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.rotation.iter().all(|x| x.is_finite())
            && self.linear_acceleration.iter().all(|x| x.is_finite())
            && self.angular_acceleration.iter().all(|x| x.is_finite())
            && self.leg_rates.iter().all(|x| x.is_finite())
            && self.leg_accelerations.iter().all(|x| x.is_finite())
    }
}

impl Add for StateDerivative {
    type Output = StateDerivative;

    fn add(self, o: Self) -> Self {
        Self {
            position: self.position + o.position,
            rotation: self.rotation + o.rotation,
            linear_acceleration: self.linear_acceleration + o.linear_acceleration,
            angular_acceleration: self.angular_acceleration + o.angular_acceleration,
            leg_rates: self.leg_rates + o.leg_rates,
            leg_accelerations: self.leg_accelerations + o.leg_accelerations,
        }
    }
}

impl Mul<f64> for StateDerivative {
    type Output = StateDerivative;

    fn mul(self, s: f64) -> Self {
        Self {
            position: self.position * s,
            rotation: self.rotation * s,
            linear_acceleration: self.linear_acceleration * s,
            angular_acceleration: self.angular_acceleration * s,
            leg_rates: self.leg_rates * s,
            leg_accelerations: self.leg_accelerations * s,
        }
    }
}

impl Div<f64> for StateDerivative {
    type Output = StateDerivative;

    fn div(self, s: f64) -> Self {
        Self {
            position: self.position / s,
            rotation: self.rotation / s,
            linear_acceleration: self.linear_acceleration / s,
            angular_acceleration: self.angular_acceleration / s,
            leg_rates: self.leg_rates / s,
            leg_accelerations: self.leg_accelerations / s,
        }
    }
}

impl RobotState {
    /// `self + h · d`, componentwise. The rotation leaves SO(3) and must be
    /// reprojected by the caller.
    pub fn advanced(&self, d: &StateDerivative, h: f64) -> RobotState {
        let mut next = *self;
        next.pose.position += d.position * h;
        next.pose.rotation += d.rotation * h;
        next.twist.linear += d.linear_acceleration * h;
        next.twist.angular += d.angular_acceleration * h;
        next.legs.positions += d.leg_rates * h;
        next.legs.rates += d.leg_accelerations * h;
        next
    }
}

/// Solves `M v̇ = Σ B_iᵀ u_i + u_t − h` and assembles the full derivative.
pub fn dynamics_rhs(
    state: &RobotState,
    params: &ModelParams,
    grf: &GrfSet,
    thrust: &Wrench,
    leg_accelerations: &Vector12,
) -> StateDerivative {
    let generalized = generalized_grf(state, params, grf) + thrust.generalized(&state.pose.rotation)
        - bias_vector(state, params);
    let linear_acceleration = generalized.fixed_rows::<3>(0) / params.mass;
    let angular_acceleration = params
        .inertia
        .cholesky()
        .expect("inertia validated as SPD")
        .solve(&generalized.fixed_rows::<3>(3).into_owned());
    StateDerivative {
        position: state.twist.linear,
        rotation: state.pose.rotation * skew(&state.twist.angular),
        linear_acceleration,
        angular_acceleration,
        leg_rates: state.legs.rates,
        leg_accelerations: *leg_accelerations,
    }
}

/// Translational kinetic + rotational kinetic + gravitational potential energy.
pub fn total_energy(state: &RobotState, params: &ModelParams) -> f64 {
    let v = state.twist.linear;
    let w = state.twist.angular;
    0.5 * params.mass * v.dot(&v) + 0.5 * w.dot(&(params.inertia * w))
        - params.mass * params.gravity.dot(&state.pose.position)
}

/// World-frame angular momentum about the COM.
pub fn angular_momentum_world(state: &RobotState, params: &ModelParams) -> Vector3<f64> {
    state.pose.rotation * (params.inertia * state.twist.angular)
}

/// Convenience: rotation of the leg chain `R_y(φ) R_x(γ)` for inspection.
pub fn leg_rotation(joints: &Vector3<f64>) -> Matrix3<f64> {
    rot_y(joints.y) * rot_x(joints.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BodyPose, BodyTwist, LegJoints};
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn level_state(legs: Vector12) -> RobotState {
        RobotState {
            pose: BodyPose::level(Vector3::zeros()),
            twist: BodyTwist::default(),
            legs: LegJoints::from_positions(legs),
        }
    }

    #[test]
    fn zero_angle_leg_hangs_below_hip() {
        let mut params = ModelParams::default();
        params.hip_offsets[0] = Vector3::new(0.15, 0.1, 0.0);
        let mut q = Vector12::zeros();
        q[2] = 0.3;
        let p = forward_kinematics(&level_state(q), &params, LegId::FrontRight);
        assert_relative_eq!(p, Vector3::new(0.15, 0.1, -0.3), epsilon = 1e-15);
    }

    #[test]
    fn sagittal_quarter_turn_points_backward() {
        let mut params = ModelParams::default();
        params.hip_offsets[0] = Vector3::zeros();
        let mut q = Vector12::zeros();
        q[1] = FRAC_PI_2;
        q[2] = 0.3;
        let p = forward_kinematics(&level_state(q), &params, LegId::FrontRight);
        assert_relative_eq!(p, Vector3::new(-0.3, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn leg_vector_matches_rotation_chain() {
        let q = Vector3::new(0.3, -0.7, 0.32);
        assert_relative_eq!(leg_vector(&q), leg_rotation(&q) * Vector3::new(0.0, 0.0, -q.z), epsilon = 1e-15);
    }

    #[test]
    fn jacobian_at_hip_uses_hip_offset() {
        let params = ModelParams::default();
        let mut state = level_state(Vector12::zeros());
        state.pose.rotation = crate::so3::from_euler_zyx(&Vector3::new(0.1, 0.2, 0.3));
        let j = foot_velocity_jacobian(&state, &params, LegId::BackLeft);
        let expected = -state.pose.rotation * skew(&params.hip_offsets[LegId::BackLeft.index()]);
        assert_relative_eq!(j.fixed_view::<3, 3>(0, 3).into_owned(), expected, epsilon = 1e-15);
        assert_relative_eq!(j.fixed_view::<3, 3>(0, 0).into_owned(), Matrix3::identity());
    }

    #[test]
    fn mass_matrix_translational_block() {
        let m = mass_matrix(&ModelParams::default());
        assert_relative_eq!(m.fixed_view::<3, 3>(0, 0).into_owned(), Matrix3::identity() * 8.0);
        assert_eq!(m, m.transpose());
        assert!(m.cholesky().is_some());
    }

    #[test]
    fn gyroscopic_term_vanishes_on_principal_axes() {
        let params = ModelParams::default();
        let mut state = level_state(Vector12::zeros());
        assert_eq!(bias_vector(&state, &params).fixed_rows::<3>(3).norm(), 0.0);
        state.twist.angular = Vector3::new(0.0, 3.0, 0.0);
        assert_eq!(bias_vector(&state, &params).fixed_rows::<3>(3).norm(), 0.0);
        state.twist.angular = Vector3::new(1.0, 3.0, 0.0);
        assert!(bias_vector(&state, &params).fixed_rows::<3>(3).norm() > 0.0);
    }

    #[test]
    fn free_fall_accelerates_at_gravity() {
        let params = ModelParams::default();
        let state = level_state(Vector12::zeros());
        let d = dynamics_rhs(&state, &params, &GrfSet::default(), &Wrench::zero(Frame::World), &Vector12::zeros());
        assert_eq!(d.linear_acceleration, params.gravity);
        assert_eq!(d.angular_acceleration, Vector3::zeros());
    }

    #[test]
    fn hover_thrust_cancels_gravity() {
        let params = ModelParams::default();
        let state = level_state(Vector12::zeros());
        let hover = Wrench::new(Vector3::new(0.0, 0.0, params.mass * 9.81), Vector3::zeros(), Frame::World);
        let d = dynamics_rhs(&state, &params, &GrfSet::default(), &hover, &Vector12::zeros());
        assert!(d.linear_acceleration.norm() < 1e-14);
    }

    #[test]
    fn balanced_stance_is_static() {
        let params = ModelParams::default();
        let mut q = Vector12::zeros();
        for leg in LegId::ALL {
            q[3 * leg.index() + 2] = 0.3;
        }
        let state = level_state(q);
        let mut grf = GrfSet::default();
        for leg in LegId::ALL {
            grf.forces[leg.index()] = Vector3::new(0.0, 0.0, params.weight() / 4.0);
            grf.in_contact[leg.index()] = true;
        }
        let d = dynamics_rhs(&state, &params, &grf, &Wrench::zero(Frame::World), &Vector12::zeros());
        assert!(d.linear_acceleration.norm() < 1e-14);
        assert!(d.angular_acceleration.norm() < 1e-14);
    }

    #[test]
    fn symmetric_thrust_has_no_moment() {
        let params = ModelParams::default();
        let w = thruster_wrench(&Vector4::repeat(5.0), &params).unwrap();
        assert_eq!(w.moment, Vector3::zeros());
        assert_eq!(w.force, Vector3::new(0.0, 0.0, 20.0));
        let zero = thruster_wrench(&Vector4::zeros(), &params).unwrap();
        assert_eq!(zero.force.norm() + zero.moment.norm(), 0.0);
    }

    #[test]
    fn asymmetric_thrust_moment_matches_cross_products() {
        let params = ModelParams::default();
        let f = Vector4::new(1.0, 7.5, 3.25, 12.0);
        let w = thruster_wrench(&f, &params).unwrap();
        let mut expected = Vector3::zeros();
        for i in 0..4 {
            let p = params.thruster_offsets[i];
            expected += Vector3::new(p.y * f[i], -p.x * f[i], 0.0);
        }
        assert_relative_eq!(w.moment, expected, epsilon = 1e-12);
    }

    #[test]
    fn out_of_range_thrust_is_rejected() {
        let params = ModelParams::default();
        assert!(matches!(
            thruster_wrench(&Vector4::new(-0.1, 0.0, 0.0, 0.0), &params),
            Err(ThrustError::Negative { index: 0, .. })
        ));
        assert!(matches!(
            thruster_wrench(&Vector4::new(0.0, 0.0, 20.0, 0.0), &params),
            Err(ThrustError::AboveLimit { index: 2, .. })
        ));
    }
}
