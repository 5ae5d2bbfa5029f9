//! PD attitude stabilization on Z-Y-X Euler angles, allocated to the four
//! upward-only thrusters.

use nalgebra::{DMatrix, DVector, Matrix3x4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::dynamics::thruster_wrench;
use crate::linalg::{pseudo_inverse, PINV_RELATIVE_CUTOFF};
use crate::model::{ModelParams, RobotState, Wrench, STANDARD_GRAVITY};
use crate::so3::{euler_rates, euler_zyx, EulerSingularity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttitudeGains {
    /// Diagonal of K_p for (roll, pitch, yaw) [N·m/rad].
    pub kp: Vector3<f64>,
    /// Diagonal of K_d [N·m·s/rad].
    pub kd: Vector3<f64>,
    /// Per-thruster saturation [N].
    pub saturation: f64,
}

impl Default for AttitudeGains {
    fn default() -> Self {
        Self {
            kp: Vector3::new(60.0, 60.0, 0.0),
            kd: Vector3::new(8.0, 8.0, 0.0),
            saturation: 2.0 * STANDARD_GRAVITY,
        }
    }
}

impl AttitudeGains {
    pub fn validate(&self) -> Result<(), String> {
        if self.kp.iter().chain(self.kd.iter()).any(|g| !(*g >= 0.0)) {
            return Err("attitude gains must be nonnegative".into());
        }
        if !(self.saturation >= 0.0) {
            return Err(format!("thrust saturation must be nonnegative, got {}", self.saturation));
        }
        Ok(())
    }
}

/// Moment demand `K_p (Φ_ref − Φ) − K_d Φ̇`.
pub fn attitude_wrench(
    euler: &Vector3<f64>,
    euler_rate: &Vector3<f64>,
    euler_ref: &Vector3<f64>,
    gains: &AttitudeGains,
) -> Vector3<f64> {
    gains.kp.component_mul(&(euler_ref - euler)) - gains.kd.component_mul(euler_rate)
}

/// Maps the four thrust magnitudes to the body-frame moment they produce.
pub fn thrust_moment_map(params: &ModelParams) -> Matrix3x4<f64> {
    let mut a = Matrix3x4::zeros();
    for (i, p) in params.thruster_offsets.iter().enumerate() {
        a.set_column(i, &p.cross(&Vector3::z()));
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrustAllocation {
    pub thrusts: Vector4<f64>,
    /// Part of the demand the least-squares solution could not produce
    /// (yaw, for upward-only thrusters).
    pub residual: Vector3<f64>,
    /// True when clamping changed at least one thrust.
    pub clamped: bool,
}

/// Least-squares allocation of a moment demand, clamped per thruster to `[0, max]`.
pub fn allocate_thrusts(moment_demand: &Vector3<f64>, params: &ModelParams, saturation: f64) -> ThrustAllocation {
    let a = thrust_moment_map(params);
    let a_dyn = DMatrix::from_column_slice(3, 4, a.as_slice());
    let pinv = pseudo_inverse(&a_dyn, PINV_RELATIVE_CUTOFF).matrix;
    let unclamped = &pinv * DVector::from_column_slice(moment_demand.as_slice());
    let unclamped = Vector4::from_column_slice(unclamped.as_slice());
    let max = params.max_thrust.min(saturation);
    let thrusts = unclamped.map(|f| f.clamp(0.0, max));
    ThrustAllocation {
        thrusts,
        residual: moment_demand - a * unclamped,
        clamped: thrusts != unclamped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeCommand {
    pub euler: Vector3<f64>,
    pub euler_rate: Vector3<f64>,
    pub moment_demand: Vector3<f64>,
    pub allocation: ThrustAllocation,
    /// Body-frame thruster wrench actually applied.
    pub wrench: Wrench,
}

/// Full controller tick: Euler extraction, PD law, allocation.
pub fn attitude_command(
    state: &RobotState,
    euler_ref: &Vector3<f64>,
    gains: &AttitudeGains,
    params: &ModelParams,
) -> Result<AttitudeCommand, EulerSingularity> {
    let euler = euler_zyx(&state.pose.rotation);
    let euler_rate = euler_rates(&euler, &state.twist.angular)?;
    let moment_demand = attitude_wrench(&euler, &euler_rate, euler_ref, gains);
    let allocation = allocate_thrusts(&moment_demand, params, gains.saturation);
    let wrench = thruster_wrench(&allocation.thrusts, params).expect("allocation output is clamped to the valid range");
    Ok(AttitudeCommand {
        euler,
        euler_rate,
        moment_demand,
        allocation,
        wrench,
    })
}

/// Body-frame moment produced by a thrust vector.
pub fn thrust_moment(thrusts: &Vector4<f64>, params: &ModelParams) -> Vector3<f64> {
    thrust_moment_map(params) * thrusts
}
