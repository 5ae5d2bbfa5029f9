//! Compliant ground: spring-damper normal force with Stribeck friction.
//!
//! ```text
//! u_z = max(0, −k_gz z − k_dz ż)                          (z ≤ ground)
//! u_a = −s_a u_z sgn(v_a) − μ_v v_a,   a ∈ {x, y}
//! s_a = μ_c − (μ_c − μ_s) exp(−v_a² / v_s²)
//! ```
//!
//! `z` is measured from the ground plane. Above the plane every component is
//! zero.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::{foot_velocity, forward_kinematics};
use crate::model::{LegId, ModelParams, RobotState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundParams {
    /// Normal stiffness [N/m].
    pub stiffness: f64,
    /// Normal damping [N·s/m].
    pub damping: f64,
    /// Coulomb coefficient μ_c.
    pub mu_coulomb: f64,
    /// Static coefficient μ_s.
    pub mu_static: f64,
    /// Viscous coefficient μ_v [N·s/m].
    pub mu_viscous: f64,
    /// Stribeck velocity [m/s].
    pub stribeck_velocity: f64,
    /// Height of the ground plane [m].
    pub height: f64,
}

impl Default for GroundParams {
    fn default() -> Self {
        Self {
            stiffness: 10_000.0,
            damping: 100.0,
            mu_coulomb: 0.2,
            mu_static: 0.25,
            mu_viscous: 1.0,
            stribeck_velocity: 0.1,
            height: 0.0,
        }
    }
}

impl GroundParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.stiffness > 0.0) {
            return Err(format!("ground stiffness must be positive, got {}", self.stiffness));
        }
        if !(self.damping >= 0.0) {
            return Err(format!("ground damping must be nonnegative, got {}", self.damping));
        }
        if !(self.mu_coulomb > 0.0 && self.mu_coulomb <= self.mu_static) {
            return Err(format!(
                "friction coefficients must satisfy 0 < mu_coulomb <= mu_static, got {} and {}",
                self.mu_coulomb, self.mu_static
            ));
        }
        if !(self.mu_viscous >= 0.0) {
            return Err(format!("mu_viscous must be nonnegative, got {}", self.mu_viscous));
        }
        if !(self.stribeck_velocity > 0.0) {
            return Err(format!("stribeck_velocity must be positive, got {}", self.stribeck_velocity));
        }
        if !self.height.is_finite() {
            return Err("ground height must be finite".into());
        }
        Ok(())
    }

    /// Stribeck factor `s(v)`, between μ_c and μ_s.
    pub fn stribeck_factor(&self, v: f64) -> f64 {
        let x = v / self.stribeck_velocity;
        self.mu_coulomb - (self.mu_coulomb - self.mu_static) * (-x * x).exp()
    }
}

/// Sign with `sgn(0) = 0`.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Contact force on a single foot given its world position and velocity.
pub fn grf_for_foot(foot_pos: &Vector3<f64>, foot_vel: &Vector3<f64>, ground: &GroundParams) -> Vector3<f64> {
    let z = foot_pos.z - ground.height;
    if z > 0.0 {
        return Vector3::zeros();
    }
    let normal = (-ground.stiffness * z - ground.damping * foot_vel.z).max(0.0);
    let tangential = |v: f64| -ground.stribeck_factor(v) * normal * sgn(v) - ground.mu_viscous * v;
    Vector3::new(tangential(foot_vel.x), tangential(foot_vel.y), normal)
}

/// Per-foot contact forces for the whole robot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GrfSet {
    /// World-frame force on each foot [N], [`LegId`] order.
    pub forces: [Vector3<f64>; 4],
    pub in_contact: [bool; 4],
    /// Foot height above the ground plane; negative when penetrating [m].
    pub penetration: [f64; 4],
}

impl GrfSet {
    pub fn total(&self) -> Vector3<f64> {
        self.forces.iter().sum()
    }

    pub fn contact_count(&self) -> usize {
        self.in_contact.iter().filter(|c| **c).count()
    }
}

pub fn grf_all(state: &RobotState, model: &ModelParams, ground: &GroundParams) -> GrfSet {
    let mut set = GrfSet::default();
    for leg in LegId::ALL {
        let i = leg.index();
        let pos = forward_kinematics(state, model, leg);
        set.penetration[i] = pos.z - ground.height;
        set.in_contact[i] = set.penetration[i] <= 0.0;
        if set.in_contact[i] {
            set.forces[i] = grf_for_foot(&pos, &foot_velocity(state, model, leg), ground);
        }
    }
    set
}
