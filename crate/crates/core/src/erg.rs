//! Explicit reference governor on the applied body-velocity reference.
//!
//! Stance forces are predicted with a static two-contact pendulum: Newton's
//! law with a commanded acceleration, equal tangential sharing between the
//! two feet, and moment balance about the horizontal axis perpendicular to the
//! support line. The predicted forces are checked against the friction pyramid
//! and the resulting scalar margin throttles how fast the applied reference
//! `x_w` may move toward the desired one `x_r`.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::sgn;
use crate::model::{ModelParams, RobotState, Wrench};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErgParams {
    /// Maximum reference rate κ [1/s, times the unit of the reference].
    pub kappa: f64,
    /// Margin at which the governor runs at full rate [N].
    pub margin_scale: f64,
    /// Floor on the attraction-field normalization.
    pub eta: f64,
    /// Time over which a velocity error is converted into a commanded acceleration [s].
    pub horizon: f64,
    /// Minimum normal force per stance foot [N].
    pub min_normal: f64,
}

impl Default for ErgParams {
    fn default() -> Self {
        Self {
            kappa: 2.0,
            margin_scale: 10.0,
            eta: 1e-6,
            horizon: 0.2,
            min_normal: 5.0,
        }
    }
}

impl ErgParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("kappa", self.kappa),
            ("margin_scale", self.margin_scale),
            ("eta", self.eta),
            ("horizon", self.horizon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("erg.{name} must be positive, got {v}"));
            }
        }
        if !(self.min_normal >= 0.0) {
            return Err(format!("erg.min_normal must be nonnegative, got {}", self.min_normal));
        }
        Ok(())
    }
}

/// Friction pyramid `h_r = J_r u + d_r ≥ 0` for a single foot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionConstraint {
    pub mu_static: f64,
    pub min_normal: f64,
}

impl FrictionConstraint {
    pub fn new(mu_static: f64, min_normal: f64) -> Self {
        assert!(mu_static > 0.0 && min_normal >= 0.0);
        Self { mu_static, min_normal }
    }

    pub fn matrix(&self, u: &Vector3<f64>) -> Matrix3<f64> {
        Matrix3::new(
            -sgn(u.x),
            0.0,
            self.mu_static,
            0.0,
            -sgn(u.y),
            self.mu_static,
            0.0,
            0.0,
            1.0,
        )
    }

    pub fn offset(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, -self.min_normal)
    }

    pub fn rows(&self, u: &Vector3<f64>) -> Vector3<f64> {
        self.matrix(u) * u + self.offset()
    }
}

/// Smallest row of the friction pyramid for one foot force.
pub fn constraint_margin(u: &Vector3<f64>, constraint: &FrictionConstraint) -> f64 {
    constraint.rows(u).min()
}

/// Smallest margin over several feet (`+∞` for none).
pub fn stance_margin(forces: &[Vector3<f64>], constraint: &FrictionConstraint) -> f64 {
    forces
        .iter()
        .map(|u| constraint_margin(u, constraint))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ErgError {
    #[error("stance points are horizontally coincident")]
    CoincidentStance,
    #[error("two-contact force system is singular")]
    Singular,
}

/// Predicts the two stance forces for a commanded body velocity.
pub fn predicted_grf(
    state: &RobotState,
    stance: &[Vector3<f64>; 2],
    thrust: &Wrench,
    v_cmd: &Vector3<f64>,
    params: &ModelParams,
    horizon: f64,
) -> Result<[Vector3<f64>; 2], ErgError> {
    let com = state.pose.position;
    let rotation = &state.pose.rotation;
    let d1 = stance[0] - com;
    let d2 = stance[1] - com;
    let line = stance[1] - stance[0];
    let along = Vector3::new(line.x, line.y, 0.0);
    let len = along.norm();
    if len < 1e-6 {
        return Err(ErgError::CoincidentStance);
    }
    let axis = Vector3::z().cross(&(along / len));

    let accel = (v_cmd - state.twist.linear) / horizon;
    let required = params.mass * (accel - params.gravity) - thrust.force_world(rotation);

    let mut a = Matrix6::zeros();
    let mut b = Vector6::zeros();
    for k in 0..3 {
        a[(k, k)] = 1.0;
        a[(k, k + 3)] = 1.0;
        b[k] = required[k];
    }
    for k in 0..2 {
        a[(3 + k, k)] = 1.0;
        a[(3 + k, k + 3)] = -1.0;
    }
    // n · (d × u) = u · (n × d)
    let m1 = axis.cross(&d1);
    let m2 = axis.cross(&d2);
    for k in 0..3 {
        a[(5, k)] = m1[k];
        a[(5, k + 3)] = m2[k];
    }
    b[5] = -axis.dot(&thrust.moment_world(rotation));

    let x = a.lu().solve(&b).ok_or(ErgError::Singular)?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(ErgError::Singular);
    }
    Ok([x.fixed_rows::<3>(0).into_owned(), x.fixed_rows::<3>(3).into_owned()])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgState {
    /// Desired reference x_r.
    pub desired: Vector3<f64>,
    /// Applied (filtered) reference x_w.
    pub applied: Vector3<f64>,
    /// Margin seen at the last update.
    pub margin: f64,
}

impl ErgState {
    pub fn new(desired: Vector3<f64>, applied: Vector3<f64>) -> Self {
        Self {
            desired,
            applied,
            margin: f64::INFINITY,
        }
    }
}

/// One explicit Euler step of `ẋ_w = κ Δ ρ` with the step clipped at `x_r`.
pub fn governor_update(erg: &ErgState, margin: f64, dt: f64, params: &ErgParams) -> ErgState {
    assert!(dt > 0.0, "governor step must be positive");
    let error = erg.desired - erg.applied;
    let distance = error.norm();
    let safety = (margin / params.margin_scale).clamp(0.0, 1.0);
    let attraction = error / distance.max(params.eta);
    let step = params.kappa * safety * dt;
    let applied = if step * attraction.norm() >= distance {
        erg.desired
    } else {
        erg.applied + attraction * step
    };
    ErgState {
        desired: erg.desired,
        applied,
        margin,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernorTick {
    pub prediction: [Vector3<f64>; 2],
    pub margin: f64,
    pub accepted: bool,
    /// The prediction failed this tick and the last valid one was reused.
    pub held_prediction: bool,
}

/// Governor with the acceptance check: a candidate reference is only taken
/// if the predicted forces at the candidate stay inside the pyramid.
#[derive(Debug, Clone)]
pub struct ReferenceGovernor {
    state: ErgState,
    params: ErgParams,
    constraint: FrictionConstraint,
    last_prediction: [Vector3<f64>; 2],
}

impl ReferenceGovernor {
    pub fn new(desired: Vector3<f64>, params: ErgParams, constraint: FrictionConstraint) -> Self {
        Self {
            state: ErgState::new(desired, Vector3::zeros()),
            params,
            constraint,
            last_prediction: [Vector3::zeros(); 2],
        }
    }

    pub fn state(&self) -> &ErgState {
        &self.state
    }

    pub fn applied(&self) -> Vector3<f64> {
        self.state.applied
    }

    pub fn params(&self) -> &ErgParams {
        &self.params
    }

    pub fn constraint(&self) -> &FrictionConstraint {
        &self.constraint
    }

    pub fn set_desired(&mut self, desired: Vector3<f64>) {
        self.state.desired = desired;
    }

    /// `predict` maps an applied reference to the two stance forces.
    pub fn step<F>(&mut self, predict: F, dt: f64) -> GovernorTick
    where
        F: Fn(&Vector3<f64>) -> Result<[Vector3<f64>; 2], ErgError>,
    {
        let (prediction, held) = match predict(&self.state.applied) {
            Ok(p) => (p, false),
            Err(_) => (self.last_prediction, true),
        };
        self.last_prediction = prediction;
        let margin = stance_margin(&prediction, &self.constraint);
        let candidate = governor_update(&self.state, margin, dt, &self.params);
        if candidate.applied == self.state.applied {
            self.state.margin = margin;
            return GovernorTick {
                prediction,
                margin,
                accepted: false,
                held_prediction: held,
            };
        }
        if let Ok(next) = predict(&candidate.applied) {
            let next_margin = stance_margin(&next, &self.constraint);
            if next_margin >= 0.0 {
                self.state = ErgState {
                    margin: next_margin,
                    ..candidate
                };
                self.last_prediction = next;
                return GovernorTick {
                    prediction: next,
                    margin: next_margin,
                    accepted: true,
                    held_prediction: held,
                };
            }
        }
        self.state.margin = margin;
        GovernorTick {
            prediction,
            margin,
            accepted: false,
            held_prediction: held,
        }
    }
}
