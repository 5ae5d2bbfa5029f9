//! Classical fixed-step fourth-order Runge-Kutta.

use std::ops::{Add, Div, Mul};

use thiserror::Error;

use crate::dynamics::StateDerivative;
use crate::model::RobotState;
use crate::so3::nearest_rotation;

/// A state that can be marched by [`rk4_step`].
pub trait Integrable: Sized {
    type Derivative: Clone
        + Add<Output = Self::Derivative>
        + Mul<f64, Output = Self::Derivative>
        + Div<f64, Output = Self::Derivative>;

    /// `self + h · d`.
    fn advanced_by(&self, d: &Self::Derivative, h: f64) -> Self;

    fn derivative_is_finite(d: &Self::Derivative) -> bool;

    /// Projection back onto the state manifold after a full step.
    fn project(self) -> Self {
        self
    }
}

impl Integrable for f64 {
    type Derivative = f64;

    fn advanced_by(&self, d: &f64, h: f64) -> f64 {
        self + h * d
    }

    fn derivative_is_finite(d: &f64) -> bool {
        d.is_finite()
    }
}

impl Integrable for RobotState {
    type Derivative = StateDerivative;

    fn advanced_by(&self, d: &StateDerivative, h: f64) -> RobotState {
        self.advanced(d, h)
    }

    fn derivative_is_finite(d: &StateDerivative) -> bool {
        d.is_finite()
    }

    fn project(mut self) -> Self {
        self.pose.rotation = nearest_rotation(&self.pose.rotation);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("non-finite derivative at RK4 stage {stage}")]
pub struct NonFiniteDerivative {
    pub stage: usize,
}

/// One RK4 step of `ẋ = f(x)`. Inputs captured by `f` are held constant over
/// the step.
pub fn rk4_step<S, F>(mut f: F, x: &S, dt: f64) -> Result<S, NonFiniteDerivative>
where
    S: Integrable,
    F: FnMut(&S) -> S::Derivative,
{
    assert!(dt > 0.0, "step size must be positive");
    let check = |d: S::Derivative, stage: usize| {
        if S::derivative_is_finite(&d) {
            Ok(d)
        } else {
            Err(NonFiniteDerivative { stage })
        }
    };
    let k1 = check(f(x), 1)?;
    let k2 = check(f(&x.advanced_by(&k1, 0.5 * dt)), 2)?;
    let k3 = check(f(&x.advanced_by(&k2, 0.5 * dt)), 3)?;
    let k4 = check(f(&x.advanced_by(&k3, dt)), 4)?;
    let increment = (k1 + k2 * 2.0 + k3 * 2.0 + k4) / 6.0;
    Ok(x.advanced_by(&increment, dt).project())
}
