//! Reduced-order simulation and control of a thruster-assisted quadruped.
//!
//! The robot is a single rigid body carrying four massless, length-variable
//! legs and four upward-only ducted-fan thrusters. The crate provides
//!
//! * [`dynamics`]: kinematics, mass matrix, bias terms and the state derivative,
//! * [`contact`]: compliant ground with Stribeck friction,
//! * [`gait`]: trot schedule, swing trajectories, foot placement and leg IK,
//! * [`attitude`]: PD attitude stabilization allocated to the thrusters,
//! * [`erg`]: an explicit reference governor enforcing the friction pyramid,
//! * [`estimation`]: a momentum observer and a constrained-model GRF estimate,
//! * [`sim`]: RK4 integration, scenario configuration, the closed loop and CSV
//!   telemetry.

// Parameter checks use `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attitude;
pub mod contact;
pub mod dynamics;
pub mod erg;
pub mod estimation;
pub mod gait;
pub mod linalg;
pub mod model;
pub mod sim;
pub mod so3;

pub use contact::{GrfSet, GroundParams};
pub use model::{BodyPose, BodyTwist, Frame, LegId, LegJoints, ModelParams, RobotState, Wrench};
