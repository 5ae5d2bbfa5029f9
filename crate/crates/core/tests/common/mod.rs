//! Helpers shared by the integration tests.

#![allow(dead_code)]

use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::{Rotation3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use thrustwalk::sim::Integrable;
use thrustwalk::model::Vector12;
use thrustwalk::{BodyPose, BodyTwist, LegJoints, ModelParams, RobotState};

/// Double-double scalar (about 32 significant digits). Used to measure
/// integrator truncation error below the f64 roundoff floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn mul_dd(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        quick_two_sum(p, e + self.hi * o.lo + self.lo * o.hi)
    }

    /// `e^x` by Taylor series; accurate for |x| ≲ 2.
    pub fn exp(self) -> Dd {
        let mut sum = Dd::new(1.0);
        let mut term = Dd::new(1.0);
        for k in 1..60 {
            term = term.mul_dd(self) / k as f64;
            sum = sum + term;
        }
        sum
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let r = quick_two_sum(s, e + t);
        quick_two_sum(r.hi, r.lo + f)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        quick_two_sum(p, e + self.lo * b)
    }
}

impl Div<f64> for Dd {
    type Output = Dd;
    fn div(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let (p, e) = two_prod(q1, b);
        let r = self - Dd { hi: p, lo: e };
        let q2 = r.hi / b;
        let (p, e) = two_prod(q2, b);
        let r = r - Dd { hi: p, lo: e };
        let q3 = r.hi / b;
        quick_two_sum(q1, q2) + Dd::new(q3)
    }
}

impl Integrable for Dd {
    type Derivative = Dd;

    fn advanced_by(&self, d: &Dd, h: f64) -> Dd {
        *self + *d * h
    }

    fn derivative_is_finite(d: &Dd) -> bool {
        d.hi.is_finite() && d.lo.is_finite()
    }
}

/// Global error of RK4 on `ẋ = −x`, `x(0) = 1`, integrated to `t ≈ 1` with
/// `round(1/dt)` steps.
pub fn decay_error(dt: f64) -> f64 {
    let steps = (1.0 / dt).round() as usize;
    let mut x = Dd::new(1.0);
    for _ in 0..steps {
        x = thrustwalk::sim::rk4_step(|x: &Dd| -*x, &x, dt).unwrap();
    }
    let t_end = Dd::new(dt) * steps as f64;
    (x - (-t_end).exp()).abs().to_f64()
}

pub fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> nalgebra::Matrix3<f64> {
    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let angle = rng.random_range(-max_angle..max_angle);
    Rotation3::new(axis.normalize() * angle).into_inner()
}

pub fn random_vector(rng: &mut ChaCha8Rng, scale: f64) -> Vector3<f64> {
    Vector3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

/// Joint triple strictly inside the limits.
pub fn random_leg(rng: &mut ChaCha8Rng, params: &ModelParams) -> Vector3<f64> {
    Vector3::new(
        rng.random_range(-1.2..1.2),
        rng.random_range(-1.4..1.4),
        rng.random_range(params.leg_length_min + 0.01..params.leg_length_max - 0.01),
    )
}

pub fn random_state(rng: &mut ChaCha8Rng, params: &ModelParams) -> RobotState {
    let mut legs = LegJoints::from_positions(Vector12::zeros());
    for leg in thrustwalk::LegId::ALL {
        legs.set_leg(leg, &random_leg(rng, params));
    }
    for i in 0..12 {
        legs.rates[i] = rng.random_range(-2.0..2.0);
    }
    RobotState {
        pose: BodyPose::new(random_vector(rng, 1.0), random_rotation(rng, 1.0)),
        twist: BodyTwist {
            linear: random_vector(rng, 1.0),
            angular: random_vector(rng, 2.0),
        },
        legs,
    }
}

/// State reached by flowing `state` along its own velocities for time `h`
/// with the rotation advanced by the exact exponential.
pub fn flowed(state: &RobotState, h: f64) -> RobotState {
    let mut s = *state;
    s.pose.position += state.twist.linear * h;
    s.pose.rotation = state.pose.rotation * Rotation3::new(state.twist.angular * h).into_inner();
    s.legs.positions += state.legs.rates * h;
    s
}
