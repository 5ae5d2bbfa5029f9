//! Ground reaction force estimators.
//!
//! * [`MomentumObserver`]: generalized-momentum residual
//!   `r = K_O (p(t) − p(0) − ∫ (r − β̂ + u_t) dt)` with `β̂ = ĥ − Ṁ̂ v`. The
//!   residual is a first-order low-pass image of the unmodeled generalized
//!   force (here, the ground reaction) with per-axis bandwidth `K_O`.
//! * [`constrained_grf`]: contact forces that keep the stance feet at zero
//!   acceleration, obtained through the pseudo-inverse of the Delassus matrix
//!   `J M⁻¹ Jᵀ`.

use nalgebra::{DMatrix, DVector, Matrix3x6, Matrix6, SMatrix, Vector3, Vector6};

use crate::linalg::{pseudo_inverse, PINV_RELATIVE_CUTOFF};

/// Backward-difference rate of a sampled mass matrix.
pub fn numeric_mass_matrix_rate<const N: usize>(
    m_k: &SMatrix<f64, N, N>,
    m_km1: &SMatrix<f64, N, N>,
    sample_time: f64,
) -> SMatrix<f64, N, N> {
    assert!(sample_time > 0.0, "sample time must be positive");
    (m_k - m_km1) / sample_time
}

/// Conjugate momentum observer state.
///
/// The running integral uses the trapezoidal rule; the implicit dependence of
/// the integrand on the new residual is solved in closed form (the gain is
/// diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumObserver {
    gain: Vector6<f64>,
    residual: Vector6<f64>,
    accumulator: Vector6<f64>,
    initial_momentum: Vector6<f64>,
    previous_mass: Matrix6<f64>,
    previous_beta: Vector6<f64>,
}

impl MomentumObserver {
    /// Starts the observer at rest relative to the current momentum `M₀ v₀`.
    pub fn new(gain: Vector6<f64>, v0: &Vector6<f64>, h0: &Vector6<f64>, m0: &Matrix6<f64>) -> Self {
        assert!(gain.iter().all(|k| *k > 0.0 && k.is_finite()), "observer gains must be positive");
        Self {
            gain,
            residual: Vector6::zeros(),
            accumulator: Vector6::zeros(),
            initial_momentum: m0 * v0,
            previous_mass: *m0,
            previous_beta: *h0,
        }
    }

    pub fn residual(&self) -> &Vector6<f64> {
        &self.residual
    }

    pub fn accumulator(&self) -> &Vector6<f64> {
        &self.accumulator
    }

    pub fn gain(&self) -> &Vector6<f64> {
        &self.gain
    }

    /// Advances by one sample. `u_t_gen` is the generalized thruster input
    /// applied over the interval; `v`, `h` and `m` are sampled at its end.
    pub fn step(
        &mut self,
        v: &Vector6<f64>,
        u_t_gen: &Vector6<f64>,
        h: &Vector6<f64>,
        m: &Matrix6<f64>,
        dt: f64,
    ) -> &Vector6<f64> {
        assert!(dt > 0.0, "observer step must be positive");
        let m_dot = numeric_mass_matrix_rate(m, &self.previous_mass, dt);
        let beta = h - m_dot * v;
        let momentum = m * v;
        let half = 0.5 * dt;
        let known = self.accumulator + (self.residual - self.previous_beta - beta + 2.0 * u_t_gen) * half;
        let next = Vector6::from_fn(|i, _| {
            self.gain[i] * (momentum[i] - self.initial_momentum[i] - known[i]) / (1.0 + self.gain[i] * half)
        });
        self.accumulator = known + next * half;
        self.residual = next;
        self.previous_mass = *m;
        self.previous_beta = beta;
        &self.residual
    }
}

/// Per-foot forces recovered from a generalized force.
#[derive(Debug, Clone, PartialEq)]
pub struct PerFootForces {
    pub forces: Vec<Vector3<f64>>,
    pub rank: usize,
    pub rank_deficient: bool,
}

fn stack_transposed(jacobians: &[Matrix3x6<f64>]) -> DMatrix<f64> {
    let k = jacobians.len();
    let mut bt = DMatrix::zeros(6, 3 * k);
    for (i, j) in jacobians.iter().enumerate() {
        bt.view_mut((0, 3 * i), (6, 3)).copy_from(&j.transpose());
    }
    bt
}

fn stack(jacobians: &[Matrix3x6<f64>]) -> DMatrix<f64> {
    let k = jacobians.len();
    let mut j = DMatrix::zeros(3 * k, 6);
    for (i, ji) in jacobians.iter().enumerate() {
        j.view_mut((3 * i, 0), (3, 6)).copy_from(ji);
    }
    j
}

fn split(v: &DVector<f64>) -> Vec<Vector3<f64>> {
    v.as_slice().chunks_exact(3).map(Vector3::from_column_slice).collect()
}

/// Minimum-norm solution of `Σ B_iᵀ λ_i = r`.
pub fn per_foot_forces(r: &Vector6<f64>, jacobians: &[Matrix3x6<f64>]) -> PerFootForces {
    if jacobians.is_empty() {
        return PerFootForces {
            forces: Vec::new(),
            rank: 0,
            rank_deficient: false,
        };
    }
    let bt = stack_transposed(jacobians);
    let pinv = pseudo_inverse(&bt, PINV_RELATIVE_CUTOFF);
    let lambda = &pinv.matrix * DVector::from_column_slice(r.as_slice());
    PerFootForces {
        forces: split(&lambda),
        rank: pinv.rank,
        rank_deficient: pinv.rank < (3 * jacobians.len()).min(6),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedEstimate {
    pub forces: Vec<Vector3<f64>>,
    pub delassus_rank: usize,
    pub singular_values: Vec<f64>,
}

impl ConstrainedEstimate {
    pub fn empty() -> Self {
        Self {
            forces: Vec::new(),
            delassus_rank: 0,
            singular_values: Vec::new(),
        }
    }

    pub fn total(&self) -> Vector3<f64> {
        self.forces.iter().sum()
    }

    pub fn full_rank(&self) -> bool {
        self.delassus_rank == 3 * self.forces.len()
    }
}

/// Contact forces that hold the stance feet at zero acceleration:
/// `λ = −(J M⁻¹ Jᵀ)† (J M⁻¹ (u_t − h) + J̇ v)`.
///
/// `jacobian_rates` holds `J̇_i v` per foot.
pub fn constrained_grf(
    u_t_gen: &Vector6<f64>,
    h: &Vector6<f64>,
    m: &Matrix6<f64>,
    jacobians: &[Matrix3x6<f64>],
    jacobian_rates: &[Vector3<f64>],
) -> ConstrainedEstimate {
    assert_eq!(jacobians.len(), jacobian_rates.len());
    if jacobians.is_empty() {
        return ConstrainedEstimate::empty();
    }
    let m_inv = m.cholesky().expect("mass matrix is SPD").inverse();
    let m_inv = DMatrix::from_column_slice(6, 6, m_inv.as_slice());
    let j = stack(jacobians);
    let j_m_inv = &j * &m_inv;
    let delassus = &j_m_inv * j.transpose();
    let pinv = pseudo_inverse(&delassus, PINV_RELATIVE_CUTOFF);
    let free = DVector::from_column_slice((u_t_gen - h).as_slice());
    let mut drift = &j_m_inv * free;
    for (i, rate) in jacobian_rates.iter().enumerate() {
        let mut block = drift.rows_mut(3 * i, 3);
        block += rate;
    }
    let lambda = -(&pinv.matrix * drift);
    ConstrainedEstimate {
        forces: split(&lambda),
        delassus_rank: pinv.rank,
        singular_values: pinv.singular_values.iter().copied().collect(),
    }
}
