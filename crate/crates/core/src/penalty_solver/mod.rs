//! Negative-ℓ1 exact penalty for the one-bit CI problem.
//!
//! The discrete problem `min_{x ∈ {±1}ⁿ} max_l a_lᵀx` is replaced by
//! `min_{x ∈ [-1,1]ⁿ} max_l a_lᵀx − λ‖x‖₁`, which has the same global and
//! local minimisers once `λ > max_l ‖a_l‖_∞`. The max over rows is written as
//! a max over the simplex, and the resulting saddle problem is solved by
//! alternating a closed-form proximal x-step with a projected, perturbed
//! gradient y-step. A homotopy on `λ` drives the iterate to a one-bit point.

mod simplex;

pub use simplex::{project_simplex, project_simplex_into};

use thiserror::Error;

use crate::ci_model::{ci_objective, CiSystem};
use crate::numerics::{spectral_norm, DEFAULT_POWER_ITERS};

/// Inner-loop iteration cap used by the practical schedule.
pub const DEFAULT_MAX_ITERS: usize = 500;
/// Successive-iterate stopping distance used by the practical schedule.
pub const DEFAULT_TOL: f64 = 1e-3;
/// Homotopy growth factor.
pub const DEFAULT_DELTA: f64 = 5.0;
pub const DEFAULT_MAX_ROUNDS: usize = 20;
pub const DEFAULT_ONEBIT_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid homotopy configuration: {0}")]
    InvalidHomotopy(String),
    #[error("no one-bit solution after {rounds} homotopy rounds (final lambda {lambda:.3e})")]
    RoundLimitExceeded { rounds: usize, lambda: f64 },
}

/// Step-size schedule for the alternating solver.
///
/// `c_k = c0_coeff / k^c_exponent` and `τ_k = tau_coeff · k^tau_exponent + tau_offset`,
/// with `k` starting at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSchedule {
    pub rho: f64,
    pub c0_coeff: f64,
    pub c_exponent: f64,
    pub tau_coeff: f64,
    pub tau_exponent: f64,
    pub tau_offset: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl SolverSchedule {
    /// The schedule used for all reported results:
    /// `ρ = 0.2/‖A‖₂`, `c_k = 0.01/(ρ k^0.05)`,
    /// `τ_k = ((2 log₂N_t + 1)/10) · mean|A| · k^0.1`.
    pub fn practical(system: &CiSystem) -> Self {
        let a = system.a_matrix();
        let norm = spectral_norm(a, DEFAULT_POWER_ITERS);
        let rho = if norm > 0.0 { 0.2 / norm } else { 1.0 };
        let nt = system.n_antennas() as f64;
        Self {
            rho,
            c0_coeff: 0.01 / rho,
            c_exponent: 0.05,
            tau_coeff: (2.0 * nt.log2() + 1.0) / 10.0 * a.mean_abs(),
            tau_exponent: 0.1,
            tau_offset: 0.0,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
        }
    }

    /// Schedule satisfying the hypotheses of the global convergence result:
    /// `c_k = β₁/k^γ`, `τ_k = 16β₂‖A‖²/(ρ c_k²) + β₃` with `0 < ρ ≤ 1/β₁`,
    /// `0 < γ ≤ 0.5`, `β₂ > 1` and `β₃ ≥ ρ‖A‖²`.
    pub fn convergent(
        system: &CiSystem,
        rho: f64,
        beta1: f64,
        gamma: f64,
        beta2: f64,
        beta3: f64,
    ) -> Result<Self, SolverError> {
        let norm = spectral_norm(system.a_matrix(), DEFAULT_POWER_ITERS);
        let norm_sq = norm * norm;
        let fail = |msg: &str| Err(SolverError::InvalidSchedule(msg.to_string()));
        if !(beta1 > 0.0) {
            return fail("beta1 must be positive");
        }
        if !(rho > 0.0 && rho <= 1.0 / beta1) {
            return fail("rho must lie in (0, 1/beta1]");
        }
        if !(gamma > 0.0 && gamma <= 0.5) {
            return fail("gamma must lie in (0, 0.5]");
        }
        if !(beta2 > 1.0) {
            return fail("beta2 must exceed 1");
        }
        if !(beta3 >= rho * norm_sq) {
            return fail("beta3 must be at least rho * ||A||^2");
        }
        Ok(Self {
            rho,
            c0_coeff: beta1,
            c_exponent: gamma,
            tau_coeff: 16.0 * beta2 * norm_sq / (rho * beta1 * beta1),
            tau_exponent: 2.0 * gamma,
            tau_offset: beta3,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
        })
    }

    pub fn with_limits(mut self, max_iters: usize, tol: f64) -> Self {
        self.max_iters = max_iters;
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(SolverError::InvalidSchedule(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.c0_coeff > 0.0) || self.c_exponent < 0.0 {
            return Err(SolverError::InvalidSchedule("c_k must be positive and nonincreasing".into()));
        }
        if !(self.tau_coeff > 0.0 || self.tau_offset > 0.0) || self.tau_coeff < 0.0 || self.tau_offset < 0.0 {
            return Err(SolverError::InvalidSchedule("tau_k must be positive".into()));
        }
        Ok(())
    }

    pub fn c(&self, k: usize) -> f64 {
        self.c0_coeff / (k as f64).powf(self.c_exponent)
    }

    pub fn tau(&self, k: usize) -> f64 {
        self.tau_coeff * (k as f64).powf(self.tau_exponent) + self.tau_offset
    }
}

/// Homotopy on the penalty weight.
#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyConfig {
    pub lambda0: f64,
    pub delta: f64,
    pub max_rounds: usize,
    pub onebit_tol: f64,
}

impl HomotopyConfig {
    /// `λ⁽⁰⁾ = 0.001·M/8`, `δ = 5`.
    pub fn for_order(psk_order: usize) -> Self {
        Self {
            lambda0: 0.001 * psk_order as f64 / 8.0,
            delta: DEFAULT_DELTA,
            max_rounds: DEFAULT_MAX_ROUNDS,
            onebit_tol: DEFAULT_ONEBIT_TOL,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.lambda0 > 0.0) {
            return Err(SolverError::InvalidHomotopy("lambda0 must be positive".into()));
        }
        if !(self.delta > 1.0) {
            return Err(SolverError::InvalidHomotopy("delta must exceed 1".into()));
        }
        Ok(())
    }
}

/// Iterates of the alternating solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub iter: usize,
    pub last_step_norm: f64,
}

impl SolverState {
    /// `x = 0` and `y` uniform on the simplex.
    pub fn initial(system: &CiSystem) -> Self {
        let m = system.m();
        Self { x: vec![0.0; system.n()], y: vec![1.0 / m as f64; m], iter: 0, last_step_norm: f64::INFINITY }
    }
}

/// `sgn` with `sgn(0) = +1`.
pub fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn is_one_bit(x: &[f64], tol: f64) -> bool {
    x.iter().all(|v| v.abs() >= 1.0 - tol)
}

pub fn threshold(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| sign(v)).collect()
}

/// `max_l a_lᵀx − λ‖x‖₁`.
pub fn penalty_objective(system: &CiSystem, x: &[f64], lambda: f64) -> f64 {
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    ci_objective(system, x).0 - lambda * l1
}

/// Penalty weight above which the penalised problem is exact: `max_l ‖a_l‖_∞`.
pub fn exactness_threshold(system: &CiSystem) -> f64 {
    system.a_matrix().max_abs()
}

fn x_update_into(x: &[f64], aty: &[f64], lambda: f64, tau: f64, out: &mut [f64]) {
    let push = lambda / tau;
    for ((o, &xi), &g) in out.iter_mut().zip(x).zip(aty) {
        let a = xi - g / tau;
        *o = sign(a) * (a.abs() + push).min(1.0);
    }
}

/// Closed-form minimiser of `yᵀA x − λ‖x‖₁ + (τ/2)‖x − x_k‖²` over the box.
pub fn x_update(system: &CiSystem, state: &SolverState, lambda: f64, tau: f64) -> Vec<f64> {
    let aty = system.a_matrix().mul_transpose_vec(&state.y);
    let mut out = vec![0.0; state.x.len()];
    x_update_into(&state.x, &aty, lambda, tau, &mut out);
    out
}

/// `Proj_Δ(y + ρ A x_new − ρ c y)`.
pub fn y_update(system: &CiSystem, state: &SolverState, x_new: &[f64], rho: f64, c: f64) -> Vec<f64> {
    let ax = system.a_matrix().mul_vec(x_new);
    let shifted: Vec<f64> = state.y.iter().zip(&ax).map(|(y, g)| y + rho * g - rho * c * y).collect();
    project_simplex(&shifted)
}

/// Runs the alternating solver at fixed `λ` from `(x0, y0)`.
pub fn solve_inner(system: &CiSystem, lambda: f64, x0: &[f64], y0: &[f64], schedule: &SolverSchedule) -> SolverState {
    solve_inner_observed(system, lambda, x0, y0, schedule, |_| {})
}

/// As [`solve_inner`], calling `observe` after every iteration.
pub fn solve_inner_observed(
    system: &CiSystem,
    lambda: f64,
    x0: &[f64],
    y0: &[f64],
    schedule: &SolverSchedule,
    mut observe: impl FnMut(&SolverState),
) -> SolverState {
    assert_eq!(x0.len(), system.n(), "x0 must have length n");
    assert_eq!(y0.len(), system.m(), "y0 must have length m");
    let a = system.a_matrix();
    let mut state = SolverState { x: x0.to_vec(), y: y0.to_vec(), iter: 0, last_step_norm: f64::INFINITY };
    let mut x_next = vec![0.0; system.n()];
    let mut aty = vec![0.0; system.n()];
    let mut ax = vec![0.0; system.m()];
    let mut y_step = vec![0.0; system.m()];
    let mut scratch = Vec::with_capacity(system.m());

    for k in 1..=schedule.max_iters {
        let tau = schedule.tau(k);
        let c = schedule.c(k);
        let rho = schedule.rho;

        a.mul_transpose_vec_into(&state.y, &mut aty);
        x_update_into(&state.x, &aty, lambda, tau, &mut x_next);

        a.mul_vec_into(&x_next, &mut ax);
        for ((s, &y), &g) in y_step.iter_mut().zip(&state.y).zip(&ax) {
            *s = y + rho * g - rho * c * y;
        }
        project_simplex_into(&y_step, &mut state.y, &mut scratch);

        let step = state.x.iter().zip(&x_next).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        std::mem::swap(&mut state.x, &mut x_next);
        state.iter = k;
        state.last_step_norm = step;
        observe(&state);
        if step < schedule.tol {
            break;
        }
    }
    state
}

/// Output of the homotopy driver.
#[derive(Debug, Clone, PartialEq)]
pub struct Nl1pSolution {
    /// Hard-thresholded point in `{−1, +1}ⁿ`.
    pub x: Vec<f64>,
    /// Final iterate before thresholding.
    pub x_relaxed: Vec<f64>,
    pub rounds: usize,
    /// Penalty weights used, one per round.
    pub lambdas: Vec<f64>,
    pub inner_iterations: usize,
    /// `false` when the round limit was hit before the iterate became one-bit.
    pub converged: bool,
}

impl Nl1pSolution {
    pub fn status(&self) -> Result<(), SolverError> {
        if self.converged {
            Ok(())
        } else {
            Err(SolverError::RoundLimitExceeded {
                rounds: self.rounds,
                lambda: self.lambdas.last().copied().unwrap_or(0.0),
            })
        }
    }
}

/// Homotopy driver: solve at `λ`, stop once the iterate is one-bit,
/// otherwise multiply `λ` by `δ` and warm-start the next round.
pub fn solve_nl1p(
    system: &CiSystem,
    config: &HomotopyConfig,
    schedule: &SolverSchedule,
) -> Result<Nl1pSolution, SolverError> {
    config.validate()?;
    schedule.validate()?;
    let mut state = SolverState::initial(system);
    let mut lambda = config.lambda0;
    let mut lambdas = Vec::new();
    let mut inner_iterations = 0;
    let mut converged = false;

    for _ in 0..config.max_rounds {
        lambdas.push(lambda);
        state = solve_inner(system, lambda, &state.x, &state.y, schedule);
        inner_iterations += state.iter;
        if is_one_bit(&state.x, config.onebit_tol) {
            converged = true;
            break;
        }
        lambda *= config.delta;
    }

    Ok(Nl1pSolution {
        x: threshold(&state.x),
        rounds: lambdas.len(),
        x_relaxed: state.x,
        lambdas,
        inner_iterations,
        converged,
    })
}
