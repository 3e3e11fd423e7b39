//! Precoders behind one interface: the penalty method, linear baselines,
//! relaxation-based baselines and exact oracles for small instances.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ci_model::{build_system, ci_objective, from_transmit, max_row_value, to_transmit, CiSystem, ModelError, PskConstellation};
use crate::numerics::{solve_linear, ComplexMatrix, NumericsError, RealMatrix};
use crate::penalty_solver::{sign, solve_inner, solve_nl1p, HomotopyConfig, SolverError, SolverSchedule, SolverState};

/// Largest `n = 2N_t` the exhaustive oracle accepts.
pub const EXHAUSTIVE_MAX_N: usize = 22;
/// Relaxed coordinates this close to ±1 are fixed by the greedy rounding.
pub const GREEDY_FIX_TOL: f64 = 1e-3;
/// Iteration cap and tolerance for the λ = 0 box relaxation.
pub const RELAX_MAX_ITERS: usize = 2000;
pub const RELAX_TOL: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrecoderError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("instance too large for exhaustive search: n = {n} > {max}")]
    InstanceTooLarge { n: usize, max: usize },
    #[error("zero-forcing needs K <= N_t, got K = {k}, N_t = {nt}")]
    TooManyUsers { k: usize, nt: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecoderKind {
    Nl1p,
    ZfInfinite,
    ZfOneBit,
    Msm,
    GreedyRound,
    Exhaustive,
    BranchBound,
}

impl PrecoderKind {
    pub const ALL: [PrecoderKind; 7] = [
        PrecoderKind::Nl1p,
        PrecoderKind::ZfInfinite,
        PrecoderKind::ZfOneBit,
        PrecoderKind::Msm,
        PrecoderKind::GreedyRound,
        PrecoderKind::Exhaustive,
        PrecoderKind::BranchBound,
    ];

    /// Short name used on the command line and in result files.
    pub fn name(self) -> &'static str {
        match self {
            PrecoderKind::Nl1p => "nl1p",
            PrecoderKind::ZfInfinite => "zfinf",
            PrecoderKind::ZfOneBit => "zf1bit",
            PrecoderKind::Msm => "msm",
            PrecoderKind::GreedyRound => "greedy",
            PrecoderKind::Exhaustive => "exhaustive",
            PrecoderKind::BranchBound => "bb",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PrecoderKind::Nl1p => "negative-l1 penalty (NL1P)",
            PrecoderKind::ZfInfinite => "ZF, infinite-resolution DACs",
            PrecoderKind::ZfOneBit => "ZF followed by one-bit quantization",
            PrecoderKind::Msm => "CI max safety margin (quantized relaxation)",
            PrecoderKind::GreedyRound => "greedy rounding (OPSU-style)",
            PrecoderKind::Exhaustive => "exhaustive search",
            PrecoderKind::BranchBound => "branch and bound",
        }
    }

    pub fn is_one_bit(self) -> bool {
        self != PrecoderKind::ZfInfinite
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PrecoderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k = match s.trim().to_ascii_lowercase().as_str() {
            "nl1p" => PrecoderKind::Nl1p,
            "zfinf" | "zf" => PrecoderKind::ZfInfinite,
            "zf1bit" => PrecoderKind::ZfOneBit,
            "msm" => PrecoderKind::Msm,
            "greedy" | "opsu" => PrecoderKind::GreedyRound,
            "exhaustive" => PrecoderKind::Exhaustive,
            "bb" | "branchbound" => PrecoderKind::BranchBound,
            other => {
                return Err(format!("unknown precoder '{other}' (valid: {})", PrecoderKind::valid_names()))
            }
        };
        Ok(k)
    }
}

/// Result of one precoding call.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderOutput {
    /// Physical transmit vector with unit total power.
    pub x_transmit: Vec<Complex64>,
    /// Real-expanded sign vector, for one-bit precoders.
    pub x_binary: Option<Vec<f64>>,
    /// `max_l a_lᵀx` at the returned point.
    pub objective: f64,
    /// Wall-clock seconds spent in the call.
    pub elapsed: f64,
    /// The homotopy hit its round limit before the iterate became one-bit.
    pub round_limit_exceeded: bool,
}

/// How a solver schedule is derived for a given system.
#[derive(Debug, Clone, PartialEq)]
pub enum SchedulePolicy {
    /// The practical step sizes with the default inner limits.
    Practical,
    /// Practical step sizes with custom limits.
    PracticalWithLimits { max_iters: usize, tol: f64 },
    Fixed(SolverSchedule),
}

impl SchedulePolicy {
    pub fn resolve(&self, system: &CiSystem) -> SolverSchedule {
        match self {
            SchedulePolicy::Practical => SolverSchedule::practical(system),
            SchedulePolicy::PracticalWithLimits { max_iters, tol } => {
                SolverSchedule::practical(system).with_limits(*max_iters, *tol)
            }
            SchedulePolicy::Fixed(s) => s.clone(),
        }
    }

    /// Tightened limits used for the λ = 0 relaxation baselines.
    pub fn relaxation() -> Self {
        SchedulePolicy::PracticalWithLimits { max_iters: RELAX_MAX_ITERS, tol: RELAX_TOL }
    }
}

fn one_bit_output(system: &CiSystem, x_binary: Vec<f64>, started: Instant) -> PrecoderOutput {
    let objective = ci_objective(system, &x_binary).0;
    PrecoderOutput {
        x_transmit: to_transmit(&x_binary),
        x_binary: Some(x_binary),
        objective,
        elapsed: started.elapsed().as_secs_f64(),
        round_limit_exceeded: false,
    }
}

pub fn precode_nl1p(
    h: &ComplexMatrix,
    s: &[usize],
    constellation: &PskConstellation,
    config: &HomotopyConfig,
    schedule: &SchedulePolicy,
) -> Result<PrecoderOutput, PrecoderError> {
    let started = Instant::now();
    let system = build_system(h, s, constellation)?;
    let sol = solve_nl1p(&system, config, &schedule.resolve(&system))?;
    let mut out = one_bit_output(&system, sol.x, started);
    out.round_limit_exceeded = !sol.converged;
    Ok(out)
}

/// Unnormalised zero-forcing direction `Hᴴ(HHᴴ)⁻¹ s`.
fn zf_direction(h: &ComplexMatrix, s: &[usize], constellation: &PskConstellation) -> Result<Vec<Complex64>, PrecoderError> {
    let (k, nt) = (h.rows(), h.cols());
    if k > nt {
        return Err(PrecoderError::TooManyUsers { k, nt });
    }
    let symbols: Vec<Complex64> = s.iter().map(|&i| constellation.symbol(i)).collect();
    let hh = h.matmul(&h.adjoint())?;
    let w = solve_linear(&hh, &ComplexMatrix::column(&symbols))?;
    Ok(h.adjoint().mul_vec(w.as_slice()))
}

pub fn precode_zf_infinite(
    h: &ComplexMatrix,
    s: &[usize],
    constellation: &PskConstellation,
) -> Result<PrecoderOutput, PrecoderError> {
    let started = Instant::now();
    let system = build_system(h, s, constellation)?;
    let x = zf_direction(h, s, constellation)?;
    let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let x_transmit: Vec<Complex64> = x.iter().map(|z| z / norm).collect();
    let objective = ci_objective(&system, &from_transmit(&x_transmit)).0;
    Ok(PrecoderOutput {
        x_transmit,
        x_binary: None,
        objective,
        elapsed: started.elapsed().as_secs_f64(),
        round_limit_exceeded: false,
    })
}

pub fn precode_zf_onebit(
    h: &ComplexMatrix,
    s: &[usize],
    constellation: &PskConstellation,
) -> Result<PrecoderOutput, PrecoderError> {
    let started = Instant::now();
    let system = build_system(h, s, constellation)?;
    let x = zf_direction(h, s, constellation)?;
    let x_binary = from_transmit(&x).into_iter().map(sign).collect();
    Ok(one_bit_output(&system, x_binary, started))
}

/// Approximate minimiser of `max_l a_lᵀx` over the box (λ = 0, no homotopy).
pub fn relax_box(system: &CiSystem, schedule: &SolverSchedule) -> SolverState {
    let init = SolverState::initial(system);
    solve_inner(system, 0.0, &init.x, &init.y, schedule)
}

pub fn precode_msm(
    h: &ComplexMatrix,
    s: &[usize],
    constellation: &PskConstellation,
    schedule: &SchedulePolicy,
) -> Result<PrecoderOutput, PrecoderError> {
    let started = Instant::now();
    let system = build_system(h, s, constellation)?;
    let relaxed = relax_box(&system, &schedule.resolve(&system));
    let x_binary = relaxed.x.iter().map(|&v| sign(v)).collect();
    Ok(one_bit_output(&system, x_binary, started))
}

/// Sequential rounding of a relaxed point.
///
/// Coordinates already within [`GREEDY_FIX_TOL`] of ±1 are fixed to their sign.
/// The rest are visited by decreasing magnitude, each set to the sign giving
/// the smaller objective while undecided coordinates keep their relaxed values.
pub fn greedy_round(a: &RealMatrix, relaxed: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = relaxed.to_vec();
    let mut free = Vec::new();
    for (i, v) in x.iter_mut().enumerate() {
        if v.abs() >= 1.0 - GREEDY_FIX_TOL {
            *v = sign(*v);
        } else {
            free.push(i);
        }
    }
    free.sort_by(|&i, &j| relaxed[j].abs().total_cmp(&relaxed[i].abs()).then(i.cmp(&j)));

    let mut values = a.mul_vec(&x);
    let m = a.rows();
    for i in free {
        let col: Vec<f64> = (0..m).map(|l| a[(l, i)]).collect();
        let eval = |target: f64| {
            let d = target - x[i];
            values.iter().zip(&col).map(|(v, c)| v + d * c).fold(f64::NEG_INFINITY, f64::max)
        };
        let (plus, minus) = (eval(1.0), eval(-1.0));
        let target = if minus < plus { -1.0 } else { 1.0 };
        let d = target - x[i];
        values.iter_mut().zip(&col).for_each(|(v, c)| *v += d * c);
        x[i] = target;
    }
    x
}

pub fn precode_greedy(
    h: &ComplexMatrix,
    s: &[usize],
    constellation: &PskConstellation,
    schedule: &SchedulePolicy,
) -> Result<PrecoderOutput, PrecoderError> {
    let started = Instant::now();
    let system = build_system(h, s, constellation)?;
    let relaxed = relax_box(&system, &schedule.resolve(&system));
    let x_binary = greedy_round(system.a_matrix(), &relaxed.x);
    Ok(one_bit_output(&system, x_binary, started))
}

/// Exact minimiser of `max_l a_lᵀx` over `{−1, +1}ⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySearchResult {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Interior nodes branched on (zero for plain enumeration).
    pub nodes_expanded: u64,
    /// Complete sign vectors evaluated.
    pub leaves: u64,
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return x < y;
        }
    }
    false
}

/// Enumerates all `2ⁿ` sign vectors in Gray-code order.
///
/// Ties are broken towards the lexicographically smallest vector with
/// `−1 < +1` and coordinate 0 most significant.
pub fn exhaustive_search(a: &RealMatrix) -> Result<BinarySearchResult, PrecoderError> {
    let (m, n) = (a.rows(), a.cols());
    if n > EXHAUSTIVE_MAX_N {
        return Err(PrecoderError::InstanceTooLarge { n, max: EXHAUSTIVE_MAX_N });
    }
    let columns: Vec<Vec<f64>> = (0..n).map(|i| (0..m).map(|l| a[(l, i)]).collect()).collect();
    let mut x = vec![-1.0; n];
    let mut values = a.mul_vec(&x);
    let objective_of = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut best_x = x.clone();
    let mut best = objective_of(&values);
    let total: u64 = 1 << n;
    for step in 1..total {
        let bit = step.trailing_zeros() as usize;
        x[bit] = -x[bit];
        if step % (1 << 16) == 0 {
            a.mul_vec_into(&x, &mut values);
        } else {
            let d = 2.0 * x[bit];
            values.iter_mut().zip(&columns[bit]).for_each(|(v, c)| *v += d * c);
        }
        let val = objective_of(&values);
        if val < best - 1e-12 || ((val - best).abs() <= 1e-12 && lex_less(&x, &best_x)) {
            best = val;
            best_x.copy_from_slice(&x);
        }
    }
    let objective = max_row_value(a, &best_x).0;
    Ok(BinarySearchResult { x: best_x, objective, nodes_expanded: 0, leaves: total })
}

/// Lower bound on `max_l a_lᵀx` over all completions of a partial assignment:
/// `max_l (Σ_{fixed} a_li x_i − Σ_{free} |a_li|)`.
pub fn node_lower_bound(a: &RealMatrix, assignment: &[Option<f64>]) -> f64 {
    (0..a.rows())
        .map(|l| {
            a.row(l)
                .iter()
                .zip(assignment)
                .map(|(c, x)| match x {
                    Some(v) => c * v,
                    None => -c.abs(),
                })
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

struct BranchBound<'a> {
    columns: Vec<Vec<f64>>,
    order: Vec<usize>,
    partial: Vec<f64>,
    free_abs: Vec<f64>,
    x: Vec<f64>,
    best: f64,
    best_x: Vec<f64>,
    nodes_expanded: u64,
    leaves: u64,
    a: &'a RealMatrix,
}

impl BranchBound<'_> {
    fn bound_after(&self, col: &[f64], v: f64) -> f64 {
        self.partial
            .iter()
            .zip(&self.free_abs)
            .zip(col)
            .map(|((p, f), c)| p + c * v - (f - c.abs()))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn search(&mut self, depth: usize) {
        if depth == self.order.len() {
            self.leaves += 1;
            let val = self.partial.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if val < self.best {
                self.best = val;
                self.best_x.copy_from_slice(&self.x);
            }
            return;
        }
        self.nodes_expanded += 1;
        let i = self.order[depth];
        let col = std::mem::take(&mut self.columns[i]);
        let mut children = [(self.bound_after(&col, 1.0), 1.0), (self.bound_after(&col, -1.0), -1.0)];
        if children[1].0 < children[0].0 {
            children.swap(0, 1);
        }
        for (bound, v) in children {
            if bound >= self.best {
                continue;
            }
            for ((p, f), c) in self.partial.iter_mut().zip(self.free_abs.iter_mut()).zip(&col) {
                *p += c * v;
                *f -= c.abs();
            }
            self.x[i] = v;
            self.search(depth + 1);
            for ((p, f), c) in self.partial.iter_mut().zip(self.free_abs.iter_mut()).zip(&col) {
                *p -= c * v;
                *f += c.abs();
            }
        }
        self.x[i] = 0.0;
        self.columns[i] = col;
    }
}

/// Depth-first branch and bound with the coordinatewise interval bound.
/// Complete: returns a global minimiser of `max_l a_lᵀx` over `{−1, +1}ⁿ`.
pub fn branch_and_bound(a: &RealMatrix) -> BinarySearchResult {
    let (m, n) = (a.rows(), a.cols());
    let columns: Vec<Vec<f64>> = (0..n).map(|i| (0..m).map(|l| a[(l, i)]).collect()).collect();
    let weight = |i: usize| columns[i].iter().map(|c| c.abs()).sum::<f64>();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| weight(j).total_cmp(&weight(i)).then(i.cmp(&j)));
    let free_abs = (0..m).map(|l| a.row(l).iter().map(|c| c.abs()).sum()).collect();

    let mut bb = BranchBound {
        columns,
        order,
        partial: vec![0.0; m],
        free_abs,
        x: vec![0.0; n],
        best: f64::INFINITY,
        best_x: vec![1.0; n],
        nodes_expanded: 0,
        leaves: 0,
        a,
    };
    bb.search(0);
    let objective = max_row_value(bb.a, &bb.best_x).0;
    BinarySearchResult { x: bb.best_x, objective, nodes_expanded: bb.nodes_expanded, leaves: bb.leaves }
}

pub fn precode_exhaustive(
    h: &ComplexMatrix,
    s: &[usize],
    constellation: &PskConstellation,
) -> Result<PrecoderOutput, PrecoderError> {
    let started = Instant::now();
    let system = build_system(h, s, constellation)?;
    let res = exhaustive_search(system.a_matrix())?;
    Ok(one_bit_output(&system, res.x, started))
}

pub fn precode_branch_bound(
    h: &ComplexMatrix,
    s: &[usize],
    constellation: &PskConstellation,
) -> Result<PrecoderOutput, PrecoderError> {
    let started = Instant::now();
    let system = build_system(h, s, constellation)?;
    let res = branch_and_bound(system.a_matrix());
    Ok(one_bit_output(&system, res.x, started))
}

/// Parameters shared by every precoder in a run.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSettings {
    /// Homotopy parameters; `None` uses the defaults for the constellation order.
    pub homotopy: Option<HomotopyConfig>,
    pub nl1p_schedule: SchedulePolicy,
    pub relax_schedule: SchedulePolicy,
}

impl Default for PrecoderSettings {
    fn default() -> Self {
        Self { homotopy: None, nl1p_schedule: SchedulePolicy::Practical, relax_schedule: SchedulePolicy::relaxation() }
    }
}

impl PrecoderSettings {
    pub fn precode(
        &self,
        kind: PrecoderKind,
        h: &ComplexMatrix,
        s: &[usize],
        constellation: &PskConstellation,
    ) -> Result<PrecoderOutput, PrecoderError> {
        match kind {
            PrecoderKind::Nl1p => {
                let cfg = self.homotopy.clone().unwrap_or_else(|| HomotopyConfig::for_order(constellation.order()));
                precode_nl1p(h, s, constellation, &cfg, &self.nl1p_schedule)
            }
            PrecoderKind::ZfInfinite => precode_zf_infinite(h, s, constellation),
            PrecoderKind::ZfOneBit => precode_zf_onebit(h, s, constellation),
            PrecoderKind::Msm => precode_msm(h, s, constellation, &self.relax_schedule),
            PrecoderKind::GreedyRound => precode_greedy(h, s, constellation, &self.relax_schedule),
            PrecoderKind::Exhaustive => precode_exhaustive(h, s, constellation),
            PrecoderKind::BranchBound => precode_branch_bound(h, s, constellation),
        }
    }
}
