//! Fast self-checks on small random instances, run by `onebit-sim verify`.
//!
//! Each check compares the library against an independent computation:
//! complex-domain decomposition, brute-force grids, enumeration, KKT
//! conditions. Sizes are kept small so the whole suite runs in seconds.

use num_complex::Complex64;

use crate::ci_model::{boundary_pair, build_system, ci_objective, CiSystem, PskConstellation};
use crate::numerics::{gaussian_complex_matrix, SeededRng};
use crate::penalty_solver::{
    exactness_threshold, penalty_objective, project_simplex, solve_nl1p, x_update, HomotopyConfig, SolverSchedule,
    SolverState,
};
use crate::precoders::{branch_and_bound, exhaustive_search, precode_zf_infinite};
use crate::sim::detect_symbol;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_instance(rng: &mut SeededRng, k: usize, nt: usize, order: usize) -> CiSystem {
    let p = PskConstellation::new(order).expect("valid order");
    let h = gaussian_complex_matrix(rng, k, nt);
    let s: Vec<usize> = (0..k).map(|_| rng.index(order)).collect();
    build_system(&h, &s, &p).expect("valid instance")
}

fn random_signs(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| if rng.uniform() < 0.5 { -1.0 } else { 1.0 }).collect()
}

fn check_model(seed: u64) -> CheckOutcome {
    let mut rng = SeededRng::new(seed);
    let mut worst = 0.0f64;
    for trial in 0..60 {
        let order = [4, 8, 16][trial % 3];
        let p = PskConstellation::new(order).unwrap();
        let (k, nt) = (1 + rng.index(4), 1 + rng.index(6));
        let h = gaussian_complex_matrix(&mut rng, k, nt);
        let s: Vec<usize> = (0..k).map(|_| rng.index(order)).collect();
        let sys = build_system(&h, &s, &p).unwrap();
        let x = random_signs(&mut rng, 2 * nt);
        let scale = 1.0 / ((2 * nt) as f64).sqrt();
        let mut min_alpha = f64::INFINITY;
        for (u, &sym) in s.iter().enumerate() {
            let y: Complex64 = (0..nt).map(|i| h[(u, i)] * scale * Complex64::new(x[i], x[nt + i])).sum();
            let b = boundary_pair(&p, sym).unwrap();
            // Cramer's rule on y = αA sA + αB sB
            let alpha_a = (b.s_b.conj() * y).im / (b.s_b.conj() * b.s_a).im;
            let alpha_b = (b.s_a.conj() * y).im / (b.s_a.conj() * b.s_b).im;
            min_alpha = min_alpha.min(alpha_a).min(alpha_b);
        }
        worst = worst.max((ci_objective(&sys, &x).0 + min_alpha).abs());
    }
    CheckOutcome { name: "model-decomposition", passed: worst <= 1e-10, detail: format!("max deviation {worst:.2e}") }
}

fn check_simplex(seed: u64) -> CheckOutcome {
    let mut rng = SeededRng::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let m = 1 + rng.index(16);
        let v: Vec<f64> = (0..m).map(|_| 3.0 * rng.standard_normal()).collect();
        let w = project_simplex(&v);
        let sum: f64 = w.iter().sum();
        worst = worst.max((sum - 1.0).abs());
        worst = worst.max(w.iter().fold(0.0f64, |a, &x| a.max(-x)));
        // KKT: w_i = v_i − θ on the support, v_i ≤ θ off it
        if let Some(i) = (0..m).find(|&i| w[i] > 0.0) {
            let theta = v[i] - w[i];
            for j in 0..m {
                let r = if w[j] > 0.0 { (v[j] - theta - w[j]).abs() } else { (v[j] - theta).max(0.0) };
                worst = worst.max(r);
            }
        }
    }
    CheckOutcome { name: "simplex-projection-kkt", passed: worst <= 1e-9, detail: format!("max residual {worst:.2e}") }
}

fn check_x_update(seed: u64) -> CheckOutcome {
    let mut rng = SeededRng::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let sys = random_instance(&mut rng, 1, 1, 8);
        let x: Vec<f64> = (0..2).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let y = vec![0.5, 0.5];
        let lambda = rng.uniform_range(0.0, 0.5);
        let tau = rng.uniform_range(0.1, 2.0);
        let state = SolverState { x: x.clone(), y: y.clone(), iter: 0, last_step_norm: 0.0 };
        let got = x_update(&sys, &state, lambda, tau);
        let grad = sys.a_matrix().mul_transpose_vec(&y);
        for i in 0..2 {
            let f = |t: f64| grad[i] * t - lambda * t.abs() + 0.5 * tau * (t - x[i]).powi(2);
            let best = (0..=2000)
                .map(|j| -1.0 + j as f64 * 1e-3)
                .min_by(|a, b| f(*a).total_cmp(&f(*b)))
                .unwrap();
            worst = worst.max((best - got[i]).abs());
        }
    }
    CheckOutcome { name: "x-update-closed-form", passed: worst <= 1e-2, detail: format!("max deviation {worst:.2e}") }
}

fn check_exactness(seed: u64) -> CheckOutcome {
    let mut rng = SeededRng::new(seed);
    let mut failures = 0;
    for _ in 0..5 {
        let sys = random_instance(&mut rng, 2, 3, 8);
        let lambda = 1.01 * exactness_threshold(&sys);
        let n = sys.n();
        for code in 0..(1u32 << n) {
            let x: Vec<f64> = (0..n).map(|i| if code >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let base = penalty_objective(&sys, &x, lambda);
            for i in 0..n {
                let mut moved = x.clone();
                moved[i] -= 1e-6 * x[i];
                if penalty_objective(&sys, &moved, lambda) < base - 1e-12 {
                    failures += 1;
                }
            }
        }
    }
    CheckOutcome { name: "penalty-local-minima", passed: failures == 0, detail: format!("{failures} failures") }
}

fn check_branch_bound(seed: u64) -> CheckOutcome {
    let mut rng = SeededRng::new(seed);
    let mut mismatches = 0;
    for _ in 0..20 {
        let sys = random_instance(&mut rng, 3, 4, 8);
        let ex = exhaustive_search(sys.a_matrix()).unwrap();
        let bb = branch_and_bound(sys.a_matrix());
        if (ex.objective - bb.objective).abs() > 1e-9 {
            mismatches += 1;
        }
    }
    CheckOutcome { name: "branch-bound-vs-exhaustive", passed: mismatches == 0, detail: format!("{mismatches} mismatches") }
}

fn check_nl1p(seed: u64) -> CheckOutcome {
    let mut rng = SeededRng::new(seed);
    let mut binary = 0;
    let trials = 20;
    for _ in 0..trials {
        let sys = random_instance(&mut rng, 3, 5, 8);
        let sol = solve_nl1p(&sys, &HomotopyConfig::for_order(8), &SolverSchedule::practical(&sys)).unwrap();
        if sol.converged && sol.x.iter().all(|v| v.abs() == 1.0) {
            binary += 1;
        }
    }
    CheckOutcome { name: "nl1p-one-bit", passed: binary == trials, detail: format!("{binary}/{trials} one-bit") }
}

fn check_detection(seed: u64) -> CheckOutcome {
    let mut rng = SeededRng::new(seed);
    let p = PskConstellation::new(16).unwrap();
    let mut mismatches = 0;
    for _ in 0..2000 {
        let y = rng.complex_normal(1.0);
        let euclid = (0..16)
            .min_by(|&a, &b| (y - p.symbol(a)).norm().total_cmp(&(y - p.symbol(b)).norm()))
            .unwrap();
        if euclid != detect_symbol(y, &p) {
            mismatches += 1;
        }
    }
    CheckOutcome { name: "phase-detection", passed: mismatches == 0, detail: format!("{mismatches} mismatches") }
}

fn check_zf(seed: u64) -> CheckOutcome {
    let mut rng = SeededRng::new(seed);
    let p = PskConstellation::new(8).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let h = gaussian_complex_matrix(&mut rng, 4, 10);
        let s: Vec<usize> = (0..4).map(|_| rng.index(8)).collect();
        let out = match precode_zf_infinite(&h, &s, &p) {
            Ok(o) => o,
            Err(e) => return CheckOutcome { name: "zf-interference", passed: false, detail: e.to_string() },
        };
        let y = h.mul_vec(&out.x_transmit);
        let gain = y[0] / p.symbol(s[0]);
        for (yk, &sk) in y.iter().zip(&s) {
            worst = worst.max((yk - gain * p.symbol(sk)).norm());
        }
    }
    CheckOutcome { name: "zf-interference", passed: worst <= 1e-8, detail: format!("max residual {worst:.2e}") }
}

/// Runs every check with substreams of `seed`.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    let sub = |i: u64| SeededRng::substream(seed, &[i]).seed();
    vec![
        check_model(sub(1)),
        check_simplex(sub(2)),
        check_x_update(sub(3)),
        check_exactness(sub(4)),
        check_branch_bound(sub(5)),
        check_nl1p(sub(6)),
        check_detection(sub(7)),
        check_zf(sub(8)),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_all(2024) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
