//! Independent oracles shared by the integration tests. Nothing here calls the
//! code path it is used to check.

#![allow(dead_code)]

use num_complex::Complex64;
use onebit_ci::numerics::{gaussian_complex_matrix, ComplexMatrix, RealMatrix, SeededRng};
use onebit_ci::{build_system, CiSystem, PskConstellation};

pub struct Instance {
    pub h: ComplexMatrix,
    pub s: Vec<usize>,
    pub constellation: PskConstellation,
    pub system: CiSystem,
}

pub fn instance(seed: u64, k: usize, nt: usize, order: usize) -> Instance {
    let constellation = PskConstellation::new(order).unwrap();
    let mut rng = SeededRng::new(seed);
    let h = gaussian_complex_matrix(&mut rng, k, nt);
    let s: Vec<usize> = (0..k).map(|_| rng.index(order)).collect();
    let system = build_system(&h, &s, &constellation).unwrap();
    Instance { h, s, constellation, system }
}

/// `min_k min(α_A, α_B)` computed in the complex domain: for each user solve
/// `y = α_A e^{j(φ+π/M)} + α_B e^{j(φ−π/M)}` by Cramer's rule.
pub fn complex_min_alpha(h: &ComplexMatrix, s: &[usize], order: usize, x: &[f64]) -> f64 {
    let nt = h.cols();
    let scale = 1.0 / ((2 * nt) as f64).sqrt();
    let x_t: Vec<Complex64> = (0..nt).map(|i| Complex64::new(x[i], x[nt + i]) * scale).collect();
    let mut min_alpha = f64::INFINITY;
    for (k, &sym) in s.iter().enumerate() {
        let y: Complex64 = (0..nt).map(|i| h[(k, i)] * x_t[i]).sum();
        let m = order as f64;
        let phi = 2.0 * std::f64::consts::PI * sym as f64 / m + std::f64::consts::PI / m;
        let sa = Complex64::from_polar(1.0, phi + std::f64::consts::PI / m);
        let sb = Complex64::from_polar(1.0, phi - std::f64::consts::PI / m);
        // [Re sa, Re sb; Im sa, Im sb] [αA; αB] = [Re y; Im y]
        let det = sa.re * sb.im - sb.re * sa.im;
        let alpha_a = (y.re * sb.im - sb.re * y.im) / det;
        let alpha_b = (sa.re * y.im - y.re * sa.im) / det;
        min_alpha = min_alpha.min(alpha_a).min(alpha_b);
    }
    min_alpha
}

/// Row-by-row evaluation of `max_l a_lᵀx`.
pub fn naive_max_row(a: &RealMatrix, x: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for l in 0..a.rows() {
        let mut acc = 0.0;
        for i in 0..a.cols() {
            acc += a[(l, i)] * x[i];
        }
        if acc > best {
            best = acc;
        }
    }
    best
}

pub fn sign_vector(code: u64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if (code >> i) & 1 == 1 { 1.0 } else { -1.0 }).collect()
}

/// Plain enumeration of `{−1, +1}ⁿ`, recomputing every product from scratch.
pub fn brute_force_optimum(a: &RealMatrix) -> (f64, Vec<f64>) {
    let n = a.cols();
    let mut best = (f64::INFINITY, vec![]);
    for code in 0..(1u64 << n) {
        let x = sign_vector(code, n);
        let v = naive_max_row(a, &x);
        if v < best.0 {
            best = (v, x);
        }
    }
    best
}

/// Minimiser over a uniform grid on [−1, 1] with spacing `step` of
/// `g x − λ|x| + (τ/2)(x − x0)²`.
pub fn grid_coordinate_min(g: f64, lambda: f64, tau: f64, x0: f64, step: f64) -> f64 {
    let points = (2.0 / step).round() as i64;
    let f = |t: f64| g * t - lambda * t.abs() + 0.5 * tau * (t - x0) * (t - x0);
    let mut best = (f64::INFINITY, 0.0);
    for j in 0..=points {
        let t = -1.0 + j as f64 * step;
        let v = f(t);
        if v < best.0 {
            best = (v, t);
        }
    }
    best.1
}

/// Projection onto the simplex by enumerating every candidate support set.
/// For a support `S` the stationary point is `w_S = v_S − θ` with
/// `θ = (Σ_S v − 1)/|S|`; the feasible candidate closest to `v` wins.
pub fn active_set_projection(v: &[f64]) -> Vec<f64> {
    let m = v.len();
    assert!(m <= 16);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << m) {
        let support: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let theta = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut w = vec![0.0; m];
        let mut feasible = true;
        for &i in &support {
            w[i] = v[i] - theta;
            if w[i] < -1e-15 {
                feasible = false;
            }
        }
        if !feasible {
            continue;
        }
        let dist: f64 = w.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, w));
        }
    }
    best.unwrap().1
}

/// Maximum violation of the projection optimality conditions:
/// `w ≥ 0`, `Σw = 1`, and some `θ` with `w_i = v_i − θ` where `w_i > 0` and
/// `v_i ≤ θ` where `w_i = 0`.
pub fn simplex_kkt_violation(v: &[f64], w: &[f64]) -> f64 {
    let mut worst = (w.iter().sum::<f64>() - 1.0).abs();
    worst = worst.max(w.iter().fold(0.0f64, |a, &x| a.max(-x)));
    let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    if support.is_empty() {
        return f64::INFINITY;
    }
    let theta = support.iter().map(|&i| v[i] - w[i]).sum::<f64>() / support.len() as f64;
    for i in 0..w.len() {
        let r = if w[i] > 0.0 { (v[i] - theta - w[i]).abs() } else { (v[i] - theta).max(0.0) };
        worst = worst.max(r);
    }
    worst
}

/// Singular values by one-sided Jacobi rotations.
pub fn jacobi_singular_values(a: &RealMatrix) -> Vec<f64> {
    let (m, n) = (a.rows(), a.cols());
    // work on columns of a (m x n); if n > m use the transpose
    let (rows, cols, mut u): (usize, usize, Vec<Vec<f64>>) = if n <= m {
        (m, n, (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect())
    } else {
        (n, m, (0..m).map(|i| (0..n).map(|j| a[(i, j)]).collect()).collect())
    };
    let _ = rows;
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = u[p].iter().map(|x| x * x).sum();
                let beta: f64 = u[q].iter().map(|x| x * x).sum();
                let gamma: f64 = u[p].iter().zip(&u[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (cp, cq) = (u[p].clone(), u[q].clone());
                for k in 0..cp.len() {
                    u[p][k] = c * cp[k] - s * cq[k];
                    u[q][k] = s * cp[k] + c * cq[k];
                }
            }
        }
        if off < 1e-14 {
            break;
        }
    }
    let mut sv: Vec<f64> = u.iter().map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
