//! Constructive-interference symbol-scaling model for M-PSK.
//!
//! Each user's noise-free received signal `h_kᵀ x_T` is decomposed along the
//! two decision-boundary directions of its intended symbol,
//! `h_kᵀ x_T = α_A s_A + α_B s_B`. Stacking `-[α_A, α_B]` for every user gives
//! the real linear map `Λ = A x`, with `x = [Re(x_T); Im(x_T)]` and the
//! `1/√(2N_t)` power normalisation folded into `A`.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::numerics::{ComplexMatrix, RealMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("PSK order must be a power of two and at least 4, got {0}")]
    InvalidOrder(usize),
    #[error("symbol index {index} out of range for {order}-PSK")]
    SymbolOutOfRange { index: usize, order: usize },
    #[error("degenerate boundary pair (determinant {0:.3e})")]
    DegenerateBoundary(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Unit-modulus M-PSK constellation with symbols at `e^{j(2πi/M + π/M)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PskConstellation {
    order: usize,
    symbols: Vec<Complex64>,
}

impl PskConstellation {
    pub fn new(order: usize) -> Result<Self, ModelError> {
        if order < 4 || !order.is_power_of_two() {
            return Err(ModelError::InvalidOrder(order));
        }
        let symbols = (0..order)
            .map(|i| Complex64::from_polar(1.0, Self::phase_of(order, i)))
            .collect();
        Ok(Self { order, symbols })
    }

    fn phase_of(order: usize, index: usize) -> f64 {
        2.0 * PI * index as f64 / order as f64 + PI / order as f64
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.order.trailing_zeros()
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> Complex64 {
        self.symbols[index]
    }

    /// Nominal phase of symbol `index`, in `(0, 2π)`.
    pub fn phase(&self, index: usize) -> f64 {
        Self::phase_of(self.order, index)
    }

    /// Half the angular width of a decision sector.
    pub fn sector_half_angle(&self) -> f64 {
        PI / self.order as f64
    }

    /// Binary-reflected Gray label carried by symbol `index`.
    pub fn gray_label(&self, index: usize) -> u32 {
        let i = index as u32;
        i ^ (i >> 1)
    }

    /// Symbol index that carries Gray label `label`.
    pub fn index_of_label(&self, label: u32) -> usize {
        let mut i = label;
        let mut shift = label >> 1;
        while shift != 0 {
            i ^= shift;
            shift >>= 1;
        }
        i as usize
    }

    /// Number of differing bits between the labels of two symbols.
    pub fn bit_errors(&self, sent: usize, detected: usize) -> u32 {
        (self.gray_label(sent) ^ self.gray_label(detected)).count_ones()
    }

    fn check_index(&self, index: usize) -> Result<(), ModelError> {
        if index >= self.order {
            return Err(ModelError::SymbolOutOfRange { index, order: self.order });
        }
        Ok(())
    }
}

/// Unit vectors along the counterclockwise (`a`) and clockwise (`b`)
/// decision boundaries of one symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPair {
    pub s_a: Complex64,
    pub s_b: Complex64,
}

pub fn boundary_pair(constellation: &PskConstellation, symbol_index: usize) -> Result<BoundaryPair, ModelError> {
    constellation.check_index(symbol_index)?;
    let s = constellation.symbol(symbol_index);
    let half = constellation.sector_half_angle();
    Ok(BoundaryPair { s_a: s * Complex64::from_polar(1.0, half), s_b: s * Complex64::from_polar(1.0, -half) })
}

/// The 2 × 2N_t block mapping `[Re(x_T); Im(x_T)]` to `[α_A; α_B]` for one user.
pub fn build_vk(h_k: &[Complex64], pair: &BoundaryPair) -> Result<RealMatrix, ModelError> {
    let (sa, sb) = (pair.s_a, pair.s_b);
    let det = sa.re * sb.im - sa.im * sb.re;
    if det.abs() < 1e-9 {
        return Err(ModelError::DegenerateBoundary(det));
    }
    let nt = h_k.len();
    let mut v = RealMatrix::zeros(2, 2 * nt);
    // [[Im sB, -Re sB], [-Im sA, Re sA]] · [[Re h, -Im h], [Im h, Re h]] / det
    let coeff = [[sb.im, -sb.re], [-sa.im, sa.re]];
    for (row, [c0, c1]) in coeff.iter().enumerate() {
        for (i, h) in h_k.iter().enumerate() {
            v[(row, i)] = (c0 * h.re + c1 * h.im) / det;
            v[(row, nt + i)] = (-c0 * h.im + c1 * h.re) / det;
        }
    }
    Ok(v)
}

/// Real-expanded CI system for one channel use.
#[derive(Debug, Clone)]
pub struct CiSystem {
    a: RealMatrix,
    k_users: usize,
    n_antennas: usize,
    constellation: PskConstellation,
    symbol_indices: Vec<usize>,
    scale: f64,
}

impl CiSystem {
    /// Wraps an explicit operator. Used by tests and small hand-built instances.
    pub fn from_matrix(a: RealMatrix, constellation: PskConstellation) -> Result<Self, ModelError> {
        if !a.rows().is_multiple_of(2) || !a.cols().is_multiple_of(2) || a.rows() == 0 || a.cols() == 0 {
            return Err(ModelError::DimensionMismatch(format!(
                "operator must be 2K x 2N_t, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let (k_users, n_antennas) = (a.rows() / 2, a.cols() / 2);
        Ok(Self {
            a,
            k_users,
            n_antennas,
            constellation,
            symbol_indices: Vec::new(),
            scale: 1.0 / ((2 * n_antennas) as f64).sqrt(),
        })
    }

    pub fn a_matrix(&self) -> &RealMatrix {
        &self.a
    }

    pub fn k_users(&self) -> usize {
        self.k_users
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    /// Number of rows `m = 2K`.
    pub fn m(&self) -> usize {
        self.a.rows()
    }

    /// Number of columns `n = 2N_t`.
    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn constellation(&self) -> &PskConstellation {
        &self.constellation
    }

    /// Intended symbol per user; empty for systems built from a raw matrix.
    pub fn symbol_indices(&self) -> &[usize] {
        &self.symbol_indices
    }

    /// Power normalisation `1/√(2N_t)` folded into the operator.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `Λ = A x`, the negated scaling factors.
    pub fn alphas(&self, x: &[f64]) -> Vec<f64> {
        self.a.mul_vec(x)
    }
}

pub fn build_system(
    h: &ComplexMatrix,
    symbol_indices: &[usize],
    constellation: &PskConstellation,
) -> Result<CiSystem, ModelError> {
    let (k_users, n_antennas) = (h.rows(), h.cols());
    if k_users == 0 || n_antennas == 0 {
        return Err(ModelError::DimensionMismatch("channel must be at least 1x1".into()));
    }
    if symbol_indices.len() != k_users {
        return Err(ModelError::DimensionMismatch(format!(
            "{} symbols for {k_users} users",
            symbol_indices.len()
        )));
    }
    let scale = 1.0 / ((2 * n_antennas) as f64).sqrt();
    let mut data = Vec::with_capacity(4 * k_users * n_antennas);
    for (k, &sym) in symbol_indices.iter().enumerate() {
        let pair = boundary_pair(constellation, sym)?;
        let h_k: Vec<Complex64> = h.row(k).iter().map(|z| z * scale).collect();
        let vk = build_vk(&h_k, &pair)?;
        data.extend(vk.as_slice().iter().map(|v| -v));
    }
    let a = RealMatrix::from_row_major(2 * k_users, 2 * n_antennas, data)
        .map_err(|e| ModelError::DimensionMismatch(e.to_string()))?;
    Ok(CiSystem {
        a,
        k_users,
        n_antennas,
        constellation: constellation.clone(),
        symbol_indices: symbol_indices.to_vec(),
        scale,
    })
}

/// `max_l a_lᵀ x` and the smallest row index attaining it.
pub fn ci_objective(system: &CiSystem, x: &[f64]) -> (f64, usize) {
    assert_eq!(x.len(), system.n(), "x must have length 2N_t");
    max_row_value(system.a_matrix(), x)
}

pub(crate) fn max_row_value(a: &RealMatrix, x: &[f64]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for l in 0..a.rows() {
        let v: f64 = a.row(l).iter().zip(x).map(|(p, q)| p * q).sum();
        if v > best.0 {
            best = (v, l);
        }
    }
    best
}

/// Minimum scaling factor over all users: positive iff every noise-free
/// received signal lies strictly inside its decision sector.
pub fn safety_margin(system: &CiSystem, x: &[f64]) -> f64 {
    -ci_objective(system, x).0
}

/// Maps a real-expanded vector to the physical transmit signal
/// `(x_re + j x_im) / √(2N_t)`.
pub fn to_transmit(x: &[f64]) -> Vec<Complex64> {
    let nt = x.len() / 2;
    let scale = 1.0 / (x.len() as f64).sqrt();
    (0..nt).map(|i| Complex64::new(x[i], x[nt + i]) * scale).collect()
}

/// Inverse of [`to_transmit`].
pub fn from_transmit(x_t: &[Complex64]) -> Vec<f64> {
    let scale = ((2 * x_t.len()) as f64).sqrt();
    x_t.iter().map(|z| z.re * scale).chain(x_t.iter().map(|z| z.im * scale)).collect()
}
