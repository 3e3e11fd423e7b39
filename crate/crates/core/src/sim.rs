//! Monte-Carlo link-level BER and runtime harness.
//!
//! Channel, symbol and noise draws come from substreams derived from the
//! master seed, so every precoder in a run sees the same channels, symbols
//! and noise realisations. Channel realisations are processed in parallel and
//! merged in channel order.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ci_model::{ModelError, PskConstellation};
use crate::numerics::{gaussian_complex_matrix, SeededRng};
use crate::precoders::{PrecoderKind, PrecoderSettings, EXHAUSTIVE_MAX_N};

const STREAM_CHANNEL: u64 = 1;
const STREAM_SYMBOLS: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// Exact column header of the BER CSV.
pub const CSV_HEADER: &str = "precoder,snr_db,ber,bit_errors,bits_total,mean_cpu_seconds,feasibility_failures";
pub const TIMING_CSV_HEADER: &str = "precoder,k_users,n_antennas,mean_cpu_seconds,instances";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}

impl From<ModelError> for SimError {
    fn from(e: ModelError) -> Self {
        SimError::ConfigInvalid(e.to_string())
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub k_users: usize,
    pub n_antennas: usize,
    pub psk_order: usize,
    pub snr_grid_db: Vec<f64>,
    /// Symbol slots per channel realisation.
    pub block_length: usize,
    pub n_channels: usize,
    pub seed: u64,
    pub precoders: Vec<PrecoderKind>,
    #[serde(default)]
    pub output_path: String,
    /// When false, CPU times are reported as zero so output is reproducible byte for byte.
    #[serde(default = "default_true")]
    pub record_timing: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            k_users: 8,
            n_antennas: 32,
            psk_order: 8,
            snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            block_length: 10,
            n_channels: 200,
            seed: 7,
            precoders: vec![PrecoderKind::Nl1p, PrecoderKind::ZfOneBit, PrecoderKind::ZfInfinite],
            output_path: String::new(),
            record_timing: true,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::ConfigInvalid(m));
        if self.k_users == 0 || self.n_antennas == 0 {
            return bad("users and antennas must be at least 1".into());
        }
        if ![4, 8, 16, 32].contains(&self.psk_order) {
            return bad(format!("psk order must be one of 4, 8, 16, 32, got {}", self.psk_order));
        }
        if self.block_length == 0 {
            return bad("block length must be at least 1".into());
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return bad("snr grid must be a non-empty list of finite values".into());
        }
        if self.precoders.is_empty() {
            return bad(format!("no precoders selected (valid: {})", PrecoderKind::valid_names()));
        }
        let uses_zf = self.precoders.iter().any(|k| matches!(k, PrecoderKind::ZfInfinite | PrecoderKind::ZfOneBit));
        if uses_zf && self.n_antennas < self.k_users {
            return bad(format!(
                "zero-forcing baselines need antennas >= users ({} < {})",
                self.n_antennas, self.k_users
            ));
        }
        if self.precoders.contains(&PrecoderKind::Exhaustive) && 2 * self.n_antennas > EXHAUSTIVE_MAX_N {
            return bad(format!("exhaustive search supports at most {} antennas", EXHAUSTIVE_MAX_N / 2));
        }
        let mut seen = self.precoders.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.precoders.len() {
            return bad("precoder list contains duplicates".into());
        }
        Ok(())
    }

    pub fn bits_per_cell(&self) -> u64 {
        (self.n_channels * self.block_length * self.k_users) as u64 * self.psk_order.trailing_zeros() as u64
    }
}

/// Aggregated outcome for one (precoder, SNR) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub precoder: PrecoderKind,
    pub snr_db: f64,
    pub ber: f64,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub mean_cpu_seconds: f64,
    pub feasibility_failures: u64,
}

/// A precoding call that returned an error; its slot is excluded from the tallies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecoderFailure {
    pub precoder: PrecoderKind,
    pub channel: usize,
    pub slot: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: ScenarioConfig,
    pub cells: Vec<CellResult>,
    #[serde(default)]
    pub failures: Vec<PrecoderFailure>,
}

impl SimResult {
    pub fn cell(&self, precoder: PrecoderKind, snr_db: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.precoder == precoder && c.snr_db == snr_db)
    }
}

fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Phase-nearest PSK detection. Ties go to the smaller index; `y = 0` maps to 0.
pub fn detect_symbol(y: Complex64, constellation: &PskConstellation) -> usize {
    if y.norm_sqr() == 0.0 {
        return 0;
    }
    let theta = y.arg();
    let mut best = (0, f64::INFINITY);
    for i in 0..constellation.order() {
        let d = wrap_angle(theta - constellation.phase(i)).abs();
        if d < best.1 - 1e-12 {
            best = (i, d);
        }
    }
    best.0
}

#[derive(Debug, Clone, Default)]
struct Tally {
    bit_errors: Vec<u64>,
    bits: Vec<u64>,
    cpu_seconds: f64,
    calls: u64,
    feasibility_failures: u64,
}

fn tally_channel(
    config: &ScenarioConfig,
    constellation: &PskConstellation,
    settings: &PrecoderSettings,
    channel: usize,
) -> (Vec<Tally>, Vec<PrecoderFailure>) {
    let (k, nt) = (config.k_users, config.n_antennas);
    let n_snr = config.snr_grid_db.len();
    let bits_per_symbol = constellation.bits_per_symbol() as u64;
    let mut tallies = vec![
        Tally { bit_errors: vec![0; n_snr], bits: vec![0; n_snr], ..Default::default() };
        config.precoders.len()
    ];
    let mut failures = Vec::new();

    let mut ch_rng = SeededRng::substream(config.seed, &[STREAM_CHANNEL, channel as u64]);
    let h = gaussian_complex_matrix(&mut ch_rng, k, nt);

    for slot in 0..config.block_length {
        let mut sym_rng = SeededRng::substream(config.seed, &[STREAM_SYMBOLS, channel as u64, slot as u64]);
        let s: Vec<usize> = (0..k).map(|_| sym_rng.index(constellation.order())).collect();

        // one noise draw per (slot, snr), shared by every precoder
        let noise: Vec<Vec<Complex64>> = config
            .snr_grid_db
            .iter()
            .map(|&snr| {
                let sigma2 = 10f64.powf(-snr / 10.0);
                let mut rng = SeededRng::substream(
                    config.seed,
                    &[STREAM_NOISE, channel as u64, slot as u64, snr.to_bits()],
                );
                (0..k).map(|_| rng.complex_normal(sigma2)).collect()
            })
            .collect();

        for (p, &kind) in config.precoders.iter().enumerate() {
            let out = match settings.precode(kind, &h, &s, constellation) {
                Ok(out) => out,
                Err(e) => {
                    failures.push(PrecoderFailure { precoder: kind, channel, slot, message: e.to_string() });
                    continue;
                }
            };
            let t = &mut tallies[p];
            t.calls += 1;
            if config.record_timing {
                t.cpu_seconds += out.elapsed;
            }
            if out.round_limit_exceeded {
                t.feasibility_failures += 1;
            }
            let clean = h.mul_vec(&out.x_transmit);
            for (j, n) in noise.iter().enumerate() {
                for ((&yk, nk), &sk) in clean.iter().zip(n).zip(&s) {
                    let detected = detect_symbol(yk + nk, constellation);
                    t.bit_errors[j] += constellation.bit_errors(sk, detected) as u64;
                }
                t.bits[j] += k as u64 * bits_per_symbol;
            }
        }
    }
    (tallies, failures)
}

/// Runs the full Monte-Carlo protocol described by `config`.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SimResult, SimError> {
    run_scenario_with(config, &PrecoderSettings::default())
}

pub fn run_scenario_with(config: &ScenarioConfig, settings: &PrecoderSettings) -> Result<SimResult, SimError> {
    config.validate()?;
    let constellation = PskConstellation::new(config.psk_order)?;

    let per_channel: Vec<(Vec<Tally>, Vec<PrecoderFailure>)> = (0..config.n_channels)
        .into_par_iter()
        .map(|c| tally_channel(config, &constellation, settings, c))
        .collect();

    let n_snr = config.snr_grid_db.len();
    let mut totals = vec![
        Tally { bit_errors: vec![0; n_snr], bits: vec![0; n_snr], ..Default::default() };
        config.precoders.len()
    ];
    let mut failures = Vec::new();
    for (tallies, fails) in per_channel {
        for (acc, t) in totals.iter_mut().zip(tallies) {
            acc.bit_errors.iter_mut().zip(&t.bit_errors).for_each(|(a, b)| *a += b);
            acc.bits.iter_mut().zip(&t.bits).for_each(|(a, b)| *a += b);
            acc.cpu_seconds += t.cpu_seconds;
            acc.calls += t.calls;
            acc.feasibility_failures += t.feasibility_failures;
        }
        failures.extend(fails);
    }

    let mut cells = Vec::with_capacity(config.precoders.len() * n_snr);
    for (&kind, t) in config.precoders.iter().zip(&totals) {
        let mean_cpu = if t.calls > 0 { t.cpu_seconds / t.calls as f64 } else { 0.0 };
        for (j, &snr) in config.snr_grid_db.iter().enumerate() {
            let ber = if t.bits[j] > 0 { t.bit_errors[j] as f64 / t.bits[j] as f64 } else { 0.0 };
            cells.push(CellResult {
                precoder: kind,
                snr_db: snr,
                ber,
                bit_errors: t.bit_errors[j],
                bits_total: t.bits[j],
                mean_cpu_seconds: mean_cpu,
                feasibility_failures: t.feasibility_failures,
            });
        }
    }
    Ok(SimResult { config: config.clone(), cells, failures })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format '{other}' (valid: csv, json)")),
        }
    }
}

/// Six significant digits in scientific notation.
pub fn format_sig6(v: f64) -> String {
    format!("{v:.5e}")
}

pub fn results_csv(result: &SimResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in &result.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.precoder.name(),
            c.snr_db,
            format_sig6(c.ber),
            c.bit_errors,
            c.bits_total,
            format_sig6(c.mean_cpu_seconds),
            c.feasibility_failures
        );
    }
    out
}

pub fn results_json(result: &SimResult) -> Result<String, SimError> {
    Ok(serde_json::to_string_pretty(result)?)
}

pub fn emit_results(result: &SimResult, path: &Path, format: OutputFormat) -> Result<(), SimError> {
    let body = match format {
        OutputFormat::Csv => results_csv(result),
        OutputFormat::Json => results_json(result)?,
    };
    std::fs::write(path, body).map_err(|source| SimError::Io { path: path.display().to_string(), source })
}

/// Runtime sweep over the number of users at fixed antennas and SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSweepConfig {
    pub users: Vec<usize>,
    pub n_antennas: usize,
    pub psk_order: usize,
    pub snr_db: f64,
    pub block_length: usize,
    pub n_channels: usize,
    pub seed: u64,
    pub precoders: Vec<PrecoderKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub precoder: PrecoderKind,
    pub k_users: usize,
    pub n_antennas: usize,
    pub mean_cpu_seconds: f64,
    pub instances: u64,
}

/// Mean precoding time per instance for each K. Runs on the calling thread.
pub fn run_time_sweep(config: &TimeSweepConfig) -> Result<Vec<TimingRow>, SimError> {
    if config.users.is_empty() {
        return Err(SimError::ConfigInvalid("user list is empty".into()));
    }
    let settings = PrecoderSettings::default();
    let mut rows = Vec::new();
    for &k in &config.users {
        let scenario = ScenarioConfig {
            k_users: k,
            n_antennas: config.n_antennas,
            psk_order: config.psk_order,
            snr_grid_db: vec![config.snr_db],
            block_length: config.block_length,
            n_channels: config.n_channels,
            seed: config.seed,
            precoders: config.precoders.clone(),
            output_path: String::new(),
            record_timing: true,
        };
        scenario.validate()?;
        let constellation = PskConstellation::new(config.psk_order)?;
        let mut sums = vec![(0.0, 0u64); config.precoders.len()];
        for c in 0..config.n_channels {
            let (tallies, _) = tally_channel(&scenario, &constellation, &settings, c);
            for (acc, t) in sums.iter_mut().zip(tallies) {
                acc.0 += t.cpu_seconds;
                acc.1 += t.calls;
            }
        }
        for (&kind, (secs, calls)) in config.precoders.iter().zip(sums) {
            rows.push(TimingRow {
                precoder: kind,
                k_users: k,
                n_antennas: config.n_antennas,
                mean_cpu_seconds: if calls > 0 { secs / calls as f64 } else { 0.0 },
                instances: calls,
            });
        }
    }
    Ok(rows)
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut out = String::from(TIMING_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.precoder.name(),
            r.k_users,
            r.n_antennas,
            format_sig6(r.mean_cpu_seconds),
            r.instances
        );
    }
    out
}
