//! Command-line front end: `ber`, `time` and `verify` subcommands.
//!
//! Exit codes: 0 on success, 1 on a configuration error, 2 on an I/O error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::precoders::PrecoderKind;
use crate::sim::{
    emit_results, results_csv, run_scenario, run_time_sweep, timing_csv, OutputFormat, ScenarioConfig, SimError,
    TimeSweepConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "onebit-sim", about = "One-bit CI precoding simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte-Carlo BER versus SNR
    Ber(BerArgs),
    /// Precoding time versus number of users
    Time(TimeArgs),
    /// Run the self-check suite on small instances
    Verify {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct BerArgs {
    /// Number of users K
    #[arg(long)]
    users: Option<usize>,
    /// Number of transmit antennas N_t
    #[arg(long)]
    antennas: Option<usize>,
    /// PSK order M (4, 8, 16 or 32)
    #[arg(long)]
    psk: Option<usize>,
    /// Comma-separated SNR grid in dB
    #[arg(long)]
    snr: Option<String>,
    /// Symbol slots per channel realization
    #[arg(long)]
    block: Option<usize>,
    /// Number of channel realizations
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated precoder names
    #[arg(long)]
    precoders: Option<String>,
    /// Output file; results go to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json (default: from the output extension, else csv)
    #[arg(long)]
    format: Option<String>,
    /// key=value file whose entries override the flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report zero CPU time so output is byte-reproducible
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Args)]
struct TimeArgs {
    /// Comma-separated list of user counts
    #[arg(long, default_value = "2,4,8,16")]
    users: String,
    #[arg(long, default_value_t = 64)]
    antennas: usize,
    #[arg(long, default_value_t = 8)]
    psk: usize,
    #[arg(long, default_value_t = 20.0)]
    snr: f64,
    #[arg(long, default_value_t = 1)]
    block: usize,
    #[arg(long, default_value_t = 20)]
    channels: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value = "nl1p,msm,greedy,zf1bit")]
    precoders: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Io(String),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<T>().map_err(|e| CliError::Config(format!("bad {what} '{}': {e}", t.trim()))))
        .collect()
}

fn parse_value<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    s.trim().parse::<T>().map_err(|e| CliError::Config(format!("bad {what} '{}': {e}", s.trim())))
}

/// Applies a flat `key=value` file on top of the flag values.
fn apply_config_file(args: &mut BerArgs, path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("{}:{}: expected key=value", path.display(), lineno + 1)))?;
        let value = value.trim().to_string();
        match key.trim() {
            "users" => args.users = Some(parse_value(&value, "users")?),
            "antennas" => args.antennas = Some(parse_value(&value, "antennas")?),
            "psk" => args.psk = Some(parse_value(&value, "psk")?),
            "snr" => args.snr = Some(value),
            "block" => args.block = Some(parse_value(&value, "block")?),
            "channels" => args.channels = Some(parse_value(&value, "channels")?),
            "seed" => args.seed = Some(parse_value(&value, "seed")?),
            "precoders" => args.precoders = Some(value),
            "out" => args.out = Some(PathBuf::from(value)),
            "format" => args.format = Some(value),
            "timing" => args.no_timing = !parse_value::<bool>(&value, "timing")?,
            other => {
                return Err(CliError::Config(format!(
                    "{}:{}: unknown key '{other}'",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok(())
}

fn scenario_from(args: &BerArgs) -> Result<ScenarioConfig, CliError> {
    let d = ScenarioConfig::default();
    let precoders = match &args.precoders {
        Some(p) => parse_list::<PrecoderKind>(p, "precoder")?,
        None => d.precoders,
    };
    let snr_grid_db = match &args.snr {
        Some(s) => parse_list::<f64>(s, "snr")?,
        None => d.snr_grid_db,
    };
    let config = ScenarioConfig {
        k_users: args.users.unwrap_or(d.k_users),
        n_antennas: args.antennas.unwrap_or(d.n_antennas),
        psk_order: args.psk.unwrap_or(d.psk_order),
        snr_grid_db,
        block_length: args.block.unwrap_or(d.block_length),
        n_channels: args.channels.unwrap_or(d.n_channels),
        seed: args.seed.unwrap_or(d.seed),
        precoders,
        output_path: args.out.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        record_timing: !args.no_timing,
    };
    config.validate()?;
    Ok(config)
}

fn output_format(explicit: Option<&str>, out: Option<&Path>) -> Result<OutputFormat, CliError> {
    match explicit {
        Some(f) => f.parse().map_err(CliError::Config),
        None => Ok(match out.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => OutputFormat::Json,
            _ => OutputFormat::Csv,
        }),
    }
}

fn run_ber(mut args: BerArgs) -> Result<(), CliError> {
    if let Some(path) = args.config.clone() {
        apply_config_file(&mut args, &path)?;
    }
    let config = scenario_from(&args)?;
    let format = output_format(args.format.as_deref(), args.out.as_deref())?;
    let result = run_scenario(&config)?;
    for f in &result.failures {
        eprintln!("warning: {} failed on channel {} slot {}: {}", f.precoder, f.channel, f.slot, f.message);
    }
    match &args.out {
        Some(path) => emit_results(&result, path, format)?,
        None => match format {
            OutputFormat::Csv => print!("{}", results_csv(&result)),
            OutputFormat::Json => println!("{}", crate::sim::results_json(&result)?),
        },
    }
    Ok(())
}

fn run_time(args: TimeArgs) -> Result<(), CliError> {
    let config = TimeSweepConfig {
        users: parse_list(&args.users, "users")?,
        n_antennas: args.antennas,
        psk_order: args.psk,
        snr_db: args.snr,
        block_length: args.block,
        n_channels: args.channels,
        seed: args.seed,
        precoders: parse_list(&args.precoders, "precoder")?,
    };
    let rows = run_time_sweep(&config)?;
    let body = timing_csv(&rows);
    match &args.out {
        Some(path) => std::fs::write(path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => print!("{body}"),
    }
    Ok(())
}

fn run_verify(seed: u64) -> i32 {
    let outcomes = crate::verify::run_all(seed);
    let mut all = true;
    for o in &outcomes {
        println!("{} {:<28} {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        all &= o.passed;
    }
    if all {
        EXIT_OK
    } else {
        EXIT_CONFIG
    }
}

/// Parses `args` (including the program name) and runs the selected command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Ber(a) => run_ber(a),
        Command::Time(a) => run_time(a),
        Command::Verify { seed } => return run_verify(seed),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(CliError::Config(m)) => {
            eprintln!("error: {m}");
            EXIT_CONFIG
        }
        Err(CliError::Io(m)) => {
            eprintln!("error: {m}");
            EXIT_IO
        }
    }
}
