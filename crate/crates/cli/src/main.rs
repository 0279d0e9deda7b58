//! Command-line front end for the link simulator: single experiments,
//! parameter sweeps, and the closed-form model, with CSV emission.
//!
//! Sweeps write one row per point in value order (points may execute in
//! parallel) and are byte-identical across runs with the same seed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;

use entlink::analytic;
use entlink::framing::{FlagConfig, FlagMode, Stuffing};
use entlink::traffic::{run_experiment, ExperimentConfig, ExperimentResult};

const CSV_HEADER: &str = "B,E,D,L,mode,data_payload_qubits,data_bits_delivered,measured_C,\
                          analytic_C,total_transmissions,epr_pairs_generated,epr_pairs_consumed";
const ANALYTIC_CSV_HEADER: &str = "B,E,D,L,analytic_C,burst_transmissions";

#[derive(Parser)]
#[command(
    name = "entlink",
    version,
    about = "Simulator of an entanglement-assisted quantum link layer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print a summary.
    Run(RunArgs),
    /// Run a one-parameter sweep and write a CSV.
    Sweep(SweepArgs),
    /// Evaluate the closed-form model instead of simulating.
    Analytic(AnalyticArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    /// Flag bits share the payload's pair-if-available encoding.
    Uniform,
    /// Flag is basis-encoded; receivers learn payload lengths out of band.
    Oracle,
}

impl From<ModeArg> for FlagMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Uniform => FlagMode::InBandUniform,
            ModeArg::Oracle => FlagMode::OracleDelimited,
        }
    }
}

fn mode_name(mode: FlagMode) -> &'static str {
    match mode {
        FlagMode::InBandUniform => "uniform",
        FlagMode::OracleDelimited => "oracle",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum StuffingArg {
    /// Reject payloads containing the flag byte.
    Strict,
    /// Escape flag bytes for full transparency.
    Stuffed,
}

impl From<StuffingArg> for Stuffing {
    fn from(s: StuffingArg) -> Self {
        match s {
            StuffingArg::Strict => Stuffing::Strict,
            StuffingArg::Stuffed => Stuffing::ByteStuffed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
enum ParamArg {
    #[value(name = "E", alias = "e")]
    #[serde(rename = "E", alias = "e")]
    E,
    #[value(name = "L", alias = "l")]
    #[serde(rename = "L", alias = "l")]
    L,
    #[value(name = "B", alias = "b")]
    #[serde(rename = "B", alias = "b")]
    B,
}

/// Experiment parameters shared by all subcommands. Every flag is optional;
/// unset flags fall back to the `--config` file, then to defaults.
#[derive(Args, Clone)]
struct ExperimentArgs {
    /// Packets per burst (B).
    #[arg(long, value_name = "N")]
    burst_packets: Option<usize>,
    /// Bits per packet (D); must be a multiple of 8.
    #[arg(long, value_name = "BITS")]
    packet_bits: Option<usize>,
    /// EPR-frame opportunities per idle period (E).
    #[arg(long, value_name = "N")]
    epr_frames: Option<usize>,
    /// EPR pairs per EPR frame (L).
    #[arg(long, value_name = "PAIRS")]
    epr_frame_len: Option<usize>,
    /// Idle+burst cycles per run.
    #[arg(long, value_name = "N")]
    cycles: Option<usize>,
    /// Leading cycles excluded from the measurement.
    #[arg(long, value_name = "N")]
    warmup: Option<usize>,
    /// End-of-frame discipline.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Flag-byte transparency.
    #[arg(long, value_enum)]
    stuffing: Option<StuffingArg>,
    /// Entanglement buffer capacity in pairs; unbounded when omitted.
    #[arg(long, value_name = "PAIRS")]
    capacity: Option<usize>,
    /// Seed for packet contents and quantum measurements.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// JSON config file mirroring these flag names; explicit flags win.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// CSV output path.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SweepFlags {
    /// Parameter to sweep.
    #[arg(long, value_enum, value_name = "PARAM")]
    sweep_param: Option<ParamArg>,
    /// Comma-separated values for the swept parameter.
    #[arg(long, value_delimiter = ',', value_name = "V1,V2,...")]
    values: Option<Vec<usize>>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[command(flatten)]
    sweep: SweepFlags,
    /// Append rows to the output CSV instead of rewriting it.
    #[arg(long)]
    append: bool,
}

#[derive(Args)]
struct AnalyticArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[command(flatten)]
    sweep: SweepFlags,
}

/// Flag-file-default merge of everything a subcommand may need.
#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    burst_packets: Option<usize>,
    packet_bits: Option<usize>,
    epr_frames: Option<usize>,
    epr_frame_len: Option<usize>,
    cycles: Option<usize>,
    warmup: Option<usize>,
    mode: Option<ModeArg>,
    stuffing: Option<StuffingArg>,
    capacity: Option<usize>,
    seed: Option<u64>,
    sweep_param: Option<ParamArg>,
    values: Option<Vec<usize>>,
    out: Option<PathBuf>,
}

struct Resolved {
    cfg: ExperimentConfig,
    out: Option<PathBuf>,
    sweep_param: Option<ParamArg>,
    values: Option<Vec<usize>>,
}

fn resolve(args: &ExperimentArgs, sweep: Option<&SweepFlags>) -> Result<Resolved> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config file {}", path.display()))?
        }
        None => FileConfig::default(),
    };
    let defaults = ExperimentConfig::default();
    let mode = args
        .mode
        .or(file.mode)
        .map(FlagMode::from)
        .unwrap_or(defaults.flag.mode);
    let stuffing = args
        .stuffing
        .or(file.stuffing)
        .map(Stuffing::from)
        .unwrap_or(defaults.flag.stuffing);
    let cfg = ExperimentConfig {
        burst_packets: args
            .burst_packets
            .or(file.burst_packets)
            .unwrap_or(defaults.burst_packets),
        packet_bits: args
            .packet_bits
            .or(file.packet_bits)
            .unwrap_or(defaults.packet_bits),
        epr_frames: args
            .epr_frames
            .or(file.epr_frames)
            .unwrap_or(defaults.epr_frames),
        epr_frame_len: args
            .epr_frame_len
            .or(file.epr_frame_len)
            .unwrap_or(defaults.epr_frame_len),
        cycles: args.cycles.or(file.cycles).unwrap_or(defaults.cycles),
        warmup_cycles: args
            .warmup
            .or(file.warmup)
            .unwrap_or(defaults.warmup_cycles),
        flag: FlagConfig {
            mode,
            stuffing,
            ..FlagConfig::default()
        },
        capacity: args.capacity.or(file.capacity),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
    };
    cfg.validate()?;
    Ok(Resolved {
        cfg,
        out: args.out.clone().or(file.out),
        sweep_param: sweep.and_then(|s| s.sweep_param).or(file.sweep_param),
        values: sweep.and_then(|s| s.values.clone()).or(file.values),
    })
}

fn apply_param(mut cfg: ExperimentConfig, param: ParamArg, value: usize) -> ExperimentConfig {
    match param {
        ParamArg::E => cfg.epr_frames = value,
        ParamArg::L => cfg.epr_frame_len = value,
        ParamArg::B => cfg.burst_packets = value,
    }
    cfg
}

fn csv_row(cfg: &ExperimentConfig, result: &ExperimentResult) -> String {
    let agg = &result.aggregate;
    format!(
        "{},{},{},{},{},{},{},{:.9},{:.9},{},{},{}",
        cfg.burst_packets,
        cfg.epr_frames,
        cfg.packet_bits,
        cfg.epr_frame_len,
        mode_name(cfg.flag.mode),
        agg.data_payload_qubits,
        agg.data_bits_delivered,
        result.measured_bits_per_data_qubit,
        result.analytic_bits_per_transmission,
        agg.total_transmissions(),
        agg.epr_pairs_generated,
        agg.epr_pairs_consumed
    )
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::with_capacity(header.len() + 1 + rows.iter().map(|r| r.len() + 1).sum::<usize>());
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Append rows, creating the file with a header first if needed.
fn append_csv_rows(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let needs_header = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    if needs_header {
        writeln!(file, "{header}")?;
    }
    for row in rows {
        writeln!(file, "{row}")?;
    }
    Ok(())
}

fn print_summary(cfg: &ExperimentConfig, result: &ExperimentResult) {
    let capacity = cfg
        .capacity
        .map_or_else(|| "unbounded".to_string(), |c| c.to_string());
    println!(
        "B={} E={} D={} L={} mode={} stuffing={} capacity={} cycles={} warmup={} seed={}",
        cfg.burst_packets,
        cfg.epr_frames,
        cfg.packet_bits,
        cfg.epr_frame_len,
        mode_name(cfg.flag.mode),
        match cfg.flag.stuffing {
            Stuffing::Strict => "strict",
            Stuffing::ByteStuffed => "stuffed",
        },
        capacity,
        cfg.cycles,
        cfg.warmup_cycles,
        cfg.seed,
    );
    let agg = &result.aggregate;
    println!(
        "measured bits per data qubit    {:.9}",
        result.measured_bits_per_data_qubit
    );
    println!(
        "analytic bits per transmission  {:.9}",
        result.analytic_bits_per_transmission
    );
    println!(
        "deviation (analytic - measured) {:.9}",
        result.analytic_bits_per_transmission - result.measured_bits_per_data_qubit
    );
    println!(
        "measured cycles: {} data frames, {} EPR frames, {} bits delivered",
        agg.data_frames, agg.epr_frames, agg.data_bits_delivered
    );
    println!(
        "qubits sent: header {}, data payload {}, flag {}, EPR payload {} (total {})",
        agg.header_qubits,
        agg.data_payload_qubits,
        agg.flag_qubits,
        agg.epr_payload_qubits,
        agg.total_transmissions()
    );
    println!(
        "EPR pairs: generated {}, consumed {}, final buffer {}",
        agg.epr_pairs_generated, agg.epr_pairs_consumed, result.final_buffer_occupancy
    );
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let resolved = resolve(&args.experiment, None)?;
    let result = run_experiment(&resolved.cfg)?;
    print_summary(&resolved.cfg, &result);
    if let Some(path) = &resolved.out {
        append_csv_rows(path, CSV_HEADER, &[csv_row(&resolved.cfg, &result)])?;
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let resolved = resolve(&args.experiment, Some(&args.sweep))?;
    let Some(param) = resolved.sweep_param else {
        bail!("sweep requires --sweep-param (or sweep_param in the config file)");
    };
    let Some(values) = resolved.values else {
        bail!("sweep requires --values (or values in the config file)");
    };
    let Some(out) = resolved.out else {
        bail!("sweep requires --out (or out in the config file)");
    };

    let points: Vec<ExperimentConfig> = values
        .iter()
        .map(|&v| apply_param(resolved.cfg, param, v))
        .collect();
    let rows = points
        .par_iter()
        .map(|cfg| {
            let result = run_experiment(cfg)?;
            Ok(csv_row(cfg, &result))
        })
        .collect::<Result<Vec<String>>>()?;
    if args.append {
        append_csv_rows(&out, CSV_HEADER, &rows)?;
    } else {
        write_csv(&out, CSV_HEADER, &rows)?;
    }
    println!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

fn cmd_analytic(args: &AnalyticArgs) -> Result<()> {
    let resolved = resolve(&args.experiment, Some(&args.sweep))?;
    let base = resolved.cfg;
    let analytic_row = |cfg: &ExperimentConfig| {
        let p = analytic::evaluate(
            cfg.burst_packets as u64,
            cfg.epr_frames as u64,
            cfg.packet_bits as u64,
            cfg.epr_frame_len as u64,
        );
        format!(
            "{},{},{},{},{:.9},{}",
            cfg.burst_packets,
            cfg.epr_frames,
            cfg.packet_bits,
            cfg.epr_frame_len,
            p.bits_per_transmission,
            p.transmissions
        )
    };

    match (resolved.sweep_param, &resolved.values) {
        (Some(param), Some(values)) => {
            let Some(out) = resolved.out else {
                bail!("an analytic sweep requires --out (or out in the config file)");
            };
            let rows: Vec<String> = values
                .iter()
                .map(|&v| analytic_row(&apply_param(base, param, v)))
                .collect();
            write_csv(&out, ANALYTIC_CSV_HEADER, &rows)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        _ => {
            let p = analytic::evaluate(
                base.burst_packets as u64,
                base.epr_frames as u64,
                base.packet_bits as u64,
                base.epr_frame_len as u64,
            );
            println!(
                "C(B={}, E={}, D={}, L={}) = {:.9}",
                base.burst_packets, base.epr_frames, base.packet_bits, base.epr_frame_len,
                p.bits_per_transmission
            );
            println!("burst transmissions = {}", p.transmissions);
            if let Some(out) = resolved.out {
                write_csv(&out, ANALYTIC_CSV_HEADER, &[analytic_row(&base)])?;
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Analytic(args) => cmd_analytic(args),
    }
}
