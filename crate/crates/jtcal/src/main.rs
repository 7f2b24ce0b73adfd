//! Command-line front end: calibration experiments, parameter sweeps,
//! and link-gain tables, all emitted as CSV.
//!
//! Every scenario flag is optional; unset values fall back to the
//! defaults, and a `--config` file (flat `key=value`, keys named like
//! the long flags) sits between the defaults and the flags.
//!
//! Exit codes: 0 on success, 2 for configuration or usage errors, 3 for
//! runtime failures.

use clap::{Args, Parser, Subcommand};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use jtcal::channel::FadingProfile;
use jtcal::codebook::{CodebookFamily, CombineMode};
use jtcal::harness::config::{parse_f64_flex, parse_list, parse_phase, FileConfig};
use jtcal::harness::csv_out::{write_calibrate_csv, write_linkgain_csv, write_sweep_csv};
use jtcal::harness::{run_experiment, run_sweep, Scenario, SweepAxis};
use jtcal::link_eval::{evaluate_residual_sweep, LinkChannel, LinkSweepConfig};
use jtcal::rf_error::wrap_phase;
use jtcal::{Error, Result};

#[derive(Parser)]
#[command(
    name = "jtcal",
    version,
    about = "Inter-cell phase calibration experiments for TDD joint transmission"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one calibration experiment and emit per-round rows plus a
    /// summary trailer.
    Calibrate(CalibrateArgs),
    /// Re-run the experiment along one swept parameter, emitting summary
    /// trailers per value.
    Sweep(SweepArgs),
    /// Tabulate received-power loss versus residual phase error.
    Linkgain(LinkgainArgs),
}

/// Scenario overrides shared by `calibrate` and `sweep`. Every field is
/// optional so the precedence chain stays visible: defaults, then config
/// file, then flags.
#[derive(Args, Default, Clone)]
struct ScenarioArgs {
    /// Physical transmit antennas per cell
    #[arg(long)]
    antennas: Option<usize>,
    /// UE receive antennas
    #[arg(long)]
    rx: Option<usize>,
    /// Fading profile: flat | epa
    #[arg(long)]
    fading: Option<String>,
    /// Subcarriers carrying reference signals
    #[arg(long)]
    subcarriers: Option<usize>,
    /// Maximum Doppler shift in Hz
    #[arg(long)]
    doppler: Option<f64>,
    /// Port combining at the UE: sum | concat
    #[arg(long)]
    combine: Option<String>,
    /// Reference-signal ports per cell
    #[arg(long)]
    ports: Option<usize>,
    /// Codebook family: rel8 | dft
    #[arg(long)]
    codebook: Option<String>,
    /// Report-side SNR in dB (inf for noiseless)
    #[arg(long)]
    snr: Option<String>,
    /// Sounding-side SNR in dB (defaults to --snr)
    #[arg(long)]
    srs_snr: Option<String>,
    /// True inter-cell phase (radians or 'k/8pi' style)
    #[arg(long)]
    phase: Option<String>,
    /// True inter-cell amplitude ratio
    #[arg(long)]
    true_amp: Option<f64>,
    /// Feedback rounds per run
    #[arg(long)]
    frames: Option<usize>,
    /// Candidate phases on the hypothesis grid
    #[arg(long)]
    hypotheses: Option<usize>,
    /// Monte Carlo runs
    #[arg(long)]
    runs: Option<usize>,
    /// Base seed; run k uses base + k
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Config file with key=value lines (keys named like the flags)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Emit only the summary trailer rows
    #[arg(long)]
    summary: bool,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Config file with key=value lines (keys named like the flags)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Swept parameter: period | snr | ports | phase
    #[arg(long)]
    axis: String,
    /// Comma-separated values for the axis (phase axis accepts 'k/8pi')
    #[arg(long)]
    values: String,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LinkgainArgs {
    /// Fading for the link table: rayleigh | unit
    #[arg(long, default_value = "rayleigh")]
    channel: String,
    /// Transmit antennas per cell (rayleigh channel)
    #[arg(long, default_value_t = 4)]
    antennas: usize,
    /// Channel draws per table row
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated residual phase errors (radians or 'k/8pi')
    #[arg(long)]
    phases: Option<String>,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_fading(s: &str) -> Result<FadingProfile> {
    match s {
        "flat" => Ok(FadingProfile::FlatRayleigh),
        "epa" => Ok(FadingProfile::EpaTapped),
        other => Err(Error::BadValue(format!(
            "unknown fading '{other}' (expected flat or epa)"
        ))),
    }
}

fn parse_combine(s: &str) -> Result<CombineMode> {
    match s {
        "sum" | "summed" => Ok(CombineMode::SummedPorts),
        "concat" => Ok(CombineMode::ConcatenatedPorts),
        other => Err(Error::BadValue(format!(
            "unknown combine mode '{other}' (expected sum or concat)"
        ))),
    }
}

fn parse_codebook(s: &str) -> Result<CodebookFamily> {
    match s {
        "rel8" => Ok(CodebookFamily::Rel8),
        "dft" => Ok(CodebookFamily::Dft),
        other => Err(Error::BadValue(format!(
            "unknown codebook '{other}' (expected rel8 or dft)"
        ))),
    }
}

fn apply_overrides(sc: &mut Scenario, o: &ScenarioArgs) -> Result<()> {
    if let Some(v) = o.antennas {
        sc.channel.n_tx_per_cell = v;
    }
    if let Some(v) = o.rx {
        sc.channel.n_rx_ue = v;
    }
    if let Some(v) = &o.fading {
        sc.channel.fading = parse_fading(v)?;
    }
    if let Some(v) = o.subcarriers {
        sc.channel.n_subcarriers = v;
    }
    if let Some(v) = o.doppler {
        sc.channel.doppler_hz = v;
    }
    if let Some(v) = &o.combine {
        sc.combine_mode = parse_combine(v)?;
    }
    if let Some(v) = o.ports {
        sc.ports_per_cell = v;
    }
    if let Some(v) = &o.codebook {
        sc.codebook = parse_codebook(v)?;
    }
    if let Some(v) = &o.snr {
        sc.snr_db = parse_f64_flex(v)?;
    }
    if let Some(v) = &o.srs_snr {
        sc.srs_snr_db = Some(parse_f64_flex(v)?);
    }
    if let Some(v) = &o.phase {
        sc.delta_phase_true = wrap_phase(parse_phase(v)?);
    }
    if let Some(v) = o.true_amp {
        sc.delta_amp_true = v;
    }
    if let Some(v) = o.frames {
        sc.period_frames = v;
    }
    if let Some(v) = o.hypotheses {
        sc.n_hypotheses = v;
    }
    if let Some(v) = o.runs {
        sc.n_runs = v;
    }
    if let Some(v) = o.seed {
        sc.base_seed = v;
    }
    Ok(())
}

fn parse_count(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::BadValue(format!("invalid {key} '{v}'")))
}

/// Lifts a config file into the same override structure the flags use.
fn overrides_from_config(cfg: &FileConfig) -> Result<ScenarioArgs> {
    let mut o = ScenarioArgs::default();
    for key in cfg.keys() {
        let v = cfg.get(key).expect("listed key");
        match key {
            "antennas" => o.antennas = Some(parse_count(key, v)?),
            "rx" => o.rx = Some(parse_count(key, v)?),
            "fading" => o.fading = Some(v.to_string()),
            "subcarriers" => o.subcarriers = Some(parse_count(key, v)?),
            "doppler" => o.doppler = Some(parse_f64_flex(v)?),
            "combine" => o.combine = Some(v.to_string()),
            "ports" => o.ports = Some(parse_count(key, v)?),
            "codebook" => o.codebook = Some(v.to_string()),
            "snr" => o.snr = Some(v.to_string()),
            "srs-snr" => o.srs_snr = Some(v.to_string()),
            "phase" => o.phase = Some(v.to_string()),
            "true-amp" => o.true_amp = Some(parse_f64_flex(v)?),
            "frames" => o.frames = Some(parse_count(key, v)?),
            "hypotheses" => o.hypotheses = Some(parse_count(key, v)?),
            "runs" => o.runs = Some(parse_count(key, v)?),
            "seed" => {
                o.seed = Some(
                    v.parse()
                        .map_err(|_| Error::BadValue(format!("invalid seed '{v}'")))?,
                )
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown config key '{other}'"
                )))
            }
        }
    }
    Ok(o)
}

/// Defaults, then config file, then flags.
fn resolve_scenario(config: &Option<PathBuf>, flags: &ScenarioArgs) -> Result<Scenario> {
    let mut sc = Scenario::default();
    if let Some(path) = config {
        let cfg = FileConfig::load(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        apply_overrides(&mut sc, &overrides_from_config(&cfg)?)?;
    }
    apply_overrides(&mut sc, flags)?;
    sc.validate()?;
    Ok(sc)
}

fn open_output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<()> {
    let sc = resolve_scenario(&args.config, &args.scenario)?;
    let result = run_experiment(&sc)?;
    let mut out = open_output(&args.out)?;
    write_calibrate_csv(&mut out, &sc, &result, args.summary)?;
    out.flush()?;
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let sc = resolve_scenario(&args.config, &args.scenario)?;
    let axis: SweepAxis = args.axis.parse()?;
    let values = match axis {
        SweepAxis::TruePhase => parse_list(&args.values, parse_phase)?,
        _ => parse_list(&args.values, parse_f64_flex)?,
    };
    let points = run_sweep(&sc, axis, &values)?;
    let mut out = open_output(&args.out)?;
    write_sweep_csv(&mut out, &sc, axis, &points)?;
    out.flush()?;
    Ok(())
}

fn cmd_linkgain(args: &LinkgainArgs) -> Result<()> {
    let channel = match args.channel.as_str() {
        "rayleigh" => {
            if args.antennas == 0 || args.antennas > 64 {
                return Err(Error::BadValue("antennas must be between 1 and 64".into()));
            }
            LinkChannel::Rayleigh {
                n_tx: args.antennas,
            }
        }
        "unit" => LinkChannel::UnitScalar,
        other => {
            return Err(Error::BadValue(format!(
                "unknown channel '{other}' (expected rayleigh or unit)"
            )))
        }
    };
    let phases = match &args.phases {
        Some(list) => parse_list(list, parse_phase)?,
        None => (0..=8)
            .map(|k| k as f64 * std::f64::consts::PI / 8.0)
            .collect(),
    };
    let cfg = LinkSweepConfig {
        channel,
        n_draws: args.draws,
        seed: args.seed,
    };
    let rows = evaluate_residual_sweep(&cfg, &phases)?;
    let mut out = open_output(&args.out)?;
    write_linkgain_csv(&mut out, &rows)?;
    out.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Linkgain(args) => cmd_linkgain(args),
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_)
        | Error::BadValue(_)
        | Error::UnsupportedCodebook { .. }
        | Error::ZeroGain { .. }
        | Error::NonUniformReciprocity { .. } => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // Usage errors exit 2; --help/--version print and exit 0.
        Err(err) => err.exit(),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
