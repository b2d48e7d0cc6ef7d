use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cqed::config::RunConfig;
use cqed::manifest::build_time;
use cqed::pipeline::{self, RunContext, RunOutcome};
use cqed::Error;

/// Cavity QED transit twin: steady-state tables, atom drops, heterodyne
/// traces and transit-phasor analysis.
#[derive(Debug, Parser)]
#[command(name = "cqed", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Root directory for `runs/`.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Replace an existing run directory.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Steady-state field, force and diffusion tables.
    Tables,
    /// Atom drops and their heterodyne traces.
    Simulate,
    /// Detect transits and compare phasors with theory.
    Analyze {
        /// Trace files or directories holding them.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Curve separation, yield and SNR over the [sweep] grid.
    Sweep,
    /// Calibration arithmetic and an empty-cavity S²/N check.
    Calibrate,
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParams(_) | Error::HashMismatch { .. } | Error::Exists(_) => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    }
}

fn report(outcome: &RunOutcome) -> u8 {
    println!("run: {}", outcome.dir.display());
    for a in &outcome.manifest.artifacts {
        println!("  {}  {}", &a.sha256[..16], a.path);
    }
    if outcome.partial() {
        eprintln!("{} of {} items failed", outcome.failures, outcome.total);
        EXIT_PARTIAL
    } else {
        0
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let path = cli.config.ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let ctx = RunContext { out: cli.out, force: cli.force, created: build_time()? };
    let code = match cli.command {
        Command::Tables => report(&pipeline::cmd_tables(&cfg, &ctx)?),
        Command::Simulate => report(&pipeline::cmd_simulate(&cfg, &ctx)?),
        Command::Analyze { traces } => {
            let outcome = pipeline::cmd_analyze(&cfg, &traces, &ctx)?;
            let code = report(&outcome);
            print!("{}", std::fs::read_to_string(outcome.dir.join("report.txt"))?);
            code
        }
        Command::Sweep => {
            let (outcome, rows) = pipeline::cmd_sweep(&cfg, &ctx)?;
            let code = report(&outcome);
            for r in rows {
                let sep = r.endpoint_separation.map_or("-".into(), |v| format!("{v:.4}"));
                let y = r.transit_yield().map_or("-".into(), |v| format!("{v:.2}"));
                println!("  Δ/2π = {:>6} MHz  m = {:>5}  separation {sep}  yield {y}", r.delta_mhz, r.m_empty);
            }
            code
        }
        Command::Calibrate => {
            let (outcome, r) = pipeline::cmd_calibrate(&cfg, &ctx)?;
            let code = report(&outcome);
            println!("  imbalance efficiency {:.3}", r.imbalance_efficiency);
            println!("  m0 {:.4} ({}), {:.4} (pi)", r.saturation_photon_number, r.coupling, r.saturation_photon_number_pi);
            println!("  S²/N {:.2} measured, {:.2} expected", r.snr_measured, r.snr_expected);
            println!("  sensitivity {:.2e} /√Hz, S_g {:.2} kHz/√Hz", r.sensitivity.fractional, r.sensitivity.s_g_khz);
            code
        }
    };
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
