//! Command orchestration: tables, simulate, analyze, sweep and calibrate.
//!
//! Each command writes into `<out>/runs/<timestamp>-<confighash>-<command>/`
//! and finishes by writing `manifest.json` there. Output paths are unique per
//! drop, trace or cell, so parallel workers never share a file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use time::OffsetDateTime;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::heterodyne::{
    calibrate_photon_number, decode_trace, default_scale, encode_trace, heterodyne_snr, imbalance_efficiency,
    lo_excess_noise_fit, synthesize, window_snr, FieldRecord, LoNoiseFit, QuadratureTrace,
};
use crate::manifest::{compact_timestamp, FileEntry, RunManifest, StreamSeed};
use crate::params::{cooperativity, mhz, saturation_photon_number, PhysicalParams, G0_PI_MHZ};
use crate::phasor::{
    detect_transits, discriminate, estimate_lo_phase, phasor_points, rotate_quadratures, sensitivity_report,
    theory_curves, Discrimination, PhasorSet, SensitivityReport, TransitEvent,
};
use crate::rng::{derive_seed, STAGE_HETERODYNE, STAGE_TRANSIT};
use crate::tables::{build_tables, SteadyTables};
use crate::transit::{run_transit, TableField, TransitConfig};

pub const TRACE_EXT: &str = "cqtr";
const STAGE_SWEEP: &str = "sweep";
const STAGE_CALIBRATE: &str = "calibrate";
/// Baseline kept ahead of each event in the time-series CSVs (s).
const PLOT_LEAD: f64 = 0.5e-3;

/// Where and how a command writes.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out: PathBuf,
    pub force: bool,
    pub created: OffsetDateTime,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    /// Work items (drops, traces, cells) that failed.
    pub failures: usize,
    pub total: usize,
}

impl RunOutcome {
    pub fn partial(&self) -> bool {
        self.failures > 0
    }
}

struct Outputs {
    dir: PathBuf,
    files: Mutex<Vec<FileEntry>>,
}

impl Outputs {
    fn create(ctx: &RunContext, command: &str, cfg: &RunConfig) -> Result<Self> {
        let name = format!("{}-{}-{command}", compact_timestamp(ctx.created), cfg.hash());
        let dir = ctx.out.join("runs").join(name);
        if dir.exists() {
            if !ctx.force {
                return Err(Error::Exists(dir));
            }
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        Ok(Outputs { dir, files: Mutex::new(Vec::new()) })
    }

    fn put(&self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.files.lock().expect("output list lock").push(FileEntry::from_bytes(rel, bytes));
        Ok(())
    }

    fn finish(self, mut manifest: RunManifest, failures: usize, total: usize) -> Result<RunOutcome> {
        manifest.artifacts = self.files.into_inner().expect("output list lock");
        manifest.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        manifest.write(&self.dir)?;
        Ok(RunOutcome { dir: self.dir, manifest, failures, total })
    }
}

fn ndjson<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, &r)?;
        out.push(b'\n');
    }
    Ok(out)
}

fn cell_params(base: &PhysicalParams, delta_mhz: f64, m: f64) -> PhysicalParams {
    base.clone().with_delta_mhz(delta_mhz).with_m_empty(m)
}

fn cell_name(delta_mhz: f64, m: f64) -> String {
    format!("delta{delta_mhz}_m{m}")
}

/// Steady-state tables, one file per (Δ, m) cell of the sweep grid or a single
/// `tables.csv` without one.
pub fn cmd_tables(cfg: &RunConfig, ctx: &RunContext) -> Result<RunOutcome> {
    cfg.validate()?;
    let base = cfg.physical();
    let opts = cfg.tables.options();
    let cells: Vec<(String, PhysicalParams)> = match &cfg.sweep {
        Some(s) => s
            .cells()
            .into_iter()
            .map(|(d, m)| (format!("tables/{}.csv", cell_name(d, m)), cell_params(&base, d, m)))
            .collect(),
        None => vec![("tables.csv".into(), base.clone())],
    };
    let out = Outputs::create(ctx, "tables", cfg)?;
    let mut manifest = RunManifest::new("tables", cfg, ctx.created);
    let mut failures = 0;
    let mut first_error = None;
    for (name, p) in &cells {
        match build_tables(p, &opts) {
            Ok(t) => out.put(name, t.to_csv_string().as_bytes())?,
            Err(e) => {
                log::error!("{name}: {e}");
                manifest.warnings.push(format!("{name}: {e}"));
                failures += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if failures == cells.len() {
        return Err(first_error.expect("at least one cell"));
    }
    out.finish(manifest, failures, cells.len())
}

fn load_or_build_tables(cfg: &RunConfig, p: &PhysicalParams, manifest: &mut RunManifest) -> Result<(SteadyTables, bool)> {
    match &cfg.tables.path {
        Some(path) => {
            let bytes = fs::read(path)?;
            let t = SteadyTables::read_csv_for(bytes.as_slice(), p)?;
            manifest.inputs.push(FileEntry::from_bytes(file_name(path), &bytes));
            Ok((t, false))
        }
        None => Ok((build_tables(p, &cfg.tables.options())?, true)),
    }
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

/// One drop: its transit seed, heterodyne seed and the synthesized trace.
fn simulate_drop(
    i: u64,
    tc: &TransitConfig,
    field: &TableField,
    p: &PhysicalParams,
    cfg: &RunConfig,
    master: u64,
) -> Result<(crate::transit::AtomTrajectory, QuadratureTrace)> {
    let c = TransitConfig { seed: derive_seed(master, STAGE_TRANSIT, i), ..*tc };
    let traj = run_transit(&c, field, p)?;
    let trace = synthesize(&FieldRecord::from_trajectory(&traj), p, &cfg.heterodyne, derive_seed(master, STAGE_HETERODYNE, i))?;
    Ok((traj, trace))
}

/// Drops through the mode and the photocurrent each one produces.
pub fn cmd_simulate(cfg: &RunConfig, ctx: &RunContext) -> Result<RunOutcome> {
    cfg.validate()?;
    let p = cfg.physical();
    let mut manifest = RunManifest::new("simulate", cfg, ctx.created);
    let (tables, built) = load_or_build_tables(cfg, &p, &mut manifest)?;
    let out = Outputs::create(ctx, "simulate", cfg)?;
    if built {
        out.put("tables.csv", tables.to_csv_string().as_bytes())?;
    }
    let field = TableField::new(&tables, &p)?;
    let tc = cfg.transit.transit_config(&p, cfg.seed);
    let n = cfg.transit.drops as u64;
    for i in 0..n {
        for stage in [STAGE_TRANSIT, STAGE_HETERODYNE] {
            manifest.seeds.push(StreamSeed { stage: stage.into(), index: i, seed: derive_seed(cfg.seed, stage, i) });
        }
    }
    let results: Vec<Result<()>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (traj, trace) = simulate_drop(i, &tc, &field, &p, cfg, cfg.seed)?;
            let mut buf = Vec::new();
            traj.decimated(cfg.transit.trajectory_every).write_ndjson(&mut buf)?;
            out.put(&format!("trajectories/drop_{i:04}.ndjson"), &buf)?;
            out.put(&format!("traces/drop_{i:04}.{TRACE_EXT}"), &encode_trace(&trace)?)?;
            if trace.header.clipping_warning {
                log::warn!("drop {i}: {:.2}% of samples clipped", 100.0 * trace.header.clipped_fraction);
            }
            Ok(())
        })
        .collect();
    let mut failures = 0;
    for (i, r) in results.into_iter().enumerate() {
        if let Err(e) = r {
            log::error!("drop {i}: {e}");
            manifest.warnings.push(format!("drop {i}: {e}"));
            failures += 1;
        }
    }
    if failures as u64 == n {
        return Err(Error::Rejected(format!("all {n} drops failed")));
    }
    out.finish(manifest, failures, n as usize)
}

/// Trace files named directly, or found (sorted) inside named directories.
pub fn collect_traces(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for path in inputs {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(path)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == TRACE_EXT))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(path.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::Config("no trace files given".into()));
    }
    Ok(files)
}

struct AnalyzedEvent {
    event: TransitEvent,
    sensitivity: SensitivityReport,
    phasors: Option<PhasorSet>,
}

struct AnalyzedTrace {
    name: String,
    events: Vec<AnalyzedEvent>,
}

#[derive(Serialize)]
struct EventRow<'a> {
    trace: &'a str,
    event: usize,
    start: usize,
    end: usize,
    t_start: f64,
    duration: f64,
    score: f64,
    lo_phase: f64,
    baseline_mean: f64,
    baseline_sigma: f64,
    smoothed_sigma: f64,
    snr_amp: f64,
    snr_phase: f64,
    combined_snr: f64,
    dots: usize,
}

#[derive(Serialize)]
struct DotRow<'a> {
    trace: &'a str,
    event: usize,
    radius: f64,
    angle: f64,
    x: f64,
    y: f64,
}

fn analyze_trace(name: String, bytes: &[u8], cfg: &RunConfig, p: &PhysicalParams) -> Result<AnalyzedTrace> {
    let trace = decode_trace(bytes)?;
    if trace.header.params_hash != p.hash() {
        log::warn!("{name}: written for params {}, analyzing with {}", trace.header.params_hash, p.hash());
    }
    let events = detect_transits(&trace, &cfg.detect)?
        .into_iter()
        .map(|event| {
            let sensitivity = sensitivity_report(&event, p, cfg.analysis.bandwidth);
            let phasors = match phasor_points(&event, &cfg.phasor) {
                Ok(s) => Some(s),
                Err(e) => {
                    log::warn!("{name} event {}: {e}", event.id);
                    None
                }
            };
            AnalyzedEvent { event, sensitivity, phasors }
        })
        .collect();
    Ok(AnalyzedTrace { name, events })
}

fn timeseries_csv(e: &TransitEvent, offset: f64) -> String {
    let lead = ((PLOT_LEAD * e.sample_rate) as usize).min(e.lead);
    let mut s = String::from("t_us,xa,xp,xa_display\n");
    for i in e.lead - lead..e.xa.len() {
        let t = (i as f64 - e.lead as f64) / e.sample_rate * 1e6;
        let _ = writeln!(s, "{t:.2},{:.3},{:.3},{:.3}", e.xa[i], e.xp[i], e.xa[i] + offset);
    }
    s
}

/// Events, phasors, reports and plot tables for a set of traces.
pub fn cmd_analyze(cfg: &RunConfig, inputs: &[PathBuf], ctx: &RunContext) -> Result<RunOutcome> {
    cfg.validate()?;
    let p = cfg.physical();
    let files = collect_traces(inputs)?;
    let mut manifest = RunManifest::new("analyze", cfg, ctx.created);
    let out = Outputs::create(ctx, "analyze", cfg)?;
    let results: Vec<(String, Result<(Vec<u8>, AnalyzedTrace)>)> = files
        .par_iter()
        .map(|path| {
            let name = file_name(path);
            let r = fs::read(path).map_err(Error::from).and_then(|bytes| {
                let a = analyze_trace(name.clone(), &bytes, cfg, &p)?;
                Ok((bytes, a))
            });
            (name, r)
        })
        .collect();

    let mut traces = Vec::new();
    let mut failures = 0;
    for (name, r) in results {
        match r {
            Ok((bytes, a)) => {
                manifest.inputs.push(FileEntry::from_bytes(name, &bytes));
                traces.push(a);
            }
            Err(e) => {
                log::warn!("skipping {name}: {e}");
                manifest.warnings.push(format!("{name}: {e}"));
                failures += 1;
            }
        }
    }
    if traces.is_empty() {
        return Err(Error::Rejected(format!("all {} traces failed", files.len())));
    }

    let mut event_rows = Vec::new();
    let mut dot_rows = Vec::new();
    for t in &traces {
        let stem = t.name.trim_end_matches(&format!(".{TRACE_EXT}")).to_string();
        for a in &t.events {
            let e = &a.event;
            let s = &a.sensitivity;
            event_rows.push(EventRow {
                trace: &t.name,
                event: e.id,
                start: e.start,
                end: e.end,
                t_start: e.t_start,
                duration: e.duration(),
                score: e.score,
                lo_phase: e.lo_phase,
                baseline_mean: e.baseline_mean,
                baseline_sigma: e.baseline_sigma,
                smoothed_sigma: e.smoothed_sigma,
                snr_amp: s.snr_amp,
                snr_phase: s.snr_phase,
                combined_snr: s.combined,
                dots: a.phasors.as_ref().map_or(0, |ps| ps.dots.len()),
            });
            if let Some(ps) = &a.phasors {
                for d in &ps.dots {
                    let (x, y) = d.cartesian();
                    dot_rows.push(DotRow { trace: &t.name, event: e.id, radius: d.radius, angle: d.angle, x, y });
                }
            }
            out.put(
                &format!("plots/timeseries/{stem}_e{}.csv", e.id),
                timeseries_csv(e, cfg.analysis.display_offset).as_bytes(),
            )?;
        }
    }
    out.put("events.ndjson", &ndjson(&event_rows)?)?;
    out.put("phasors.ndjson", &ndjson(&dot_rows)?)?;

    let report = comparison_report(cfg, &p, &traces, &out)?;
    let mut text = String::new();
    let _ = writeln!(text, "traces: {}", traces.len() + failures);
    let _ = writeln!(text, "failed: {failures}");
    let _ = writeln!(text, "events: {}", event_rows.len());
    let _ = writeln!(text, "coupling: {}", p.coupling_label());
    let _ = writeln!(text, "params_hash: {}", p.hash());
    text.push_str(&report);
    out.put("report.txt", text.as_bytes())?;
    out.finish(manifest, failures, files.len())
}

/// Discrimination and sensitivity sections of the report; also writes the
/// phasor overlay and theory-curve plot tables.
fn comparison_report(cfg: &RunConfig, p: &PhysicalParams, traces: &[AnalyzedTrace], out: &Outputs) -> Result<String> {
    let mut all: Vec<(&str, &AnalyzedEvent)> =
        traces.iter().flat_map(|t| t.events.iter().map(move |e| (t.name.as_str(), e))).collect();
    if all.is_empty() {
        return Ok("no events\n".into());
    }
    all.sort_by(|a, b| b.1.sensitivity.combined.total_cmp(&a.1.sensitivity.combined));
    let mut text = String::new();
    let (best_trace, best) = all[0];
    let s = &best.sensitivity;
    let _ = writeln!(text, "\n[sensitivity]");
    let _ = writeln!(text, "event: {best_trace}#{}", best.event.id);
    let _ = writeln!(text, "snr_amplitude: {:.3}", s.snr_amp);
    let _ = writeln!(text, "snr_phase: {:.3}", s.snr_phase);
    let _ = writeln!(text, "snr_combined: {:.3}", s.combined);
    let _ = writeln!(text, "bandwidth_hz: {:.0}", s.bandwidth);
    let _ = writeln!(text, "fractional_per_rthz: {:.3e}", s.fractional);
    let _ = writeln!(text, "s_g_khz_per_rthz: {:.3}", s.s_g_khz);

    let top: Vec<(&str, &AnalyzedEvent)> =
        all.iter().copied().filter(|(_, a)| a.phasors.is_some()).take(cfg.analysis.top_events).collect();
    let _ = writeln!(text, "\n[discrimination]");
    if top.is_empty() {
        let _ = writeln!(text, "result: no phasors");
        return Ok(text);
    }
    let sets: Vec<PhasorSet> = top.iter().map(|(_, a)| a.phasors.clone().expect("filtered")).collect();
    let overlay = PhasorSet::overlay(&sets)?;
    let curves = theory_curves(p, cfg.analysis.theory_points, cfg.analysis.hilbert()?)?;
    let scaled = curves.scaled(overlay.baseline_radius);

    let mut csv = String::from("rank,trace,event,x,y\n");
    for (k, (name, a)) in top.iter().enumerate() {
        for d in overlay.dots.iter().filter(|d| d.event == k) {
            let (x, y) = d.cartesian();
            let _ = writeln!(csv, "{k},{name},{},{x:.4},{y:.4}", a.event.id);
        }
    }
    out.put("plots/phasor_overlay.csv", csv.as_bytes())?;
    let mut csv = String::from("g_mhz,quantum_x,quantum_y,semiclassical_x,semiclassical_y\n");
    for ((g, q), s) in scaled.g.iter().zip(&scaled.quantum).zip(&scaled.semiclassical) {
        let _ = writeln!(csv, "{:.4},{:.4},{:.4},{:.4},{:.4}", crate::params::to_mhz(*g), q.0, q.1, s.0, s.1);
    }
    out.put("plots/theory_curves.csv", csv.as_bytes())?;

    let used: Vec<String> = top.iter().map(|(n, a)| format!("{n}#{}", a.event.id)).collect();
    let _ = writeln!(text, "events_used: {}", used.join(" "));
    let _ = writeln!(text, "endpoint_separation: {:.4}", curves.endpoint_separation());
    match discriminate(&overlay, &scaled) {
        Ok(d) => write_discrimination(&mut text, &d),
        Err(e) => {
            let _ = writeln!(text, "result: {e}");
        }
    }
    Ok(text)
}

fn write_discrimination(text: &mut String, d: &Discrimination) {
    let model = match d.preferred {
        crate::phasor::Model::Quantum => "quantum",
        crate::phasor::Model::Semiclassical => "semiclassical",
    };
    let _ = writeln!(text, "preferred: {model}");
    let _ = writeln!(text, "margin_sigma: {:.3}", d.margin);
    let _ = writeln!(text, "rms_quantum: {:.3}", d.rms_quantum);
    let _ = writeln!(text, "rms_semiclassical: {:.3}", d.rms_semiclassical);
    let _ = writeln!(text, "dots: {}", d.n_dots);
}

/// One row of the sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta_mhz: f64,
    pub m_empty: f64,
    pub endpoint_separation: Option<f64>,
    pub max_separation: Option<f64>,
    pub drops: usize,
    pub detected: usize,
    pub mean_combined_snr: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn transit_yield(&self) -> Option<f64> {
        (self.drops > 0).then(|| self.detected as f64 / self.drops as f64)
    }
}

/// Fraction of drops with at least one event, and the mean combined SNR of
/// each detecting drop's best event.
pub fn ensemble_yield(
    cfg: &RunConfig,
    p: &PhysicalParams,
    tables: &SteadyTables,
    drops: usize,
    master: u64,
) -> Result<(usize, Option<f64>)> {
    let field = TableField::new(tables, p)?;
    let tc = cfg.transit.transit_config(p, master);
    let best: Vec<Option<f64>> = (0..drops as u64)
        .into_par_iter()
        .map(|i| {
            let (_, trace) = simulate_drop(i, &tc, &field, p, cfg, master)?;
            let events = detect_transits(&trace, &cfg.detect)?;
            Ok(events
                .iter()
                .map(|e| sensitivity_report(e, p, cfg.analysis.bandwidth).combined)
                .max_by(f64::total_cmp))
        })
        .collect::<Result<_>>()?;
    let snrs: Vec<f64> = best.into_iter().flatten().collect();
    let mean = (!snrs.is_empty()).then(|| snrs.iter().sum::<f64>() / snrs.len() as f64);
    Ok((snrs.len(), mean))
}

fn sweep_cell(cfg: &RunConfig, index: usize, delta: f64, m: f64, drops: usize) -> SweepRow {
    let p = cell_params(&cfg.physical(), delta, m);
    let mut row = SweepRow {
        delta_mhz: delta,
        m_empty: m,
        endpoint_separation: None,
        max_separation: None,
        drops,
        detected: 0,
        mean_combined_snr: None,
        error: None,
    };
    let run = |row: &mut SweepRow| -> Result<()> {
        let curves = theory_curves(&p, cfg.analysis.theory_points, cfg.analysis.hilbert()?)?;
        row.endpoint_separation = Some(curves.endpoint_separation());
        row.max_separation = Some(curves.max_separation());
        if drops > 0 {
            let tables = build_tables(&p, &cfg.tables.options())?;
            let (detected, snr) = ensemble_yield(cfg, &p, &tables, drops, derive_seed(cfg.seed, STAGE_SWEEP, index as u64))?;
            row.detected = detected;
            row.mean_combined_snr = snr;
        }
        Ok(())
    };
    if let Err(e) = run(&mut row) {
        log::error!("cell Δ/2π = {delta} MHz, m = {m}: {e}");
        row.error = Some(e.to_string());
    }
    row
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Curve separation, yield and SNR over a (Δ, m) grid.
pub fn cmd_sweep(cfg: &RunConfig, ctx: &RunContext) -> Result<(RunOutcome, Vec<SweepRow>)> {
    cfg.validate()?;
    let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::Config("missing [sweep] section".into()))?;
    let mut manifest = RunManifest::new("sweep", cfg, ctx.created);
    let out = Outputs::create(ctx, "sweep", cfg)?;
    let cells = sweep.cells();
    let rows: Vec<SweepRow> =
        cells.iter().enumerate().map(|(i, &(d, m))| sweep_cell(cfg, i, d, m, sweep.drops)).collect();
    for i in 0..cells.len() as u64 {
        manifest.seeds.push(StreamSeed { stage: STAGE_SWEEP.into(), index: i, seed: derive_seed(cfg.seed, STAGE_SWEEP, i) });
    }
    let mut csv = String::from("delta_mhz,m_empty,endpoint_separation,max_separation,drops,detected,yield,mean_combined_snr,error\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.delta_mhz,
            r.m_empty,
            opt(r.endpoint_separation),
            opt(r.max_separation),
            r.drops,
            r.detected,
            opt(r.transit_yield()),
            opt(r.mean_combined_snr),
            r.error.as_deref().unwrap_or("").replace(',', ";")
        );
    }
    out.put("summary.csv", csv.as_bytes())?;
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    for r in rows.iter().filter_map(|r| r.error.as_ref()) {
        manifest.warnings.push(r.clone());
    }
    if failures == rows.len() {
        return Err(Error::Rejected(format!("all {failures} sweep cells failed")));
    }
    Ok((out.finish(manifest, failures, rows.len())?, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub coupling: String,
    pub imbalance_efficiency: f64,
    pub saturation_photon_number: f64,
    pub saturation_photon_number_pi: f64,
    pub cooperativity: f64,
    pub counts_per_sqrt_photon: f64,
    pub snr_window: f64,
    pub snr_windows: usize,
    pub snr_measured: f64,
    pub snr_expected: f64,
    /// m from S²/N assuming β = 1.
    pub photon_number_beta1: f64,
    pub photon_number_configured: f64,
    pub lo_fit: Option<LoNoiseFit>,
    pub sensitivity: SensitivityReport,
}

pub fn calibration_report(cfg: &RunConfig) -> Result<CalibrationReport> {
    cfg.validate()?;
    let p = cfg.physical();
    let c = &cfg.calibration;
    let h = &cfg.heterodyne;
    let dt = 1.0 / (h.sample_rate * h.oversample as f64);
    let n = (c.snr_duration / dt).round() as usize;
    let field = FieldRecord::constant(Complex64::new(p.m_empty.sqrt(), 0.0), dt, n);
    let trace = synthesize(&field, &p, h, derive_seed(cfg.seed, STAGE_CALIBRATE, 0))?;
    let (x1, x2) = trace.quadratures();
    let phase = estimate_lo_phase(&x1, &x2, h.sample_rate)?.phase;
    let (xa, _) = rotate_quadratures(&x1, &x2, phase);
    let window = (c.snr_window * h.sample_rate).round() as usize;
    let w = window_snr(&xa, window)?;
    let lo_fit = if c.lo_noise.is_empty() {
        None
    } else {
        Some(lo_excess_noise_fit(&c.lo_noise.iter().map(|v| (v[0], v[1])).collect::<Vec<_>>())?)
    };
    Ok(CalibrationReport {
        coupling: p.coupling_label().into(),
        imbalance_efficiency: imbalance_efficiency(c.imbalance_gain, c.imbalance_phase)?,
        saturation_photon_number: saturation_photon_number(&p, p.g0)?,
        saturation_photon_number_pi: saturation_photon_number(&p, mhz(G0_PI_MHZ))?,
        cooperativity: cooperativity(&p, p.g0)?,
        counts_per_sqrt_photon: default_scale(&p, h)?,
        snr_window: c.snr_window,
        snr_windows: w.windows,
        snr_measured: w.ratio(),
        snr_expected: heterodyne_snr(c.snr_window, p.eta, p.kappa_b, p.m_empty) / (p.beta * p.beta),
        photon_number_beta1: calibrate_photon_number(w.signal, w.noise, c.snr_window, p.eta, p.kappa_b)?,
        photon_number_configured: p.m_empty,
        lo_fit,
        sensitivity: SensitivityReport::from_snr(c.combined_snr, 0.0, cfg.analysis.bandwidth, p.g0),
    })
}

/// Calibration arithmetic and an S²/N check on a synthesized empty cavity.
pub fn cmd_calibrate(cfg: &RunConfig, ctx: &RunContext) -> Result<(RunOutcome, CalibrationReport)> {
    let report = calibration_report(cfg)?;
    let mut manifest = RunManifest::new("calibrate", cfg, ctx.created);
    manifest.seeds.push(StreamSeed {
        stage: STAGE_CALIBRATE.into(),
        index: 0,
        seed: derive_seed(cfg.seed, STAGE_CALIBRATE, 0),
    });
    let out = Outputs::create(ctx, "calibrate", cfg)?;
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    out.put("calibration.json", &json)?;
    Ok((out.finish(manifest, 0, 1)?, report))
}
