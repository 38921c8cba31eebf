//! `uplink`: run simulations, sweeps, guarantee checks and figure presets.
//!
//! Machine-readable results (CSV, JSON) go to `--out` or standard output;
//! progress and summaries go to standard error. Exit status is 1 for bad
//! input (config, overrides, figure names) and 2 for failures while running.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use uplink_core::experiments::{preset, run_sweep_with, Axis, AxisValue, Detector, ExperimentError, Figure, Scale, SweepRow, SweepSpec};
use uplink_core::guarantees::{survey, GuaranteeSurvey};
use uplink_core::config::apply_overrides;
use uplink_core::{LoadError, SystemConfig};

#[derive(Parser)]
#[command(name = "uplink", version, about = "Grant-free block-sparse uplink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Override a config field, `key=value`; dotted keys reach nested fields.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for trials (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo trials at a single operating point.
    Simulate {
        /// Flat JSON `SystemConfig`.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, value_parser = parse_detector, default_value = "bomp")]
        detector: Detector,
        /// Fill the `mean_trial_ms` column.
        #[arg(long)]
        timing: bool,
        #[command(flatten)]
        common: Common,
    },
    /// A one-dimensional sweep described by a JSON sweep spec.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        timing: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Coherence quantities and recovery conditions over random realizations.
    Guarantees {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        realizations: u64,
        /// Target error probability for the information bound.
        #[arg(long, default_value_t = 0.01)]
        pe: f64,
        /// Skip the information bound (its determinant dominates at large `N_a d`).
        #[arg(long)]
        no_info_bound: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run every curve of a figure preset into a directory.
    Reproduce {
        /// fig1, fig2, fig3 or fig4.
        figure: String,
        #[arg(long, default_value = "desk")]
        scale: String,
        /// Output directory for the CSVs and `manifest.json`.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Applied to every curve's sweep spec, e.g. `trials_per_point=50`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn parse_detector(s: &str) -> Result<Detector, String> {
    match s {
        "bomp" => Ok(Detector::Bomp),
        "genie_ls" => Ok(Detector::GenieLs),
        _ => Err(format!("unknown detector `{s}` (expected bomp or genie_ls)")),
    }
}

/// Failure classes mapped to exit statuses.
enum Failure {
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Load(_)
            | ExperimentError::InvalidPoint { .. }
            | ExperimentError::InvalidAxisValue { .. }
            | ExperimentError::EmptySweep
            | ExperimentError::UnknownFigure(_)
            | ExperimentError::UnknownScale(_) => Failure::Input(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Input(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, trials, detector, timing, common } => {
            simulate(&config, trials, detector, timing, &common)
        }
        Command::Sweep { config, timing, common } => sweep(&config, timing, &common),
        Command::Guarantees { config, realizations, pe, no_info_bound, common } => {
            guarantees(&config, realizations, (!no_info_bound).then_some(pe), &common)
        }
        Command::Reproduce { figure, scale, out, workers, overrides } => {
            reproduce(&figure, &scale, &out, workers, &overrides)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Input)
}

/// Parses a flat JSON config, applies overrides, then validates once, so an
/// override can repair a value the file gets wrong.
fn load_config(path: &Path, overrides: &[String]) -> Result<SystemConfig, Failure> {
    let text = read(path)?;
    let load = || -> Result<SystemConfig, LoadError> {
        let mut doc: serde_json::Value = serde_json::from_str(&text)?;
        apply_overrides(&mut doc, overrides)?;
        let cfg: SystemConfig = serde_json::from_value(doc)?;
        cfg.validate()?;
        Ok(cfg)
    };
    load()
        .with_context(|| format!("in {}", path.display()))
        .map_err(Failure::Input)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display())).map_err(runtime)?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn progress(label: &str) -> impl FnMut(&SweepRow) + '_ {
    move |r| eprintln!("{label} {}: ser={:.3e} fer={:.3e} trials={}", r.axis_value, r.ser, r.fer, r.trials)
}

fn run_to(spec: &SweepSpec, label: &str, out: Option<&Path>) -> Result<(), Failure> {
    let table = run_sweep_with(spec, progress(label))?;
    let mut w = output(out)?;
    table.write_csv(&mut w)?;
    w.flush().map_err(runtime)
}

fn simulate(path: &Path, trials: usize, detector: Detector, timing: bool, common: &Common) -> Result<(), Failure> {
    let cfg = load_config(path, &common.overrides)?;
    let spec = SweepSpec {
        values: vec![AxisValue::Number(cfg.es_n0_db)],
        base: cfg,
        axis: Axis::EsN0Db,
        trials_per_point: trials,
        parallel_workers: common.workers.unwrap_or_else(default_workers),
        detector,
        record_timing: timing,
    };
    run_to(&spec, "es_n0_db", common.out.as_deref())
}

fn sweep(path: &Path, timing: bool, common: &Common) -> Result<(), Failure> {
    let text = read(path)?;
    let mut spec = SweepSpec::from_json_with_overrides(&text, &common.overrides)
        .with_context(|| format!("in {}", path.display()))
        .map_err(Failure::Input)?;
    if let Some(w) = common.workers {
        spec.parallel_workers = w;
    }
    spec.record_timing |= timing;
    let label = spec.axis.field();
    run_to(&spec, label, common.out.as_deref())
}

/// Values below this print as zero, so exactly orthogonal precoders show
/// `0.000e0` rather than rounding noise.
const DISPLAY_FLOOR: f64 = 1e-12;

fn sci(v: f64) -> String {
    format!("{:.3e}", if v.abs() < DISPLAY_FLOOR { 0.0 } else { v })
}

fn guarantees(path: &Path, realizations: u64, p_e: Option<f64>, common: &Common) -> Result<(), Failure> {
    let cfg = load_config(path, &common.overrides)?;
    if let Some(p) = p_e {
        if !(0.0..1.0).contains(&p) {
            return Err(input(anyhow::anyhow!("--pe must lie in [0, 1), got {p}")));
        }
    }
    let workers = common.workers.unwrap_or_else(default_workers);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(runtime)?;
    let report: GuaranteeSurvey = pool
        .install(|| survey(&cfg, realizations, p_e))
        .map_err(runtime)?;
    let mut w = output(common.out.as_deref())?;
    write_guarantees(&mut w, &report).map_err(runtime)?;
    w.flush().map_err(runtime)?;
    eprintln!(
        "max allowed active users (mode over {} realizations): {}",
        realizations, report.mode_max_allowed_active
    );
    Ok(())
}

fn write_guarantees<W: Write>(w: &mut W, report: &GuaranteeSurvey) -> io::Result<()> {
    writeln!(
        w,
        "realization,mu_block,sub_coherence,tau,s_min,s_max,lhs9,rhs9,condition9,bound10,info_bits_lower,info_rhs,info_feasible,max_allowed_active"
    )?;
    for r in &report.realizations {
        let c = &r.coherence;
        let (lower, rhs, feasible) = match r.info {
            Some(i) => (sci(i.s_bits_lower), sci(i.rhs11), i.feasible.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.realization,
            sci(c.mu_block),
            sci(c.sub_coherence),
            sci(c.tau),
            sci(c.s_min),
            sci(c.s_max),
            sci(r.verdict.lhs9),
            sci(r.verdict.rhs9),
            r.verdict.condition9_holds,
            r.verdict.bound10.map(sci).unwrap_or_else(|| "inapplicable".into()),
            lower,
            rhs,
            feasible,
            r.max_allowed_active
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    label: &'a str,
    csv: String,
    spec: &'a SweepSpec,
}

#[derive(Serialize)]
struct Manifest<'a> {
    figure: Figure,
    scale: Scale,
    curves: Vec<ManifestEntry<'a>>,
}

fn reproduce(figure: &str, scale: &str, out: &Path, workers: Option<usize>, overrides: &[String]) -> Result<(), Failure> {
    let figure: Figure = figure.parse()?;
    let scale: Scale = scale.parse()?;
    let mut p = preset(figure, scale);
    for c in &mut p.curves {
        let text = c.spec.to_json_string();
        c.spec = SweepSpec::from_json_with_overrides(&text, overrides).map_err(input)?;
        if let Some(w) = workers {
            c.spec.parallel_workers = w;
        }
        c.spec.points()?;
    }
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(runtime)?;
    let mut entries = Vec::with_capacity(p.curves.len());
    for c in &p.curves {
        let name = format!("{figure}_{}.csv", c.label);
        run_to(&c.spec, &c.label, Some(&out.join(&name)))?;
        entries.push(ManifestEntry { label: &c.label, csv: name, spec: &c.spec });
    }
    let manifest = Manifest { figure, scale, curves: entries };
    let text = serde_json::to_string_pretty(&manifest).map_err(runtime)?;
    fs::write(out.join("manifest.json"), text + "\n").map_err(runtime)?;
    eprintln!("wrote {} curves and manifest.json to {}", p.curves.len(), out.display());
    Ok(())
}
