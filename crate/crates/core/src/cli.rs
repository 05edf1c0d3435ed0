// SPDX-License-Identifier: Apache-2.0

//! Command-line front end. `run` is the whole program minus process exit.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::echo::{efficiency_map_with, Distribution, EchoProtocol, Ensemble, Inversion, Sampling, ANALOG_PI_DURATION};
use crate::maps::{scan_with, Grid, RobustnessMap, ScanOptions};
use crate::pulses::{base_propagator, ErrorModel, IntegratorConfig, PulseShape, PulseSpec, SampledEnvelope};
use crate::sequences::{catalog, catalog_labels, execute_with_offsets, full_catalog, CompositeSequence};
use crate::solver::{solution_records, solve_phases_with, SolverConfig};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "CPULSE_THREADS";

const SUBCOMMANDS: [&str; 5] = ["catalog", "simulate", "solve", "map", "echo"];

#[derive(Parser, Debug)]
#[command(
    name = "cpulse",
    version,
    about = "Universal composite pulses: catalog, simulation, phase solving, robustness and echo maps",
    args_override_self = true
)]
struct Cli {
    /// Flat `key = value` file supplying defaults for any flag
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print catalog entries
    Catalog(CatalogArgs),
    /// Compose one sequence and print its propagator
    Simulate(SimulateArgs),
    /// Search anagram-symmetric phases for n pulses
    Solve(SolveArgs),
    /// Infidelity map over detuning and pulse duration
    Map(MapArgs),
    /// Rephasing efficiency map of an inhomogeneous ensemble
    Echo(EchoArgs),
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct CatalogArgs {
    label: Option<String>,
    /// text or json
    #[arg(long, default_value = "text")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct PulseArgs {
    /// Catalog label or `single`
    #[arg(long)]
    seq: Option<String>,
    /// Comma-separated phases in units of π, e.g. `0,5/6,1/3,5/6,0`
    #[arg(long, allow_hyphen_values = true)]
    phases: Option<String>,
    /// rect, gauss or csv:PATH
    #[arg(long, default_value = "rect")]
    shape: String,
    /// Nominal pulse area, e.g. `1pi`, `0.8pi`, `3.1`
    #[arg(long, default_value = "1pi")]
    area: String,
    /// Peak Rabi frequency
    #[arg(long)]
    omega: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct ErrorArgs {
    /// Static detuning
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    detuning: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    chirp: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    stark: f64,
    #[arg(long = "amp-scale", default_value_t = 1.0)]
    amp_scale: f64,
    /// Standard deviation of per-pulse phase noise
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Integrator relative tolerance
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct SimulateArgs {
    #[command(flatten)]
    pulse: PulseArgs,
    #[command(flatten)]
    errors: ErrorArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct SolveArgs {
    #[arg(long)]
    n: usize,
    /// Number of random starting points
    #[arg(long, default_value_t = 512)]
    seeds: usize,
    /// Aim directly for this order instead of escalating
    #[arg(long = "target-jmax")]
    target_jmax: Option<usize>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug, Clone)]
struct GridArgs {
    /// `dmin:dmax,tmin:tmax` in units of Δ/Ω and T/τ
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Points per axis, `N` or `NDxNT`
    #[arg(long)]
    res: Option<String>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct MapArgs {
    #[command(flatten)]
    pulse: PulseArgs,
    #[command(flatten)]
    errors: ErrorArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// infidelity or fidelity
    #[arg(long, default_value = "infidelity")]
    quantity: String,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct EchoArgs {
    #[command(flatten)]
    pulse: PulseArgs,
    #[command(flatten)]
    errors: ErrorArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Standard deviation of the member detuning
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    /// Relative standard deviation of the member Rabi frequency
    #[arg(long = "rabi-spread", default_value_t = 0.0)]
    rabi_spread: f64,
    #[arg(long, default_value_t = 200)]
    members: usize,
    /// stratified or mc
    #[arg(long, default_value = "stratified")]
    sampling: String,
    #[arg(long, default_value_t = 600.0)]
    storage: f64,
    #[arg(long, default_value_t = 2)]
    inversions: usize,
    #[command(flatten)]
    common: CommonArgs,
}

/// Resolved settings of one run, echoed into every output.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sequences: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phases_over_pi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_model: Option<ErrorModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantity: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<Ensemble>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub storage_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inversion_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Integration { .. } | Error::Conditioning { .. } | Error::Precision(_) => Failure::Numeric(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(format!("i/o error: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Parses a flat `key = value` file. `#` and `;` start comments, `[section]`
/// headers are ignored.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') || line.starts_with('[') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse(format!("config line {}: expected `key = value`", i + 1)));
        };
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::Parse(format!("config line {}: empty key", i + 1)));
        }
        out.push((key.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Splices config entries into `argv` right after the subcommand so that
/// explicit flags, which come later, win.
fn expand_config(argv: Vec<String>) -> CliResult<Vec<String>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    if let Some(prog) = it.next() {
        rest.push(prog);
    }
    while let Some(arg) = it.next() {
        if arg == "--config" {
            path = Some(it.next().ok_or_else(|| usage("--config needs a path"))?);
        } else if let Some(p) = arg.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = std::fs::read_to_string(&path).map_err(|e| usage(format!("cannot read config {path}: {e}")))?;
    let entries = parse_config(&text).map_err(|e| usage(e.to_string()))?;

    let mut pos = rest.iter().position(|a| SUBCOMMANDS.contains(&a.as_str()));
    let mut flags = Vec::new();
    for (key, value) in entries {
        if key == "command" {
            if pos.is_none() {
                rest.insert(1, value);
                pos = Some(1);
            }
            continue;
        }
        if key == "label" {
            flags.push(value);
            continue;
        }
        flags.push(format!("--{key}={value}"));
    }
    let at = pos.ok_or_else(|| usage("no subcommand given on the command line or in the config"))? + 1;
    rest.splice(at..at, flags);
    Ok(rest)
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| usage(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    if n == 0 {
        return Err(usage(format!("{THREADS_ENV} must be positive")));
    }
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs the program on `argv` (including the program name), writing results
/// to `stdout` and diagnostics to `stderr`. Returns the exit code.
pub fn run<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let outcome = expand_config(argv).and_then(|args| {
        configure_threads()?;
        match Cli::try_parse_from(&args) {
            Ok(cli) => dispatch(cli, stdout),
            Err(e) => {
                use clap::error::ErrorKind;
                if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                    let _ = write!(stdout, "{e}");
                    Ok(())
                } else {
                    Err(Failure::Usage(e.to_string()))
                }
            }
        }
    });
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "{}", msg.trim_end());
            EXIT_USAGE
        }
        Err(Failure::Numeric(msg)) => {
            let _ = writeln!(stderr, "numerical failure: {msg}");
            EXIT_NUMERIC
        }
    }
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Catalog(a) => cmd_catalog(a, stdout),
        Command::Simulate(a) => cmd_simulate(a, stdout),
        Command::Solve(a) => cmd_solve(a, stdout),
        Command::Map(a) => cmd_map(a, stdout),
        Command::Echo(a) => cmd_echo(a, stdout),
    }
}

/// Parses a number optionally suffixed with `pi`; `a/b` fractions allowed.
pub fn parse_angle(text: &str) -> Result<f64> {
    let t = text.trim().to_ascii_lowercase();
    let (body, scale) = match t.strip_suffix("pi") {
        Some(b) => (b.trim().trim_end_matches('*').trim(), PI),
        None => (t.as_str(), 1.0),
    };
    let value = if body.is_empty() {
        1.0
    } else {
        parse_fraction(body)?
    };
    Ok(value * scale)
}

fn parse_fraction(text: &str) -> Result<f64> {
    let bad = || Error::Parse(format!("cannot parse number `{text}`"));
    let v = match text.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            if b == 0.0 {
                return Err(bad());
            }
            a / b
        }
        None => text.trim().parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Comma-separated phases in units of π.
pub fn parse_phases(text: &str) -> Result<Vec<f64>> {
    text.split(',').map(|p| parse_fraction(p.trim())).collect()
}

/// `dmin:dmax,tmin:tmax`.
pub fn parse_grid(text: &str, resolution: (usize, usize)) -> Result<Grid> {
    let bad = || Error::Parse(format!("grid `{text}` is not of the form dmin:dmax,tmin:tmax"));
    let (d, t) = text.split_once(',').ok_or_else(bad)?;
    let range = |s: &str| -> Result<(f64, f64)> {
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        Ok((parse_fraction(a)?, parse_fraction(b)?))
    };
    Ok(Grid {
        detuning: range(d)?,
        duration: range(t)?,
        resolution,
    })
}

/// `N` or `NDxNT`.
pub fn parse_resolution(text: &str) -> Result<(usize, usize)> {
    let bad = || Error::Parse(format!("resolution `{text}` is not N or NDxNT"));
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    match text.split_once(['x', 'X']) {
        Some((a, b)) => Ok((parse(a)?, parse(b)?)),
        None => {
            let n = parse(text)?;
            Ok((n, n))
        }
    }
}

fn resolve_grid(args: &GridArgs, default_res: usize) -> CliResult<Grid> {
    let resolution = match &args.res {
        Some(r) => parse_resolution(r)?,
        None => (default_res, default_res),
    };
    match &args.grid {
        Some(g) => Ok(parse_grid(g, resolution)?),
        None => Ok(Grid {
            resolution,
            ..Grid::default()
        }),
    }
}

fn parse_shape(text: &str) -> CliResult<PulseShape> {
    match text {
        "rect" | "rectangular" => Ok(PulseShape::Rectangular),
        "gauss" | "gaussian" => Ok(PulseShape::Gaussian),
        other => match other.strip_prefix("csv:") {
            Some(path) => Ok(PulseShape::Sampled(SampledEnvelope::from_csv_path(path)?)),
            None => Err(usage(format!("unknown shape `{other}`; use rect, gauss or csv:PATH"))),
        },
    }
}

fn resolve_sequences(args: &PulseArgs) -> CliResult<Vec<CompositeSequence>> {
    match (&args.seq, &args.phases) {
        (Some(_), Some(_)) => Err(usage("give either --seq or --phases, not both")),
        (None, Some(p)) => {
            let over_pi = parse_phases(p)?;
            Ok(vec![CompositeSequence::new(
                "custom",
                over_pi.iter().map(|v| v * PI).collect(),
                0,
            )?])
        }
        (Some(labels), None) => labels.split(',').map(|l| sequence_by_label(l.trim())).collect(),
        (None, None) => Ok(vec![CompositeSequence::single()]),
    }
}

fn sequence_by_label(label: &str) -> CliResult<CompositeSequence> {
    if label.eq_ignore_ascii_case("single") {
        return Ok(CompositeSequence::single());
    }
    Ok(catalog(label)?)
}

fn resolve_pulse(args: &PulseArgs, default_omega: f64) -> CliResult<PulseSpec> {
    let shape = parse_shape(&args.shape)?;
    let omega = args.omega.unwrap_or(default_omega);
    let area = parse_angle(&args.area)?;
    if !(omega > 0.0 && area > 0.0) {
        return Err(usage("--omega and --area must be positive"));
    }
    Ok(PulseSpec::with_area(shape, omega, area)?)
}

fn resolve_errors(args: &ErrorArgs) -> CliResult<ErrorModel> {
    let err = ErrorModel {
        amplitude_scale: args.amp_scale,
        static_detuning: args.detuning,
        chirp_rate: args.chirp,
        stark_coefficient: args.stark,
        phase_jitter_std: args.jitter,
    };
    err.validate()?;
    Ok(err)
}

fn integrator(tol: Option<f64>) -> CliResult<IntegratorConfig> {
    match tol {
        Some(t) if !(t > 0.0 && t.is_finite()) => Err(usage("--tol must be positive")),
        Some(t) => Ok(IntegratorConfig::default().with_tol(t)),
        None => Ok(IntegratorConfig::default()),
    }
}

fn base_config(command: &str, common: &CommonArgs, format: &str) -> RunConfig {
    RunConfig {
        command: command.into(),
        out: common.out.as_ref().map(|p| p.display().to_string()),
        format: Some(format.into()),
        seed: common.seed,
        tol: common.tol,
        ..Default::default()
    }
}

fn pulse_config(cfg: &mut RunConfig, seqs: &[CompositeSequence], pulse: &PulseArgs, spec: &PulseSpec, err: &ErrorModel) {
    cfg.sequences = Some(seqs.iter().map(|s| s.label.clone()).collect());
    if pulse.phases.is_some() {
        cfg.phases_over_pi = seqs.first().map(|s| s.phases.iter().map(|p| p / PI).collect());
    }
    cfg.shape = Some(pulse.shape.clone());
    cfg.area = Some(spec.area());
    cfg.omega = Some(spec.omega_peak);
    cfg.error_model = Some(*err);
}

fn with_output<F>(out: Option<&Path>, stdout: &mut dyn Write, f: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> CliResult<()>,
{
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| usage(format!("cannot create {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => f(stdout),
    }
}

fn json_line<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string(value).map_err(|e| usage(e.to_string()))
}

fn cmd_catalog(a: CatalogArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let seqs = match &a.label {
        Some(l) => vec![catalog(l)?],
        None => full_catalog(),
    };
    let cfg = RunConfig {
        command: "catalog".into(),
        sequences: Some(seqs.iter().map(|s| s.label.clone()).collect()),
        format: Some(a.format.clone()),
        out: a.out.as_ref().map(|p| p.display().to_string()),
        ..Default::default()
    };
    match a.format.as_str() {
        "text" => with_output(a.out.as_deref(), stdout, |w| {
            writeln!(w, "# config={}", json_line(&cfg)?)?;
            for s in &seqs {
                let phases: Vec<String> = s.export_phases().iter().map(|p| p.to_string()).collect();
                writeln!(w, "{}  n={}  jmax={}  phases = ({})·π", s.label, s.len(), s.jmax, phases.join(", "))?;
            }
            Ok(())
        }),
        "json" => with_output(a.out.as_deref(), stdout, |w| {
            #[derive(Serialize)]
            struct Doc<'a> {
                config: &'a RunConfig,
                sequences: Vec<crate::sequences::SequenceRecord>,
                labels: Vec<&'static str>,
            }
            let doc = Doc {
                config: &cfg,
                sequences: seqs.iter().map(CompositeSequence::to_record).collect(),
                labels: catalog_labels(),
            };
            writeln!(w, "{}", serde_json::to_string_pretty(&doc).map_err(|e| usage(e.to_string()))?)?;
            Ok(())
        }),
        other => Err(usage(format!("unknown catalog format `{other}`; use text or json"))),
    }
}

fn cmd_simulate(a: SimulateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let seqs = resolve_sequences(&a.pulse)?;
    let [seq] = seqs.as_slice() else {
        return Err(usage("simulate takes exactly one sequence"));
    };
    let spec = resolve_pulse(&a.pulse, 1.0)?;
    let err = resolve_errors(&a.errors)?;
    let format = a.common.format.clone().unwrap_or_else(|| "text".into());
    let mut cfg = base_config("simulate", &a.common, &format);
    pulse_config(&mut cfg, &seqs, &a.pulse, &spec, &err);

    let base = base_propagator(&spec, &err, &integrator(a.common.tol)?)?;
    let offsets = err.jitter_offsets(seq.len(), a.common.seed);
    let u = execute_with_offsets(seq, &base, &offsets)?;
    let m = u.matrix();

    #[derive(Serialize)]
    struct Doc<'a> {
        config: &'a RunConfig,
        sequence: &'a CompositeSequence,
        q: f64,
        alpha: f64,
        beta: f64,
        matrix: [[(f64, f64); 2]; 2],
        transition_probability: f64,
        infidelity: f64,
    }
    let c = |r: usize, k: usize| (m.get(r, k).re, m.get(r, k).im);
    let doc = Doc {
        config: &cfg,
        sequence: seq,
        q: u.q(),
        alpha: u.alpha(),
        beta: u.beta(),
        matrix: [[c(0, 0), c(0, 1)], [c(1, 0), c(1, 1)]],
        transition_probability: u.transition_probability(),
        infidelity: u.infidelity(),
    };
    match format.as_str() {
        "text" => with_output(a.common.out.as_deref(), stdout, |w| {
            writeln!(w, "# config={}", json_line(&cfg)?)?;
            writeln!(w, "sequence {} (n={})", seq.label, seq.len())?;
            writeln!(w, "q = {:.15e}  alpha = {:.15e}  beta = {:.15e}", doc.q, doc.alpha, doc.beta)?;
            for r in 0..2 {
                let row: Vec<String> = (0..2)
                    .map(|k| format!("{:+.15e}{:+.15e}i", m.get(r, k).re, m.get(r, k).im))
                    .collect();
                writeln!(w, "U[{r}] = [{}]", row.join(", "))?;
            }
            writeln!(w, "P = {:.15e}", doc.transition_probability)?;
            writeln!(w, "Q = {:.15e}", doc.infidelity)?;
            Ok(())
        }),
        "json" => with_output(a.common.out.as_deref(), stdout, |w| {
            writeln!(w, "{}", serde_json::to_string_pretty(&doc).map_err(|e| usage(e.to_string()))?)?;
            Ok(())
        }),
        other => Err(usage(format!("unknown simulate format `{other}`; use text or json"))),
    }
}

fn cmd_solve(a: SolveArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let format = a.common.format.clone().unwrap_or_else(|| "json".into());
    if format != "json" {
        return Err(usage("solve writes json only"));
    }
    let solver = SolverConfig {
        seeds: a.seeds,
        rng_seed: a.common.seed,
        target_jmax: a.target_jmax,
        ..Default::default()
    };
    let mut cfg = base_config("solve", &a.common, &format);
    cfg.solver = Some(solver.clone());
    let results = solve_phases_with(a.n, &solver)?;

    #[derive(Serialize)]
    struct Doc<'a> {
        config: &'a RunConfig,
        n: usize,
        results: Vec<crate::solver::SolutionRecord>,
    }
    let doc = Doc {
        config: &cfg,
        n: a.n,
        results: solution_records(&results),
    };
    with_output(a.common.out.as_deref(), stdout, |w| {
        writeln!(w, "{}", serde_json::to_string_pretty(&doc).map_err(|e| usage(e.to_string()))?)?;
        Ok(())
    })
}

/// Output path for one of several labels: `{label}` is substituted.
fn labelled_path(out: Option<&Path>, label: &str, count: usize) -> CliResult<Option<PathBuf>> {
    match out {
        None if count > 1 => Err(usage("several sequences need --out with a {label} placeholder")),
        None => Ok(None),
        Some(p) => {
            let text = p.display().to_string();
            if text.contains("{label}") {
                Ok(Some(PathBuf::from(text.replace("{label}", label))))
            } else if count > 1 {
                Err(usage("several sequences need --out with a {label} placeholder"))
            } else {
                Ok(Some(p.to_path_buf()))
            }
        }
    }
}

fn write_map(map: &RobustnessMap, cfg: &RunConfig, format: &str, out: Option<&Path>, stdout: &mut dyn Write) -> CliResult<()> {
    match format {
        "csv" => with_output(out, stdout, |w| Ok(map.write_csv(w, cfg)?)),
        "json" => with_output(out, stdout, |w| {
            writeln!(w, "{}", map.to_json(cfg)?)?;
            Ok(())
        }),
        other => Err(usage(format!("unknown map format `{other}`; use csv or json"))),
    }
}

fn cmd_map(a: MapArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let seqs = resolve_sequences(&a.pulse)?;
    let spec = resolve_pulse(&a.pulse, 1.0)?;
    let err = resolve_errors(&a.errors)?;
    let grid = resolve_grid(&a.grid, 201)?;
    let format = a.common.format.clone().unwrap_or_else(|| "csv".into());
    let fidelity = match a.quantity.as_str() {
        "infidelity" => false,
        "fidelity" => true,
        other => return Err(usage(format!("unknown quantity `{other}`; use infidelity or fidelity"))),
    };
    let opts = ScanOptions {
        integrator: integrator(a.common.tol)?,
        seed: a.common.seed,
    };
    let mut cfg = base_config("map", &a.common, &format);
    pulse_config(&mut cfg, &seqs, &a.pulse, &spec, &err);
    cfg.grid = Some(grid);
    cfg.quantity = Some(a.quantity.clone());

    for seq in &seqs {
        let out = labelled_path(a.common.out.as_deref(), &seq.label, seqs.len())?;
        let mut map = scan_with(seq, &spec, &err, &grid, &opts)?;
        if fidelity {
            map.values = map.fidelity();
        }
        write_map(&map, &cfg, &format, out.as_deref(), stdout)?;
    }
    Ok(())
}

fn cmd_echo(a: EchoArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let seqs = resolve_sequences(&a.pulse)?;
    let spec = resolve_pulse(&a.pulse, PI / ANALOG_PI_DURATION)?;
    let err = resolve_errors(&a.errors)?;
    let grid = resolve_grid(&a.grid, 101)?;
    let format = a.common.format.clone().unwrap_or_else(|| "csv".into());
    let sampling = match a.sampling.as_str() {
        "stratified" => Sampling::Stratified,
        "mc" | "montecarlo" => Sampling::MonteCarlo,
        other => return Err(usage(format!("unknown sampling `{other}`; use stratified or mc"))),
    };
    let ensemble = Ensemble {
        detuning: Distribution::Gaussian { mean: 0.0, std: a.sigma },
        rabi_scale: if a.rabi_spread > 0.0 {
            Distribution::Gaussian { mean: 1.0, std: a.rabi_spread }
        } else {
            Distribution::Fixed { value: 1.0 }
        },
        member_count: a.members,
        seed: a.common.seed,
        sampling,
    };
    ensemble.validate()?;

    let mut cfg = base_config("echo", &a.common, &format);
    pulse_config(&mut cfg, &seqs, &a.pulse, &spec, &err);
    cfg.grid = Some(grid);
    cfg.ensemble = Some(ensemble.clone());
    cfg.storage_time = Some(a.storage);
    cfg.inversion_count = Some(a.inversions);
    let integ = integrator(a.common.tol)?;

    for seq in &seqs {
        let out = labelled_path(a.common.out.as_deref(), &seq.label, seqs.len())?;
        let proto = EchoProtocol {
            storage_time: a.storage,
            inversion_count: a.inversions,
            inversion: Inversion::Composite {
                pulse: spec.clone(),
                sequence: seq.clone(),
            },
            timing_offset: 0.0,
        };
        proto.intervals()?;
        let map = efficiency_map_with(&ensemble, &proto, &err, &grid, &integ)?;
        write_map(&map, &cfg, &format, out.as_deref(), stdout)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("cpulse").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn angles_and_phases() {
        assert!((parse_angle("1.0pi").unwrap() - PI).abs() < 1e-15);
        assert!((parse_angle("pi").unwrap() - PI).abs() < 1e-15);
        assert!((parse_angle("1/2pi").unwrap() - PI / 2.0).abs() < 1e-15);
        assert_eq!(parse_angle("2.5").unwrap(), 2.5);
        assert!(parse_angle("abc").is_err());
        assert_eq!(parse_phases("0, 1/2 ,0").unwrap(), vec![0.0, 0.5, 0.0]);
        assert!(parse_phases("0,1/0").is_err());
    }

    #[test]
    fn grid_and_resolution() {
        let g = parse_grid("-1:1,0:2", (5, 7)).unwrap();
        assert_eq!(g.detuning, (-1.0, 1.0));
        assert_eq!(g.duration, (0.0, 2.0));
        assert_eq!(parse_resolution("201").unwrap(), (201, 201));
        assert_eq!(parse_resolution("11x21").unwrap(), (11, 21));
        assert!(parse_grid("-1:1", (2, 2)).is_err());
        assert!(parse_resolution("x").is_err());
    }

    #[test]
    fn config_parsing() {
        let entries = parse_config("# c\n[map]\nseq = U3\n; x\nres=11\n").unwrap();
        assert_eq!(entries, vec![("seq".into(), "U3".into()), ("res".into(), "11".into())]);
        assert!(parse_config("novalue\n").is_err());
    }

    #[test]
    fn catalog_u3() {
        let (code, out, _) = run_capture(&["catalog", "U3"]);
        assert_eq!(code, 0);
        assert!(out.contains("U3  n=3  jmax=0  phases = (0, 1/2, 0)·π"), "{out}");
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_capture(&["catalog", "U4"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["simulate", "--bogus"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["simulate", "--seq", "U3", "--phases", "0"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["map", "--seq", "U3,U5a", "--res", "3"]).0, EXIT_USAGE);
        let (code, _, err) = run_capture(&["solve"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("--n"));
    }

    #[test]
    fn numerical_failure_exits_two() {
        let (code, _, err) = run_capture(&["simulate", "--shape", "gauss", "--tol", "1e-300"]);
        assert_eq!(code, EXIT_NUMERIC, "{err}");
    }

    #[test]
    fn simulate_perfect_pi() {
        let (code, out, _) = run_capture(&["simulate", "--seq", "U5a", "--shape", "rect", "--area", "1.0pi", "--detuning", "0", "--format", "json"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(v["infidelity"].as_f64().unwrap() < 1e-10);
        assert_eq!(v["config"]["command"], "simulate");
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("catalog"));
    }
}
