//! Command-line front end: `analyze`, `split`, `fidelity`, `optimize`, `demo`.
//!
//! Options come from flags and, optionally, a strict JSON config file
//! (`--config`); flags take precedence over the file. Reports are single
//! JSON documents, curves and schedules are CSV with `#` metadata lines.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::criteria::{all_reports, check_elimination};
use crate::dynamics::{
    log_grid, optimize_pulse, relaxation_benchmark, sweep_tau, CoefficientVariant, OptimizerSettings,
    StateVector, SweepOptions, REFERENCE_COUPLINGS_J,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::hamiltonians::{energy_gaps, CouplingUnit, SystemSpec, HBAR_EV_S};
use crate::hilbert::LevelIndex;
use crate::lie_closure::{is_completely_controllable_with, DEFAULT_TOLERANCE};

pub const DEFAULT_TAU_RANGE: (f64, f64, usize) = (1e-15, 1e-11, 41);
pub const DEFAULT_SEGMENTS: usize = 40;
pub const DEFAULT_ITERATIONS: usize = 2000;
/// Default pulse duration in units of `hbar / mu_1`.
pub const DEFAULT_DURATION_GAPS: f64 = 50.0;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Analyze,
    Split,
    Fidelity,
    Optimize,
    Demo,
}

/// Everything a run needs. Unset fields fall back to documented defaults,
/// which are echoed into the output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub spec_path: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
    /// Closure admission tolerance.
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub with_exact: Option<bool>,
    pub taus: Option<Vec<f64>>,
    pub tau_range: Option<String>,
    pub dt_max: Option<f64>,
    pub variant: Option<CoefficientVariant>,
    pub state_path: Option<PathBuf>,
    pub benchmark: Option<bool>,
    pub segments: Option<usize>,
    /// Seconds.
    pub duration: Option<f64>,
    pub iterations: Option<usize>,
    pub initial_path: Option<PathBuf>,
    pub target_path: Option<PathBuf>,
    pub units: Option<CouplingUnit>,
    pub levels: Option<usize>,
    pub sequential: Option<bool>,
}

#[derive(Debug, Parser)]
#[command(name = "qdctl", version, about = "Controllability analysis and control of degenerate multi-level systems")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// JSON file with `RunConfig` fields; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output file; stdout when omitted. With `--benchmark` this is the base name.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Closure admission tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also integrate the relaxation exactly.
    #[arg(long)]
    pub exact: bool,
    /// Comma-separated relaxation times in seconds.
    #[arg(long, conflicts_with = "tau_range", value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    /// `lo:hi:n`, n log-spaced points.
    #[arg(long)]
    pub tau_range: Option<String>,
    /// Largest integration step in seconds for `--exact`.
    #[arg(long)]
    pub dt_max: Option<f64>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// State file (`{"amplitudes": [[re, im], ...]}`) for `fidelity`.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Sweep the four reference couplings of the two-level benchmark.
    #[arg(long)]
    pub benchmark: bool,
    #[arg(long)]
    pub segments: Option<usize>,
    /// Pulse duration in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Initial state file for `optimize`; ground state when omitted.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    /// Target state file for `optimize`; a seeded random state when omitted.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Unit of the excitation couplings, overriding the spec file.
    #[arg(long, value_enum)]
    pub units: Option<UnitArg>,
    /// Number of levels for `demo`.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Disable data parallelism.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Printed,
    Corrected,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UnitArg {
    #[value(name = "J")]
    Joule,
    #[value(name = "eV")]
    ElectronVolt,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Config file (if any) overlaid with explicit flags.
    pub fn from_args(args: Args) -> Result<Self> {
        let mut c = match &args.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        fn set<T>(slot: &mut Option<T>, v: Option<T>) {
            if v.is_some() {
                *slot = v;
            }
        }
        set(&mut c.command, args.command);
        set(&mut c.spec_path, args.spec);
        set(&mut c.output_path, args.out);
        set(&mut c.tolerance, args.tol);
        set(&mut c.seed, args.seed);
        set(&mut c.with_exact, args.exact.then_some(true));
        set(&mut c.taus, args.taus);
        set(&mut c.tau_range, args.tau_range);
        set(&mut c.dt_max, args.dt_max);
        set(
            &mut c.variant,
            args.variant.map(|v| match v {
                VariantArg::Printed => CoefficientVariant::Printed,
                VariantArg::Corrected => CoefficientVariant::Corrected,
            }),
        );
        set(&mut c.state_path, args.state);
        set(&mut c.benchmark, args.benchmark.then_some(true));
        set(&mut c.segments, args.segments);
        set(&mut c.duration, args.duration);
        set(&mut c.iterations, args.iters);
        set(&mut c.initial_path, args.initial);
        set(&mut c.target_path, args.target);
        set(
            &mut c.units,
            args.units.map(|u| match u {
                UnitArg::Joule => CouplingUnit::Joule,
                UnitArg::ElectronVolt => CouplingUnit::ElectronVolt,
            }),
        );
        set(&mut c.levels, args.levels);
        set(&mut c.sequential, args.sequential.then_some(true));
        if c.taus.is_some() && c.tau_range.is_some() {
            return Err(Error::InvalidArgument("give either taus or tau_range, not both".into()));
        }
        Ok(c)
    }

    fn exec(&self) -> Execution {
        if self.sequential.unwrap_or(false) {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    fn tolerance(&self) -> Result<f64> {
        let tol = self.tolerance.unwrap_or(DEFAULT_TOLERANCE);
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        Ok(tol)
    }

    fn load_spec(&self) -> Result<SystemSpec> {
        let path = self
            .spec_path
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("--spec is required".into()))?;
        let mut spec = SystemSpec::load(path)?;
        if let Some(unit) = self.units {
            spec.units.coupling = unit;
        }
        spec.validate()?;
        Ok(spec)
    }

    fn tau_grid(&self) -> Result<(Vec<f64>, String)> {
        if let Some(taus) = &self.taus {
            return Ok((taus.clone(), "explicit list".into()));
        }
        let (lo, hi, n) = match &self.tau_range {
            Some(text) => parse_tau_range(text)?,
            None => DEFAULT_TAU_RANGE,
        };
        Ok((log_grid(lo, hi, n)?, format!("{n} log-spaced points from {lo:e} s to {hi:e} s")))
    }
}

/// Parses `lo:hi:n`; a trailing `-log` or `log` on `n` is accepted.
pub fn parse_tau_range(text: &str) -> Result<(f64, f64, usize)> {
    let bad = || Error::InvalidArgument(format!("tau range must look like lo:hi:n, got {text:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count = parts[2].trim();
    let count = count.strip_suffix("-log").or_else(|| count.strip_suffix("log")).unwrap_or(count);
    let n: usize = count.parse().map_err(|_| bad())?;
    Ok((lo, hi, n))
}

fn load_state(path: &Path) -> Result<StateVector> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read state {}: {e}", path.display())))?;
    StateVector::from_json_str(&text)
}

fn state_json(state: &StateVector) -> Result<Value> {
    Ok(serde_json::from_str(&state.to_json_string()?)?)
}

/// Pretty JSON with a trailing newline.
fn to_json(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Result of one command: the main document plus any extra files.
#[derive(Debug, Default)]
pub struct Output {
    pub main: String,
    pub extra: Vec<(PathBuf, String)>,
    /// Messages for stderr.
    pub warnings: Vec<String>,
}

pub fn analyze_spec(spec: &SystemSpec, tol: f64, exec: Execution) -> Result<Value> {
    let closure = is_completely_controllable_with(spec, tol, exec)?;
    let conditions = all_reports(spec)?;
    let elimination = check_elimination(spec)?;
    let violations: Vec<String> = conditions
        .iter()
        .filter(|r| r.applicable && r.pass && !closure.controllable)
        .map(|r| format!("{:?} passes but the closure has dimension {}", r.condition_id, closure.dimension))
        .collect();
    Ok(json!({
        "levels": spec.levels,
        "dimension": spec.dimension(),
        "closure": closure.summary(),
        "conditions": conditions,
        "elimination": elimination,
        "consistency": {
            "sufficiency_violation": !violations.is_empty(),
            "details": violations,
        },
    }))
}

pub fn cmd_analyze(config: &RunConfig) -> Result<Output> {
    let spec = config.load_spec()?;
    let report = analyze_spec(&spec, config.tolerance()?, config.exec())?;
    Ok(Output {
        main: to_json(&report)?,
        ..Default::default()
    })
}

pub fn cmd_split(config: &RunConfig) -> Result<Output> {
    let spec = config.load_spec()?;
    let report = check_elimination(&spec)?;
    Ok(Output {
        main: to_json(&report)?,
        ..Default::default()
    })
}

fn sweep_metadata(
    config: &RunConfig,
    spec: &SystemSpec,
    grid: &str,
    options: &SweepOptions,
) -> Vec<String> {
    let mut meta = vec![
        "energies in eV, tau in seconds".to_string(),
        format!("tau grid: {grid}"),
        format!(
            "excitation couplings in {} (converted with 1 eV = 1.602176634e-19 J)",
            spec.units.coupling.label()
        ),
        format!("first-order coefficient variant: {:?}", options.variant).to_lowercase(),
    ];
    if options.with_exact {
        let dt = match options.dt_max {
            Some(v) => format!("{v:e} s"),
            None => "0.02 hbar / (E_N - E_1 + |He|_F)".into(),
        };
        meta.push(format!("exact column: RK4, step <= min(dt_max, tau/1000), dt_max = {dt}"));
    } else {
        meta.push("exact column not computed".into());
    }
    if config.benchmark.unwrap_or(false) {
        meta.push("two-level benchmark, E = [0, 1] eV, state (1/sqrt2, 1/2, 1/2)".into());
    }
    meta
}

fn sweep_options(config: &RunConfig) -> SweepOptions {
    SweepOptions {
        with_exact: config.with_exact.unwrap_or(false),
        variant: config.variant.unwrap_or_default(),
        dt_max: config.dt_max,
        exec: config.exec(),
    }
}

/// File name for one coupling of the reference sweep: `curve.csv` becomes
/// `curve_g1e-22.csv`.
pub fn benchmark_path(base: &Path, g: f64) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("fidelity");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}_g{g:e}.{ext}"))
}

pub fn cmd_fidelity(config: &RunConfig) -> Result<Output> {
    let (taus, grid) = config.tau_grid()?;
    let options = sweep_options(config);
    if config.benchmark.unwrap_or(false) {
        let base = config
            .output_path
            .clone()
            .ok_or_else(|| Error::InvalidArgument("--benchmark needs --out as the base file name".into()))?;
        let mut out = Output::default();
        let mut index = Vec::new();
        for g in REFERENCE_COUPLINGS_J {
            let (spec, state) = relaxation_benchmark(g);
            let curve = sweep_tau(&spec, &state, &taus, options)?;
            let mut meta = sweep_metadata(config, &spec, &grid, &options);
            meta.push(format!("g_11,21 = g_11,22 = {g:e} J"));
            let path = benchmark_path(&base, g);
            index.push(json!({"g_joules": g, "path": path}));
            out.extra.push((path, curve.to_csv(&meta)));
        }
        out.main = to_json(&json!({"curves": index}))?;
        return Ok(out);
    }
    let spec = config.load_spec()?;
    let state_path = config
        .state_path
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("--state is required (or use --benchmark)".into()))?;
    let state = load_state(state_path)?;
    let curve = sweep_tau(&spec, &state, &taus, options)?;
    Ok(Output {
        main: curve.to_csv(&sweep_metadata(config, &spec, &grid, &options)),
        ..Default::default()
    })
}

/// Path of the JSON summary written next to a schedule CSV.
pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

pub fn cmd_optimize(config: &RunConfig) -> Result<Output> {
    let spec = config.load_spec()?;
    let seed = config.seed.unwrap_or(DEFAULT_SEED);
    let initial = match &config.initial_path {
        Some(p) => load_state(p)?,
        None => StateVector::basis_state(spec.levels, LevelIndex::new(1, 1))?,
    };
    let target = match &config.target_path {
        Some(p) => load_state(p)?,
        None => {
            // decorrelated from the stream used for the initial amplitudes
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed7a_26e7);
            StateVector::random(spec.dimension(), &mut rng)?
        }
    };
    let mu = energy_gaps(&spec)?[0];
    let settings = OptimizerSettings {
        n_segments: config.segments.unwrap_or(DEFAULT_SEGMENTS),
        duration: config.duration.unwrap_or(DEFAULT_DURATION_GAPS * HBAR_EV_S / mu),
        iterations: config.iterations.unwrap_or(DEFAULT_ITERATIONS),
        seed,
        stop_fidelity: 0.9999,
        exec: config.exec(),
    };
    let closure = is_completely_controllable_with(&spec, config.tolerance()?, config.exec())?;
    let mut warnings = Vec::new();
    if !closure.controllable {
        warnings.push(format!(
            "system not completely controllable (closure dimension {} of {})",
            closure.dimension, closure.target_dimension
        ));
    }
    let schedule = optimize_pulse(&spec, &initial, &target, &settings)?;
    let summary = json!({
        "achieved_fidelity": schedule.achieved_fidelity,
        "segments": settings.n_segments,
        "duration": settings.duration,
        "iterations": settings.iterations,
        "seed": seed,
        "closure": closure.summary(),
        "initial": state_json(&initial)?,
        "target": state_json(&target)?,
        "warnings": warnings,
    });
    let meta = vec![
        "time in seconds, amplitude in eV (field multiplying the dipole Hamiltonian)".to_string(),
        format!("achieved fidelity {:.16e}", schedule.achieved_fidelity),
        format!("seed {seed}"),
    ];
    let csv = schedule.to_csv(&meta);
    let summary_text = to_json(&summary)?;
    let out = match &config.output_path {
        Some(path) => Output {
            main: csv,
            extra: vec![(summary_path(path), summary_text)],
            warnings,
        },
        None => Output {
            main: format!("{csv}\n{summary_text}"),
            extra: Vec::new(),
            warnings,
        },
    };
    Ok(out)
}

pub fn cmd_demo(config: &RunConfig) -> Result<Output> {
    let levels = config
        .levels
        .ok_or_else(|| Error::InvalidArgument("--levels is required".into()))?;
    if levels < 3 {
        return Err(Error::InvalidArgument(format!(
            "the explicit example is defined for N >= 3, got N = {levels}"
        )));
    }
    let spec = SystemSpec::equal_gap_example(levels)?;
    let report = analyze_spec(&spec, config.tolerance()?, config.exec())?;
    Ok(Output {
        main: to_json(&json!({"spec": spec, "report": report}))?,
        ..Default::default()
    })
}

pub fn execute(config: &RunConfig) -> Result<Output> {
    let command = config
        .command
        .ok_or_else(|| Error::InvalidArgument("no command given".into()))?;
    match command {
        Command::Analyze => cmd_analyze(config),
        Command::Split => cmd_split(config),
        Command::Fidelity => cmd_fidelity(config),
        Command::Optimize => cmd_optimize(config),
        Command::Demo => cmd_demo(config),
    }
}

/// Runs a command and writes its files. Returns the process exit code.
pub fn run(args: Args) -> i32 {
    let result = RunConfig::from_args(args).and_then(|config| {
        let output = execute(&config)?;
        for w in &output.warnings {
            eprintln!("warning: {w}");
        }
        for (path, text) in &output.extra {
            fs::write(path, text)?;
        }
        match &config.output_path {
            Some(path) if !(config.benchmark.unwrap_or(false)) => fs::write(path, &output.main)?,
            _ => print!("{}", output.main),
        }
        Ok(())
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_range_forms() {
        assert_eq!(parse_tau_range("1e-15:1e-11:5").unwrap(), (1e-15, 1e-11, 5));
        assert_eq!(parse_tau_range("1e-15:1e-11:5-log").unwrap(), (1e-15, 1e-11, 5));
        assert!(parse_tau_range("1e-15:1e-11").is_err());
        assert!(parse_tau_range("a:b:c").is_err());
    }

    #[test]
    fn config_is_strict() {
        assert!(RunConfig::from_json_str(r#"{"command": "analyze", "bogus": 1}"#).is_err());
        let c = RunConfig::from_json_str(r#"{"command": "demo", "levels": 3}"#).unwrap();
        assert_eq!(c.command, Some(Command::Demo));
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"command": "demo", "levels": 4, "seed": 7}"#).unwrap();
        let args = Args::parse_from(["qdctl", "--config", path.to_str().unwrap(), "--levels", "3"]);
        let c = RunConfig::from_args(args).unwrap();
        assert_eq!(c.levels, Some(3));
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.command, Some(Command::Demo));
    }

    #[test]
    fn benchmark_names() {
        assert_eq!(benchmark_path(Path::new("out/f.csv"), 1e-22), PathBuf::from("out/f_g1e-22.csv"));
    }

    #[test]
    fn demo_guards_small_systems() {
        let c = RunConfig {
            command: Some(Command::Demo),
            levels: Some(2),
            ..Default::default()
        };
        assert_eq!(execute(&c).unwrap_err().exit_code(), 2);
    }
}
