//! Command-line surface. Every command validates its inputs and computes its
//! results in memory before anything is written, so a failing command leaves
//! no partial outputs behind.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::analysis::{
    angular_test, birthday_oracle, born_density_test, discrete_region_test, kinematics_checks, linear_relative_error,
    oracle_spots, overlap_fraction_exact, overlap_fraction_linear, Binning, SectionConvention,
};
use crate::collapse::{ensemble_run, ensemble_until_registered, Constants, CoverageMode, ScanPolicy};
use crate::config::{ConfigError, FieldSpec, ScenarioConfig};
use crate::io::{fmt_f64, read_spots, write_spots};
use crate::legacy_grid::{legacy_buildup, GridConfig, GridPattern, LegacyError};
use crate::phases::{parse_seed, stream_tags, SeededStream};
use crate::scenarios::{build_field, instantiate, run_wigner_chain, AngularDensity, ScenarioError, WignerParams};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_PRECONDITION: u8 = 3;
pub const EXIT_BUDGET: u8 = 4;

/// Manifest keys that record wall-clock time; everything else in a manifest
/// is a function of the command line and the inputs.
pub const TIMESTAMP_KEYS: [&str; 2] = ["started_unix_ms", "finished_unix_ms"];

#[derive(Debug, Parser)]
#[command(name = "phase-collapse", version, about = "Collapse simulations driven by pseudorandom phase constants")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an ensemble of trials for a scenario file.
    Run(RunArgs),
    /// Grid build-up with the threshold acceptance rule.
    Legacy(LegacyArgs),
    /// Statistical report on a spots file.
    Analyze(AnalyzeArgs),
    /// Occupancy table: exact, linear and Monte-Carlo overlap fractions.
    Appendix(AppendixArgs),
    /// Chain of Stern-Gerlach apparatuses with alternating axes.
    Wigner(WignerArgs),
    /// Closed-form wavepacket and momentum-spread checks.
    Kinematics(KinematicsArgs),
    /// Spots drawn directly from |ψ|² by inverse-CDF sampling.
    Sample(SampleArgs),
}

fn seed_arg(s: &str) -> Result<u64, String> {
    parse_seed(s).map_err(|e| format!("invalid seed {s:?}: {e}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Continue,
    Stop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CoverageArg {
    Pointwise,
    Exact,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub scenario: PathBuf,
    #[arg(long)]
    pub trials: u64,
    #[arg(long, value_parser = seed_arg)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub scan_policy: Option<PolicyArg>,
    #[arg(long, value_enum)]
    pub coverage: Option<CoverageArg>,
    /// Stop after this many registered spots; `--trials` becomes the budget.
    #[arg(long)]
    pub registered: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PatternArg {
    Uniform,
    DoubleSlit,
}

#[derive(Debug, Args)]
pub struct LegacyArgs {
    #[arg(long, default_value_t = 400)]
    pub nx: usize,
    #[arg(long, default_value_t = 200)]
    pub nz: usize,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long)]
    pub points: usize,
    #[arg(long, value_parser = seed_arg)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = PatternArg::DoubleSlit)]
    pub pattern: PatternArg,
    /// Fringe periods across the grid (double-slit pattern).
    #[arg(long, default_value_t = 8.0)]
    pub fringes: f64,
    /// Distance of the first envelope zero from the centre, in grid widths
    /// (0 disables the envelope).
    #[arg(long, default_value_t = 0.0)]
    pub envelope: f64,
    #[arg(long, default_value_t = 100_000_000)]
    pub max_draws: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportArg {
    Born,
    Regions,
    Angular,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub spots: PathBuf,
    pub scenario: PathBuf,
    #[arg(long, value_enum)]
    pub report: ReportArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    /// Registered spots required per bin by the born report.
    #[arg(long, default_value_t = 10)]
    pub min_per_bin: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Sections,
    AlphaS,
}

#[derive(Debug, Args)]
pub struct AppendixArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,1,10,90,500")]
    pub n_list: Vec<u64>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, value_parser = seed_arg)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ConventionArg::Sections)]
    pub convention: ConventionArg,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct WignerArgs {
    #[arg(long, default_value_t = 10)]
    pub stages: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    #[arg(long, value_parser = seed_arg)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct KinematicsArgs {
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    pub scenario: PathBuf,
    #[arg(long)]
    pub spots: usize,
    #[arg(long, value_parser = seed_arg)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure of a command, mapped onto the exit codes.
#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Precondition(String),
    Budget(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Precondition(_) => EXIT_PRECONDITION,
            CliError::Budget(_) => EXIT_BUDGET,
            CliError::Io(_) => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) | CliError::Precondition(m) | CliError::Budget(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Parse(_) => CliError::Parse(e.to_string()),
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            ConfigError::Precondition { .. } => CliError::Precondition(e.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Config(c) => c.into(),
            other => CliError::Precondition(other.to_string()),
        }
    }
}

fn precondition(e: impl fmt::Display) -> CliError {
    CliError::Precondition(e.to_string())
}

/// Files produced by a command, written only once all of them are ready.
#[derive(Default)]
pub struct Outputs {
    files: BTreeMap<String, Vec<u8>>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.insert(name.into(), bytes);
    }

    pub fn add_json(&mut self, name: &str, value: &impl Serialize) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
        bytes.push(b'\n');
        self.add(name, bytes);
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.files.keys()
    }

    /// Writes all files plus `manifest.json` under `out`. Each file goes
    /// through a temporary name so that readers never see a torn file.
    fn commit(mut self, out: &Path, mut manifest: Value, started: u128) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", out.display()));
        let hashes: BTreeMap<&String, String> = self
            .files
            .iter()
            .map(|(k, v)| (k, hex::encode(Sha256::digest(v))))
            .collect();
        manifest["outputs"] = json!(hashes);
        manifest["tool_version"] = json!(env!("CARGO_PKG_VERSION"));
        manifest[TIMESTAMP_KEYS[0]] = json!(started);
        manifest[TIMESTAMP_KEYS[1]] = json!(now_ms());
        self.add_json("manifest.json", &manifest);
        fs::create_dir_all(out).map_err(io)?;
        for (name, bytes) in &self.files {
            let path = out.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(io)?;
            }
            let tmp = path.with_extension("partial");
            fs::write(&tmp, bytes).map_err(io)?;
            fs::rename(&tmp, &path).map_err(io)?;
        }
        Ok(())
    }
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

fn load_scenario(path: &Path) -> Result<ScenarioConfig, CliError> {
    let (config, _) = ScenarioConfig::load(path)?;
    config.validate()?;
    Ok(config)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    let started = now_ms();
    let (out, outputs, manifest) = match command {
        Command::Run(a) => cmd_run(a)?,
        Command::Legacy(a) => cmd_legacy(a)?,
        Command::Analyze(a) => cmd_analyze(a)?,
        Command::Appendix(a) => cmd_appendix(a)?,
        Command::Wigner(a) => cmd_wigner(a)?,
        Command::Kinematics(a) => cmd_kinematics(a)?,
        Command::Sample(a) => cmd_sample(a)?,
    };
    outputs.commit(&out, manifest, started)
}

type Prepared = (PathBuf, Outputs, Value);

fn cmd_run(a: RunArgs) -> Result<Prepared, CliError> {
    let mut config = load_scenario(&a.scenario)?;
    if let Some(p) = a.scan_policy {
        config.run.scan_policy = match p {
            PolicyArg::Continue => ScanPolicy::Continue,
            PolicyArg::Stop => ScanPolicy::StopAtFirstMatch,
        };
    }
    if let Some(c) = a.coverage {
        config.run.coverage = match c {
            CoverageArg::Pointwise => CoverageMode::Pointwise,
            CoverageArg::Exact => CoverageMode::Exact,
        };
    }
    if a.trials == 0 {
        return Err(CliError::Precondition("--trials must be at least 1".into()));
    }
    if a.threads == Some(0) {
        return Err(CliError::Precondition("--threads must be at least 1".into()));
    }
    let scenario = instantiate(&config, a.seed)?;
    let result = match a.registered {
        None => ensemble_run(&scenario.apparatus, a.trials, a.seed, a.threads),
        Some(target) => ensemble_until_registered(&scenario.apparatus, target, a.trials, a.seed, a.threads),
    }
    .map_err(precondition)?;
    if let Some(target) = a.registered {
        if result.summary.registered < target {
            return Err(CliError::Budget(format!(
                "--trials budget of {} exhausted with {} of {target} registered spots",
                a.trials, result.summary.registered
            )));
        }
    }
    let mut spots = Vec::new();
    write_spots(&mut spots, &result.records).map_err(|e| CliError::Io(e.to_string()))?;
    let mut outputs = Outputs::default();
    outputs.add("spots.csv", spots);
    outputs.add_json(
        "summary.json",
        &json!({
            "scenario": config.name,
            "config_digest": config.digest(),
            "master_seed": a.seed,
            "run": config.run,
            "constants": scenario.apparatus.constants(),
            "ensemble": result.summary,
        }),
    );
    let manifest = json!({
        "command": "run",
        "config_digest": config.digest(),
        "master_seed": a.seed,
        "trials": a.trials,
        "registered_target": a.registered,
        "run": config.run,
    });
    Ok((a.out, outputs, manifest))
}

fn cmd_legacy(a: LegacyArgs) -> Result<Prepared, CliError> {
    if a.points == 0 {
        return Err(CliError::Precondition("--points must be at least 1".into()));
    }
    let pattern = match a.pattern {
        PatternArg::Uniform => GridPattern::Uniform,
        PatternArg::DoubleSlit => GridPattern::DoubleSlit {
            fringes: a.fringes,
            envelope: a.envelope,
        },
    };
    let mut config = GridConfig::new(a.nx, a.nz, a.eta, &pattern);
    config.max_draws = a.max_draws;
    let mut stream = SeededStream::new(a.seed, 0).substream(stream_tags::LEGACY);
    let buildup = legacy_buildup(&config, &mut stream, a.points).map_err(|e| match e {
        LegacyError::DrawBudget { .. } => CliError::Budget(format!(
            "{e}; with eta = {} no point is ever set unless eta·|ψ|²/|ψ|²max can reach R",
            a.eta
        )),
        other => precondition(other),
    })?;
    let mut outputs = Outputs::default();
    let mut points = Vec::new();
    buildup
        .write_points_csv(&mut points, buildup.cells.len())
        .map_err(|e| CliError::Io(e.to_string()))?;
    outputs.add("points.csv", points);
    for f in &buildup.frames {
        let mut pgm = Vec::new();
        let mut csv = Vec::new();
        buildup.write_pgm(&mut pgm, f.points).map_err(|e| CliError::Io(e.to_string()))?;
        buildup.write_points_csv(&mut csv, f.points).map_err(|e| CliError::Io(e.to_string()))?;
        outputs.add(format!("frames/frame_{:09}.pgm", f.milestone), pgm);
        outputs.add(format!("frames/frame_{:09}.csv", f.milestone), csv);
    }
    outputs.add_json(
        "summary.json",
        &json!({
            "nx": a.nx,
            "nz": a.nz,
            "eta": a.eta,
            "pattern": pattern,
            "points": buildup.cells.len(),
            "draws": buildup.draws,
            "acceptance_rate": buildup.cells.len() as f64 / buildup.draws as f64,
            "frames": buildup.frames,
        }),
    );
    let manifest = json!({
        "command": "legacy",
        "config_digest": Value::Null,
        "master_seed": a.seed,
        "nx": a.nx,
        "nz": a.nz,
        "eta": a.eta,
        "points": a.points,
        "pattern": pattern,
        "max_draws": a.max_draws,
    });
    Ok((a.out, outputs, manifest))
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<Prepared, CliError> {
    let config = load_scenario(&a.scenario)?;
    let text = fs::read(&a.spots).map_err(|e| CliError::Io(format!("{}: {e}", a.spots.display())))?;
    let spots = read_spots(text.as_slice()).map_err(|e| CliError::Parse(e.to_string()))?;
    let mut outputs = Outputs::default();
    let report = match a.report {
        ReportArg::Born => {
            let (psi, _, _) = build_field(&config)?;
            let r = born_density_test(&spots, &psi, Binning::EqualProbability(a.bins), a.min_per_bin)
                .map_err(precondition)?;
            outputs.add("histogram.csv", r.histogram_csv().into_bytes());
            json!({ "report": "born", "binning": "equal_probability", "requested_bins": a.bins, "gof": r })
        }
        ReportArg::Regions => {
            let Some(region_map) = &config.region_map else {
                return Err(CliError::Precondition(
                    "region_map: the regions report needs a region_map in the scenario".into(),
                ));
            };
            let regions: Vec<_> = region_map
                .iter()
                .map(|r| crate::analysis::Region {
                    label: r.label.clone(),
                    rect: r.window().rect(),
                })
                .collect();
            let (psi, _, _) = build_field(&config)?;
            let coefficients: Vec<_> = crate::scenarios::region_probabilities(&psi, &regions)
                .into_iter()
                .map(|p| num_complex::Complex::new(p.sqrt(), 0.0))
                .collect();
            let r = discrete_region_test(&spots, &regions, &coefficients).map_err(precondition)?;
            outputs.add("histogram.csv", r.gof.histogram_csv().into_bytes());
            json!({ "report": "regions", "within_3_sigma": r.within_sigmas(3.0), "result": r })
        }
        ReportArg::Angular => {
            let FieldSpec::ScatteringShell {
                ref amplitude,
                measure,
                theta_min,
                theta_max,
                ..
            } = config.field
            else {
                return Err(CliError::Precondition(
                    "field.kind: the angular report needs a scattering_shell scenario".into(),
                ));
            };
            let density =
                AngularDensity::new(amplitude.clone(), measure, (theta_min, theta_max)).map_err(precondition)?;
            let r = angular_test(&spots, |t| density.eval(t), density.range, a.bins).map_err(precondition)?;
            outputs.add("histogram.csv", r.histogram_csv().into_bytes());
            json!({ "report": "angular", "gof": r })
        }
    };
    outputs.add_json("report.json", &report);
    let spots_digest = hex::encode(Sha256::digest(&text));
    let manifest = json!({
        "command": "analyze",
        "config_digest": config.digest(),
        "spots_digest": spots_digest,
        "master_seed": Value::Null,
        "report": format!("{:?}", a.report).to_lowercase(),
        "bins": a.bins,
    });
    Ok((a.out, outputs, manifest))
}

fn cmd_appendix(a: AppendixArgs) -> Result<Prepared, CliError> {
    if a.trials == 0 {
        return Err(CliError::Precondition("--trials must be at least 1".into()));
    }
    let constants = Constants::<f64>::rounded();
    let convention = match a.convention {
        ConventionArg::Sections => SectionConvention::Sections,
        ConventionArg::AlphaS => SectionConvention::AlphaS,
    };
    let root = SeededStream::new(a.seed, 0);
    let rows: Vec<(u64, f64, f64, f64, f64, f64)> = crate::collapse::in_pool(a.threads, || {
        a.n_list
            .iter()
            .map(|&n| {
                let exact = overlap_fraction_exact(n, &constants);
                let linear = overlap_fraction_linear(n, &constants, convention);
                let est = birthday_oracle(constants.sections, n, a.trials, &root.substream(n));
                let rel = linear_relative_error(n, &constants, convention);
                (n, exact, linear, est.mean_occupied_fraction, est.std_error, rel)
            })
            .collect()
    })
    .map_err(precondition)?;
    let mut table = String::from("n,exact,linear,empirical,rel_err\n");
    for &(n, exact, linear, emp, _, rel) in &rows {
        table.push_str(&format!(
            "{n},{},{},{},{}\n",
            fmt_f64(exact),
            fmt_f64(linear),
            fmt_f64(emp),
            fmt_f64(rel)
        ));
    }
    let crossing = (1..10_000u64).find(|&n| linear_relative_error(n, &constants, convention) > 0.05);
    let mut outputs = Outputs::default();
    outputs.add("appendix.csv", table.into_bytes());
    outputs.add_json(
        "summary.json",
        &json!({
            "sections": constants.sections,
            "c1": constants.c1,
            "convention": convention,
            "trials": a.trials,
            "first_n_above_5_percent": crossing,
            "std_errors": rows.iter().map(|r| json!({ "n": r.0, "std_error": r.4 })).collect::<Vec<_>>(),
        }),
    );
    let manifest = json!({
        "command": "appendix",
        "config_digest": Value::Null,
        "master_seed": a.seed,
        "n_list": a.n_list,
        "trials": a.trials,
        "convention": convention,
    });
    Ok((a.out, outputs, manifest))
}

fn cmd_wigner(a: WignerArgs) -> Result<Prepared, CliError> {
    if a.threads == Some(0) {
        return Err(CliError::Precondition("--threads must be at least 1".into()));
    }
    let params = WignerParams {
        stages: a.stages,
        trials: a.trials,
        theta: a.theta,
        ..WignerParams::default()
    };
    let report = run_wigner_chain(&params, a.seed, a.threads)?;
    let mut seq = String::from("trial,");
    seq.push_str(&(1..=a.stages).map(|s| format!("stage{s}")).collect::<Vec<_>>().join(","));
    seq.push('\n');
    for (t, s) in report.sequences.iter().enumerate() {
        let cells: Vec<String> = (0..a.stages)
            .map(|k| s.get(k).map_or(String::new(), |o| o.to_string()))
            .collect();
        seq.push_str(&format!("{t},{}\n", cells.join(",")));
    }
    let mut outputs = Outputs::default();
    outputs.add("sequences.csv", seq.into_bytes());
    outputs.add_json(
        "summary.json",
        &json!({
            "params": report.params,
            "master_seed": a.seed,
            "stages": report.stages,
            "discarded_phases": report.discarded_phases,
            "lost": report.lost,
        }),
    );
    let manifest = json!({
        "command": "wigner",
        "config_digest": Value::Null,
        "master_seed": a.seed,
        "params": params,
    });
    Ok((a.out, outputs, manifest))
}

fn cmd_kinematics(a: KinematicsArgs) -> Result<Prepared, CliError> {
    let report = kinematics_checks();
    let mut outputs = Outputs::default();
    outputs.add_json("report.json", &report);
    let manifest = json!({ "command": "kinematics", "config_digest": Value::Null, "master_seed": Value::Null });
    Ok((a.out, outputs, manifest))
}

fn cmd_sample(a: SampleArgs) -> Result<Prepared, CliError> {
    let config = load_scenario(&a.scenario)?;
    let (psi, _, _) = build_field(&config)?;
    let mut stream = SeededStream::new(a.seed, 0).substream(stream_tags::PACKET_PHASES);
    let spots = oracle_spots(&psi, a.spots, &mut stream);
    let mut bytes = Vec::new();
    write_spots(&mut bytes, &spots).map_err(|e| CliError::Io(e.to_string()))?;
    let mut outputs = Outputs::default();
    outputs.add("spots.csv", bytes);
    let manifest = json!({
        "command": "sample",
        "config_digest": config.digest(),
        "master_seed": a.seed,
        "spots": a.spots,
    });
    Ok((a.out, outputs, manifest))
}

/// Manifest with the wall-clock fields removed.
pub fn manifest_without_timestamps(manifest: &str) -> Result<Value, serde_json::Error> {
    let mut v: Value = serde_json::from_str(manifest)?;
    if let Some(map) = v.as_object_mut() {
        for k in TIMESTAMP_KEYS {
            map.remove(k);
        }
    }
    Ok(v)
}
