//! Command-line front end: `estimate`, `simulate`, `approx` and `selftest`.
//!
//! Configuration is a JSON document with `phi`, `estimator`, `experiment`,
//! `approx` and `io` stanzas; unknown keys are rejected and command-line
//! flags override file values. Exit codes: 0 success, 2 unparsable data,
//! 3 invalid configuration, 4 estimator failure.

use std::fmt;
use std::path::{Path, PathBuf};

use addfunc::error::Error;
use addfunc::estimators::{estimate, EstimatorConfig, FourthOrderScheme, Mode};
use addfunc::io::{parse_data, write_atomic};
use addfunc::poly::{remez_best_poly, PolyCache, Polynomial};
use addfunc::risk::{EstimatorSettings, Sweep};
use addfunc::sampling::Preset;
use addfunc::{PhiKind, PhiSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub mod selftest;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const ESTIMATOR: i32 = 4;
}

/// A failure with its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Config(String),
    #[error("{msg}")]
    Estimator { msg: String, detail: Option<String> },
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => exit::PARSE,
            CliError::Config(_) => exit::CONFIG,
            CliError::Estimator { .. } => exit::ESTIMATOR,
            CliError::Io(_) => exit::FAILURE,
        }
    }

    /// Classifies a library error raised while estimating.
    fn from_estimation(e: Error) -> Self {
        match e {
            Error::Parse { .. } => CliError::Parse(e.to_string()),
            Error::Config(_) | Error::UnknownPreset(_) | Error::InvalidDistribution(_) => {
                CliError::Config(e.to_string())
            }
            Error::Convergence { ref best, .. } => CliError::Estimator {
                msg: e.to_string(),
                detail: best.to_json().ok(),
            },
            Error::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Estimator {
                msg: e.to_string(),
                detail: None,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorStanza {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_c1")]
    pub c1: f64,
    #[serde(default = "default_c2")]
    pub c2: f64,
    #[serde(default)]
    pub strict_theory: bool,
    #[serde(default)]
    pub force: bool,
    #[serde(default)]
    pub scheme: FourthOrderScheme,
}

fn default_mode() -> Mode {
    Mode::Hybrid4
}
fn default_c1() -> f64 {
    EstimatorConfig::DEFAULT_C1
}
fn default_c2() -> f64 {
    EstimatorConfig::DEFAULT_C2
}

impl Default for EstimatorStanza {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            c1: default_c1(),
            c2: default_c2(),
            strict_theory: false,
            force: false,
            scheme: FourthOrderScheme::Corrected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentStanza {
    #[serde(default)]
    pub ns: Vec<u64>,
    #[serde(default)]
    pub ks: Vec<usize>,
    #[serde(default = "default_dists")]
    pub dists: Vec<Preset>,
    /// Defaults to the estimator stanza's mode.
    #[serde(default)]
    pub modes: Vec<Mode>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_dists() -> Vec<Preset> {
    vec![Preset::Uniform]
}
fn default_trials() -> usize {
    100
}

impl Default for ExperimentStanza {
    fn default() -> Self {
        Self {
            ns: Vec::new(),
            ks: Vec::new(),
            dists: default_dists(),
            modes: Vec::new(),
            trials: default_trials(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxStanza {
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_interval")]
    pub interval: [f64; 2],
}

fn default_degree() -> usize {
    1
}
fn default_interval() -> [f64; 2] {
    [0.0, 1.0]
}

impl Default for ApproxStanza {
    fn default() -> Self {
        Self {
            degree: default_degree(),
            interval: default_interval(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoStanza {
    #[serde(default)]
    pub data: Option<PathBuf>,
    /// Fixes the alphabet size of parsed data.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    /// Where `approx` writes the polynomial JSON.
    #[serde(default)]
    pub save: Option<PathBuf>,
}

/// The full effective configuration of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_phi")]
    pub phi: PhiKind,
    #[serde(default)]
    pub estimator: EstimatorStanza,
    #[serde(default)]
    pub experiment: ExperimentStanza,
    #[serde(default)]
    pub approx: ApproxStanza,
    #[serde(default)]
    pub io: IoStanza,
}

fn default_phi() -> PhiKind {
    PhiKind::Power { alpha: 1.2 }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            phi: default_phi(),
            estimator: EstimatorStanza::default(),
            experiment: ExperimentStanza::default(),
            approx: ApproxStanza::default(),
            io: IoStanza::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn spec(&self) -> CliResult<PhiSpec> {
        PhiSpec::from_kind(&self.phi).map_err(|e| CliError::Config(e.to_string()))
    }

    fn settings(&self) -> EstimatorSettings {
        EstimatorSettings {
            c1: self.estimator.c1,
            c2: self.estimator.c2,
            strict_theory: self.estimator.strict_theory,
            force: self.estimator.force,
            scheme: self.estimator.scheme,
        }
    }
}

/// Parses `power:1.2`, `neg_p_log_p`, or `poly:c0,c1,...[@alpha]`.
pub fn parse_phi(s: &str) -> Result<PhiKind, String> {
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));
    match name {
        "power" => rest
            .parse()
            .map(|alpha| PhiKind::Power { alpha })
            .map_err(|_| format!("invalid exponent in `{s}`")),
        "neg_p_log_p" | "entropy" if rest.is_empty() => Ok(PhiKind::NegPLogP),
        "poly" => {
            let (coeffs, alpha) = match rest.split_once('@') {
                Some((c, a)) => (c, a.parse().map_err(|_| format!("invalid alpha in `{s}`"))?),
                None => (rest, 2.0),
            };
            let coeffs = coeffs
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| format!("invalid coefficients in `{s}`"))?;
            Ok(PhiKind::Polynomial { coeffs, alpha })
        }
        _ => Err(format!("unknown φ `{s}`")),
    }
}

#[derive(Debug, Parser)]
#[command(name = "addfunc", version, about = "Estimate additive functionals of discrete distributions")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct GlobalArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub format: Option<Format>,
    /// φ, e.g. `power:1.2`, `neg_p_log_p`, `poly:0,0,1`.
    #[arg(long, global = true, value_parser = parse_phi)]
    pub phi: Option<PhiKind>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate θ from a histogram CSV or a samples file.
    Estimate {
        /// Data file (histogram CSV or one symbol index per line).
        data: Option<PathBuf>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
        #[arg(long)]
        k: Option<usize>,
        /// Run a hybrid mode outside its α range.
        #[arg(long)]
        force: bool,
    },
    /// Run a Monte Carlo risk sweep.
    Simulate {
        #[arg(long, value_delimiter = ',')]
        ns: Vec<u64>,
        #[arg(long, value_delimiter = ',')]
        ks: Vec<usize>,
        #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
        modes: Vec<Mode>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Best uniform polynomial approximation of φ.
    Approx {
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        /// Write the polynomial JSON here.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Loads the config file (if any) and applies flag overrides.
pub fn effective_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let g = &cli.global;
    if let Some(seed) = g.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(out) = &g.out {
        cfg.io.out = Some(out.clone());
    }
    if let Some(f) = g.format {
        cfg.io.format = f;
    }
    if let Some(phi) = &g.phi {
        cfg.phi = phi.clone();
    }
    match &cli.command {
        Command::Estimate { data, mode, k, force } => {
            if let Some(d) = data {
                cfg.io.data = Some(d.clone());
            }
            if let Some(m) = mode {
                cfg.estimator.mode = *m;
            }
            if k.is_some() {
                cfg.io.k = *k;
            }
            cfg.estimator.force |= force;
        }
        Command::Simulate { ns, ks, modes, trials } => {
            if !ns.is_empty() {
                cfg.experiment.ns = ns.clone();
            }
            if !ks.is_empty() {
                cfg.experiment.ks = ks.clone();
            }
            if !modes.is_empty() {
                cfg.experiment.modes = modes.clone();
            }
            if let Some(t) = trials {
                cfg.experiment.trials = *t;
            }
        }
        Command::Approx { degree, lo, hi, save } => {
            if let Some(d) = degree {
                cfg.approx.degree = *d;
            }
            if let Some(lo) = lo {
                cfg.approx.interval[0] = *lo;
            }
            if let Some(hi) = hi {
                cfg.approx.interval[1] = *hi;
            }
            if save.is_some() {
                cfg.io.save = save.clone();
            }
        }
        Command::Selftest => {}
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    config: &'a RunConfig,
    result: &'a addfunc::EstimateResult,
}

/// Estimates θ from `cfg.io.data`; returns the text to print.
pub fn cmd_estimate(cfg: &RunConfig) -> CliResult<String> {
    let spec = cfg.spec()?;
    let path = cfg
        .io
        .data
        .as_ref()
        .ok_or_else(|| CliError::Config("estimate needs a data file".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read data {}: {e}", path.display())))?;
    let hist = parse_data(&text, cfg.io.k).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let est_cfg = cfg.settings().config(cfg.estimator.mode, hist.total(), hist.k());
    let result = estimate(&spec, &hist, &est_cfg, cfg.experiment.seed).map_err(CliError::from_estimation)?;
    Ok(match cfg.io.format {
        Format::Json => serde_json::to_string_pretty(&EstimateOutput { config: cfg, result: &result })
            .expect("result serializes"),
        Format::Csv => {
            let mut out = format!("# config: {}\n", cfg.to_json());
            out.push_str("value,mode,n,k,delta_count,degree,plugin_symbols,poly_symbols\n");
            out.push_str(&format!(
                "{:e},{},{},{},{:e},{},{},{}\n",
                result.value,
                result.mode,
                result.n,
                result.k,
                result.delta_count,
                result.degree,
                result.branch_counts.plugin,
                result.branch_counts.poly
            ));
            for w in &result.warnings {
                out.push_str(&format!("# warning: {w}\n"));
            }
            out
        }
    })
}

pub const RISK_CSV: &str = "risk.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const PLOT_DATA: &str = "plot.dat";

/// Runs the configured sweep, writes `risk.csv`, `summary.json` and
/// `plot.dat` under `cfg.io.out` (default `.`), and returns the CSV or the
/// summary according to the format. The echoed config omits `io.out`.
pub fn cmd_simulate(cfg: &RunConfig) -> CliResult<String> {
    let spec = cfg.spec()?;
    let modes = if cfg.experiment.modes.is_empty() {
        vec![cfg.estimator.mode]
    } else {
        cfg.experiment.modes.clone()
    };
    let sweep = Sweep {
        ns: cfg.experiment.ns.clone(),
        ks: cfg.experiment.ks.clone(),
        dists: cfg.experiment.dists.clone(),
        modes,
        trials: cfg.experiment.trials,
        seed: cfg.experiment.seed,
        settings: cfg.settings(),
    };
    sweep.validate().map_err(|e| CliError::Config(e.to_string()))?;
    // The echo omits the destination so reruns elsewhere stay byte-identical.
    let mut echo = cfg.clone();
    echo.io.out = None;
    let cache = PolyCache::from_env();
    let report = sweep
        .run(&spec, &echo.to_json(), cache.as_ref())
        .map_err(CliError::from_estimation)?;
    eprintln!("simulate: {} cells in {:.2} s", report.cells.len(), report.wall_clock_s);
    for c in report.cells.iter().filter(|c| c.failure.is_some()) {
        eprintln!(
            "cell n={} k={} dist={} mode={} failed: {}",
            c.n,
            c.k,
            c.dist,
            c.mode,
            c.failure.as_deref().unwrap_or_default()
        );
    }
    let csv = report.to_csv();
    let summary = report.summary_json().map_err(|e| CliError::Io(e.to_string()))?;
    let dir = cfg.io.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    for (name, body) in [(RISK_CSV, &csv), (SUMMARY_JSON, &summary), (PLOT_DATA, &report.plot_data())] {
        write_atomic(&dir.join(name), body.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;
    }
    if report.all_failed() {
        return Err(CliError::Estimator {
            msg: "every cell failed".into(),
            detail: None,
        });
    }
    Ok(match cfg.io.format {
        Format::Csv => csv,
        Format::Json => summary,
    })
}

#[derive(Serialize)]
struct ApproxOutput<'a> {
    config: &'a RunConfig,
    polynomial: &'a Polynomial,
}

/// Best polynomial approximation of φ on the configured interval.
pub fn cmd_approx(cfg: &RunConfig) -> CliResult<String> {
    let spec = cfg.spec()?;
    let [lo, hi] = cfg.approx.interval;
    let poly = remez_best_poly(&spec, cfg.approx.degree, lo, hi).map_err(|e| match e {
        Error::Domain(_) => CliError::Config(e.to_string()),
        other => CliError::from_estimation(other),
    })?;
    if let Some(cache) = PolyCache::from_env() {
        cache.store(&spec.id(), &poly).map_err(|e| CliError::Io(e.to_string()))?;
    }
    if let Some(path) = &cfg.io.save {
        let json = poly.to_json().map_err(|e| CliError::Io(e.to_string()))?;
        write_atomic(path, json.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(match cfg.io.format {
        Format::Json => serde_json::to_string_pretty(&ApproxOutput {
            config: cfg,
            polynomial: &poly,
        })
        .expect("polynomial serializes"),
        Format::Csv => {
            let mut out = format!("# config: {}\n# sup_error: {:e}\n", cfg.to_json(), poly.sup_error);
            out.push_str("power,coefficient\n");
            for (m, a) in poly.coeffs.iter().enumerate() {
                out.push_str(&format!("{m},{a:e}\n"));
            }
            out.push_str("# alternation x,error\n");
            for p in &poly.certificate {
                out.push_str(&format!("# {:e},{:e}\n", p.x, p.error));
            }
            out
        }
    })
}

/// Runs a parsed command line; returns the exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return exit::CONFIG;
        }
        // A global pool may already exist when embedded; that is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let cfg = match effective_config(&cli) {
        Ok(c) => c,
        Err(e) => return report(e),
    };
    let outcome = match cli.command {
        Command::Estimate { .. } => cmd_estimate(&cfg),
        Command::Simulate { .. } => cmd_simulate(&cfg),
        Command::Approx { .. } => cmd_approx(&cfg),
        Command::Selftest => {
            let (text, ok) = selftest::run();
            print!("{text}");
            return if ok { exit::OK } else { exit::ESTIMATOR };
        }
    };
    match outcome {
        Ok(text) => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            exit::OK
        }
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> i32 {
    eprintln!("error: {e}");
    if let CliError::Estimator { detail: Some(d), .. } = &e {
        eprintln!("best iterate:\n{d}");
    }
    e.exit_code()
}
