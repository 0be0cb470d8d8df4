//! Command-line front end and result files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hamming_bootstrap::montecarlo::{
    self, c_name, diff_name, i_name, ExperimentConfig, Intensity, OracleSuite, RunOptions, Summary,
    SweepParam, TrialResult,
};
use hamming_bootstrap::theory::{self, CriticalScaling};
use hamming_bootstrap::{CountMode, Dimensions};
use serde::{Deserialize, Serialize};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Header of the per-trial CSV. `I_2j`/`C_2j` refer to dimension `2j` of the run.
pub const TRIALS_HEADER: [&str; 10] = [
    "trial_index",
    "m",
    "Y_exact",
    "Y_maximal",
    "I_2j",
    "C_2j",
    "I_d",
    "max_dim",
    "truncated",
    "ms",
];

/// Header of the sweep trend table.
pub const SWEEP_HEADER: [&str; 26] = [
    "param",
    "value",
    "status",
    "n",
    "p",
    "trials",
    "mean_m",
    "I_2j",
    "I_2j_lo",
    "I_2j_hi",
    "C_2j",
    "C_2j_lo",
    "C_2j_hi",
    "C_2j_minus_I_2j",
    "C_2j_minus_I_2j_lo",
    "C_2j_minus_I_2j_hi",
    "I_d",
    "I_d_lo",
    "I_d_hi",
    "lambda_hat",
    "lambda_hat_se",
    "lambda",
    "predicted_limit",
    "tv_Y_vs_poisson",
    "tv_Y_vs_poisson_se",
    "message",
];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Budget(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io { .. } => 1,
            CliError::Budget(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl From<hamming_bootstrap::Error> for CliError {
    fn from(e: hamming_bootstrap::Error) -> Self {
        if e.is_budget() {
            CliError::Budget(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hbp",
    version,
    about = "Threshold-2 bootstrap percolation on the Hamming torus"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the critical scaling and Poisson limit for (d, j, a).
    Theory {
        #[arg(long)]
        d: usize,
        /// Defaults to the largest j with j(j+1) < d.
        #[arg(long)]
        j: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
    },
    /// Run a Monte Carlo experiment.
    Simulate(SimArgs),
    /// Run a self-verification suite.
    Verify(VerifyArgs),
    /// Repeat an experiment across values of n or a.
    Sweep {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_enum)]
        param: ParamArg,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParamArg {
    N,
    A,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Maximal,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimArgs {
    /// JSON experiment config; flags given alongside override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub j: Option<usize>,
    #[arg(long, conflicts_with = "p")]
    pub a: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub theta: Option<u32>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_delimiter = ',')]
    pub record_dims: Option<Vec<usize>>,
    /// Output prefix; without it the summary goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Record per-trial wall time in the `ms` column.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: SuiteArg,
    /// Required by the randomized suites.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Randomized cases for the oracle and property suites.
    #[arg(long, default_value_t = 1000)]
    pub cases: usize,
    /// Torus sizes for the perfect suite.
    #[arg(long, value_delimiter = ',', default_values_t = [2u32, 3, 4, 5])]
    pub n: Vec<u32>,
    /// Half-dimensions for the perfect suite.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize])]
    pub i: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Oracle,
    Properties,
    Perfect,
}

impl SimArgs {
    /// Builds the experiment config from `--config` and the flags.
    pub fn to_config(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => Some(read_config(path)?),
            None => None,
        };
        if let Some(c) = &mut cfg {
            if self.d.is_some() || self.n.is_some() {
                let d = self.d.unwrap_or(c.dims.d());
                let n = self.n.unwrap_or(c.dims.n());
                c.dims = Dimensions::new(d, n)?;
            }
            if let Some(j) = self.j {
                c.j = j;
            }
            if let Some(a) = self.a {
                c.intensity = Intensity::Amplitude(a);
            }
            if let Some(p) = self.p {
                c.intensity = Intensity::P(p);
            }
            if let Some(t) = self.trials {
                c.trials = t;
            }
            if let Some(s) = self.seed {
                c.master_seed = s;
            }
        }
        let mut cfg = match cfg {
            Some(c) => c,
            None => {
                let need = |what: &str| {
                    CliError::Validation(format!("--{what} is required without --config"))
                };
                let d = self.d.ok_or_else(|| need("d"))?;
                let n = self.n.ok_or_else(|| need("n"))?;
                let dims = Dimensions::new(d, n)?;
                let j = match self.j {
                    Some(j) => j,
                    None => theory::j_of(d)?,
                };
                let intensity = match (self.a, self.p) {
                    (Some(a), None) => Intensity::Amplitude(a),
                    (None, Some(p)) => Intensity::P(p),
                    _ => return Err(need("a or --p")),
                };
                let seed = self.seed.ok_or_else(|| need("seed"))?;
                ExperimentConfig::new(dims, j, intensity, self.trials.unwrap_or(1000), seed)
            }
        };
        if let Some(t) = self.theta {
            cfg.theta = t;
        }
        if let Some(m) = self.mode {
            cfg.mode = match m {
                ModeArg::Exact => CountMode::Exact,
                ModeArg::Maximal => CountMode::Maximal,
            };
        }
        if let Some(r) = &self.record_dims {
            cfg.record_dims = r.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            workers: self.workers,
            record_timings: self.timings,
        }
    }
}

pub fn read_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub d: usize,
    pub j_max: usize,
    pub j: usize,
    pub a: f64,
    pub lambda: f64,
    /// `(numerator, denominator)` of `d/(j+1) + j`.
    pub exponent: (u64, u64),
    pub predicted_limit: f64,
}

pub fn cmd_theory(d: usize, j: Option<usize>, a: f64) -> CliResult<TheoryReport> {
    let j_max = theory::j_of(d)?;
    let j = j.unwrap_or(j_max);
    let scaling = CriticalScaling::new(j, d, a)?;
    let exponent = scaling.exponent();
    let prediction = scaling.prediction();
    Ok(TheoryReport {
        d,
        j_max,
        j,
        a,
        lambda: prediction.lambda,
        exponent: (exponent.num, exponent.den),
        predicted_limit: prediction.limit_prob,
    })
}

impl std::fmt::Display for TheoryReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (num, den) = self.exponent;
        writeln!(f, "d                  {}", self.d)?;
        writeln!(f, "J_d                {}", self.j_max)?;
        writeln!(f, "j                  {}", self.j)?;
        writeln!(f, "a                  {}", self.a)?;
        writeln!(f, "lambda             {}", self.lambda)?;
        if den == 1 {
            writeln!(f, "exponent           {num}")?;
        } else {
            writeln!(
                f,
                "exponent           {num}/{den} = {}",
                num as f64 / den as f64
            )?;
        }
        write!(
            f,
            "limit P(I_{})       {}",
            2 * self.j,
            self.predicted_limit
        )
    }
}

/// Provenance of one simulate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub started_at: String,
    pub finished_at: String,
    pub master_seed: u64,
    pub trials: u64,
}

fn now_rfc3339() -> String {
    OffsetDateTime::now_utc()
        .format(&Rfc3339)
        .unwrap_or_else(|_| String::from("unknown"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutcome {
    pub manifest: RunManifest,
    pub summary: Summary,
    pub trials: Vec<TrialResult>,
    /// Files written, in order: manifest, summary, trials.
    pub files: Vec<PathBuf>,
}

pub fn output_paths(prefix: &Path) -> [PathBuf; 3] {
    let with = |suffix: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    [
        with(".manifest.json"),
        with(".summary.json"),
        with(".trials.csv"),
    ]
}

/// Runs `cfg`; with a prefix, writes the manifest, summary and trial files.
pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    opts: RunOptions,
    out: Option<&Path>,
) -> CliResult<SimulateOutcome> {
    cfg.validate()?;
    let started_at = now_rfc3339();
    let output = montecarlo::run_experiment(cfg, opts)?;
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.into(),
        config: cfg.clone(),
        started_at,
        finished_at: now_rfc3339(),
        master_seed: cfg.master_seed,
        trials: cfg.trials,
    };
    let mut files = Vec::new();
    if let Some(prefix) = out {
        let [m, s, t] = output_paths(prefix);
        write_file(&m, &to_json(&manifest)?)?;
        write_file(&s, &to_json(&output.summary)?)?;
        write_file(&t, &trials_csv(cfg, &output.trials)?)?;
        files = vec![m, s, t];
    }
    Ok(SimulateOutcome {
        manifest,
        summary: output.summary,
        trials: output.trials,
        files,
    })
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Validation(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Validation(format!("csv: {e}"))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> CliResult<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Validation(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::Validation(e.to_string()))
}

/// Per-trial CSV with header [`TRIALS_HEADER`].
pub fn trials_csv(cfg: &ExperimentConfig, trials: &[TrialResult]) -> CliResult<String> {
    let two_j = 2 * cfg.j;
    let d = cfg.dims.d();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRIALS_HEADER).map_err(csv_err)?;
    for r in trials {
        let y = r.y_at(two_j);
        let flag = |dim: usize, spanned: bool| {
            r.event(dim)
                .map(|e| bit(if spanned { e.spanned } else { e.open }))
                .unwrap_or("")
        };
        w.write_record([
            r.trial_index.to_string(),
            r.seed_count.to_string(),
            opt(y.and_then(|y| y.exact)),
            opt(y.map(|y| y.maximal)),
            flag(two_j, true).into(),
            flag(two_j, false).into(),
            flag(d, true).into(),
            opt(r.max_open_dim),
            bit(r.truncated).into(),
            opt(r.wall_ms),
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "suite", rename_all = "lowercase")]
pub enum VerifyReport {
    Oracle(montecarlo::OracleReport),
    Properties(montecarlo::PropertyReport),
    Perfect(montecarlo::PerfectReport),
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        match self {
            VerifyReport::Oracle(r) => r.passed(),
            VerifyReport::Properties(r) => r.passed(),
            VerifyReport::Perfect(r) => r.passed(),
        }
    }

    /// One line per failure with a reproducer.
    pub fn failures(&self) -> Vec<String> {
        match self {
            VerifyReport::Oracle(r) => r
                .mismatches
                .iter()
                .map(|m| {
                    let seeds: Vec<String> = m.seeds.iter().map(ToString::to_string).collect();
                    format!("{}: seeds {}", m.dims, seeds.join(" "))
                })
                .collect(),
            VerifyReport::Properties(r) => r
                .checks
                .iter()
                .flat_map(|c| c.failures.iter().map(move |f| format!("{}: {f}", c.name)))
                .collect(),
            VerifyReport::Perfect(r) => r
                .cases
                .iter()
                .filter(|c| !c.passed())
                .map(|c| {
                    format!(
                        "n={} i={}: count {} closed form {} lower bound {}",
                        c.n,
                        c.i,
                        c.count,
                        opt(c.closed_form),
                        c.lower_bound
                    )
                })
                .collect(),
        }
    }
}

pub const PERFECT_BUDGET: u128 = 1 << 40;

pub fn cmd_verify(args: &VerifyArgs) -> CliResult<VerifyReport> {
    let seed = || {
        args.seed
            .ok_or_else(|| CliError::Validation("--seed is required for randomized suites".into()))
    };
    let report = match args.suite {
        SuiteArg::Oracle => {
            let mut suite = OracleSuite::standard(seed()?);
            suite.random_cases = args.cases;
            VerifyReport::Oracle(montecarlo::verify_oracle(&suite)?)
        }
        SuiteArg::Properties => {
            VerifyReport::Properties(montecarlo::verify_properties(args.cases, seed()?)?)
        }
        SuiteArg::Perfect => {
            let cases: Vec<(u32, usize)> = args
                .i
                .iter()
                .flat_map(|&i| args.n.iter().map(move |&n| (n, i)))
                .collect();
            VerifyReport::Perfect(montecarlo::verify_perfect(&cases, PERFECT_BUDGET)?)
        }
    };
    Ok(report)
}

/// One trend-table row per value, as CSV with header [`SWEEP_HEADER`].
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    param: ParamArg,
    values: &[f64],
    opts: RunOptions,
) -> CliResult<String> {
    let sweep_param = match param {
        ParamArg::N => SweepParam::N,
        ParamArg::A => SweepParam::A,
    };
    let cells = montecarlo::sweep(cfg, sweep_param, values, opts)?;
    let two_j = 2 * cfg.j;
    let names = [
        i_name(two_j),
        c_name(two_j),
        diff_name(&c_name(two_j), &i_name(two_j)),
        i_name(cfg.dims.d()),
    ];
    let param_name = match param {
        ParamArg::N => "n",
        ParamArg::A => "a",
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for cell in &cells {
        let mut row = vec![param_name.to_string(), cell.value.to_string()];
        match &cell.outcome {
            Ok(s) => {
                row.extend([
                    "ok".into(),
                    s.n.to_string(),
                    s.p.to_string(),
                    s.trials.to_string(),
                ]);
                row.push(s.mean_seed_count.to_string());
                for name in &names {
                    match s.event(name) {
                        Some(e) => {
                            row.extend([e.estimate, e.ci_low, e.ci_high].map(|x| x.to_string()))
                        }
                        None => row.extend([String::new(), String::new(), String::new()]),
                    }
                }
                row.push(s.lambda_hat.to_string());
                row.push(s.lambda_hat_se.to_string());
                row.push(opt(s.lambda));
                row.push(opt(s.predicted_limit));
                row.push(opt(s.tv_y_vs_poisson));
                row.push(opt(s.tv_y_vs_poisson_se));
                row.push(String::new());
            }
            Err(msg) => {
                row.push("error".into());
                row.resize(SWEEP_HEADER.len() - 1, String::new());
                row.push(msg.clone());
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    finish_csv(w)
}

/// Executes a parsed command, writing human output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let stdout_err = |e: std::io::Error| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    };
    match cli.command {
        Command::Theory { d, j, a } => {
            let report = cmd_theory(d, j, a)?;
            writeln!(out, "{report}").map_err(stdout_err)?;
        }
        Command::Simulate(args) => {
            let cfg = args.to_config()?;
            let outcome = cmd_simulate(&cfg, args.run_options(), args.out.as_deref())?;
            if outcome.files.is_empty() {
                write!(out, "{}", to_json(&outcome.summary)?).map_err(stdout_err)?;
            } else {
                for f in &outcome.files {
                    writeln!(out, "wrote {}", f.display()).map_err(stdout_err)?;
                }
            }
        }
        Command::Verify(args) => {
            let report = cmd_verify(&args)?;
            write!(out, "{}", to_json(&report)?).map_err(stdout_err)?;
            if !report.passed() {
                return Err(CliError::Verification(report.failures().join("; ")));
            }
        }
        Command::Sweep { sim, param, values } => {
            let cfg = sim.to_config()?;
            let table = cmd_sweep(&cfg, param, &values, sim.run_options())?;
            match &sim.out {
                Some(prefix) => {
                    let mut path = prefix.as_os_str().to_owned();
                    path.push(".sweep.csv");
                    let path = PathBuf::from(path);
                    write_file(&path, &table)?;
                    writeln!(out, "wrote {}", path.display()).map_err(stdout_err)?;
                }
                None => write!(out, "{table}").map_err(stdout_err)?,
            }
        }
    }
    Ok(())
}
