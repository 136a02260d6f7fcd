//! Command-line front end: `solve`, `sketch`, `lewis`, `bench` and
//! `generate`. Reports are deterministic JSON; `solve` can also stream a
//! JSON-lines trace with one record per inner iteration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use tall_lp::barrier::{barrier_value, BarrierOptions, BarrierRegistry, OracleConfig};
use tall_lp::bench::sweep;
use tall_lp::ipm::{build_oracle, path_follow, IpmObserver, IpmSettings, NewtonOracle, OracleMode, StepEvent};
use tall_lp::lewis::{fp_lewis_weights, InnerScores, LewisParams};
use tall_lp::linalg::whitened_extremes;
use tall_lp::oracle::{gen_random_tall_lp, load_instance, CostLedger, LedgerSnapshot, LpInstance};
use tall_lp::sketch::{repeated_halving, SketchConfig};
use tall_lp::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Hessian accuracy and gradient accuracy used by the sketched oracle.
const EPS_H: f64 = 0.25;
const ZETA: f64 = 1.0 / 32.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Sketch,
    Lewis,
    Bench,
    Generate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Sketched,
}

impl From<Mode> for OracleMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exact => OracleMode::Exact,
            Mode::Sketched => OracleMode::Sketched,
        }
    }
}

/// Everything one invocation needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub barrier: String,
    pub epsilon: f64,
    pub p: Option<f64>,
    pub seed: u64,
    pub mode: Mode,
    pub trace: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub threads: usize,
    pub n_grid: Vec<usize>,
    pub d_grid: Vec<usize>,
    /// Shape for `generate`.
    pub n: usize,
    pub d: usize,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            input: None,
            barrier: "hybrid".into(),
            epsilon: match command {
                Command::Solve => 1e-2,
                Command::Sketch => 0.25,
                Command::Lewis => 0.1,
                Command::Bench => 0.5,
                Command::Generate => 1.0,
            },
            p: None,
            seed: 0,
            mode: if command == Command::Lewis { Mode::Exact } else { Mode::Sketched },
            trace: None,
            report: None,
            threads: 1,
            n_grid: vec![2048, 4096, 8192, 16384],
            d_grid: vec![2, 4, 8],
            n: 1000,
            d: 3,
        }
    }

    /// Rejects flag combinations that cannot run.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(format!("--epsilon must be positive, got {}", self.epsilon));
        }
        if self.threads == 0 {
            return Err("--threads must be at least 1".into());
        }
        let needs_input = matches!(self.command, Command::Solve | Command::Sketch | Command::Lewis);
        if needs_input && self.input.is_none() {
            return Err("--input is required".into());
        }
        match self.command {
            Command::Solve => {
                let registry = BarrierRegistry::with_defaults();
                let names = registry.names();
                if !names.contains(&self.barrier.as_str()) {
                    return Err(format!("unknown barrier `{}` (expected one of {})", self.barrier, names.join(", ")));
                }
                if let Some(p) = self.p {
                    if self.barrier == "lewis" && !(p >= 4.0 && p.is_finite()) {
                        return Err(format!("--p must be at least 4 for the Lewis barrier, got {p}"));
                    }
                }
            }
            Command::Sketch if self.epsilon >= 1.0 => {
                return Err(format!("--epsilon must lie in (0, 1), got {}", self.epsilon));
            }
            Command::Lewis => {
                if self.epsilon >= 1.0 {
                    return Err(format!("--epsilon must lie in (0, 1), got {}", self.epsilon));
                }
                let p = self.p.unwrap_or(4.0);
                if !(p >= 2.0 && p.is_finite()) {
                    return Err(format!("--p must be at least 2, got {p}"));
                }
            }
            Command::Bench => {
                if self.epsilon > 1.0 {
                    return Err(format!("--epsilon must lie in (0, 1], got {}", self.epsilon));
                }
                if self.n_grid.is_empty() || self.d_grid.is_empty() {
                    return Err("bench grids must be nonempty".into());
                }
                for &n in &self.n_grid {
                    for &d in &self.d_grid {
                        if d == 0 || n < 2 * d {
                            return Err(format!("grid point n={n}, d={d} needs n >= 2d >= 2"));
                        }
                    }
                }
            }
            Command::Generate if self.d == 0 || self.n < 2 * self.d => {
                return Err(format!("--n must be at least 2*d, got n={} d={}", self.n, self.d));
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Parser, Debug)]
#[command(name = "tall-lp", version, about = "Interior point solver for tall LPs with sketched Newton steps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Args, Debug)]
pub struct Common {
    /// Master seed; every random draw derives from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report path (stdout when absent).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Worker threads (computation is single-threaded; accepted for compatibility).
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Subcommand, Debug)]
pub enum CliCommand {
    /// Solve min c^T x s.t. Ax >= b from a strictly feasible start.
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "hybrid")]
        barrier: String,
        #[arg(long, default_value_t = 1e-2, allow_negative_numbers = true)]
        epsilon: f64,
        /// Lewis exponent (default max(4, ceil(ln n))).
        #[arg(long, allow_negative_numbers = true)]
        p: Option<f64>,
        #[arg(long, value_enum, default_value_t = Mode::Sketched)]
        mode: Mode,
        /// JSON-lines trace, one record per inner iteration.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Spectral approximation of the constraint matrix by repeated halving.
    Sketch {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
        epsilon: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Approximate l_p Lewis weights of the constraint matrix.
    Lewis {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
        p: f64,
        #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
        epsilon: f64,
        /// `exact` or `sketched` inner leverage scores.
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        #[command(flatten)]
        common: Common,
    },
    /// Measured row queries against modeled quantum counts over an (n, d) grid.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "2048,4096,8192,16384")]
        n_grid: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
        d_grid: Vec<usize>,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        epsilon: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Write a random bounded instance with a strictly feasible start.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[command(flatten)]
        common: Common,
    },
}

impl Cli {
    pub fn into_config(self) -> RunConfig {
        let set_common = |cfg: &mut RunConfig, c: Common| {
            cfg.seed = c.seed;
            cfg.report = c.report;
            cfg.threads = c.threads;
        };
        match self.command {
            CliCommand::Solve { input, barrier, epsilon, p, mode, trace, common } => {
                let mut cfg = RunConfig::new(Command::Solve);
                set_common(&mut cfg, common);
                cfg.input = Some(input);
                cfg.barrier = barrier;
                cfg.epsilon = epsilon;
                cfg.p = p;
                cfg.mode = mode;
                cfg.trace = trace;
                cfg
            }
            CliCommand::Sketch { input, epsilon, common } => {
                let mut cfg = RunConfig::new(Command::Sketch);
                set_common(&mut cfg, common);
                cfg.input = Some(input);
                cfg.epsilon = epsilon;
                cfg
            }
            CliCommand::Lewis { input, p, epsilon, mode, common } => {
                let mut cfg = RunConfig::new(Command::Lewis);
                set_common(&mut cfg, common);
                cfg.input = Some(input);
                cfg.p = Some(p);
                cfg.epsilon = epsilon;
                cfg.mode = mode;
                cfg
            }
            CliCommand::Bench { n_grid, d_grid, epsilon, common } => {
                let mut cfg = RunConfig::new(Command::Bench);
                set_common(&mut cfg, common);
                cfg.n_grid = n_grid;
                cfg.d_grid = d_grid;
                cfg.epsilon = epsilon;
                cfg
            }
            CliCommand::Generate { n, d, common } => {
                let mut cfg = RunConfig::new(Command::Generate);
                set_common(&mut cfg, common);
                cfg.n = n;
                cfg.d = d;
                cfg
            }
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli.into_config()),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}

pub fn run(cfg: &RunConfig) -> i32 {
    match cfg.command {
        Command::Solve => run_solve(cfg),
        Command::Sketch => run_sketch(cfg),
        Command::Lewis => run_lewis(cfg),
        Command::Bench => run_bench(cfg),
        Command::Generate => finish(cfg, generate),
    }
}

pub fn run_solve(cfg: &RunConfig) -> i32 {
    finish(cfg, solve)
}

pub fn run_sketch(cfg: &RunConfig) -> i32 {
    finish(cfg, sketch)
}

pub fn run_lewis(cfg: &RunConfig) -> i32 {
    finish(cfg, lewis)
}

pub fn run_bench(cfg: &RunConfig) -> i32 {
    finish(cfg, bench)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence(_) => EXIT_NONCONVERGENCE,
        _ => EXIT_FAILURE,
    }
}

fn finish(cfg: &RunConfig, work: impl FnOnce(&RunConfig) -> Result<Value>) -> i32 {
    if let Err(msg) = cfg.validate() {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    let outcome = work(cfg).and_then(|v| write_report(cfg.report.as_deref(), &v));
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn write_report(path: Option<&Path>, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn input_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.input.as_deref().ok_or_else(|| Error::Domain("--input is required".into()))
}

/// Reads a matrix: an instance file in either format (its `A` is used), or
/// plain text `n d` followed by `n` rows of `d` numbers.
pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(inst) = tall_lp::oracle::parse_instance(&text) {
        return Ok(inst.a);
    }
    if text.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(&text)?;
        let n = v.get("n").and_then(Value::as_u64).ok_or_else(|| Error::Parse("missing `n`".into()))? as usize;
        let d = v.get("d").and_then(Value::as_u64).ok_or_else(|| Error::Parse("missing `d`".into()))? as usize;
        let rows = v.get("A").and_then(Value::as_array).ok_or_else(|| Error::Parse("missing array `A`".into()))?;
        let mut flat = Vec::with_capacity(n * d);
        for r in rows {
            match r {
                Value::Array(xs) => flat.extend(xs.iter().map(|x| x.as_f64().unwrap_or(f64::NAN))),
                x => flat.push(x.as_f64().unwrap_or(f64::NAN)),
            }
        }
        if flat.len() != n * d || flat.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parse(format!("`A` must hold {} finite numbers", n * d)));
        }
        return Ok(DMatrix::from_row_slice(n, d, &flat));
    }
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header: Vec<usize> = lines
        .next()
        .ok_or_else(|| Error::Parse("empty input".into()))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad dimension `{t}`"))))
        .collect::<Result<_>>()?;
    let [n, d] = header[..] else {
        return Err(Error::Parse("first line must be `n d`".into()));
    };
    let mut flat = Vec::with_capacity(n * d);
    for i in 0..n {
        let line = lines.next().ok_or_else(|| Error::Parse(format!("missing row {}", i + 1)))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        if row.len() != d {
            return Err(Error::Parse(format!("row {} has {} numbers, want {d}", i + 1, row.len())));
        }
        flat.extend(row);
    }
    if lines.next().is_some() {
        return Err(Error::Parse("trailing lines after the matrix".into()));
    }
    Ok(DMatrix::from_row_slice(n, d, &flat))
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    outer: usize,
    inner: usize,
    eta: f64,
    #[serde(rename = "step_norm_Q")]
    step_norm_q: f64,
    barrier_value: Option<f64>,
    objective: f64,
    min_slack: f64,
    ledger: &'a LedgerSnapshot,
}

/// Streams one JSON line per inner iteration.
struct TraceWriter<'a> {
    out: BufWriter<File>,
    inst: &'a LpInstance,
    oracle: &'a dyn NewtonOracle,
    ledger: &'a CostLedger,
}

impl IpmObserver for TraceWriter<'_> {
    fn on_step(&mut self, e: &StepEvent<'_>) -> Result<()> {
        let slack = &self.inst.a * e.x - &self.inst.b;
        let snapshot = self.ledger.snapshot();
        let rec = TraceRecord {
            outer: e.outer,
            inner: e.inner,
            eta: e.eta,
            step_norm_q: e.step_norm_q,
            barrier_value: barrier_value(self.oracle.barrier(), self.inst, e.x).ok(),
            objective: self.inst.c.dot(e.x),
            min_slack: slack.min(),
            ledger: &snapshot,
        };
        serde_json::to_writer(&mut self.out, &rec)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }
}

fn solve(cfg: &RunConfig) -> Result<Value> {
    let inst = load_instance(input_path(cfg)?)?;
    let opts = BarrierOptions { lewis_p: cfg.p, ..Default::default() };
    let barrier = BarrierRegistry::with_defaults().create(&cfg.barrier, &opts, inst.n, inst.d)?;
    let barrier_kind = barrier.kind();
    let oracle = build_oracle(cfg.mode.into(), barrier, EPS_H, ZETA, OracleConfig::default())?;
    let ledger = CostLedger::new();
    let settings = IpmSettings::default();
    let result = match &cfg.trace {
        Some(path) => {
            let mut tw = TraceWriter { out: BufWriter::new(File::create(path)?), inst: &inst, oracle: oracle.as_ref(), ledger: &ledger };
            let r = path_follow(&inst, oracle.as_ref(), cfg.epsilon, &settings, cfg.seed, &ledger, &mut tw);
            tw.out.flush()?;
            r?
        }
        None => path_follow(&inst, oracle.as_ref(), cfg.epsilon, &settings, cfg.seed, &ledger, &mut tall_lp::ipm::NoObserver)?,
    };
    let slack = &inst.a * &result.x - &inst.b;
    Ok(json!({
        "command": "solve",
        "barrier": barrier_kind,
        "mode": OracleMode::from(cfg.mode),
        "epsilon": cfg.epsilon,
        "seed": cfg.seed,
        "n": inst.n,
        "d": inst.d,
        "x": result.x.as_slice(),
        "objective": inst.c.dot(&result.x),
        "min_slack": slack.min(),
        "outer_iters": result.outer_iterations,
        "predicted_outer_iters": result.predicted_outer,
        "centering_iters": result.trace.centering_iterations,
        "eta0": finite_or_null(result.eta0),
        "eta_final": finite_or_null(result.eta_final),
        "theta": result.params.theta,
        "c_factor": result.params.c,
        "ledger": ledger.snapshot(),
    }))
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() { json!(x) } else { Value::Null }
}

fn sketch(cfg: &RunConfig) -> Result<Value> {
    let a = load_matrix(input_path(cfg)?)?;
    let ledger = CostLedger::new();
    let sk = repeated_halving(&a, cfg.epsilon, cfg.seed, &SketchConfig::default(), &ledger)?;
    let (lo, hi) = whitened_extremes(&sk.gram(), &(a.transpose() * &a))?;
    Ok(json!({
        "command": "sketch",
        "n": a.nrows(),
        "d": a.ncols(),
        "epsilon": cfg.epsilon,
        "seed": cfg.seed,
        "rows": sk.len(),
        "eigen_lower": lo,
        "eigen_upper": hi,
        "sketch": sk,
        "ledger": ledger.snapshot(),
    }))
}

fn lewis(cfg: &RunConfig) -> Result<Value> {
    let a = load_matrix(input_path(cfg)?)?;
    let ledger = CostLedger::new();
    let params = LewisParams::new(cfg.p.unwrap_or(4.0), cfg.epsilon)?;
    let inner = match cfg.mode {
        Mode::Exact => InnerScores::Exact,
        Mode::Sketched => InnerScores::Sketched(SketchConfig::default()),
    };
    let r = fp_lewis_weights(&a, params, &inner, cfg.seed, &ledger)?;
    let mut v = serde_json::to_value(&r)?;
    let obj = v.as_object_mut().expect("LewisResult serializes to an object");
    obj.insert("command".into(), json!("lewis"));
    obj.insert("seed".into(), json!(cfg.seed));
    obj.insert("ledger".into(), serde_json::to_value(ledger.snapshot())?);
    Ok(v)
}

fn bench(cfg: &RunConfig) -> Result<Value> {
    let report = sweep(&cfg.n_grid, &cfg.d_grid, cfg.epsilon, cfg.seed)?;
    let mut v = serde_json::to_value(&report)?;
    let obj = v.as_object_mut().expect("BenchReport serializes to an object");
    obj.insert("command".into(), json!("bench"));
    obj.insert("seed".into(), json!(cfg.seed));
    Ok(v)
}

fn generate(cfg: &RunConfig) -> Result<Value> {
    let inst = gen_random_tall_lp(cfg.n, cfg.d, cfg.seed)?;
    Ok(serde_json::from_str(&inst.to_json())?)
}
