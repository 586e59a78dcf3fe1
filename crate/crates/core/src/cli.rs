//! Command-line front end. Exit codes: 0 success with every checked property
//! holding, 1 usage or I/O failure, 2 a mathematical property was violated.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::adversarial::{
    empirical_nu, evaluate, train, AdvConfig, LinearModel, Objective, PerturbationNorm, SolverConfig,
};
use crate::bounds::evaluate_learning_bound;
use crate::counterexamples::{assert_counterexample, build_counterexample, CounterexampleParams, NegativeTheorem};
use crate::datagen::{load_csv_dataset, save_csv_dataset, synth_linear_dataset, CsvOptions, Noise, SynthConfig};
use crate::distributions::FiniteDistribution;
use crate::error::{Error, Result};
use crate::fuzz::{fuzz_distribution, run_bound_check, run_bound_fuzz, ClassKind, FuzzConfig};
use crate::lemmas::{check_lemma_grid, LemmaId};
use crate::losses::LossKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hcons", version, about = "Consistency-bound checks for regression surrogates and smooth adversarial training")]
struct Cli {
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output path; a run manifest is written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the squared-loss consistency bounds on a distribution file or a fuzz stream.
    VerifyBounds(VerifyArgs),
    /// Evaluate one of the negative-result constructions.
    Counterexample(CounterexampleArgs),
    /// Sweep one of the auxiliary inequalities on a grid.
    LemmaCheck(LemmaArgs),
    /// Evaluate the finite-sample learning bound for several sample sizes.
    LearningBound(LearningArgs),
    /// Generate a synthetic linear regression dataset as CSV.
    Synth(SynthArgs),
    /// Train a linear model on a CSV dataset.
    AdvTrain(TrainArgs),
    /// Clean and robust squared error of a trained model.
    AdvEval(EvalArgs),
    /// Aggregate eval files into a mean and sd table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Distribution JSON file, or `fuzz:seed,count`.
    #[arg(long)]
    config: String,
    #[arg(long, value_delimiter = ',', required = true)]
    class: Vec<ClassKind>,
    #[arg(long, value_delimiter = ',', required = true)]
    surrogates: Vec<LossKind>,
    /// Random hypotheses per distribution and class.
    #[arg(long, default_value_t = 50)]
    hypotheses: usize,
}

#[derive(Debug, Args)]
struct CounterexampleArgs {
    #[arg(long)]
    theorem: NegativeTheorem,
    #[arg(long = "B")]
    bound: f64,
    #[arg(long, allow_hyphen_values = true)]
    y: f64,
    #[arg(long, allow_hyphen_values = true)]
    mu: f64,
    /// Huber delta or the epsilon of the eps-insensitive losses.
    #[arg(long)]
    param: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LemmaName {
    #[value(name = "huberF")]
    HuberF,
    #[value(name = "clarkson")]
    Clarkson,
    #[value(name = "lplowF")]
    LpLowF,
    #[value(name = "sqepsF")]
    SqEpsF,
}

#[derive(Debug, Args)]
struct LemmaArgs {
    #[arg(long)]
    lemma: LemmaName,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Radius of the swept box; sqepsF defaults to max(1, 4 eps).
    #[arg(long = "B")]
    bound: Option<f64>,
    #[arg(long, default_value_t = 2001)]
    grid: usize,
}

#[derive(Debug, Args)]
struct LearningArgs {
    /// Distribution JSON file, or `fuzz:seed[,index]`.
    #[arg(long)]
    config: String,
    #[arg(long)]
    class: ClassKind,
    #[arg(long)]
    surrogate: LossKind,
    /// Sample sizes, increasing.
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<usize>,
    /// Confidence parameter in (0, 1).
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    /// Mesh size of the hypothesis class.
    #[arg(long, default_value_t = 101)]
    grid: usize,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    m: usize,
    /// `twopoint:a`, `uniform:a` or `outliers:a,frac,scale`.
    #[arg(long)]
    noise: Noise,
    #[arg(long = "B")]
    bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectiveName {
    SmoothAdv,
    AdvSq,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = ObjectiveName::SmoothAdv)]
    objective: ObjectiveName,
    /// Surrogate of the smooth adversarial objective.
    #[arg(long)]
    loss: Option<LossKind>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    norm: PerturbationNorm,
    #[arg(long, default_value_t = 200_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 1.0)]
    step0: f64,
    /// Box constraint on every weight and the bias.
    #[arg(long)]
    projection_bound: Option<f64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    norm: PerturbationNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Md,
    Csv,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// eval.json files.
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = TableFormat::Md)]
    format: TableFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub tool_version: String,
    pub outputs: Vec<PathBuf>,
}

/// SHA-256 of the compact JSON encoding with object keys sorted.
pub fn config_digest(config: &Value) -> String {
    let canonical = serde_json::to_string(&sort_keys(config)).expect("JSON values always serialize");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn sort_keys(v: &Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k.clone(), sort_keys(v))).collect())
        }
        Value::Array(items) => Value::Array(items.iter().map(sort_keys).collect()),
        other => other.clone(),
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// What a subcommand produced: the JSON written to `--out` (or stdout), the
/// config that went into the digest, and whether every property held.
struct Outcome {
    body: Output,
    config: Value,
    seed: u64,
    ok: bool,
}

enum Output {
    Json(Value),
    Text(String),
    /// Already written to the listed paths.
    Files(Vec<PathBuf>),
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let threads = cli.threads;
    let run = || execute(&cli);
    let result = match threads {
        Some(0) => Err(Error::InvalidParams("--threads must be >= 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(e) => Err(Error::InvalidParams(format!("cannot start {n} threads: {e}"))),
        },
        None => run(),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VIOLATION,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::VerifyBounds(_) => "verify-bounds",
        Command::Counterexample(_) => "counterexample",
        Command::LemmaCheck(_) => "lemma-check",
        Command::LearningBound(_) => "learning-bound",
        Command::Synth(_) => "synth",
        Command::AdvTrain(_) => "adv-train",
        Command::AdvEval(_) => "adv-eval",
        Command::Report(_) => "report",
    }
}

fn execute(cli: &Cli) -> Result<bool> {
    let out = cli.out.as_deref();
    let outcome = match &cli.command {
        Command::VerifyBounds(a) => verify_bounds(a, cli.seed)?,
        Command::Counterexample(a) => counterexample(a)?,
        Command::LemmaCheck(a) => lemma_check(a)?,
        Command::LearningBound(a) => learning_bound(a, cli.seed)?,
        Command::Synth(a) => synth(a, cli.seed, out)?,
        Command::AdvTrain(a) => adv_train(a, cli.seed)?,
        Command::AdvEval(a) => adv_eval(a)?,
        Command::Report(a) => report(a)?,
    };
    let outputs = match (&outcome.body, out) {
        (Output::Files(paths), _) => paths.clone(),
        (Output::Json(v), Some(path)) => {
            write_file(path, &(serde_json::to_string_pretty(v)? + "\n"))?;
            vec![path.to_path_buf()]
        }
        (Output::Text(t), Some(path)) => {
            write_file(path, t)?;
            vec![path.to_path_buf()]
        }
        (Output::Json(v), None) => {
            println!("{}", serde_json::to_string_pretty(v)?);
            Vec::new()
        }
        (Output::Text(t), None) => {
            print!("{t}");
            Vec::new()
        }
    };
    if let Some(first) = outputs.first() {
        let manifest = RunManifest {
            command: command_name(&cli.command).to_string(),
            config_digest: config_digest(&outcome.config),
            seed: outcome.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: outputs.clone(),
        };
        write_file(&manifest_path(first), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    }
    Ok(outcome.ok)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

enum DistSource {
    File(FiniteDistribution, Value),
    Fuzz { seed: u64, count: usize },
}

fn parse_fuzz_spec(spec: &str) -> Result<(u64, Option<usize>)> {
    let bad = || Error::InvalidParams(format!("bad fuzz spec {spec:?}; expected fuzz:seed,count"));
    let mut parts = spec.split(',');
    let seed = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
    let second = parts.next().map(|c| c.trim().parse::<usize>().map_err(|_| bad())).transpose()?;
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((seed, second))
}

fn dist_source(config: &str) -> Result<DistSource> {
    if let Some(spec) = config.strip_prefix("fuzz:") {
        let (seed, count) = parse_fuzz_spec(spec)?;
        return Ok(DistSource::Fuzz {
            seed,
            count: count.unwrap_or(1),
        });
    }
    let text = fs::read_to_string(config).map_err(|e| Error::io(config, e))?;
    let raw: Value = serde_json::from_str(&text)?;
    Ok(DistSource::File(FiniteDistribution::from_json_str(&text)?, raw))
}

fn verify_bounds(a: &VerifyArgs, seed: u64) -> Result<Outcome> {
    if a.surrogates.iter().any(|s| matches!(s, LossKind::EpsInsensitive { .. })) {
        eprintln!("warning: the eps-insensitive loss has no consistency bound; its instances are skipped");
    }
    let surrogates: Vec<String> = a.surrogates.iter().map(ToString::to_string).collect();
    let classes: Vec<String> = a.class.iter().map(ToString::to_string).collect();
    let (outcome, config, seed) = match dist_source(&a.config)? {
        DistSource::Fuzz { seed: fseed, count } => {
            let cfg = FuzzConfig {
                seed: fseed,
                distributions: count,
                hypotheses: a.hypotheses,
                ..FuzzConfig::default()
            };
            let config = json!({"fuzz": cfg, "classes": classes, "surrogates": surrogates});
            (run_bound_fuzz(&cfg, &a.class, &a.surrogates)?, config, fseed)
        }
        DistSource::File(dist, raw) => {
            let cfg = FuzzConfig {
                seed,
                hypotheses: a.hypotheses,
                ..FuzzConfig::default()
            };
            let config = json!({"distribution": raw, "hypotheses": a.hypotheses, "classes": classes, "surrogates": surrogates});
            (run_bound_check(&dist, &cfg, &a.class, &a.surrogates)?, config, seed)
        }
    };
    let s = outcome.summary;
    eprintln!(
        "checked {} held {} skipped {} min_slack {:e}",
        s.checked, s.held, s.skipped, s.min_slack
    );
    for v in outcome.violations().take(10) {
        eprintln!(
            "violation: distribution {} hypothesis {} {} {}: lhs {} > rhs {}",
            v.distribution, v.hypothesis, v.report.surrogate, v.report.class, v.report.lhs, v.report.rhs
        );
    }
    Ok(Outcome {
        ok: s.held == s.checked,
        body: Output::Json(serde_json::to_value(&outcome)?),
        config,
        seed,
    })
}

fn counterexample(a: &CounterexampleArgs) -> Result<Outcome> {
    let params = CounterexampleParams {
        bound: a.bound,
        y: a.y,
        mu: a.mu,
        param: a.param,
    };
    let case = build_counterexample(a.theorem, params)?;
    let outcome = assert_counterexample(&case)?;
    for d in &outcome.diagnostics {
        eprintln!("{d}");
    }
    eprintln!(
        "{}: surrogate errors {} / {}, squared regret {}, confirmed {}",
        a.theorem, outcome.surrogate_err_hbar, outcome.surrogate_err_hstar, outcome.sq_regret_hbar, outcome.confirmed
    );
    Ok(Outcome {
        ok: outcome.confirmed,
        body: Output::Json(json!({
            "theorem": a.theorem.to_string(),
            "surrogate": case.surrogate().to_string(),
            "params": params,
            "h_bar": case.params.y + case.params.param,
            "h_star": case.params.mu,
            "outcome": outcome,
        })),
        config: json!({"theorem": a.theorem.to_string(), "params": params}),
        seed: 0,
    })
}

fn lemma_check(a: &LemmaArgs) -> Result<Outcome> {
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| Error::InvalidParams(format!("--lemma {:?} needs --{flag}", a.lemma)));
    let lemma = match a.lemma {
        LemmaName::HuberF => LemmaId::HuberF {
            delta: need(a.delta, "delta")?,
            bound: need(a.bound, "B")?,
        },
        LemmaName::Clarkson => LemmaId::LpClarkson {
            p: need(a.p, "p")?,
            bound: need(a.bound, "B")?,
        },
        LemmaName::LpLowF => LemmaId::LpLowF {
            p: need(a.p, "p")?,
            bound: need(a.bound, "B")?,
        },
        LemmaName::SqEpsF => {
            let eps = need(a.eps, "eps")?;
            LemmaId::SqEpsF {
                eps,
                bound: a.bound.unwrap_or_else(|| (4.0 * eps).max(1.0)),
            }
        }
    };
    let check = check_lemma_grid(lemma, a.grid)?;
    eprintln!(
        "{}: {} points, min deviation {:e} at ({}, {}), {} violations",
        lemma.name(),
        check.points,
        check.min_deviation,
        check.argmin.0,
        check.argmin.1,
        check.violations
    );
    Ok(Outcome {
        ok: check.violations == 0,
        body: Output::Json(json!({"lemma": lemma, "grid": a.grid, "check": check})),
        config: json!({"lemma": lemma, "grid": a.grid}),
        seed: 0,
    })
}

fn learning_bound(a: &LearningArgs, seed: u64) -> Result<Outcome> {
    let (dist, dist_config) = match dist_source(&a.config)? {
        DistSource::File(d, raw) => (d, raw),
        DistSource::Fuzz { seed: fseed, count } => {
            let cfg = FuzzConfig {
                seed: fseed,
                ..FuzzConfig::default()
            };
            // For this command the second number is an index into the stream.
            let index = count.saturating_sub(1);
            (fuzz_distribution(&cfg, index), json!({"fuzz_seed": fseed, "index": index}))
        }
    };
    let class = match a.class {
        ClassKind::AllBounded => crate::conditional::HypothesisClass::all_bounded(dist.bound(), a.grid)?,
        ClassKind::Constant => crate::conditional::HypothesisClass::constant_bounded(dist.bound(), a.grid)?,
    };
    let mut reports = Vec::new();
    for &m in &a.m {
        reports.push(evaluate_learning_bound(a.surrogate, &dist, &class, m, a.delta, seed, a.trials)?);
    }
    let mut ok = reports.iter().all(|r| r.rademacher_estimate >= 0.0);
    for pair in a.m.windows(2).zip(reports.windows(2)) {
        let (ms, rs) = pair;
        if ms[1] > ms[0] && rs[1].rhs_value >= rs[0].rhs_value {
            eprintln!("rhs did not decrease from m={} to m={}", ms[0], ms[1]);
            ok = false;
        }
    }
    for r in &reports {
        eprintln!("m={} rhs {} rademacher {}", r.m, r.rhs_value, r.rademacher_estimate);
    }
    Ok(Outcome {
        ok,
        body: Output::Json(json!({"reports": reports})),
        config: json!({
            "distribution": dist_config,
            "class": a.class.to_string(),
            "surrogate": a.surrogate.to_string(),
            "m": a.m,
            "delta": a.delta,
            "trials": a.trials,
            "grid": a.grid,
        }),
        seed,
    })
}

fn synth(a: &SynthArgs, seed: u64, out: Option<&Path>) -> Result<Outcome> {
    let out = out.ok_or_else(|| Error::InvalidParams("synth needs --out <file.csv>".into()))?;
    let cfg = SynthConfig {
        seed,
        d: a.d,
        m: a.m,
        bound: a.bound,
        noise: a.noise,
    };
    let generated = synth_linear_dataset(&cfg)?;
    save_csv_dataset(&generated.data, out)?;
    let mut truth_path = out.as_os_str().to_owned();
    truth_path.push(".truth.json");
    let truth_path = PathBuf::from(truth_path);
    write_file(&truth_path, &(serde_json::to_string_pretty(&generated.truth)? + "\n"))?;
    Ok(Outcome {
        ok: true,
        body: Output::Files(vec![out.to_path_buf(), truth_path]),
        config: json!({"synth": cfg, "noise_spec": a.noise.to_string()}),
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    w: Vec<f64>,
    b: f64,
    #[serde(default)]
    objective: Option<f64>,
    #[serde(default)]
    iters: Option<usize>,
    #[serde(default)]
    method: Option<String>,
}

fn adv_train(a: &TrainArgs, seed: u64) -> Result<Outcome> {
    let objective = match a.objective {
        ObjectiveName::SmoothAdv => {
            let surrogate = a.loss.ok_or_else(|| Error::InvalidParams("smooth-adv needs --loss".into()))?;
            let tau = a.tau.ok_or_else(|| Error::InvalidParams("smooth-adv needs --tau".into()))?;
            if matches!(surrogate, LossKind::EpsInsensitive { .. }) {
                eprintln!("warning: the eps-insensitive loss carries no consistency guarantee for the squared loss");
            }
            Objective::SmoothAdv(AdvConfig {
                gamma: a.gamma,
                norm: a.norm,
                tau,
                surrogate,
            })
        }
        ObjectiveName::AdvSq => {
            if a.loss.is_some() || a.tau.is_some() {
                eprintln!("warning: --loss and --tau are ignored by adv-sq");
            }
            Objective::AdvSq {
                gamma: a.gamma,
                norm: a.norm,
            }
        }
    };
    let solver = SolverConfig {
        max_iters: a.max_iters,
        step0: a.step0,
        tol: a.tol,
        seed,
        projection_bound: a.projection_bound,
    };
    let data = load_csv_dataset(&a.data, CsvOptions::default())?;
    let result = train(&objective, &data, &solver)?;
    let method = match objective {
        Objective::SmoothAdv(cfg) => format!("smooth-adv({})", cfg.surrogate),
        Objective::AdvSq { .. } => "adv-sq".to_string(),
    };
    let nu = empirical_nu(&result.model, &data, a.gamma, a.norm);
    eprintln!(
        "{method}: objective {} after {} iterations ({:?}), empirical 3B' = {nu}",
        result.objective, result.iters, result.method
    );
    Ok(Outcome {
        ok: true,
        body: Output::Json(json!({
            "w": result.model.weights,
            "b": result.model.bias,
            "objective": result.objective,
            "iters": result.iters,
            "method": method,
            "solver": result.method,
            "gamma": a.gamma,
            "norm": a.norm,
            "nu_empirical": nu,
        })),
        config: json!({
            "data": a.data,
            "objective": objective,
            "solver": solver,
        }),
        seed,
    })
}

fn adv_eval(a: &EvalArgs) -> Result<Outcome> {
    let text = fs::read_to_string(&a.model).map_err(|e| Error::io(&a.model, e))?;
    let file: ModelFile = serde_json::from_str(&text)?;
    let model = LinearModel::new(file.w, file.b);
    let data = load_csv_dataset(&a.data, CsvOptions::default())?;
    let report = evaluate(&model, &data, a.gamma, a.norm)?;
    let nu = empirical_nu(&model, &data, a.gamma, a.norm);
    let ok = report.robust_mse >= report.clean_mse;
    eprintln!("clean {} robust {}", report.clean_mse, report.robust_mse);
    Ok(Outcome {
        ok,
        body: Output::Json(json!({
            "clean_mse": report.clean_mse,
            "robust_mse": report.robust_mse,
            "gamma": a.gamma,
            "norm": a.norm,
            "method": file.method.unwrap_or_else(|| "unknown".into()),
            "nu_empirical": nu,
        })),
        config: json!({"model": a.model, "data": a.data, "gamma": a.gamma, "norm": a.norm}),
        seed: 0,
    })
}

#[derive(Debug, Deserialize)]
struct EvalFile {
    clean_mse: f64,
    robust_mse: f64,
    #[serde(default)]
    gamma: Option<f64>,
    #[serde(default)]
    method: Option<String>,
}

/// Mean and sample standard deviation (0 for a single value).
fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn report(a: &ReportArgs) -> Result<Outcome> {
    if a.inputs.is_empty() {
        return Err(Error::InvalidParams("report needs at least one eval file".into()));
    }
    // (method, gamma) -> clean and robust values, in first-seen order
    type Group = (String, Option<f64>, Vec<f64>, Vec<f64>);
    let mut groups: Vec<Group> = Vec::new();
    for path in &a.inputs {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let e: EvalFile = serde_json::from_str(&text)?;
        let method = e.method.unwrap_or_else(|| "unknown".into());
        let pos = groups.iter().position(|g| g.0 == method && g.1.map(f64::to_bits) == e.gamma.map(f64::to_bits));
        let g = match pos {
            Some(i) => &mut groups[i],
            None => {
                groups.push((method, e.gamma, Vec::new(), Vec::new()));
                groups.last_mut().expect("just pushed")
            }
        };
        g.2.push(e.clean_mse);
        g.3.push(e.robust_mse);
    }
    groups.sort_by(|x, y| {
        x.0.cmp(&y.0)
            .then(x.1.unwrap_or(f64::NEG_INFINITY).total_cmp(&y.1.unwrap_or(f64::NEG_INFINITY)))
    });
    let gamma_text = |g: Option<f64>| g.map_or("-".to_string(), |v| v.to_string());
    let mut text = String::new();
    match a.format {
        TableFormat::Md => {
            text.push_str("| Method | gamma | runs | Clean | Robust |\n|---|---|---|---|---|\n");
            for (method, gamma, clean, robust) in &groups {
                let (cm, cs) = mean_sd(clean);
                let (rm, rs) = mean_sd(robust);
                let _ = writeln!(
                    text,
                    "| {method} | {} | {} | {cm:.4} ± {cs:.4} | {rm:.4} ± {rs:.4} |",
                    gamma_text(*gamma),
                    clean.len()
                );
            }
        }
        TableFormat::Csv => {
            text.push_str("method,gamma,runs,clean_mean,clean_sd,robust_mean,robust_sd\n");
            for (method, gamma, clean, robust) in &groups {
                let (cm, cs) = mean_sd(clean);
                let (rm, rs) = mean_sd(robust);
                let _ = writeln!(text, "{method},{},{},{cm},{cs},{rm},{rs}", gamma_text(*gamma), clean.len());
            }
        }
    }
    Ok(Outcome {
        ok: true,
        body: Output::Text(text),
        config: json!({"inputs": a.inputs}),
        seed: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"b": 1, "a": {"y": [1, 2], "x": null}}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"a": {"x": null, "y": [1, 2]}, "b": 1}"#).unwrap();
        assert_eq!(config_digest(&a), config_digest(&b));
        assert_eq!(config_digest(&a).len(), 64);
        let c: Value = serde_json::from_str(r#"{"a": {"x": null, "y": [2, 1]}, "b": 1}"#).unwrap();
        assert_ne!(config_digest(&a), config_digest(&c));
    }

    #[test]
    fn sample_sd() {
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(m, 3.0);
        assert!((s - 2.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(mean_sd(&[2.0]), (2.0, 0.0));
    }

    #[test]
    fn fuzz_specs() {
        assert_eq!(parse_fuzz_spec("1,10").unwrap(), (1, Some(10)));
        assert_eq!(parse_fuzz_spec("3").unwrap(), (3, None));
        assert!(parse_fuzz_spec("a,1").is_err());
        assert!(parse_fuzz_spec("1,2,3").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_command(["hcons", "lemma-check", "--bogus"]), EXIT_USAGE);
        assert_eq!(run_command(["hcons"]), EXIT_USAGE);
        assert_eq!(run_command(["hcons", "--help"]), EXIT_OK);
        assert_eq!(run_command(["hcons", "lemma-check", "--lemma", "huberF", "--B", "1"]), EXIT_USAGE);
    }
}
