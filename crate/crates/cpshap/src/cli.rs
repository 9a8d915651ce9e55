//! The `cpshap` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cpshap_core::allocation::ProportionalOptions;
use cpshap_core::conformal::{split, CpMethod};
use cpshap_core::regressors::{RegressorSpec, ResidualTransform, TreeParams};
use cpshap_core::rng::derive_seed;
use cpshap_core::synth::default_beta;
use cpshap_core::value::IntervalValue;
use cpshap_core::Error;
use serde_json::json;

use crate::attribution::{attribute, Allocations, AttributionConfig, Problem, Sampling, TestPoints};
use crate::bench::{convergence_study, moment_comparison, ConvergenceSpec, MomentSpec};
use crate::data::load_csv;
use crate::report::{tables, AllocationsFile};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "CPSHAP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "cpshap", version, about = "Feature attribution of conformal prediction intervals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Attribute interval width or bounds to features on a CSV data set.
    Attribute(AttributeArgs),
    /// Run a synthetic benchmark study.
    Benchmark(BenchmarkArgs),
    /// Rank tables and agreement from an `allocations.json`.
    Report(ReportArgs),
}

/// Every flag here can also be given as `key = value` in a config file.
#[derive(Debug, Args)]
struct AttributeArgs {
    /// Plain-text `key = value` file; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Re-run with the settings recorded in a previous `manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    target: Option<String>,
    /// Comma-separated categorical columns, one-hot encoded.
    #[arg(long)]
    categoricals: Option<String>,
    /// smr, lacp or cqr.
    #[arg(long)]
    method: Option<String>,
    /// width, lower, upper, or a comma-separated list of them.
    #[arg(long)]
    value: Option<String>,
    /// shap, pshap or both.
    #[arg(long)]
    alloc: Option<String>,
    /// exact, mc or is.
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Lower and upper CQR quantile levels, e.g. `0.05,0.95`.
    #[arg(long)]
    cqr_levels: Option<String>,
    /// constant, linear, knn or tree; used for every model role.
    #[arg(long)]
    regressor: Option<String>,
    #[arg(long)]
    dispersion_regressor: Option<String>,
    #[arg(long)]
    quantile_regressor: Option<String>,
    /// abs or sq.
    #[arg(long)]
    dispersion_transform: Option<String>,
    /// Train and calibration proportions of the non-test rows.
    #[arg(long)]
    split: Option<String>,
    /// Fraction of rows held out as test points.
    #[arg(long)]
    test_fraction: Option<String>,
    /// Use at most this many test points.
    #[arg(long)]
    test_points: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    ridge: Option<String>,
    #[arg(long)]
    knn_k: Option<String>,
    #[arg(long)]
    trees: Option<String>,
    #[arg(long)]
    max_leaves: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    min_node_fraction: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    /// Divide allocations by v(D, x) - v(empty).
    #[arg(long)]
    normalize: bool,
    /// Sample proportional orderings per test point (estimator mc).
    #[arg(long)]
    ps_direct: bool,
}

impl AttributeArgs {
    fn explicit(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        let pairs: [(&str, &Option<String>); 25] = [
            ("data", &self.data),
            ("target", &self.target),
            ("categoricals", &self.categoricals),
            ("method", &self.method),
            ("value", &self.value),
            ("alloc", &self.alloc),
            ("estimator", &self.estimator),
            ("m", &self.m),
            ("alpha", &self.alpha),
            ("cqr-levels", &self.cqr_levels),
            ("regressor", &self.regressor),
            ("dispersion-regressor", &self.dispersion_regressor),
            ("quantile-regressor", &self.quantile_regressor),
            ("dispersion-transform", &self.dispersion_transform),
            ("split", &self.split),
            ("test-fraction", &self.test_fraction),
            ("test-points", &self.test_points),
            ("seed", &self.seed),
            ("ridge", &self.ridge),
            ("knn-k", &self.knn_k),
            ("trees", &self.trees),
            ("max-leaves", &self.max_leaves),
            ("learning-rate", &self.learning_rate),
            ("min-node-fraction", &self.min_node_fraction),
            ("out-dir", &self.out_dir),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                out.insert(k.to_owned(), v.clone());
            }
        }
        if self.normalize {
            out.insert("normalize".into(), "true".into());
        }
        if self.ps_direct {
            out.insert("ps-direct".into(), "true".into());
        }
        out
    }
}

const DEFAULTS: [(&str, &str); 25] = [
    ("data", ""),
    ("target", ""),
    ("categoricals", ""),
    ("method", "smr"),
    ("value", "width"),
    ("alloc", "shap"),
    ("estimator", "exact"),
    ("m", "1000"),
    ("alpha", "0.1"),
    ("cqr-levels", ""),
    ("regressor", "linear"),
    ("dispersion-regressor", ""),
    ("quantile-regressor", ""),
    ("dispersion-transform", "abs"),
    ("split", "0.8,0.2"),
    ("test-fraction", "0.2"),
    ("test-points", ""),
    ("seed", "0"),
    ("ridge", "1e-10"),
    ("knn-k", "10"),
    ("trees", "30"),
    ("max-leaves", "10"),
    ("learning-rate", "0.1"),
    ("min-node-fraction", "0.01"),
    ("out-dir", "."),
];

const FLAGS: [&str; 2] = ["normalize", "ps-direct"];

#[derive(Debug, Args)]
struct BenchmarkArgs {
    name: Benchmark,
    /// Monte Carlo permutation counts (sobol-levitan).
    #[arg(long, value_delimiter = ',', default_values_t = [50usize, 100, 200, 400])]
    m_grid: Vec<usize>,
    /// Repetitions per permutation count (sobol-levitan).
    #[arg(long, default_value_t = 30)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_cal: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// CQR quantile levels (friedman).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    cqr_levels: Option<Vec<f64>>,
    /// Comma-separated Sobol'–Levitan coefficients (16 values).
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Benchmark {
    SobolLevitan,
    Friedman,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// An `allocations.json` written by `attribute`.
    input: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

/// A failure mapped to a process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration (exit 2).
    Config(String),
    /// Unreadable or unusable data (exit 3).
    Data(String),
    /// Numerical failure on specific test points (exit 4).
    Numeric { message: String, points: Vec<usize> },
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric { .. } => 4,
        }
    }

    fn from_core(e: Error, points: Vec<usize>) -> Self {
        let message = e.to_string();
        match e {
            Error::Parameter(_) => CliError::Config(message),
            Error::Dimension(_)
            | Error::EmptyData
            | Error::Split(_)
            | Error::InsufficientCalibration { .. } => CliError::Data(message),
            Error::DegenerateBaseline { point, .. } => CliError::Numeric {
                message,
                points: if points.is_empty() { vec![point] } else { points },
            },
            Error::DegenerateWeights(_)
            | Error::SupportMismatch { .. }
            | Error::IncompleteDividends { .. } => CliError::Numeric { message, points },
        }
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => return report_error(&e),
    };
    let result = pool.install(|| match cli.command {
        Command::Attribute(a) => cmd_attribute(&a),
        Command::Benchmark(b) => cmd_benchmark(&b),
        Command::Report(r) => cmd_report(&r),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &CliError) -> ExitCode {
    match e {
        CliError::Config(m) => eprintln!("configuration error: {m}"),
        CliError::Data(m) => eprintln!("data error: {m}"),
        CliError::Numeric { message, points } => {
            eprintln!("numeric error: {message}");
            if !points.is_empty() {
                let ids: Vec<String> = points.iter().map(|p| p.to_string()).collect();
                eprintln!("offending test points: {}", ids.join(","));
            }
        }
    }
    ExitCode::from(e.code())
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => builder = builder.num_threads(n),
            _ => return config_err(format!("{THREADS_ENV} must be a positive integer, got `{v}`")),
        }
    }
    builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start workers: {e}")))
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(format!("line {}: expected `key = value`", n + 1));
        };
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if !DEFAULTS.iter().any(|(d, _)| *d == key) && !FLAGS.contains(&key.as_str()) {
            return Err(format!("line {}: unknown key `{key}`", n + 1));
        }
        out.insert(key, v.trim().to_owned());
    }
    Ok(out)
}

/// Fully resolved settings of an `attribute` run.
struct Settings {
    map: BTreeMap<String, String>,
    data: PathBuf,
    target: String,
    categoricals: Vec<String>,
    config: AttributionConfig,
    split: (f64, f64),
    test_fraction: f64,
    test_points: Option<usize>,
    seed: u64,
    split_seed: u64,
    out_dir: PathBuf,
}

fn get<'a>(map: &'a BTreeMap<String, String>, key: &str) -> &'a str {
    map.get(key).map(String::as_str).unwrap_or("")
}

fn parse<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T, CliError> {
    let raw = get(map, key);
    raw.trim()
        .parse()
        .or_else(|_| config_err(format!("--{key}: cannot parse `{raw}`")))
}

fn parse_pair(map: &BTreeMap<String, String>, key: &str) -> Result<Option<(f64, f64)>, CliError> {
    let raw = get(map, key).trim();
    if raw.is_empty() {
        return Ok(None);
    }
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => match (a.parse(), b.parse()) {
            (Ok(a), Ok(b)) => Ok(Some((a, b))),
            _ => config_err(format!("--{key}: expected two numbers, got `{raw}`")),
        },
        _ => config_err(format!("--{key}: expected two comma-separated numbers, got `{raw}`")),
    }
}

fn flag(map: &BTreeMap<String, String>, key: &str) -> Result<bool, CliError> {
    match get(map, key) {
        "" | "false" => Ok(false),
        "true" => Ok(true),
        other => config_err(format!("--{key}: expected true or false, got `{other}`")),
    }
}

fn regressor(map: &BTreeMap<String, String>, key: &str) -> Result<RegressorSpec, CliError> {
    let name = match get(map, key) {
        "" => get(map, "regressor"),
        other => other,
    };
    let spec = match name {
        "constant" => Ok(RegressorSpec::Constant),
        "linear" => RegressorSpec::linear(parse(map, "ridge")?),
        "knn" => RegressorSpec::knn(parse(map, "knn-k")?),
        "tree" => RegressorSpec::tree_ensemble(TreeParams {
            trees: parse(map, "trees")?,
            max_leaves: parse(map, "max-leaves")?,
            learning_rate: parse(map, "learning-rate")?,
            min_node_fraction: parse(map, "min-node-fraction")?,
        }),
        other => return config_err(format!("--{key}: unknown regressor `{other}`")),
    };
    spec.map_err(|e| CliError::Config(e.to_string()))
}

fn resolve(args: &AttributeArgs) -> Result<Settings, CliError> {
    let mut map: BTreeMap<String, String> = DEFAULTS
        .iter()
        .map(|(k, v)| ((*k).to_owned(), (*v).to_owned()))
        .collect();
    for f in FLAGS {
        map.insert(f.to_owned(), "false".to_owned());
    }
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        map.extend(parse_config_file(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?);
    }
    if let Some(path) = &args.manifest {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let manifest: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let Some(cfg) = manifest.get("config").and_then(|c| c.as_object()) else {
            return config_err(format!("{}: no `config` object", path.display()));
        };
        for (k, v) in cfg {
            let Some(v) = v.as_str() else {
                return config_err(format!("manifest key `{k}` is not a string"));
            };
            map.insert(k.clone(), v.to_owned());
        }
    }
    map.extend(args.explicit());

    let data = get(&map, "data");
    let target = get(&map, "target");
    if data.is_empty() || target.is_empty() {
        return config_err("--data and --target are required");
    }
    let method = match get(&map, "method") {
        "smr" => CpMethod::Smr,
        "lacp" => CpMethod::Lacp,
        "cqr" => CpMethod::Cqr,
        other => return config_err(format!("--method: unknown method `{other}`")),
    };
    let mut value_fns = Vec::new();
    for v in get(&map, "value").split(',').map(str::trim) {
        let vf = match v {
            "width" => IntervalValue::Width,
            "lower" => IntervalValue::Lower,
            "upper" => IntervalValue::Upper,
            other => return config_err(format!("--value: unknown value function `{other}`")),
        };
        if !value_fns.contains(&vf) {
            value_fns.push(vf);
        }
    }
    let allocations = match get(&map, "alloc") {
        "shap" => Allocations::Shapley,
        "pshap" => Allocations::Proportional,
        "both" => Allocations::Both,
        other => return config_err(format!("--alloc: unknown allocation `{other}`")),
    };
    let sampling = match get(&map, "estimator") {
        "exact" => Sampling::Exact,
        "mc" => Sampling::MonteCarlo,
        "is" => Sampling::ImportanceBoth,
        other => return config_err(format!("--estimator: unknown estimator `{other}`")),
    };
    let transform = match get(&map, "dispersion-transform") {
        "abs" => ResidualTransform::Absolute,
        "sq" => ResidualTransform::Squared,
        other => return config_err(format!("--dispersion-transform: unknown transform `{other}`")),
    };
    let Some(split) = parse_pair(&map, "split")? else {
        return config_err("--split is required");
    };
    let test_fraction: f64 = parse(&map, "test-fraction")?;
    if !(0.0..1.0).contains(&test_fraction) {
        return config_err("--test-fraction must lie in [0, 1)");
    }
    let test_points = match get(&map, "test-points").trim() {
        "" => None,
        _ => Some(parse(&map, "test-points")?),
    };
    let seed: u64 = parse(&map, "seed")?;
    let mut config = AttributionConfig::new(method, parse(&map, "alpha")?);
    config.value_fns = value_fns;
    config.normalized = flag(&map, "normalize")?;
    config.allocations = allocations;
    config.sampling = sampling;
    config.m = parse(&map, "m")?;
    config.mean = regressor(&map, "regressor")?;
    config.dispersion = regressor(&map, "dispersion-regressor")?;
    config.quantile = regressor(&map, "quantile-regressor")?;
    config.transform = transform;
    config.cqr_levels = parse_pair(&map, "cqr-levels")?;
    config.train_seed = derive_seed(seed, 2);
    config.sampling_seed = derive_seed(seed, 3);
    config.ps_direct = flag(&map, "ps-direct")?;
    config.proportional = ProportionalOptions::default();
    let categoricals = get(&map, "categoricals")
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect();
    Ok(Settings {
        data: PathBuf::from(data),
        target: target.to_owned(),
        categoricals,
        config,
        split,
        test_fraction,
        test_points,
        seed,
        split_seed: derive_seed(seed, 1),
        out_dir: PathBuf::from(get(&map, "out-dir")),
        map,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn cmd_attribute(args: &AttributeArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut s = resolve(args)?;
    let table = load_csv(&s.data, &s.target, &s.categoricals).map_err(|e| CliError::Data(e.0))?;
    if table.rejected > 0 {
        eprintln!("dropped {} rows with missing values", table.rejected);
    }
    if let Some(path) = &args.manifest {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let recorded = serde_json::from_str::<serde_json::Value>(&text)
            .ok()
            .and_then(|m| m["data"]["sha256"].as_str().map(str::to_owned));
        if recorded.as_deref() != Some(table.fingerprint.as_str()) {
            return Err(CliError::Data(format!(
                "{} does not match the data fingerprint recorded in {}",
                s.data.display(),
                path.display()
            )));
        }
    }
    let d = table.names.len();
    s.config
        .validate(d)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let keep = 1.0 - s.test_fraction;
    let (a, b) = s.split;
    let sp = split(table.features.rows(), (a * keep, b * keep), s.split_seed)
        .map_err(|e| CliError::from_core(e, vec![]))?;
    let mut test = sp.test.clone();
    test.sort_unstable();
    if let Some(cap) = s.test_points {
        test.truncate(cap);
    }
    if test.is_empty() {
        return Err(CliError::Data("the split leaves no test rows".into()));
    }
    let problem = Problem::from_split(&table.features, &table.target, &sp);
    let test_x = table.features.select_rows(&test);
    let ids: Vec<usize> = test.iter().map(|&i| table.row_ids[i]).collect();
    let load_secs = started.elapsed().as_secs_f64();

    let result = attribute(&s.config, &problem, TestPoints::new(&test_x, &ids))
        .map_err(|e| CliError::from_core(e.error, e.points))?;

    fs::create_dir_all(&s.out_dir).map_err(|e| io_err(&s.out_dir, e))?;
    let file = AllocationsFile::from_result(&result, s.config.method.as_str(), &table.names);
    let json = file.to_json().map_err(|e| CliError::Numeric {
        message: e,
        points: vec![],
    })?;
    write(&s.out_dir.join("allocations.json"), &(json + "\n"))?;
    let t = tables(&file).map_err(CliError::Data)?;
    write(&s.out_dir.join("rank_matrix.csv"), &t.rank_matrix)?;
    write(&s.out_dir.join("top5.csv"), &t.top5)?;
    if let Some(agreement) = &t.agreement {
        write(&s.out_dir.join("agreement.csv"), agreement)?;
    }

    if let Ok(abs) = fs::canonicalize(&s.data) {
        s.map.insert("data".into(), abs.to_string_lossy().into_owned());
    }
    let manifest = json!({
        "schema_version": crate::report::SCHEMA_VERSION,
        "tool": "cpshap",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "attribute",
        "config": s.map,
        "data": {
            "path": s.map["data"],
            "sha256": table.fingerprint,
            "rows": table.features.rows(),
            "rejected_rows": table.rejected,
            "features": table.names,
        },
        "seeds": {
            "base": s.seed,
            "split": s.split_seed,
            "train": s.config.train_seed,
            "sampling": s.config.sampling_seed,
        },
        "split": {
            "train": sp.train.len(),
            "calibration": sp.calibration.len(),
            "test": sp.test.len(),
            "test_points_used": test.len(),
        },
        "diagnostics": {
            "trained_count": result.diagnostics.trained_count,
            "m": result.diagnostics.m,
        },
        "timings": {
            "load_secs": load_secs,
            "attribution_secs": result.diagnostics.wall_time.as_secs_f64(),
            "total_secs": started.elapsed().as_secs_f64(),
        },
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest is valid JSON");
    write(&s.out_dir.join("manifest.json"), &(text + "\n"))?;
    println!(
        "{} test points, {} models trained, outputs in {}",
        test.len(),
        result.diagnostics.trained_count,
        s.out_dir.display()
    );
    Ok(())
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<(), CliError> {
    fs::create_dir_all(&args.out_dir).map_err(|e| io_err(&args.out_dir, e))?;
    match args.name {
        Benchmark::SobolLevitan => {
            let mut spec = ConvergenceSpec {
                m_grid: args.m_grid.clone(),
                reps: args.reps,
                seed: args.seed,
                ..ConvergenceSpec::default()
            };
            if spec.m_grid.is_empty() || spec.m_grid.contains(&0) {
                return config_err("--m-grid needs positive permutation counts");
            }
            spec.n_train = args.n_train.unwrap_or(spec.n_train);
            spec.n_cal = args.n_cal.unwrap_or(spec.n_cal);
            spec.n_test = args.n_test.unwrap_or(spec.n_test);
            spec.alpha = args.alpha.unwrap_or(spec.alpha);
            if let Some(beta) = &args.beta {
                spec.beta = beta
                    .as_slice()
                    .try_into()
                    .or_else(|_| config_err("--beta needs 16 values"))?;
            }
            let report = convergence_study(&spec).map_err(|e| CliError::from_core(e.error, e.points))?;
            write(&args.out_dir.join("convergence.csv"), &report.to_csv())?;
            let d = spec.beta.len();
            let exact_secs = report.exact_wall_time.as_secs_f64();
            let mut runs = String::from("m,rep,trained_count,worst_case,wall_secs,relative_time,mad\n");
            for r in &report.runs {
                let secs = r.wall_time.as_secs_f64();
                runs.push_str(&format!(
                    "{},{},{},{},{secs},{},{}\n",
                    r.m,
                    r.rep,
                    r.trained_count,
                    r.m * d,
                    secs / exact_secs,
                    r.mad
                ));
            }
            write(&args.out_dir.join("runs.csv"), &runs)?;
            let meta = json!({
                "benchmark": "sobol-levitan",
                "beta": spec.beta,
                "beta_is_default": spec.beta == default_beta(),
                "n_train": spec.n_train, "n_cal": spec.n_cal, "n_test": spec.n_test,
                "alpha": spec.alpha, "m_grid": spec.m_grid, "reps": spec.reps, "seed": spec.seed,
                "method": "smr", "value": "width", "regressor": "linear",
                "exact_trained": report.exact_trained,
                "exact_wall_secs": exact_secs,
            });
            write(&args.out_dir.join("meta.json"), &(serde_json::to_string_pretty(&meta).expect("valid") + "\n"))?;
            println!("wrote convergence.csv, runs.csv and meta.json to {}", args.out_dir.display());
        }
        Benchmark::Friedman => {
            let mut spec = MomentSpec {
                seed: args.seed,
                ..MomentSpec::default()
            };
            spec.n_train = args.n_train.unwrap_or(spec.n_train);
            spec.n_cal = args.n_cal.unwrap_or(spec.n_cal);
            spec.n_test = args.n_test.unwrap_or(spec.n_test);
            spec.alpha = args.alpha.unwrap_or(spec.alpha);
            if let Some(l) = &args.cqr_levels {
                spec.cqr_levels = (l[0], l[1]);
            }
            let report = moment_comparison(&spec).map_err(|e| CliError::from_core(e, vec![]))?;
            write(&args.out_dir.join("comparison.csv"), &report.to_csv())?;
            write(&args.out_dir.join("summary.csv"), &report.summary_csv())?;
            let meta = json!({
                "benchmark": "friedman",
                "variance_reading": "Y ~ N(Z, V) with V a variance, clamped below at 1e-6",
                "n_train": spec.n_train, "n_cal": spec.n_cal, "n_test": spec.n_test,
                "alpha": spec.alpha, "cqr_levels": [spec.cqr_levels.0, spec.cqr_levels.1],
                "trees": spec.trees.trees, "max_leaves": spec.trees.max_leaves,
                "learning_rate": spec.trees.learning_rate,
                "min_node_fraction": spec.trees.min_node_fraction,
                "seed": spec.seed,
                "trained_models": report.trained_models,
                "wall_secs": report.wall_time.as_secs_f64(),
            });
            write(&args.out_dir.join("meta.json"), &(serde_json::to_string_pretty(&meta).expect("valid") + "\n"))?;
            println!("wrote comparison.csv, summary.csv and meta.json to {}", args.out_dir.display());
        }
    }
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.input).map_err(|e| io_err(&args.input, e))?;
    let file = AllocationsFile::from_json(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.input.display())))?;
    let t = tables(&file).map_err(|e| CliError::Data(format!("{}: {e}", args.input.display())))?;
    fs::create_dir_all(&args.out_dir).map_err(|e| io_err(&args.out_dir, e))?;
    write(&args.out_dir.join("rank_matrix.csv"), &t.rank_matrix)?;
    write(&args.out_dir.join("top5.csv"), &t.top5)?;
    let agreement = args.out_dir.join("agreement.csv");
    match &t.agreement {
        Some(a) => write(&agreement, a)?,
        None if agreement.exists() => {
            fs::remove_file(&agreement).map_err(|e| io_err(&agreement, e))?
        }
        None => {}
    }
    println!(
        "{} records, {} features; agreement table {}",
        file.records.len(),
        file.features.len(),
        if t.agreement.is_some() { "written" } else { "not applicable" }
    );
    Ok(())
}
