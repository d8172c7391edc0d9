//! `rankshape`: rank-based tests for elliptical shape from the command line.
//!
//! Errors are printed as a single line `error[<kind>]: <message>`. Exit codes:
//! 1 computation or I/O failure, 2 malformed input or configuration,
//! 3 invalid shape matrix.

mod input;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use rankshape::efficiency::{are, dominance_table, table1, table2, table2_cells};
use rankshape::engine::exact_critical_value;
use rankshape::montecarlo::{emit_half_widths, emit_table, DEFAULT_BATTERY, DEFAULT_SEED};
use rankshape::radial::RadialFamily;
use rankshape::sign_rank::decompose;
use rankshape::tabular::fmt3;
use rankshape::{CriticalMode, RadialModel, ScoreFunction, StudyConfig, Table, TestSpec};

pub const SEED_ENV: &str = "RANKSHAPE_SEED";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Config(String),
    V0(String),
    Compute(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Input(_) | Self::Config(_) => 2,
            Self::V0(_) => 3,
            Self::Compute(_) | Self::Io(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Input(_) => "input",
            Self::Config(_) => "config",
            Self::V0(_) => "v0",
            Self::Compute(_) => "compute",
            Self::Io(_) => "io",
        }
    }

    pub fn message(&self) -> String {
        match self {
            Self::Usage(m) | Self::Input(m) | Self::Config(m) | Self::V0(m) | Self::Compute(m) | Self::Io(m) => {
                m.clone()
            }
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // one line, whatever the underlying message looks like
        let msg = self.message().replace('\n', " ");
        write!(f, "error[{}]: {}", self.kind(), msg.trim())
    }
}

/// Parameter and parse problems are the caller's input; everything else is a
/// computation failure.
fn core_err(e: rankshape::Error) -> CliError {
    use rankshape::Error as E;
    match e {
        E::Parse(_)
        | E::InvalidParameter(_)
        | E::OutOfUnitInterval { .. }
        | E::Dimension { .. }
        | E::DimensionRange { .. }
        | E::ScoreDimension { .. }
        | E::TooLarge { .. }
        | E::ZeroDistance { .. } => CliError::Input(e.to_string()),
        E::NotSymmetric { .. } | E::NotPositiveDefinite { .. } | E::ShapeNormalization { .. } => {
            CliError::V0(e.to_string())
        }
        _ => CliError::Compute(e.to_string()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(name = "rankshape", version, about = "Rank-based tests for the shape of elliptical distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test H0: V = V0 on a CSV sample.
    Test {
        /// CSV file, one observation per line, optional header row.
        #[arg(long)]
        data: PathBuf,
        /// Tests to run (repeatable or comma-separated). Defaults to the full battery.
        #[arg(long = "test", value_delimiter = ',')]
        tests: Vec<String>,
        /// "identity" or a k×k CSV file.
        #[arg(long, default_value = "identity")]
        v0: String,
        /// "estimate" or a comma-separated location vector.
        #[arg(long, default_value = "estimate", allow_hyphen_values = true)]
        theta: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run a rejection-frequency study described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Full-scale replications and sample size.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        parallelism: Option<usize>,
        /// Output path stem; .csv, .txt and .json are written.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// ARE of a rank test with respect to the Gaussian test.
    Are {
        #[arg(long)]
        score: String,
        /// Radial density: gaussian, tnu:<nu>, powerexp:<eta>.
        #[arg(long)]
        g1: String,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Efficiency tables.
    Tables {
        #[arg(long, value_enum, default_value_t = Which::All)]
        which: Which,
        /// Dimension of the power-exponential dominance table.
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Simulated exact critical value of a rank test.
    Critical {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        score: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Sample)]
        mode: ModeArg,
        /// Draws in sample mode.
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        /// Sign draws per rank permutation in enumerate mode.
        #[arg(long, default_value_t = 200)]
        sign_rounds: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Which {
    Table1,
    Table2,
    Dominance,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Sample,
    Enumerate,
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Input(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn json_string(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn render(table: &Table, format: Format) -> String {
    match format {
        Format::Csv => table.to_csv(),
        _ => table.to_text(),
    }
}

fn cmd_test(
    data: &Path,
    tests: &[String],
    v0: &str,
    theta: &str,
    alpha: f64,
    format: Format,
) -> Result<String, CliError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Input(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let x = input::read_data(data)?;
    let k = x.cols();
    let v0 = input::read_shape(v0, k)?;
    let theta = input::parse_theta(theta, k)?;
    let names: Vec<String> = if tests.is_empty() {
        DEFAULT_BATTERY.iter().map(|s| s.to_string()).collect()
    } else {
        tests.to_vec()
    };
    let specs: Vec<TestSpec> = names.iter().map(|t| TestSpec::parse(t, k).map_err(core_err)).collect::<Result<_, _>>()?;
    let d = decompose(&x, theta.as_deref(), &v0).map_err(core_err)?;
    let reports = specs.iter().map(|s| s.run(&d, &v0).map_err(core_err)).collect::<Result<Vec<_>, _>>()?;
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(&reports).expect("serializable"),
        Format::Csv | Format::Text => {
            let header = ["test", "statistic", "df", "p_value", "reject"].iter().map(|s| s.to_string()).collect();
            let mut t = Table::new(
                format!("n = {}, k = {}, alpha = {alpha}, theta {}", d.n, d.k, if d.theta_estimated { "estimated" } else { "specified" }),
                header,
            );
            for r in &reports {
                t.push(vec![
                    r.test.clone(),
                    format!("{:.6}", r.statistic),
                    r.df.to_string(),
                    format!("{:.6}", r.p_value),
                    (r.p_value < alpha).to_string(),
                ]);
            }
            if format == Format::Csv {
                t.to_csv()
            } else {
                let mut out = t.to_text();
                for r in &reports {
                    for n in &r.notes {
                        out.push_str(&format!("  {}: {n}\n", r.test));
                    }
                }
                out
            }
        }
    })
}

fn toml_error(path: &Path, text: &str, e: &toml::de::Error) -> CliError {
    let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    CliError::Config(format!("{}:{line}: {}", path.display(), e.message()))
}

pub fn load_config(path: &Path) -> Result<StudyConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| toml_error(path, &text, &e))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    config: &Path,
    full: bool,
    seed: Option<u64>,
    replications: Option<usize>,
    parallelism: Option<usize>,
    output: Option<PathBuf>,
    format: Format,
) -> Result<String, CliError> {
    let mut cfg = load_config(config)?;
    if full {
        cfg.escalate();
    }
    if let Some(r) = replications {
        cfg.replications = r;
    }
    if let Some(p) = parallelism {
        cfg.parallelism = p;
    }
    let seed = match seed.or(cfg.seed) {
        Some(s) => s,
        None => env_seed()?.unwrap_or(DEFAULT_SEED),
    };
    let bad_config = |e: rankshape::Error| CliError::Config(format!("{}: {e}", config.display()));
    let scenarios = cfg.scenarios().map_err(bad_config)?;
    for t in &cfg.tests {
        TestSpec::parse(t, cfg.k).map_err(bad_config)?;
    }
    let result = rankshape::montecarlo::run_study(&scenarios, &cfg.tests, cfg.replications, cfg.alpha, seed, cfg.parallelism)
        .map_err(core_err)?;
    let table = emit_table(&result, cfg.layout).map_err(core_err)?;
    let widths = emit_half_widths(&result, cfg.layout).map_err(core_err)?;
    let json = serde_json::to_string_pretty(&result).expect("serializable");

    if let Some(stem) = output.or_else(|| cfg.output.as_ref().map(PathBuf::from)) {
        let write = |ext: &str, body: &str| {
            let p = stem.with_extension(ext);
            std::fs::write(&p, body).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        };
        write("csv", &table.to_csv())?;
        write("txt", &format!("{}\n{}", table.to_text(), widths.to_text()))?;
        write("json", &json)?;
    }
    Ok(match format {
        Format::Json => json,
        Format::Csv => table.to_csv(),
        Format::Text => format!("seed {seed}\n{}\n{}", table.to_text(), widths.to_text()),
    })
}

fn cmd_are(score: &str, g1: &str, k: usize, format: Format) -> Result<String, CliError> {
    let family = RadialFamily::parse(g1).map_err(core_err)?;
    let model = RadialModel::new(family, k).map_err(core_err)?;
    let score = ScoreFunction::parse(score, k).map_err(core_err)?;
    let v = are(&score, &model).map_err(core_err)?;
    Ok(match format {
        Format::Json => json_string(&json!({
            "score": score.to_string(),
            "g1": family.to_string(),
            "k": k,
            "are": if v.is_finite() { json!(v) } else { serde_json::Value::Null },
            "infinite": v.is_infinite(),
        })),
        Format::Csv => format!("score,g1,k,are\n{score},{family},{k},{}\n", fmt3(v)),
        Format::Text => format!("{}\n", fmt3(v)),
    })
}

fn cmd_tables(which: Which, k: usize, format: Format) -> Result<String, CliError> {
    let want = |w: Which| which == w || which == Which::All;
    if format == Format::Json {
        let mut obj = serde_json::Map::new();
        if want(Which::Table1) {
            let (pe, st) = table1();
            obj.insert("table1_power_exponential".into(), serde_json::to_value(pe).expect("serializable"));
            obj.insert("table1_student".into(), serde_json::to_value(st).expect("serializable"));
        }
        if want(Which::Table2) {
            obj.insert("table2".into(), serde_json::to_value(table2_cells().map_err(core_err)?).expect("serializable"));
        }
        if want(Which::Dominance) {
            obj.insert("dominance".into(), serde_json::to_value(dominance_table(k).map_err(core_err)?).expect("serializable"));
        }
        return Ok(json_string(&serde_json::Value::Object(obj)));
    }
    let mut parts = Vec::new();
    if want(Which::Table1) {
        let (pe, st) = table1();
        parts.push(render(&pe, format));
        parts.push(render(&st, format));
    }
    if want(Which::Table2) {
        parts.push(render(&table2().map_err(core_err)?, format));
    }
    if want(Which::Dominance) {
        parts.push(render(&dominance_table(k).map_err(core_err)?, format));
    }
    Ok(parts.join("\n"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_critical(
    n: usize,
    k: usize,
    score: &str,
    alpha: f64,
    mode: ModeArg,
    draws: usize,
    sign_rounds: usize,
    seed: Option<u64>,
    format: Format,
) -> Result<String, CliError> {
    let score = ScoreFunction::parse(score, k).map_err(core_err)?;
    let seed = match seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(DEFAULT_SEED),
    };
    let mode = match mode {
        ModeArg::Sample => CriticalMode::Sample { draws },
        ModeArg::Enumerate => CriticalMode::Enumerate { sign_rounds },
    };
    let cv = exact_critical_value(n, k, &score, alpha, mode, seed).map_err(core_err)?;
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(&cv).expect("serializable"),
        Format::Csv => format!(
            "score,n,k,alpha,value,standard_error,simulated,seed\n{},{},{},{},{},{},{},{}\n",
            cv.score, cv.n, cv.k, cv.alpha, cv.value, cv.standard_error, cv.simulated, cv.seed
        ),
        Format::Text => format!(
            "{} n={} k={} alpha={}: critical value {:.6} (se {:.6}, {} simulated, seed {})\n",
            cv.score, cv.n, cv.k, cv.alpha, cv.value, cv.standard_error, cv.simulated, cv.seed
        ),
    })
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Test { data, tests, v0, theta, alpha, format } => cmd_test(&data, &tests, &v0, &theta, alpha, format),
        Command::Simulate { config, full, seed, replications, parallelism, output, format } => {
            cmd_simulate(&config, full, seed, replications, parallelism, output, format)
        }
        Command::Are { score, g1, k, format } => cmd_are(&score, &g1, k, format),
        Command::Tables { which, k, format } => cmd_tables(which, k, format),
        Command::Critical { n, k, score, alpha, mode, draws, sign_rounds, seed, format } => {
            cmd_critical(n, k, &score, alpha, mode, draws, sign_rounds, seed, format)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let body = text.split("\n\nUsage:").next().unwrap_or("");
            let msg = body.trim_start_matches("error: ").split_whitespace().collect::<Vec<_>>().join(" ");
            eprintln!("{}", CliError::Usage(msg));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            if !out.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
