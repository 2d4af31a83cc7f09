//! Command-line front end: `estimate`, `simulate`, `selftest`.
//!
//! Exit codes: 0 success, 1 internal failure, 2 invalid input or usage.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bias_correction::{estimate, PipelineConfig};
use crate::bootstrap::{
    interval, mn_bootstrap_both, BootstrapConfig, IntervalMethod, Resampling,
};
use crate::dataset::{load_csv, YColumn};
use crate::error::{Error, Result};
use crate::json;
use crate::selftest;
use crate::simulation::{raw_csv, report_text, run_study, Cell, StudyConfig};

pub const THREADS_ENV: &str = "ACBC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "acbc", version, about = "Bias-corrected nearest-neighbor rank correlation")]
pub struct Cli {
    /// Worker threads [default: all cores, or $ACBC_THREADS]
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate both coefficients with bootstrap intervals for a CSV file
    Estimate(EstimateArgs),
    /// Run the Gaussian-copula Monte-Carlo study over a (rho, d, n) grid
    Simulate(SimulateArgs),
    /// Run the oracle-equivalence suites
    Selftest(SelftestArgs),
}

/// A seed, or `entropy` for a random one.
#[derive(Debug, Clone, Copy)]
pub struct SeedArg(pub u64);

fn parse_seed(s: &str) -> std::result::Result<SeedArg, String> {
    if s.eq_ignore_ascii_case("entropy") {
        return Ok(SeedArg(rand::random()));
    }
    s.parse()
        .map(SeedArg)
        .map_err(|_| format!("expected an unsigned integer or `entropy`, got {s:?}"))
}

fn parse_y_column(s: &str) -> std::result::Result<YColumn, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ResamplingArg {
    With,
    Without,
}

impl From<ResamplingArg> for Resampling {
    fn from(r: ResamplingArg) -> Self {
        match r {
            ResamplingArg::With => Resampling::WithReplacement,
            ResamplingArg::Without => Resampling::WithoutReplacement,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum IntervalArg {
    Normal,
    Percentile,
}

impl From<IntervalArg> for IntervalMethod {
    fn from(r: IntervalArg) -> Self {
        match r {
            IntervalArg::Normal => IntervalMethod::Normal,
            IntervalArg::Percentile => IntervalMethod::Percentile,
        }
    }
}

/// Options shared by `estimate` and `simulate`.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Total degree of the power basis
    #[arg(long, default_value_t = 2)]
    pub degree: u32,
    /// c in lambda_n = n^(-c)
    #[arg(long, default_value_t = 0.85)]
    pub lambda_exponent: f64,
    /// Fit on raw covariates instead of min-max scaled ones
    #[arg(long)]
    pub no_scale: bool,
    /// Clamp fitted probabilities into [0, 1] (experimental)
    #[arg(long)]
    pub clamp_ghat: bool,
    /// Largest n for which the n x n fitted matrix is materialized
    #[arg(long, default_value_t = 20_000)]
    pub ghat_dense_cap: usize,
    /// Bootstrap replicates
    #[arg(long, default_value_t = 200)]
    pub bootstrap_reps: usize,
    /// Bootstrap subsample size [default: floor(sqrt(n))]
    #[arg(long)]
    pub m: Option<usize>,
    /// Resampling scheme for bootstrap subsamples
    #[arg(long, value_enum, default_value_t = ResamplingArg::With)]
    pub resampling: ResamplingArg,
    /// Confidence interval construction
    #[arg(long, value_enum, default_value_t = IntervalArg::Normal)]
    pub interval: IntervalArg,
    /// Nominal level: intervals have coverage 1 - alpha
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Random seed, or `entropy`
    #[arg(long, value_parser = parse_seed, default_value = "0")]
    pub seed: SeedArg,
}

impl ModelArgs {
    fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            degree: self.degree,
            lambda_exponent: self.lambda_exponent,
            scale_covariates: !self.no_scale,
            clamp_ghat: self.clamp_ghat,
            ghat_dense_cap: self.ghat_dense_cap,
            ..PipelineConfig::default()
        }
    }

    fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            b_reps: self.bootstrap_reps,
            m: self.m,
            seed: self.seed.0,
            resampling: self.resampling.into(),
            interval: self.interval.into(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "--alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        self.pipeline().validate()
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Input CSV file
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Response column: 0-based index or `last`
    #[arg(long, value_parser = parse_y_column, default_value = "last")]
    pub y_column: YColumn,
    /// Output JSON path, or `-` for stdout
    #[arg(long, default_value = "-")]
    pub output: String,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Latent correlation; repeat for several values
    #[arg(long, required = true)]
    pub rho: Vec<f64>,
    /// Covariate dimension; repeatable
    #[arg(long, required = true)]
    pub d: Vec<usize>,
    /// Sample size; repeatable
    #[arg(long, required = true)]
    pub n: Vec<usize>,
    /// Monte-Carlo replications per cell
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    /// Directory receiving report.json, report.txt and raw.csv
    #[arg(long, default_value = "acbc-sim")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Small instances only (n <= 128)
    #[arg(long)]
    pub quick: bool,
}

#[derive(Debug, Serialize)]
struct EstimateConfigOut {
    y_column: String,
    degree: u32,
    lambda_exponent: f64,
    lambda: f64,
    scale_covariates: bool,
    clamp_ghat: bool,
    ghat_dense_cap: usize,
    bootstrap_reps: usize,
    m: Option<usize>,
    resampling: Resampling,
    interval: IntervalMethod,
    alpha: f64,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct EstimateOut {
    n: usize,
    d: usize,
    t_hat: f64,
    l_hat: f64,
    t_bc: f64,
    se_t: Option<f64>,
    se_tbc: Option<f64>,
    ci_t: Option<[f64; 2]>,
    ci_tbc: Option<[f64; 2]>,
    config: EstimateConfigOut,
}

fn write_text(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let input = args
        .input
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("missing required flag --input".into()))?;
    args.model.validate()?;
    let sample = load_csv(input, args.y_column)?;
    let pipeline = args.model.pipeline();
    let boot = args.model.bootstrap();
    let est = estimate(&sample, &pipeline)?;

    let (mut se_t, mut se_tbc, mut ci_t, mut ci_tbc, mut m) = (None, None, None, None, None);
    // zero replicates skips inference
    if boot.b_reps > 0 {
        let (v_t, v_tbc) = mn_bootstrap_both(&sample, &pipeline, &boot)?;
        let a = args.model.alpha;
        let it = interval(boot.interval, est.t_hat, &v_t, a, sample.n())?;
        let ibc = interval(boot.interval, est.t_bc, &v_tbc, a, sample.n())?;
        se_t = Some(v_t.se);
        se_tbc = Some(v_tbc.se);
        ci_t = Some([it.lo, it.hi]);
        ci_tbc = Some([ibc.lo, ibc.hi]);
        m = Some(v_t.m);
    }

    let out = EstimateOut {
        n: est.n,
        d: est.d,
        t_hat: est.t_hat,
        l_hat: est.l_hat,
        t_bc: est.t_bc,
        se_t,
        se_tbc,
        ci_t,
        ci_tbc,
        config: EstimateConfigOut {
            y_column: args.y_column.to_string(),
            degree: pipeline.degree,
            lambda_exponent: pipeline.lambda_exponent,
            lambda: pipeline.lambda(est.n),
            scale_covariates: pipeline.scale_covariates,
            clamp_ghat: pipeline.clamp_ghat,
            ghat_dense_cap: pipeline.ghat_dense_cap,
            bootstrap_reps: boot.b_reps,
            m,
            resampling: boot.resampling,
            interval: boot.interval,
            alpha: args.model.alpha,
            seed: boot.seed,
        },
    };
    let text = json::to_string(&out);
    if args.output == "-" {
        let mut stdout = std::io::stdout().lock();
        stdout
            .write_all(text.as_bytes())
            .and_then(|_| stdout.flush())
            .map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })
    } else {
        write_text(Path::new(&args.output), &text)
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    args.model.validate()?;
    let mut grid = Vec::new();
    for &rho in &args.rho {
        for &d in &args.d {
            for &n in &args.n {
                grid.push(Cell { rho, d, n });
            }
        }
    }
    let cfg = StudyConfig {
        reps: args.reps,
        alpha: args.model.alpha,
        seed: args.model.seed.0,
        pipeline: args.model.pipeline(),
        bootstrap: args.model.bootstrap(),
    };
    let out = run_study(&grid, &cfg)?;

    fs::create_dir_all(&args.out_dir).map_err(|source| Error::Io {
        path: args.out_dir.clone(),
        source,
    })?;
    write_text(&args.out_dir.join("report.json"), &json::to_string(&out.report))?;
    write_text(&args.out_dir.join("report.txt"), &report_text(&out.report))?;
    write_text(&args.out_dir.join("raw.csv"), &raw_csv(&out.records))?;
    eprint!("{}", report_text(&out.report));
    Ok(())
}

/// Prints one line per suite; true iff all passed.
pub fn cmd_selftest(args: &SelftestArgs) -> bool {
    let outcomes = selftest::run_all(args.quick);
    for o in &outcomes {
        println!(
            "{} {:<24} {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
    }
    outcomes.iter().all(|o| o.passed)
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let threads = match flag {
        Some(t) => Some(t),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| {
                Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::InvalidParameter("--threads must be at least 1".into()));
        }
        // a pool already exists when called twice in one process; keep it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

fn one_line(err: &clap::Error) -> String {
    let rendered = err.render().to_string();
    rendered
        .lines()
        .map(str::trim)
        .take_while(|l| !l.starts_with("Usage:"))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{}", e.render());
                    0
                }
                _ => {
                    eprintln!("{}", one_line(&e));
                    2
                }
            };
        }
    };
    if let Err(e) = configure_threads(cli.threads) {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    let result = match &cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Selftest(a) => {
            return if cmd_selftest(a) { 0 } else { 1 };
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
