//! Command-line interface: test a dataset, run simulation studies, or run
//! the series pipeline (decompose, AR-prewhiten, test).

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use icmtest::core::datagen::SettingKind;
use icmtest::core::resampling::ResamplingPlan;
use icmtest::core::stats::StatisticSpec;
use icmtest::pipeline::PipelineConfig;
use icmtest::report::{parse_ica, parse_scheme, parse_stat, TestReportDoc, ICA_NAMES, STAT_NAMES};
use icmtest::sim::SimConfig;
use icmtest::{io, parallel, pipeline, sim};

#[derive(Parser)]
#[command(
    name = "icmtest",
    version,
    about = "Tests whether multivariate observations satisfy an independent component model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a CSV dataset for the validity of the independent component model.
    Test(TestArgs),
    /// Estimate size/power of the test over a simulation grid.
    Simulate(SimulateArgs),
    /// Decompose a multivariate series, AR-prewhiten each component, and
    /// test the residual vectors.
    Pipeline(PipelineArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Statistic family.
    #[arg(long, default_value = "rank-gauss", value_parser = clap::builder::PossibleValuesParser::new(STAT_NAMES))]
    stat: String,

    /// Kernel parameter of the weight.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,

    /// Resampling scheme: perm or boot.
    #[arg(long, default_value = "perm", value_parser = ["perm", "boot", "permutation", "bootstrap"])]
    scheme: String,

    /// Number of resamples.
    #[arg(short = 'M', long, default_value_t = 500)]
    resamples: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Rejection level used by --gate and the simulate tables.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// Worker threads (0 = all cores); ICMTEST_THREADS overrides.
    #[arg(long, default_value_t = 0)]
    threads: usize,

    /// Embed wall-clock timings in output files (off keeps reruns
    /// byte-identical; timings always go to stderr).
    #[arg(long)]
    timing: bool,

    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    /// Input CSV (rows = observations).
    #[arg(long)]
    input: PathBuf,

    /// Unmixing estimator.
    #[arg(long, default_value = "fastica-tanh", value_parser = clap::builder::PossibleValuesParser::new(ICA_NAMES))]
    ica: String,

    /// Exit with code 2 when the test rejects at --alpha.
    #[arg(long)]
    gate: bool,

    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation setting: 1 (independent mix), 2 (spherical t), 3 (Clayton).
    #[arg(long)]
    setting: u8,

    /// Sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    n_list: Vec<usize>,

    /// Degrees-of-freedom grid for setting 2 ("inf" allowed).
    #[arg(long, value_delimiter = ',')]
    df_list: Vec<String>,

    /// Omega grid for setting 3.
    #[arg(long, value_delimiter = ',')]
    omega_list: Vec<f64>,

    /// Monte Carlo replications per grid cell.
    #[arg(short = 'R', long, default_value_t = 200)]
    replications: usize,

    /// One resample per replication, pooled (fast; needs R >= 100).
    #[arg(long)]
    warp_speed: bool,

    #[arg(long, default_value = "fastica-tanh", value_parser = clap::builder::PossibleValuesParser::new(ICA_NAMES))]
    ica: String,

    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct PipelineArgs {
    /// Input CSV (rows = time points, columns = channels).
    #[arg(long)]
    input: PathBuf,

    /// Estimator for the component decomposition stage.
    #[arg(long, default_value = "jade", value_parser = clap::builder::PossibleValuesParser::new(ICA_NAMES))]
    ica: String,

    /// Largest AR order considered by the AIC selection.
    #[arg(long, default_value_t = 20)]
    max_ar_order: usize,

    /// One-based component subset to re-test (e.g. --columns 4,7,8).
    #[arg(long, value_delimiter = ',')]
    columns: Vec<usize>,

    /// Exit with code 2 when the test rejects at --alpha.
    #[arg(long)]
    gate: bool,

    #[command(flatten)]
    common: CommonArgs,
}

fn main() -> ExitCode {
    // Per the interface contract: 0 success, 2 gated rejection, 1 any error.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version are successful exits.
            use clap::error::ErrorKind;
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Pipeline(args) => cmd_pipeline(args),
    }
}

fn init_threads(requested: usize) -> Result<usize> {
    let from_env = std::env::var("ICMTEST_THREADS")
        .ok()
        .map(|v| {
            v.parse::<usize>()
                .map_err(|_| anyhow!("ICMTEST_THREADS must be an integer, got {v:?}"))
        })
        .transpose()?;
    let n = match from_env.unwrap_or(requested) {
        0 => std::thread::available_parallelism().map_or(1, |v| v.get()),
        n => n,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("thread pool init")?;
    Ok(n)
}

fn parse_common(common: &CommonArgs) -> Result<(StatisticSpec, ResamplingPlan)> {
    if !(common.alpha > 0.0 && common.alpha < 1.0) {
        bail!("--alpha must lie strictly between 0 and 1");
    }
    if !(common.gamma > 0.0 && common.gamma.is_finite()) {
        bail!("--gamma must be positive");
    }
    let spec = parse_stat(&common.stat, common.gamma)
        .ok_or_else(|| anyhow!("unknown statistic {:?}", common.stat))?;
    let scheme =
        parse_scheme(&common.scheme).ok_or_else(|| anyhow!("unknown scheme {:?}", common.scheme))?;
    let plan = ResamplingPlan::new(scheme, common.resamples, common.seed)
        .map_err(|e| anyhow!("{e}"))?;
    Ok((spec, plan))
}

fn write_output(common: &CommonArgs, text: &str) -> Result<()> {
    match &common.output {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_test(args: TestArgs) -> Result<ExitCode> {
    let threads = init_threads(args.common.threads)?;
    let (spec, plan) = parse_common(&args.common)?;
    let method = parse_ica(&args.ica).ok_or_else(|| anyhow!("unknown estimator {:?}", args.ica))?;
    let x = io::read_matrix(&args.input)?;
    if x.nrows() <= x.ncols() {
        bail!(
            "need more observations than coordinates, got {} x {}",
            x.nrows(),
            x.ncols()
        );
    }
    let start = Instant::now();
    let report = parallel::run_test(&x, method, &spec, &plan).map_err(|e| anyhow!("{e}"))?;
    let elapsed = start.elapsed().as_millis() as u64;

    let embedded = if args.common.timing { elapsed } else { 0 };
    let doc = TestReportDoc::from_report(&report, x.nrows(), x.ncols(), embedded);
    write_output(&args.common, &doc.render())?;
    eprintln!(
        "statistic {:.6e}  p-value {:.6}  (M = {}, {} failed, {} threads, {} ms)",
        report.statistic.value, report.p_value, report.m_used, report.m_failed, threads, elapsed
    );
    if args.gate && report.p_value <= args.common.alpha {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode> {
    let threads = init_threads(args.common.threads)?;
    let (spec, plan) = parse_common(&args.common)?;
    let method = parse_ica(&args.ica).ok_or_else(|| anyhow!("unknown estimator {:?}", args.ica))?;
    if args.replications == 0 {
        bail!("--replications must be at least 1");
    }
    let (kind, params) = match args.setting {
        1 => {
            if !args.df_list.is_empty() || !args.omega_list.is_empty() {
                bail!("setting 1 takes no parameter grid");
            }
            (SettingKind::IndepMix, Vec::new())
        }
        2 => {
            if args.df_list.is_empty() {
                bail!("setting 2 needs --df-list");
            }
            let dfs = args
                .df_list
                .iter()
                .map(|v| {
                    if v.eq_ignore_ascii_case("inf") {
                        Ok(f64::INFINITY)
                    } else {
                        v.parse::<f64>().map_err(|_| anyhow!("bad df {v:?}"))
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            if dfs.iter().any(|&d| d <= 0.0) {
                bail!("degrees of freedom must be positive");
            }
            (SettingKind::SphericalT, dfs)
        }
        3 => {
            if args.omega_list.is_empty() {
                bail!("setting 3 needs --omega-list");
            }
            if args.omega_list.iter().any(|&w| w < 0.0) {
                bail!("omega must be non-negative");
            }
            (SettingKind::ClaytonCopula, args.omega_list.clone())
        }
        other => bail!("unknown setting {other}; use 1, 2, or 3"),
    };
    let cfg = SimConfig {
        kind,
        params,
        n_list: args.n_list.clone(),
        replications: args.replications,
        alpha: args.common.alpha,
        method,
        spec,
        scheme: plan.scheme(),
        m: plan.m(),
        seed: plan.seed(),
        warp_speed: args.warp_speed,
        timing: args.common.timing,
    };
    let start = Instant::now();
    let rows = sim::run(&cfg).map_err(|e| anyhow!("{e}"))?;
    let csv = sim::render_csv(&cfg, &rows);
    write_output(&args.common, &csv)?;
    eprintln!(
        "{} grid cells, {} replications each ({} threads, {} ms)",
        rows.len(),
        args.replications,
        threads,
        start.elapsed().as_millis()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_pipeline(args: PipelineArgs) -> Result<ExitCode> {
    let threads = init_threads(args.common.threads)?;
    let (spec, plan) = parse_common(&args.common)?;
    let method = parse_ica(&args.ica).ok_or_else(|| anyhow!("unknown estimator {:?}", args.ica))?;
    let x = io::read_matrix(&args.input)?;
    let cfg = PipelineConfig {
        decomposition: method,
        max_ar_order: args.max_ar_order,
        columns: args.columns.clone(),
        test_method: method,
        spec,
        plan,
    };
    let start = Instant::now();
    let doc = pipeline::run(&x, &cfg)?;
    let p_value = doc.test.p_value;
    write_output(&args.common, &doc.render())?;
    eprintln!(
        "pipeline p-value {:.6} over {} residual vectors ({} threads, {} ms)",
        p_value,
        doc.test.n,
        threads,
        start.elapsed().as_millis()
    );
    if args.gate && p_value <= args.common.alpha {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}
