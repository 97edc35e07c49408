mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use viewpool::domain::Quarter;
use viewpool::evaluator::{read_report, run_backtest, write_report, write_summary_csv, DiskCache, EvaluationReport};
use viewpool::forecaster::{forecast_view_with, write_forecasts, DensityMode};
use viewpool::sampler::{log_marginal_likelihood_with, run_gibbs, write_archive, BridgeConfig, SamplerConfig};
use viewpool::series_io::{load_series, write_series, LoadOptions};

use crate::config::{load_catalogue, parse_methods, RunConfig};

/// Environment variable that overrides the cache directory of `backtest`.
const CACHE_ENV: &str = "VIEWPOOL_CACHE_DIR";

#[derive(Parser)]
#[command(name = "viewpool", version, about = "Pooled density forecasts from Markov-switching AR views")]
struct Cli {
    /// Worker threads for sampler jobs (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a quarterly CSV series and write it in canonical form.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        /// Output CSV; standard output when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Estimate one view on one window and write its draws and forecast.
    Estimate {
        #[command(flatten)]
        job: WindowArgs,
        /// Output directory for `draws.bin` and `forecast.csv`.
        #[arg(long, short, default_value = "out/estimate")]
        out: PathBuf,
        /// `mixture` (exact) or `kernel` (Gaussian kernel over simulated outcomes).
        #[arg(long, default_value = "mixture")]
        density: DensityMode,
    },
    /// Estimate one view on one window and print its log marginal likelihood.
    Evidence {
        #[command(flatten)]
        job: WindowArgs,
        /// Importance draws of the bridge sampler (default: number of posterior draws).
        #[arg(long)]
        proposal_draws: Option<usize>,
    },
    /// Run the recursive backtest described by a config file.
    Backtest {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        t0: Option<Quarter>,
        #[arg(long)]
        first_end: Option<Quarter>,
        #[arg(long)]
        last_end: Option<Quarter>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        keep: Option<usize>,
        /// Comma-separated method tags, e.g. `pi2,w1,ar-recursive`.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// `mixture` or `kernel`; overrides the config.
        #[arg(long)]
        density: Option<DensityMode>,
        /// Recompute every window instead of using the cache.
        #[arg(long)]
        no_cache: bool,
        /// Skip SVG output.
        #[arg(long)]
        no_plots: bool,
    },
    /// Print the summary table of a finished run and rewrite its CSV tables.
    Report {
        /// `report.json` written by `backtest`.
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render fan charts, weight charts and PIT histograms of a finished run.
    Plot {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// CSV with a date column and a value column.
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long)]
    column: Option<String>,
    #[arg(long)]
    start: Option<Quarter>,
    #[arg(long)]
    end: Option<Quarter>,
    /// Input holds levels; convert to year-on-year growth in percent.
    #[arg(long)]
    yoy: bool,
}

impl DataArgs {
    fn load(&self) -> Result<viewpool::domain::TimeSeries> {
        let opts = LoadOptions {
            column: self.column.clone(),
            start: self.start,
            end: self.end,
            yoy: self.yoy,
        };
        load_series(&self.input, &opts).with_context(|| format!("loading {}", self.input.display()))
    }
}

#[derive(Args)]
struct WindowArgs {
    #[command(flatten)]
    data: DataArgs,
    /// `builtin`, `vague`, or a JSON file of view specs.
    #[arg(long, default_value = "builtin")]
    catalogue: String,
    #[arg(long)]
    scenarios: Option<PathBuf>,
    #[arg(long)]
    view: u32,
    /// First quarter of the estimation window (default: start of the data).
    #[arg(long)]
    from: Option<Quarter>,
    /// Last quarter of the estimation window, i.e. the forecast origin (default: end of data).
    #[arg(long)]
    to: Option<Quarter>,
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    #[arg(long, default_value_t = 1000)]
    keep: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl WindowArgs {
    fn run(&self) -> Result<(viewpool::domain::TimeSeries, viewpool::domain::ViewSpec, viewpool::sampler::PosteriorDraws)> {
        let y = self.data.load()?;
        let catalogue = load_catalogue(&self.catalogue, self.scenarios.as_deref())?;
        let idx = catalogue
            .index_of(self.view)
            .ok_or_else(|| viewpool::Error::Invalid(format!("no view with id {}", self.view)))?;
        let view = catalogue.views()[idx].clone();
        let window = y.window(self.from.unwrap_or(y.start()), self.to.unwrap_or(y.end()))?;
        let cfg = SamplerConfig {
            burn_in: self.burn_in,
            keep: self.keep,
            thin: self.thin,
            seed: self.seed,
        };
        cfg.validate()?;
        let draws = run_gibbs(&window, &view, &cfg)?;
        Ok((window, view, draws))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

/// The error chain joined by `: `, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if parts.last().is_none_or(|prev| !prev.ends_with(&msg)) {
            parts.push(msg);
        }
    }
    parts.join(": ")
}

/// 2 for numerical failures, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    let numerical = e
        .chain()
        .filter_map(|c| c.downcast_ref::<viewpool::Error>())
        .any(|c| c.is_numerical());
    if numerical {
        2
    } else {
        1
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Ingest { data, output } => {
            let y = data.load()?;
            log::info!("{} observations, {}..{}", y.len(), y.start(), y.end());
            match output {
                Some(p) => write_series(create(&p)?, &y)?,
                None => write_series(std::io::stdout().lock(), &y)?,
            }
        }
        Command::Estimate { job, out, density } => {
            let (window, _view, draws) = job.run()?;
            let forecast = forecast_view_with(&window, &draws, job.horizon, density)?;
            fs::create_dir_all(&out)?;
            write_archive(std::io::BufWriter::new(create(&out.join("draws.bin"))?), &draws)?;
            write_forecasts(create(&out.join("forecast.csv"))?, std::slice::from_ref(&forecast))?;
            println!(
                "view {} on {}..{}: {} draws; forecast for {} has mean {:.4}, sd {:.4}",
                draws.view_id,
                draws.window_start,
                draws.window_end,
                draws.len(),
                forecast.density.target(),
                forecast.density.mean(),
                forecast.density.variance().sqrt()
            );
        }
        Command::Evidence { job, proposal_draws } => {
            let (window, view, draws) = job.run()?;
            let bridge = BridgeConfig {
                proposal_draws,
                ..BridgeConfig::default()
            };
            let est = log_marginal_likelihood_with(&window, &view, &draws, &bridge)?;
            println!("{}", serde_json::to_string(&est)?);
        }
        Command::Backtest {
            config,
            out,
            t0,
            first_end,
            last_end,
            window,
            horizon,
            seed,
            burn_in,
            keep,
            methods,
            density,
            no_cache,
            no_plots,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = burn_in {
                cfg.sampler.burn_in = v;
            }
            if let Some(v) = keep {
                cfg.sampler.keep = v;
            }
            let out = out.unwrap_or_else(|| cfg.output.clone());
            let mut plan = cfg.to_plan()?;
            plan.t0 = t0.unwrap_or(plan.t0);
            plan.first_end = first_end.unwrap_or(plan.first_end);
            plan.last_end = last_end.unwrap_or(plan.last_end);
            plan.window = window.unwrap_or(plan.window);
            plan.horizon = horizon.unwrap_or(plan.horizon);
            plan.density = density.unwrap_or(plan.density);
            if let Some(m) = methods {
                plan.methods = parse_methods(&m)?;
            }
            let y = load_series(&cfg.data, &cfg.load_options())
                .with_context(|| format!("loading {}", cfg.data.display()))?;
            let cache = if no_cache {
                None
            } else {
                let dir = std::env::var_os(CACHE_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| out.join("cache"));
                Some(DiskCache::new(dir)?)
            };
            let report = run_backtest(&y, &plan, cache)?;
            write_report(&report, &out)?;
            if !no_plots {
                viewpool::plot::emit_plots(&report, &out.join("plots"))?;
            }
            print_summary(&report)?;
            log::info!("results written to {}", out.display());
        }
        Command::Report { input, out } => {
            let report = read_report(&input).with_context(|| format!("reading {}", input.display()))?;
            if let Some(dir) = out {
                write_report(&report, &dir)?;
            }
            print_summary(&report)?;
        }
        Command::Plot { input, out } => {
            let report = read_report(&input).with_context(|| format!("reading {}", input.display()))?;
            let dir = out.unwrap_or_else(|| input.parent().unwrap_or(Path::new(".")).join("plots"));
            for p in viewpool::plot::emit_plots(&report, &dir)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn print_summary(report: &EvaluationReport) -> Result<()> {
    let mut out = std::io::stdout().lock();
    if let Some((first, last, n)) = report.evaluation_sample() {
        writeln!(out, "evaluation sample {first}..{last} ({n} periods)")?;
    }
    write_summary_csv(&mut out, report)?;
    Ok(())
}
