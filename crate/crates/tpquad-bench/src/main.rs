//! `tpq`: benchmark CLI.
//!
//! Subcommands: `bench ungm|radar` runs a filtering benchmark and writes a
//! JSON report (plus CSV, and SVG boxplots with `--plots`);
//! `precompute-weights` persists the quadrature weight sets of a
//! configuration; `report` reformats an existing report. Exit codes:
//! 0 success, 1 configuration error, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::SystemTime;

use clap::{Parser, Subcommand, ValueEnum};

use tpquad_bench::config::BenchConfig;
use tpquad_bench::error::{BenchError, Result};
use tpquad_bench::report::MetricsReport;
use tpquad_bench::runner;
use tpquad_bench::scenario::ScenarioKind;
use tpquad_bench::svg;

#[derive(Parser)]
#[command(name = "tpq", about = "Student-t process quadrature filtering benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Ungm,
    Radar,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
    Md,
}

#[derive(Subcommand)]
enum Command {
    /// Run a filtering benchmark and write a report.
    Bench {
        scenario: ScenarioArg,
        /// TOML configuration; defaults are the built-in benchmark constants.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Report output path (JSON). A CSV table is written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write SVG boxplots of per-trajectory RMSE and INC.
        #[arg(long)]
        plots: bool,
    },
    /// Compute and persist the quadrature weight sets of a configuration.
    PrecomputeWeights {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reformat an existing JSON report.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: ReportFormat,
    },
}

fn load_config(path: &Path) -> Result<BenchConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
    BenchConfig::from_toml(&text)
}

fn bench(
    scenario: ScenarioArg,
    config: Option<PathBuf>,
    trajectories: Option<usize>,
    steps: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    plots: bool,
) -> Result<()> {
    let kind = match scenario {
        ScenarioArg::Ungm => ScenarioKind::Ungm,
        ScenarioArg::Radar => ScenarioKind::Radar,
    };
    let mut cfg = match config {
        Some(path) => load_config(&path)?,
        None => match kind {
            ScenarioKind::Ungm => BenchConfig::ungm_default(),
            ScenarioKind::Radar => BenchConfig::radar_default(),
        },
    };
    if cfg.scenario.kind != kind {
        return Err(BenchError::Config(format!(
            "config is for '{}', command line asked for '{}'",
            cfg.scenario.kind.as_str(),
            kind.as_str()
        )));
    }
    if trajectories.is_some() {
        cfg.scenario.trajectories = trajectories;
    }
    if steps.is_some() {
        cfg.scenario.steps = steps;
    }
    if seed.is_some() {
        cfg.scenario.seed = seed;
    }

    let started = std::time::Instant::now();
    let mut report = runner::run_benchmark(&cfg)?;
    report.timestamp = Some(unix_timestamp());
    eprintln!(
        "benchmark finished in {:.1} s ({} trajectories x {} steps, {} filters)",
        started.elapsed().as_secs_f64(),
        report.scenario.trajectories,
        report.scenario.steps,
        report.filters.len()
    );

    let out_path = out.unwrap_or_else(|| PathBuf::from(format!("report_{}.json", kind.as_str())));
    std::fs::write(&out_path, report.to_json()?)?;
    let csv_path = out_path.with_extension("csv");
    std::fs::write(&csv_path, report.to_csv())?;
    eprintln!("wrote {} and {}", out_path.display(), csv_path.display());

    if plots {
        write_plots(&report, &out_path)?;
    }
    print!("{}", report.to_markdown());
    Ok(())
}

fn write_plots(report: &MetricsReport, out_path: &Path) -> Result<()> {
    let rmse_series: Vec<(String, Vec<f64>)> = report
        .filters
        .iter()
        .map(|f| (f.label.clone(), f.rmse_per_trajectory.clone()))
        .collect();
    let inc_series: Vec<(String, Vec<f64>)> = report
        .filters
        .iter()
        .map(|f| (f.label.clone(), f.inc_per_trajectory.clone()))
        .collect();
    let stem = out_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("report");
    let dir = out_path.parent().unwrap_or(Path::new("."));
    for (name, series, title, outliers) in [
        ("rmse_boxplot", &rmse_series, "per-trajectory RMSE", true),
        ("rmse_boxplot_no_outliers", &rmse_series, "per-trajectory RMSE (whisker range)", false),
        ("inc_boxplot", &inc_series, "per-trajectory INC", true),
        ("inc_boxplot_no_outliers", &inc_series, "per-trajectory INC (whisker range)", false),
    ] {
        let path = dir.join(format!("{stem}_{name}.svg"));
        std::fs::write(&path, svg::boxplot_svg(series, title, outliers))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn precompute(config: PathBuf, out: PathBuf) -> Result<()> {
    let cfg = load_config(&config)?;
    let cache = runner::precompute_weights(&cfg)?;
    cache.save(&out)?;
    eprintln!("wrote {} weight sets to {}", cache.entries.len(), out.display());
    Ok(())
}

fn reformat(input: PathBuf, format: ReportFormat) -> Result<()> {
    let text = std::fs::read_to_string(&input)?;
    let report = MetricsReport::from_json(&text)?;
    match format {
        ReportFormat::Csv => print!("{}", report.to_csv()),
        ReportFormat::Json => println!("{}", report.to_json()?),
        ReportFormat::Md => print!("{}", report.to_markdown()),
    }
    Ok(())
}

fn unix_timestamp() -> String {
    let secs = SystemTime::now()
        .duration_since(SystemTime::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("{secs}")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bench {
            scenario,
            config,
            trajectories,
            steps,
            seed,
            out,
            plots,
        } => bench(scenario, config, trajectories, steps, seed, out, plots),
        Command::PrecomputeWeights { config, out } => precompute(config, out),
        Command::Report { input, format } => reformat(input, format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems count as configuration errors.
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
