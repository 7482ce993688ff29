use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sdapd::attack::blinding_sweep;
use sdapd::countermeasures::capacitive_response_vs_bias;
use sdapd::detector::DetectorConfig;
use sdapd::io::scenario::{RangeSpec, Spacing};
use sdapd::io::{csv_out, ingest_waveform, load_calibration, load_scenario, run_scenario, Grid};
use sdapd::sd::{count_clicks, dark_count_kink, dark_count_scan, peak_stats_skip, sd_transform};
use sdapd::{Error, Result};

/// Gated self-differencing APD simulator and blinding-attack harness.
///
/// Exit status: 0 on success, 1 for invalid input, 2 for runtime failures
/// (including failed expectations under `report`).
#[derive(Debug, Parser)]
#[command(name = "sdapd", version)]
struct Cli {
    /// Override every scenario's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory receiving CSV artifacts.
    #[arg(long, global = true, default_value = "out")]
    output_dir: PathBuf,
    /// Calibration file replacing the built-in one.
    #[arg(long, global = true)]
    calibration: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run scenario files and write their CSV artifacts.
    Run {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Run scenario files and compare against their embedded expectations.
    Report {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Quick one-dimensional sweep without a scenario file.
    Scan {
        #[arg(value_enum)]
        kind: ScanKind,
        /// First grid value: energy in J, level in V or bias reduction in V.
        #[arg(long)]
        start: f64,
        #[arg(long)]
        stop: f64,
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// Logarithmic instead of linear spacing.
        #[arg(long)]
        log: bool,
        /// Gate periods per point.
        #[arg(long)]
        periods: Option<usize>,
        /// CSV file name inside the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Apply self-differencing to a waveform file and print peak statistics.
    Ingest {
        waveform: PathBuf,
        /// Discrimination level, V.
        #[arg(long, default_value_t = 0.025)]
        level: f64,
        /// Leading periods left out of the statistics.
        #[arg(long, default_value_t = 1)]
        skip: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScanKind {
    Blinding,
    Dark,
    Capacitive,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn base_config(cli: &Cli) -> Result<DetectorConfig> {
    let base = DetectorConfig::default();
    match &cli.calibration {
        Some(path) => Ok(load_calibration(path)?.apply(&base)),
        None => Ok(base),
    }
}

fn execute(cli: &Cli) -> Result<ExitCode> {
    let base = base_config(cli)?;
    match &cli.command {
        Command::Run { scenarios } => {
            run_all(cli, &base, scenarios, false)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { scenarios } => {
            let ok = run_all(cli, &base, scenarios, true)?;
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Scan {
            kind,
            start,
            stop,
            count,
            log,
            periods,
            output,
        } => {
            let grid = Grid::Range(RangeSpec {
                start: *start,
                stop: Some(*stop),
                step: None,
                count: *count,
                spacing: if *log { Spacing::Log } else { Spacing::Linear },
            });
            let values = grid.values("grid")?;
            scan(cli, &base, *kind, &values, *periods, output.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Ingest { waveform, level, skip } => {
            ingest(waveform, *level, *skip)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Load everything first so a bad file fails before any simulation runs.
fn run_all(cli: &Cli, base: &DetectorConfig, paths: &[PathBuf], report: bool) -> Result<bool> {
    let mut scenarios = paths
        .iter()
        .map(|p| load_scenario(p, base))
        .collect::<Result<Vec<_>>>()?;
    if let Some(seed) = cli.seed {
        scenarios.iter_mut().for_each(|s| s.seed = seed);
    }
    let mut all_pass = true;
    for s in &scenarios {
        eprintln!("== {} ({}, seed {})", s.name, s.analysis.name(), s.seed);
        let r = run_scenario(s, &cli.output_dir)?;
        for line in &r.log {
            eprintln!("   {line}");
        }
        for out in &r.outputs {
            eprintln!("   wrote {}", out.display());
        }
        if report {
            for c in &r.checks {
                println!(
                    "{:<6} {}/{}: expected {}, observed {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    s.name,
                    c.name,
                    c.expected,
                    c.observed
                );
            }
        }
        all_pass &= r.all_checks_pass();
    }
    Ok(all_pass)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn scan(
    cli: &Cli,
    base: &DetectorConfig,
    kind: ScanKind,
    values: &[f64],
    periods: Option<usize>,
    output: Option<&Path>,
) -> Result<()> {
    let seed = cli.seed.unwrap_or(1);
    let (default_name, default_periods) = match kind {
        ScanKind::Blinding => ("blinding_scan.csv", 480),
        ScanKind::Dark => ("dark_scan.csv", 400_000),
        ScanKind::Capacitive => ("capacitive_scan.csv", 1920),
    };
    let periods = periods.unwrap_or(default_periods);
    let path = cli.output_dir.join(output.unwrap_or(Path::new(default_name)));
    match kind {
        ScanKind::Blinding => {
            let points = blinding_sweep(base, values, periods, seed)?;
            csv_out::write_sweep(create(&path)?, &points)?;
        }
        ScanKind::Dark => {
            let curve = dark_count_scan(base, values, periods, seed)?;
            if let Some(k) = dark_count_kink(&curve) {
                eprintln!("dark-count kink at {:.2} mV", k * 1e3);
            }
            csv_out::write_dark(create(&path)?, &curve, periods)?;
        }
        ScanKind::Capacitive => {
            let points = capacitive_response_vs_bias(base, values, periods, seed)?;
            csv_out::write_capacitive(create(&path)?, &[(base.filter_enabled, points)])?;
        }
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn ingest(path: &Path, level: f64, skip: usize) -> Result<()> {
    let w = ingest_waveform(path)?;
    if skip >= w.period_count() {
        return Err(Error::field(
            "skip",
            format!("{skip} leaves none of the {} periods", w.period_count()),
        ));
    }
    let pre = peak_stats_skip(&w, skip)?;
    let sd = peak_stats_skip(&sd_transform(&w)?, skip)?;
    let clicks = count_clicks(&sd, level)?;
    println!("periods        {}", sd.period_count);
    println!("pre_sd_mean_v  {}", csv_out::num(pre.mean_peak));
    println!("pre_sd_std_v   {}", csv_out::num(pre.std_peak));
    println!("sd_mean_v      {}", csv_out::num(sd.mean_peak));
    println!("sd_std_v       {}", csv_out::num(sd.std_peak));
    println!("sd_max_v       {}", csv_out::num(sd.max_peak()));
    println!("clicks         {}", clicks.count);
    println!("click_rate     {}", csv_out::num(clicks.rate));
    Ok(())
}
