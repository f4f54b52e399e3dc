use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use cqed_bayes::engine::{ensemble_stats, filter_record, run_trajectory, Frame, Run};
use cqed_bayes::io::{
    load_calibration, load_config, load_record, save_record, save_states, trajectory_files, write_json, FilterSummary,
    Manifest, ManifestEntry,
};
use cqed_bayes::steady::{steady_state, sweep, SweepAxis, SweepParam};
use cqed_bayes::verify::{run_suite, Suite};
use cqed_bayes::{Error, Result};

#[derive(Parser)]
#[command(name = "cqed-bayes", version, about = "Bayesian simulation and filtering of dispersive qubit readout")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "CQED_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameArg {
    Informational,
    Fixed,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate measurement trajectories.
    Simulate {
        config: PathBuf,
        #[arg(short = 'n', long, default_value_t = 1)]
        trajectories: usize,
        /// Base seed; trajectory i uses seed + i. Defaults to the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-time ensemble statistics to summary.json.
        #[arg(long)]
        summary: bool,
    },
    /// Filter a recorded signal.
    Filter {
        record: PathBuf,
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Quadrature frame of a phase-preserving record.
        #[arg(long, value_enum, default_value = "informational")]
        frame: FrameArg,
    },
    /// Run a verification suite and print a JSON report.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print steady-state fields and derived quantities.
    SteadyState {
        config: PathBuf,
        /// Time at which the drive is evaluated.
        #[arg(long, default_value_t = 0.0)]
        at: f64,
    },
    /// Steady state over a parameter grid.
    Sweep {
        config: PathBuf,
        /// `name=v1,v2,...` with name one of chi, kappa, epsilon, eta, phi_a.
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
        #[arg(long, default_value_t = 0.0)]
        at: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_axis(spec: &str) -> Result<SweepAxis> {
    let bad = |m: &str| Error::Config(vec![cqed_bayes::error::Violation::new(format!("axis {spec:?}"), m)]);
    let (name, values) = spec.split_once('=').ok_or_else(|| bad("expected name=v1,v2,..."))?;
    let param: SweepParam = name.trim().parse()?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad("values must be numbers")))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepAxis { param, values })
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn simulate(config: &Path, n: usize, seed: Option<u64>, out: &Path, summary: bool) -> Result<ExitCode> {
    let cfg = load_config(config)?;
    let run = cfg.prepare()?;
    let base = seed.unwrap_or(cfg.seed);
    std::fs::create_dir_all(out)?;
    let entries = (0..n)
        .into_par_iter()
        .map(|i| write_trajectory(&run, base.wrapping_add(i as u64), i as u64, out))
        .collect::<Result<Vec<_>>>()?;
    let summary_file = if summary {
        write_json(&out.join("summary.json"), &ensemble_stats(&run, n, base, 20)?)?;
        Some("summary.json".to_string())
    } else {
        None
    };
    let manifest = Manifest { seed: base, trajectories: n, config: cfg, entries, summary: summary_file };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(ExitCode::SUCCESS)
}

fn write_trajectory(run: &Run, seed: u64, index: u64, out: &Path) -> Result<ManifestEntry> {
    let rec = run_trajectory(run, seed)?;
    let (rows, cal) = trajectory_files(&rec);
    let stem = format!("traj_{index:05}");
    let entry = ManifestEntry {
        index,
        seed,
        record: format!("{stem}.csv"),
        states: format!("{stem}_states.csv"),
        calibration: format!("{stem}_calibration.json"),
        final_rho11: rec.states.last().map_or(f64::NAN, |s| s.rho11()),
    };
    save_record(&out.join(&entry.record), &rows)?;
    save_states(&out.join(&entry.states), run, &rec.states)?;
    write_json(&out.join(&entry.calibration), &cal)?;
    Ok(entry)
}

fn filter(record: &Path, calibration: &Path, config: &Path, out: &Path, frame: FrameArg) -> Result<ExitCode> {
    let run = load_config(config)?.prepare()?;
    let data = load_record(record)?;
    let cal = load_calibration(calibration)?;
    let frame = match frame {
        FrameArg::Informational => Frame::Informational,
        FrameArg::Fixed => Frame::Fixed,
    };
    let result = filter_record(&run, &data, &cal, frame)?;
    std::fs::create_dir_all(out)?;
    save_states(&out.join("states.csv"), &run, &result.record.states)?;
    let last = result.record.states.last().copied().unwrap_or(run.initial);
    let summary = FilterSummary {
        states: "states.csv".into(),
        log_likelihood_global: result.likelihood.global,
        log_likelihood_local: result.likelihood.local,
        final_rho11: last.rho11(),
        final_rho10: last.rho10(),
    };
    write_json(&out.join("filter.json"), &summary)?;
    Ok(ExitCode::SUCCESS)
}

fn verify(suite: &str, seed: u64, out: Option<&Path>) -> Result<ExitCode> {
    let report = run_suite(suite.parse::<Suite>()?, seed)?;
    match out {
        Some(p) => write_json(p, &report)?,
        None => print_json(&report)?,
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        let kind = if c.informational { "info" } else { "FAIL" };
        eprintln!("{kind}: {} = {} (tolerance {})", c.name, c.value, c.tolerance);
    }
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { config, trajectories, seed, out, summary } => {
            simulate(&config, trajectories, seed, &out, summary)
        }
        Command::Filter { record, calibration, config, out, frame } => {
            filter(&record, &calibration, &config, &out, frame)
        }
        Command::Verify { suite, seed, out } => verify(&suite, seed, out.as_deref()),
        Command::SteadyState { config, at } => {
            let cfg = load_config(&config)?;
            print_json(&steady_state(&cfg.system, &cfg.measurement, at)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, axes, at, out } => {
            let cfg = load_config(&config)?;
            let axes = axes.iter().map(|a| parse_axis(a)).collect::<Result<Vec<_>>>()?;
            let points = sweep(&cfg.system, &cfg.measurement, &axes, at)?;
            match out {
                Some(p) => write_json(&p, &points)?,
                None => print_json(&points)?,
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: invalid thread count {n}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
