mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eigsmooth::optimizer::{
    acsa_linesearch_run, acsa_run, nesterov_smooth_baseline, subgradient_baseline, Objective,
    RunResult,
};
use eigsmooth::phase::{monte_carlo_gap, ScalingReport};
use eigsmooth::problems::{
    dspca_problem, load_covariance, maxcut_problem, synthetic_covariance, ProblemKind,
};
use eigsmooth::rng::derived;
use eigsmooth::trace::{compare, read_trace_file, write_trace_file, RunReport};
use log::{info, warn};
use serde::Serialize;

use config::{parse_toml, Algorithm, PhaseConfig, RunConfig};

/// Stream tag for problem-instance generation.
const DATA_STREAM: u64 = 0xDA7A;

#[derive(Parser)]
#[command(name = "eigsmooth", version, about = "Maximum-eigenvalue minimization by stochastic smoothing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver on one problem and write its trace and report.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, overriding `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge run reports into one best-objective-vs-eigenvectors table.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo scaling report for the rank-one phase transition.
    Phase {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Aborted(String),
}

impl From<eigsmooth::Error> for Failure {
    fn from(e: eigsmooth::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EIGSMOOTH_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { config, seed, out } => solve(&config, seed, out),
        Command::Compare { reports, out } => compare_reports(&reports, out),
        Command::Phase { config, out } => phase(&config, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Aborted(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<(T, PathBuf), Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let cfg = parse_toml(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let base = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    Ok((cfg, base))
}

fn out_dir(cli: Option<PathBuf>, cfg: Option<&PathBuf>, base: &Path) -> Result<PathBuf, Failure> {
    let dir = cli.unwrap_or_else(|| cfg.map_or_else(|| PathBuf::from("."), |d| base.join(d)));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn run_algorithm(obj: &impl Objective, cfg: &RunConfig) -> RunResult {
    match cfg.algorithm {
        Algorithm::StochLs => acsa_linesearch_run(obj, &cfg.solver()),
        Algorithm::Acsa => acsa_run(obj, &cfg.solver()),
        Algorithm::DetSmooth => nesterov_smooth_baseline(obj, &cfg.smooth()),
        Algorithm::Subgrad => subgradient_baseline(obj, &cfg.subgradient()),
    }
}

fn solve(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let (mut cfg, base): (RunConfig, _) = read_config(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(Failure::Usage)?;
    let dir = out_dir(out, cfg.out_dir.as_ref(), &base)?;
    let mut rng = derived(cfg.seed, &[DATA_STREAM]);
    info!("{} on {:?} n={} seed={}", cfg.algorithm.name(), cfg.problem, cfg.n, cfg.seed);
    let (result, problem) = match cfg.problem {
        ProblemKind::Maxcut => {
            let p = maxcut_problem(cfg.n, cfg.radius.unwrap_or(cfg.n as f64), &mut rng)?;
            (run_algorithm(&p, &cfg), "maxcut")
        }
        ProblemKind::Dspca => {
            let a = match &cfg.data_path {
                Some(rel) => load_covariance(base.join(rel), cfg.n)
                    .map_err(|e| Failure::Usage(format!("data_path: {e}")))?,
                None => synthetic_covariance(cfg.n, cfg.data_rank, &mut rng)?,
            };
            (run_algorithm(&dspca_problem(a)?, &cfg), "dspca")
        }
    };
    let (run, abort) = match result {
        Ok(run) => (run, None),
        Err(a) => {
            let msg = a.to_string();
            (*a.partial, Some(msg))
        }
    };
    let label = cfg.label();
    let trace_name = format!("{label}.trace.csv");
    write_trace_file(&run.trace, dir.join(&trace_name))?;
    let report = RunReport {
        algorithm: cfg.algorithm.name().into(),
        problem: problem.into(),
        n: cfg.n,
        seed: cfg.seed,
        iterations: run.iterations,
        total_eigvecs: run.total_eigvecs,
        best_objective: run.best_objective(),
        final_objective: run.final_objective(),
        completed: abort.is_none(),
        trace_path: trace_name,
    };
    let report_path = dir.join(format!("{label}.report.json"));
    write_json(&report, &report_path)?;
    println!("{}", report_path.display());
    match abort {
        None => Ok(()),
        Some(msg) => {
            warn!("partial trace written to {}", dir.join(&report.trace_path).display());
            Err(Failure::Aborted(msg))
        }
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Usage(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn compare_reports(paths: &[PathBuf], out: Option<PathBuf>) -> Result<(), Failure> {
    let mut traces = Vec::new();
    let mut first: Option<RunReport> = None;
    for path in paths {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        let report: RunReport = serde_json::from_str(&text)
            .map_err(|e| Failure::Usage(format!("{}: not a run report: {e}", path.display())))?;
        if let Some(f) = &first {
            if f.problem != report.problem || f.n != report.n {
                return Err(Failure::Usage(format!(
                    "{}: schema mismatch, {} n={} vs {} n={}",
                    path.display(),
                    report.problem,
                    report.n,
                    f.problem,
                    f.n
                )));
            }
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let trace = read_trace_file(base.join(&report.trace_path))
            .map_err(|e| Failure::Usage(format!("{}: {e}", report.trace_path)))?;
        report
            .check_against(&trace)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        let mut label = report.algorithm.clone();
        if traces.iter().any(|(l, _)| *l == label) {
            label = format!("{label}-s{}-{}", report.seed, traces.len());
        }
        traces.push((label, trace));
        first.get_or_insert(report);
    }
    let table = compare(&traces)?;
    match out {
        Some(p) => table.write_csv(fs::File::create(p)?)?,
        None => match table.write_csv(std::io::stdout().lock()) {
            Err(eigsmooth::Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            other => other?,
        },
    }
    Ok(())
}

#[derive(Serialize)]
struct PhaseSummary<'a> {
    regime: &'a str,
    trials: usize,
    seed: u64,
    #[serde(flatten)]
    report: &'a ScalingReport,
}

fn phase(path: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let (cfg, base): (PhaseConfig, _) = read_config(path)?;
    let rule = cfg.rule().map_err(Failure::Usage)?;
    let (family, n_list) = cfg.family(&base).map_err(Failure::Usage)?;
    let dir = out_dir(out, cfg.out_dir.as_ref(), &base)?;
    let report = monte_carlo_gap(&family, &n_list, rule, cfg.trials, cfg.seed)?;
    let regimes: Vec<&str> = report.rows.iter().map(|r| r.prediction.regime.as_str()).collect();
    let regime = if regimes.windows(2).all(|w| w[0] == w[1]) {
        regimes[0]
    } else {
        "mixed"
    };
    let label = cfg.label.clone().unwrap_or_else(|| "phase".into());
    let mut csv = String::from("n,eps,regime,median_T,predicted_order,slope\n");
    for r in &report.rows {
        let p = &r.prediction;
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.n,
            p.eps,
            p.regime.as_str(),
            r.median_t,
            p.predicted_order,
            report.slope
        ));
    }
    fs::write(dir.join(format!("{label}.csv")), csv)?;
    let summary = PhaseSummary {
        regime,
        trials: cfg.trials,
        seed: cfg.seed,
        report: &report,
    };
    let json_path = dir.join(format!("{label}.json"));
    write_json(&summary, &json_path)?;
    info!("regime {regime}, slope {}", report.slope);
    println!("{}", json_path.display());
    Ok(())
}
