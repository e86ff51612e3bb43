// Copyright 2026 The robust-pulse Authors
// SPDX-License-Identifier: Apache-2.0

//! Command-line front end for robust pulse design.

use std::io::Write;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use robust_pulse::drivers::{
    benchmark, landscape_scan, replay_table1, run_scenario_observed, write_atomic, write_json, write_partial_trace,
    write_sweep, BenchmarkOptions, ReplayOptions, ScenarioConfig,
};
use robust_pulse::objective::Distribution;
use robust_pulse::pulses::Pulse;
use robust_pulse::quadrature::Measure;
use robust_pulse::sparsegrid::{smolyak_grid, SamplingSet};
use robust_pulse::Error;

const EXIT_ARGUMENT: u8 = 2;
const EXIT_FIXTURE: u8 = 3;
const EXIT_ABORT: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "robust-pulse", version, about = "Robust quantum control pulses via sparse-grid expectations")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More progress output on stderr; repeat for per-iteration lines.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a Smolyak grid and write its CSV.
    Grid(GridArgs),
    /// Evaluate a stored pulse against its scenario.
    Replay(ReplayArgs),
    /// Optimize a pulse over the configured seeds.
    Optimize(OptimizeArgs),
    /// Pointwise infidelity landscape over two uncertainty axes.
    Scan(ScanArgs),
    /// Compare Smolyak, Monte Carlo and bGRAPE estimates with the dense reference.
    Benchmark(BenchArgs),
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(short = 'd', long = "dim")]
    dim: usize,
    #[arg(short = 'K', long = "level")]
    level: usize,
    /// `legendre:a:b` (uniform on [a, b]) or `hermite` (standard normal).
    #[arg(long, default_value = "legendre:-1:1", allow_hyphen_values = true)]
    measure: String,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario name.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, env = "ROBUST_PULSE_OUT", default_value = "results")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Pulse JSON file.
    #[arg(long)]
    fixture: PathBuf,
    /// Landscape points per axis; 0 skips the landscapes.
    #[arg(long)]
    resolution: Option<usize>,
    /// Random test draws; 0 skips the battery.
    #[arg(long)]
    draws: Option<usize>,
    /// Battery seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Run this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Pulse JSON file.
    #[arg(long)]
    pulse: PathBuf,
    /// Uncertainty indices of the two axes.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0usize, 1])]
    axes: Vec<usize>,
    /// `low:high` for the first axis; defaults to the scenario support.
    #[arg(long, allow_hyphen_values = true)]
    x_range: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    y_range: Option<String>,
    #[arg(long)]
    resolution: Option<usize>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    #[arg(long, default_value_t = 20)]
    every: usize,
    #[arg(long, default_value_t = 50)]
    mc_seeds: usize,
    #[arg(long, default_value_t = 61)]
    mc_samples: usize,
    #[arg(long)]
    no_bgrape: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Exit status plus a message for stderr.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Fixture(_) => EXIT_FIXTURE,
            Error::Aborted(_) => EXIT_ABORT,
            Error::Config(_) | Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => EXIT_ARGUMENT,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn arg_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_ARGUMENT,
        message: message.into(),
    }
}

type CmdResult = Result<(), Failure>;

struct Ui {
    verbose: u8,
    quiet: bool,
}

impl Ui {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn note(&self, level: u8, msg: impl AsRef<str>) {
        if self.verbose >= level {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(EXIT_ARGUMENT);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn execute(cli: Cli) -> CmdResult {
    let ui = Ui {
        verbose: cli.verbose,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Grid(a) => cmd_grid(&ui, a),
        Command::Replay(a) => cmd_replay(&ui, a),
        Command::Optimize(a) => cmd_optimize(&ui, a),
        Command::Scan(a) => cmd_scan(&ui, a),
        Command::Benchmark(a) => cmd_benchmark(&ui, a),
    }
}

fn parse_measure(s: &str) -> Result<Measure, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["hermite"] => Ok(Measure::StandardNormal),
        ["legendre"] => Ok(Measure::Uniform { a: -1.0, b: 1.0 }),
        ["legendre", a, b] => {
            let (a, b) = (parse_f64(a)?, parse_f64(b)?);
            if !(a < b) {
                return Err(arg_error(format!("measure '{s}': need a < b")));
            }
            Ok(Measure::Uniform { a, b })
        }
        _ => Err(arg_error(format!("measure '{s}': expected legendre:a:b or hermite"))),
    }
}

fn parse_f64(s: &str) -> Result<f64, Failure> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| arg_error(format!("'{s}' is not a finite number")))
}

fn parse_range(s: &str) -> Result<(f64, f64), Failure> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| arg_error(format!("range '{s}': expected low:high")))?;
    Ok((parse_f64(lo)?, parse_f64(hi)?))
}

fn cmd_grid(ui: &Ui, a: GridArgs) -> CmdResult {
    let measure = parse_measure(&a.measure)?;
    let grid = smolyak_grid(a.dim, a.level, &[measure])?;
    let weight_sum = grid.weight_sum();
    let set: SamplingSet = grid.into();
    let mut buf = Vec::new();
    set.write_csv(&mut buf).map_err(Failure::from)?;
    let summary = format!("nodes={} weight_sum={weight_sum:.15}", set.len());
    match &a.out {
        Some(path) => {
            write_atomic(path, &buf)?;
            ui.say(summary);
        }
        None => {
            std::io::stdout()
                .write_all(&buf)
                .map_err(|e| Failure::from(Error::Io(e)))?;
            if !ui.quiet {
                eprintln!("{summary}");
            }
        }
    }
    Ok(())
}

fn load_scenario(args: &ScenarioArgs) -> Result<ScenarioConfig, Failure> {
    let cfg = match (&args.config, &args.preset) {
        (Some(path), _) => ScenarioConfig::load(path).map_err(|e| match e {
            Error::Io(io) => arg_error(format!("{}: {io}", path.display())),
            other => other.into(),
        })?,
        (None, Some(name)) => ScenarioConfig::preset(name)?,
        (None, None) => return Err(arg_error("one of --config or --preset is required")),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Pulse files are fixtures: any problem reading or checking them is a fixture error.
fn load_pulse(path: &Path, cfg: &ScenarioConfig) -> Result<Pulse, Failure> {
    let as_fixture = |e: Error| Failure {
        code: EXIT_FIXTURE,
        message: format!("{}: {e}", path.display()),
    };
    let pulse = Pulse::load(path).map_err(as_fixture)?;
    cfg.check_pulse(&pulse).map_err(as_fixture)?;
    Ok(pulse)
}

fn cmd_replay(ui: &Ui, a: ReplayArgs) -> CmdResult {
    let cfg = load_scenario(&a.scenario)?;
    let pulse = load_pulse(&a.fixture, &cfg)?;
    let mut opts = ReplayOptions::from_config(&cfg);
    if let Some(r) = a.resolution {
        opts.landscape_resolution = r;
    }
    let mut spec = cfg.battery;
    if let Some(d) = a.draws {
        spec.draws = d;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    opts.battery = Some(spec);
    ui.note(1, format!("replaying {} on scenario '{}'", a.fixture.display(), cfg.name));
    let (report, landscapes) = replay_table1(&cfg, &pulse, &opts)?;
    let out = &a.scenario.out;
    write_json(&out.join("report.json"), &report)?;
    for l in &landscapes {
        let mut buf = Vec::new();
        l.write_csv(&mut buf)?;
        write_atomic(&out.join(format!("landscape_{}_{}.csv", l.labels[0], l.labels[1])), &buf)?;
    }
    ui.say(format!(
        "scenario={} expected_infidelity={:.6e} reference_nodes={} sampler_estimate={:.6e} self_convergence={:.3e}",
        report.scenario, report.expected_infidelity, report.reference_nodes, report.sampler_estimate, report.self_convergence
    ));
    if let Some(b) = &report.battery {
        ui.say(format!("battery draws={} mean={:.6e} worst={:.6e}", b.draws, b.mean, b.worst));
    }
    ui.say(format!("wrote {}", out.display()));
    Ok(())
}

fn cmd_optimize(ui: &Ui, a: OptimizeArgs) -> CmdResult {
    let mut cfg = load_scenario(&a.scenario)?;
    if let Some(s) = a.seed {
        cfg.seeds = vec![s];
    }
    if let Some(n) = a.max_iterations {
        cfg.optimizer.max_iterations = n;
    }
    cfg.validate()?;
    let out = &a.scenario.out;
    let verbose = ui.verbose;
    let result = run_scenario_observed(&cfg, &mut |seed, p| {
        if verbose >= 2 {
            eprintln!("seed {seed} iter {} objective {:.6e} |g| {:.3e}", p.iter, p.objective, p.grad_norm);
        }
        ControlFlow::Continue(())
    });
    let sweep = match result {
        Ok(s) => s,
        Err(Error::Aborted(ab)) => {
            write_partial_trace(out, &ab.trace)?;
            return Err(Failure {
                code: EXIT_ABORT,
                message: format!("optimizer aborted: {}; partial trace in {}", ab.cause, out.display()),
            });
        }
        Err(e) => return Err(e.into()),
    };
    write_sweep(out, &sweep)?;
    for e in &sweep.entries {
        ui.note(
            1,
            format!(
                "seed {} reference={:.6e} iterations={} evaluations={}",
                e.seed, e.reference_infidelity, e.iterations, e.evaluations
            ),
        );
    }
    let r = &sweep.best.report;
    ui.say(format!(
        "best seed={} expected_infidelity={:.6e} reference_infidelity={:.6e} worst_case={:.6e}",
        r.seed, r.expected_infidelity, r.reference_infidelity, r.worst_case
    ));
    ui.say(format!("wrote {}", out.display()));
    Ok(())
}

fn support(d: &Distribution) -> (f64, f64) {
    match *d {
        Distribution::Uniform { low, high } => (low, high),
        Distribution::Normal { mean, std } => (mean - 3.0 * std, mean + 3.0 * std),
    }
}

fn cmd_scan(ui: &Ui, a: ScanArgs) -> CmdResult {
    let cfg = load_scenario(&a.scenario)?;
    let pulse = load_pulse(&a.pulse, &cfg)?;
    let d = cfg.uncertainties.len();
    let axes = [a.axes[0], a.axes[1]];
    if axes[0] >= d || axes[1] >= d || axes[0] == axes[1] {
        return Err(arg_error(format!("--axes {},{} invalid for {d} uncertainties", axes[0], axes[1])));
    }
    let x = match &a.x_range {
        Some(s) => parse_range(s)?,
        None => support(&cfg.uncertainties[axes[0]]),
    };
    let y = match &a.y_range {
        Some(s) => parse_range(s)?,
        None => support(&cfg.uncertainties[axes[1]]),
    };
    let resolution = a.resolution.unwrap_or(cfg.landscape_resolution);
    let obj = robust_pulse::drivers::build_with_pulse(&cfg, pulse.clone(), cfg.sampling(0)?)?;
    let labels = cfg.template.uncertainty_labels();
    let theta = robust_pulse::pulses::PulseFamily::params(&pulse);
    let l = landscape_scan(&obj, &theta, axes, [x, y], resolution, [labels[axes[0]], labels[axes[1]]])?;
    let mut buf = Vec::new();
    l.write_csv(&mut buf)?;
    let path = a
        .scenario
        .out
        .join(format!("landscape_{}_{}.csv", l.labels[0], l.labels[1]));
    write_atomic(&path, &buf)?;
    let fractions = l.contour_fractions(&robust_pulse::drivers::CONTOUR_LEVELS);
    ui.say(format!("cells={} minimum={:.6e}", l.values.len(), l.minimum()));
    for (level, f) in robust_pulse::drivers::CONTOUR_LEVELS.iter().zip(fractions) {
        ui.say(format!("fraction <= {level:.0e}: {f:.4}"));
    }
    ui.say(format!("wrote {}", path.display()));
    Ok(())
}

fn cmd_benchmark(ui: &Ui, a: BenchArgs) -> CmdResult {
    let cfg = load_scenario(&a.scenario)?;
    let opts = BenchmarkOptions {
        iterations: a.iterations,
        every: a.every,
        mc_seeds: a.mc_seeds,
        mc_samples: a.mc_samples,
        include_bgrape: !a.no_bgrape,
        seed: a.seed,
    };
    ui.note(1, format!("benchmarking '{}' over {} iterations", cfg.name, opts.iterations));
    let result = match benchmark(&cfg, &opts) {
        Err(Error::Aborted(ab)) => {
            write_partial_trace(&a.scenario.out, &ab.trace)?;
            return Err(Failure {
                code: EXIT_ABORT,
                message: format!("optimizer aborted: {}", ab.cause),
            });
        }
        other => other?,
    };
    let mut buf = Vec::new();
    result.write_csv(&mut buf)?;
    let path = a.scenario.out.join("benchmark.csv");
    write_atomic(&path, &buf)?;
    ui.say(format!(
        "median abs_err smolyak={:.3e} mc={:.3e}{}",
        result.median_smolyak_err(),
        result.median_mc_err(),
        result
            .median_bgrape_err()
            .map(|e| format!(" bgrape={e:.3e}"))
            .unwrap_or_default()
    ));
    ui.say(format!("wrote {}", path.display()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn root() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
    }

    fn run(args: &[&str]) -> Result<(), Failure> {
        let argv = std::iter::once("robust-pulse").chain(args.iter().copied());
        match Cli::try_parse_from(argv) {
            Ok(cli) => execute(cli),
            Err(e) => Err(Failure {
                code: e.exit_code() as u8,
                message: e.to_string(),
            }),
        }
    }

    fn code(args: &[&str]) -> u8 {
        run(args).err().map_or(0, |f| f.code)
    }

    fn data_rows(csv: &str) -> Vec<&str> {
        csv.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).collect()
    }

    fn s(p: &Path) -> &str {
        p.to_str().unwrap()
    }

    /// Hadamard scenario on a coarse time grid, for fast end-to-end runs.
    fn quick_config(dir: &Path) -> PathBuf {
        let text = std::fs::read_to_string(root().join("configs/hadamard.json")).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["steps"] = serde_json::json!(100);
        v["reference_order"] = serde_json::json!(3);
        v["seeds"] = serde_json::json!([0]);
        let path = dir.join("quick.json");
        std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
        path
    }

    #[test]
    fn grid_row_counts() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("g.csv");
        let rows = |args: &[&str]| {
            let mut all = args.to_vec();
            all.extend(["-q", "--out", s(&file)]);
            run(&all).map_err(|f| f.message).unwrap();
            data_rows(&std::fs::read_to_string(&file).unwrap())
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
        };
        assert_eq!(rows(&["grid", "-d", "2", "-K", "3", "--measure", "legendre:-0.5:0.5"]).len(), 13);
        assert_eq!(rows(&["grid", "-d", "5", "-K", "3"]).len(), 61);
        let one = rows(&["grid", "-d", "4", "-K", "1", "--measure", "hermite"]);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].rsplit(',').next().unwrap().parse::<f64>().unwrap(), 1.0);
    }

    #[test]
    fn invalid_arguments_exit_2() {
        assert_eq!(code(&["grid", "-d", "2"]), EXIT_ARGUMENT);
        assert_eq!(code(&["grid", "-d", "2", "-K", "3", "--measure", "laguerre"]), EXIT_ARGUMENT);
        assert_eq!(code(&["grid", "-d", "2", "-K", "3", "--measure", "legendre:1:-1"]), EXIT_ARGUMENT);
        assert_eq!(code(&["grid", "-d", "0", "-K", "3"]), EXIT_ARGUMENT);
        assert_eq!(code(&["frobnicate"]), EXIT_ARGUMENT);
        assert_eq!(code(&["replay", "--preset", "nope", "--fixture", "x.json"]), EXIT_ARGUMENT);
    }

    #[test]
    fn output_directory_defaults_from_environment() {
        std::env::set_var("ROBUST_PULSE_OUT", "/tmp/elsewhere");
        let cli = Cli::try_parse_from(["robust-pulse", "optimize", "--preset", "hadamard"]).unwrap();
        std::env::remove_var("ROBUST_PULSE_OUT");
        let Command::Optimize(a) = cli.command else { panic!() };
        assert_eq!(a.scenario.out, PathBuf::from("/tmp/elsewhere"));
    }

    #[test]
    fn config_errors_are_reported_before_work() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        let text = std::fs::read_to_string(root().join("configs/hadamard.json"))
            .unwrap()
            .replace("\"metric\": \"phi2\"", "\"metric\": \"phi9\"");
        std::fs::write(&path, text).unwrap();
        let out_dir = dir.path().join("out");
        let err = run(&["optimize", "--config", s(&path), "--out", s(&out_dir)]).err().unwrap();
        assert_eq!(err.code, EXIT_ARGUMENT);
        assert!(err.message.contains("line") && err.message.contains("metric"), "{}", err.message);
        assert!(!out_dir.exists());
    }

    #[test]
    fn replay_reports_and_bad_fixtures_exit_3() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path();
        let fixture = root().join("fixtures/phase_s.json");
        run(&["-q", "replay", "--preset", "phase_s", "--fixture", s(&fixture), "--resolution", "3", "--draws", "20", "--out", s(out)])
            .map_err(|f| f.message)
            .unwrap();
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        let e = report["expected_infidelity"].as_f64().unwrap();
        assert!((e / 7.35e-5 - 1.0).abs() < 0.2, "{e}");
        assert!(out.join("landscape_Delta_delta_A.csv").exists());

        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&fixture).unwrap()).unwrap();
        v["channels"][1]["a"].as_array_mut().unwrap().truncate(2);
        let bad = out.join("bad.json");
        std::fs::write(&bad, v.to_string()).unwrap();
        let err = run(&["replay", "--preset", "phase_s", "--fixture", s(&bad), "--out", s(out)]).err().unwrap();
        assert_eq!(err.code, EXIT_FIXTURE);
        assert!(err.message.contains("channel 'y'"), "{}", err.message);

        let wrong = root().join("fixtures/rx_pi_k3.json");
        assert_eq!(code(&["replay", "--preset", "hadamard", "--fixture", s(&wrong), "--out", s(out)]), EXIT_FIXTURE);
        let missing = out.join("missing.json");
        assert_eq!(code(&["replay", "--preset", "hadamard", "--fixture", s(&missing), "--out", s(out)]), EXIT_FIXTURE);
    }

    #[test]
    fn one_iteration_optimize_writes_bundle_with_one_trace_row() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick_config(dir.path());
        let out = dir.path().join("run");
        run(&["-q", "optimize", "--config", s(&cfg), "--max-iterations", "1", "--out", s(&out)])
            .map_err(|f| f.message)
            .unwrap();
        for f in ["config.json", "pulse.json", "trace.csv", "grid.csv", "report.json", "sweep.csv"] {
            assert!(out.join(f).exists(), "{f} missing");
        }
        let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
        assert_eq!(trace.lines().next(), Some("iter,objective,grad_norm,elapsed_s"));
        assert_eq!(trace.lines().count(), 2);
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        for key in ["expected_infidelity", "reference_infidelity", "worst_case", "n_nodes", "wall_time_s"] {
            assert!(report.get(key).is_some(), "{key} missing");
        }
    }

    #[test]
    fn reruns_are_identical_apart_from_timings() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick_config(dir.path());
        let bundles: Vec<PathBuf> = ["a", "b"]
            .iter()
            .map(|tag| {
                let out = dir.path().join(tag);
                run(&["-q", "optimize", "--config", s(&cfg), "--max-iterations", "5", "--seed", "3", "--out", s(&out)])
                    .map_err(|f| f.message)
                    .unwrap();
                out
            })
            .collect();
        for f in ["config.json", "pulse.json", "grid.csv"] {
            assert_eq!(
                std::fs::read(bundles[0].join(f)).unwrap(),
                std::fs::read(bundles[1].join(f)).unwrap(),
                "{f} differs"
            );
        }
        let strip = |p: &Path| -> Vec<String> {
            std::fs::read_to_string(p.join("trace.csv"))
                .unwrap()
                .lines()
                .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap_or_default())
                .collect()
        };
        assert_eq!(strip(&bundles[0]), strip(&bundles[1]));
    }

    #[test]
    fn scan_resolution_3_gives_9_rows() {
        let dir = tempfile::tempdir().unwrap();
        let fixture = root().join("fixtures/hadamard.json");
        run(&[
            "-q", "scan", "--preset", "hadamard", "--pulse", s(&fixture), "--resolution", "3", "--x-range", "-0.1:0.1", "--out",
            s(dir.path()),
        ])
        .map_err(|f| f.message)
        .unwrap();
        let csv = std::fs::read_to_string(dir.path().join("landscape_Delta_delta_A.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("Delta,delta_A,infidelity"));
        assert_eq!(lines.count(), 9);
        assert_eq!(
            code(&["scan", "--preset", "hadamard", "--pulse", s(&fixture), "--axes", "0,0", "--out", s(dir.path())]),
            EXIT_ARGUMENT
        );
    }

    #[test]
    fn benchmark_emits_comparison_columns() {
        let dir = tempfile::tempdir().unwrap();
        run(&[
            "-q", "benchmark", "--preset", "rx_pi_d5_smgrape", "--iterations", "2", "--every", "1", "--mc-seeds", "2", "--out",
            s(dir.path()),
        ])
        .map_err(|f| f.message)
        .unwrap();
        let csv = std::fs::read_to_string(dir.path().join("benchmark.csv")).unwrap();
        assert_eq!(csv.lines().next(), Some("iter,estimator,estimate,reference,abs_err"));
        // Three checkpoints of one Smolyak and two MC rows, then three bGRAPE rows.
        assert_eq!(csv.lines().count(), 1 + 3 * 3 + 3);
        assert!(csv.contains("smolyak-k3") && csv.contains("mc-61:seed1") && csv.contains("bgrape-mc-61"));
    }
}
