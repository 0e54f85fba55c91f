//! `toa`: solve, bound, predict and simulate two-way TOA positioning.
//!
//! Configuration files are JSON objects carrying `"schema": 1`. Data goes to
//! stdout (or `--output`), diagnostics to stderr. Exit codes: 0 success,
//! 1 usage or configuration error, 2 solver did not converge, 3 a theorem
//! check failed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use toa_core::analysis::{self, TheoremSweepConfig};
use toa_core::estimator::{self, EstimateReportDoc, Mode, ParamVector, SolverConfig};
use toa_core::measurement::{generate, MeasurementDoc, ToaMeasurementSet};
use toa_core::montecarlo::{self, ExperimentKind, ExperimentSpec, Manifest};
use toa_core::scenario::{AnchorSet, Scenario, ScenarioDoc, UdState, UdStateDoc};

const SCHEMA: u64 = 1;

#[derive(Parser, Debug)]
#[command(name = "toa", version, about = "Two-way TOA localization and clock synchronization")]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Random seed; overrides TOA_SEED and the config file.
    #[arg(long, global = true, env = "TOA_SEED")]
    seed: Option<u64>,
    /// Worker threads for Monte-Carlo runs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate position and clock from one set of measurements.
    Solve,
    /// Fisher information and CRLB at a true state.
    Crlb,
    /// Bias and RMSE predicted for a wrong or ignored velocity.
    PredictBias,
    /// Check the accuracy-ordering theorems on random instances.
    VerifyTheorems {
        /// Number of instances; overrides the config file.
        #[arg(long)]
        instances: Option<usize>,
        /// Draw all response delays equal.
        #[arg(long)]
        equal_delays: bool,
    },
    /// Run a Monte-Carlo study and write CSV plus a JSON manifest.
    Experiment {
        /// Study to run (noise-sweep, speed-sweep, ctwlas-comparison,
        /// deviated-velocity, success-rate, iteration-profile).
        #[arg(long)]
        kind: Option<String>,
        /// Named default configuration, e.g. `noise-sweep`.
        #[arg(long)]
        preset: Option<String>,
        /// Trials per sweep point.
        #[arg(long)]
        trials: Option<usize>,
        /// Manifest path; defaults to `<output>.manifest.json` when
        /// `--output` is given.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Outcome {
    Ok,
    NotConverged,
    CheckFailed,
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
    match run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("toa: solver did not converge");
            ExitCode::from(2)
        }
        Ok(Outcome::CheckFailed) => {
            eprintln!("toa: theorem check failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("toa: error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Solve => cmd_solve(cli),
        Command::Crlb => cmd_crlb(cli),
        Command::PredictBias => cmd_predict_bias(cli),
        Command::VerifyTheorems {
            instances,
            equal_delays,
        } => cmd_verify_theorems(cli, *instances, *equal_delays),
        Command::Experiment {
            kind,
            preset,
            trials,
            manifest,
        } => cmd_experiment(cli, kind.as_deref(), preset.as_deref(), *trials, manifest.as_deref()),
    }
}

/// Reads a config file, checks and strips the schema tag, then decodes the
/// rest into `T`.
fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let mut value: Value =
        serde_json::from_str(&text).with_context(|| format!("config {} is not valid JSON", path.display()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| anyhow!("config {} must be a JSON object", path.display()))?;
    match obj.remove("schema") {
        Some(Value::Number(n)) if n.as_u64() == Some(SCHEMA) => {}
        Some(other) => bail!("field `schema`: unsupported value {other}, expected {SCHEMA}"),
        None => bail!("missing field `schema`"),
    }
    serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))
}

fn require_config(cli: &Cli) -> Result<&Path> {
    cli.config
        .as_deref()
        .ok_or_else(|| anyhow!("this subcommand needs --config <FILE>"))
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.output {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(cli: &Cli, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(cli, &text)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveDoc {
    mode: Mode,
    /// Anchor positions; taken from `scenario` when absent.
    #[serde(default)]
    anchors: Option<Vec<Vec<f64>>>,
    /// Observed measurements. Exactly one of `measurements` and `scenario`.
    #[serde(default)]
    measurements: Option<MeasurementDoc>,
    /// Synthesize measurements from this scenario and the seed.
    #[serde(default)]
    scenario: Option<ScenarioDoc>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    solver: SolverDoc,
    #[serde(default)]
    initial: Option<InitialDoc>,
    /// True state, used only to report errors.
    #[serde(default)]
    truth: Option<UdStateDoc>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverDoc {
    max_iterations: Option<usize>,
    convergence_threshold_m: Option<f64>,
    known_velocity_mps: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialDoc {
    position_m: Vec<f64>,
    #[serde(default)]
    clock_offset_m: Option<f64>,
    #[serde(default)]
    clock_drift_mps: Option<f64>,
    #[serde(default)]
    velocity_mps: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct SolveOutput {
    #[serde(flatten)]
    report: EstimateReportDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    position_error_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    clock_offset_error_m: Option<f64>,
}

fn centroid(anchors: &AnchorSet) -> Vec<f64> {
    let mut c = vec![0.0; anchors.dim()];
    for p in anchors.positions() {
        for (ci, pi) in c.iter_mut().zip(p) {
            *ci += pi / anchors.len() as f64;
        }
    }
    c
}

fn cmd_solve(cli: &Cli) -> Result<Outcome> {
    let doc: SolveDoc = load_config(require_config(cli)?)?;
    let truth: Option<UdState> = match (&doc.truth, &doc.scenario) {
        (Some(t), _) => Some(t.clone().try_into().context("field `truth`")?),
        (None, Some(s)) => Some(s.ud.clone().try_into().context("field `scenario.ud`")?),
        _ => None,
    };
    let (anchors, measurements) = match (&doc.measurements, &doc.scenario) {
        (Some(m), None) => {
            let positions = doc
                .anchors
                .clone()
                .ok_or_else(|| anyhow!("missing field `anchors`"))?;
            let anchors = AnchorSet::new(positions).context("field `anchors`")?;
            let meas: ToaMeasurementSet = m.clone().try_into().context("field `measurements`")?;
            (anchors, meas)
        }
        (None, Some(s)) => {
            let scenario: Scenario = s.clone().try_into().context("field `scenario`")?;
            if doc.anchors.is_some() {
                bail!("field `anchors`: give anchors inside `scenario` only");
            }
            let seed = cli
                .seed
                .or(doc.seed)
                .ok_or_else(|| anyhow!("field `seed`: required to synthesize measurements"))?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let meas = generate(&scenario, &scenario.noise, &mut rng)?;
            (scenario.anchors, meas)
        }
        (Some(_), Some(_)) => bail!("give either `measurements` or `scenario`, not both"),
        (None, None) => bail!("missing field `measurements` (or `scenario`)"),
    };
    if measurements.len() != anchors.len() {
        bail!(
            "field `measurements`: {} pairs for {} anchors",
            measurements.len(),
            anchors.len()
        );
    }

    let sigma = measurements
        .noise()
        .sigma_request
        .iter()
        .cloned()
        .fold(measurements.noise().sigma_response, f64::min);
    let mut config = SolverConfig::for_sigma(sigma);
    if let Some(n) = doc.solver.max_iterations {
        config.max_iterations = n;
    }
    if let Some(t) = doc.solver.convergence_threshold_m {
        config.convergence_threshold = t;
    }
    config.known_velocity = match doc.mode {
        Mode::Mode1 => Some(
            doc.solver
                .known_velocity_mps
                .clone()
                .or_else(|| truth.as_ref().map(|t| t.velocity.clone()))
                .ok_or_else(|| anyhow!("field `solver.known_velocity_mps`: required for mode1"))?,
        ),
        _ => None,
    };

    let initial = match &doc.initial {
        None => ParamVector::initial_guess(doc.mode, &centroid(&anchors), &measurements)?,
        Some(init) => {
            let default = ParamVector::initial_guess(doc.mode, &init.position_m, &measurements)
                .context("field `initial`")?;
            let zeros = vec![0.0; init.position_m.len()];
            ParamVector::new(
                doc.mode,
                &init.position_m,
                init.clock_offset_m.unwrap_or(default.clock_offset()),
                init.clock_drift_mps.unwrap_or(0.0),
                Some(init.velocity_mps.as_deref().unwrap_or(&zeros)),
            )
            .context("field `initial`")?
        }
    };

    let report = estimator::solve(&measurements, &anchors, &config, &initial)?;
    let (position_error_m, clock_offset_error_m) = match &truth {
        Some(t) => {
            let (_, clock) = estimator::estimate_errors(&report.estimate, t);
            (Some(estimator::position_error(&report.estimate, t)), Some(clock.abs()))
        }
        None => (None, None),
    };
    emit_json(
        cli,
        &SolveOutput {
            report: EstimateReportDoc::from(&report),
            position_error_m,
            clock_offset_error_m,
        },
    )?;
    Ok(if report.converged {
        Outcome::Ok
    } else {
        Outcome::NotConverged
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CrlbDoc {
    scenario: ScenarioDoc,
    #[serde(default)]
    modes: Option<Vec<Mode>>,
}

fn cmd_crlb(cli: &Cli) -> Result<Outcome> {
    let doc: CrlbDoc = load_config(require_config(cli)?)?;
    let s: Scenario = doc.scenario.try_into().context("field `scenario`")?;
    let modes = doc.modes.unwrap_or_else(|| vec![Mode::Mode1, Mode::Mode2, Mode::Owlas]);
    if modes.is_empty() {
        bail!("field `modes`: must not be empty");
    }
    let reports = modes
        .iter()
        .map(|&m| analysis::fim(&s.ud, &s.anchors, &s.schedule, &s.noise, m))
        .collect::<Result<Vec<_>, _>>()?;
    emit_json(cli, &reports)?;
    Ok(Outcome::Ok)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BiasDoc {
    scenario: ScenarioDoc,
    /// Velocity assumed by Mode 1; zero (the conventional estimator) when
    /// absent.
    #[serde(default)]
    assumed_velocity_mps: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct BiasOutput {
    assumed_velocity_mps: Vec<f64>,
    #[serde(flatten)]
    report: analysis::BiasReport,
}

fn cmd_predict_bias(cli: &Cli) -> Result<Outcome> {
    let doc: BiasDoc = load_config(require_config(cli)?)?;
    let s: Scenario = doc.scenario.try_into().context("field `scenario`")?;
    let assumed = doc.assumed_velocity_mps.unwrap_or_else(|| vec![0.0; s.ud.dim()]);
    if assumed.len() != s.ud.dim() {
        bail!("field `assumed_velocity_mps`: expected {} components", s.ud.dim());
    }
    let report = analysis::mode1_deviated_velocity_error(&s.ud, &assumed, &s.anchors, &s.schedule, &s.noise)?;
    emit_json(
        cli,
        &BiasOutput {
            assumed_velocity_mps: assumed,
            report,
        },
    )?;
    Ok(Outcome::Ok)
}

fn cmd_verify_theorems(cli: &Cli, instances: Option<usize>, equal_delays: bool) -> Result<Outcome> {
    let mut config: TheoremSweepConfig = match &cli.config {
        Some(path) => load_config(path)?,
        None => TheoremSweepConfig::default(),
    };
    if let Some(n) = instances {
        config.instances = n;
    }
    if equal_delays {
        config.equal_delays = true;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let report = analysis::verify_theorems(&config)?;
    eprintln!(
        "toa: {} instances, {} singular draws skipped, theorem 1 violations {}, theorem 2 violations {}, {} equalities",
        report.instances,
        report.singular_skipped,
        report.theorem1_violations,
        report.theorem2_violations,
        report.theorem2_equalities
    );
    emit_json(cli, &report)?;
    Ok(if report.all_hold {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    })
}

fn preset_kind(name: &str) -> Result<ExperimentKind> {
    name.parse::<ExperimentKind>()
        .map_err(|_| anyhow!("unknown preset `{name}`"))
}

fn cmd_experiment(
    cli: &Cli,
    kind: Option<&str>,
    preset: Option<&str>,
    trials: Option<usize>,
    manifest: Option<&Path>,
) -> Result<Outcome> {
    let mut spec: ExperimentSpec = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentSpec::default(),
    };
    let from_flags = match (kind, preset) {
        (Some(_), Some(_)) => bail!("give either --kind or --preset, not both"),
        (Some(k), None) => Some(k.parse::<ExperimentKind>().map_err(|e| anyhow!("--kind: {e}"))?),
        (None, Some(p)) => Some(preset_kind(p)?),
        (None, None) => None,
    };
    if let Some(k) = from_flags {
        spec.kind = Some(k);
    }
    if spec.kind.is_none() {
        bail!("missing experiment kind: use --kind, --preset or field `kind`");
    }
    if trials.is_some() {
        spec.trials = trials;
    }
    if cli.seed.is_some() {
        spec.seed = cli.seed;
    }
    if cli.jobs.is_some() {
        spec.jobs = cli.jobs;
    }
    let config = spec.resolve()?;
    eprintln!(
        "toa: {} with {} trials per point, {} points, seed {}",
        config.kind,
        config.trials,
        config.points().len(),
        config.seed
    );
    let summaries = montecarlo::run_experiment(&config)?;
    emit(cli, &montecarlo::to_csv(&summaries))?;

    let manifest_path = manifest.map(Path::to_path_buf).or_else(|| {
        cli.output.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    });
    if let Some(path) = manifest_path {
        let text = serde_json::to_string_pretty(&Manifest::new(&config, &summaries))?;
        fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(Outcome::Ok)
}
