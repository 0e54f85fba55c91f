//! Seeded Monte-Carlo experiments.
//!
//! Each trial owns a ChaCha stream seeded from `(base seed, stream, trial
//! index)` and consumes its draws in a fixed order: scenario (position,
//! clock offset, drift, speed, heading), velocity-deviation heading,
//! initial-guess heading, then `M` request and `M` response noise samples.
//! Trials run in parallel; aggregation folds them in trial-index order, so
//! output does not depend on the thread count.
//!
//! With common random numbers (the default) every sweep point reuses the
//! same streams, so neighbouring points differ only in the swept quantity.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{fim, mode1_deviated_velocity_error, BiasReport};
use crate::error::{Error, Result};
use crate::estimator::{solve, Mode, ParamVector, SolverConfig, Termination};
use crate::measurement::generate;
use crate::scenario::{Scenario, ScenarioSampler, SpeedDistribution, NoiseSpec, UdState, SPEED_OF_LIGHT};

/// Which study to run; each fixes the meaning of the sweep value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Sweep: noise standard deviation (m).
    NoiseSweep,
    /// Sweep: UD speed (m/s), random heading.
    SpeedSweep,
    /// Sweep: UD speed (m/s), repeated for every schedule step.
    CtwlasComparison,
    /// Sweep: norm of the assumed-velocity error (m/s), random heading.
    DeviatedVelocity,
    /// Sweep: initial position error (m).
    SuccessRate,
    /// Sweep: number of Gauss-Newton iterations.
    IterationProfile,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::NoiseSweep,
        ExperimentKind::SpeedSweep,
        ExperimentKind::CtwlasComparison,
        ExperimentKind::DeviatedVelocity,
        ExperimentKind::SuccessRate,
        ExperimentKind::IterationProfile,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::NoiseSweep => "noise-sweep",
            ExperimentKind::SpeedSweep => "speed-sweep",
            ExperimentKind::CtwlasComparison => "ctwlas-comparison",
            ExperimentKind::DeviatedVelocity => "deviated-velocity",
            ExperimentKind::SuccessRate => "success-rate",
            ExperimentKind::IterationProfile => "iteration-profile",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown experiment kind `{s}`")))
    }
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub sweep_values: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub modes: Vec<Mode>,
    /// Distance of the initial position guess from the truth (m).
    pub initial_radius_m: f64,
    /// Noise standard deviation for every kind except `NoiseSweep` (m).
    pub sigma_m: f64,
    /// Response spacing `delta_t_i = i * step` (ms). Only
    /// `CtwlasComparison` uses more than one value.
    pub schedule_steps_ms: Vec<f64>,
    pub max_iterations: usize,
    /// Reuse the same random streams at every sweep point.
    pub common_random_numbers: bool,
    /// Measure solver wall time. Off by default so output is reproducible.
    pub record_timing: bool,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    /// Simulation-study defaults for `kind`.
    pub fn preset(kind: ExperimentKind) -> Self {
        let linspace = |start: f64, step: f64, n: usize| (0..n).map(|i| start + step * i as f64).collect();
        let (sweep_values, modes, sigma_m, trials): (Vec<f64>, Vec<Mode>, f64, usize) = match kind {
            ExperimentKind::NoiseSweep => (
                (0..6).map(|k| 10f64.powf(-2.0 + 0.6 * k as f64)).collect(),
                vec![Mode::Mode1, Mode::Mode2, Mode::Owlas],
                0.1,
                40_000,
            ),
            ExperimentKind::SpeedSweep => (linspace(0.0, 10.0, 6), vec![Mode::Mode1, Mode::Mode2], 0.1, 40_000),
            ExperimentKind::CtwlasComparison => {
                (linspace(0.0, 10.0, 6), vec![Mode::Mode1, Mode::Ctwlas], 0.1, 40_000)
            }
            ExperimentKind::DeviatedVelocity => (linspace(0.0, 4.0, 6), vec![Mode::Mode1], 0.1, 40_000),
            ExperimentKind::SuccessRate => (
                vec![10.0, 50.0, 100.0, 200.0],
                vec![Mode::Mode1, Mode::Mode2],
                5.0,
                100_000,
            ),
            ExperimentKind::IterationProfile => {
                (linspace(1.0, 1.0, 10), vec![Mode::Mode1, Mode::Mode2], 0.1, 10_000)
            }
        };
        Self {
            kind,
            sweep_values,
            trials,
            seed: 0,
            modes,
            initial_radius_m: 50.0,
            sigma_m,
            schedule_steps_ms: if kind == ExperimentKind::CtwlasComparison {
                vec![5.0, 10.0, 20.0]
            } else {
                vec![10.0]
            },
            max_iterations: 10,
            common_random_numbers: true,
            record_timing: kind == ExperimentKind::IterationProfile,
            jobs: None,
        }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.sweep_values.is_empty() {
            return bad("sweep_values must not be empty".into());
        }
        if self.modes.is_empty() {
            return bad("modes must not be empty".into());
        }
        for &v in &self.sweep_values {
            let ok = v.is_finite()
                && match self.kind {
                    ExperimentKind::NoiseSweep => v > 0.0,
                    ExperimentKind::SpeedSweep
                    | ExperimentKind::CtwlasComparison
                    | ExperimentKind::DeviatedVelocity
                    | ExperimentKind::SuccessRate => v >= 0.0,
                    ExperimentKind::IterationProfile => v >= 1.0 && v.fract() == 0.0,
                };
            if !ok {
                return bad(format!("sweep value {v} is outside the support of {}", self.kind));
            }
        }
        if !(self.sigma_m.is_finite() && self.sigma_m > 0.0) {
            return bad("sigma_m must be positive".into());
        }
        if !(self.initial_radius_m.is_finite() && self.initial_radius_m >= 0.0) {
            return bad("initial_radius_m must be nonnegative".into());
        }
        if self.schedule_steps_ms.is_empty()
            || self.schedule_steps_ms.iter().any(|s| !(s.is_finite() && *s > 0.0))
        {
            return bad("schedule_steps_ms must hold positive values".into());
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1".into());
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1".into());
        }
        Ok(())
    }

    /// Every `(sweep index, sweep value, schedule step)` evaluated, in
    /// output order.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &step in &self.schedule_steps_ms {
            for &value in &self.sweep_values {
                out.push(SweepPoint {
                    index: out.len(),
                    value,
                    schedule_step_ms: step,
                });
            }
        }
        out
    }

    fn point_settings(&self, point: &SweepPoint) -> PointSettings {
        let mut s = PointSettings {
            sigma: self.sigma_m,
            speed: SpeedDistribution::Uniform { max: 50.0 },
            velocity_error: 0.0,
            radius: self.initial_radius_m,
            iterations: self.max_iterations,
            early_exit: true,
        };
        match self.kind {
            ExperimentKind::NoiseSweep => s.sigma = point.value,
            ExperimentKind::SpeedSweep | ExperimentKind::CtwlasComparison => {
                s.speed = SpeedDistribution::Fixed { speed: point.value }
            }
            ExperimentKind::DeviatedVelocity => s.velocity_error = point.value,
            ExperimentKind::SuccessRate => s.radius = point.value,
            ExperimentKind::IterationProfile => {
                s.iterations = point.value as usize;
                s.early_exit = false;
            }
        }
        s
    }
}

/// Partially specified experiment: unset fields fall back to the preset of
/// `kind`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: Option<ExperimentKind>,
    pub sweep_values: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub modes: Option<Vec<Mode>>,
    pub initial_radius_m: Option<f64>,
    pub sigma_m: Option<f64>,
    pub schedule_steps_ms: Option<Vec<f64>>,
    pub max_iterations: Option<usize>,
    pub common_random_numbers: Option<bool>,
    pub record_timing: Option<bool>,
    pub jobs: Option<usize>,
}

impl ExperimentSpec {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let kind = self
            .kind
            .ok_or_else(|| Error::InvalidConfig("missing field `kind`".into()))?;
        let mut c = ExperimentConfig::preset(kind);
        macro_rules! take {
            ($($f:ident),*) => {$(if let Some(v) = &self.$f { c.$f = v.clone(); })*};
        }
        take!(sweep_values, trials, seed, modes, initial_radius_m, sigma_m, schedule_steps_ms,
              max_iterations, common_random_numbers, record_timing);
        if self.jobs.is_some() {
            c.jobs = self.jobs;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    /// Position in [`ExperimentConfig::points`].
    pub index: usize,
    pub value: f64,
    pub schedule_step_ms: f64,
}

#[derive(Debug, Clone, Copy)]
struct PointSettings {
    sigma: f64,
    speed: SpeedDistribution,
    velocity_error: f64,
    radius: f64,
    iterations: usize,
    early_exit: bool,
}

/// Per-trial seed: SplitMix64 finalizer chained over the three inputs.
pub fn trial_seed(base: u64, stream: u64, trial: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(base) ^ stream) ^ trial)
}

/// Truth of one trial, in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSummary {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub clock_offset_s: f64,
    pub clock_drift: f64,
}

/// Outcome of one estimator on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeOutcome {
    pub mode: Mode,
    pub estimate: Vec<f64>,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    /// Euclidean position error (m).
    pub position_error_m: f64,
    /// Absolute range-equivalent clock-offset error (m).
    pub clock_error_m: f64,
    /// Sum of position CRLB entries at the truth (m²).
    pub position_crlb_sq: f64,
    /// Clock-offset CRLB at the truth (m²).
    pub clock_crlb_sq: f64,
    /// Predicted mean-square position error including any bias (m²).
    pub predicted_position_msq: f64,
    /// Predicted mean-square clock-offset error including any bias (m²).
    pub predicted_clock_msq: f64,
    pub solve_ns: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub trial_index: usize,
    pub truth: TruthSummary,
    pub outcomes: Vec<ModeOutcome>,
}

fn predicted(report: &BiasReport) -> (f64, f64) {
    (
        report.predicted_rmse_position.powi(2),
        report.predicted_rmse_clock.powi(2),
    )
}

/// Runs one trial at `point`. Solver failures are recorded in the outcome.
pub fn run_trial(config: &ExperimentConfig, point: &SweepPoint, trial_index: usize) -> Result<TrialRecord> {
    let settings = config.point_settings(point);
    let stream = if config.common_random_numbers {
        0
    } else {
        point.index as u64 + 1
    };
    let seed = trial_seed(config.seed, stream, trial_index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let sampler = ScenarioSampler {
        speed: settings.speed,
        schedule_step: point.schedule_step_ms * 1e-3,
        ..ScenarioSampler::default()
    };
    let (anchors, ud, schedule) = sampler.sample(&mut rng);
    let deviation_heading = rng.random_range(0.0..std::f64::consts::TAU);
    let guess_heading = rng.random_range(0.0..std::f64::consts::TAU);
    let m = anchors.len();
    let noise = NoiseSpec::uniform(m, settings.sigma)?;
    let scenario = Scenario::new(anchors, ud, schedule, noise)?;
    let measurements = generate(&scenario, &scenario.noise, &mut rng)?;

    let n = scenario.ud.dim();
    let ud = &scenario.ud;
    let assumed_velocity = vec![
        ud.velocity[0] + settings.velocity_error * deviation_heading.cos(),
        ud.velocity[1] + settings.velocity_error * deviation_heading.sin(),
    ];
    let start = vec![
        ud.position[0] + settings.radius * guess_heading.cos(),
        ud.position[1] + settings.radius * guess_heading.sin(),
    ];

    let mut outcomes = Vec::with_capacity(config.modes.len());
    for &mode in &config.modes {
        let solver = SolverConfig {
            max_iterations: settings.iterations,
            convergence_threshold: settings.sigma / 10.0,
            known_velocity: match mode {
                Mode::Mode1 => Some(assumed_velocity.clone()),
                _ => None,
            },
            early_exit: settings.early_exit,
        };
        let initial = ParamVector::initial_guess(mode, &start, &measurements)?;
        let clock = config.record_timing.then(Instant::now);
        let report = solve(&measurements, &scenario.anchors, &solver, &initial)?;
        let solve_ns = clock.map(|t| t.elapsed().as_nanos() as u64);

        let bound = fim(ud, &scenario.anchors, &scenario.schedule, &scenario.noise, mode)?;
        let position_crlb_sq: f64 = bound.crlb_diag[..n].iter().sum();
        let clock_crlb_sq = bound.crlb_diag[n];
        let (predicted_position_msq, predicted_clock_msq) = match mode {
            Mode::Mode1 if settings.velocity_error > 0.0 => predicted(&mode1_deviated_velocity_error(
                ud,
                &assumed_velocity,
                &scenario.anchors,
                &scenario.schedule,
                &scenario.noise,
            )?),
            Mode::Ctwlas => predicted(&mode1_deviated_velocity_error(
                ud,
                &vec![0.0; n],
                &scenario.anchors,
                &scenario.schedule,
                &scenario.noise,
            )?),
            _ => (position_crlb_sq, clock_crlb_sq),
        };

        let est = &report.estimate;
        outcomes.push(ModeOutcome {
            mode,
            estimate: est.as_slice().to_vec(),
            converged: report.converged,
            termination: report.termination.clone(),
            iterations: report.iterations_used,
            position_error_m: crate::scenario::distance(est.position(), &ud.position),
            clock_error_m: (SPEED_OF_LIGHT * ud.clock_offset - est.clock_offset()).abs(),
            position_crlb_sq,
            clock_crlb_sq,
            predicted_position_msq,
            predicted_clock_msq,
            solve_ns,
        });
    }
    Ok(TrialRecord {
        seed,
        trial_index,
        truth: truth_summary(ud),
        outcomes,
    })
}

fn truth_summary(ud: &UdState) -> TruthSummary {
    TruthSummary {
        position: ud.position.clone(),
        velocity: ud.velocity.clone(),
        clock_offset_s: ud.clock_offset,
        clock_drift: ud.clock_drift,
    }
}

/// Aggregate statistics of one mode at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: Mode,
    pub n_trials: usize,
    pub n_converged: usize,
    /// RMSE over converged trials (NaN when none converged).
    pub pos_rmse_m: f64,
    pub clk_rmse_m: f64,
    /// RMSE over all trials.
    pub pos_rmse_all_m: f64,
    pub clk_rmse_all_m: f64,
    /// `sqrt` of the trial-averaged CRLB.
    pub pos_crlb_m: f64,
    pub clk_crlb_m: f64,
    /// `sqrt` of the trial-averaged predicted mean-square error.
    pub pred_rmse_m: f64,
    pub pred_clk_rmse_m: f64,
    /// Fraction of trials within `6 * sqrt(CRLB)` of the true position.
    pub success_rate: f64,
    pub mean_solve_us: Option<f64>,
    /// Median solver wall time; insensitive to scheduler preemption.
    pub median_solve_us: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPointSummary {
    pub sweep_value: f64,
    pub schedule_step_ms: f64,
    pub modes: Vec<ModeSummary>,
}

impl SweepPointSummary {
    pub fn mode(&self, mode: Mode) -> Option<&ModeSummary> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

/// Multiple of the position CRLB below which a trial counts as a success.
pub const SUCCESS_CRLB_MULTIPLE: f64 = 6.0;

/// Folds trial records (in slice order) into per-mode statistics.
pub fn aggregate(sweep_value: f64, schedule_step_ms: f64, records: &[TrialRecord]) -> Result<SweepPointSummary> {
    let first = records.first().ok_or(Error::EmptyInput)?;
    let modes: Vec<Mode> = first.outcomes.iter().map(|o| o.mode).collect();
    let mut summaries = Vec::with_capacity(modes.len());
    for (k, &mode) in modes.iter().enumerate() {
        let mut n_conv = 0usize;
        let (mut pos_c, mut clk_c, mut pos_a, mut clk_a) = (0.0, 0.0, 0.0, 0.0);
        let (mut crlb_p, mut crlb_c, mut pred_p, mut pred_c) = (0.0, 0.0, 0.0, 0.0);
        let mut successes = 0usize;
        let mut times = Vec::new();
        for r in records {
            let o = r.outcomes.get(k).filter(|o| o.mode == mode).ok_or_else(|| {
                Error::InvalidConfig(format!("trial {} lacks a {mode} outcome", r.trial_index))
            })?;
            let pe = o.position_error_m * o.position_error_m;
            let ce = o.clock_error_m * o.clock_error_m;
            pos_a += pe;
            clk_a += ce;
            if o.converged {
                n_conv += 1;
                pos_c += pe;
                clk_c += ce;
            }
            crlb_p += o.position_crlb_sq;
            crlb_c += o.clock_crlb_sq;
            pred_p += o.predicted_position_msq;
            pred_c += o.predicted_clock_msq;
            if o.position_error_m < SUCCESS_CRLB_MULTIPLE * o.position_crlb_sq.sqrt() {
                successes += 1;
            }
            if let Some(ns) = o.solve_ns {
                times.push(ns);
            }
        }
        let n = records.len() as f64;
        let rms = |sum: f64, count: usize| {
            if count == 0 {
                f64::NAN
            } else {
                (sum / count as f64).sqrt()
            }
        };
        summaries.push(ModeSummary {
            mode,
            n_trials: records.len(),
            n_converged: n_conv,
            pos_rmse_m: rms(pos_c, n_conv),
            clk_rmse_m: rms(clk_c, n_conv),
            pos_rmse_all_m: (pos_a / n).sqrt(),
            clk_rmse_all_m: (clk_a / n).sqrt(),
            pos_crlb_m: (crlb_p / n).sqrt(),
            clk_crlb_m: (crlb_c / n).sqrt(),
            pred_rmse_m: (pred_p / n).sqrt(),
            pred_clk_rmse_m: (pred_c / n).sqrt(),
            success_rate: successes as f64 / n,
            mean_solve_us: (!times.is_empty())
                .then(|| times.iter().map(|&t| t as f64).sum::<f64>() / times.len() as f64 / 1e3),
            median_solve_us: median_us(&mut times),
        });
    }
    Ok(SweepPointSummary {
        sweep_value,
        schedule_step_ms,
        modes: summaries,
    })
}

fn median_us(ns: &mut [u64]) -> Option<f64> {
    if ns.is_empty() {
        return None;
    }
    ns.sort_unstable();
    let mid = ns.len() / 2;
    let m = if ns.len().is_multiple_of(2) {
        (ns[mid - 1] as f64 + ns[mid] as f64) / 2.0
    } else {
        ns[mid] as f64
    };
    Some(m / 1e3)
}

/// Runs every trial of one sweep point, in parallel, ordered by index.
pub fn run_point(config: &ExperimentConfig, point: &SweepPoint) -> Result<Vec<TrialRecord>> {
    (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(config, point, i))
        .collect()
}

/// Runs the whole experiment and returns one summary per sweep point.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<SweepPointSummary>> {
    config.validate()?;
    let body = || -> Result<Vec<SweepPointSummary>> {
        config
            .points()
            .iter()
            .map(|p| aggregate(p.value, p.schedule_step_ms, &run_point(config, p)?))
            .collect()
    };
    match config.jobs {
        None => body(),
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?
            .install(body),
    }
}

/// CSV header; one row per `(sweep point, mode)`.
pub const CSV_COLUMNS: [&str; 16] = [
    "sweep_value",
    "mode",
    "n_trials",
    "n_converged",
    "pos_rmse_m",
    "clk_rmse_m",
    "pos_crlb_m",
    "clk_crlb_m",
    "pred_rmse_m",
    "success_rate",
    "mean_solve_us",
    "pos_rmse_all_m",
    "clk_rmse_all_m",
    "pred_clk_rmse_m",
    "schedule_step_ms",
    "median_solve_us",
];

pub fn to_csv(summaries: &[SweepPointSummary]) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for s in summaries {
        for m in &s.modes {
            let fmt_opt = |v: Option<f64>| v.map(|t| t.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.sweep_value,
                m.mode,
                m.n_trials,
                m.n_converged,
                m.pos_rmse_m,
                m.clk_rmse_m,
                m.pos_crlb_m,
                m.clk_crlb_m,
                m.pred_rmse_m,
                m.success_rate,
                fmt_opt(m.mean_solve_us),
                m.pos_rmse_all_m,
                m.clk_rmse_all_m,
                m.pred_clk_rmse_m,
                s.schedule_step_ms,
                fmt_opt(m.median_solve_us),
            );
        }
    }
    out
}

/// JSON record of what was run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub crate_version: String,
    pub config: ExperimentConfig,
    pub csv_columns: Vec<String>,
    pub rows: usize,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, summaries: &[SweepPointSummary]) -> Self {
        Self {
            schema: 1,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            csv_columns: CSV_COLUMNS.iter().map(|s| s.to_string()).collect(),
            rows: summaries.iter().map(|s| s.modes.len()).sum(),
        }
    }
}
