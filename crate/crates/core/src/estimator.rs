//! Iterative weighted-least-squares localization and synchronization.
//!
//! Four estimators share one Gauss-Newton loop and differ only in the
//! parameter layout and the rows of the stacked model they use:
//!
//! | mode     | parameters                 | rows | velocity            |
//! |----------|----------------------------|------|---------------------|
//! | `Mode1`  | `[p, c*b, c*w]`            | 2M   | supplied (known)    |
//! | `Mode2`  | `[p, c*b, c*w, v]`         | 2M   | estimated           |
//! | `Ctwlas` | `[p, c*b, c*w]`            | 2M   | assumed zero        |
//! | `Owlas`  | `[p, c*b]`                 | M    | unused              |
//!
//! Clock offset and drift are carried in range-equivalent units (m and m/s),
//! so the clock columns of the design matrix are `-1`, `+1` and `delta_t`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix, Vector};
use crate::measurement::{ToaMeasurementSet, MIN_RANGE};
use crate::scenario::{distance, AnchorSet, ResponseSchedule, UdState, SPEED_OF_LIGHT};

/// Which estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Two-way, UD velocity known.
    Mode1,
    /// Two-way, UD velocity estimated.
    Mode2,
    /// Conventional two-way: velocity assumed zero.
    Ctwlas,
    /// Conventional one-way: request measurements only.
    Owlas,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Mode1, Mode::Mode2, Mode::Ctwlas, Mode::Owlas];

    /// Number of unknowns for spatial dimension `n`.
    pub fn param_dim(self, n: usize) -> usize {
        match self {
            Mode::Mode1 | Mode::Ctwlas => n + 2,
            Mode::Mode2 => 2 * n + 2,
            Mode::Owlas => n + 1,
        }
    }

    pub fn uses_response(self) -> bool {
        self != Mode::Owlas
    }

    pub fn estimates_velocity(self) -> bool {
        self == Mode::Mode2
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Mode1 => "mode1",
            Mode::Mode2 => "mode2",
            Mode::Ctwlas => "ctwlas",
            Mode::Owlas => "owlas",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "mode1" | "twlas1" => Ok(Mode::Mode1),
            "mode2" | "twlas2" => Ok(Mode::Mode2),
            "ctwlas" => Ok(Mode::Ctwlas),
            "owlas" => Ok(Mode::Owlas),
            _ => Err(Error::InvalidConfig(format!("unknown mode `{s}`"))),
        }
    }
}

/// The unknown vector in the layout of its mode: `[p, c*b]`, then `c*w` for
/// the two-way modes, then `v` for `Mode2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    mode: Mode,
    dim: usize,
    values: Vec<f64>,
}

impl ParamVector {
    /// Builds a parameter vector. `clock_drift` (m/s) is ignored for `Owlas`;
    /// `velocity` is required for `Mode2` and ignored otherwise.
    pub fn new(
        mode: Mode,
        position: &[f64],
        clock_offset: f64,
        clock_drift: f64,
        velocity: Option<&[f64]>,
    ) -> Result<Self> {
        let n = position.len();
        let mut values = position.to_vec();
        values.push(clock_offset);
        if mode.uses_response() {
            values.push(clock_drift);
        }
        if mode.estimates_velocity() {
            let v = velocity.ok_or_else(|| {
                Error::InvalidConfig("mode2 parameters need a velocity".into())
            })?;
            if v.len() != n {
                return Err(Error::InvalidConfig(format!(
                    "velocity dimension {} does not match position dimension {n}",
                    v.len()
                )));
            }
            values.extend_from_slice(v);
        }
        Self::from_vec(mode, n, values)
    }

    pub fn from_vec(mode: Mode, dim: usize, values: Vec<f64>) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidConfig(format!(
                "spatial dimension must be 2 or 3, got {dim}"
            )));
        }
        if values.len() != mode.param_dim(dim) {
            return Err(Error::InvalidConfig(format!(
                "{mode} needs {} parameters, got {}",
                mode.param_dim(dim),
                values.len()
            )));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("parameters must be finite".into()));
        }
        Ok(Self { mode, dim, values })
    }

    /// The true parameters of `ud` in the layout of `mode`.
    pub fn from_truth(mode: Mode, ud: &UdState) -> Self {
        Self::new(
            mode,
            &ud.position,
            SPEED_OF_LIGHT * ud.clock_offset,
            SPEED_OF_LIGHT * ud.clock_drift,
            Some(&ud.velocity),
        )
        .expect("validated state")
    }

    /// Starting point with the given position: clock offset from the first
    /// response (two-way modes) or the negated first request (one-way),
    /// zero drift and zero velocity.
    pub fn initial_guess(mode: Mode, position: &[f64], measurements: &ToaMeasurementSet) -> Result<Self> {
        let offset = if mode.uses_response() {
            measurements.response()[0]
        } else {
            -measurements.request()[0]
        };
        let zeros = vec![0.0; position.len()];
        Self::new(mode, position, offset, 0.0, Some(&zeros))
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Spatial dimension `N`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn position(&self) -> &[f64] {
        &self.values[..self.dim]
    }

    /// Range-equivalent clock offset `c*b` (m).
    pub fn clock_offset(&self) -> f64 {
        self.values[self.dim]
    }

    /// Range-equivalent drift `c*w` (m/s), absent for `Owlas`.
    pub fn clock_drift(&self) -> Option<f64> {
        self.mode.uses_response().then(|| self.values[self.dim + 1])
    }

    pub fn velocity(&self) -> Option<&[f64]> {
        self.mode
            .estimates_velocity()
            .then(|| &self.values[self.dim + 2..])
    }

    /// Same values reinterpreted under another mode with identical layout.
    pub fn with_mode(&self, mode: Mode) -> Result<Self> {
        Self::from_vec(mode, self.dim, self.values.clone())
    }

    fn apply(&mut self, delta: &Vector) {
        for (v, d) in self.values.iter_mut().zip(delta.as_slice()) {
            *v += d;
        }
    }
}

/// Stopping and velocity settings for [`solve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop once the position part of the update is shorter than this (m).
    pub convergence_threshold: f64,
    /// UD velocity (m/s) for `Mode1`. `Ctwlas` always uses zero.
    #[serde(default)]
    pub known_velocity: Option<Vec<f64>>,
    /// When false the loop always runs `max_iterations` updates.
    #[serde(default = "default_true")]
    pub early_exit: bool,
}

fn default_true() -> bool {
    true
}

impl SolverConfig {
    /// Ten iterations, threshold `sigma / 10`.
    pub fn for_sigma(sigma: f64) -> Self {
        Self {
            max_iterations: 10,
            convergence_threshold: sigma / 10.0,
            known_velocity: None,
            early_exit: true,
        }
    }

    pub fn with_known_velocity(mut self, v: &[f64]) -> Self {
        self.known_velocity = Some(v.to_vec());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.convergence_threshold.is_finite() && self.convergence_threshold > 0.0) {
            return Err(Error::InvalidConfig(
                "convergence_threshold must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The stacked measurement model of one mode at fixed anchors and schedule.
#[derive(Debug, Clone)]
pub struct TwoWayModel<'a> {
    anchors: &'a AnchorSet,
    schedule: &'a ResponseSchedule,
    mode: Mode,
    velocity: Vec<f64>,
}

impl<'a> TwoWayModel<'a> {
    /// `known_velocity` is required for `Mode1`; it is ignored by the other
    /// modes (`Ctwlas` assumes zero, `Mode2` estimates it).
    pub fn new(
        anchors: &'a AnchorSet,
        schedule: &'a ResponseSchedule,
        mode: Mode,
        known_velocity: Option<&[f64]>,
    ) -> Result<Self> {
        let n = anchors.dim();
        if schedule.len() != anchors.len() {
            return Err(Error::InvalidConfig(format!(
                "schedule has {} delays for {} anchors",
                schedule.len(),
                anchors.len()
            )));
        }
        let velocity = match mode {
            Mode::Mode1 => {
                let v = known_velocity.ok_or_else(|| {
                    Error::InvalidConfig("mode1 needs a known UD velocity".into())
                })?;
                if v.len() != n {
                    return Err(Error::InvalidConfig(format!(
                        "known velocity has dimension {}, expected {n}",
                        v.len()
                    )));
                }
                v.to_vec()
            }
            _ => vec![0.0; n],
        };
        Ok(Self {
            anchors,
            schedule,
            mode,
            velocity,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Number of model rows: `2M`, or `M` for the one-way estimator.
    pub fn rows(&self) -> usize {
        if self.mode.uses_response() {
            2 * self.anchors.len()
        } else {
            self.anchors.len()
        }
    }

    fn check(&self, theta: &ParamVector) -> Result<()> {
        if theta.mode != self.mode || theta.dim != self.anchors.dim() {
            return Err(Error::InvalidConfig(format!(
                "parameters are {} in {}-D, model is {} in {}-D",
                theta.mode,
                theta.dim,
                self.mode,
                self.anchors.dim()
            )));
        }
        Ok(())
    }

    fn velocity_of<'b>(&'b self, theta: &'b ParamVector) -> &'b [f64] {
        theta.velocity().unwrap_or(&self.velocity)
    }

    /// Unit LOS vectors from the UD to each anchor at request time (`e_i`)
    /// and at response reception (`l_i`).
    pub fn los_vectors(&self, theta: &ParamVector) -> Result<LosPair> {
        self.check(theta)?;
        let (e, _) = self.unit_and_range(theta, None)?;
        let (l, _) = self.unit_and_range(theta, Some(self.velocity_of(theta)))?;
        Ok((e, l))
    }

    fn unit_and_range(&self, theta: &ParamVector, velocity: Option<&[f64]>) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let p = theta.position();
        let mut units = Vec::with_capacity(self.anchors.len());
        let mut ranges = Vec::with_capacity(self.anchors.len());
        for (a, &dt) in self.anchors.positions().iter().zip(self.schedule.delays()) {
            let diff: Vec<f64> = match velocity {
                None => a.iter().zip(p).map(|(ai, pi)| ai - pi).collect(),
                Some(v) => a
                    .iter()
                    .zip(p)
                    .zip(v)
                    .map(|((ai, pi), vi)| ai - pi - vi * dt)
                    .collect(),
            };
            let r = dot(&diff, &diff).sqrt();
            if r < MIN_RANGE {
                return Err(Error::DegenerateGeometry(
                    "UD position coincides with an anchor".into(),
                ));
            }
            units.push(diff.iter().map(|d| d / r).collect());
            ranges.push(r);
        }
        Ok((units, ranges))
    }

    /// Noise-free measurement vector `h(theta)`.
    pub fn h(&self, theta: &ParamVector) -> Result<Vector> {
        self.check(theta)?;
        let cb = theta.clock_offset();
        let (_, req) = self.unit_and_range(theta, None)?;
        let mut out: Vec<f64> = req.iter().map(|r| r - cb).collect();
        if self.mode.uses_response() {
            let cw = theta.clock_drift().expect("two-way mode has drift");
            let (_, resp) = self.unit_and_range(theta, Some(self.velocity_of(theta)))?;
            out.extend(
                resp.iter()
                    .zip(self.schedule.delays())
                    .map(|(r, dt)| r + cb + cw * dt),
            );
        }
        Ok(out.into())
    }

    /// Jacobian of [`Self::h`] with respect to the parameters.
    pub fn design_matrix(&self, theta: &ParamVector) -> Result<Matrix> {
        let (e, l) = self.los_vectors(theta)?;
        let n = theta.dim;
        let m = self.anchors.len();
        let mut g = Matrix::zeros(self.rows(), self.mode.param_dim(n));
        for i in 0..m {
            for k in 0..n {
                g[(i, k)] = -e[i][k];
            }
            g[(i, n)] = -1.0;
        }
        if self.mode.uses_response() {
            for (i, &dt) in self.schedule.delays().iter().enumerate() {
                let row = m + i;
                for k in 0..n {
                    g[(row, k)] = -l[i][k];
                }
                g[(row, n)] = 1.0;
                g[(row, n + 1)] = dt;
                if self.mode.estimates_velocity() {
                    for k in 0..n {
                        g[(row, n + 2 + k)] = -l[i][k] * dt;
                    }
                }
            }
        }
        Ok(g)
    }

    fn observations(&self, measurements: &ToaMeasurementSet) -> Result<(Vector, Vec<f64>)> {
        if measurements.len() != self.anchors.len() {
            return Err(Error::InvalidConfig(format!(
                "{} measurement pairs for {} anchors",
                measurements.len(),
                self.anchors.len()
            )));
        }
        if self.mode.uses_response() {
            Ok((measurements.stacked(), measurements.weight_diagonal().to_vec()))
        } else {
            let m = measurements.len();
            Ok((
                measurements.request().to_vec().into(),
                measurements.weight_diagonal()[..m].to_vec(),
            ))
        }
    }

    /// One Gauss-Newton update `(G^T W G)^-1 G^T W r` at `theta`, together
    /// with the weighted norm of the residual `r = rho - h(theta)`.
    pub fn gauss_newton_step(&self, theta: &ParamVector, measurements: &ToaMeasurementSet) -> Result<Step> {
        let (rho, w) = self.observations(measurements)?;
        let predicted = self.h(theta)?;
        let r: Vector = rho
            .as_slice()
            .iter()
            .zip(predicted.as_slice())
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>()
            .into();
        let residual_norm = r
            .as_slice()
            .iter()
            .zip(&w)
            .map(|(ri, wi)| wi * ri * ri)
            .sum::<f64>()
            .sqrt();
        let g = self.design_matrix(theta)?;
        let normal = g.weighted_gram(&w)?;
        let rhs = g.weighted_tr_mul(&w, &r)?;
        let delta = Cholesky::factor(&normal)
            .map_err(|e| Error::SingularNormalEquations(e.to_string()))?
            .solve_vector(&rhs)?;
        Ok(Step {
            delta,
            residual_norm,
        })
    }
}

/// Result of one Gauss-Newton update.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub delta: Vector,
    /// `sqrt(r^T W r)` before the update.
    pub residual_norm: f64,
}

/// `h(theta)`; `known_velocity` is used by `Mode1`.
pub fn model_h(
    theta: &ParamVector,
    anchors: &AnchorSet,
    schedule: &ResponseSchedule,
    known_velocity: Option<&[f64]>,
) -> Result<Vector> {
    TwoWayModel::new(anchors, schedule, theta.mode, known_velocity)?.h(theta)
}

/// Request-time and response-time unit vectors, one per anchor.
pub type LosPair = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// `(e_i, l_i)` for every anchor.
pub fn los_vectors(
    theta: &ParamVector,
    anchors: &AnchorSet,
    schedule: &ResponseSchedule,
    known_velocity: Option<&[f64]>,
) -> Result<LosPair> {
    TwoWayModel::new(anchors, schedule, theta.mode, known_velocity)?.los_vectors(theta)
}

/// Design matrix of `theta.mode()` evaluated at `theta`.
pub fn design_matrix(
    theta: &ParamVector,
    anchors: &AnchorSet,
    schedule: &ResponseSchedule,
    known_velocity: Option<&[f64]>,
) -> Result<Matrix> {
    TwoWayModel::new(anchors, schedule, theta.mode, known_velocity)?.design_matrix(theta)
}

pub fn gauss_newton_step(
    theta: &ParamVector,
    measurements: &ToaMeasurementSet,
    anchors: &AnchorSet,
    config: &SolverConfig,
) -> Result<Step> {
    TwoWayModel::new(anchors, measurements.schedule(), theta.mode, config.known_velocity.as_deref())?
        .gauss_newton_step(theta, measurements)
}

/// Why the iteration stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    SingularNormalEquations(String),
    DegenerateGeometry(String),
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Norm of the position part of the update (m).
    pub step_norm: f64,
    /// Weighted residual norm before the update.
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub estimate: ParamVector,
    pub iterations_used: usize,
    pub converged: bool,
    pub termination: Termination,
    pub trace: Vec<IterationRecord>,
}

impl EstimateReport {
    pub fn mode(&self) -> Mode {
        self.estimate.mode
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(EstimateReportDoc::from(self)).expect("report serializes")
    }
}

/// JSON form of an [`EstimateReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReportDoc {
    pub mode: Mode,
    pub theta: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
    pub termination: Termination,
}

impl From<&EstimateReport> for EstimateReportDoc {
    fn from(r: &EstimateReport) -> Self {
        Self {
            mode: r.estimate.mode,
            theta: r.estimate.values.clone(),
            iterations: r.iterations_used,
            converged: r.converged,
            trace: r.trace.clone(),
            termination: r.termination.clone(),
        }
    }
}

/// Minimum number of anchors for `mode` in `n` dimensions.
pub fn required_anchors(mode: Mode, n: usize) -> usize {
    match mode {
        Mode::Owlas => n + 1,
        _ => mode.param_dim(n).div_ceil(2),
    }
}

/// Runs the Gauss-Newton loop from `initial`, whose mode selects the
/// estimator.
///
/// Input validation failures are returned as errors. A singular normal
/// matrix or a degenerate iterate during the loop ends the iteration early
/// and is reported through [`EstimateReport::termination`] with the last
/// valid iterate and `converged == false`.
pub fn solve(
    measurements: &ToaMeasurementSet,
    anchors: &AnchorSet,
    config: &SolverConfig,
    initial: &ParamVector,
) -> Result<EstimateReport> {
    config.validate()?;
    let mode = initial.mode;
    let n = anchors.dim();
    let rows = if mode.uses_response() { 2 * anchors.len() } else { anchors.len() };
    if rows < mode.param_dim(n) {
        return Err(Error::InsufficientMeasurements {
            available: rows,
            required: mode.param_dim(n),
        });
    }
    let model = TwoWayModel::new(anchors, measurements.schedule(), mode, config.known_velocity.as_deref())?;
    model.check(initial)?;
    if measurements.len() != anchors.len() {
        return Err(Error::InvalidConfig(format!(
            "{} measurement pairs for {} anchors",
            measurements.len(),
            anchors.len()
        )));
    }

    let mut theta = initial.clone();
    let mut trace = Vec::with_capacity(config.max_iterations);
    let mut termination = Termination::MaxIterations;
    for _ in 0..config.max_iterations {
        let step = match model.gauss_newton_step(&theta, measurements) {
            Ok(step) => step,
            Err(Error::SingularNormalEquations(msg)) => {
                termination = Termination::SingularNormalEquations(msg);
                break;
            }
            Err(Error::DegenerateGeometry(msg)) => {
                termination = Termination::DegenerateGeometry(msg);
                break;
            }
            Err(e) => return Err(e),
        };
        theta.apply(&step.delta);
        let step_norm = step.delta.head_norm(n);
        trace.push(IterationRecord {
            step_norm,
            residual_norm: step.residual_norm,
        });
        if step_norm < config.convergence_threshold {
            termination = Termination::Converged;
            if config.early_exit {
                break;
            }
        } else if !config.early_exit {
            termination = Termination::MaxIterations;
        }
    }
    if theta.values.iter().any(|x| !x.is_finite()) {
        termination = Termination::DegenerateGeometry("iterate diverged to a non-finite value".into());
    }
    Ok(EstimateReport {
        iterations_used: trace.len(),
        converged: termination == Termination::Converged,
        estimate: theta,
        termination,
        trace,
    })
}

/// Convenience: position error (m) and range-equivalent clock-offset error
/// (m) of an estimate against the truth, as truth minus estimate.
pub fn estimate_errors(estimate: &ParamVector, truth: &UdState) -> (Vec<f64>, f64) {
    let dp = truth
        .position
        .iter()
        .zip(estimate.position())
        .map(|(t, e)| t - e)
        .collect();
    (dp, SPEED_OF_LIGHT * truth.clock_offset - estimate.clock_offset())
}

/// Euclidean position error (m).
pub fn position_error(estimate: &ParamVector, truth: &UdState) -> f64 {
    distance(estimate.position(), &truth.position)
}
