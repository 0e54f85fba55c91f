//! Ground truth: anchor geometry, user-device kinematics and clock, the
//! response schedule and the measurement noise levels.
//!
//! Clock offset is kept in seconds and drift as a dimensionless rate here;
//! the measurement and estimation layers convert both to range-equivalent
//! meters by multiplying with [`SPEED_OF_LIGHT`].

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Propagation speed in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Parts-per-million to dimensionless rate.
pub const PPM: f64 = 1e-6;

/// Anchors closer than this (m) are considered coincident.
const COINCIDENT_TOL: f64 = 1e-9;

/// Known anchor positions, all of the same dimension (2 or 3).
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    positions: Vec<Vec<f64>>,
}

impl AnchorSet {
    pub fn new(positions: Vec<Vec<f64>>) -> Result<Self> {
        let dim = positions.first().map(Vec::len).unwrap_or(0);
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidConfig(format!(
                "anchor dimension must be 2 or 3, got {dim}"
            )));
        }
        for (i, p) in positions.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidConfig(format!(
                    "anchor {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidConfig(format!("anchor {i} is not finite")));
            }
            for (j, q) in positions[..i].iter().enumerate() {
                if distance(p, q) < COINCIDENT_TOL {
                    return Err(Error::DegenerateGeometry(format!(
                        "anchors {j} and {i} coincide"
                    )));
                }
            }
        }
        Ok(Self { positions })
    }

    /// The four anchors on the boundary of the 600 m x 600 m simulation area.
    pub fn square() -> Self {
        Self::new(vec![
            vec![-300.0, -300.0],
            vec![-300.0, 300.0],
            vec![300.0, 300.0],
            vec![300.0, -300.0],
        ])
        .expect("static geometry is valid")
    }

    /// Number of anchors, `M`.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Spatial dimension, `N`.
    pub fn dim(&self) -> usize {
        self.positions[0].len()
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.positions[i]
    }

    pub fn translated(&self, offset: &[f64]) -> Self {
        Self {
            positions: self.positions.iter().map(|p| add(p, offset)).collect(),
        }
    }
}

/// User-device state at the request transmission instant.
#[derive(Debug, Clone, PartialEq)]
pub struct UdState {
    /// m
    pub position: Vec<f64>,
    /// m/s
    pub velocity: Vec<f64>,
    /// s
    pub clock_offset: f64,
    /// dimensionless (s/s)
    pub clock_drift: f64,
}

impl UdState {
    pub fn new(position: Vec<f64>, velocity: Vec<f64>, clock_offset: f64, clock_drift: f64) -> Result<Self> {
        if position.len() != velocity.len() {
            return Err(Error::InvalidConfig(format!(
                "position has dimension {} but velocity has {}",
                position.len(),
                velocity.len()
            )));
        }
        let all = position.iter().chain(&velocity).chain([&clock_offset, &clock_drift]);
        if all.into_iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("UD state must be finite".into()));
        }
        Ok(Self {
            position,
            velocity,
            clock_offset,
            clock_drift,
        })
    }

    pub fn dim(&self) -> usize {
        self.position.len()
    }

    /// Constant-velocity, constant-drift propagation over `dt` seconds.
    pub fn propagate(&self, dt: f64) -> UdState {
        debug_assert!(dt >= 0.0, "propagation interval must be non-negative");
        UdState {
            position: self
                .position
                .iter()
                .zip(&self.velocity)
                .map(|(p, v)| p + v * dt)
                .collect(),
            velocity: self.velocity.clone(),
            clock_offset: self.clock_offset + self.clock_drift * dt,
            clock_drift: self.clock_drift,
        }
    }

    /// Position at `dt` seconds after the request transmission.
    pub fn position_after(&self, dt: f64) -> Vec<f64> {
        self.position
            .iter()
            .zip(&self.velocity)
            .map(|(p, v)| p + v * dt)
            .collect()
    }

    pub fn translated(&self, offset: &[f64]) -> Self {
        Self {
            position: add(&self.position, offset),
            ..self.clone()
        }
    }
}

/// Intervals from the request transmission to the reception of each anchor's
/// response, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSchedule {
    delays: Vec<f64>,
}

impl ResponseSchedule {
    pub fn new(delays: Vec<f64>) -> Result<Self> {
        if delays.is_empty() {
            return Err(Error::InvalidConfig("response schedule is empty".into()));
        }
        if let Some(i) = delays.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "response delay {i} must be positive, got {}",
                delays[i]
            )));
        }
        Ok(Self { delays })
    }

    /// `step, 2*step, ..., m*step`.
    pub fn sequential(m: usize, step: f64) -> Result<Self> {
        Self::new((1..=m).map(|i| i as f64 * step).collect())
    }

    /// Every response received after the same delay.
    pub fn simultaneous(m: usize, delay: f64) -> Result<Self> {
        Self::new(vec![delay; m])
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.delays.windows(2).all(|w| w[1] > w[0])
    }

    pub fn is_uniform(&self) -> bool {
        self.delays.windows(2).all(|w| w[1] == w[0])
    }
}

/// Range-equivalent noise standard deviations (m).
///
/// Zero is accepted so that noise-free measurements can be drawn; the
/// weighting matrix requires strictly positive values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(rename = "request")]
    pub sigma_request: Vec<f64>,
    #[serde(rename = "response")]
    pub sigma_response: f64,
}

impl NoiseSpec {
    pub fn new(sigma_request: Vec<f64>, sigma_response: f64) -> Result<Self> {
        let spec = Self {
            sigma_request,
            sigma_response,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Same standard deviation on all `2m` measurements.
    pub fn uniform(m: usize, sigma: f64) -> Result<Self> {
        Self::new(vec![sigma; m], sigma)
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.sigma_request.iter().chain([&self.sigma_response]);
        if all.into_iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidNoise(
                "standard deviations must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn is_positive(&self) -> bool {
        self.sigma_request.iter().all(|&s| s > 0.0) && self.sigma_response > 0.0
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            sigma_request: self.sigma_request.iter().map(|s| s * k).collect(),
            sigma_response: self.sigma_response * k,
        }
    }
}

/// A complete ground-truth description of one measurement epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub anchors: AnchorSet,
    pub ud: UdState,
    pub schedule: ResponseSchedule,
    pub noise: NoiseSpec,
}

impl Scenario {
    pub fn new(anchors: AnchorSet, ud: UdState, schedule: ResponseSchedule, noise: NoiseSpec) -> Result<Self> {
        let m = anchors.len();
        if ud.dim() != anchors.dim() {
            return Err(Error::InvalidConfig(format!(
                "UD dimension {} does not match anchor dimension {}",
                ud.dim(),
                anchors.dim()
            )));
        }
        if schedule.len() != m {
            return Err(Error::InvalidConfig(format!(
                "schedule has {} delays for {m} anchors",
                schedule.len()
            )));
        }
        if noise.sigma_request.len() != m {
            return Err(Error::InvalidNoise(format!(
                "{} request sigmas for {m} anchors",
                noise.sigma_request.len()
            )));
        }
        noise.validate()?;
        Ok(Self {
            anchors,
            ud,
            schedule,
            noise,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScenarioDoc =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        doc.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScenarioDoc::from(self)).expect("scenario serializes")
    }
}

/// JSON form of a [`Scenario`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub anchors: Vec<Vec<f64>>,
    pub ud: UdStateDoc,
    pub schedule_ms: Vec<f64>,
    pub noise_m: NoiseSpec,
}

/// JSON form of a [`UdState`]; drift is written in ppm.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UdStateDoc {
    pub position_m: Vec<f64>,
    pub velocity_mps: Vec<f64>,
    pub clock_offset_s: f64,
    pub clock_drift_ppm: f64,
}

impl From<&UdState> for UdStateDoc {
    fn from(ud: &UdState) -> Self {
        Self {
            position_m: ud.position.clone(),
            velocity_mps: ud.velocity.clone(),
            clock_offset_s: ud.clock_offset,
            clock_drift_ppm: ud.clock_drift / PPM,
        }
    }
}

impl TryFrom<UdStateDoc> for UdState {
    type Error = Error;
    fn try_from(doc: UdStateDoc) -> Result<Self> {
        UdState::new(
            doc.position_m,
            doc.velocity_mps,
            doc.clock_offset_s,
            doc.clock_drift_ppm * PPM,
        )
    }
}

impl From<&Scenario> for ScenarioDoc {
    fn from(s: &Scenario) -> Self {
        Self {
            anchors: s.anchors.positions().to_vec(),
            ud: (&s.ud).into(),
            schedule_ms: s.schedule.delays().iter().map(|d| d * 1e3).collect(),
            noise_m: s.noise.clone(),
        }
    }
}

impl TryFrom<ScenarioDoc> for Scenario {
    type Error = Error;
    fn try_from(doc: ScenarioDoc) -> Result<Self> {
        Scenario::new(
            AnchorSet::new(doc.anchors)?,
            doc.ud.try_into()?,
            ResponseSchedule::new(doc.schedule_ms.iter().map(|d| d * 1e-3).collect())?,
            doc.noise_m,
        )
    }
}

/// Distribution of the UD speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedDistribution {
    /// `U(0, max)` m/s.
    Uniform { max: f64 },
    /// Fixed norm, random direction.
    Fixed { speed: f64 },
}

/// Random truth generator for the 2-D simulation area.
///
/// Every call to [`ScenarioSampler::sample`] consumes the same number of
/// random draws in the same order regardless of configuration, so two
/// samplers that differ only in speed or schedule produce matched draws from
/// the same stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSampler {
    pub anchors: AnchorSet,
    /// UD position is uniform in `[-half_width, half_width]^2` (m).
    pub half_width: f64,
    /// Clock offset is uniform in `[-max, max]` (s).
    pub clock_offset_max: f64,
    /// Drift is uniform in `[-max, max]` ppm.
    pub drift_max_ppm: f64,
    pub speed: SpeedDistribution,
    /// Response `i` (1-based) is received `i * step` seconds after the request.
    pub schedule_step: f64,
}

impl Default for ScenarioSampler {
    fn default() -> Self {
        Self {
            anchors: AnchorSet::square(),
            half_width: 250.0,
            clock_offset_max: 1.0,
            drift_max_ppm: 10.0,
            speed: SpeedDistribution::Uniform { max: 50.0 },
            schedule_step: 0.010,
        }
    }
}

impl ScenarioSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (AnchorSet, UdState, ResponseSchedule) {
        let x = rng.random_range(-self.half_width..=self.half_width);
        let y = rng.random_range(-self.half_width..=self.half_width);
        let b = rng.random_range(-self.clock_offset_max..=self.clock_offset_max);
        let w = rng.random_range(-self.drift_max_ppm..=self.drift_max_ppm) * PPM;
        let u: f64 = rng.random();
        let angle = rng.random_range(0.0..2.0 * PI);
        let speed = match self.speed {
            SpeedDistribution::Uniform { max } => u * max,
            SpeedDistribution::Fixed { speed } => speed,
        };
        let ud = UdState {
            position: vec![x, y],
            velocity: vec![speed * angle.cos(), speed * angle.sin()],
            clock_offset: b,
            clock_drift: w,
        };
        let schedule = ResponseSchedule::sequential(self.anchors.len(), self.schedule_step)
            .expect("positive step");
        (self.anchors.clone(), ud, schedule)
    }
}

/// Draws the simulation-study truth: square anchor layout, UD uniform in the
/// inner 500 m square, `b ~ U(-1, 1)` s, drift `~ U(-10, 10)` ppm, speed
/// `~ U(0, 50)` m/s in a uniform direction, responses every 10 ms.
pub fn reference_scenario<R: Rng + ?Sized>(rng: &mut R) -> (AnchorSet, UdState, ResponseSchedule) {
    ScenarioSampler::default().sample(rng)
}

/// [`reference_scenario`] driven by a fresh ChaCha stream seeded with `seed`.
pub fn reference_scenario_seeded(seed: u64) -> (AnchorSet, UdState, ResponseSchedule) {
    reference_scenario(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// Random anchor layout used for sweeping the accuracy theorems: `m` anchors
/// and the UD uniform in a square of half-width `half_width`, each anchor at
/// least `min_separation` from the UD and from each other.
pub fn random_geometry<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    half_width: f64,
    min_separation: f64,
) -> (AnchorSet, Vec<f64>) {
    let draw = |rng: &mut R| {
        vec![
            rng.random_range(-half_width..=half_width),
            rng.random_range(-half_width..=half_width),
        ]
    };
    let ud = draw(rng);
    let mut anchors: Vec<Vec<f64>> = Vec::with_capacity(m);
    while anchors.len() < m {
        let p = draw(rng);
        if distance(&p, &ud) >= min_separation
            && anchors.iter().all(|q| distance(&p, q) >= min_separation)
        {
            anchors.push(p);
        }
    }
    (AnchorSet::new(anchors).expect("separated anchors"), ud)
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(p: [f64; 2], v: [f64; 2], b: f64, w: f64) -> UdState {
        UdState::new(p.to_vec(), v.to_vec(), b, w).unwrap()
    }

    #[test]
    fn propagate_static_clock() {
        let s = state([0.0, 0.0], [0.0, 0.0], 0.5, 0.0);
        assert_eq!(s.propagate(1.0), s);
    }

    #[test]
    fn propagate_moving_drifting() {
        let s = state([0.0, 0.0], [10.0, 0.0], 0.0, 1e-5).propagate(0.01);
        assert!((s.position[0] - 0.1).abs() < 1e-15);
        assert_eq!(s.position[1], 0.0);
        assert!((s.clock_offset - 1e-7).abs() < 1e-22);
        assert_eq!(s.velocity, vec![10.0, 0.0]);
        assert_eq!(s.clock_drift, 1e-5);
    }

    #[test]
    fn propagate_composes() {
        // Values chosen so every product and sum is exact in binary.
        let s = state([1.5, -2.0], [4.0, 0.5], 0.25, 0.125);
        assert_eq!(s.propagate(0.5).propagate(0.25), s.propagate(0.75));
    }

    #[test]
    fn square_anchors() {
        let a = AnchorSet::square();
        assert_eq!(a.len(), 4);
        assert_eq!(a.dim(), 2);
        assert_eq!(a.get(0), &[-300.0, -300.0]);
        assert_eq!(a.get(1), &[-300.0, 300.0]);
        assert_eq!(a.get(2), &[300.0, 300.0]);
        assert_eq!(a.get(3), &[300.0, -300.0]);
    }

    #[test]
    fn reference_scenario_is_reproducible() {
        assert_eq!(reference_scenario_seeded(42), reference_scenario_seeded(42));
        assert_ne!(reference_scenario_seeded(42).1, reference_scenario_seeded(43).1);
        let (_, _, schedule) = reference_scenario_seeded(1);
        assert_eq!(schedule.delays(), &[0.01, 0.02, 0.03, 0.04]);
    }

    #[test]
    fn anchor_validation() {
        assert!(matches!(
            AnchorSet::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]]),
            Err(Error::DegenerateGeometry(_))
        ));
        assert!(AnchorSet::new(vec![vec![0.0]]).is_err());
        assert!(AnchorSet::new(vec![vec![0.0, 0.0], vec![1.0, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn schedule_validation() {
        assert!(ResponseSchedule::new(vec![0.01, 0.0]).is_err());
        assert!(ResponseSchedule::new(vec![]).is_err());
        let s = ResponseSchedule::simultaneous(4, 0.02).unwrap();
        assert!(s.is_uniform() && !s.is_strictly_increasing());
        assert!(ResponseSchedule::sequential(4, 0.01).unwrap().is_strictly_increasing());
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseSpec::new(vec![0.1, -0.1], 0.1).is_err());
        assert!(NoiseSpec::uniform(3, f64::NAN).is_err());
        assert!(!NoiseSpec::uniform(3, 0.0).unwrap().is_positive());
    }

    #[test]
    fn scenario_json_round_trip() {
        let (anchors, ud, schedule) = reference_scenario_seeded(3);
        let s = Scenario::new(anchors, ud, schedule, NoiseSpec::uniform(4, 0.1).unwrap()).unwrap();
        let text = s.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["anchors", "ud", "schedule_ms", "noise_m"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(back.anchors, s.anchors);
        assert!((back.ud.clock_drift - s.ud.clock_drift).abs() < 1e-18);
        for (a, b) in back.schedule.delays().iter().zip(s.schedule.delays()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn speed_moments() {
        let sampler = ScenarioSampler::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| crate::linalg::norm(&sampler.sample(&mut rng).1.velocity))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 25.0).abs() < 0.5, "mean speed {mean}");
    }
}
