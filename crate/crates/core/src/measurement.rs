//! Forward model for the two-way exchange.
//!
//! For each anchor the UD's request yields a request-TOA at the anchor, and
//! the anchor's reply yields a response-TOA at the UD `delta_t` seconds after
//! the request was sent. All values are range-equivalent meters.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::scenario::{distance, AnchorSet, NoiseSpec, ResponseSchedule, Scenario, UdState, SPEED_OF_LIGHT};

/// Below this range (m) the line of sight is undefined.
pub const MIN_RANGE: f64 = 1e-9;

/// Noise-free request-TOA at `anchor`: `|p_i - p| - c*b`.
pub fn model_request_toa(anchor: &[f64], ud: &UdState) -> Result<f64> {
    let range = distance(anchor, &ud.position);
    if range < MIN_RANGE {
        return Err(Error::DegenerateGeometry(
            "UD coincides with an anchor at request time".into(),
        ));
    }
    Ok(range - SPEED_OF_LIGHT * ud.clock_offset)
}

/// Noise-free response-TOA from `anchor` received `delta_t` seconds after the
/// request: `|p_i - p - v*dt| + c*b + c*w*dt`, with the state taken at the
/// request instant.
pub fn model_response_toa(anchor: &[f64], ud: &UdState, delta_t: f64) -> Result<f64> {
    if delta_t.is_nan() || delta_t <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "response delay must be positive, got {delta_t}"
        )));
    }
    let range = distance(anchor, &ud.position_after(delta_t));
    if range < MIN_RANGE {
        return Err(Error::DegenerateGeometry(
            "UD coincides with an anchor at response time".into(),
        ));
    }
    Ok(range + SPEED_OF_LIGHT * (ud.clock_offset + ud.clock_drift * delta_t))
}

/// Noise-free request and response halves for every anchor.
pub fn model_measurements(
    anchors: &AnchorSet,
    ud: &UdState,
    schedule: &ResponseSchedule,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let request = anchors
        .positions()
        .iter()
        .map(|a| model_request_toa(a, ud))
        .collect::<Result<Vec<_>>>()?;
    let response = anchors
        .positions()
        .iter()
        .zip(schedule.delays())
        .map(|(a, &dt)| model_response_toa(a, ud, dt))
        .collect::<Result<Vec<_>>>()?;
    Ok((request, response))
}

/// `diag(1/s_1^2, ..., 1/s_M^2, 1/s^2, ..., 1/s^2)`.
pub fn build_weights(noise: &NoiseSpec) -> Result<Matrix> {
    Ok(Matrix::from_diagonal(&weight_diagonal(noise)?))
}

pub(crate) fn weight_diagonal(noise: &NoiseSpec) -> Result<Vec<f64>> {
    noise.validate()?;
    if !noise.is_positive() {
        return Err(Error::InvalidNoise(
            "weighting requires strictly positive standard deviations".into(),
        ));
    }
    let m = noise.sigma_request.len();
    Ok(noise
        .sigma_request
        .iter()
        .map(|s| 1.0 / (s * s))
        .chain(std::iter::repeat_n(
            1.0 / (noise.sigma_response * noise.sigma_response),
            m,
        ))
        .collect())
}

/// The stacked `2M` request/response measurements and their weighting.
#[derive(Debug, Clone, PartialEq)]
pub struct ToaMeasurementSet {
    request: Vec<f64>,
    response: Vec<f64>,
    schedule: ResponseSchedule,
    noise: NoiseSpec,
    weights: Vec<f64>,
}

impl ToaMeasurementSet {
    /// `noise` gives the standard deviations the weighting is built from.
    pub fn new(request: Vec<f64>, response: Vec<f64>, schedule: ResponseSchedule, noise: NoiseSpec) -> Result<Self> {
        let m = request.len();
        if response.len() != m || schedule.len() != m || noise.sigma_request.len() != m {
            return Err(Error::InvalidConfig(format!(
                "measurement lengths disagree: {} request, {} response, {} delays, {} request sigmas",
                m,
                response.len(),
                schedule.len(),
                noise.sigma_request.len()
            )));
        }
        if request.iter().chain(&response).any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("measurements must be finite".into()));
        }
        let weights = weight_diagonal(&noise)?;
        Ok(Self {
            request,
            response,
            schedule,
            noise,
            weights,
        })
    }

    /// Number of anchors, `M`.
    pub fn len(&self) -> usize {
        self.request.len()
    }

    pub fn is_empty(&self) -> bool {
        self.request.is_empty()
    }

    pub fn request(&self) -> &[f64] {
        &self.request
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn schedule(&self) -> &ResponseSchedule {
        &self.schedule
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    /// `[rho_1..rho_M, tau_1..tau_M]`.
    pub fn stacked(&self) -> Vector {
        [self.request.as_slice(), self.response.as_slice()].concat().into()
    }

    /// The `2M x 2M` diagonal weighting matrix.
    pub fn weights(&self) -> Matrix {
        Matrix::from_diagonal(&self.weights)
    }

    pub fn weight_diagonal(&self) -> &[f64] {
        &self.weights
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MeasurementDoc::from(self)).expect("measurements serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MeasurementDoc =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        doc.try_into()
    }
}

/// JSON form of a [`ToaMeasurementSet`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementDoc {
    pub request_m: Vec<f64>,
    pub response_m: Vec<f64>,
    pub delta_t_s: Vec<f64>,
    pub sigma_m: NoiseSpec,
}

impl From<&ToaMeasurementSet> for MeasurementDoc {
    fn from(m: &ToaMeasurementSet) -> Self {
        Self {
            request_m: m.request.clone(),
            response_m: m.response.clone(),
            delta_t_s: m.schedule.delays().to_vec(),
            sigma_m: m.noise.clone(),
        }
    }
}

impl TryFrom<MeasurementDoc> for ToaMeasurementSet {
    type Error = Error;
    fn try_from(doc: MeasurementDoc) -> Result<Self> {
        ToaMeasurementSet::new(
            doc.request_m,
            doc.response_m,
            ResponseSchedule::new(doc.delta_t_s)?,
            doc.sigma_m,
        )
    }
}

/// Draws one set of noisy measurements for `scenario`.
///
/// `noise` sets the spread of the injected Gaussian errors and may contain
/// zeros; the weighting always comes from `scenario.noise`. The `M` request
/// errors are drawn before the `M` response errors, each as an independent
/// standard normal scaled by its standard deviation.
pub fn generate<R: Rng + ?Sized>(scenario: &Scenario, noise: &NoiseSpec, rng: &mut R) -> Result<ToaMeasurementSet> {
    let m = scenario.anchors.len();
    noise.validate()?;
    if noise.sigma_request.len() != m {
        return Err(Error::InvalidNoise(format!(
            "{} request sigmas for {m} anchors",
            noise.sigma_request.len()
        )));
    }
    let (mut request, mut response) = model_measurements(&scenario.anchors, &scenario.ud, &scenario.schedule)?;
    for (r, s) in request.iter_mut().zip(&noise.sigma_request) {
        let z: f64 = rng.sample(StandardNormal);
        *r += s * z;
    }
    for r in response.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *r += noise.sigma_response * z;
    }
    ToaMeasurementSet::new(request, response, scenario.schedule.clone(), scenario.noise.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::reference_scenario_seeded;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ud(p: [f64; 2], v: [f64; 2], b: f64, w: f64) -> UdState {
        UdState::new(p.to_vec(), v.to_vec(), b, w).unwrap()
    }

    fn instance(sigma: f64) -> Scenario {
        let (a, u, s) = reference_scenario_seeded(5);
        Scenario::new(a, u, s, NoiseSpec::uniform(4, sigma).unwrap()).unwrap()
    }

    #[test]
    fn request_zero_offset() {
        let r = model_request_toa(&[300.0, 0.0], &ud([0.0, 0.0], [0.0, 0.0], 0.0, 0.0)).unwrap();
        assert_eq!(r, 300.0);
    }

    #[test]
    fn request_with_offset() {
        let r = model_request_toa(&[300.0, 0.0], &ud([0.0, 0.0], [0.0, 0.0], 1e-6, 0.0)).unwrap();
        assert!((r - 0.207542).abs() < 1e-9, "{r}");
    }

    #[test]
    fn request_translation_invariant() {
        let u = ud([12.0, -7.0], [3.0, 1.0], 2e-7, 0.0);
        let a = [250.0, 90.0];
        let shift = [-1234.5, 777.25];
        let moved = model_request_toa(&crate::scenario::add(&a, &shift), &u.translated(&shift)).unwrap();
        assert!((moved - model_request_toa(&a, &u).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn response_stationary() {
        let r = model_response_toa(&[300.0, 0.0], &ud([0.0, 0.0], [0.0, 0.0], 0.0, 0.0), 0.01).unwrap();
        assert_eq!(r, 300.0);
    }

    #[test]
    fn response_moving_drifting() {
        let r = model_response_toa(&[300.0, 0.0], &ud([0.0, 0.0], [10.0, 0.0], 0.0, 1e-5), 0.01).unwrap();
        let expected = 299.9 + SPEED_OF_LIGHT * 1e-5 * 0.01;
        assert!((r - expected).abs() < 1e-9);
        assert!((r - 329.879_245_8).abs() < 1e-6);
    }

    #[test]
    fn geometry_cancels_for_static_device() {
        let u = ud([40.0, -25.0], [0.0, 0.0], 3e-3, 0.0);
        let a = [-300.0, 300.0];
        let diff = model_response_toa(&a, &u, 0.02).unwrap() - model_request_toa(&a, &u).unwrap();
        assert!((diff - 2.0 * SPEED_OF_LIGHT * 3e-3).abs() < 1e-6);
    }

    #[test]
    fn coincident_geometry_rejected() {
        let u = ud([300.0, 0.0], [0.0, 0.0], 0.0, 0.0);
        assert!(matches!(model_request_toa(&[300.0, 0.0], &u), Err(Error::DegenerateGeometry(_))));
        let u = ud([299.9, 0.0], [10.0, 0.0], 0.0, 0.0);
        assert!(matches!(
            model_response_toa(&[300.0, 0.0], &u, 0.01),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn weights_from_sigmas() {
        assert_eq!(build_weights(&NoiseSpec::uniform(3, 1.0).unwrap()).unwrap(), Matrix::identity(6));
        let w = build_weights(&NoiseSpec::new(vec![0.5, 1.0, 1.0], 1.0).unwrap()).unwrap();
        assert_eq!(w[(0, 0)], 4.0);
        assert!(matches!(
            build_weights(&NoiseSpec::uniform(3, 0.0).unwrap()),
            Err(Error::InvalidNoise(_))
        ));
    }

    #[test]
    fn zero_noise_draw_is_exact() {
        let s = instance(0.1);
        let zero = NoiseSpec::uniform(4, 0.0).unwrap();
        let set = generate(&s, &zero, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let (req, resp) = model_measurements(&s.anchors, &s.ud, &s.schedule).unwrap();
        assert_eq!(set.request(), req.as_slice());
        assert_eq!(set.response(), resp.as_slice());
    }

    #[test]
    fn generation_is_deterministic() {
        let s = instance(0.1);
        let a = generate(&s, &s.noise, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = generate(&s, &s.noise, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn request_half_independent_of_schedule() {
        let s = instance(0.3);
        let mut equal = s.clone();
        equal.schedule = ResponseSchedule::simultaneous(4, 0.02).unwrap();
        let a = generate(&s, &s.noise, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let b = generate(&equal, &s.noise, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a.request(), b.request());
    }

    #[test]
    fn sample_spread_matches_sigma() {
        let s = instance(1.0);
        let (req, resp) = model_measurements(&s.anchors, &s.ud, &s.schedule).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 100_000 / 8 + 1;
        let mut errs = Vec::with_capacity(8 * n);
        for _ in 0..n {
            let set = generate(&s, &s.noise, &mut rng).unwrap();
            errs.extend(set.request().iter().zip(&req).map(|(a, b)| a - b));
            errs.extend(set.response().iter().zip(&resp).map(|(a, b)| a - b));
        }
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        let var = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (errs.len() - 1) as f64;
        let sd = var.sqrt();
        assert!((0.99..=1.01).contains(&sd), "sample sd {sd}");
    }

    #[test]
    fn json_field_names() {
        let s = instance(0.1);
        let set = generate(&s, &s.noise, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let text = set.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["request_m", "response_m", "delta_t_s", "sigma_m"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(ToaMeasurementSet::from_json(&text).unwrap(), set);
    }
}
