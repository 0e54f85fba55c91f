//! Fisher information, Cramér-Rao bounds, the two accuracy-ordering
//! theorems and first-order bias predictors for velocity mismatch.
//!
//! Every quantity is evaluated at the true parameters. Clock terms are in
//! range-equivalent units, so CRLB entries are m² (offset) and m²/s² (drift).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{Mode, ParamVector, TwoWayModel};
use crate::linalg::{symmetric_eigenvalues, Cholesky, Matrix, Vector};
use crate::measurement::weight_diagonal;
use crate::scenario::{random_geometry, AnchorSet, NoiseSpec, ResponseSchedule, UdState, PPM};

/// Margins within this relative band are treated as equality.
pub const TIE_TOLERANCE: f64 = 1e-9;

fn velocity_for(mode: Mode, truth: &UdState) -> Option<&[f64]> {
    (mode == Mode::Mode1).then_some(truth.velocity.as_slice())
}

fn weights_for(mode: Mode, noise: &NoiseSpec) -> Result<Vec<f64>> {
    let w = weight_diagonal(noise)?;
    Ok(if mode.uses_response() {
        w
    } else {
        w[..noise.sigma_request.len()].to_vec()
    })
}

/// `F = G^T W G` of `mode` at the truth. `Mode1` uses the true velocity,
/// `Ctwlas` assumes zero velocity.
pub fn fisher_matrix(
    truth: &UdState,
    anchors: &AnchorSet,
    schedule: &ResponseSchedule,
    noise: &NoiseSpec,
    mode: Mode,
) -> Result<Matrix> {
    let model = TwoWayModel::new(anchors, schedule, mode, velocity_for(mode, truth))?;
    let g = model.design_matrix(&ParamVector::from_truth(mode, truth))?;
    g.weighted_gram(&weights_for(mode, noise)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FimReport {
    pub mode: Mode,
    pub fim: Matrix,
    /// `diag(F^-1)`.
    pub crlb_diag: Vec<f64>,
    /// `sqrt` of the summed position variances (m).
    pub position_crlb_rss: f64,
    /// `sqrt` of the clock-offset variance (m).
    pub clock_crlb: f64,
}

impl FimReport {
    pub fn inverse(&self) -> Result<Matrix> {
        Ok(Cholesky::factor(&self.fim)?.inverse())
    }
}

/// Fisher information and CRLB of `mode` at the truth.
pub fn fim(
    truth: &UdState,
    anchors: &AnchorSet,
    schedule: &ResponseSchedule,
    noise: &NoiseSpec,
    mode: Mode,
) -> Result<FimReport> {
    let f = fisher_matrix(truth, anchors, schedule, noise, mode)?;
    let inv = Cholesky::factor(&f)?.inverse();
    let crlb_diag = inv.diagonal();
    let n = truth.dim();
    Ok(FimReport {
        mode,
        position_crlb_rss: crlb_diag[..n].iter().sum::<f64>().sqrt(),
        clock_crlb: crlb_diag[n].sqrt(),
        crlb_diag,
        fim: f,
    })
}

/// Outcome of the Mode 1 versus Mode 2 comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    /// Strict inequality on every index and a PSD Schur term.
    pub holds: bool,
    /// `[F2^-1]_ii - [F1^-1]_ii` for the position and clock-offset indices.
    pub margins: Vec<f64>,
    /// Indices whose margin lies inside the tie band.
    pub ties: Vec<usize>,
    /// Indices whose margin is below the tie band.
    pub violations: Vec<usize>,
    /// `B (L^T W L)^-1 B^T` is positive semi-definite.
    pub schur_term_psd: bool,
    pub schur_term_min_eigenvalue: f64,
}

/// Outcome of the Mode 2 versus OWLAS comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Report {
    /// No violations and `D` is PSD.
    pub holds: bool,
    /// `[F_OW^-1]_ii - [F2^-1]_ii` for the position and clock-offset indices.
    pub margins: Vec<f64>,
    /// Margins divided by `[F_OW^-1]_ii`.
    pub relative_margins: Vec<f64>,
    pub ties: Vec<usize>,
    pub violations: Vec<usize>,
    /// Every margin lies inside the tie band.
    pub equality: bool,
    pub d_matrix: Matrix,
    pub d_is_zero: bool,
    pub d_psd: bool,
    pub d_min_eigenvalue: f64,
}

fn classify(margins: &[f64], scale: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut ties = Vec::new();
    let mut violations = Vec::new();
    for (i, (m, s)) in margins.iter().zip(scale).enumerate() {
        let band = TIE_TOLERANCE * s.abs();
        if m.abs() <= band {
            ties.push(i);
        } else if *m < -band {
            violations.push(i);
        }
    }
    (ties, violations)
}

/// Smallest eigenvalue of `a` and whether it clears `-TIE_TOLERANCE * scale`.
fn psd_against(a: &Matrix, scale: f64) -> Result<(bool, f64)> {
    let eig = symmetric_eigenvalues(&a.symmetrize()?)?;
    let min = eig.first().copied().unwrap_or(0.0);
    Ok((min >= -TIE_TOLERANCE * scale.max(f64::MIN_POSITIVE), min))
}

/// Compares Mode 1 and Mode 2 CRLBs on the first `N+1` entries and checks
/// the PSD Schur term that orders them.
pub fn check_theorem1(
    truth: &UdState,
    anchors: &AnchorSet,
    schedule: &ResponseSchedule,
    noise: &NoiseSpec,
) -> Result<Theorem1Report> {
    let n = truth.dim();
    let f1 = fisher_matrix(truth, anchors, schedule, noise, Mode::Mode1)?;
    let f2 = fisher_matrix(truth, anchors, schedule, noise, Mode::Mode2)?;
    let inv1 = Cholesky::factor(&f1)?.inverse();
    let inv2 = Cholesky::factor(&f2)?.inverse();

    let k = n + 2;
    let b = f2.block(0, k, k, n);
    let ltwl = f2.block(k, k, n, n);
    let schur = b.matmul(&Cholesky::factor(&ltwl)?.solve_matrix(&b.transpose())?)?;
    let (schur_term_psd, schur_term_min_eigenvalue) = psd_against(&schur, schur.norm())?;

    let margins: Vec<f64> = (0..=n).map(|i| inv2[(i, i)] - inv1[(i, i)]).collect();
    let scale: Vec<f64> = (0..=n).map(|i| inv1[(i, i)]).collect();
    let (ties, violations) = classify(&margins, &scale);
    Ok(Theorem1Report {
        holds: ties.is_empty() && violations.is_empty() && schur_term_psd,
        margins,
        ties,
        violations,
        schur_term_psd,
        schur_term_min_eigenvalue,
    })
}

/// Compares Mode 2 and OWLAS CRLBs on the first `N+1` entries and checks
/// that the information gap `D` is PSD.
pub fn check_theorem2(
    truth: &UdState,
    anchors: &AnchorSet,
    schedule: &ResponseSchedule,
    noise: &NoiseSpec,
) -> Result<Theorem2Report> {
    let n = truth.dim();
    let m = anchors.len();
    let f2 = fisher_matrix(truth, anchors, schedule, noise, Mode::Mode2)?;
    let fow = fisher_matrix(truth, anchors, schedule, noise, Mode::Owlas)?;
    let inv2 = Cholesky::factor(&f2)?.inverse();
    let inv_ow = Cholesky::factor(&fow)?.inverse();

    let model = TwoWayModel::new(anchors, schedule, Mode::Mode2, None)?;
    let g = model.design_matrix(&ParamVector::from_truth(Mode::Mode2, truth))?;
    let w_tau = &weight_diagonal(noise)?[m..];
    let g1 = g.block(m, 0, m, n + 1);
    let g2 = g.block(m, n + 1, m, n + 1);
    let g1wg1 = g1.weighted_gram(w_tau)?;
    let g2wg2 = g2.weighted_gram(w_tau)?;
    let mut cross = Matrix::zeros(n + 1, n + 1);
    for r in 0..m {
        for i in 0..=n {
            for j in 0..=n {
                cross[(i, j)] += g1[(r, i)] * w_tau[r] * g2[(r, j)];
            }
        }
    }
    let projected = cross.matmul(&Cholesky::factor(&g2wg2)?.solve_matrix(&cross.transpose())?)?;
    let d = g1wg1.sub(&projected)?.symmetrize()?;
    let reference = g1wg1.norm();
    let d_is_zero = d.norm() <= TIE_TOLERANCE * reference;
    let (d_psd, d_min_eigenvalue) = if d_is_zero {
        (true, 0.0)
    } else {
        psd_against(&d, reference)?
    };

    let margins: Vec<f64> = (0..=n).map(|i| inv_ow[(i, i)] - inv2[(i, i)]).collect();
    let scale: Vec<f64> = (0..=n).map(|i| inv_ow[(i, i)]).collect();
    let (ties, violations) = classify(&margins, &scale);
    Ok(Theorem2Report {
        holds: violations.is_empty() && d_psd,
        relative_margins: margins.iter().zip(&scale).map(|(m, s)| m / s).collect(),
        equality: ties.len() == margins.len(),
        margins,
        ties,
        violations,
        d_matrix: d,
        d_is_zero,
        d_psd,
        d_min_eigenvalue,
    })
}

/// First-order bias and predicted RMSE of a misspecified velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    /// Truth minus expected estimate, in parameter layout `[p, c*b, c*w]`.
    pub bias: Vec<f64>,
    /// `(G^T W G)^-1` at the truth with the assumed velocity.
    pub covariance: Matrix,
    /// `sqrt(|bias|² + tr(Q))` over all parameters.
    pub predicted_rmse_total: f64,
    /// `sqrt(|bias_p|² + tr(Q_pp))` (m).
    pub predicted_rmse_position: f64,
    /// `sqrt(bias_b² + Q_bb)` (m).
    pub predicted_rmse_clock: f64,
}

impl BiasReport {
    /// `sqrt(tr(Q_pp))`: the position RMSE with no bias.
    pub fn position_crlb(&self) -> f64 {
        let n = self.bias.len() - 2;
        (0..n).map(|i| self.covariance[(i, i)]).sum::<f64>().sqrt()
    }

    pub fn clock_crlb(&self) -> f64 {
        let n = self.bias.len() - 2;
        self.covariance[(n, n)].sqrt()
    }
}

/// Mode 1 run with `v_assumed` while the device actually moves at
/// `truth.velocity`.
pub fn mode1_deviated_velocity_error(
    truth: &UdState,
    v_assumed: &[f64],
    anchors: &AnchorSet,
    schedule: &ResponseSchedule,
    noise: &NoiseSpec,
) -> Result<BiasReport> {
    let n = truth.dim();
    let m = anchors.len();
    let theta = ParamVector::from_truth(Mode::Mode1, truth);
    let assumed = TwoWayModel::new(anchors, schedule, Mode::Mode1, Some(v_assumed))?;
    let actual = TwoWayModel::new(anchors, schedule, Mode::Mode1, Some(&truth.velocity))?;
    let h_assumed = assumed.h(&theta)?;
    let h_actual = actual.h(&theta)?;
    // Request rows do not depend on velocity and cancel exactly.
    let mut r = vec![0.0; 2 * m];
    for i in m..2 * m {
        r[i] = (h_assumed[i] - theta.clock_offset()) - (h_actual[i] - theta.clock_offset());
    }
    let r: Vector = r.into();

    let w = weight_diagonal(noise)?;
    let g = assumed.design_matrix(&theta)?;
    let chol = Cholesky::factor(&g.weighted_gram(&w)?)?;
    let bias = chol.solve_vector(&g.weighted_tr_mul(&w, &r)?)?.into_vec();
    let q = chol.inverse();

    let sq = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let tr_p: f64 = (0..n).map(|i| q[(i, i)]).sum();
    Ok(BiasReport {
        predicted_rmse_total: (sq(&bias) + q.trace()).sqrt(),
        predicted_rmse_position: (sq(&bias[..n]) + tr_p).sqrt(),
        predicted_rmse_clock: (bias[n] * bias[n] + q[(n, n)]).sqrt(),
        bias,
        covariance: q,
    })
}

/// Conventional two-way estimator: Mode 1 with zero assumed velocity.
pub fn ctwlas_bias(
    truth: &UdState,
    anchors: &AnchorSet,
    schedule: &ResponseSchedule,
    noise: &NoiseSpec,
) -> Result<BiasReport> {
    mode1_deviated_velocity_error(truth, &vec![0.0; truth.dim()], anchors, schedule, noise)
}

/// Random instance generator for the theorem sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremSweepConfig {
    pub instances: usize,
    #[serde(default = "default_min_anchors")]
    pub min_anchors: usize,
    #[serde(default = "default_max_anchors")]
    pub max_anchors: usize,
    /// All responses arrive after the same delay.
    #[serde(default)]
    pub equal_delays: bool,
    #[serde(default = "default_sigma")]
    pub sigma_m: f64,
    #[serde(default = "default_half_width")]
    pub half_width_m: f64,
    #[serde(default = "default_max_speed")]
    pub max_speed_mps: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_min_anchors() -> usize {
    4
}
fn default_max_anchors() -> usize {
    8
}
fn default_sigma() -> f64 {
    0.1
}
fn default_half_width() -> f64 {
    300.0
}
fn default_max_speed() -> f64 {
    50.0
}

impl Default for TheoremSweepConfig {
    fn default() -> Self {
        Self {
            instances: 1000,
            min_anchors: default_min_anchors(),
            max_anchors: default_max_anchors(),
            equal_delays: false,
            sigma_m: default_sigma(),
            half_width_m: default_half_width(),
            max_speed_mps: default_max_speed(),
            seed: 0,
        }
    }
}

impl TheoremSweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 {
            return Err(Error::InvalidConfig("instances must be at least 1".into()));
        }
        if self.min_anchors < 4 || self.max_anchors < self.min_anchors {
            return Err(Error::InvalidConfig(
                "anchor range must satisfy 4 <= min_anchors <= max_anchors".into(),
            ));
        }
        if !(self.sigma_m.is_finite() && self.sigma_m > 0.0) {
            return Err(Error::InvalidConfig("sigma_m must be positive".into()));
        }
        if !(self.half_width_m.is_finite() && self.half_width_m > 0.0) {
            return Err(Error::InvalidConfig("half_width_m must be positive".into()));
        }
        if !(self.max_speed_mps.is_finite() && self.max_speed_mps >= 0.0) {
            return Err(Error::InvalidConfig("max_speed_mps must be nonnegative".into()));
        }
        Ok(())
    }

    /// One random 2-D instance: geometry, moving drifting device, schedule
    /// (distinct increasing delays unless `equal_delays`) and uniform noise.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (AnchorSet, UdState, ResponseSchedule, NoiseSpec) {
        let m = rng.random_range(self.min_anchors..=self.max_anchors);
        let (anchors, position) = random_geometry(rng, m, self.half_width_m, 1.0);
        let speed = rng.random_range(0.0..=self.max_speed_mps);
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let velocity = vec![speed * angle.cos(), speed * angle.sin()];
        let offset = rng.random_range(-1e-3..=1e-3);
        let drift = rng.random_range(-10.0..=10.0) * PPM;
        let ud = UdState::new(position, velocity, offset, drift).expect("finite draws");
        let schedule = if self.equal_delays {
            ResponseSchedule::simultaneous(m, rng.random_range(0.001..0.020)).expect("positive delay")
        } else {
            let mut t = 0.0;
            let delays = (0..m)
                .map(|_| {
                    t += rng.random_range(0.001..0.020);
                    t
                })
                .collect();
            ResponseSchedule::new(delays).expect("positive delays")
        };
        let noise = NoiseSpec::uniform(m, self.sigma_m).expect("positive sigma");
        (anchors, ud, schedule, noise)
    }
}

/// Summary of a randomized theorem sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremSweepReport {
    pub instances: usize,
    /// Draws rejected because a Fisher matrix was singular.
    pub singular_skipped: usize,
    pub theorem1_violations: usize,
    pub theorem2_violations: usize,
    /// Instances whose Theorem 2 margins all fall in the tie band.
    pub theorem2_equalities: usize,
    /// Largest `|margin|` of Theorem 2 over all instances.
    pub theorem2_max_abs_margin: f64,
    /// Largest `|margin| / [F_OW^-1]_ii` of Theorem 2 over all instances.
    pub theorem2_max_rel_margin: f64,
    /// Smallest Theorem 1 margin over all instances.
    pub theorem1_min_margin: f64,
    pub all_hold: bool,
}

/// Runs both checkers on `config.instances` nonsingular random instances.
pub fn verify_theorems(config: &TheoremSweepConfig) -> Result<TheoremSweepReport> {
    use rand_chacha::rand_core::SeedableRng;
    config.validate()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = TheoremSweepReport {
        instances: 0,
        singular_skipped: 0,
        theorem1_violations: 0,
        theorem2_violations: 0,
        theorem2_equalities: 0,
        theorem2_max_abs_margin: 0.0,
        theorem2_max_rel_margin: 0.0,
        theorem1_min_margin: f64::INFINITY,
        all_hold: true,
    };
    while report.instances < config.instances {
        let (anchors, ud, schedule, noise) = config.sample(&mut rng);
        let t1 = check_theorem1(&ud, &anchors, &schedule, &noise);
        let t2 = check_theorem2(&ud, &anchors, &schedule, &noise);
        let (t1, t2) = match (t1, t2) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(Error::SingularMatrix { .. }), _) | (_, Err(Error::SingularMatrix { .. })) => {
                report.singular_skipped += 1;
                if report.singular_skipped > 100 * config.instances {
                    return Err(Error::DegenerateGeometry(
                        "too many singular instances".into(),
                    ));
                }
                continue;
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        report.instances += 1;
        if !t1.holds {
            report.theorem1_violations += 1;
        }
        if !t2.holds {
            report.theorem2_violations += 1;
        }
        if t2.equality {
            report.theorem2_equalities += 1;
        }
        for (m, r) in t2.margins.iter().zip(&t2.relative_margins) {
            report.theorem2_max_abs_margin = report.theorem2_max_abs_margin.max(m.abs());
            report.theorem2_max_rel_margin = report.theorem2_max_rel_margin.max(r.abs());
        }
        for m in &t1.margins {
            report.theorem1_min_margin = report.theorem1_min_margin.min(*m);
        }
    }
    report.all_hold = report.theorem1_violations == 0 && report.theorem2_violations == 0;
    Ok(report)
}
