use proptest::prelude::*;
use toa_core::estimator::{design_matrix, los_vectors, model_h, solve, Mode, ParamVector, SolverConfig};
use toa_core::linalg::{invert_spd, is_positive_semidefinite, Matrix};
use toa_core::measurement::model_measurements;
use toa_core::{AnchorSet, NoiseSpec, ResponseSchedule, ToaMeasurementSet, UdState};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-10.0..10.0f64, rows * cols).prop_map(move |d| Matrix::new(rows, cols, d).unwrap())
}

fn triple_loop(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a[(i, k)] * b[(k, j)];
            }
            c[(i, j)] = s;
        }
    }
    c
}

fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
    a.sub(b).unwrap().max_abs() <= tol * (1.0 + a.max_abs().max(b.max_abs()))
}

prop_compose! {
    fn geometry()(
        anchors in prop::collection::vec((-300.0..300.0f64, -300.0..300.0f64), 4..8),
        p in (-150.0..150.0f64, -150.0..150.0f64),
        v in (-50.0..50.0f64, -50.0..50.0f64),
        b in -1e-6..1e-6f64,
        w in -1e-5..1e-5f64,
        gaps in prop::collection::vec(0.001..0.02f64, 8),
    ) -> (AnchorSet, UdState, ResponseSchedule) {
        let mut t = 0.0;
        let delays: Vec<f64> = gaps[..anchors.len()].iter().map(|g| { t += g; t }).collect();
        (
            AnchorSet::new(anchors.iter().map(|&(x, y)| vec![x, y]).collect()).unwrap(),
            UdState::new(vec![p.0, p.1], vec![v.0, v.1], b, w).unwrap(),
            ResponseSchedule::new(delays).unwrap(),
        )
    }
}

fn well_separated(anchors: &AnchorSet, ud: &UdState, schedule: &ResponseSchedule) -> bool {
    let dist = |a: &[f64], q: &[f64]| ((a[0] - q[0]).powi(2) + (a[1] - q[1]).powi(2)).sqrt();
    anchors.positions().iter().zip(schedule.delays()).all(|(a, &dt)| {
        dist(a, &ud.position) > 10.0 && dist(a, &ud.position_after(dt)) > 10.0
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matmul_matches_triple_loop(a in matrix(3, 4), b in matrix(4, 2)) {
        prop_assert!(close(&a.matmul(&b).unwrap(), &triple_loop(&a, &b), 1e-12));
    }

    #[test]
    fn matmul_is_associative(a in matrix(2, 3), b in matrix(3, 4), c in matrix(4, 2)) {
        let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-10));
    }

    #[test]
    fn transpose_of_product(a in matrix(3, 4), b in matrix(4, 2)) {
        let lhs = a.matmul(&b).unwrap().transpose();
        let rhs = b.transpose().matmul(&a.transpose()).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn gram_is_psd_and_inverse_multiplies_back(b in matrix(7, 4), w in prop::collection::vec(0.1..10.0f64, 7)) {
        let g = b.weighted_gram(&w).unwrap();
        let oracle = triple_loop(&b.transpose(), &Matrix::from_diagonal(&w)).matmul(&b).unwrap();
        prop_assert!(close(&g, &oracle, 1e-12));
        prop_assert!(is_positive_semidefinite(&g, 1e-9));
        let reg = g.add(&Matrix::identity(4)).unwrap();
        let inv = invert_spd(&reg).unwrap();
        prop_assert!(close(&reg.matmul(&inv).unwrap(), &Matrix::identity(4), 1e-9));
    }

    #[test]
    fn propagation_composes(geo in geometry(), s in 0.0..0.1f64, t in 0.0..0.1f64) {
        let (_, ud, _) = geo;
        let two = ud.propagate(s).propagate(t);
        let one = ud.propagate(s + t);
        for (a, b) in two.position.iter().zip(&one.position) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        prop_assert!((two.clock_offset - one.clock_offset).abs() < 1e-15);
    }

    #[test]
    fn line_of_sight_vectors_are_unit(geo in geometry()) {
        let (anchors, ud, schedule) = geo;
        prop_assume!(well_separated(&anchors, &ud, &schedule));
        let theta = ParamVector::from_truth(Mode::Mode2, &ud);
        let (e, l) = los_vectors(&theta, &anchors, &schedule, None).unwrap();
        for u in e.iter().chain(&l) {
            prop_assert!(((u[0] * u[0] + u[1] * u[1]).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn design_matrix_matches_finite_differences(geo in geometry()) {
        let (anchors, ud, schedule) = geo;
        prop_assume!(well_separated(&anchors, &ud, &schedule));
        let theta = ParamVector::from_truth(Mode::Mode2, &ud);
        let g = design_matrix(&theta, &anchors, &schedule, None).unwrap();
        let h = |x: &[f64]| {
            let t = ParamVector::from_vec(Mode::Mode2, 2, x.to_vec()).unwrap();
            model_h(&t, &anchors, &schedule, None).unwrap()
        };
        let base = theta.as_slice().to_vec();
        for j in 0..base.len() {
            let step = 1e-4;
            let (mut up, mut dn) = (base.clone(), base.clone());
            up[j] += step;
            dn[j] -= step;
            let (hu, hd) = (h(&up), h(&dn));
            for i in 0..g.rows() {
                let fd = (hu[i] - hd[i]) / (2.0 * step);
                prop_assert!((g[(i, j)] - fd).abs() < 1e-6, "({i},{j}) {} vs {fd}", g[(i, j)]);
            }
        }
    }

    #[test]
    fn solution_is_translation_equivariant(geo in geometry(), shift in (-500.0..500.0f64, -500.0..500.0f64)) {
        let (anchors, ud, schedule) = geo;
        prop_assume!(well_separated(&anchors, &ud, &schedule));
        let noise = NoiseSpec::uniform(anchors.len(), 0.1).unwrap();
        let (req, resp) = model_measurements(&anchors, &ud, &schedule).unwrap();
        let meas = ToaMeasurementSet::new(req, resp, schedule.clone(), noise).unwrap();
        let config = SolverConfig::for_sigma(0.1);
        let guess = [ud.position[0] + 5.0, ud.position[1] - 5.0];
        let a = solve(&meas, &anchors, &config, &ParamVector::initial_guess(Mode::Mode2, &guess, &meas).unwrap()).unwrap();

        let offset = [shift.0, shift.1];
        let moved = anchors.translated(&offset);
        let moved_guess = [guess[0] + shift.0, guess[1] + shift.1];
        let b = solve(&meas, &moved, &config, &ParamVector::initial_guess(Mode::Mode2, &moved_guess, &meas).unwrap()).unwrap();

        prop_assert_eq!(a.converged, b.converged);
        let (pa, pb) = (a.estimate.position(), b.estimate.position());
        prop_assert!((pb[0] - pa[0] - shift.0).abs() < 1e-6);
        prop_assert!((pb[1] - pa[1] - shift.1).abs() < 1e-6);
        let (ca, cb) = (a.estimate.clock_offset(), b.estimate.clock_offset());
        prop_assert!((ca - cb).abs() <= 1e-6 * (1.0 + ca.abs()));
    }
}
