use lse_lab::experiments::*;
use lse_lab::replica_core::{solve_rs_generic, Constellation, RsConfig};
use proptest::prelude::*;

fn full_mc(k: usize, alpha: f64, trials: usize) -> McConfig {
    let mut c = McConfig::new(k, alpha, Constellation::FullComplex);
    c.trials = trials;
    c.lambda = 0.1;
    c
}

#[test]
fn rzf_monte_carlo_tracks_the_replica_prediction() {
    let cfg = RsConfig::iid(2.0).unwrap().with_lambda(0.1);
    let d_rs = solve_rs_generic(&Constellation::FullComplex, &cfg).unwrap().d_rs;
    let r = monte_carlo_distortion(&full_mc(60, 2.0, 30)).unwrap();
    assert_eq!(r.trials_used, 30);
    assert!(((r.mean - d_rs) / d_rs).abs() < 0.08, "{} vs {d_rs}", r.mean);
}

#[test]
fn null_solver_leaves_the_full_target_energy() {
    let mut c = McConfig::new(40, 2.0, Constellation::FullComplex);
    c.solver = Solver::Null;
    c.trials = 200;
    c.gamma = 2.0;
    c.sigma_u2 = 0.5;
    let r = monte_carlo_distortion(&c).unwrap();
    assert!((r.mean - 1.0).abs() < 3.0 * r.stderr, "{} +- {}", r.mean, r.stderr);
}

#[test]
fn monte_carlo_ignores_the_thread_count() {
    let mut c = McConfig::new(12, 1.5, Constellation::Mpsk { m: 4, p: 1.0 });
    c.trials = 6;
    c.seed = 17;
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| monte_carlo_distortion(&c).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(McConfig::new(0, 2.0, Constellation::FullComplex).validate().is_err());
    let mut c = full_mc(10, 2.0, 0);
    assert!(c.validate().is_err());
    c.trials = 1;
    c.sigma_u2 = 0.0;
    assert!(monte_carlo_distortion(&c).is_err());
}

#[test]
fn mean_and_standard_error() {
    let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(m, 2.5);
    assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    assert_eq!(mean_stderr(&[7.0]).1, 0.0);
}

#[test]
fn rate_bound_examples() {
    assert!((rate_lower_bound(4.0, 1.0, 0.5, 0.5).unwrap() - 2.0).abs() < 1e-15);
    assert!((rate_lower_bound(1.0, 1.0, 1.0, 1.0).unwrap() + 1.0).abs() < 1e-15);
    assert!(rate_lower_bound(1.0, 1.0, 0.0, 0.0).is_err());
}

#[test]
fn rzf_tuning_at_unit_load_hits_the_golden_ratio() {
    let t = tune_rzf(1.0, 1.0, 1.0, 1.0).unwrap();
    assert_eq!(t.s, -1.0);
    assert!((t.chi_opt - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
    assert!((t.lambda_opt - 1.0).abs() < 1e-14);
    let rs = solve_rs_generic(
        &Constellation::FullComplex,
        &RsConfig::iid(1.0)
            .unwrap()
            .with_lambda(t.lambda_opt)
            .with_gamma(t.gamma),
    )
    .unwrap();
    assert!((rs.chi - t.chi_opt).abs() < 1e-8);
    assert!((rs.q - 1.0).abs() < 1e-8);
}

#[test]
fn rzf_tuning_is_a_grid_maximum() {
    for (alpha, q, sn) in [(1.0, 1.0, 1.0), (2.0, 0.5, 1.0), (5.0, 1.0, 0.1), (1.3, 3.0, 2.0)] {
        let t = tune_rzf(alpha, q, sn, 1.0).unwrap();
        assert!(t.rate_bound > rzf_rate_at_chi(alpha, q, sn, t.chi_opt + 0.1));
        assert!(t.rate_bound > rzf_rate_at_chi(alpha, q, sn, (t.chi_opt - 0.1).max(1e-3)));
        let grid_best = (0..200)
            .map(|i| 0.01 * (5000f64).powf(i as f64 / 199.0))
            .map(|chi| rzf_rate_at_chi(alpha, q, sn, chi))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(grid_best <= t.rate_bound + 1e-9, "alpha = {alpha}");
    }
}

#[test]
fn rzf_tuning_solves_the_stationarity_condition() {
    for (alpha, q, sn) in [(2.0, 0.5, 1.0), (5.0, 3.0, 0.2)] {
        let t = tune_rzf(alpha, q, sn, 1.0).unwrap();
        let h = 1e-5;
        let slope =
            (rzf_rate_at_chi(alpha, q, sn, t.chi_opt + h) - rzf_rate_at_chi(alpha, q, sn, t.chi_opt - h)) / (2.0 * h);
        assert!(slope.abs() < 1e-8, "{slope}");
    }
}

#[test]
fn rzf_tuning_approaches_zero_forcing_without_noise() {
    let t = tune_rzf(3.0, 1.0, 1e-9, 1.0).unwrap();
    assert!((t.chi_opt / t.s - 1.0).abs() < 1e-6);
    assert!(t.lambda_opt < 1e-8);
}

#[test]
fn generic_tuning_reproduces_the_rzf_closed_form() {
    let (alpha, q) = (2.0, 1.0);
    let t = tune_constellation(&Constellation::FullComplex, alpha, q, 1.0, 1.0).unwrap();
    let c = tune_rzf(alpha, q, 1.0, 1.0).unwrap();
    assert!(
        (t.rate_bound - c.rate_bound).abs() < 1e-6,
        "{} vs {}",
        t.rate_bound,
        c.rate_bound
    );
    assert!((t.q - q).abs() < 1e-8);
    assert!((t.lambda - c.lambda_opt).abs() < 1e-3 * c.lambda_opt);
}

#[test]
fn mild_peak_limit_costs_little_rate() {
    let q = 1.0;
    let disk = Constellation::Disk {
        peak: q * 10f64.powf(0.3),
    };
    let t = tune_constellation(&disk, 5.0, q, 1.0, 1.0).unwrap();
    let full = tune_rzf(5.0, q, 1.0, 1.0).unwrap();
    assert!(t.rate_bound <= full.rate_bound + 1e-6);
    assert!(full.rate_bound - t.rate_bound < 0.2);
}

#[test]
fn constant_modulus_tuning_requires_matching_power() {
    let x = Constellation::Circle { power: 1.0 };
    assert!(tune_constellation(&x, 5.0, 2.0, 1.0, 1.0).is_err());
    let t = tune_constellation(&x, 5.0, 1.0, 1.0, 1.0).unwrap();
    assert_eq!(t.lambda, 0.0);
    assert!(t.rate_bound < tune_rzf(5.0, 1.0, 1.0, 1.0).unwrap().rate_bound);
}

#[test]
fn union_bound_floor_reference_point() {
    let r = union_bound_epsilon(2.0, 2).unwrap();
    assert!((r.epsilon_star - 0.2037).abs() < 5e-4, "{}", r.epsilon_star);
    assert!(union_bound_epsilon(0.0, 2).is_err());
    assert!(union_bound_epsilon(1.0, 1).is_err());
    // the floor approaches the stationary point as the load vanishes
    assert!(union_bound_epsilon(1e-9, 2).unwrap().epsilon_star > 1.99);
}

proptest! {
    #[test]
    fn union_bound_solves_its_condition(alpha in 0.01f64..20.0, m in 2usize..64) {
        let e = union_bound_epsilon(alpha, m).unwrap().epsilon_star;
        prop_assert!(e > 0.0 && e < 2.0);
        let rhs = alpha * (m as f64).ln() - std::f64::consts::LN_2 + 1.0;
        prop_assert!((e / 2.0 - e.ln() - rhs).abs() < 1e-9 * rhs.max(1.0));
    }

    #[test]
    fn union_bound_decreases_in_load_and_order(alpha in 0.05f64..10.0, m in 2usize..32) {
        let base = union_bound_epsilon(alpha, m).unwrap().epsilon_star;
        prop_assert!(union_bound_epsilon(alpha * 1.1, m).unwrap().epsilon_star < base);
        prop_assert!(union_bound_epsilon(alpha, m + 1).unwrap().epsilon_star < base);
    }

    #[test]
    fn stderr_is_nonnegative(v in proptest::collection::vec(-1e3f64..1e3, 1..40)) {
        let (m, s) = mean_stderr(&v);
        prop_assert!(s >= 0.0);
        prop_assert!(m >= v.iter().cloned().fold(f64::INFINITY, f64::min) - 1e-9);
    }
}

#[test]
fn ks_distance_extremes() {
    let a = [1.0, 2.0, 3.0];
    assert_eq!(ks_distance(&a, &a), 0.0);
    assert_eq!(ks_distance(&a, &[4.0, 5.0]), 1.0);
    assert!((ks_distance(&[1.0, 3.0], &[2.0, 4.0]) - 0.5).abs() < 1e-15);
}

#[test]
fn idft_is_unitary() {
    for l in [1, 2, 5, 16] {
        let w = idft_matrix(l);
        let e = (&w * w.adjoint() - nalgebra::DMatrix::identity(l, l))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(e < 1e-13, "L = {l}: {e}");
    }
}

#[test]
fn small_ofdm_channel_passes_the_dense_cross_check() {
    let r = ofdm_equivalence(4, 12, 10, 3, usize::MAX).unwrap();
    assert_eq!(r.eig_ofdm.len(), 40);
    assert_eq!(r.eig_iid.len(), 10);
    assert!(r.unitarity_error < 1e-12 && r.coupling < 1e-12);
    assert!(r.eig_ofdm.windows(2).all(|w| w[0] <= w[1]));
    // the trace of each K x K Gramian block concentrates near K
    let mean: f64 = r.eig_ofdm.iter().sum::<f64>() / 40.0;
    assert!((mean - 1.0).abs() < 0.2, "{mean}");
}

#[test]
fn single_subcarrier_is_an_iid_channel() {
    let r = ofdm_equivalence(1, 20, 20, 0, usize::MAX).unwrap();
    assert_eq!(r.eig_ofdm.len(), 20);
    assert!(r.eig_ofdm[0] >= -1e-12);
    assert!(ofdm_equivalence(0, 2, 2, 0, 0).is_err());
}

#[test]
fn required_power_falls_with_load() {
    let q1 = power_for_distortion(0.1, 5.0, 1.0).unwrap();
    let q2 = power_for_distortion(0.1, 10.0, 1.0).unwrap();
    assert!(q2 < q1 && q1 < 1.0);
    assert!(power_for_distortion(1e-12, 1.0, 1e-3).is_err());
    let fit = power_decay_fit(0.1, &[10.0, 20.0, 40.0], 1.0).unwrap();
    assert_eq!(fit.points.len(), 3);
    assert!(fit.kappa < 0.0);
}

#[test]
fn power_decay_fit_validates_inputs() {
    assert!(power_decay_fit(1.5, &[2.0, 3.0], 1.0).is_err());
    assert!(power_decay_fit(0.1, &[2.0], 1.0).is_err());
}

#[test]
fn sweep_writes_header_then_rows() {
    let mut mc = full_mc(10, 1.0, 3);
    mc.seed = 5;
    let spec = SweepSpec {
        alphas: vec![1.0, 2.0],
        mc,
        rsb: false,
    };
    let mut buf = Vec::new();
    let rows = run_sweep(&spec, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), SWEEP_HEADER.join(","));
    assert_eq!(lines.count(), 2);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let back: Vec<SweepRow> = rdr.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(back, rows);
    assert_eq!(rows[1].n, 20);
    assert!(rows.iter().all(|r| r.d_mc_stderr >= 0.0 && r.d_mc_mean >= 0.0));
}

#[test]
fn sweep_marks_divergent_rs_points() {
    let mut mc = McConfig::new(8, 7.0, Constellation::Mpsk { m: 2, p: 1.0 });
    mc.trials = 2;
    let row = sweep_row(7.0, &mc, false).unwrap();
    assert_eq!(row.rs_status, "diverged");
    assert!(row.d_replica_rs.is_none() && row.rate_bound.is_none());
}
