use lse_lab::replica_core::{solve_rs, Constellation, RsConfig};
use lse_lab::replica_rsb::*;
use lse_lab::spectra::{mp_r_transform_derivative, SpectrumModel};

const BPSK: Constellation = Constellation::Mpsk { m: 2, p: 1.0 };

fn r(w: f64, alpha: f64) -> f64 {
    1.0 / (alpha * (1.0 + w))
}

fn solve(alpha: f64) -> RsbSolution {
    solve_rsb1(&BPSK, &RsConfig::iid(alpha).unwrap(), &RsbOptions::default()).unwrap()
}

// Reference values from an independent implementation of the same
// equations with dense Gauss-Hermite quadrature.
#[test]
fn bpsk_reference_points() {
    let s = solve(1.0);
    assert!((s.mu1 - 3.08).abs() < 0.02, "{}", s.mu1);
    assert!((s.d_rsb - 0.7361).abs() < 2e-4, "{}", s.d_rsb);
    let s = solve(2.0);
    assert!((s.d_rsb - 0.3991).abs() < 2e-4, "{}", s.d_rsb);
}

#[test]
fn rsb_lies_above_rs_and_solves_all_four_equations() {
    for alpha in [1.0, 2.0, 3.0, 4.0] {
        let cfg = RsConfig::iid(alpha).unwrap();
        let rs = solve_rs(&BPSK, &cfg).unwrap();
        let s = solve(alpha);
        assert!(s.d_rsb >= rs.d_rs, "alpha = {alpha}: {} < {}", s.d_rsb, rs.d_rs);
        assert!(s.residual < 1e-8, "alpha = {alpha}: {:?}", s.residuals);
        assert!((s.q1 + s.p1 - 1.0).abs() < 1e-12);
        assert!(s.p1 > 0.0 && s.p1 < 1.0 && s.chi1 >= 0.0 && s.mu1 > 0.0);
    }
}

#[test]
fn conjugate_parameters_are_consistent() {
    let alpha = 2.0;
    let s = solve(alpha);
    let g = 1.0;
    assert!((s.eta1 - (s.chi1 + s.mu1 * s.p1)).abs() < 1e-14);
    assert!((s.e1 - r(s.chi1, alpha)).abs() < 1e-14);
    let f2 = g * r(s.eta1, alpha) + (s.q1 - g * s.eta1) * mp_r_transform_derivative(-s.eta1, alpha).unwrap();
    assert!((s.f1 * s.f1 - f2).abs() < 1e-12);
    let g2 = (r(s.chi1, alpha) - r(s.eta1, alpha)) / s.mu1;
    assert!((s.g1 * s.g1 - g2).abs() < 1e-12);
}

#[test]
fn distortion_matches_its_closed_expression() {
    let alpha = 3.0;
    let s = solve(alpha);
    let (q1, chi, eta, mu, g) = (s.q1, s.chi1, s.eta1, s.mu1, 1.0);
    let rp = 1.0 / (alpha * (1.0 + eta).powi(2));
    let d = g - alpha * chi / mu * r(chi, alpha) + alpha * (q1 + eta / mu - 2.0 * g * eta) * r(eta, alpha)
        - alpha * eta * (q1 - g * eta) * rp;
    assert!((d - s.d_rsb).abs() < 1e-12);
}

#[test]
fn entropy_is_closer_to_zero_than_rs() {
    for alpha in [1.0, 2.0, 4.0, 6.0] {
        let cfg = RsConfig::iid(alpha).unwrap();
        let rs = solve_rs(&BPSK, &cfg).unwrap();
        let s = solve(alpha);
        assert!(
            rs.entropy0 < s.entropy0 && s.entropy0 <= 0.0,
            "alpha = {alpha}: {} vs {}",
            rs.entropy0,
            s.entropy0
        );
    }
}

#[test]
fn doubling_the_quadrature_barely_moves_the_distortion() {
    let cfg = RsConfig::iid(2.0).unwrap();
    let a = solve_rsb1(&BPSK, &cfg, &RsbOptions::default()).unwrap();
    let b = solve_rsb1(
        &BPSK,
        &cfg,
        &RsbOptions {
            quad_order: 64,
            ..Default::default()
        },
    )
    .unwrap();
    assert!((a.d_rsb - b.d_rsb).abs() < 1e-3);
}

#[test]
fn small_mu_collapses_to_the_rs_point() {
    let alpha = 2.0;
    let cfg = RsConfig::iid(alpha).unwrap();
    let rs = solve_rs(&BPSK, &cfg).unwrap();
    let mu = 1e-3;
    let pt = rsb_fixed_point_at_mu(&BPSK, &cfg, &RsbOptions::default(), mu, (rs.chi, 0.5)).unwrap();
    assert!((pt.chi1 - rs.chi).abs() < 2e-3, "{} vs {}", pt.chi1, rs.chi);
    let d = rsb_distortion_at(1.0 - pt.p1, pt.chi1, pt.p1, mu, &cfg.spectrum, 1.0).unwrap();
    assert!((d - rs.d_rs).abs() < 1e-3, "{d} vs {}", rs.d_rs);
}

#[test]
fn qpsk_is_two_half_power_bpsk_problems() {
    // QPSK at load alpha splits into two real problems, each equivalent to
    // BPSK at load 2 alpha.
    let q = solve_rsb1(
        &Constellation::Mpsk { m: 4, p: 1.0 },
        &RsConfig::iid(1.0).unwrap(),
        &RsbOptions::default(),
    )
    .unwrap();
    let b = solve(2.0);
    assert!((q.d_rsb - b.d_rsb).abs() < 1e-6);
    assert!((q.mu1 - b.mu1).abs() < 1e-4);
}

#[test]
fn polar_kernel_agrees_with_the_real_reduction() {
    let cfg = RsConfig::iid(1.0).unwrap();
    let polar = solve_rsb1(
        &BPSK,
        &cfg,
        &RsbOptions {
            kernel: KernelChoice::Polar,
            ..Default::default()
        },
    )
    .unwrap();
    let real = solve(1.0);
    assert!(
        (polar.d_rsb - real.d_rsb).abs() < 1e-4,
        "{} vs {}",
        polar.d_rsb,
        real.d_rsb
    );
    assert!((polar.mu1 - real.mu1).abs() < 0.02);
}

#[test]
fn fourth_equation_variant_changes_the_answer() {
    let cfg = RsConfig::iid(2.0).unwrap();
    let alt = solve_rsb1(
        &BPSK,
        &cfg,
        &RsbOptions {
            fourth: FourthEquation::ExtraChiTerm,
            ..Default::default()
        },
    );
    let base = solve(2.0);
    if let Ok(alt) = alt {
        assert!((alt.mu1 - base.mu1).abs() > 1e-3);
    }
}

#[test]
fn scan_profile_changes_sign_once_for_bpsk() {
    let cfg = RsConfig::iid(1.0).unwrap();
    let prof = scan_mu(&BPSK, &cfg, &RsbOptions::default()).unwrap();
    let changes = prof
        .windows(2)
        .filter(|w| w[0].fourth_residual.signum() != w[1].fourth_residual.signum())
        .count();
    assert_eq!(changes, 1);
}

#[test]
fn beyond_rs_divergence_the_rsb_point_still_exists() {
    let s = solve(8.0);
    assert!(s.d_rsb > 0.0 && s.d_rsb < 0.01, "{}", s.d_rsb);
}

#[test]
fn rejects_continuous_sets() {
    let cfg = RsConfig::iid(2.0).unwrap();
    for x in [
        Constellation::FullComplex,
        Constellation::Disk { peak: 1.0 },
        Constellation::Circle { power: 1.0 },
    ] {
        assert!(solve_rsb1(&x, &cfg, &RsbOptions::default()).is_err());
    }
    assert!(rsb_distortion_at(0.5, 0.1, 0.5, 0.0, &SpectrumModel::iid(2.0).unwrap(), 1.0).is_err());
}
