//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness. The process exits 0 after reporting
//! every criterion; set `ACCEPTANCE_STRICT=1` to turn any FAIL into a
//! non-zero exit status.

use std::time::Instant;

use lse_lab::error::Error;
use lse_lab::experiments::*;
use lse_lab::precoders::{exhaustive_oracle, precode_coordinate_descent, CdOptions};
use lse_lab::replica_core::*;
use lse_lab::replica_rsb::{solve_rsb1, RsbOptions};
use lse_lab::spectra::{mp_r_transform, numeric_r_from_stieltjes, PathLossModel};

// Criterion 1
const RZF_Q: f64 = 0.5690;
const RZF_CHI: f64 = 5.7417;
const RZF_D: f64 = 0.03452;
const RZF_REPLICA_TOL: f64 = 5e-4; // relative, against 4-digit reference values
const RZF_MC_REL: f64 = 0.03;
// Criterion 2
const LIMIT_QCHI_TOL: f64 = 1e-6;
const LIMIT_CHI_TOL: f64 = 1e-9;
const LIMIT_D_TOL: f64 = 1e-6;
// Criteria 3 and 4
const PEAK_DB_TOL: f64 = 0.5;
const CE_DB_ABOVE: f64 = 1.0;
const SIGMAS: f64 = 3.0;
// Criterion 5
const ORACLE_RATE: f64 = 0.95;
const CD_RESTARTS: usize = 50;
// Criterion 6
const ALPHA_STAR_TOL: f64 = 1e-4;
const UNION_REF: f64 = 0.204;
const UNION_TOL: f64 = 1e-3;
// Criterion 8
const LAMBDA_EXACT_TOL: f64 = 1e-14;
const GRID_TOL: f64 = 1e-9;
// Criterion 9
const ANTENNA_GAP_REF: f64 = 0.20;
const ANTENNA_GAP_TOL: f64 = 0.05;
const SNR_GAP_REF: f64 = 1.3;
const SNR_GAP_TOL: f64 = 0.3;
// Criterion 10
const KAPPA_REF: f64 = -1.0;
const KAPPA_TOL: f64 = 0.1;
// Criterion 11
const KS_MAX: f64 = 0.05;
const UNITARITY_TOL: f64 = 1e-12;
// Criterion 12
const R_TOL: f64 = 1e-6;

type Outcome = Result<(bool, String), Error>;
type Criterion = (&'static str, fn() -> Outcome);

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn c1_rzf() -> Outcome {
    let cfg = RsConfig::iid(2.0)?.with_lambda(0.1);
    let rs = solve_rs_generic(&Constellation::FullComplex, &cfg)?;
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let replica_ok = rel(rs.q, RZF_Q) < RZF_REPLICA_TOL
        && rel(rs.chi, RZF_CHI) < RZF_REPLICA_TOL
        && rel(rs.d_rs, RZF_D) < RZF_REPLICA_TOL;
    let mut mc = McConfig::new(100, 2.0, Constellation::FullComplex);
    mc.lambda = 0.1;
    mc.trials = 50;
    let r = monte_carlo_distortion(&mc)?;
    let mc_rel = rel(r.mean, rs.d_rs);
    Ok((
        replica_ok && mc_rel < RZF_MC_REL,
        format!(
            "q={:.4} chi={:.4} D_rs={:.5} D_mc={:.5}+-{:.5} rel={:.2}%",
            rs.q,
            rs.chi,
            rs.d_rs,
            r.mean,
            r.stderr,
            100.0 * mc_rel
        ),
    ))
}

fn c2_limits() -> Outcome {
    let cfg = RsConfig::iid(2.0)?.with_lambda(0.1);
    let full = solve_rs(&Constellation::FullComplex, &cfg)?;
    let disk = solve_rs(&Constellation::Disk { peak: 1e6 }, &cfg)?;
    let dqc = (full.q - disk.q).abs().max((full.chi - disk.chi).abs());
    let chi_ce = rs_chi_constant_envelope(1.0, 1.0, 2.0)?;
    let chi_psk = rs_chi_mpsk(1_000_000, 1.0, 1.0, 2.0)?;
    let dchi = (chi_ce - chi_psk).abs();
    // D approaches gamma sigma_u^2 from below as the peak power vanishes
    let mut gaps = Vec::new();
    for peak in [1e-4, 1e-8, 1e-12, 1e-16] {
        gaps.push((solve_rs(&Constellation::Disk { peak }, &cfg)?.d_rs - 1.0).abs());
    }
    let dd = gaps[gaps.len() - 1];
    let shrinking = gaps.windows(2).all(|w| w[1] < w[0]);
    Ok((
        dqc < LIMIT_QCHI_TOL && dchi < LIMIT_CHI_TOL && dd < LIMIT_D_TOL && shrinking,
        format!("disk/full {dqc:.1e}, psk/circle chi {dchi:.1e}, |D - 1| at P = 1e-16: {dd:.1e}"),
    ))
}

fn c3_peak() -> Outcome {
    let q = 0.5;
    let mut worst: f64 = 0.0;
    let mut worst_case = None;
    let mut parts = Vec::new();
    for papr_db in [1.0, 3.0] {
        let x = Constellation::Disk {
            peak: q * 10f64.powf(papr_db / 10.0),
        };
        for alpha in [1.0, 2.0, 3.0] {
            let (lambda, rs) = rs_at_power(&x, &RsConfig::iid(alpha)?, q)?;
            let mut mc = McConfig::new(100, alpha, x);
            mc.lambda = lambda;
            mc.trials = 50;
            mc.solver = Solver::ProjectedGradient;
            let r = monte_carlo_distortion(&mc)?;
            let gap = db(r.mean / rs.d_rs);
            if gap.abs() > worst {
                worst = gap.abs();
                worst_case = Some((mc.clone(), rs.d_rs));
            }
            parts.push(format!("{papr_db}dB/a={alpha}: {gap:+.3}"));
        }
    }
    let pass = worst < PEAK_DB_TOL;
    if let (false, Some((mut mc, d_rs))) = (pass, worst_case) {
        // informational: the same point with twice as many users
        mc.k = 200;
        mc.trials = 20;
        let r = monte_carlo_distortion(&mc)?;
        parts.push(format!("worst point at K=200: {:+.3}", db(r.mean / d_rs)));
    }
    Ok((pass, format!("max |gap| {worst:.3} dB ({})", parts.join(", "))))
}

fn c4_constant_envelope() -> Outcome {
    let x = Constellation::Circle { power: 0.5 };
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [1.5, 2.0] {
        let rs = solve_rs(&x, &RsConfig::iid(alpha)?)?;
        let mut mc = McConfig::new(100, alpha, x);
        mc.trials = 50;
        mc.solver = Solver::CoordinateDescent;
        let r = monte_carlo_distortion(&mc)?;
        let gap = db(r.mean / rs.d_rs);
        ok &= r.mean >= rs.d_rs - SIGMAS * r.stderr && gap <= CE_DB_ABOVE;
        parts.push(format!(
            "a={alpha}: D_rs={:.4} D_mc={:.4}+-{:.4} ({gap:+.3} dB)",
            rs.d_rs, r.mean, r.stderr
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn c5_bpsk_ordering() -> Outcome {
    let x = Constellation::Mpsk { m: 2, p: 1.0 };
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [1.0, 2.0, 3.0, 4.0] {
        let cfg = RsConfig::iid(alpha)?;
        let rs = solve_rs(&x, &cfg)?;
        let rsb = solve_rsb1(&x, &cfg, &RsbOptions::default())?;
        let mut mc = McConfig::new((24.0 / alpha) as usize, alpha, x);
        mc.trials = 50;
        mc.solver = Solver::CoordinateDescent;
        mc.restarts = CD_RESTARTS;
        let r = monte_carlo_distortion(&mc)?;
        ok &= rs.d_rs <= rsb.d_rsb && rsb.d_rsb <= r.mean + SIGMAS * r.stderr;
        parts.push(format!(
            "a={alpha}: {:.4} <= {:.4} <= {:.4}+-{:.4}",
            rs.d_rs, rsb.d_rsb, r.mean, r.stderr
        ));
    }
    // restarted coordinate descent against exhaustive search at N = 12
    let mut hits = 0;
    let seeds = 100;
    for seed in 0..seeds {
        let mut mc = McConfig::new(6, 2.0, x);
        mc.seed = 1000 + seed;
        let inst = draw_instance(&mc, 0)?;
        let best = exhaustive_oracle(&inst, 1 << 20)?.objective;
        let cd = precode_coordinate_descent(
            &inst,
            &CdOptions {
                restarts: CD_RESTARTS,
                seed,
                ..Default::default()
            },
        )?
        .objective;
        if cd <= best * (1.0 + 1e-9) + 1e-12 {
            hits += 1;
        }
    }
    let rate = hits as f64 / seeds as f64;
    ok &= rate >= ORACLE_RATE;
    parts.push(format!(
        "oracle agreement {hits}/{seeds} at N=12, {CD_RESTARTS} restarts"
    ));
    Ok((ok, parts.join("; ")))
}

fn c6_rs_failure() -> Outcome {
    let x = Constellation::Mpsk { m: 2, p: 1.0 };
    let star = match solve_rs(&x, &RsConfig::iid(6.3)?) {
        Err(Error::Diverged { alpha_star }) => alpha_star,
        other => return Ok((false, format!("expected divergence at alpha = 6.3, got {other:?}"))),
    };
    let star_ok = (star - 2.0 * std::f64::consts::PI).abs() < ALPHA_STAR_TOL;
    let eps = union_bound_epsilon(2.0, 2)?.epsilon_star;
    let mut monotone = true;
    for m in [2, 4, 8, 16] {
        let mut prev = f64::INFINITY;
        for i in 1..=40 {
            let e = union_bound_epsilon(0.25 * i as f64, m)?.epsilon_star;
            monotone &= e < prev;
            monotone &= union_bound_epsilon(0.25 * i as f64, m + 1)?.epsilon_star < e;
            prev = e;
        }
    }
    Ok((
        star_ok && (eps - UNION_REF).abs() < UNION_TOL && monotone,
        format!("alpha* = {star:.4}, eps*(2, 2) = {eps:.4}, monotone in alpha and M: {monotone}"),
    ))
}

fn c7_entropy() -> Outcome {
    let x = Constellation::Mpsk { m: 2, p: 1.0 };
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0] {
        let cfg = RsConfig::iid(alpha)?;
        let h_rs = match solve_rs(&x, &cfg) {
            Ok(s) => s.entropy0,
            // beyond the divergence point the RS entropy is unbounded below
            Err(Error::Diverged { .. }) => f64::NEG_INFINITY,
            Err(e) => return Err(e),
        };
        let h_rsb = solve_rsb1(&x, &cfg, &RsbOptions::default())?.entropy0;
        ok &= h_rs < h_rsb && h_rsb <= 0.0;
        parts.push(format!("a={alpha}: {h_rs:.3} < {h_rsb:.2e}"));
    }
    Ok((ok, parts.join(", ")))
}

fn c8_rzf_tuning() -> Outcome {
    let t = tune_rzf(1.0, 1.0, 1.0, 1.0)?;
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let exact = (t.chi_opt - golden).abs() < 1e-15 && (t.lambda_opt - 1.0).abs() < LAMBDA_EXACT_TOL;
    let mut excess = f64::NEG_INFINITY;
    for (alpha, q, sn) in [(1.0, 1.0, 1.0), (2.0, 1.0, 1.0), (5.0, 1.0, 1.0), (3.0, 2.0, 0.5)] {
        let t = tune_rzf(alpha, q, sn, 1.0)?;
        for i in 0..200 {
            let chi = 0.01 + (50.0 - 0.01) * i as f64 / 199.0;
            excess = excess.max(rzf_rate_at_chi(alpha, q, sn, chi) - t.rate_bound);
        }
    }
    Ok((
        exact && excess <= GRID_TOL,
        format!(
            "chi_opt = {:.10}, lambda_opt = {:.16}, best grid excess {excess:.2e}",
            t.chi_opt, t.lambda_opt
        ),
    ))
}

fn c9_rate_gaps() -> Outcome {
    let g = equal_rate_gaps(5.0, 1.0, 1.0)?;
    let snr_ok = (g.snr_gap_db - SNR_GAP_REF).abs() <= SNR_GAP_TOL;
    let ant_ok = (g.antenna_gap - ANTENNA_GAP_REF).abs() <= ANTENNA_GAP_TOL;
    Ok((
        snr_ok && ant_ok,
        format!(
            "SNR gap {:.3} dB [{}], antenna gap alpha'/alpha - 1 = {:.1}% [{}] (as a share of alpha': {:.1}%)",
            g.snr_gap_db,
            if snr_ok { "ok" } else { "out of range" },
            100.0 * g.antenna_gap,
            if ant_ok { "ok" } else { "out of range" },
            100.0 * g.antenna_gap_relative
        ),
    ))
}

fn c10_power_decay() -> Outcome {
    let large = power_decay_fit(0.1, &[10.0, 15.0, 20.0, 30.0, 50.0, 70.0, 100.0], 1.0)?;
    let small = power_decay_fit(0.1, &[2.0, 2.5, 3.0, 4.0, 5.0], 1.0)?;
    Ok((
        (large.kappa - KAPPA_REF).abs() <= KAPPA_TOL && small.kappa < -1.0,
        format!("kappa[10,100] = {:.4}, kappa[2,5] = {:.4}", large.kappa, small.kappa),
    ))
}

fn c11_ofdm() -> Outcome {
    let r = ofdm_equivalence(64, 128, 128, 0, 1 << 22)?;
    Ok((
        r.ks_distance < KS_MAX && r.unitarity_error < UNITARITY_TOL,
        format!("KS = {:.4}, unitarity error {:.1e}", r.ks_distance, r.unitarity_error),
    ))
}

fn c12_path_loss() -> Outcome {
    let mut worst: f64 = 0.0;
    for alpha in [1.0, 2.0, 4.0] {
        let m = PathLossModel::unit(alpha)?;
        for i in 0..=100 {
            let w = 0.1 * i as f64;
            worst = worst.max((numeric_r_from_stieltjes(w, &m)? - mp_r_transform(-w, alpha)?).abs());
        }
    }
    Ok((worst < R_TOL, format!("max |R_num - R_mp| = {worst:.2e}")))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("RZF consistency", c1_rzf),
        ("limit degenerations", c2_limits),
        ("peak-power validation", c3_peak),
        ("constant envelope", c4_constant_envelope),
        ("BPSK ordering", c5_bpsk_ordering),
        ("RS failure signature", c6_rs_failure),
        ("zero-temperature entropy", c7_entropy),
        ("RZF tuning", c8_rzf_tuning),
        ("rate gaps", c9_rate_gaps),
        ("power decay", c10_power_decay),
        ("OFDM equivalence", c11_ofdm),
        ("path-loss spectrum", c12_path_loss),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {}: {name}: {detail} [{:.1}s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
