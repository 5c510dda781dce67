//! Monte Carlo harness, precoder tuning, rate bounds and the auxiliary
//! spectral experiments.
//!
//! Channels are drawn with iid `CN(0, 1/N)` entries and data with iid
//! `CN(0, sigma_u2)` entries. Trial `t` of a run with base seed `s` uses its
//! own ChaCha8 stream seeded with `s + t`, so results do not depend on the
//! order in which trials execute.

use std::f64::consts::{LN_2, PI};
use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics;
use crate::precoders::{self, CMatrix, CVector, CdOptions, PgOptions, PrecodingInstance};
use crate::replica_core::{self, Constellation, RsConfig};
use crate::replica_rsb::{self, RsbOptions};

/// Which precoder a Monte Carlo run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// RZF for the full plane, projected gradient for the disk and
    /// coordinate descent for constant-modulus sets.
    #[default]
    Auto,
    Rzf,
    ProjectedGradient,
    CoordinateDescent,
    Exhaustive,
    /// Transmits nothing; useful as a sanity baseline.
    Null,
}

impl Solver {
    pub fn resolve(self, x: &Constellation) -> Solver {
        match (self, x) {
            (Solver::Auto, Constellation::FullComplex) => Solver::Rzf,
            (Solver::Auto, Constellation::Disk { .. }) => Solver::ProjectedGradient,
            (Solver::Auto, _) => Solver::CoordinateDescent,
            (s, _) => s,
        }
    }
}

/// Monte Carlo configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McConfig {
    pub k: usize,
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
    pub constellation: Constellation,
    pub gamma: f64,
    pub lambda: f64,
    pub sigma_u2: f64,
    pub sigma_n2: f64,
    pub solver: Solver,
    /// Random restarts of coordinate descent.
    pub restarts: usize,
}

impl McConfig {
    pub fn new(k: usize, alpha: f64, constellation: Constellation) -> Self {
        McConfig {
            k,
            alpha,
            trials: 50,
            seed: 0,
            constellation,
            gamma: 1.0,
            lambda: 0.0,
            sigma_u2: 1.0,
            sigma_n2: 1.0,
            solver: Solver::Auto,
            restarts: 10,
        }
    }

    /// Number of transmit antennas, `round(alpha K)`.
    pub fn n(&self) -> usize {
        (self.alpha * self.k as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.trials == 0 {
            return Err(Error::invalid("need K >= 1 and trials >= 1"));
        }
        if !(self.alpha > 0.0) || self.n() == 0 {
            return Err(Error::invalid(format!("alpha = {} gives no antennas", self.alpha)));
        }
        if !(self.gamma >= 0.0) || !(self.lambda >= 0.0) || !(self.sigma_u2 > 0.0) || !(self.sigma_n2 >= 0.0) {
            return Err(Error::invalid("need gamma, lambda, sigma_n2 >= 0 and sigma_u2 > 0"));
        }
        self.constellation.validate()
    }
}

/// Summary of a Monte Carlo run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McResult {
    pub mean: f64,
    pub stderr: f64,
    pub trials_used: usize,
    pub excluded: usize,
}

fn complex_gaussian<R: Rng>(rng: &mut R, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    Complex64::new(
        s * rng.sample::<f64, _>(StandardNormal),
        s * rng.sample::<f64, _>(StandardNormal),
    )
}

/// `K x N` matrix with iid `CN(0, 1/N)` entries.
pub fn iid_channel<R: Rng>(k: usize, n: usize, rng: &mut R) -> CMatrix {
    let var = 1.0 / n as f64;
    CMatrix::from_fn(k, n, |_, _| complex_gaussian(rng, var))
}

/// Trial `t` of `cfg`: the channel and data drawn from seed `seed + t`.
pub fn draw_instance(cfg: &McConfig, trial: u64) -> Result<PrecodingInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(trial));
    let h = iid_channel(cfg.k, cfg.n(), &mut rng);
    let u = CVector::from_fn(cfg.k, |_, _| complex_gaussian(&mut rng, cfg.sigma_u2));
    PrecodingInstance::new(h, u, cfg.gamma, cfg.lambda, cfg.constellation)
}

/// Distortion of one trial, or `None` if the precoder did not converge.
fn run_trial(cfg: &McConfig, trial: u64) -> Result<Option<f64>> {
    let inst = draw_instance(cfg, trial)?;
    let res = match cfg.solver.resolve(&cfg.constellation) {
        Solver::Null => {
            let v = CVector::zeros(inst.n());
            return Ok(Some(precoders::empirical_distortion(&inst.h, &inst.u, &v, inst.gamma)));
        }
        Solver::Rzf => precoders::rzf_precode(&inst)?,
        Solver::ProjectedGradient => precoders::precode_projected_gradient(&inst, &PgOptions::default())?,
        Solver::CoordinateDescent => precoders::precode_coordinate_descent(
            &inst,
            &CdOptions {
                restarts: cfg.restarts,
                seed: cfg.seed.wrapping_add(trial),
                ..Default::default()
            },
        )?,
        Solver::Exhaustive => precoders::exhaustive_oracle(&inst, 1 << 22)?,
        Solver::Auto => unreachable!("resolved above"),
    };
    Ok(res
        .converged
        .then(|| precoders::empirical_distortion(&inst.h, &inst.u, &res.v, inst.gamma)))
}

/// Mean and standard error of the per-user distortion over `cfg.trials`
/// independent instances. Trials whose precoder fails to converge are
/// excluded; more than 10% exclusions is an error.
pub fn monte_carlo_distortion(cfg: &McConfig) -> Result<McResult> {
    cfg.validate()?;
    let outcomes: Vec<Result<Option<f64>>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect();
    let mut values = Vec::with_capacity(cfg.trials);
    let mut excluded = 0;
    for o in outcomes {
        match o? {
            Some(d) => values.push(d),
            None => excluded += 1,
        }
    }
    if excluded * 10 > cfg.trials {
        return Err(Error::NoConvergence {
            what: format!("Monte Carlo run ({excluded} of {} trials unconverged)", cfg.trials),
            iterations: 0,
            residual: f64::NAN,
        });
    }
    let (mean, stderr) = mean_stderr(&values);
    Ok(McResult {
        mean,
        stderr,
        trials_used: values.len(),
        excluded,
    })
}

/// Sample mean and standard error (zero for a single sample).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Ergodic-rate lower bound `log2(gamma sigma_u2 / (sigma_n2 + D))` in bits
/// per channel use.
pub fn rate_lower_bound(gamma: f64, sigma_u2: f64, sigma_n2: f64, d: f64) -> Result<f64> {
    let signal = gamma * sigma_u2;
    if !(signal > 0.0) || !(sigma_n2 + d > 0.0) {
        return Err(Error::invalid("need gamma sigma_u2 > 0 and sigma_n2 + D > 0"));
    }
    Ok((signal / (sigma_n2 + d)).log2())
}

/// Closed-form rate-optimal RZF operating point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RzfTuning {
    pub s: f64,
    pub chi_opt: f64,
    pub lambda_opt: f64,
    pub gamma: f64,
    pub rate_bound: f64,
}

/// RZF rate bound at `chi` when the per-antenna power is held at `q`.
pub fn rzf_rate_at_chi(alpha: f64, q: f64, sigma_n2: f64, chi: f64) -> f64 {
    let t = 1.0 + chi;
    ((alpha * q * t * t - q * chi * chi) / (sigma_n2 * chi * chi + alpha * q)).log2()
}

/// Maximizes the RZF rate bound over `chi` at per-antenna power `q`:
/// `chi = (s + sqrt(s^2 + 4 c)) / 2` with `s = (alpha - 1) q / sigma_n2 - 1`
/// and `c = alpha q / sigma_n2`, the positive root of `chi^2 - s chi - c = 0`,
/// `lambda = 1/chi - 1/(alpha (1 + chi))`, and the implied
/// `gamma = (q / sigma_u2) [alpha (1 + chi)^2 / chi^2 - 1]`.
pub fn tune_rzf(alpha: f64, q: f64, sigma_n2: f64, sigma_u2: f64) -> Result<RzfTuning> {
    if !(alpha > 0.0) || !(q > 0.0) || !(sigma_n2 > 0.0) || !(sigma_u2 > 0.0) {
        return Err(Error::invalid("need alpha, q, sigma_n2, sigma_u2 > 0"));
    }
    let s = (alpha - 1.0) * q / sigma_n2 - 1.0;
    let c = alpha * q / sigma_n2;
    let root = (s * s + 4.0 * c).sqrt();
    // Cancellation-free form when s is large and negative.
    let chi = if s >= 0.0 {
        0.5 * (s + root)
    } else {
        2.0 * c / (root - s)
    };
    let lambda = 1.0 / chi - 1.0 / (alpha * (1.0 + chi));
    let gamma = q / sigma_u2 * (alpha * (1.0 + chi).powi(2) / (chi * chi) - 1.0);
    Ok(RzfTuning {
        s,
        chi_opt: chi,
        lambda_opt: lambda,
        gamma,
        rate_bound: rzf_rate_at_chi(alpha, q, sigma_n2, chi),
    })
}

/// Result of [`tune_constellation`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TuneResult {
    pub lambda: f64,
    pub gamma: f64,
    pub rate_bound: f64,
    pub d_rs: f64,
    pub q: f64,
}

/// Finds the `ln lambda` at which `f` changes sign, walking down from
/// `lambda = e^20` towards `e^-25`. Small `lambda` can push the RS solution
/// out of existence before a sign change; that is reported as unreachable
/// together with the values seen on the way.
fn solve_ln_lambda(mut f: impl FnMut(f64) -> Result<f64>, what: &str) -> Result<f64> {
    let mut hi = 20.0;
    let f_hi = f(hi)?;
    let mut seen = vec![format!("{:.1e}: {f_hi:+.3e}", hi.exp())];
    let mut lo = hi;
    loop {
        lo -= 1.5;
        if lo < -25.0 {
            return Err(Error::Bracket {
                what: format!("{what} (lambda: residual {})", seen.join(", ")),
                lo: (-25f64).exp(),
                hi: 20f64.exp(),
            });
        }
        match f(lo) {
            Ok(v) if v.signum() != f_hi.signum() => break,
            Ok(v) => {
                seen.push(format!("{:.1e}: {v:+.3e}", lo.exp()));
                hi = lo;
            }
            Err(e) => {
                return Err(Error::Bracket {
                    what: format!(
                        "{what} (lambda: residual {}; at {:.1e}: {e})",
                        seen.join(", "),
                        lo.exp()
                    ),
                    lo: lo.exp(),
                    hi: 20f64.exp(),
                })
            }
        }
    }
    numerics::brent(f, lo, hi, 1e-13, what)
}

/// RS solution with `lambda` chosen so that the average power equals `q_target`.
/// Constant-modulus sets ignore `q_target` and use `lambda = 0`.
pub fn rs_at_power(x: &Constellation, cfg: &RsConfig, q_target: f64) -> Result<(f64, replica_core::RsSolution)> {
    if x.is_constant_modulus() {
        let sol = replica_core::solve_rs(x, &cfg.clone().with_lambda(0.0))?;
        return Ok((0.0, sol));
    }
    let f = |l: f64| Ok(replica_core::solve_rs(x, &cfg.clone().with_lambda(l.exp()))?.q - q_target);
    let lambda = solve_ln_lambda(f, &format!("matching the average power q = {q_target}"))?.exp();
    let sol = replica_core::solve_rs(x, &cfg.clone().with_lambda(lambda))?;
    Ok((lambda, sol))
}

/// Tunes a precoder for the rate bound: for each trial `gamma`, `lambda` is
/// chosen so that the RS average power equals `q_target` (constant-modulus
/// sets have `lambda = 0` and `q = p`), and `gamma` is then maximized by
/// golden-section search over `log10 gamma` in `[-4, 2] + log10 q_target`.
pub fn tune_constellation(
    x: &Constellation,
    alpha: f64,
    q_target: f64,
    sigma_n2: f64,
    sigma_u2: f64,
) -> Result<TuneResult> {
    x.validate()?;
    if !(q_target > 0.0) || !(sigma_n2 > 0.0) || !(sigma_u2 > 0.0) {
        return Err(Error::invalid("need q_target, sigma_n2, sigma_u2 > 0"));
    }
    if let Some(p) = x.modulus_sq() {
        if (p - q_target).abs() > 1e-12 * p {
            return Err(Error::invalid(format!(
                "constant-modulus set fixes q = {p}, but q_target = {q_target}"
            )));
        }
    }
    let base = RsConfig::iid(alpha)?.with_sigma_u2(sigma_u2);
    let shift = q_target.log10();
    let eval = |log_gamma: f64| -> Result<(f64, f64, replica_core::RsSolution)> {
        let gamma = 10f64.powf(log_gamma);
        let cfg = base.clone().with_gamma(gamma);
        let (lambda, sol) = rs_at_power(x, &cfg, q_target)?;
        let rate = rate_lower_bound(gamma, sigma_u2, sigma_n2, sol.d_rs)?;
        Ok((lambda, rate, sol))
    };
    let rate = |log_gamma: f64| -> Result<f64> {
        match eval(log_gamma) {
            Ok((_, r, _)) => Ok(r),
            // Operating points beyond the RS divergence threshold, or where
            // no lambda reaches the target power, are not usable.
            Err(Error::Diverged { .. } | Error::Bracket { .. }) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    };
    let (log_gamma, best) = numerics::golden_max(rate, shift - 4.0, shift + 2.0, 1e-9)?;
    if !best.is_finite() {
        return Err(Error::Diverged { alpha_star: f64::NAN });
    }
    let (lambda, rate_bound, sol) = eval(log_gamma)?;
    Ok(TuneResult {
        lambda,
        gamma: 10f64.powf(log_gamma),
        rate_bound,
        d_rs: sol.d_rs,
        q: sol.q,
    })
}

/// Equal-rate comparison of constant-envelope and unconstrained precoding.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateGaps {
    /// Tuned constant-envelope rate bound at `(alpha, q)`.
    pub rate_constant_envelope: f64,
    /// Tuned RZF rate bound at `(alpha, q)`.
    pub rate_unconstrained: f64,
    /// Extra power (dB) the constant-envelope precoder needs for the RZF rate.
    pub snr_gap_db: f64,
    /// Ratio `alpha' / alpha - 1`, where `alpha'` is the load at which the
    /// constant-envelope precoder matches the RZF rate at `alpha`.
    pub antenna_gap: f64,
    /// The same gap measured relative to `alpha'`: `1 - alpha / alpha'`.
    pub antenna_gap_relative: f64,
}

/// Power and antenna gaps between constant-envelope and RZF precoding at
/// equal rate bound.
pub fn equal_rate_gaps(alpha: f64, q: f64, sigma_n2: f64) -> Result<RateGaps> {
    let ce = |a: f64, p: f64| tune_constellation(&Constellation::Circle { power: p }, a, p, sigma_n2, 1.0);
    let rate_ce = ce(alpha, q)?.rate_bound;
    let rate_full = tune_rzf(alpha, q, sigma_n2, 1.0)?.rate_bound;
    // constant-envelope power that reaches the RZF rate
    let q_ce = numerics::bisect(
        |lq: f64| Ok(ce(alpha, lq.exp())?.rate_bound - rate_full),
        q.ln(),
        (q * 1e2).ln(),
        1e-10,
        "matching the constant-envelope rate to the RZF rate",
    )?
    .exp();
    let alpha_ce = numerics::bisect(
        |a: f64| Ok(ce(a, q)?.rate_bound - rate_full),
        alpha,
        alpha * 4.0,
        1e-9,
        "matching the constant-envelope load to the RZF rate",
    )?;
    Ok(RateGaps {
        rate_constant_envelope: rate_ce,
        rate_unconstrained: rate_full,
        snr_gap_db: 10.0 * (q_ce / q).log10(),
        antenna_gap: alpha_ce / alpha - 1.0,
        antenna_gap_relative: 1.0 - alpha / alpha_ce,
    })
}

/// Distortion floor from the union bound for `M`-ary alphabets.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct UnionBoundResult {
    pub epsilon_star: f64,
    pub alpha: f64,
    pub m: usize,
}

/// Solves `eps/2 - ln eps = alpha ln M - ln 2 + 1` on the branch `eps < 2`
/// (natural logarithms, `gamma = sigma_u2 = 1`).
pub fn union_bound_epsilon(alpha: f64, m: usize) -> Result<UnionBoundResult> {
    if !(alpha > 0.0) || m < 2 {
        return Err(Error::invalid("need alpha > 0 and M >= 2"));
    }
    let rhs = alpha * (m as f64).ln() - LN_2 + 1.0;
    // The left side is decreasing on (0, 2) with minimum 1 - ln 2 at eps = 2,
    // which the right side exceeds for every alpha > 0. Solve in t = ln eps.
    let f = |t: f64| Ok(0.5 * t.exp() - t - rhs);
    let t = numerics::bisect(f, -rhs - 1.0, LN_2, 1e-13, "solving the union-bound condition")?;
    Ok(UnionBoundResult {
        epsilon_star: t.exp().min(2.0),
        alpha,
        m,
    })
}

/// Output of [`ofdm_equivalence`].
#[derive(Debug, Clone, Serialize)]
pub struct OfdmResult {
    pub ks_distance: f64,
    /// `max |W W^H - I|` of the unitary DFT.
    pub unitarity_error: f64,
    /// Largest off-diagonal magnitude of `W^H W`, which couples subcarriers.
    pub coupling: f64,
    /// Sorted eigenvalues of the Gramian of `H_t W_t^H`.
    pub eig_ofdm: Vec<f64>,
    /// Sorted eigenvalues of one fresh iid Gramian.
    pub eig_iid: Vec<f64>,
}

/// Unitary `L`-point inverse DFT matrix.
pub fn idft_matrix(l: usize) -> DMatrix<Complex64> {
    let s = 1.0 / (l as f64).sqrt();
    DMatrix::from_fn(l, l, |a, b| {
        Complex64::from_polar(s, 2.0 * PI * ((a * b) % l) as f64 / l as f64)
    })
}

fn max_abs_dev_from_identity(m: &DMatrix<Complex64>) -> (f64, f64) {
    let (mut diag, mut off) = (0.0f64, 0.0f64);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i == j {
                diag = diag.max((m[(i, j)] - Complex64::new(1.0, 0.0)).norm());
            } else {
                off = off.max(m[(i, j)].norm());
            }
        }
    }
    (diag, off)
}

fn hermitian_eigenvalues(m: DMatrix<Complex64>) -> Vec<f64> {
    m.symmetric_eigenvalues().iter().cloned().collect()
}

/// Two-sample Kolmogorov-Smirnov distance between two samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Builds the `KL x NL` channel `H_t` whose column `l L + k` carries
/// column `l` of the subcarrier-`k` channel in row block `k`.
pub fn stacked_channel(blocks: &[CMatrix]) -> CMatrix {
    let l = blocks.len();
    let (k, n) = blocks[0].shape();
    let mut h = CMatrix::zeros(k * l, n * l);
    for (sc, hk) in blocks.iter().enumerate() {
        for ant in 0..n {
            for r in 0..k {
                h[(sc * k + r, ant * l + sc)] = hk[(r, ant)];
            }
        }
    }
    h
}

/// Block-diagonal `W_t` with `N` copies of the `L`-point IDFT.
pub fn block_idft(l: usize, n: usize) -> CMatrix {
    let w = idft_matrix(l);
    let mut wt = CMatrix::zeros(n * l, n * l);
    for b in 0..n {
        wt.view_mut((b * l, b * l), (l, l)).copy_from(&w);
    }
    wt
}

/// Compares the Gramian spectrum of the equivalent OFDM channel
/// `H_t W_t^H` (built from `L` iid `K x N` subcarrier channels) with that
/// of a single iid `K x N` channel.
///
/// The `KL x KL` Gramian `H_t W_t^H W_t H_t^H` has blocks
/// `(W^H W)[k, k'] H_k H_k'^H`; the coupling terms are measured and must
/// vanish, after which its spectrum is the union of the diagonal blocks'.
/// When `KL * NL <= dense_cap` the dense product is also formed and its
/// spectrum compared against the block result.
pub fn ofdm_equivalence(l: usize, n: usize, k: usize, seed: u64, dense_cap: usize) -> Result<OfdmResult> {
    if l == 0 || n == 0 || k == 0 {
        return Err(Error::invalid("need L, N, K >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks: Vec<CMatrix> = (0..l).map(|_| iid_channel(k, n, &mut rng)).collect();
    let w = idft_matrix(l);
    let (diag, off) = max_abs_dev_from_identity(&(&w * w.adjoint()));
    let unitarity_error = diag.max(off);
    let wh_w = w.adjoint() * &w;
    let (_, coupling) = max_abs_dev_from_identity(&wh_w);
    if unitarity_error > 1e-12 || coupling > 1e-12 {
        return Err(Error::Domain(format!(
            "DFT matrix is not unitary to 1e-12 (deviation {unitarity_error:.2e}, coupling {coupling:.2e})"
        )));
    }
    let mut eig_ofdm: Vec<f64> = blocks
        .par_iter()
        .enumerate()
        .map(|(sc, hk)| hermitian_eigenvalues(hk * hk.adjoint() * wh_w[(sc, sc)]))
        .flatten()
        .collect();
    eig_ofdm.sort_by(f64::total_cmp);

    if (k * l).saturating_mul(n * l) <= dense_cap {
        let equiv = stacked_channel(&blocks) * block_idft(l, n).adjoint();
        let mut dense = hermitian_eigenvalues(&equiv * equiv.adjoint());
        dense.sort_by(f64::total_cmp);
        let top = eig_ofdm.last().copied().unwrap_or(1.0).max(1.0);
        let dev = dense
            .iter()
            .zip(&eig_ofdm)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if dev > 1e-9 * top {
            return Err(Error::Domain(format!("dense and block spectra differ by {dev:.2e}")));
        }
    }

    let fresh = iid_channel(k, n, &mut rng);
    let mut eig_iid = hermitian_eigenvalues(&fresh * fresh.adjoint());
    eig_iid.sort_by(f64::total_cmp);
    Ok(OfdmResult {
        ks_distance: ks_distance(&eig_ofdm, &eig_iid),
        unitarity_error,
        coupling,
        eig_ofdm,
        eig_iid,
    })
}

/// Least-squares power-law fit `q ~ c alpha^kappa`.
#[derive(Debug, Clone, Serialize)]
pub struct PowerDecayFit {
    pub kappa: f64,
    pub log_c: f64,
    /// `(alpha, q)` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
}

/// Average per-antenna power needed by the peak-constrained precoder to reach
/// distortion `d_target` at load `alpha` (`gamma = sigma_u2 = 1`).
pub fn power_for_distortion(d_target: f64, alpha: f64, peak: f64) -> Result<f64> {
    let cfg = RsConfig::iid(alpha)?;
    let d_of = |l: f64| Ok(replica_core::solve_rs_peak(peak, &cfg.clone().with_lambda(l.exp()))?.d_rs - d_target);
    let ln_lambda = solve_ln_lambda(d_of, "matching the target distortion").map_err(|e| match e {
        Error::Bracket { what, .. } => Error::Domain(format!(
            "distortion {d_target} is not reachable with peak power {peak} at alpha = {alpha}: {what}"
        )),
        e => e,
    })?;
    Ok(replica_core::solve_rs_peak(peak, &cfg.with_lambda(ln_lambda.exp()))?.q)
}

/// Fits the decay exponent of the required average power over the given loads.
pub fn power_decay_fit(d_target: f64, alphas: &[f64], peak: f64) -> Result<PowerDecayFit> {
    if !(d_target > 0.0 && d_target < 1.0) {
        return Err(Error::invalid("need 0 < D_target < gamma sigma_u2 = 1"));
    }
    if alphas.len() < 2 {
        return Err(Error::invalid("need at least two loads"));
    }
    let results: Vec<(f64, Result<f64>)> = alphas
        .par_iter()
        .map(|&a| (a, power_for_distortion(d_target, a, peak)))
        .collect();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (a, r) in results {
        match r {
            Ok(q) => points.push((a, q)),
            Err(e) => failures.push(format!("alpha = {a}: {e}")),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Domain(failures.join("; ")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("loads must not all be equal"));
    }
    let kappa = sxy / sxx;
    Ok(PowerDecayFit {
        kappa,
        log_c: my - kappa * mx,
        points,
    })
}

/// Inputs of a sweep over loads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub alphas: Vec<f64>,
    pub mc: McConfig,
    /// Also solve the 1-RSB saddle point (discrete sets only).
    pub rsb: bool,
}

/// One line of sweep output.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub constellation: String,
    pub gamma: f64,
    pub sigma_u2: f64,
    pub sigma_n2: f64,
    pub lambda: f64,
    pub k: usize,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub d_replica_rs: Option<f64>,
    /// `ok`, or `diverged` when the RS branch does not exist at this load.
    pub rs_status: String,
    pub d_replica_rsb: Option<f64>,
    pub d_mc_mean: f64,
    pub d_mc_stderr: f64,
    pub mc_excluded: usize,
    /// Rate bound evaluated at the tightest replica distortion.
    pub rate_bound: Option<f64>,
    pub entropy0: Option<f64>,
}

/// Column names of the sweep CSV, in order.
pub const SWEEP_HEADER: [&str; 18] = [
    "alpha",
    "constellation",
    "gamma",
    "sigma_u2",
    "sigma_n2",
    "lambda",
    "k",
    "n",
    "trials",
    "seed",
    "d_replica_rs",
    "rs_status",
    "d_replica_rsb",
    "d_mc_mean",
    "d_mc_stderr",
    "mc_excluded",
    "rate_bound",
    "entropy0",
];

/// Computes one sweep row.
pub fn sweep_row(alpha: f64, base: &McConfig, rsb: bool) -> Result<SweepRow> {
    let mc = McConfig { alpha, ..base.clone() };
    mc.validate()?;
    let cfg = RsConfig::iid(alpha)?
        .with_gamma(mc.gamma)
        .with_sigma_u2(mc.sigma_u2)
        .with_lambda(mc.lambda);
    let x = mc.constellation;
    let (d_rs, status, entropy) = match replica_core::solve_rs(&x, &cfg) {
        Ok(s) => (Some(s.d_rs), "ok".to_string(), Some(s.entropy0)),
        Err(Error::Diverged { .. }) => (None, "diverged".to_string(), None),
        Err(e) => return Err(e),
    };
    let d_rsb = if rsb && x.is_constant_modulus() {
        let sol = replica_rsb::solve_rsb1(&x, &cfg, &RsbOptions::default())?;
        Some(sol.d_rsb)
    } else {
        None
    };
    let mcr = monte_carlo_distortion(&mc)?;
    let tightest = match (d_rs, d_rsb) {
        (_, Some(d)) => Some(d),
        (Some(d), None) => Some(d),
        _ => None,
    };
    let rate = tightest
        .map(|d| rate_lower_bound(mc.gamma, mc.sigma_u2, mc.sigma_n2, d))
        .transpose()?;
    Ok(SweepRow {
        alpha,
        constellation: x.label(),
        gamma: mc.gamma,
        sigma_u2: mc.sigma_u2,
        sigma_n2: mc.sigma_n2,
        lambda: mc.lambda,
        k: mc.k,
        n: mc.n(),
        trials: mc.trials,
        seed: mc.seed,
        d_replica_rs: d_rs,
        rs_status: status,
        d_replica_rsb: d_rsb,
        d_mc_mean: mcr.mean,
        d_mc_stderr: mcr.stderr,
        mc_excluded: mcr.excluded,
        rate_bound: rate,
        entropy0: entropy,
    })
}

/// Runs a sweep, writing and flushing each row as soon as it is done.
/// On failure the rows completed so far remain in `out`.
pub fn run_sweep<W: Write>(spec: &SweepSpec, out: W) -> Result<Vec<SweepRow>> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    wtr.write_record(SWEEP_HEADER)?;
    wtr.flush()?;
    let mut rows = Vec::with_capacity(spec.alphas.len());
    for &alpha in &spec.alphas {
        let row = sweep_row(alpha, &spec.mc, spec.rsb)?;
        wtr.serialize(&row)?;
        wtr.flush()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Run record written next to experiment outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seeds: Vec<u64>, started: Instant) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            seeds,
            threads: rayon::current_num_threads(),
            wall_time_s: started.elapsed().as_secs_f64(),
        }
    }
}
