//! One-step replica-symmetry-breaking (1-RSB) saddle point for M-PSK
//! alphabets.
//!
//! Unknowns are `(q1, p1, chi1, mu1)` with `eta1 = chi1 + mu1 p1`. Given
//! them,
//!
//! ```text
//! e1   = R(-chi1) + lambda
//! f1^2 = g R(-eta1) + (q1 - g eta1) R'(-eta1)
//! g1^2 = (R(-chi1) - R(-eta1)) / mu1
//! Y(y, z) = exp(-mu1 min_x [e1 |x|^2 - 2 Re{x conj(f1 z + g1 y)}])
//! ```
//!
//! and the moment equations read, with `<.>` the average over `y` under the
//! tilted measure `Y / int Y Dy` followed by the Gaussian average over `z`:
//!
//! ```text
//! eta1 f1           = < Re{conj(z) xhat} >
//! q1 + p1           = < |xhat|^2 >            (= p for constant modulus)
//! (eta1 + mu1 q1) g1 = < Re{conj(y) xhat} >
//! ```
//!
//! The fourth equation fixes `mu1`; see [`FourthEquation`].
//!
//! For constant-modulus sets the second equation is exact, leaving
//! `(chi1, p1)` to a damped Picard iteration at fixed `mu1` and `mu1` to a
//! bracketed scalar root search on the fourth equation.

use std::cell::RefCell;
use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics;
use crate::replica_core::{Constellation, RsConfig};
use crate::spectra::SpectrumModel;

/// Which form of the scalar equation for `mu1` to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum FourthEquation {
    /// Stationarity of the 1-RSB free energy in `mu1`:
    ///
    /// `I(eta1) - I(chi1) = L + (mu1 q1 + 2 eta1 - 2 mu1 g eta1) R(-eta1)
    ///   - 2 chi1 R(-chi1) - 2 mu1 eta1 (q1 - g eta1) R'(-eta1) + lambda mu1 (q1 + p1)`
    ///
    /// with `I(x) = int_0^x R(-w) dw` and `L = E_z log E_y Y`.
    #[default]
    Stationary,
    /// The same with an additional `-2 chi1 mu1 g R(-eta1)` term, a variant
    /// found in some write-ups. Kept for comparison only.
    ExtraChiTerm,
}

/// How the `(y, z)` averages are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum KernelChoice {
    /// Real reduction for BPSK and QPSK, polar quadrature otherwise.
    #[default]
    Auto,
    /// Always use the polar quadrature.
    Polar,
}

#[derive(Debug, Clone)]
pub struct RsbOptions {
    /// Resolution of the `z` average: radial nodes of the polar rule, and
    /// four times the per-panel order of the real kernels.
    pub quad_order: usize,
    pub mu_max: f64,
    /// Smallest `mu1` scanned. Roots closer to zero are the trivial
    /// RS-like branch.
    pub mu_min: f64,
    pub scan_points: usize,
    pub tol: f64,
    pub mu_tol: f64,
    pub damping: f64,
    pub max_iter: usize,
    pub fourth: FourthEquation,
    pub kernel: KernelChoice,
    /// Starting `(chi1, p1 / p)` at the largest `mu1`.
    pub init: (f64, f64),
}

impl Default for RsbOptions {
    fn default() -> Self {
        RsbOptions {
            quad_order: 32,
            mu_max: 300.0,
            mu_min: 0.5,
            scan_points: 40,
            tol: 1e-10,
            mu_tol: 1e-8,
            damping: 0.5,
            max_iter: 20_000,
            fourth: FourthEquation::Stationary,
            kernel: KernelChoice::Auto,
            init: (0.05, 0.3),
        }
    }
}

/// A 1-RSB saddle point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RsbSolution {
    pub q1: f64,
    pub p1: f64,
    pub chi1: f64,
    pub mu1: f64,
    pub eta1: f64,
    pub e1: f64,
    pub f1: f64,
    pub g1: f64,
    pub d_rsb: f64,
    pub entropy0: f64,
    /// Largest of the per-equation residuals.
    pub residual: f64,
    /// Residuals of the `eta1`, power, `eta1 + mu1 q1` and `mu1` equations.
    pub residuals: [f64; 4],
    /// `E_z log E_y Y`.
    pub log_partition: f64,
}

/// Gaussian averages entering the moment equations.
#[derive(Debug, Clone, Copy)]
struct Moments {
    /// `< Re{conj(z) xhat} >`
    zx: f64,
    /// `< Re{conj(y) xhat} >`
    yx: f64,
    /// `< |xhat|^2 >`
    power: f64,
    /// `E_z log E_y Y`
    log_part: f64,
}

#[derive(Debug, Clone, Copy)]
enum Kernel {
    /// Product of `dims` independent real binary problems of amplitude `amp`.
    Binary { dims: usize, amp: f64 },
    /// Polar quadrature for `m`-PSK.
    Polar { m: usize },
}

struct Context<'a> {
    cfg: &'a RsConfig,
    opts: &'a RsbOptions,
    p: f64,
    lambda: f64,
    kernel: Kernel,
    /// Gauss-Legendre order of each panel in the real kernels.
    panel_order: usize,
    /// `(z, weight)` over the fundamental domain for the polar kernel.
    zrule: Vec<(Complex64, f64)>,
}

fn build_context<'a>(x: &Constellation, cfg: &'a RsConfig, opts: &'a RsbOptions) -> Result<Context<'a>> {
    x.validate()?;
    cfg.validate()?;
    if opts.quad_order < 8 || !(opts.mu_min > 0.0) || !(opts.mu_max > opts.mu_min) || opts.scan_points < 2 {
        return Err(Error::invalid("invalid 1-RSB options"));
    }
    let (p, kernel) = match *x {
        Constellation::Mpsk { m, p } => {
            let k = match (m, opts.kernel) {
                (2, KernelChoice::Auto) => Kernel::Binary { dims: 1, amp: p.sqrt() },
                (4, KernelChoice::Auto) => Kernel::Binary {
                    dims: 2,
                    amp: (p / 2.0).sqrt(),
                },
                _ => Kernel::Polar { m },
            };
            (p, k)
        }
        _ => return Err(Error::invalid("1-RSB is implemented for M-PSK alphabets only")),
    };
    let n = opts.quad_order;
    let mut zrule = Vec::new();
    if let Kernel::Polar { m } = kernel {
        let mut radial = Vec::new();
        numerics::push_mapped(&numerics::gauss_legendre(n), 0.0, 6.5, &mut radial);
        let mut angles = Vec::new();
        let width = PI / m as f64;
        numerics::push_mapped(&numerics::gauss_legendre((n / 4).max(8)), 0.0, width, &mut angles);
        for a in angles.iter_mut() {
            a.1 /= width;
        }
        for &(r, wr) in &radial {
            let wr = wr * 2.0 * r * (-r * r).exp();
            for &(phi, wa) in &angles {
                zrule.push((Complex64::from_polar(r, phi), wr * wa));
            }
        }
    }
    Ok(Context {
        cfg,
        opts,
        p,
        lambda: 0.0,
        kernel,
        panel_order: (n / 4).max(8),
        zrule,
    })
}

/// Averages for a product of `dims` real binary problems with amplitude `amp`.
///
/// The integrand in `z` bends sharply around `z = 0` on a scale `g / f`, so
/// the Gaussian average uses panels graded towards the origin.
fn binary_moments(order: usize, dims: usize, amp: f64, e: f64, f: f64, g: f64, mu: f64) -> Moments {
    let c = SQRT_2 * mu * amp;
    let half_var = 0.5 * c * c * g * g;
    let mut rule = Vec::new();
    graded_panels_n(order, -9.0, 9.0, 0.0, f / g, &mut rule);
    let (mut lj, mut ez, mut ey) = (0.0, 0.0, 0.0);
    for (zn, w) in rule {
        let w = w * numerics::norm_pdf(zn);
        let m = f * zn;
        let d1 = (m + c * g * g) / g;
        let d2 = (-m + c * g * g) / g;
        let a1 = c * m + half_var + numerics::log_norm_cdf(d1);
        let a2 = -c * m + half_var + numerics::log_norm_cdf(d2);
        let l = numerics::log_add_exp(a1, a2);
        let w1 = (a1 - l).exp();
        let w2 = (a2 - l).exp();
        let ey1 = w1 * c * g + (c * m + half_var - l).exp() * numerics::norm_pdf(d1);
        let ey2 = -w2 * c * g - (-c * m + half_var - l).exp() * numerics::norm_pdf(d2);
        lj += w * l;
        ez += w * zn * (w1 - w2);
        ey += w * (ey1 - ey2);
    }
    let k = dims as f64;
    let p = k * amp * amp;
    Moments {
        zx: k * amp / SQRT_2 * ez,
        yx: k * amp / SQRT_2 * ey,
        power: p,
        log_part: k * lj - mu * e * p,
    }
}

/// Panels graded towards `peak` inside `[a, b]`, 8 nodes each.
fn graded_panels(a: f64, b: f64, peak: f64, scale: f64, out: &mut Vec<(f64, f64)>) {
    graded_panels_n(8, a, b, peak, scale, out)
}

fn graded_panels_n(order: usize, a: f64, b: f64, peak: f64, scale: f64, out: &mut Vec<(f64, f64)>) {
    let leg = numerics::gauss_legendre(order);
    let peak = peak.clamp(a, b);
    let h0 = (0.25 / scale.max(1.0)).min(b - a);
    for (lo, hi, dir) in [(peak, b, 1.0), (a, peak, -1.0)] {
        let len = hi - lo;
        if len <= 0.0 {
            continue;
        }
        let mut start = 0.0;
        let mut h = h0;
        while start < len {
            let end = (start + h).min(len);
            let (x0, x1) = if dir > 0.0 {
                (peak + start, peak + end)
            } else {
                (peak - end, peak - start)
            };
            numerics::push_mapped(&leg, x0, x1, out);
            start = end;
            h *= 2.0;
        }
    }
}

/// `M0(A) exp(-shift)` with `M0(A) = int_0^inf exp(-r^2 + 2 r A) dr`.
fn scaled_m0(a: f64, shift: f64) -> f64 {
    let k = 0.5 * PI.sqrt();
    if a >= 0.0 {
        k * numerics::erfc(-a) * (a * a - shift).exp()
    } else {
        k * numerics::erfcx(-a) * (-shift).exp()
    }
}

/// Averages by polar quadrature in the plane of `u = (f z + g y) / g`.
fn polar_moments(ctx: &Context, m: usize, e: f64, f: f64, g: f64, mu: f64) -> Moments {
    let p = ctx.p;
    let sp = p.sqrt();
    let b = mu * sp * g;
    let (mut zx, mut yx, mut lp) = (0.0, 0.0, 0.0);
    let mut nodes: Vec<(f64, f64)> = Vec::new();
    // (phi, weight, A, theta)
    let mut vals: Vec<(f64, f64, f64, f64)> = Vec::new();
    for &(z, wz) in &ctx.zrule {
        let ct = z * (f / g);
        vals.clear();
        let width = 2.0 * PI / m as f64;
        for k in 0..m {
            let th = k as f64 * width;
            let cm = ct + Complex64::from_polar(b, th);
            let lo = th - 0.5 * width;
            let hi = th + 0.5 * width;
            // Peak of |c_m| cos(phi - psi) nearest to the sector.
            let psi = th + (cm.arg() - th + PI).rem_euclid(2.0 * PI) - PI;
            nodes.clear();
            graded_panels(lo, hi, psi, cm.norm(), &mut nodes);
            for &(phi, w) in &nodes {
                let a = (cm * Complex64::from_polar(1.0, -phi)).re;
                vals.push((phi, w, a, th));
            }
        }
        let amax = vals.iter().fold(0.0f64, |acc, v| acc.max(v.2));
        let shift = amax * amax;
        let es = (-shift).exp();
        let mut i1 = 0.0;
        let mut j = Complex64::new(0.0, 0.0);
        let mut k2 = 0.0;
        for &(phi, w, a, th) in &vals {
            let m0 = scaled_m0(a, shift);
            let m1 = 0.5 * es + a * m0;
            let m2 = 0.5 * a * es + (0.5 + a * a) * m0;
            i1 += w * m1;
            j += Complex64::from_polar(w * m1, th);
            k2 += w * m2 * (th - phi).cos();
        }
        let mean_x = j * (sp / i1);
        let mean_yx = sp * (k2 - (ct.conj() * j).re) / i1;
        let log_y = -mu * e * p - ct.norm_sqr() - PI.ln() + shift + i1.ln();
        zx += wz * (z.conj() * mean_x).re;
        yx += wz * mean_yx;
        lp += wz * log_y;
    }
    Moments {
        zx,
        yx,
        power: p,
        log_part: lp,
    }
}

/// Conjugate parameters and averages at a point.
#[derive(Debug, Clone, Copy)]
struct Eval {
    q1: f64,
    eta: f64,
    e: f64,
    f: f64,
    g: f64,
    mom: Moments,
}

fn evaluate(ctx: &Context, chi: f64, p1: f64, mu: f64) -> Result<Eval> {
    let sp = &ctx.cfg.spectrum;
    let gs = ctx.cfg.g();
    let q1 = ctx.p - p1;
    let eta = chi + mu * p1;
    let r_chi = sp.r_neg(chi)?;
    let r_eta = sp.r_neg(eta)?;
    let e = r_chi + ctx.lambda;
    let f2 = gs * r_eta + (q1 - gs * eta) * sp.r_prime_neg(eta)?;
    let g2 = (r_chi - r_eta) / mu;
    if !(f2 > 0.0) || !(g2 > 0.0) {
        return Err(Error::Domain(format!(
            "1-RSB conjugates not positive: f1^2 = {f2:.3e}, g1^2 = {g2:.3e} at \
             chi1 = {chi}, p1 = {p1}, q1 = {q1}, mu1 = {mu}"
        )));
    }
    let (f, g) = (f2.sqrt(), g2.sqrt());
    let mom = match ctx.kernel {
        Kernel::Binary { dims, amp } => binary_moments(ctx.panel_order, dims, amp, e, f, g, mu),
        Kernel::Polar { m } => polar_moments(ctx, m, e, f, g, mu),
    };
    Ok(Eval { q1, eta, e, f, g, mom })
}

/// Picard update of `(chi1, p1)` at fixed `mu1`.
fn update(ctx: &Context, ev: &Eval, mu: f64) -> (f64, f64) {
    let eta_n = ev.mom.zx / ev.f;
    let q1n = (ev.mom.yx / ev.g - eta_n) / mu;
    let p1n = ctx.p - q1n;
    (eta_n - mu * p1n, p1n)
}

/// Converged `(chi1, p1)` at fixed `mu1`.
#[derive(Debug, Clone, Copy)]
pub struct FixedMuPoint {
    pub chi1: f64,
    pub p1: f64,
    pub mu1: f64,
    pub residual: f64,
}

fn fixed_point(ctx: &Context, mu: f64, init: (f64, f64)) -> Result<FixedMuPoint> {
    let (mut chi, mut p1) = init;
    let mut w = ctx.opts.damping;
    let mut prev = f64::INFINITY;
    let mut res = f64::NAN;
    // The update divides by g1 ~ mu1^(-1/2) and by mu1, so round-off in the
    // moments is amplified roughly linearly in mu1.
    let tol = ctx.opts.tol * mu.max(1.0);
    for _ in 0..ctx.opts.max_iter {
        let ev = evaluate(ctx, chi, p1, mu)?;
        let (cn, pn) = update(ctx, &ev, mu);
        res = (cn - chi).abs() + (pn - p1).abs();
        if !res.is_finite() {
            break;
        }
        if res < tol {
            return Ok(FixedMuPoint {
                chi1: cn.max(0.0),
                p1: pn.clamp(0.0, ctx.p),
                mu1: mu,
                residual: res,
            });
        }
        if res > prev {
            w = (w * 0.5).max(1e-3);
        }
        prev = res;
        chi = ((1.0 - w) * chi + w * cn).max(0.0);
        p1 = ((1.0 - w) * p1 + w * pn).clamp(1e-14, ctx.p);
    }
    Err(Error::NoConvergence {
        what: format!("1-RSB moment equations at mu1 = {mu}"),
        iterations: ctx.opts.max_iter,
        residual: res,
    })
}

/// Solves the three moment equations at a fixed `mu1`.
pub fn rsb_fixed_point_at_mu(
    x: &Constellation,
    cfg: &RsConfig,
    opts: &RsbOptions,
    mu1: f64,
    init: (f64, f64),
) -> Result<FixedMuPoint> {
    let ctx = build_context(x, cfg, opts)?;
    fixed_point(&ctx, mu1, init)
}

/// Residual `LHS - RHS` of the fourth equation.
fn fourth_residual(ctx: &Context, chi: f64, p1: f64, mu: f64, ev: &Eval) -> Result<f64> {
    let sp = &ctx.cfg.spectrum;
    let gs = ctx.cfg.g();
    let (q1, eta) = (ev.q1, ev.eta);
    let lhs = sp.r_integral(eta)? - sp.r_integral(chi)?;
    let mut coef = mu * q1 + 2.0 * eta - 2.0 * mu * gs * eta;
    if ctx.opts.fourth == FourthEquation::ExtraChiTerm {
        coef -= 2.0 * chi * mu * gs;
    }
    let rhs = ev.mom.log_part + coef * sp.r_neg(eta)?
        - 2.0 * chi * sp.r_neg(chi)?
        - 2.0 * mu * eta * (q1 - gs * eta) * sp.r_prime_neg(eta)?
        + ctx.lambda * mu * (q1 + p1);
    Ok(lhs - rhs)
}

fn assemble(ctx: &Context, pt: &FixedMuPoint) -> Result<RsbSolution> {
    let (chi, p1, mu) = (pt.chi1, pt.p1, pt.mu1);
    let ev = evaluate(ctx, chi, p1, mu)?;
    let r4 = fourth_residual(ctx, chi, p1, mu, &ev)?;
    let r1 = ev.eta - ev.mom.zx / ev.f;
    let r2 = ev.q1 + p1 - ev.mom.power;
    let r3 = ev.eta + mu * ev.q1 - ev.mom.yx / ev.g;
    let residuals = [r1.abs(), r2.abs(), r3.abs(), r4.abs()];
    let mut sol = RsbSolution {
        q1: ev.q1,
        p1,
        chi1: chi,
        mu1: mu,
        eta1: ev.eta,
        e1: ev.e,
        f1: ev.f,
        g1: ev.g,
        d_rsb: 0.0,
        entropy0: crate::replica_core::zero_temperature_entropy(chi, &ctx.cfg.spectrum)?,
        residual: residuals.iter().cloned().fold(0.0, f64::max),
        residuals,
        log_partition: ev.mom.log_part,
    };
    sol.d_rsb = rsb_distortion(&sol, ctx.cfg)?;
    Ok(sol)
}

/// One sample of the `mu1` scan.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanSample {
    pub mu1: f64,
    pub chi1: f64,
    pub p1: f64,
    pub fourth_residual: f64,
}

/// Scans `mu1` downwards from `mu_max` (warm-starting each fixed point from
/// the previous one) and returns the fourth-equation residual profile.
pub fn scan_mu(x: &Constellation, cfg: &RsConfig, opts: &RsbOptions) -> Result<Vec<ScanSample>> {
    let ctx = build_context(x, cfg, opts)?;
    scan(&ctx).map(|v| v.into_iter().map(|(s, _)| s).collect())
}

fn scan(ctx: &Context) -> Result<Vec<(ScanSample, FixedMuPoint)>> {
    let opts = ctx.opts;
    let n = opts.scan_points;
    let (a, b) = (opts.mu_max.ln(), opts.mu_min.ln());
    let mut state = (opts.init.0, opts.init.1 * ctx.p);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mu = (a + (b - a) * i as f64 / (n - 1) as f64).exp();
        let pt = match fixed_point(ctx, mu, state) {
            Ok(pt) => pt,
            Err(e) if i + 1 == n && out.is_empty() => return Err(e),
            Err(_) => continue,
        };
        state = (pt.chi1, pt.p1);
        let ev = evaluate(ctx, pt.chi1, pt.p1, mu)?;
        let r = fourth_residual(ctx, pt.chi1, pt.p1, mu, &ev)?;
        out.push((
            ScanSample {
                mu1: mu,
                chi1: pt.chi1,
                p1: pt.p1,
                fourth_residual: r,
            },
            pt,
        ));
    }
    Ok(out)
}

/// Solves the 1-RSB saddle point. Among all roots of the fourth equation
/// found on `[mu_min, mu_max]` the one with the smallest distortion is
/// returned.
pub fn solve_rsb1(x: &Constellation, cfg: &RsConfig, opts: &RsbOptions) -> Result<RsbSolution> {
    let ctx = build_context(x, cfg, opts)?;
    let profile = scan(&ctx)?;
    let mut candidates = Vec::new();
    for pair in profile.windows(2) {
        let (s0, pt0) = pair[0];
        let (s1, _) = pair[1];
        if s0.fourth_residual.signum() == s1.fourth_residual.signum() {
            continue;
        }
        let warm = RefCell::new((pt0.chi1, pt0.p1));
        let last = RefCell::new(None);
        let root = numerics::brent(
            |mu| {
                let pt = fixed_point(&ctx, mu, *warm.borrow())?;
                *warm.borrow_mut() = (pt.chi1, pt.p1);
                *last.borrow_mut() = Some(pt);
                let ev = evaluate(&ctx, pt.chi1, pt.p1, mu)?;
                fourth_residual(&ctx, pt.chi1, pt.p1, mu, &ev)
            },
            s1.mu1,
            s0.mu1,
            opts.mu_tol,
            "solving the 1-RSB equation for mu1",
        );
        if let Ok(mu) = root {
            let pt = fixed_point(&ctx, mu, *warm.borrow())?;
            candidates.push(assemble(&ctx, &pt)?);
        }
    }
    if candidates.is_empty() {
        let trace: Vec<String> = profile
            .iter()
            .map(|(s, _)| format!("mu1={:.4}: r={:.3e}", s.mu1, s.fourth_residual))
            .collect();
        return Err(Error::Bracket {
            what: format!("bracketing mu1 (profile: {})", trace.join(", ")),
            lo: opts.mu_min,
            hi: opts.mu_max,
        });
    }
    candidates.sort_by(|a, b| a.d_rsb.total_cmp(&b.d_rsb));
    Ok(candidates.swap_remove(0))
}

/// 1-RSB distortion
/// `g - alpha chi1/mu1 R(-chi1) + alpha [q1 + eta1/mu1 - 2 g eta1] R(-eta1)
///  - alpha eta1 (q1 - g eta1) R'(-eta1)`.
pub fn rsb_distortion(sol: &RsbSolution, cfg: &RsConfig) -> Result<f64> {
    if !(sol.mu1 > 0.0) {
        return Err(Error::invalid("mu1 must be positive; use the RS solution instead"));
    }
    rsb_distortion_at(sol.q1, sol.chi1, sol.p1, sol.mu1, &cfg.spectrum, cfg.g())
}

/// [`rsb_distortion`] from raw order parameters.
pub fn rsb_distortion_at(q1: f64, chi1: f64, p1: f64, mu1: f64, sp: &SpectrumModel, g: f64) -> Result<f64> {
    if !(mu1 > 0.0) {
        return Err(Error::invalid("mu1 must be positive; use the RS solution instead"));
    }
    let alpha = sp.alpha();
    let eta = chi1 + mu1 * p1;
    Ok(
        g - alpha * chi1 / mu1 * sp.r_neg(chi1)? + alpha * (q1 + eta / mu1 - 2.0 * g * eta) * sp.r_neg(eta)?
            - alpha * eta * (q1 - g * eta) * sp.r_prime_neg(eta)?,
    )
}
