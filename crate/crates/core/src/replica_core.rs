//! Replica-symmetric saddle point of the LSE precoder.
//!
//! The order parameters `(q, chi)` solve
//!
//! ```text
//! e = R(-chi) + lambda
//! f^2 = (q - chi g) R'(-chi) + g R(-chi),            g = gamma sigma_u^2
//! q   = E |xhat(z)|^2
//! chi = E Re{xhat(z) conj(z)} / f
//! xhat(z) = argmin_{x in X} |z - (e / f) x|
//! ```
//!
//! with `z` standard complex Gaussian (`E|z|^2 = 1`). The predicted
//! distortion is `g + alpha d/dchi[(q - chi g) chi R(-chi)]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics;
use crate::spectra::SpectrumModel;

/// Output alphabet of the precoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "set", rename_all = "snake_case")]
pub enum Constellation {
    /// The whole complex plane (linear RZF precoding).
    FullComplex,
    /// `|x|^2 <= peak`.
    Disk { peak: f64 },
    /// `|x|^2 = power`.
    Circle { power: f64 },
    /// `sqrt(p) exp(j 2 pi m / M)`, `m = 1..M`.
    Mpsk { m: usize, p: f64 },
}

impl Constellation {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Constellation::FullComplex => true,
            Constellation::Disk { peak } => peak > 0.0 && peak.is_finite(),
            Constellation::Circle { power } => power > 0.0 && power.is_finite(),
            Constellation::Mpsk { m, p } => m >= 2 && p > 0.0 && p.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid constellation {self:?}")))
        }
    }

    /// Constant-modulus sets make the `lambda ||x||^2` penalty a constant.
    pub fn is_constant_modulus(&self) -> bool {
        matches!(self, Constellation::Circle { .. } | Constellation::Mpsk { .. })
    }

    pub fn is_convex(&self) -> bool {
        matches!(self, Constellation::FullComplex | Constellation::Disk { .. })
    }

    /// `|x|^2` for constant-modulus sets.
    pub fn modulus_sq(&self) -> Option<f64> {
        match *self {
            Constellation::Circle { power } => Some(power),
            Constellation::Mpsk { p, .. } => Some(p),
            _ => None,
        }
    }

    /// Index of the `M`-PSK point closest to `x` (index 0 is phase 0).
    pub fn psk_index(m: usize, x: Complex64) -> usize {
        let t = x.arg().rem_euclid(2.0 * PI) * m as f64 / (2.0 * PI);
        let lower = t.floor();
        let k = if t - lower > 0.5 { lower + 1.0 } else { lower };
        (k as usize) % m
    }

    /// Closest point of the set to `x`. For the circle, `x = 0` maps to `sqrt(power)`.
    pub fn project(&self, x: Complex64) -> Complex64 {
        match *self {
            Constellation::FullComplex => x,
            Constellation::Disk { peak } => {
                let r = x.norm();
                if r * r > peak {
                    x * (peak.sqrt() / r)
                } else {
                    x
                }
            }
            Constellation::Circle { power } => {
                let r = x.norm();
                if r > 0.0 {
                    x * (power.sqrt() / r)
                } else {
                    Complex64::new(power.sqrt(), 0.0)
                }
            }
            Constellation::Mpsk { m, p } => {
                let k = Self::psk_index(m, x);
                Complex64::from_polar(p.sqrt(), 2.0 * PI * k as f64 / m as f64)
            }
        }
    }

    /// Short label used in tables.
    pub fn label(&self) -> String {
        match *self {
            Constellation::FullComplex => "full".into(),
            Constellation::Disk { peak } => format!("disk(P={peak})"),
            Constellation::Circle { power } => format!("circle(P={power})"),
            Constellation::Mpsk { m, p } => format!("{m}psk(p={p})"),
        }
    }
}

/// Settings of the RS solvers.
#[derive(Debug, Clone)]
pub struct RsConfig {
    pub gamma: f64,
    pub sigma_u2: f64,
    pub lambda: f64,
    pub spectrum: SpectrumModel,
    /// Quadrature nodes per axis of the polar product rule.
    pub quad_order: usize,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Starting points `(q, chi)`.
    pub init_list: Vec<(f64, f64)>,
}

impl RsConfig {
    pub fn new(spectrum: SpectrumModel) -> Self {
        RsConfig {
            gamma: 1.0,
            sigma_u2: 1.0,
            lambda: 0.0,
            spectrum,
            quad_order: 80,
            damping: 0.5,
            tol: 1e-9,
            max_iter: 10_000,
            init_list: vec![(0.1, 0.1), (1.0, 1.0), (1.0, 10.0)],
        }
    }

    /// iid channel with antenna-to-user ratio `alpha`.
    pub fn iid(alpha: f64) -> Result<Self> {
        Ok(Self::new(SpectrumModel::iid(alpha)?))
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_sigma_u2(mut self, sigma_u2: f64) -> Self {
        self.sigma_u2 = sigma_u2;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_quad_order(mut self, n: usize) -> Self {
        self.quad_order = n;
        self
    }

    /// Receive signal power `gamma sigma_u^2`, the only combination the
    /// saddle-point equations depend on.
    pub fn g(&self) -> f64 {
        self.gamma * self.sigma_u2
    }

    pub fn alpha(&self) -> f64 {
        self.spectrum.alpha()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !(self.sigma_u2 > 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::invalid("need gamma >= 0, sigma_u2 > 0 and lambda >= 0"));
        }
        if self.quad_order < 8 || !(self.tol > 0.0) {
            return Err(Error::invalid("need quad_order >= 8 and tol > 0"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("damping must lie in (0, 1]"));
        }
        if self.init_list.is_empty() {
            return Err(Error::invalid("init_list is empty"));
        }
        Ok(())
    }

    fn effective_lambda(&self, x: &Constellation) -> f64 {
        if x.is_constant_modulus() {
            0.0
        } else {
            self.lambda
        }
    }
}

/// Auxiliary scalars of the closed-form peak-power equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakDiagnostics {
    pub c: f64,
    pub h: f64,
}

/// A converged RS saddle point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RsSolution {
    pub q: f64,
    pub chi: f64,
    pub f: f64,
    pub e: f64,
    pub d_rs: f64,
    pub residual: f64,
    pub entropy0: f64,
    pub iterations: usize,
    pub peak: Option<PeakDiagnostics>,
}

/// `(e, f)` at the given order parameters.
pub fn conjugate_parameters(q: f64, chi: f64, lambda: f64, cfg: &RsConfig) -> Result<(f64, f64)> {
    let g = cfg.g();
    let r = cfg.spectrum.r_neg(chi)?;
    let rp = cfg.spectrum.r_prime_neg(chi)?;
    let f2 = (q - chi * g) * rp + g * r;
    if !(f2 > 0.0) {
        return Err(Error::Domain(format!(
            "f^2 = {f2:.3e} is not positive at q = {q}, chi = {chi}"
        )));
    }
    Ok((r + lambda, f2.sqrt()))
}

/// Radius beyond which the radial quadrature is truncated (`exp(-100)`).
const R_MAX: f64 = 10.0;

/// Product rule for `E[h(z)]`, `z` standard complex Gaussian, in polar
/// coordinates. Breakpoints sit on the kinks of `xhat`: the clipping radius
/// of the disk and the decision boundaries of PSK.
fn polar_rule(x: &Constellation, ratio: f64, n: usize) -> Vec<(Complex64, f64)> {
    let leg = numerics::gauss_legendre(n);
    let mut radial = Vec::with_capacity(2 * n);
    let split = match *x {
        Constellation::Disk { peak } => Some(ratio * peak.sqrt()),
        _ => None,
    };
    match split {
        Some(rb) if rb < R_MAX => {
            numerics::push_mapped(&leg, 0.0, rb, &mut radial);
            numerics::push_mapped(&leg, rb, R_MAX, &mut radial);
        }
        _ => numerics::push_mapped(&leg, 0.0, R_MAX, &mut radial),
    }
    let radial: Vec<(f64, f64)> = radial
        .into_iter()
        .map(|(r, w)| (r, w * 2.0 * r * (-r * r).exp()))
        .collect();

    let mut angular = Vec::new();
    match *x {
        Constellation::Mpsk { m, .. } => {
            let sectors = m.min(64);
            let per = (n / 4).max(8);
            let leg_a = numerics::gauss_legendre(per);
            let width = 2.0 * PI / sectors as f64;
            let offset = if sectors == m { -PI / m as f64 } else { 0.0 };
            for s in 0..sectors {
                let a = offset + s as f64 * width;
                numerics::push_mapped(&leg_a, a, a + width, &mut angular);
            }
            for a in angular.iter_mut() {
                a.1 /= 2.0 * PI;
            }
        }
        _ => {
            angular.extend((0..n).map(|k| (2.0 * PI * (k as f64 + 0.5) / n as f64, 1.0 / n as f64)));
        }
    }

    let mut out = Vec::with_capacity(radial.len() * angular.len());
    for &(r, wr) in &radial {
        for &(phi, wa) in &angular {
            out.push((Complex64::from_polar(r, phi), wr * wa));
        }
    }
    out
}

/// One application of the RS map: returns the updated `(q, chi)`.
fn rs_map(x: &Constellation, q: f64, chi: f64, cfg: &RsConfig, n: usize) -> Result<(f64, f64)> {
    let lambda = cfg.effective_lambda(x);
    let (e, f) = conjugate_parameters(q, chi, lambda, cfg)?;
    let ratio = e / f;
    let rule = polar_rule(x, ratio, n);
    let (mut qn, mut cn) = (0.0, 0.0);
    for (z, w) in rule {
        let xh = x.project(z / ratio);
        qn += w * xh.norm_sqr();
        cn += w * (xh * z.conj()).re;
    }
    Ok((qn, cn / f))
}

/// Largest `chi` accepted before the RS branch is declared divergent.
const CHI_DIVERGED: f64 = 1e8;

fn divergence_error(x: &Constellation, cfg: &RsConfig) -> Error {
    if cfg.spectrum.is_iid() {
        let g = cfg.g();
        let star = match *x {
            Constellation::Mpsk { m, p } => Some(mpsk_alpha_star(m, p, g)),
            Constellation::Circle { power } => Some(4.0 * (power + g) / (PI * power)),
            _ => None,
        };
        if let Some(alpha_star) = star {
            return Error::Diverged { alpha_star };
        }
    }
    Error::Domain("chi grows without bound; the RS branch diverges".into())
}

fn finish(q: f64, chi: f64, lambda: f64, cfg: &RsConfig, residual: f64, iterations: usize) -> Result<RsSolution> {
    let (e, f) = conjugate_parameters(q, chi, lambda, cfg)?;
    Ok(RsSolution {
        q,
        chi,
        f,
        e,
        d_rs: rs_distortion(q, chi, cfg)?,
        residual,
        entropy0: zero_temperature_entropy(chi, &cfg.spectrum)?,
        iterations,
        peak: None,
    })
}

/// Damped Picard iteration from one starting point. The damping is halved
/// whenever the residual grows.
fn picard(
    mut step: impl FnMut(f64, f64) -> Result<(f64, f64)>,
    init: (f64, f64),
    cfg: &RsConfig,
    on_diverge: impl Fn() -> Error,
) -> Result<(f64, f64, f64, usize)> {
    let mut last_err = None;
    let mut omega = cfg.damping;
    // A non-positive f^2 restarts the iteration with stronger damping.
    for _restart in 0..4 {
        let (mut q, mut chi) = init;
        let mut prev = f64::INFINITY;
        let mut w = omega;
        let mut outcome = None;
        // Consecutive steps in which chi grows while the residual does not shrink.
        let mut growth = 0usize;
        for it in 0..cfg.max_iter {
            let (qn, cn) = match step(q, chi) {
                Ok(v) => v,
                Err(e @ Error::Domain(_)) => {
                    last_err = Some(e);
                    break;
                }
                Err(e) => return Err(e),
            };
            if !(cn >= 0.0) || !qn.is_finite() || cn > CHI_DIVERGED {
                return Err(on_diverge());
            }
            let res = (qn - q).abs() + (cn - chi).abs();
            if res < cfg.tol {
                outcome = Some((qn, cn, res, it + 1));
                break;
            }
            if res > prev {
                w = (w * 0.5).max(1e-3);
                growth = if cn > chi { growth + 1 } else { 0 };
                if growth >= 200 {
                    return Err(on_diverge());
                }
            } else {
                growth = 0;
            }
            prev = res;
            q = (1.0 - w) * q + w * qn;
            chi = (1.0 - w) * chi + w * cn;
            if it + 1 == cfg.max_iter {
                last_err = Some(Error::NoConvergence {
                    what: "RS fixed point".into(),
                    iterations: cfg.max_iter,
                    residual: res,
                });
            }
        }
        if let Some(o) = outcome {
            return Ok(o);
        }
        match last_err {
            Some(Error::Domain(_)) => omega *= 0.5,
            _ => break,
        }
    }
    Err(last_err.unwrap_or_else(|| Error::NoConvergence {
        what: "RS fixed point".into(),
        iterations: cfg.max_iter,
        residual: f64::NAN,
    }))
}

/// Picks the minimal-distortion solution (ties to the smaller chi) or
/// reports every start's failure.
fn select(results: Vec<((f64, f64), Result<RsSolution>)>) -> Result<RsSolution> {
    let mut best: Option<RsSolution> = None;
    let mut trace = Vec::new();
    let mut diverged = None;
    for (init, r) in results {
        match r {
            Ok(s) => {
                let better = match &best {
                    None => true,
                    Some(b) => s.d_rs < b.d_rs - 1e-12 || (s.d_rs <= b.d_rs + 1e-12 && s.chi < b.chi),
                };
                if better {
                    best = Some(s);
                }
            }
            Err(e @ Error::Diverged { .. }) => diverged = Some(e),
            Err(e) => trace.push(format!("start {init:?}: {e}")),
        }
    }
    if let Some(b) = best {
        return Ok(b);
    }
    if let Some(d) = diverged {
        return Err(d);
    }
    Err(Error::NoConvergence {
        what: format!("RS fixed point from every start [{}]", trace.join("; ")),
        iterations: 0,
        residual: f64::NAN,
    })
}

/// Solves the RS equations for any constellation by quadrature.
pub fn solve_rs_generic(x: &Constellation, cfg: &RsConfig) -> Result<RsSolution> {
    x.validate()?;
    cfg.validate()?;
    let lambda = cfg.effective_lambda(x);
    let n = cfg.quad_order;
    let results = cfg
        .init_list
        .iter()
        .map(|&init| {
            let r = picard(|q, c| rs_map(x, q, c, cfg, n), init, cfg, || divergence_error(x, cfg))
                .and_then(|(q, chi, res, it)| finish(q, chi, lambda, cfg, res, it));
            (init, r)
        })
        .collect();
    select(results)
}

/// Fixed-point residual `|dq| + |dchi|` of `(q, chi)` under the quadrature
/// RS map with `quad_order` nodes.
pub fn rs_residual(x: &Constellation, q: f64, chi: f64, cfg: &RsConfig, quad_order: usize) -> Result<f64> {
    let (qn, cn) = rs_map(x, q, chi, cfg, quad_order)?;
    Ok((qn - q).abs() + (cn - chi).abs())
}

fn peak_step(peak: f64, q: f64, chi: f64, alpha: f64, lambda: f64, g: f64) -> (f64, f64, PeakDiagnostics) {
    let c = (alpha * (q + g)).sqrt() / (alpha * lambda * (1.0 + chi) + 1.0);
    let ex = -(-peak / (c * c)).exp_m1();
    let h = c * ex + (peak * PI).sqrt() * numerics::q_func((2.0 * peak).sqrt() / c);
    let chin = h * (1.0 + chi) * (alpha / (q + g)).sqrt();
    (c * c * ex, chin, PeakDiagnostics { c, h })
}

/// Solves the `chi` equation of the peak-power map at fixed `q`. Plain
/// iteration on `chi` is unstable when `chi` is large, so the root is
/// bracketed by doubling and then polished with Brent's method.
fn peak_chi(peak: f64, q: f64, alpha: f64, lambda: f64, g: f64) -> Result<f64> {
    let f = |chi: f64| Ok(peak_step(peak, q, chi, alpha, lambda, g).1 - chi);
    let mut hi = 1.0;
    while f(hi)? > 0.0 {
        hi *= 2.0;
        if hi > CHI_DIVERGED {
            return Err(Error::Domain(
                "chi grows without bound in the peak-power equations".into(),
            ));
        }
    }
    let lo = if hi > 1.0 { 0.5 * hi } else { 0.0 };
    numerics::brent(f, lo, hi, 1e-14 * hi, "solving the peak-power chi equation")
}

/// RS solution for the peak-power set `|x|^2 <= peak` on an iid channel,
/// from the closed-form reduction of the fixed-point equations.
pub fn solve_rs_peak(peak: f64, cfg: &RsConfig) -> Result<RsSolution> {
    cfg.validate()?;
    if !(peak > 0.0) {
        return Err(Error::invalid("peak power must be positive"));
    }
    let SpectrumModel::MarchenkoPasturIid { alpha } = cfg.spectrum else {
        return Err(Error::invalid(
            "the closed-form peak-power equations need an iid spectrum",
        ));
    };
    let (lambda, g) = (cfg.lambda, cfg.g());
    let results = cfg
        .init_list
        .iter()
        .map(|&init| {
            let r = picard(
                |q, _| {
                    let chi = peak_chi(peak, q, alpha, lambda, g)?;
                    let (qn, _, _) = peak_step(peak, q, chi, alpha, lambda, g);
                    Ok((qn, chi))
                },
                init,
                cfg,
                || Error::Domain("chi grows without bound in the peak-power equations".into()),
            )
            .and_then(|(q, chi, res, it)| {
                let (_, _, diag) = peak_step(peak, q, chi, alpha, lambda, g);
                let mut s = finish(q, chi, lambda, cfg, res, it)?;
                s.d_rs = (q + g) / ((1.0 + chi) * (1.0 + chi));
                s.peak = Some(diag);
                Ok(s)
            });
            (init, r)
        })
        .collect();
    select(results)
}

/// RS solution of the linear (RZF) precoder on an iid channel from the
/// quadratic `lambda alpha t^2 + (1 - alpha - lambda alpha) t - 1 = 0`,
/// `t = 1 + chi`.
pub fn solve_rs_rzf(cfg: &RsConfig) -> Result<RsSolution> {
    cfg.validate()?;
    let SpectrumModel::MarchenkoPasturIid { alpha } = cfg.spectrum else {
        return Err(Error::invalid("the closed-form RZF solution needs an iid spectrum"));
    };
    let (lambda, g) = (cfg.lambda, cfg.g());
    if !(lambda > 0.0) {
        return Err(Error::invalid("the RZF fixed point needs lambda > 0"));
    }
    let a = lambda * alpha;
    let b = 1.0 - alpha - a;
    let t = (-b + (b * b + 4.0 * a).sqrt()) / (2.0 * a);
    let chi = t - 1.0;
    let den = (1.0 + a * t).powi(2) - alpha;
    let q = alpha * g / den;
    let mut s = finish(q, chi, lambda, cfg, 0.0, 0)?;
    s.d_rs = (q + g) / (t * t);
    Ok(s)
}

/// Dispatches to a closed form where one exists (iid channel) and to the
/// quadrature solver otherwise.
pub fn solve_rs(x: &Constellation, cfg: &RsConfig) -> Result<RsSolution> {
    x.validate()?;
    if !cfg.spectrum.is_iid() {
        return solve_rs_generic(x, cfg);
    }
    let alpha = cfg.alpha();
    let g = cfg.g();
    match *x {
        Constellation::FullComplex if cfg.lambda > 0.0 => solve_rs_rzf(cfg),
        Constellation::Disk { peak } => solve_rs_peak(peak, cfg),
        Constellation::Mpsk { m, p } => {
            let chi = rs_chi_mpsk(m, p, g, alpha)?;
            finish(p, chi, 0.0, cfg, 0.0, 0)
        }
        Constellation::Circle { power } => {
            let chi = rs_chi_constant_envelope(power, g, alpha)?;
            finish(power, chi, 0.0, cfg, 0.0, 0)
        }
        _ => solve_rs_generic(x, cfg),
    }
}

/// Divergence threshold of the `M`-PSK RS branch.
pub fn mpsk_alpha_star(m: usize, p: f64, g: f64) -> f64 {
    let k = 2.0 / (m as f64 * (PI / m as f64).sin());
    k * k * PI * (p + g) / p
}

/// Closed-form RS `chi` for `M`-PSK (`q = p`).
pub fn rs_chi_mpsk(m: usize, p: f64, g: f64, alpha: f64) -> Result<f64> {
    if m < 2 || !(p > 0.0) || !(g >= 0.0) || !(alpha > 0.0) {
        return Err(Error::invalid("need M >= 2, p > 0, g >= 0, alpha > 0"));
    }
    let k = 2.0 / (m as f64 * (PI / m as f64).sin());
    let bracket = k * (PI * (p + g) / (p * alpha)).sqrt() - 1.0;
    if !(bracket > 0.0) {
        return Err(Error::Diverged {
            alpha_star: mpsk_alpha_star(m, p, g),
        });
    }
    Ok(1.0 / bracket)
}

/// Closed-form RS `chi` for constant-envelope signals (`q = p`).
pub fn rs_chi_constant_envelope(p: f64, g: f64, alpha: f64) -> Result<f64> {
    if !(p > 0.0) || !(g >= 0.0) || !(alpha > 0.0) {
        return Err(Error::invalid("need p > 0, g >= 0, alpha > 0"));
    }
    let bracket = 2.0 * ((p + g) / (PI * p * alpha)).sqrt() - 1.0;
    if !(bracket > 0.0) {
        return Err(Error::Diverged {
            alpha_star: 4.0 * (p + g) / (PI * p),
        });
    }
    Ok(1.0 / bracket)
}

/// `D = g + alpha d/dchi[(q - chi g) chi R(-chi)]` at fixed `q`.
pub fn rs_distortion(q: f64, chi: f64, cfg: &RsConfig) -> Result<f64> {
    if !(chi >= 0.0) {
        return Err(Error::invalid(format!("chi must be non-negative, got {chi}")));
    }
    let g = cfg.g();
    let alpha = cfg.alpha();
    let sp = &cfg.spectrum;
    let deriv = if sp.is_iid() {
        (q - 2.0 * chi * g) * sp.r_neg(chi)? - chi * (q - chi * g) * sp.r_prime_neg(chi)?
    } else {
        let phi = |c: f64| -> Result<f64> { Ok((q - c * g) * c * sp.r_neg(c)?) };
        let h = 1e-6 * chi.max(1.0);
        if chi >= h {
            (phi(chi + h)? - phi(chi - h)?) / (2.0 * h)
        } else {
            (-3.0 * phi(chi)? + 4.0 * phi(chi + h)? - phi(chi + 2.0 * h)?) / (2.0 * h)
        }
    };
    Ok(g + alpha * deriv)
}

/// Zero-temperature entropy `zeta R(-zeta) - int_0^zeta R(-w) dw`.
pub fn zero_temperature_entropy(zeta: f64, spectrum: &SpectrumModel) -> Result<f64> {
    if !(zeta >= 0.0) {
        return Err(Error::invalid(format!("zeta must be non-negative, got {zeta}")));
    }
    match spectrum {
        SpectrumModel::MarchenkoPasturIid { alpha } => {
            // zeta/(1+zeta) - ln(1+zeta) = sum_{k>=2} (-1)^(k+1) (k-1)/k zeta^k
            let v = if zeta < 0.1 {
                let mut term = zeta;
                let mut sum = 0.0;
                for k in 2..40 {
                    term *= -zeta;
                    sum += term * (k as f64 - 1.0) / k as f64;
                }
                sum
            } else {
                zeta / (1.0 + zeta) - zeta.ln_1p()
            };
            Ok(v.min(0.0) / alpha)
        }
        _ => Ok(zeta * spectrum.r_neg(zeta)? - spectrum.r_integral(zeta)?),
    }
}
