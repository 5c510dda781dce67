//! R-transforms of the channel Gramian `H^H H` (an `N x N` matrix).
//!
//! Two models are provided: the Marchenko-Pastur law of an iid channel with
//! entries of variance `1/N`, and a numerically inverted Stieltjes transform
//! for users spread uniformly over an annulus with distance-dependent path
//! loss.
//!
//! Sign conventions: `G(s) = E[1 / (lambda - s)]`, which is positive for `s`
//! below the spectrum, and `R(-w) = G^{-1}(w) + 1/w`. Replica computations
//! always need the R-transform at non-positive arguments, so model methods
//! take `w >= 0` and return `R(-w)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{self, Pchip};

/// `R(w) = 1 / (alpha (1 - w))` for an iid channel.
pub fn mp_r_transform(w: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(w < 1.0) {
        return Err(Error::Pole { w });
    }
    Ok(1.0 / (alpha * (1.0 - w)))
}

/// Derivative `R'(w) = 1 / (alpha (1 - w)^2)` for an iid channel.
pub fn mp_r_transform_derivative(w: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(w < 1.0) {
        return Err(Error::Pole { w });
    }
    Ok(1.0 / (alpha * (1.0 - w) * (1.0 - w)))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must be positive, got {alpha}")))
    }
}

/// Nodes of the distance-law quadrature.
const DIST_NODES: usize = 64;
/// Below this `w` the R-transform is taken from its first-order expansion.
const W_TAYLOR: f64 = 1e-6;
/// Below this `w` the derivative is interpolated towards its exact value at 0.
const W_DERIV_BLEND: f64 = 1e-2;

/// Channel with per-user large-scale fading `d = (r / r_min)^(-nu)`, users
/// uniform over the annulus `r_min <= r <= kappa_dist * r_min`.
///
/// The closest user has unit loss, so `d` is supported on
/// `[kappa_dist^(-nu), 1]`. `kappa_dist == 1` is the degenerate unit-loss
/// model, which reproduces the iid spectrum.
#[derive(Debug, Clone)]
pub struct PathLossModel {
    pub alpha: f64,
    pub nu: f64,
    pub kappa_dist: f64,
    /// `(d_i, weight_i)` with the weights summing to one.
    dist: Vec<(f64, f64)>,
    grid: Option<Arc<RGrid>>,
}

#[derive(Debug)]
struct RGrid {
    w_max: f64,
    r: Pchip,
    r_prime: Pchip,
}

impl PathLossModel {
    pub fn new(alpha: f64, nu: f64, kappa_dist: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if alpha < 1.0 {
            return Err(Error::invalid("the path-loss spectrum is only inverted for alpha >= 1"));
        }
        if !(nu > 0.0) || !(kappa_dist >= 1.0) || !kappa_dist.is_finite() {
            return Err(Error::invalid(format!(
                "need nu > 0 and kappa_dist >= 1, got nu = {nu}, kappa_dist = {kappa_dist}"
            )));
        }
        let dist = if kappa_dist == 1.0 {
            vec![(1.0, 1.0)]
        } else {
            // r^2 is uniform on [1, kappa^2]; d = (r^2)^(-nu/2).
            let k2 = kappa_dist * kappa_dist;
            let mut nodes = Vec::with_capacity(DIST_NODES);
            numerics::push_mapped(&numerics::gauss_legendre(DIST_NODES), 1.0, k2, &mut nodes);
            nodes
                .into_iter()
                .map(|(t, w)| (t.powf(-0.5 * nu), w / (k2 - 1.0)))
                .collect()
        };
        Ok(PathLossModel {
            alpha,
            nu,
            kappa_dist,
            dist,
            grid: None,
        })
    }

    /// Degenerate model with every user at unit loss.
    pub fn unit(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0, 1.0)
    }

    /// The density `f_d(d) = 2 / (nu (kappa^2 - 1) d^(2/nu + 1))` on
    /// `[kappa^(-nu), 1]` (zero elsewhere).
    pub fn density(&self, d: f64) -> f64 {
        let lo = self.kappa_dist.powf(-self.nu);
        if self.kappa_dist == 1.0 || d < lo || d > 1.0 {
            return 0.0;
        }
        2.0 / (self.nu * (self.kappa_dist.powi(2) - 1.0) * d.powf(2.0 / self.nu + 1.0))
    }

    /// `E[h(d)]` under the distance law.
    pub fn expect(&self, h: impl Fn(f64) -> f64) -> f64 {
        self.dist.iter().map(|&(d, w)| w * h(d)).sum()
    }

    /// Tabulates `R(-w)` and `R'(-w)` on `[0, w_max]` for fast lookups.
    pub fn with_grid(mut self, w_max: f64, points: usize) -> Result<Self> {
        if !(w_max > W_TAYLOR) || points < 8 {
            return Err(Error::invalid("grid needs w_max > 1e-6 and at least 8 points"));
        }
        self.grid = None;
        let mut ws = vec![0.0];
        let (a, b) = (W_TAYLOR.ln(), w_max.ln());
        ws.extend((0..points - 1).map(|i| (a + (b - a) * i as f64 / (points - 2) as f64).exp()));
        let r = ws
            .iter()
            .map(|&w| numeric_r_from_stieltjes(w, &self))
            .collect::<Result<Vec<_>>>()?;
        let rp = ws.iter().map(|&w| self.r_prime_direct(w)).collect::<Result<Vec<_>>>()?;
        self.grid = Some(Arc::new(RGrid {
            w_max,
            r: Pchip::new(ws.clone(), r)?,
            r_prime: Pchip::new(ws, rp)?,
        }));
        Ok(self)
    }

    /// Mean eigenvalue of the Gramian, `R(0) = E[d] / alpha`.
    pub fn mean_eigenvalue(&self) -> f64 {
        self.expect(|d| d) / self.alpha
    }

    /// Eigenvalue variance of the Gramian, `R'(0) = E[d^2] / alpha`.
    pub fn eigenvalue_variance(&self) -> f64 {
        self.expect(|d| d * d) / self.alpha
    }

    /// Stieltjes transform of the `N x N` Gramian and its derivative in `s`.
    fn gramian_stieltjes(&self, s: f64) -> Result<(f64, f64)> {
        let gk = pathloss_stieltjes(s, self)?;
        let a = self.alpha;
        let u = self.expect(|d| d * d / ((a + d * gk) * (a + d * gk)));
        let gk_prime = 1.0 / (1.0 / (gk * gk) - a * u);
        let c = 1.0 - 1.0 / a;
        Ok((gk / a - c / s, gk_prime / a + c / (s * s)))
    }

    fn r_prime_direct(&self, w: f64) -> Result<f64> {
        if w < W_DERIV_BLEND {
            // 1/w^2 - 1/G' cancels badly near the origin; interpolate
            // quadratically between the exact value at 0 and two safe points.
            let r0 = self.eigenvalue_variance();
            let w1 = W_DERIV_BLEND;
            let r1 = self.r_prime_direct(w1)?;
            let r2 = self.r_prime_direct(2.0 * w1)?;
            let t = w / w1;
            return Ok(r0 * (t - 1.0) * (t - 2.0) / 2.0 - r1 * t * (t - 2.0) + r2 * t * (t - 1.0) / 2.0);
        }
        let s = invert_gramian_stieltjes(w, self)?;
        let (_, gp) = self.gramian_stieltjes(s)?;
        Ok(1.0 / (w * w) - 1.0 / gp)
    }
}

/// Solves the fixed-point relation
/// `1/G + s = alpha * E[d / (alpha + d G)]` for the Stieltjes transform of
/// the `K x K` matrix `H H^H` at `s < 0`.
pub fn pathloss_stieltjes(s: f64, model: &PathLossModel) -> Result<f64> {
    if !(s < 0.0) {
        return Err(Error::invalid(format!("Stieltjes argument must be negative, got {s}")));
    }
    let a = model.alpha;
    let t = |g: f64| model.expect(|d| d / (a + d * g));
    let f = |g: f64| Ok(1.0 / g + s - a * t(g));
    // F -> +inf as G -> 0+ and F(1/|s|) = -alpha E[...] < 0.
    let hi = 1.0 / (-s);
    let g = numerics::brent(
        f,
        hi * 1e-14,
        hi,
        hi * 1e-15,
        "solving the path-loss Stieltjes relation",
    )?;
    let residual = ((1.0 / g + s - a * t(g)) * g).abs();
    if !(residual < 1e-10) {
        return Err(Error::NoConvergence {
            what: "path-loss Stieltjes relation".into(),
            iterations: 300,
            residual,
        });
    }
    Ok(g)
}

/// Finds `s < 0` with `G_N(s) = w` for the `N x N` Gramian.
fn invert_gramian_stieltjes(w: f64, model: &PathLossModel) -> Result<f64> {
    let h = |s: f64| model.gramian_stieltjes(s).map(|(g, _)| g - w);
    let (lo_limit, hi_limit) = (-1e6, -1e-9);
    let mut lo = (-1.0 / w).max(lo_limit);
    while h(lo)? > 0.0 {
        if lo <= lo_limit {
            return Err(Error::Bracket {
                what: format!("inverting the Stieltjes transform at w = {w}"),
                lo: lo_limit,
                hi: hi_limit,
            });
        }
        lo = (lo * 4.0).max(lo_limit);
    }
    let mut hi = lo / 2.0;
    while h(hi)? < 0.0 {
        if hi >= hi_limit {
            return Err(Error::Bracket {
                what: format!("inverting the Stieltjes transform at w = {w}"),
                lo: lo_limit,
                hi: hi_limit,
            });
        }
        lo = hi;
        hi = (hi / 4.0).min(hi_limit);
    }
    numerics::bisect(
        h,
        lo,
        hi,
        1e-13 * lo.abs().max(1.0),
        "inverting the Stieltjes transform",
    )
}

/// `R(-w)` of the path-loss Gramian by inverting its Stieltjes transform.
pub fn numeric_r_from_stieltjes(w: f64, model: &PathLossModel) -> Result<f64> {
    if !(w >= 0.0) {
        return Err(Error::invalid(format!("w must be non-negative, got {w}")));
    }
    if w == 0.0 {
        return Ok(model.mean_eigenvalue());
    }
    if w < W_TAYLOR {
        return Ok(model.mean_eigenvalue() - model.eigenvalue_variance() * w);
    }
    let s = invert_gramian_stieltjes(w, model)?;
    Ok(s + 1.0 / w)
}

/// Source of the R-transform used by the replica solvers.
#[derive(Debug, Clone)]
pub enum SpectrumModel {
    MarchenkoPasturIid { alpha: f64 },
    PathLossNumeric(PathLossModel),
}

impl SpectrumModel {
    pub fn iid(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(SpectrumModel::MarchenkoPasturIid { alpha })
    }

    pub fn alpha(&self) -> f64 {
        match self {
            SpectrumModel::MarchenkoPasturIid { alpha } => *alpha,
            SpectrumModel::PathLossNumeric(m) => m.alpha,
        }
    }

    pub fn is_iid(&self) -> bool {
        matches!(self, SpectrumModel::MarchenkoPasturIid { .. })
    }

    /// `R(-w)`.
    pub fn r_neg(&self, w: f64) -> Result<f64> {
        match self {
            SpectrumModel::MarchenkoPasturIid { alpha } => mp_r_transform(-w, *alpha),
            SpectrumModel::PathLossNumeric(m) => match &m.grid {
                Some(g) if (0.0..=g.w_max).contains(&w) => Ok(g.r.eval(w)),
                _ => numeric_r_from_stieltjes(w, m),
            },
        }
    }

    /// `R'(-w)`, the derivative of `R` evaluated at `-w`.
    pub fn r_prime_neg(&self, w: f64) -> Result<f64> {
        match self {
            SpectrumModel::MarchenkoPasturIid { alpha } => mp_r_transform_derivative(-w, *alpha),
            SpectrumModel::PathLossNumeric(m) => {
                if !(w >= 0.0) {
                    return Err(Error::invalid(format!("w must be non-negative, got {w}")));
                }
                match &m.grid {
                    Some(g) if w <= g.w_max => Ok(g.r_prime.eval(w)),
                    _ => m.r_prime_direct(w),
                }
            }
        }
    }

    /// `int_0^zeta R(-w) dw`.
    pub fn r_integral(&self, zeta: f64) -> Result<f64> {
        if !(zeta >= 0.0) {
            return Err(Error::invalid(format!("zeta must be non-negative, got {zeta}")));
        }
        match self {
            SpectrumModel::MarchenkoPasturIid { alpha } => Ok(zeta.ln_1p() / alpha),
            SpectrumModel::PathLossNumeric(_) => {
                let err = std::cell::RefCell::new(None);
                let f = |w: f64| match self.r_neg(w) {
                    Ok(v) => v,
                    Err(e) => {
                        err.borrow_mut().get_or_insert(e);
                        0.0
                    }
                };
                let v = numerics::integrate_adaptive(&f, 0.0, zeta, 1e-10);
                match err.into_inner() {
                    Some(e) => Err(e),
                    None => Ok(v),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mp_rejects_pole() {
        assert!(matches!(mp_r_transform(1.0, 2.0), Err(Error::Pole { .. })));
        assert!(mp_r_transform_derivative(1.5, 2.0).is_err());
        assert!(mp_r_transform(0.0, 0.0).is_err());
    }

    #[test]
    fn density_integrates_to_one() {
        let m = PathLossModel::new(2.0, 2.0, 2.0).unwrap();
        let lo = 2f64.powf(-2.0);
        let mass = numerics::integrate_gl(60, lo, 1.0, |d| m.density(d));
        assert!((mass - 1.0).abs() < 1e-10);
        let mean = numerics::integrate_gl(60, lo, 1.0, |d| d * m.density(d));
        assert!((mean - m.expect(|d| d)).abs() < 1e-10);
    }
}
