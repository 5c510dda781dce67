//! Small numerical building blocks: quadrature rules, scalar root finding,
//! one-dimensional maximization, monotone interpolation and Gaussian special
//! functions.

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use errorfunctions::RealErrorFunctions;
use gauss_quad::{GaussHermite, GaussLegendre};

use crate::error::{Error, Result};

/// Nodes and weights on `[-1, 1]`.
pub type Rule = Arc<Vec<(f64, f64)>>;

fn cached(kind: u8, n: usize, build: impl FnOnce() -> Vec<(f64, f64)>) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<(u8, usize), Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().expect("rule cache poisoned").get(&(kind, n)) {
        return r.clone();
    }
    let rule = Arc::new(build());
    cache
        .lock()
        .expect("rule cache poisoned")
        .insert((kind, n), rule.clone());
    rule
}

/// Gauss-Legendre rule with `n` nodes on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    let n = n.max(1);
    cached(0, n, || {
        GaussLegendre::new(NonZeroUsize::new(n).unwrap())
            .as_node_weight_pairs()
            .to_vec()
    })
}

/// Gauss-Hermite rule for the weight `exp(-x^2)` on the real line.
pub fn gauss_hermite(n: usize) -> Rule {
    let n = n.max(1);
    cached(1, n, || {
        GaussHermite::new(NonZeroUsize::new(n).unwrap())
            .as_node_weight_pairs()
            .to_vec()
    })
}

/// Nodes and weights for `E[f(Z)]` with `Z ~ N(0, 1)`.
pub fn std_normal_rule(n: usize) -> Vec<(f64, f64)> {
    gauss_hermite(n)
        .iter()
        .map(|&(x, w)| (SQRT_2 * x, w / PI.sqrt()))
        .collect()
}

/// Gauss-Legendre rule mapped to `[a, b]` and appended to `out`.
pub fn push_mapped(rule: &[(f64, f64)], a: f64, b: f64, out: &mut Vec<(f64, f64)>) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    out.extend(rule.iter().map(|&(x, w)| (mid + half * x, half * w)));
}

/// Fixed-order Gauss-Legendre integral of `f` over `[a, b]`.
pub fn integrate_gl(n: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    gauss_legendre(n)
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Adaptive Gauss-Legendre integration (10 vs 20 nodes per panel, bisection
/// of panels that disagree).
pub fn integrate_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let coarse = integrate_gl(10, a, b, f);
        let fine = integrate_gl(20, a, b, f);
        if (fine - coarse).abs() <= tol || depth >= 40 {
            return fine;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    if a == b {
        return 0.0;
    }
    rec(f, a, b, tol, 0)
}

/// Bisection for a root of `f` on `[lo, hi]`; `f(lo)` and `f(hi)` must differ
/// in sign. Stops when the bracket is narrower than `tol`.
pub fn bisect(mut f: impl FnMut(f64) -> Result<f64>, mut lo: f64, mut hi: f64, tol: f64, what: &str) -> Result<f64> {
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Bracket {
            what: what.to_string(),
            lo,
            hi,
        });
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol {
            return Ok(mid);
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Brent's method on a sign-changing bracket.
pub fn brent(mut f: impl FnMut(f64) -> Result<f64>, a: f64, b: f64, tol: f64, what: &str) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket {
            what: what.to_string(),
            lo: a,
            hi: b,
        });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..300 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b)?;
    }
    Err(Error::NoConvergence {
        what: what.to_string(),
        iterations: 300,
        residual: fb.abs(),
    })
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
/// Returns `(argmax, max)`.
pub fn golden_max(mut f: impl FnMut(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc > fd { (c, fc) } else { (d, fd) })
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// `x` must be strictly increasing with at least two points.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n || x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "interpolation grid must be strictly increasing with matching lengths",
            ));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
            let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if s.signum() != d0.signum() {
                0.0
            } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
                3.0 * d0
            } else {
                s
            }
        };
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            d[0] = end(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Pchip { x, y, d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    /// Evaluates the interpolant; arguments outside the grid are clamped.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let t = t.clamp(self.x[0], self.x[n - 1]);
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

/// Scaled complementary error function `exp(x^2) erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    RealErrorFunctions::erfcx(x)
}

pub fn erfc(x: f64) -> f64 {
    RealErrorFunctions::erfc(x)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Gaussian tail `Q(x) = P(Z > x)`.
pub fn q_func(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// `ln Phi(x)`, accurate deep into the lower tail.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x > -1.0 {
        norm_cdf(x).ln()
    } else {
        (0.5 * erfcx(-x / SQRT_2)).ln() - 0.5 * x * x
    }
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}
