//! Numerical LSE precoders for concrete channel instances.
//!
//! Every precoder minimizes `||H v - sqrt(gamma) u||^2 + lambda ||v||^2` over
//! `v` in `X^N`. For constant-modulus alphabets the penalty is a constant and
//! is dropped.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::replica_core::Constellation;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// A concrete precoding problem.
#[derive(Debug, Clone)]
pub struct PrecodingInstance {
    /// `K x N` channel.
    pub h: CMatrix,
    /// Length-`K` data vector.
    pub u: CVector,
    pub gamma: f64,
    pub lambda: f64,
    pub constellation: Constellation,
}

impl PrecodingInstance {
    pub fn new(h: CMatrix, u: CVector, gamma: f64, lambda: f64, constellation: Constellation) -> Result<Self> {
        let inst = PrecodingInstance {
            h,
            u,
            gamma,
            lambda,
            constellation,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.h.nrows() == 0 || self.h.ncols() == 0 {
            return Err(Error::invalid("channel must have K >= 1 rows and N >= 1 columns"));
        }
        if self.u.len() != self.h.nrows() {
            return Err(Error::invalid(format!(
                "data length {} does not match K = {}",
                self.u.len(),
                self.h.nrows()
            )));
        }
        if !(self.gamma >= 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::invalid("need gamma >= 0 and lambda >= 0"));
        }
        self.constellation.validate()
    }

    pub fn k(&self) -> usize {
        self.h.nrows()
    }

    pub fn n(&self) -> usize {
        self.h.ncols()
    }

    /// `sqrt(gamma) u`.
    pub fn target(&self) -> CVector {
        &self.u * Complex64::from(self.gamma.sqrt())
    }

    /// Penalty weight actually in effect.
    pub fn effective_lambda(&self) -> f64 {
        if self.constellation.is_constant_modulus() {
            0.0
        } else {
            self.lambda
        }
    }

    /// `||H v - sqrt(gamma) u||^2 + lambda ||v||^2`.
    pub fn objective(&self, v: &CVector) -> f64 {
        (&self.h * v - self.target()).norm_squared() + self.effective_lambda() * v.norm_squared()
    }
}

/// Output of a precoder.
#[derive(Debug, Clone, Serialize)]
pub struct PrecodeResult {
    #[serde(skip)]
    pub v: CVector,
    pub objective: f64,
    pub iterations: usize,
    pub restarts_used: usize,
    pub converged: bool,
}

/// Per-user distortion `||H v - sqrt(gamma) u||^2 / K` of one instance.
pub fn empirical_distortion(h: &CMatrix, u: &CVector, v: &CVector, gamma: f64) -> f64 {
    (h * v - u * Complex64::from(gamma.sqrt())).norm_squared() / h.nrows() as f64
}

/// Linear RZF precoder `v = sqrt(gamma) H^H (H H^H + lambda I)^{-1} u`.
pub fn rzf_precode(inst: &PrecodingInstance) -> Result<PrecodeResult> {
    inst.validate()?;
    if inst.constellation != Constellation::FullComplex {
        return Err(Error::invalid("RZF precoding needs the full complex plane"));
    }
    let k = inst.k();
    let a = &inst.h * inst.h.adjoint() + CMatrix::identity(k, k) * Complex64::from(inst.lambda);
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Domain("H H^H + lambda I is singular; use lambda > 0".into()))?;
    let x = chol.solve(&inst.target());
    let v = inst.h.ad_mul(&x);
    Ok(PrecodeResult {
        objective: inst.objective(&v),
        v,
        iterations: 1,
        restarts_used: 0,
        converged: true,
    })
}

/// Largest squared singular value of `h` by power iteration on `H^H H`.
pub fn spectral_norm_sq(h: &CMatrix, tol: f64) -> f64 {
    let n = h.ncols();
    let mut x = CVector::from_element(n, Complex64::from(1.0 / (n as f64).sqrt()));
    // A fixed, non-symmetric start avoids orthogonality to the top vector.
    for (i, xi) in x.iter_mut().enumerate() {
        *xi *= Complex64::new(1.0, 0.37 * (i as f64 + 1.0).sin());
    }
    let nx = x.norm();
    x /= Complex64::from(nx);
    let mut est = 0.0;
    for _ in 0..10_000 {
        let y = h.ad_mul(&(h * &x));
        let ny = y.norm();
        if ny == 0.0 {
            return 0.0;
        }
        let new = ny;
        x = y / Complex64::from(ny);
        if (new - est).abs() <= tol * new {
            return new;
        }
        est = new;
    }
    est
}

#[derive(Debug, Clone)]
pub struct PgOptions {
    /// Step size; defaults to `1 / L` with `L = 2 (lambda + sigma_max^2)`.
    pub step: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PgOptions {
    fn default() -> Self {
        PgOptions {
            step: None,
            tol: 1e-10,
            max_iter: 5000,
        }
    }
}

fn project_all(x: &Constellation, v: &mut CVector) {
    for vi in v.iter_mut() {
        *vi = x.project(*vi);
    }
}

/// Gradient `2 (H^H (H v - b) + lambda v)` of the objective.
fn gradient(inst: &PrecodingInstance, v: &CVector, b: &CVector) -> CVector {
    (inst.h.ad_mul(&(&inst.h * v - b)) + v * Complex64::from(inst.lambda)) * Complex64::from(2.0)
}

/// Projected-gradient precoder for convex sets (full plane or disk).
pub fn precode_projected_gradient(inst: &PrecodingInstance, opts: &PgOptions) -> Result<PrecodeResult> {
    inst.validate()?;
    if !inst.constellation.is_convex() {
        return Err(Error::invalid("projected gradient needs a convex output set"));
    }
    let step = match opts.step {
        Some(s) if s > 0.0 => s,
        Some(_) => return Err(Error::invalid("step must be positive")),
        None => 1.0 / (2.0 * (inst.lambda + spectral_norm_sq(&inst.h, 1e-8))),
    };
    let b = inst.target();
    let mut v = CVector::zeros(inst.n());
    let mut obj = inst.objective(&v);
    for it in 0..opts.max_iter {
        let mut next = &v - gradient(inst, &v, &b) * Complex64::from(step);
        project_all(&inst.constellation, &mut next);
        let next_obj = inst.objective(&next);
        let change = obj - next_obj;
        v = next;
        let prev = obj;
        obj = next_obj;
        if change.abs() <= opts.tol * prev.max(f64::MIN_POSITIVE) {
            return Ok(PrecodeResult {
                v,
                objective: obj,
                iterations: it + 1,
                restarts_used: 0,
                converged: true,
            });
        }
    }
    Ok(PrecodeResult {
        v,
        objective: obj,
        iterations: opts.max_iter,
        restarts_used: 0,
        converged: false,
    })
}

/// Norm of `v - P(v - step * grad)`, zero exactly at a minimizer over a convex set.
pub fn projected_gradient_residual(inst: &PrecodingInstance, v: &CVector, step: f64) -> f64 {
    let b = inst.target();
    let mut next = v - gradient(inst, v, &b) * Complex64::from(step);
    project_all(&inst.constellation, &mut next);
    (v - next).norm()
}

#[derive(Debug, Clone)]
pub struct CdOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_sweeps: usize,
}

impl Default for CdOptions {
    fn default() -> Self {
        CdOptions {
            restarts: 10,
            seed: 0,
            max_sweeps: 10_000,
        }
    }
}

/// Uniform random point of the alphabet.
pub fn random_symbol<R: Rng>(x: &Constellation, rng: &mut R) -> Complex64 {
    use std::f64::consts::PI;
    match *x {
        Constellation::FullComplex => Complex64::new(0.0, 0.0),
        Constellation::Disk { peak } => {
            Complex64::from_polar((peak * rng.random::<f64>()).sqrt(), 2.0 * PI * rng.random::<f64>())
        }
        Constellation::Circle { power } => Complex64::from_polar(power.sqrt(), 2.0 * PI * rng.random::<f64>()),
        Constellation::Mpsk { m, p } => {
            let k = rng.random_range(0..m);
            Complex64::from_polar(p.sqrt(), 2.0 * PI * k as f64 / m as f64)
        }
    }
}

/// One coordinate-descent run from `v`; returns `(objective, sweeps, converged)`.
fn cd_run(inst: &PrecodingInstance, v: &mut CVector, col_norms: &[f64], max_sweeps: usize) -> (f64, usize, bool) {
    let x = &inst.constellation;
    let lambda = inst.effective_lambda();
    let discrete = matches!(x, Constellation::Mpsk { .. });
    let mut e = inst.target() - &inst.h * &*v;
    let mut obj = e.norm_squared() + lambda * v.norm_squared();
    for sweep in 0..max_sweeps {
        let mut changed = false;
        for i in 0..inst.n() {
            if col_norms[i] == 0.0 {
                continue;
            }
            let col = inst.h.column(i);
            let old = v[i];
            // r = e + h_i v_i; xhat = h_i^H r / (||h_i||^2 + lambda)
            let xhat = (col.dotc(&e) + old * col_norms[i]) / (col_norms[i] + lambda);
            let new = if xhat == Complex64::new(0.0, 0.0) && matches!(x, Constellation::Circle { .. }) {
                old
            } else {
                x.project(xhat)
            };
            if new != old {
                e.axpy(old - new, &col, Complex64::new(1.0, 0.0));
                v[i] = new;
                changed = true;
            }
        }
        let new_obj = e.norm_squared() + lambda * v.norm_squared();
        let done = if discrete {
            !changed
        } else {
            (obj - new_obj).abs() <= 1e-10 * obj.max(f64::MIN_POSITIVE)
        };
        obj = new_obj;
        if done {
            return (inst.objective(v), sweep + 1, true);
        }
    }
    (inst.objective(v), max_sweeps, false)
}

/// Cyclic coordinate descent with random restarts; the best run is returned.
pub fn precode_coordinate_descent(inst: &PrecodingInstance, opts: &CdOptions) -> Result<PrecodeResult> {
    inst.validate()?;
    if inst.constellation == Constellation::FullComplex {
        return Err(Error::invalid(
            "use RZF or projected gradient for the full complex plane",
        ));
    }
    let restarts = opts.restarts.max(1);
    let col_norms: Vec<f64> = (0..inst.n()).map(|i| inst.h.column(i).norm_squared()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<PrecodeResult> = None;
    let mut total = 0;
    for _ in 0..restarts {
        let mut v = CVector::from_fn(inst.n(), |_, _| random_symbol(&inst.constellation, &mut rng));
        let (obj, sweeps, converged) = cd_run(inst, &mut v, &col_norms, opts.max_sweeps);
        total += sweeps;
        if best.as_ref().is_none_or(|b| obj < b.objective) {
            best = Some(PrecodeResult {
                v,
                objective: obj,
                iterations: 0,
                restarts_used: restarts,
                converged,
            });
        }
    }
    let mut best = best.expect("at least one restart");
    best.iterations = total;
    Ok(best)
}

/// Global minimizer over `M-PSK^N` by enumeration in lexicographic order of
/// the symbol indices (first coordinate most significant); ties keep the
/// earliest candidate.
pub fn exhaustive_oracle(inst: &PrecodingInstance, limit: u64) -> Result<PrecodeResult> {
    use std::f64::consts::PI;
    inst.validate()?;
    let Constellation::Mpsk { m, p } = inst.constellation else {
        return Err(Error::invalid("exhaustive search needs an M-PSK alphabet"));
    };
    let n = inst.n();
    let count = (m as u64).checked_pow(n as u32).filter(|&c| c <= limit);
    let Some(count) = count else {
        return Err(Error::Limit(format!("{m}^{n} candidates exceed the limit of {limit}")));
    };
    let points: Vec<Complex64> = (0..m)
        .map(|k| Complex64::from_polar(p.sqrt(), 2.0 * PI * k as f64 / m as f64))
        .collect();
    let b = inst.target();
    let mut idx = vec![0usize; n];
    let mut v = CVector::from_element(n, points[0]);
    let mut e = &b - &inst.h * &v;
    let mut best_obj = e.norm_squared();
    let mut best_idx = idx.clone();
    let one = Complex64::new(1.0, 0.0);
    for step in 1..count {
        // odometer increment on the last coordinate
        let mut j = n - 1;
        loop {
            let old = v[j];
            idx[j] = (idx[j] + 1) % m;
            v[j] = points[idx[j]];
            e.axpy(old - v[j], &inst.h.column(j), one);
            if idx[j] != 0 || j == 0 {
                break;
            }
            j -= 1;
        }
        if step % 4096 == 0 {
            e = &b - &inst.h * &v;
        }
        let obj = e.norm_squared();
        if obj < best_obj {
            best_obj = obj;
            best_idx.copy_from_slice(&idx);
        }
    }
    let v = CVector::from_fn(n, |i, _| points[best_idx[i]]);
    Ok(PrecodeResult {
        objective: inst.objective(&v),
        v,
        iterations: count as usize,
        restarts_used: 0,
        converged: true,
    })
}
