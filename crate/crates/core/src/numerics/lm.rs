use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Stopping rules and damping schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative cost decrease below which the iteration stops.
    pub cost_tol: f64,
    /// Relative parameter step below which the iteration stops.
    pub step_tol: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            cost_tol: 1e-15,
            step_tol: 1e-12,
            initial_damping: 1e-3,
        }
    }
}

/// Outcome of a Levenberg–Marquardt run.
#[derive(Debug, Clone, PartialEq)]
pub struct LmReport {
    pub params: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub jacobian: DMatrix<f64>,
    /// Unscaled covariance `(JᵀJ)⁻¹` at the solution.
    pub covariance: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LmReport {
    /// Residual norm `√cost`.
    pub fn residual_norm(&self) -> f64 {
        self.cost.sqrt()
    }

    /// Covariance scaled by the reduced χ² of the fit.
    pub fn scaled_covariance(&self) -> DMatrix<f64> {
        let m = self.residuals.len();
        let n = self.params.len();
        let dof = m.saturating_sub(n).max(1) as f64;
        &self.covariance * (self.cost / dof)
    }
}

fn numeric_jacobian<F>(f: &mut F, x: &DVector<f64>, r0: &DVector<f64>, bounds: &[(f64, f64)]) -> DMatrix<f64>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let m = r0.len();
    let n = x.len();
    let mut j = DMatrix::zeros(m, n);
    for k in 0..n {
        let h = 1e-7 * x[k].abs().max(1e-4);
        let (lo, hi) = bounds[k];
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] = (x[k] + h).min(hi);
        xm[k] = (x[k] - h).max(lo);
        let span = xp[k] - xm[k];
        if span <= 0.0 {
            continue;
        }
        let rp = f(&xp);
        let rm = if xm[k] == x[k] { r0.clone() } else { f(&xm) };
        j.set_column(k, &((rp - rm) / span));
    }
    j
}

fn clamp(x: &mut DVector<f64>, bounds: &[(f64, f64)]) {
    for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Bounded Levenberg–Marquardt minimization of `Σ r_i(x)²`.
///
/// `jacobian` may be `None`, in which case central differences are used.
/// Steps are projected onto the box `bounds`. Fails with
/// [`Error::FitFailure`] when the Jacobian at the solution is rank
/// deficient or residuals become non-finite.
pub fn levenberg_marquardt<F, J>(
    mut residual: F,
    mut jacobian: Option<J>,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &LmOptions,
) -> Result<LmReport>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
    J: FnMut(&DVector<f64>) -> DMatrix<f64>,
{
    let n = x0.len();
    if bounds.len() != n {
        return Err(Error::InvalidInput("bounds length differs from parameter count".into()));
    }
    let mut x = DVector::from_column_slice(x0);
    clamp(&mut x, bounds);
    let mut r = residual(&x);
    if r.len() < n {
        return Err(Error::FitFailure {
            reason: format!("{} residuals for {} parameters", r.len(), n),
            residual_norm: r.norm(),
        });
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailure {
            reason: "non-finite residuals at the starting point".into(),
            residual_norm: f64::NAN,
        });
    }
    let mut cost = r.norm_squared();
    let mut lambda = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = match jacobian.as_mut() {
        Some(jf) => jf(&x),
        None => numeric_jacobian(&mut residual, &x, &r, bounds),
    };

    while iterations < opts.max_iterations {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        if g.amax() < 1e-300 {
            converged = true;
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let mut trial = &x + &step;
            clamp(&mut trial, bounds);
            let rt = residual(&trial);
            let ct = rt.norm_squared();
            if ct.is_finite() && ct <= cost {
                let dx = (&trial - &x).norm();
                let rel_cost = (cost - ct) / cost.max(1e-300);
                x = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel_cost < opts.cost_tol || dx < opts.step_tol * (x.norm() + opts.step_tol) {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        jac = match jacobian.as_mut() {
            Some(jf) => jf(&x),
            None => numeric_jacobian(&mut residual, &x, &r, bounds),
        };
        if !accepted {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    let jtj = jac.transpose() * &jac;
    let covariance = invert_normal(&jtj).ok_or_else(|| Error::FitFailure {
        reason: "parameters are not identifiable (singular normal matrix)".into(),
        residual_norm: cost.sqrt(),
    })?;
    Ok(LmReport {
        params: x,
        residuals: r,
        cost,
        jacobian: jac,
        covariance,
        iterations,
        converged,
    })
}

fn invert_normal(jtj: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = jtj.nrows();
    let scale: Vec<f64> = (0..n).map(|k| jtj[(k, k)].sqrt()).collect();
    if scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return None;
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| jtj[(i, j)] / (scale[i] * scale[j]));
    let svd = scaled.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-12 * smax {
        return None;
    }
    let inv = scaled.try_inverse()?;
    Some(DMatrix::from_fn(n, n, |i, j| inv[(i, j)] / (scale[i] * scale[j])))
}

/// Runs [`levenberg_marquardt`] from each start and keeps the lowest cost.
pub fn multi_start<F>(mut residual: F, starts: &[Vec<f64>], bounds: &[(f64, f64)], opts: &LmOptions) -> Result<LmReport>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let mut best: Option<LmReport> = None;
    let mut last_err = None;
    for s in starts {
        match levenberg_marquardt(
            &mut residual,
            None::<fn(&DVector<f64>) -> DMatrix<f64>>,
            s,
            bounds,
            opts,
        ) {
            Ok(rep) => {
                if best.as_ref().is_none_or(|b| rep.cost < b.cost) {
                    best = Some(rep);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| {
        last_err.unwrap_or(Error::FitFailure {
            reason: "no starting points".into(),
            residual_norm: f64::NAN,
        })
    })
}
