use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Root of `f` in `[a, b]` by Brent's method. The bracket must change sign.
pub fn brent_root<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Domain(format!("bracket [{a}, {b}] does not enclose a root")));
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut bisected = true;
    for _ in 0..200 {
        if fb == 0.0 || (b - a).abs() < tol {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let outside = !((s > lo.min(b)) && (s < lo.max(b)));
        let slow = if bisected {
            (s - b).abs() >= (b - c).abs() / 2.0 || (b - c).abs() < tol
        } else {
            (s - b).abs() >= (c - d).abs() / 2.0 || (c - d).abs() < tol
        };
        if outside || slow {
            s = (a + b) / 2.0;
            bisected = true;
        } else {
            bisected = false;
        }
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Ok(b)
}

/// Minimizer of a unimodal `f` on `[a, b]` by golden-section search.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Solution of a weighted linear least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coefficients: DVector<f64>,
    /// Covariance `(XᵀWX)⁻¹`, scaled by the reduced χ² when no absolute
    /// uncertainties were supplied.
    pub covariance: DMatrix<f64>,
    pub residuals: DVector<f64>,
}

/// Weighted least squares for `y ≈ X β`.
///
/// With `sigma = Some(..)` the weights are `1/σ²` and the covariance is
/// absolute; otherwise all weights are one and the covariance is scaled by
/// the residual variance.
pub fn linear_least_squares(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    sigma: Option<&DVector<f64>>,
) -> Result<LinearFit> {
    let (m, n) = design.shape();
    if m < n || y.len() != m {
        return Err(Error::FitFailure {
            reason: format!("{m} observations for {n} coefficients"),
            residual_norm: f64::NAN,
        });
    }
    let w = match sigma {
        Some(s) => {
            if s.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidInput("uncertainties must be positive".into()));
            }
            s.map(|v| 1.0 / (v * v))
        }
        None => DVector::from_element(m, 1.0),
    };
    let sw = w.map(f64::sqrt);
    let xw = DMatrix::from_fn(m, n, |i, j| design[(i, j)] * sw[i]);
    let yw = y.component_mul(&sw);
    let normal = xw.transpose() * &xw;
    let inv = normal.clone().try_inverse().ok_or_else(|| Error::FitFailure {
        reason: "design matrix is rank deficient".into(),
        residual_norm: f64::NAN,
    })?;
    let coefficients = &inv * (xw.transpose() * yw);
    let residuals = y - design * &coefficients;
    let covariance = match sigma {
        Some(_) => inv,
        None => {
            let dof = (m - n).max(1) as f64;
            inv * (residuals.norm_squared() / dof)
        }
    };
    Ok(LinearFit {
        coefficients,
        covariance,
        residuals,
    })
}
