//! Lorentzian line shapes: detection of candidate lines in a sampled trace
//! and joint least-squares decomposition into a sum of Lorentzians.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::{levenberg_marquardt, LmOptions};

/// Single Lorentzian `h / (1 + ((x − c)/(w/2))²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lorentzian {
    pub center: f64,
    /// Signed peak value.
    pub height: f64,
    /// Full width at half maximum.
    pub fwhm: f64,
}

impl Lorentzian {
    pub fn eval(&self, x: f64) -> f64 {
        let u = 2.0 * (x - self.center) / self.fwhm;
        self.height / (1.0 + u * u)
    }

    /// Signed integral over the real line, `π h w / 2`.
    pub fn area(&self) -> f64 {
        std::f64::consts::FRAC_PI_2 * self.height * self.fwhm
    }
}

/// Detection thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakSearch {
    /// Candidates must exceed this multiple of the estimated noise.
    pub noise_sigmas: f64,
    /// Candidates must exceed this fraction of the largest |y|.
    pub relative_threshold: f64,
    /// Two same-sign candidates merge unless the trace between them falls
    /// below this fraction of the smaller one.
    pub valley_ratio: f64,
    pub max_peaks: usize,
}

impl Default for PeakSearch {
    fn default() -> Self {
        Self {
            noise_sigmas: 5.0,
            relative_threshold: 0.05,
            valley_ratio: 0.9,
            max_peaks: 8,
        }
    }
}

/// Robust noise level from the median absolute first difference.
pub fn estimate_noise(y: &[f64]) -> f64 {
    if y.len() < 3 {
        return 0.0;
    }
    let mut d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    d.sort_by(f64::total_cmp);
    let med = if d.len() % 2 == 1 {
        d[d.len() / 2]
    } else {
        0.5 * (d[d.len() / 2 - 1] + d[d.len() / 2])
    };
    med / (0.674_489_75 * std::f64::consts::SQRT_2)
}

/// Indices of significant local extrema of `y`, strongest first.
pub fn detect_candidates(y: &[f64], opts: &PeakSearch) -> Vec<usize> {
    let n = y.len();
    if n < 3 {
        return Vec::new();
    }
    let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if ymax == 0.0 {
        return Vec::new();
    }
    let thr = (opts.noise_sigmas * estimate_noise(y)).max(opts.relative_threshold * ymax);
    let mut cand: Vec<usize> = (0..n)
        .filter(|&i| {
            let v = y[i];
            if v.abs() < thr {
                return false;
            }
            let left = if i > 0 { y[i - 1] } else { 0.0 };
            let right = if i + 1 < n { y[i + 1] } else { 0.0 };
            if v > 0.0 {
                v >= left && v > right
            } else {
                v <= left && v < right
            }
        })
        .collect();
    let noise_floor = opts.noise_sigmas * estimate_noise(y);
    cand.retain(|&i| prominence(y, i) >= noise_floor);

    let mut merged = true;
    while merged {
        merged = false;
        for k in 1..cand.len() {
            let (a, b) = (cand[k - 1], cand[k]);
            if y[a].signum() != y[b].signum() {
                continue;
            }
            let smaller = y[a].abs().min(y[b].abs());
            let valley = y[a..=b].iter().map(|v| v * y[a].signum()).fold(f64::INFINITY, f64::min);
            if valley > opts.valley_ratio * smaller {
                let drop = if y[a].abs() >= y[b].abs() { k } else { k - 1 };
                cand.remove(drop);
                merged = true;
                break;
            }
        }
    }
    cand.sort_by(|&a, &b| y[b].abs().total_cmp(&y[a].abs()));
    cand.truncate(opts.max_peaks);
    cand
}

/// Height of the extremum at `i` above the higher of the two lowest points
/// separating it from a stronger same-sign sample (or the trace ends).
fn prominence(y: &[f64], i: usize) -> f64 {
    let s = y[i].signum();
    let v = s * y[i];
    let base = |range: &mut dyn Iterator<Item = usize>| {
        let mut low = v;
        for k in range {
            let w = s * y[k];
            if w > v {
                break;
            }
            low = low.min(w);
        }
        low
    };
    let left = base(&mut (0..i).rev());
    let right = base(&mut (i + 1..y.len()));
    v - left.max(right)
}

/// Initial width from the half-maximum crossings around sample `i`.
pub fn half_max_width(x: &[f64], y: &[f64], i: usize) -> f64 {
    let half = y[i] / 2.0;
    let above = |v: f64| v * half.signum() > half.abs();
    let dx = if x.len() > 1 {
        (x[x.len() - 1] - x[0]).abs() / (x.len() - 1) as f64
    } else {
        1.0
    };
    let mut l = i;
    while l > 0 && above(y[l - 1]) {
        l -= 1;
    }
    let mut r = i;
    while r + 1 < y.len() && above(y[r + 1]) {
        r += 1;
    }
    ((x[r] - x[l]).abs() + dx).max(2.0 * dx)
}

/// Sum of Lorentzians evaluated at `x`.
pub fn eval_sum(lines: &[Lorentzian], x: f64) -> f64 {
    lines.iter().map(|l| l.eval(x)).sum()
}

/// Joint least-squares refinement of `initial` against `(x, y)`.
/// Returns the refined lines sorted by center and the residual norm.
pub fn fit_lorentzians(x: &[f64], y: &[f64], initial: &[Lorentzian]) -> Result<(Vec<Lorentzian>, f64)> {
    fit_impl(x, y, initial, None).map(|(lines, _, norm)| (lines, norm))
}

/// Like [`fit_lorentzians`] with an additional constant offset fitted
/// jointly, starting from `baseline`. Returns lines, offset and residual norm.
pub fn fit_lorentzians_with_offset(
    x: &[f64],
    y: &[f64],
    initial: &[Lorentzian],
    baseline: f64,
) -> Result<(Vec<Lorentzian>, f64, f64)> {
    fit_impl(x, y, initial, Some(baseline)).map(|(lines, c, norm)| (lines, c.unwrap_or(0.0), norm))
}

fn fit_impl(
    x: &[f64],
    y: &[f64],
    initial: &[Lorentzian],
    offset: Option<f64>,
) -> Result<(Vec<Lorentzian>, Option<f64>, f64)> {
    if initial.is_empty() && offset.is_none() {
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        return Ok((Vec::new(), None, norm));
    }
    let xmin = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let xmax = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = xmax - xmin;
    let dx = span / (x.len().max(2) - 1) as f64;
    let mut p0 = Vec::with_capacity(3 * initial.len());
    let mut bounds = Vec::with_capacity(3 * initial.len());
    for l in initial {
        p0.extend([l.center, l.height, l.fwhm.clamp(dx / 4.0, 2.0 * span)]);
        bounds.push((xmin - 0.25 * span, xmax + 0.25 * span));
        bounds.push(if l.height >= 0.0 {
            (0.0, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, 0.0)
        });
        bounds.push((dx / 4.0, 2.0 * span));
    }
    let nl = 3 * initial.len();
    if let Some(c) = offset {
        p0.push(c);
        bounds.push((f64::NEG_INFINITY, f64::INFINITY));
    }
    let constant = |p: &DVector<f64>| if p.len() > nl { p[nl] } else { 0.0 };
    let unpack = |p: &DVector<f64>| -> Vec<Lorentzian> {
        (0..nl / 3)
            .map(|k| Lorentzian {
                center: p[3 * k],
                height: p[3 * k + 1],
                fwhm: p[3 * k + 2],
            })
            .collect()
    };
    let residual = |p: &DVector<f64>| {
        let lines = unpack(p);
        let c = constant(p);
        DVector::from_iterator(x.len(), x.iter().zip(y).map(|(&xi, &yi)| eval_sum(&lines, xi) + c - yi))
    };
    let jacobian = |p: &DVector<f64>| {
        let lines = unpack(p);
        let mut j = DMatrix::zeros(x.len(), p.len());
        for (i, &xi) in x.iter().enumerate() {
            for (k, l) in lines.iter().enumerate() {
                let hw = l.fwhm / 2.0;
                let u = (xi - l.center) / hw;
                let den = 1.0 + u * u;
                j[(i, 3 * k)] = l.height * 2.0 * u / (hw * den * den);
                j[(i, 3 * k + 1)] = 1.0 / den;
                j[(i, 3 * k + 2)] = l.height * u * u / (hw * den * den);
            }
            if p.len() > nl {
                j[(i, nl)] = 1.0;
            }
        }
        j
    };
    let opts = LmOptions {
        max_iterations: 500,
        ..LmOptions::default()
    };
    let rep = levenberg_marquardt(residual, Some(jacobian), &p0, &bounds, &opts)?;
    let norm = rep.residual_norm();
    if !rep.converged {
        return Err(Error::FitFailure {
            reason: "Lorentzian decomposition did not converge".into(),
            residual_norm: norm,
        });
    }
    let mut lines = unpack(&rep.params);
    lines.sort_by(|a, b| a.center.total_cmp(&b.center));
    Ok((lines, offset.map(|_| constant(&rep.params)), norm))
}

/// Detects candidate lines and decomposes the trace into Lorentzians.
pub fn find_lorentzians(x: &[f64], y: &[f64], opts: &PeakSearch) -> Result<Vec<Lorentzian>> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput("x and y lengths differ".into()));
    }
    let cand = detect_candidates(y, opts);
    let initial: Vec<Lorentzian> = cand
        .iter()
        .map(|&i| Lorentzian {
            center: x[i],
            height: y[i],
            fwhm: half_max_width(x, y, i),
        })
        .collect();
    fit_lorentzians(x, y, &initial).map(|(l, _)| l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_single_line() {
        let truth = Lorentzian {
            center: 3.3,
            height: -0.7,
            fwhm: 1.5,
        };
        let x: Vec<f64> = (0..200).map(|k| k as f64 * 0.05).collect();
        let y: Vec<f64> = x.iter().map(|&v| truth.eval(v)).collect();
        let lines = find_lorentzians(&x, &y, &PeakSearch::default()).unwrap();
        assert_eq!(lines.len(), 1);
        assert!((lines[0].center - 3.3).abs() < 1e-8);
        assert!((lines[0].height + 0.7).abs() < 1e-8);
        assert!((lines[0].fwhm - 1.5).abs() < 1e-8);
    }

    #[test]
    fn area_closed_form() {
        let l = Lorentzian {
            center: 0.0,
            height: 2.0,
            fwhm: 3.0,
        };
        assert!((l.area() - 3.0 * std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn zero_trace_has_no_candidates() {
        assert!(detect_candidates(&[0.0; 50], &PeakSearch::default()).is_empty());
    }
}
