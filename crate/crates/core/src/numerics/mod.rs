//! Small self-contained numerical routines: scalar root finding and
//! minimization, linear least squares, and a bounded Levenberg–Marquardt
//! solver with covariance estimates.

mod lm;
mod scalar;

pub use lm::{levenberg_marquardt, multi_start, LmOptions, LmReport};
pub use scalar::{brent_root, golden_section_min, linear_least_squares, LinearFit};
