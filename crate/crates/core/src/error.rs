//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by simulation, calibration and fitting operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A closed form is evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The lower singlet branch never meets T⁺ for the given Zeeman energy.
    #[error("no ST+ crossing: Zeeman energy {zeeman_uev} ueV does not exceed t_c = {t_c_uev} ueV")]
    NoCrossing { zeeman_uev: f64, t_c_uev: f64 },

    /// The requested resonance would need a non-positive external field.
    #[error("resonance field {field_t} T is not reachable")]
    UnreachableField { field_t: f64 },

    /// The generator has more than one stationary state.
    #[error("steady state is not unique: kernel dimension {dimension}")]
    Multiplicity { dimension: usize },

    /// The generator has no numerically resolvable kernel.
    #[error("generator has no steady state")]
    NoSteadyState,

    /// A least-squares problem failed to converge or is not identifiable.
    #[error("fit failed: {reason} (residual norm {residual_norm})")]
    FitFailure { reason: String, residual_norm: f64 },

    /// A calibration row carries no usable reference peak.
    #[error("missing reference peak in row at B = {field_t} T")]
    MissingReference { field_t: f64 },

    /// A requested resonance line does not exist in the search range.
    #[error("unresolvable line: {0}")]
    UnresolvableLine(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
