use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("integration failure at t = {t}: non-finite derivative at state {state:?}")]
    IntegrationFailure { t: f64, state: Vec<f64> },

    #[error("invalid bracket: need g({t_lo}) = {g_lo} > 0 and g({t_hi}) = {g_hi} <= 0")]
    InvalidBracket {
        t_lo: f64,
        g_lo: f64,
        t_hi: f64,
        g_hi: f64,
    },

    #[error("radius {r} below singularity floor {floor} (crash into central body)")]
    Singularity { r: f64, floor: f64 },

    #[error("escape orbit: specific energy {energy} is not negative")]
    EscapeOrbit { energy: f64 },

    #[error("rectilinear orbit: angular momentum {momentum} below floor")]
    Rectilinear { momentum: f64 },

    #[error("radius {r} unreachable on an orbit with semi-major axis {a}")]
    UnreachableRadius { r: f64, a: f64 },

    #[error("safety filter infeasible: constraint coefficient is zero and rhs = {rhs} > 0")]
    FilterInfeasible { rhs: f64 },

    #[error("safeguarding controller infeasible at r = {r}: {reason}")]
    ControllerInfeasible { r: f64, reason: String },

    #[error("curve fit failed: {0}")]
    Fit(String),

    #[error("MIET bound estimation failed: {0}")]
    Bound(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
