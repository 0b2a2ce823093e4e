use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid put curve: {0}")]
    NonConvexCurve(String),
    #[error("mass or barycentre mismatch: mass {mass_mu} vs {mass_nu}, barycentre {bar_mu} vs {bar_nu}")]
    BarycentreMismatch {
        mass_mu: f64,
        mass_nu: f64,
        bar_mu: f64,
        bar_nu: f64,
    },
    #[error("convex order fails at k = {k} (D = {d:e})")]
    ConvexOrderViolated { k: f64, d: f64 },
    #[error("the time-1 law has an atom of mass {mass} at {at}; only atomless laws are supported")]
    AtomsInMu { at: f64, mass: f64 },
    #[error("root-find did not converge at x = {x} (residual {residual:e})")]
    NoConvergence { x: f64, residual: f64 },
    #[error("dispersion condition fails near f = {f}: density gap {gap:e}")]
    DispersionViolated { f: f64, gap: f64 },
    #[error("function pair is not monotone: {0}")]
    MonotonicityViolated(String),
    #[error("transport plan residual {residual:e} too large at row {row}")]
    ResidualTooLarge { row: usize, residual: f64 },
    #[error("point {x} is outside the domain of Lambda: {reason}")]
    OutOfDomain { x: f64, reason: String },
    #[error("degenerate denominator in Upsilon")]
    DegenerateDenominator,
    #[error("no root of Lambda: {0}")]
    NoRoot(String),
    #[error("payoff is not convex: {0}")]
    NotConvex(String),
    #[error("payoff does not dominate the time-2 put: margin {margin:e} at y = {y}")]
    NotDominating { y: f64, margin: f64 },
    #[error("hedge requested for region {found}, expected {expected}")]
    RegionMismatch { expected: String, found: String },
    #[error("LP size {rows}x{cols} exceeds the cap {cap}")]
    SizeCap { rows: usize, cols: usize, cap: usize },
    #[error("LP is infeasible (phase-one residual {0:e}); the marginals are not in convex order")]
    Infeasible(f64),
    #[error("LP is unbounded")]
    Unbounded,
    #[error("numerical breakdown in the simplex: {0}")]
    NumericalBreakdown(String),
}

impl Error {
    /// Numerical failures are distinguished from bad input by the CLI.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::NoRoot(_)
                | Error::NumericalBreakdown(_)
                | Error::ResidualTooLarge { .. }
                | Error::Unbounded
        )
    }

    /// Failures that mean the two laws are not in convex order.
    pub fn is_convex_order(&self) -> bool {
        matches!(
            self,
            Error::ConvexOrderViolated { .. } | Error::BarycentreMismatch { .. } | Error::Infeasible(_)
        )
    }
}
