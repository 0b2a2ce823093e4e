use std::fmt;

use robust_amput::Error;

/// Failures grouped by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, files or laws: exit 2.
    Input(String),
    /// The laws are not in convex order: exit 3.
    ConvexOrder(String),
    /// A solver or construction failed numerically: exit 4.
    Numerical(String),
    /// `verify` ran but a gate failed: exit 5.
    Gate(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::ConvexOrder(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Gate(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::ConvexOrder(m) => write!(f, "not in convex order: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Gate(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        if e.is_convex_order() {
            CliError::ConvexOrder(msg)
        } else if e.is_numerical()
            || matches!(
                e,
                Error::NotConvex(_)
                    | Error::NotDominating { .. }
                    | Error::RegionMismatch { .. }
                    | Error::DegenerateDenominator
                    | Error::DispersionViolated { .. }
            )
        {
            CliError::Numerical(msg)
        } else {
            CliError::Input(msg)
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
