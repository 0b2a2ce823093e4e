//! The left-curtain martingale coupling.
//!
//! [`LeftCurtainMap`] holds the two functions `f ≤ id ≤ g`; a point at `x`
//! moves to `f(x)` or `g(x)` with the probabilities of [`TwoPoint`].
//! [`TransportPlan`] is the matching discrete coupling of grid versions of the
//! marginals, and [`reverse_construct_nu`] runs the construction backwards.

mod kernel;
mod map;
mod ode;
mod plan;
mod reverse;
mod solver;

pub use kernel::{coupling_kernel, TwoPoint};
pub use map::{AtomSplit, BuildOptions, Jump, LeftCurtainMap, MapSidecar, MonotonicityReport, RegenPair};
pub use ode::{build_by_ode, OdeOptions};
pub use plan::{discretize_pair, to_transport_plan, PlanResiduals, TransportPlan};
pub use reverse::{reverse_construct_nu, FunctionTable};
pub use solver::{Solver, Triple};

/// Convenience wrapper around [`LeftCurtainMap::build`].
pub fn build_left_curtain(mu: &crate::measures::Measure, nu: &crate::measures::Measure) -> crate::Result<LeftCurtainMap> {
    LeftCurtainMap::build(mu, nu)
}
