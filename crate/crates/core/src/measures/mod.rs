//! One-dimensional measures, put potentials and convex order.

mod convex;
mod curve;
mod measure;
mod spec;

pub use convex::{
    check_convex_order, check_convex_order_with, d_function, irreducible_components, DTable, ExcessStructure,
    Tolerances, Verdict,
};
pub use curve::{measures_from_put_curves, PutCurve};
pub use measure::{Measure, MeasureKind, Piece};
pub use spec::{measure_from_json, MeasureSpec, DEFAULT_GRID, DEFAULT_TAIL};

/// `P_η(k) = ∫ (k − x)⁺ dη(x)`.
pub fn put_value(eta: &Measure, k: f64) -> f64 {
    eta.put(k)
}

/// `(η restricted to (c, d), the rest)`.
pub fn restrict(eta: &Measure, c: f64, d: f64) -> crate::Result<(Measure, Measure)> {
    eta.restrict(c, d)
}

/// The continuous-law gate: every atom of `μ` must be at most `5 / n`,
/// with `n` the number of grid points.
pub fn passes_atom_cap(mu: &Measure) -> bool {
    let n = mu.len().max(1) as f64;
    mu.atoms().iter().all(|&a| a <= 5.0 / n * mu.mass().max(1.0))
}
