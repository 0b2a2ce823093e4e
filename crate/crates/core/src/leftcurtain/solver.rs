//! Pointwise left-curtain solve.
//!
//! For a fixed `x` let `G_x = P_ν − P_{μ|(−∞,x]}`. Left of `x` this is `D`;
//! right of `x` it is `D(x) + P_ν(k) − P_ν(x) − F_μ(x)(k − x)`, which is
//! convex. The pair `(f(x), g(x))` is where the lower convex envelope of
//! `G_x` has a supporting segment straddling `x`; its slope `s` satisfies the
//! mass and mean balance of the kernel at `x`. When `G_x` itself touches its
//! envelope at `x` the point stays put (`f = g = x`).
//!
//! The slope is found by bisection on `φ(s) = m(s) − c(s)`, the gap between
//! the best supporting lines of slope `s` from the left and from the right
//! of `x`. `φ` is nondecreasing in `s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{check_convex_order, DTable, Measure};

/// `(f, g)` at one abscissa, with the supporting slope and the masses taken
/// from atoms of `ν` at `f` and `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub x: f64,
    pub f: f64,
    pub g: f64,
    /// Slope of the supporting segment (`D'(f)` when `ν` has no atom at `f`).
    pub slope: f64,
    pub lambda_f: f64,
    pub lambda_g: f64,
}

impl Triple {
    pub fn is_diagonal(&self) -> bool {
        self.f == self.x && self.g == self.x
    }

    fn diagonal(x: f64, slope: f64) -> Self {
        Triple { x, f: x, g: x, slope, lambda_f: 0.0, lambda_g: 0.0 }
    }
}

const MAX_BISECTIONS: usize = 200;

/// The two marginals with their `D` table, ready for pointwise solves.
#[derive(Debug, Clone)]
pub struct Solver {
    pub(crate) mu: Measure,
    pub(crate) nu: Measure,
    pub(crate) table: DTable,
    mu_support: (f64, f64),
    nu_support: (f64, f64),
    tol: f64,
}

impl Solver {
    /// Checks convex order and rejects atoms in `μ`.
    pub fn new(mu: &Measure, nu: &Measure) -> Result<Self> {
        if let Some((at, mass)) = mu.max_atom() {
            return Err(Error::AtomsInMu { at, mass });
        }
        let verdict = check_convex_order(mu, nu);
        if let Some(e) = verdict.into_error() {
            return Err(e);
        }
        let mu_support = mu
            .support()
            .ok_or_else(|| Error::InvalidMeasure("the time-1 law has no mass".into()))?;
        let nu_support = nu.support().expect("same mass as mu");
        let span = (nu_support.1 - nu_support.0).max(1.0);
        Ok(Solver {
            mu: mu.clone(),
            nu: nu.clone(),
            table: DTable::new(mu, nu),
            mu_support,
            nu_support,
            tol: 1e-11 * span * nu.mass(),
        })
    }

    pub fn mu(&self) -> &Measure {
        &self.mu
    }

    pub fn nu(&self) -> &Measure {
        &self.nu
    }

    pub fn table(&self) -> &DTable {
        &self.table
    }

    /// `(ℓ_μ, r_μ)`.
    pub fn mu_support(&self) -> (f64, f64) {
        self.mu_support
    }

    /// `(ℓ_ν, r_ν)`.
    pub fn nu_support(&self) -> (f64, f64) {
        self.nu_support
    }

    pub fn d(&self, k: f64) -> f64 {
        self.table.eval(k)
    }

    /// `min_{k ≤ x} D(k) − s k` with its leftmost minimizer.
    fn left_support(&self, x: f64, s: f64) -> (f64, f64) {
        if s < 0.0 {
            return (f64::NEG_INFINITY, f64::NEG_INFINITY);
        }
        let z = self.table.knots();
        let mut best = (f64::INFINITY, x);
        let mut take = |k: f64, v: f64| {
            if v < best.0 || (v == best.0 && k < best.1) {
                best = (v, k);
            }
        };
        let last = self.table.locate(x);
        if let Some(last) = last {
            for j in 0..=last {
                let (d, sl, c) = self.table.coefficients_or_tail(j);
                take(z[j], d - s * z[j]);
                if c > 0.0 {
                    let t = (s - sl) / c;
                    let hi = if j + 1 < z.len() { z[j + 1].min(x) - z[j] } else { x - z[j] };
                    if t > 0.0 && t < hi {
                        let k = z[j] + t;
                        take(k, d + sl * t + 0.5 * c * t * t - s * k);
                    }
                }
            }
        }
        take(x, self.table.eval(x) - s * x);
        (best.0, best.1)
    }

    /// Right end of the stretch after `f` on which `D` is linear with slope
    /// `s`. Every point there touches the supporting line; the ones left of
    /// the end carry mass already kept on the diagonal.
    fn end_of_flat(&self, mut f: f64, x: f64, s: f64) -> f64 {
        let z = self.table.knots();
        let eps = 1e-12 * self.mu.mass();
        let Some(mut j) = self.table.locate(f) else { return f };
        while j + 1 < z.len() && z[j + 1] <= x {
            let (_, sl, c) = self.table.coefficients(j);
            let w = z[j + 1] - z[j];
            let slope_at_f = sl + c * (f - z[j]);
            if c.abs() * w > eps || (slope_at_f - s).abs() > eps {
                break;
            }
            f = z[j + 1];
            j += 1;
        }
        f
    }

    /// `min_{k ≥ x} G_x(k) − s k` and its minimizer.
    fn right_support(&self, x: f64, s: f64, fx: f64, dx: f64, px: f64) -> (f64, f64) {
        let q = s + fx;
        let g = if q <= 0.0 {
            x
        } else {
            self.nu.quantile(q).unwrap_or(self.nu_support.1).max(x)
        };
        (dx + self.nu.put(g) - px - fx * (g - x) - s * g, g)
    }

    /// Solve at `x`.
    pub fn solve(&self, x: f64) -> Triple {
        let (lmu, rmu) = self.mu_support;
        let (lnu, rnu) = self.nu_support;
        if x <= lmu || x >= rnu {
            return Triple::diagonal(x, self.table.slope_right(x));
        }
        if x > rmu {
            // outside the range of μ the envelope is flat between ℓ_ν and r_ν
            let lambda_f = self.table.slope_right(lnu).clamp(0.0, self.nu.atom_at(lnu));
            let lambda_g = (self.nu.mass() - self.nu.cdf_left(rnu)).clamp(0.0, self.nu.atom_at(rnu));
            return Triple { x, f: lnu, g: rnu, slope: 0.0, lambda_f, lambda_g };
        }
        let fx = self.mu.cdf(x);
        let near_end = 1e-12 * self.mu.mass();
        if self.mu.mass() - fx < near_end {
            // the slope bracket collapses as μ runs out and every zero of D
            // becomes a contact point; report the left limit instead
            let xb = self.mu.quantile(self.mu.mass() - near_end).unwrap_or(x).min(x);
            if xb < x {
                let t = self.solve(xb);
                return if t.is_diagonal() { Triple::diagonal(x, t.slope) } else { Triple { x, ..t } };
            }
        }
        let dx = self.table.eval(x);
        let px = self.nu.put(x);
        let mut s0 = self.nu.cdf(x) - fx;
        if s0 < 0.0 && s0 > -1e-12 * self.nu.mass() {
            // cancellation in F_ν − F_μ where the two agree
            s0 = 0.0;
        }
        let phi = |s: f64| self.left_support(x, s).0 - self.right_support(x, s, fx, dx, px).0;
        if phi(s0) >= -self.tol {
            return Triple::diagonal(x, s0);
        }
        let mut lo = s0;
        let mut hi = (self.nu.mass() - fx).max(s0);
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if phi(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let s = hi;
        let (_, mut f) = self.left_support(x, s);
        f = self.end_of_flat(f, x, s);
        let (_, mut g) = self.right_support(x, s, fx, dx, px);
        f = f.clamp(lnu, x);
        g = g.clamp(x, rnu);
        if g == x {
            // the whole kernel lands on x
            return Triple::diagonal(x, s);
        }
        let lambda_f = (self.table.slope_right(f) - s).clamp(0.0, self.nu.atom_at(f));
        let lambda_g = (s + fx - self.nu.cdf_left(g)).clamp(0.0, self.nu.atom_at(g));
        Triple { x, f, g, slope: s, lambda_f, lambda_g }
    }

    /// Residuals of the mass and mean balance at a solved triple,
    /// `μ((f,x]) = ν((f,g)) + λ_f + λ_g` and
    /// `∫_{(f,x]} y dμ = ∫_{(f,g)} y dν + λ_f f + λ_g g`.
    ///
    /// Both follow from tangency at `f` and `g` plus the chord condition, so
    /// they hold whether or not part of `ν` on `(f, g)` was used earlier.
    pub fn residuals(&self, t: &Triple) -> (f64, f64) {
        if t.is_diagonal() {
            return (0.0, 0.0);
        }
        let (mu, nu) = (&self.mu, &self.nu);
        let mass = (mu.cdf(t.x) - mu.cdf(t.f)) - (nu.cdf_left(t.g) - nu.cdf(t.f)) - t.lambda_f - t.lambda_g;
        let mean = (mu.moment_below(t.x) - mu.moment_below(t.f))
            - (nu.moment_below_left(t.g) - nu.moment_below(t.f))
            - t.lambda_f * t.f
            - t.lambda_g * t.g;
        (mass, mean)
    }
}
