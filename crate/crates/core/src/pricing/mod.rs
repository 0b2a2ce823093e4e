//! Region classification, the critical triple and the highest model-based
//! expected payoff.
//!
//! For `K2 < K1` inside the support the exercise rule of the left-curtain
//! model is a threshold: stop at time 1 iff `X < t`. Where `K2 > f(K1)` the
//! threshold is the root of the nondecreasing function
//!
//! ```text
//! Λ(x) = (g(x) − K1)/(g(x) − x) − (K1 − K2)/(x − f(x))
//! ```
//!
//! on `[g⁻¹(K1), K1]`. A jump of `f` or `g` at the root is resolved by moving
//! the jumping end inside its gap (region R) unless the jump of `f` crosses
//! mass where `μ ≠ ν`, in which case the hedge needs three puts (region G).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leftcurtain::{LeftCurtainMap, TransportPlan, Triple};

/// Discounted strikes at the two exercise dates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrikePair {
    pub k1: f64,
    pub k2: f64,
}

impl StrikePair {
    pub fn new(k1: f64, k2: f64) -> Self {
        StrikePair { k1, k2 }
    }

    /// Both strikes multiplied by `s`.
    pub fn scaled(self, s: f64) -> Self {
        StrikePair { k1: s * self.k1, k2: s * self.k2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionLabel {
    R,
    B,
    G,
    W,
    #[serde(rename = "DEG_EUROPEAN")]
    DegEuropean,
    #[serde(rename = "DEG_INTRINSIC")]
    DegIntrinsic,
}

impl RegionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::R => "R",
            RegionLabel::B => "B",
            RegionLabel::G => "G",
            RegionLabel::W => "W",
            RegionLabel::DegEuropean => "DEG_EUROPEAN",
            RegionLabel::DegIntrinsic => "DEG_INTRINSIC",
        }
    }
}

impl std::fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `(f', x', x'')` for regions W and G.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Aux {
    pub f_prime: Option<f64>,
    pub x_prime: Option<f64>,
    pub x_dprime: Option<f64>,
}

/// Values of `Λ` on both sides of the root found by bisection; `None`
/// stands for `−∞` (diagonal points or `g < K1`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub lambda_below: Option<f64>,
    pub lambda_above: Option<f64>,
    /// `K1` sits within `1e-6` of the right end of a regeneration pair, where
    /// the grid cannot tell W from B reliably.
    pub near_accumulation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingSolution {
    pub region: RegionLabel,
    pub x_star: Option<f64>,
    pub f_star: Option<f64>,
    pub g_star: Option<f64>,
    pub aux: Aux,
    pub price: f64,
    /// Exercise at time 1 iff `X < threshold`.
    pub threshold: f64,
    pub lambda_f: f64,
    pub lambda_g: f64,
    /// Slope of the line supporting `D` at `f*`; equals `D'(f*)` away from
    /// atoms of `ν`.
    pub slope: f64,
    pub diagnostics: Diagnostics,
}

/// The critical triple with the atom fractions at its ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalTriple {
    pub f: f64,
    pub x: f64,
    pub g: f64,
    pub lambda_f: f64,
    pub lambda_g: f64,
}

/// `Λ` at `x`: equal sides away from jumps of `f` and `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaValue {
    pub left: f64,
    pub right: f64,
}

/// `(g − K1)/(g − x) − (K1 − K2)/(x − f)`.
pub fn upsilon(f: f64, x: f64, g: f64, k: StrikePair) -> Result<f64> {
    if x == f || g == x {
        return Err(Error::DegenerateDenominator);
    }
    Ok((g - k.k1) / (g - x) - (k.k1 - k.k2) / (x - f))
}

/// `Λ` of a solved triple, `−∞` off the domain.
fn lambda_of(t: &Triple, k: StrikePair) -> f64 {
    if t.is_diagonal() || t.g < k.k1 || t.x <= t.f || t.g <= t.x {
        return f64::NEG_INFINITY;
    }
    (t.g - k.k1) / (t.g - t.x) - (k.k1 - k.k2) / (t.x - t.f)
}

/// `Λ(x)` with both one-sided values. Diagonal points give `−∞`.
pub fn lambda_fn(map: &LeftCurtainMap, x: f64, k: StrikePair) -> Result<LambdaValue> {
    let right = map.eval(x);
    if right.g < k.k1 || x > k.k1 {
        return Err(Error::OutOfDomain { x, reason: format!("need g(x) >= {} >= x, have g(x) = {}", k.k1, right.g) });
    }
    let left = map.eval(x.next_down());
    Ok(LambdaValue { left: lambda_of(&left, k), right: lambda_of(&right, k) })
}

/// Region of `k`. A numerical failure while bracketing the root is
/// reported as R, where [`solve_critical`] surfaces the error.
pub fn classify_region(map: &LeftCurtainMap, k: StrikePair) -> RegionLabel {
    analyse(map, k).map(|s| s.region).unwrap_or(RegionLabel::R)
}

/// Critical triple of a strike pair in region R, or `(f', x'', g(x''))` in
/// region G.
pub fn solve_critical(map: &LeftCurtainMap, k: StrikePair) -> Result<CriticalTriple> {
    let s = analyse(map, k)?;
    match (s.f_star, s.x_star, s.g_star) {
        (Some(f), Some(x), Some(g)) => Ok(CriticalTriple { f, x, g, lambda_f: s.lambda_f, lambda_g: s.lambda_g }),
        _ => Err(Error::NoRoot(format!("region {} has no critical triple", s.region))),
    }
}

/// Highest model-based expected payoff with its exercise rule.
pub fn price(map: &LeftCurtainMap, k: StrikePair) -> Result<PricingSolution> {
    analyse(map, k)
}

/// Payoff of the rule "stop at time 1 iff `x < t`" under a discrete plan.
pub fn evaluate_under_plan(plan: &TransportPlan, threshold: f64, k: StrikePair) -> f64 {
    let mut total = 0.0;
    for (&x, &w) in plan.rows.iter().zip(&plan.row_weights) {
        if x < threshold {
            total += w * (k.k1 - x).max(0.0);
        }
    }
    for &(i, j, p) in &plan.entries {
        if plan.rows[i] >= threshold {
            total += p * (k.k2 - plan.cols[j]).max(0.0);
        }
    }
    total
}

fn base(region: RegionLabel, price: f64, threshold: f64) -> PricingSolution {
    PricingSolution {
        region,
        x_star: None,
        f_star: None,
        g_star: None,
        aux: Aux::default(),
        price,
        threshold,
        lambda_f: 0.0,
        lambda_g: 0.0,
        slope: 0.0,
        diagnostics: Diagnostics::default(),
    }
}

const MAX_BISECTIONS: usize = 400;

fn analyse(map: &LeftCurtainMap, k: StrikePair) -> Result<PricingSolution> {
    let (k1, k2) = (k.k1, k.k2);
    if !k1.is_finite() || !k2.is_finite() {
        return Err(Error::OutOfDomain { x: k1, reason: "strikes must be finite".into() });
    }
    let solver = map.solver();
    let (mu, nu) = (map.mu(), map.nu());
    let (lmu, rmu) = solver.mu_support();
    let (lnu, rnu) = solver.nu_support();
    let span = (rnu - lnu).max(f64::MIN_POSITIVE);
    let d = |y: f64| map.d(y);

    if k1 <= k2 || k1 <= lmu {
        return Ok(base(RegionLabel::DegEuropean, nu.put(k2), lmu));
    }
    if k1 >= rnu {
        return Ok(base(RegionLabel::DegIntrinsic, mu.put(k1), k1));
    }

    let at_k1 = map.eval(k1);
    if k1 > rmu && k2 <= lnu {
        // Λ(r_μ) < 0 whenever K2 ≤ ℓ_ν
        return Ok(base(RegionLabel::DegIntrinsic, mu.put(k1), k1));
    }
    if k1 <= rmu && k2 <= at_k1.f {
        let near = map.regeneration_pairs().iter().any(|p| (p.x_prime - k1).abs() < 1e-6 * span);
        let pair = map
            .regeneration_pairs()
            .iter()
            .filter(|p| p.x_prime <= k1 && p.f_prime < k2 && k2 < p.x_prime)
            .max_by(|a, b| a.x_prime.total_cmp(&b.x_prime));
        let mut sol = match pair {
            Some(p) => {
                let theta = (k2 - p.f_prime) / (p.x_prime - p.f_prime);
                let value = mu.put(k1) + theta * d(p.x_prime) + (1.0 - theta) * d(p.f_prime);
                let mut s = base(RegionLabel::W, value, k1);
                s.aux = Aux { f_prime: Some(p.f_prime), x_prime: Some(p.x_prime), x_dprime: None };
                s
            }
            None => base(RegionLabel::B, mu.put(k1) + nu.put(k2) - mu.put(k2), k1),
        };
        sol.diagnostics.near_accumulation = near;
        return Ok(sol);
    }

    // Q(x): g(x) ≥ K1 and Λ(x) ≥ 0; false at ℓ_μ, true at K1, monotone between
    let q = |t: &Triple| lambda_of(t, k) >= 0.0;
    let (mut lo, mut hi) = (lmu, k1);
    if !q(&at_k1) {
        return Err(Error::NoRoot(format!("Λ(K1) = {} is negative", lambda_of(&at_k1, k))));
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if q(&map.eval(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let tl = map.eval(lo);
    let tr = map.eval(hi);
    let lam_lo = lambda_of(&tl, k);
    let lam_hi = lambda_of(&tr, k);
    let diagnostics = Diagnostics {
        lambda_below: lam_lo.is_finite().then_some(lam_lo),
        lambda_above: lam_hi.is_finite().then_some(lam_hi),
        near_accumulation: false,
    };
    if lo > rmu {
        // the root lies right of the support of μ: every path exercises at 1
        let mut s = base(RegionLabel::DegIntrinsic, mu.put(k1), k1);
        s.diagnostics = diagnostics;
        return Ok(s);
    }

    let x = hi.min(rmu);
    let jtol = 1e-9 * span;
    let f_jump = tl.f - tr.f > jtol && !tl.is_diagonal();
    let g_jump = tr.g - tl.g > jtol;
    let g_of = |f: f64| {
        // Υ(f, x, ĝ) = 0
        let r = (k1 - k2) / (x - f);
        (k1 - r * x) / (1.0 - r)
    };
    let f_of = |g: f64| {
        // Υ(f̄, x, g) = 0
        let p = (g - k1) / (g - x);
        x - (k1 - k2) / p
    };

    let r_region = |f: f64, g: f64, t: &Triple| {
        let value = mu.put(x) + (k1 - x) * mu.cdf_left(x) + d(f) + (k2 - f) * t.slope;
        let mut s = base(RegionLabel::R, value, x);
        s.x_star = Some(x);
        s.f_star = Some(f);
        s.g_star = Some(g);
        s.lambda_f = if f == t.f { t.lambda_f } else { 0.0 };
        s.lambda_g = if g == t.g { t.lambda_g } else { 0.0 };
        s.slope = t.slope;
        s.diagnostics = diagnostics;
        s
    };

    if !f_jump {
        if !g_jump {
            return Ok(r_region(tr.f, tr.g, &tr));
        }
        let g = g_of(tr.f).clamp(tl.g.max(k1), tr.g);
        return Ok(r_region(tr.f, g, &tr));
    }

    let eps = 1e-9 * mu.mass().max(nu.mass());
    if solver.table().is_affine_on(tr.f, tl.f, eps) {
        // μ = ν across the jump of f: slide f inside the gap
        if g_jump {
            let g = g_of(tr.f).clamp(tl.g.max(k1), tr.g);
            return Ok(r_region(tr.f, g, &tr));
        }
        let f = f_of(tr.g).clamp(tr.f, tl.f);
        return Ok(r_region(f, tr.g, &tr));
    }

    if lam_hi.abs() <= 1e-12 {
        // on the lower edge of the triangle; R wins the tie
        return Ok(r_region(tr.f, tr.g, &tr));
    }
    let (f1, x1, g1) = (tr.f, tl.f, tr.g);
    let value = mu.put(x) + (k1 - x) * mu.cdf_left(x) + d(f1) + (k2 - f1) * tr.slope;
    let mut s = base(RegionLabel::G, value, x);
    s.x_star = Some(x);
    s.f_star = Some(f1);
    s.g_star = Some(g1);
    s.aux = Aux { f_prime: Some(f1), x_prime: Some(x1), x_dprime: Some(x) };
    s.lambda_f = tr.lambda_f;
    s.lambda_g = tr.lambda_g;
    s.slope = tr.slope;
    s.diagnostics = diagnostics;
    Ok(s)
}
