//! Cheapest superhedges built from a convex `ψ ≥ (K2 − y)⁺`.
//!
//! Given `ψ`, the static time-1 position is `φ = ((K1 − x)⁺ − ψ(x))⁺`, the
//! dynamic position between the dates is `θ1 = −ψ'_+` and nothing is held
//! after time 2. Convexity of `ψ` makes `(φ, ψ, θ1)` dominate both exercise
//! payoffs on every path, so the hedge cost bounds every model price.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::leftcurtain::LeftCurtainMap;
use crate::measures::Measure;
use crate::pricing::{PricingSolution, RegionLabel, StrikePair};

/// Pathwise slack tolerated by [`verify_pathwise`].
pub const PATHWISE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PutLeg {
    pub strike: f64,
    pub weight: f64,
}

/// `ψ(y) = Σ w (k − y)⁺ + slope·y + intercept`, kept symbolically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPayoff {
    pub puts: Vec<PutLeg>,
    pub slope: f64,
    pub intercept: f64,
}

impl ConvexPayoff {
    /// Puts only; zero-weight legs are dropped.
    pub fn from_puts(legs: &[(f64, f64)]) -> Self {
        let mut puts: Vec<PutLeg> =
            legs.iter().filter(|(_, w)| *w != 0.0).map(|&(strike, weight)| PutLeg { strike, weight }).collect();
        puts.sort_by(|a, b| a.strike.total_cmp(&b.strike));
        ConvexPayoff { puts, slope: 0.0, intercept: 0.0 }
    }

    pub fn zero() -> Self {
        ConvexPayoff { puts: vec![], slope: 0.0, intercept: 0.0 }
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.puts.iter().map(|p| p.weight * (p.strike - y).max(0.0)).sum::<f64>() + self.slope * y + self.intercept
    }

    /// `ψ'_+(y)`.
    pub fn slope_right(&self, y: f64) -> f64 {
        self.slope - self.puts.iter().filter(|p| p.strike > y).map(|p| p.weight).sum::<f64>()
    }

    /// Slope as `y → −∞`.
    pub fn slope_far_left(&self) -> f64 {
        self.slope - self.puts.iter().map(|p| p.weight).sum::<f64>()
    }

    pub fn strikes(&self) -> impl Iterator<Item = f64> + '_ {
        self.puts.iter().map(|p| p.strike)
    }

    /// `∫ψ dm` from put values of `m`.
    pub fn expectation(&self, m: &Measure) -> f64 {
        self.puts.iter().map(|p| p.weight * m.put(p.strike)).sum::<f64>()
            + self.slope * m.moment()
            + self.intercept * m.mass()
    }

    pub fn check_convex(&self) -> Result<()> {
        match self.puts.iter().find(|p| p.weight < -1e-14 || !p.weight.is_finite() || !p.strike.is_finite()) {
            Some(p) => Err(Error::NotConvex(format!("weight {} at strike {}", p.weight, p.strike))),
            None => Ok(()),
        }
    }

    /// `ψ ≥ (K2 − y)⁺` everywhere: checked at every kink of either side and
    /// on both tails, which suffices for piecewise-linear functions.
    pub fn check_dominates(&self, k2: f64) -> Result<()> {
        let tol = 1e-12 * (1.0 + k2.abs());
        for y in self.strikes().chain([k2]) {
            let margin = self.eval(y) - (k2 - y).max(0.0);
            if margin < -tol {
                return Err(Error::NotDominating { y, margin });
            }
        }
        // left of every kink both sides are lines; the margin must not shrink
        let left = self.slope_far_left();
        if left > -1.0 + 1e-12 {
            return Err(Error::NotDominating { y: f64::NEG_INFINITY, margin: -(left + 1.0) });
        }
        if self.slope < 0.0 {
            return Err(Error::NotDominating { y: f64::INFINITY, margin: self.slope });
        }
        Ok(())
    }
}

/// A superhedge `(φ, ψ, θ1, θ2 = 0)` with `φ` and `θ1` tabulated on the grid
/// of `μ`. `φ` and `θ1` are also available at any point.
#[derive(Debug, Clone, PartialEq)]
pub struct Superhedge {
    pub psi: ConvexPayoff,
    pub strikes: StrikePair,
    pub phi_table: Vec<(f64, f64)>,
    pub theta1_table: Vec<(f64, f64)>,
    pub cost: Option<f64>,
}

#[derive(Serialize)]
struct SuperhedgeJson<'a> {
    psi: &'a [PutLeg],
    psi_affine: (f64, f64),
    phi_table: &'a [(f64, f64)],
    theta1_table: &'a [(f64, f64)],
    cost: Option<f64>,
}

impl Superhedge {
    pub fn phi(&self, x: f64) -> f64 {
        ((self.strikes.k1 - x).max(0.0) - self.psi.eval(x)).max(0.0)
    }

    pub fn theta1(&self, x: f64) -> f64 {
        -self.psi.slope_right(x)
    }

    /// Fill in the cost against `(μ, ν)`.
    pub fn priced(mut self, mu: &Measure, nu: &Measure) -> Self {
        self.cost = Some(hedge_cost(&self, mu, nu));
        self
    }

    /// `{psi, psi_affine, phi_table, theta1_table, cost}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(SuperhedgeJson {
            psi: &self.psi.puts,
            psi_affine: (self.psi.slope, self.psi.intercept),
            phi_table: &self.phi_table,
            theta1_table: &self.theta1_table,
            cost: self.cost,
        })
        .expect("plain data serializes")
    }

    /// Kinks of `φ`: `K1`, the strikes of `ψ` and the zeros of `a − ψ`
    /// between them.
    fn phi_knots(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.psi.strikes().chain([self.strikes.k1]).collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        let h = |x: f64| (self.strikes.k1 - x).max(0.0) - self.psi.eval(x);
        let mut roots = Vec::new();
        let lo = b[0] - 1.0;
        let hi = b[b.len() - 1] + 1.0;
        let ends: Vec<f64> = std::iter::once(lo).chain(b.iter().copied()).chain([hi]).collect();
        for w in ends.windows(2) {
            let (ha, hb) = (h(w[0]), h(w[1]));
            if ha * hb < 0.0 {
                roots.push(w[0] + (w[1] - w[0]) * ha / (ha - hb));
            }
        }
        // a root in the left tail, where a − ψ has slope Σw − 1 ≥ 0
        let (hl, hl2) = (h(b[0]), h(b[0] - 1.0));
        let sl = hl - hl2;
        if sl > 1e-12 && hl * hl2 >= 0.0 {
            let r = b[0] - hl / sl;
            if r < lo {
                roots.push(r);
            }
        }
        b.extend(roots);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// `∫φ dm`, exact for piecewise-linear `φ`.
    pub fn phi_expectation(&self, m: &Measure) -> f64 {
        integrate_piecewise_linear(&self.phi_knots(), |x| self.phi(x), m)
    }
}

/// `∫ h dm` for `h` linear between consecutive `knots` and on both tails,
/// written as an affine part plus puts at the knots.
fn integrate_piecewise_linear(knots: &[f64], h: impl Fn(f64) -> f64, m: &Measure) -> f64 {
    let n = knots.len();
    let v: Vec<f64> = knots.iter().map(|&x| h(x)).collect();
    let left = v[0] - h(knots[0] - 1.0);
    let right = h(knots[n - 1] + 1.0) - v[n - 1];
    let seg: Vec<f64> = (0..n - 1).map(|i| (v[i + 1] - v[i]) / (knots[i + 1] - knots[i])).collect();
    let mut total = (v[n - 1] - right * knots[n - 1]) * m.mass() + right * m.moment();
    for i in 0..n {
        let before = if i == 0 { left } else { seg[i - 1] };
        let after = if i + 1 == n { right } else { seg[i] };
        total += (after - before) * m.put(knots[i]);
    }
    total
}

/// The region's cheapest `ψ`.
pub fn build_psi(sol: &PricingSolution, map: &LeftCurtainMap, k: StrikePair) -> Result<ConvexPayoff> {
    let mismatch = |what: &str| Error::RegionMismatch { expected: what.into(), found: sol.region.to_string() };
    let psi = match sol.region {
        RegionLabel::R => {
            let (f, g) = sol.f_star.zip(sol.g_star).ok_or_else(|| mismatch("R with a critical triple"))?;
            let theta = (k.k2 - f) / (g - f);
            ConvexPayoff::from_puts(&[(g, theta), (f, 1.0 - theta)])
        }
        RegionLabel::B | RegionLabel::DegEuropean => ConvexPayoff::from_puts(&[(k.k2, 1.0)]),
        RegionLabel::W => {
            let (f1, x1) = sol.aux.f_prime.zip(sol.aux.x_prime).ok_or_else(|| mismatch("W with (f', x')"))?;
            let theta = (k.k2 - f1) / (x1 - f1);
            ConvexPayoff::from_puts(&[(x1, theta), (f1, 1.0 - theta)])
        }
        RegionLabel::G => {
            let (f1, x1) = sol.aux.f_prime.zip(sol.aux.x_prime).ok_or_else(|| mismatch("G with (f', x')"))?;
            let (x2, g2) = sol.aux.x_dprime.zip(sol.g_star).ok_or_else(|| mismatch("G with (x'', g(x''))"))?;
            let theta2 = (k.k1 - x2) / (g2 - x2);
            let delta2 = (g2 - x1) * theta2;
            let theta1 = (k.k2 - f1 - delta2) / (x1 - f1);
            ConvexPayoff::from_puts(&[(g2, theta2), (x1, theta1 - theta2), (f1, 1.0 - theta1)])
        }
        RegionLabel::DegIntrinsic => {
            let (lnu, rnu) = map.solver().nu_support();
            if lnu <= k.k2 && k.k2 <= rnu && rnu > lnu {
                let w = (k.k2 - lnu) / (rnu - lnu);
                ConvexPayoff::from_puts(&[(rnu, w), (lnu, 1.0 - w)])
            } else {
                ConvexPayoff::from_puts(&[(k.k2, 1.0)])
            }
        }
    };
    psi.check_convex()?;
    psi.check_dominates(k.k2)?;
    Ok(psi)
}

/// `φ = (a − ψ)⁺`, `θ1 = −ψ'_+`, tabulated on the points of `mu`.
pub fn superhedge_from_psi(psi: ConvexPayoff, k: StrikePair, mu: &Measure) -> Result<Superhedge> {
    psi.check_convex()?;
    psi.check_dominates(k.k2)?;
    let mut h = Superhedge { psi, strikes: k, phi_table: vec![], theta1_table: vec![], cost: None };
    h.phi_table = mu.points().iter().map(|&x| (x, h.phi(x))).collect();
    h.theta1_table = mu.points().iter().map(|&x| (x, h.theta1(x))).collect();
    Ok(h)
}

/// `∫φ dμ + ∫ψ dν`.
pub fn hedge_cost(h: &Superhedge, mu: &Measure, nu: &Measure) -> f64 {
    h.phi_expectation(mu) + h.psi.expectation(nu)
}

/// `hedge_cost − price`.
pub fn duality_gap(sol: &PricingSolution, h: &Superhedge, mu: &Measure, nu: &Measure) -> f64 {
    hedge_cost(h, mu, nu) - sol.price
}

/// Region hedge for a priced strike pair, with its cost.
pub fn superhedge_for(sol: &PricingSolution, map: &LeftCurtainMap, k: StrikePair) -> Result<Superhedge> {
    let psi = build_psi(sol, map, k)?;
    Ok(superhedge_from_psi(psi, k, map.mu())?.priced(map.mu(), map.nu()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Inequality {
    /// Exercise at time 1: `a(x) ≤ φ(x) + ψ(y) + θ1(x)(y − x)`.
    A,
    /// Exercise at time 2: `b(y) ≤ φ(x) + ψ(y)`.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub x: f64,
    pub y: f64,
    pub ineq: Inequality,
    pub margin: f64,
}

/// Outcome of a pathwise check. Reports merge associatively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub checked: usize,
    pub violations: usize,
    /// Smallest margin seen over both inequalities.
    pub worst_margin: f64,
    /// The first violations found, at most [`ViolationReport::KEEP`].
    pub examples: Vec<Violation>,
}

impl Default for ViolationReport {
    fn default() -> Self {
        ViolationReport { checked: 0, violations: 0, worst_margin: f64::INFINITY, examples: vec![] }
    }
}

impl ViolationReport {
    pub const KEEP: usize = 1000;

    pub fn merge(mut self, other: ViolationReport) -> Self {
        self.checked += other.checked;
        self.violations += other.violations;
        self.worst_margin = self.worst_margin.min(other.worst_margin);
        let room = Self::KEEP.saturating_sub(self.examples.len());
        self.examples.extend(other.examples.into_iter().take(room));
        self
    }

    /// `x,y,ineq,margin` rows of the kept violations.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,ineq,margin\n");
        for v in &self.examples {
            let i = match v.ineq {
                Inequality::A => "a",
                Inequality::B => "b",
            };
            out.push_str(&format!("{},{},{},{}\n", v.x, v.y, i, v.margin));
        }
        out
    }
}

fn check_pair(h: &Superhedge, x: f64, y: f64, rep: &mut ViolationReport) {
    let k = h.strikes;
    let phi = h.phi(x);
    let psi = h.psi.eval(y);
    let ma = phi + psi + h.theta1(x) * (y - x) - (k.k1 - x).max(0.0);
    let mb = phi + psi - (k.k2 - y).max(0.0);
    rep.checked += 1;
    for (m, ineq) in [(ma, Inequality::A), (mb, Inequality::B)] {
        rep.worst_margin = rep.worst_margin.min(m);
        if m < -PATHWISE_TOL {
            rep.violations += 1;
            if rep.examples.len() < ViolationReport::KEEP {
                rep.examples.push(Violation { x, y, ineq, margin: m });
            }
        }
    }
}

/// Check both superhedging inequalities on each `(x, y)`.
pub fn verify_pathwise(h: &Superhedge, pairs: &[(f64, f64)]) -> ViolationReport {
    verify_pathwise_with(h, pairs, Exec::default())
}

pub fn verify_pathwise_with(h: &Superhedge, pairs: &[(f64, f64)], exec: Exec) -> ViolationReport {
    const CHUNK: usize = 4096;
    let chunks = pairs.len().div_ceil(CHUNK);
    exec.map(chunks, |c| {
        let mut rep = ViolationReport::default();
        for &(x, y) in &pairs[c * CHUNK..((c + 1) * CHUNK).min(pairs.len())] {
            check_pair(h, x, y, &mut rep);
        }
        rep
    })
    .into_iter()
    .fold(ViolationReport::default(), ViolationReport::merge)
}

/// Corners of the product of the kinks of `φ`, `θ1` and `ψ` with the given
/// grids: enough to certify both inequalities on the grid rectangle.
pub fn corner_pairs(h: &Superhedge, xs: &[f64], ys: &[f64]) -> Vec<(f64, f64)> {
    let mut gx: Vec<f64> = xs.iter().copied().chain(h.phi_knots()).collect();
    let mut gy: Vec<f64> = ys.iter().copied().chain(h.psi.strikes()).chain([h.strikes.k2]).collect();
    for g in [&mut gx, &mut gy] {
        g.sort_by(f64::total_cmp);
        g.dedup();
    }
    gx.iter().flat_map(|&x| gy.iter().map(move |&y| (x, y))).collect()
}
