use serde::{Deserialize, Serialize};

use super::measure::Measure;
use crate::error::{Error, Result};

/// Tolerances used by the convex-order machinery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Allowed difference in total mass and in barycentre.
    pub mass_mean: f64,
    /// Allowed negative excursion of `D`.
    pub d_positive: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { mass_mean: 1e-10, d_positive: 1e-10 }
    }
}

/// `D = P_ν − P_μ` held exactly as a piecewise quadratic on the merged knots.
///
/// On `[z_j, z_{j+1})` we have `D(z_j + t) = d_j + s_j t + c_j t² / 2`, where
/// `s_j` is the right slope `F_ν − F_μ` at `z_j` and `c_j` the difference of
/// the two densities on the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DTable {
    z: Vec<f64>,
    d: Vec<f64>,
    slope: Vec<f64>,
    curv: Vec<f64>,
}

impl DTable {
    /// Built without any compatibility checks; see [`d_function`].
    pub fn new(mu: &Measure, nu: &Measure) -> Self {
        let mut z: Vec<f64> = mu.points().iter().chain(nu.points()).copied().collect();
        z.sort_by(f64::total_cmp);
        z.dedup();
        let d: Vec<f64> = z.iter().map(|&k| nu.put(k) - mu.put(k)).collect();
        let slope: Vec<f64> = z.iter().map(|&k| nu.cdf(k) - mu.cdf(k)).collect();
        let curv: Vec<f64> = z
            .windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                nu.density_at(m) - mu.density_at(m)
            })
            .collect();
        DTable { z, d, slope, curv }
    }

    pub fn knots(&self) -> &[f64] {
        &self.z
    }

    /// Number of cells between consecutive knots.
    pub fn cells(&self) -> usize {
        self.curv.len()
    }

    /// Cell `j` as `(z_j, z_{j+1})`.
    pub fn cell(&self, j: usize) -> (f64, f64) {
        (self.z[j], self.z[j + 1])
    }

    /// `(d_j, s_j, c_j)` of cell `j`.
    pub fn coefficients(&self, j: usize) -> (f64, f64, f64) {
        (self.d[j], self.slope[j], self.curv[j])
    }

    /// Like [`DTable::coefficients`] but also valid at the last knot, where
    /// `D` continues linearly.
    pub fn coefficients_or_tail(&self, j: usize) -> (f64, f64, f64) {
        (self.d[j], self.slope[j], self.curv.get(j).copied().unwrap_or(0.0))
    }

    /// Value at knot `j`.
    pub fn d_at_knot(&self, j: usize) -> f64 {
        self.d[j]
    }

    /// Right slope at knot `j`.
    pub fn slope_at_knot(&self, j: usize) -> f64 {
        self.slope[j]
    }

    /// Index of the knot starting the cell that contains `k` (right-closed
    /// at knots), or `None` left of all knots.
    pub fn locate(&self, k: f64) -> Option<usize> {
        self.z.partition_point(|&p| p <= k).checked_sub(1)
    }

    pub fn eval(&self, k: f64) -> f64 {
        let Some(j) = self.locate(k) else { return 0.0 };
        let t = k - self.z[j];
        let c = self.curv.get(j).copied().unwrap_or(0.0);
        self.d[j] + self.slope[j] * t + 0.5 * c * t * t
    }

    /// Right derivative `D'(k+)`.
    pub fn slope_right(&self, k: f64) -> f64 {
        let Some(j) = self.locate(k) else { return 0.0 };
        let c = self.curv.get(j).copied().unwrap_or(0.0);
        self.slope[j] + c * (k - self.z[j])
    }

    /// Left derivative `D'(k−)`.
    pub fn slope_left(&self, k: f64) -> f64 {
        let Some(j) = self.z.partition_point(|&p| p < k).checked_sub(1) else { return 0.0 };
        let c = self.curv.get(j).copied().unwrap_or(0.0);
        self.slope[j] + c * (k - self.z[j])
    }

    /// Whether `D` is affine on `[a, b]`: no curvature on the cells inside
    /// and no slope jump at interior knots, both up to `eps`.
    pub fn is_affine_on(&self, a: f64, b: f64, eps: f64) -> bool {
        let first = self.z.partition_point(|&p| p <= a);
        let last = self.z.partition_point(|&p| p < b);
        if first > last {
            // inside a single cell
            return first == 0 || self.curv.get(first - 1).is_none_or(|c| c.abs() * (b - a) <= eps);
        }
        let cell_ok = |j: usize| self.curv.get(j).is_none_or(|c| c.abs() * (self.z[j + 1] - self.z[j]) <= eps);
        if first > 0 && !cell_ok(first - 1) {
            return false;
        }
        (first..last).all(|j| cell_ok(j) && (self.slope_right(self.z[j]) - self.slope_left(self.z[j])).abs() <= eps)
    }

    /// Minimum of `D` over the real line with a minimizer. Candidates are the
    /// knots and the stationary points of strictly convex cells.
    pub fn minimum(&self) -> (f64, f64) {
        let mut best = (0.0, self.z.first().copied().unwrap_or(0.0));
        let mut consider = |k: f64, v: f64| {
            if v < best.0 {
                best = (v, k);
            }
        };
        for j in 0..self.z.len() {
            consider(self.z[j], self.d[j]);
            if j < self.curv.len() && self.curv[j] > 0.0 {
                let t = -self.slope[j] / self.curv[j];
                if t > 0.0 && t < self.z[j + 1] - self.z[j] {
                    consider(self.z[j] + t, self.eval(self.z[j] + t));
                }
            }
        }
        (best.1, best.0)
    }

    /// Maximal open intervals on which `D > tol`.
    pub fn positive_set(&self, tol: f64) -> Vec<(f64, f64)> {
        let mut pieces: Vec<(f64, f64)> = Vec::new();
        let mut push = |a: f64, b: f64| {
            if a < b {
                match pieces.last_mut() {
                    Some(last) if last.1 >= a => last.1 = last.1.max(b),
                    _ => pieces.push((a, b)),
                }
            }
        };
        for j in 0..self.curv.len() {
            let (lo, hi) = self.cell(j);
            let h = hi - lo;
            let (a, b, c) = (0.5 * self.curv[j], self.slope[j], self.d[j] - tol);
            // roots of a t² + b t + c within (0, h) split the cell
            let mut cuts = vec![0.0];
            for r in quadratic_roots(a, b, c) {
                if r > 0.0 && r < h {
                    cuts.push(r);
                }
            }
            cuts.push(h);
            cuts.sort_by(f64::total_cmp);
            for w in cuts.windows(2) {
                let m = 0.5 * (w[0] + w[1]);
                if a * m * m + b * m + c > 0.0 {
                    push(lo + w[0], lo + w[1]);
                }
            }
        }
        pieces
    }
}

/// Real roots of `a t² + b t + c`, computed stably.
pub(crate) fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b != 0.0 { vec![-c / b] } else { vec![] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

fn compatible(mu: &Measure, nu: &Measure, tol: f64) -> Result<()> {
    let (bm, bn) = (mu.barycentre().unwrap_or(0.0), nu.barycentre().unwrap_or(0.0));
    if (mu.mass() - nu.mass()).abs() > tol || (bm - bn).abs() > tol {
        return Err(Error::BarycentreMismatch { mass_mu: mu.mass(), mass_nu: nu.mass(), bar_mu: bm, bar_nu: bn });
    }
    Ok(())
}

/// `D(k) = P_ν(k) − P_μ(k)` for laws of equal mass and barycentre.
pub fn d_function(mu: &Measure, nu: &Measure, k: f64) -> Result<f64> {
    compatible(mu, nu, Tolerances::default().mass_mean)?;
    Ok(nu.put(k) - mu.put(k))
}

/// Outcome of a convex-order test.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    /// `μ ≤cx ν`; `min_d` is the smallest value of `D`.
    Holds { min_d: f64 },
    /// Total masses or barycentres differ.
    Mismatch { mass_mu: f64, mass_nu: f64, bar_mu: f64, bar_nu: f64 },
    /// `D(k) = d < 0` at the minimizer `k`.
    FailsAt { k: f64, d: f64 },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds { .. })
    }

    pub fn into_error(self) -> Option<Error> {
        match self {
            Verdict::Holds { .. } => None,
            Verdict::Mismatch { mass_mu, mass_nu, bar_mu, bar_nu } => {
                Some(Error::BarycentreMismatch { mass_mu, mass_nu, bar_mu, bar_nu })
            }
            Verdict::FailsAt { k, d } => Some(Error::ConvexOrderViolated { k, d }),
        }
    }
}

pub fn check_convex_order(mu: &Measure, nu: &Measure) -> Verdict {
    check_convex_order_with(mu, nu, Tolerances::default())
}

pub fn check_convex_order_with(mu: &Measure, nu: &Measure, tol: Tolerances) -> Verdict {
    if let Err(Error::BarycentreMismatch { mass_mu, mass_nu, bar_mu, bar_nu }) = compatible(mu, nu, tol.mass_mean) {
        return Verdict::Mismatch { mass_mu, mass_nu, bar_mu, bar_nu };
    }
    let (k, d) = DTable::new(mu, nu).minimum();
    if d < -tol.d_positive {
        Verdict::FailsAt { k, d }
    } else {
        Verdict::Holds { min_d: d }
    }
}

/// Where the problem splits and where `μ` exceeds `ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessStructure {
    /// Maximal open intervals with `D > tol`. No martingale transport
    /// crosses their endpoints.
    pub irreducible: Vec<(f64, f64)>,
    /// Maximal intervals on which the density of `μ` exceeds that of `ν`.
    pub excess: Vec<(f64, f64)>,
}

impl ExcessStructure {
    /// Component containing `x`, if any.
    pub fn component_of(&self, x: f64) -> Option<(f64, f64)> {
        self.irreducible.iter().copied().find(|&(a, b)| a < x && x < b)
    }
}

pub fn irreducible_components(mu: &Measure, nu: &Measure) -> Result<ExcessStructure> {
    match check_convex_order(mu, nu) {
        Verdict::Holds { .. } => {}
        v => return Err(v.into_error().expect("failing verdict")),
    }
    let table = DTable::new(mu, nu);
    let tol = 1e-10 * nu.mass().max(f64::MIN_POSITIVE);
    let irreducible = table.positive_set(tol);

    let peak = (0..table.cells())
        .map(|j| table.coefficients(j).2.abs())
        .fold(0.0f64, f64::max);
    let eps = 1e-9 * peak;
    let mut excess: Vec<(f64, f64)> = Vec::new();
    for j in 0..table.cells() {
        if table.coefficients(j).2 < -eps {
            let (a, b) = table.cell(j);
            match excess.last_mut() {
                Some(last) if last.1 == a => last.1 = b,
                _ => excess.push((a, b)),
            }
        }
    }
    Ok(ExcessStructure { irreducible, excess })
}
