use serde::{Deserialize, Serialize};

use super::map::LeftCurtainMap;
use crate::error::{Error, Result};
use crate::measures::{check_convex_order, Measure};

/// A martingale coupling of two atomic laws stored as sparse rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub rows: Vec<f64>,
    pub row_weights: Vec<f64>,
    pub cols: Vec<f64>,
    pub col_weights: Vec<f64>,
    /// `(i, j, π_ij)` sorted by row, then column.
    pub entries: Vec<(usize, usize, f64)>,
}

/// Marginal and martingale residuals of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanResiduals {
    pub row_mass: f64,
    pub col_mass: f64,
    /// `max_i |Σ_j π_ij (y_j − x_i)| / μ_i`.
    pub martingale: f64,
    pub worst_row: usize,
}

/// Grid versions for the discrete coupling: cells of `μ` collapse to their
/// barycentres and cells of `ν` split to their endpoints. The first step
/// contracts and the second dilates in convex order, so `μ_d ≤cx ν_d`.
pub fn discretize_pair(mu: &Measure, nu: &Measure) -> Result<(Measure, Measure)> {
    Ok((mu.collapse_cells()?, nu.split_cells()?))
}

/// Discrete left-curtain plan for the marginals of `map`.
/// When `μ = ν` the plan is the identity on the collapsed grid, so paths
/// never move.
pub fn to_transport_plan(map: &LeftCurtainMap) -> Result<TransportPlan> {
    if map.mu() == map.nu() {
        return Ok(TransportPlan::identity(&map.mu().collapse_cells()?));
    }
    let (mu, nu) = discretize_pair(map.mu(), map.nu())?;
    TransportPlan::left_curtain(&mu, &nu)
}

impl TransportPlan {
    /// Left-curtain coupling of two atomic laws in convex order, built by
    /// taking, for each atom of `μ` from left to right, its shadow in what
    /// remains of `ν`: the quantile window of the right mass whose mean is
    /// the atom's location.
    pub fn left_curtain(mu: &Measure, nu: &Measure) -> Result<Self> {
        let mu = mu.split_cells()?;
        let nu = nu.split_cells()?;
        if let Some(e) = check_convex_order(&mu, &nu).into_error() {
            return Err(e);
        }
        let (rows, row_weights): (Vec<f64>, Vec<f64>) =
            mu.points().iter().zip(mu.atoms()).filter(|(_, &w)| w > 0.0).map(|(&x, &w)| (x, w)).unzip();
        let (cols, col_weights): (Vec<f64>, Vec<f64>) =
            nu.points().iter().zip(nu.atoms()).filter(|(_, &w)| w > 0.0).map(|(&x, &w)| (x, w)).unzip();
        let mut rem = col_weights.clone();
        let mut entries = Vec::new();
        for (i, (&x, &w)) in rows.iter().zip(&row_weights).enumerate() {
            for (j, v) in shadow_slice(&cols, &rem, x, w) {
                rem[j] = (rem[j] - v).max(0.0);
                entries.push((i, j, v));
            }
        }
        let plan = TransportPlan { rows, row_weights, cols, col_weights, entries };
        let r = plan.residuals();
        let scale = plan.row_weights.iter().sum::<f64>().max(1.0);
        let worst = r.row_mass.max(r.col_mass).max(r.martingale);
        if worst > 1e-10 * scale {
            return Err(Error::ResidualTooLarge { row: r.worst_row, residual: worst });
        }
        Ok(plan)
    }

    /// Identity coupling of an atomic law with itself.
    pub fn identity(mu: &Measure) -> Self {
        let (rows, row_weights): (Vec<f64>, Vec<f64>) =
            mu.points().iter().zip(mu.atoms()).filter(|(_, &w)| w > 0.0).map(|(&x, &w)| (x, w)).unzip();
        let entries = row_weights.iter().enumerate().map(|(i, &w)| (i, i, w)).collect();
        TransportPlan { cols: rows.clone(), col_weights: row_weights.clone(), rows, row_weights, entries }
    }

    pub fn residuals(&self) -> PlanResiduals {
        let mut rs = vec![0.0; self.rows.len()];
        let mut cs = vec![0.0; self.cols.len()];
        let mut mm = vec![0.0; self.rows.len()];
        for &(i, j, v) in &self.entries {
            rs[i] += v;
            cs[j] += v;
            mm[i] += v * (self.cols[j] - self.rows[i]);
        }
        let row_mass = rs.iter().zip(&self.row_weights).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let col_mass = cs.iter().zip(&self.col_weights).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let (mut martingale, mut worst_row) = (0.0, 0);
        for (i, m) in mm.iter().enumerate() {
            let r = m.abs() / self.row_weights[i];
            if r > martingale {
                martingale = r;
                worst_row = i;
            }
        }
        PlanResiduals { row_mass, col_mass, martingale, worst_row }
    }

    /// Mass moving across `x0` in either direction.
    pub fn cross_mass(&self, x0: f64) -> f64 {
        self.entries
            .iter()
            .filter(|&&(i, j, _)| {
                let (x, y) = (self.rows[i], self.cols[j]);
                (x < x0 && y > x0) || (x > x0 && y < x0)
            })
            .map(|e| e.2)
            .sum()
    }

    /// `Σ π_ij h(x_i, y_j)`.
    pub fn expect(&self, h: impl Fn(f64, f64) -> f64) -> f64 {
        self.entries.iter().map(|&(i, j, v)| v * h(self.rows[i], self.cols[j])).sum()
    }

    /// Column law as a measure.
    pub fn col_measure(&self) -> Result<Measure> {
        let mut w = vec![0.0; self.cols.len()];
        for &(_, j, v) in &self.entries {
            w[j] += v;
        }
        Measure::atomic(self.cols.clone(), w)
    }

    /// Sparse `i,j,weight` triplets.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,weight\n");
        for &(i, j, v) in &self.entries {
            out.push_str(&format!("{i},{j},{v}\n"));
        }
        out
    }
}

/// The window of `rem` (in quantile order) with mass `w` and mean `x`, as
/// `(column, mass)` pieces.
fn shadow_slice(cols: &[f64], rem: &[f64], x: f64, w: f64) -> Vec<(usize, f64)> {
    let active: Vec<usize> = (0..rem.len()).filter(|&j| rem[j] > 0.0).collect();
    let mut cum = Vec::with_capacity(active.len() + 1);
    let mut mom = Vec::with_capacity(active.len() + 1);
    cum.push(0.0);
    mom.push(0.0);
    for &j in &active {
        cum.push(cum.last().unwrap() + rem[j]);
        mom.push(mom.last().unwrap() + rem[j] * cols[j]);
    }
    let total = *cum.last().unwrap();
    let w = w.min(total);
    // first moment of the quantile function on [0, t]
    let integral = |t: f64| {
        let k = cum.partition_point(|&c| c < t).clamp(1, active.len());
        mom[k - 1] + (t - cum[k - 1]) * cols[active[k - 1]]
    };
    let window = |u: f64| integral(u + w) - integral(u);
    let target = w * x;
    let (mut lo, mut hi) = (0.0, (total - w).max(0.0));
    if window(lo) >= target {
        hi = lo;
    } else if window(hi) <= target {
        lo = hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if window(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // the window moment is linear between breakpoints; interpolate the
    // final bracket instead of trusting the last midpoint
    let (mlo, mhi) = (window(lo), window(hi));
    let u = if mhi > mlo { lo + (target - mlo) / (mhi - mlo) * (hi - lo) } else { lo };
    let u = u.clamp(lo, hi);
    let (a, b) = (u, u + w);
    let mut out = Vec::new();
    for (k, &j) in active.iter().enumerate() {
        let v = cum[k + 1].min(b) - cum[k].max(a);
        if v > 0.0 {
            out.push((j, v.min(rem[j])));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_plan() {
        let mu = Measure::from_pairs(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let nu = Measure::from_pairs(&[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]).unwrap();
        let p = TransportPlan::left_curtain(&mu, &nu).unwrap();
        let r = p.residuals();
        assert!(r.row_mass < 1e-15 && r.col_mass < 1e-15 && r.martingale < 1e-15);
        let mut dense = [[0.0; 3]; 2];
        for &(i, j, v) in &p.entries {
            dense[i][j] = v;
        }
        assert_eq!(dense, [[0.25, 0.25, 0.0], [0.0, 0.25, 0.25]]);
    }

    #[test]
    fn identity_when_equal() {
        let mu = Measure::from_pairs(&[(-1.0, 0.3), (0.5, 0.2), (1.0, 0.5)]).unwrap();
        let p = TransportPlan::left_curtain(&mu, &mu).unwrap();
        assert!(p.entries.iter().all(|&(i, j, _)| i == j));
    }

    #[test]
    fn uniform_plan_marginals() {
        let mu = Measure::uniform(-1.0, 1.0, 100).unwrap();
        let nu = Measure::uniform(-2.0, 2.0, 200).unwrap();
        let (a, b) = discretize_pair(&mu, &nu).unwrap();
        let p = TransportPlan::left_curtain(&a, &b).unwrap();
        let r = p.residuals();
        assert!(r.row_mass < 1e-12 && r.col_mass < 1e-12 && r.martingale < 1e-10, "{r:?}");
    }
}
