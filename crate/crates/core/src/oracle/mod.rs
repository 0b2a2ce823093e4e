//! Brute-force bracket of the price on atomic marginals.
//!
//! Mass `q_ij` at `x_i` is stopped at time 1 and still carried to `y_j`;
//! mass `r_ij` continues. Both sub-couplings must be martingales row by row,
//! and together they must have the two marginals. Maximizing
//! `Σ q_ij (K1 − x_i)⁺ + Σ r_ij (K2 − y_j)⁺` relaxes the choice of a
//! stopping rule (an atom may be split between stopping and continuing), so
//! the value dominates every plan-and-threshold payoff and is dominated by
//! every superhedge cost on the same data.

mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hedging::Superhedge;
use crate::leftcurtain::{LeftCurtainMap, TransportPlan};
use crate::measures::Measure;
use crate::pricing::{evaluate_under_plan, StrikePair};

pub use simplex::OPT_TOL;
use simplex::{Columns, Outcome};

/// Default bound on `n·m`.
pub const DEFAULT_CAP: usize = 200 * 200;

/// The relaxed primal on atoms `x_i` (weights `μ_i`) and `y_j` (weights `ν_j`).
///
/// Variables are ordered `q_00, q_01, …, q_(n−1)(m−1), r_00, …`. Rows are the
/// `n` row sums, the `m` column sums, then `n` martingale rows for `q` and
/// `n` for `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedPrimalLP {
    pub xs: Vec<f64>,
    pub mu: Vec<f64>,
    pub ys: Vec<f64>,
    pub nu: Vec<f64>,
    pub strikes: StrikePair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    /// Nonzero `(i, j, q_ij, r_ij)`.
    pub entries: Vec<(usize, usize, f64, f64)>,
    pub iterations: usize,
    pub bland_engaged: bool,
    /// Largest constraint violation of the reported point.
    pub max_residual: f64,
    pub min_reduced_cost: f64,
}

impl LpSolution {
    /// `i,j,q,r` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,q,r\n");
        for &(i, j, q, r) in &self.entries {
            out.push_str(&format!("{i},{j},{q},{r}\n"));
        }
        out
    }
}

fn atoms_of(m: &Measure, what: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    if m.cells().iter().any(|&c| c > 0.0) {
        return Err(Error::InvalidMeasure(format!("the oracle needs an atomic {what} law; discretize first")));
    }
    Ok(m.points().iter().zip(m.atoms()).filter(|(_, &w)| w > 0.0).map(|(&x, &w)| (x, w)).unzip())
}

pub fn build_lp(mu: &Measure, nu: &Measure, k: StrikePair) -> Result<RelaxedPrimalLP> {
    build_lp_capped(mu, nu, k, DEFAULT_CAP)
}

pub fn build_lp_capped(mu: &Measure, nu: &Measure, k: StrikePair, cap: usize) -> Result<RelaxedPrimalLP> {
    let (xs, mw) = atoms_of(mu, "time-1")?;
    let (ys, nw) = atoms_of(nu, "time-2")?;
    if xs.len() * ys.len() > cap {
        return Err(Error::SizeCap { rows: xs.len(), cols: ys.len(), cap });
    }
    Ok(RelaxedPrimalLP { xs, mu: mw, ys, nu: nw, strikes: k })
}

impl RelaxedPrimalLP {
    pub fn variables(&self) -> usize {
        2 * self.xs.len() * self.ys.len()
    }

    pub fn constraint_rows(&self) -> usize {
        3 * self.xs.len() + self.ys.len()
    }

    fn split(&self, v: usize) -> (bool, usize, usize) {
        let nm = self.xs.len() * self.ys.len();
        let stopped = v < nm;
        let w = v % nm;
        (stopped, w / self.ys.len(), w % self.ys.len())
    }

    /// Objective coefficient of variable `v`.
    pub fn objective(&self, v: usize) -> f64 {
        let (stopped, i, j) = self.split(v);
        if stopped {
            (self.strikes.k1 - self.xs[i]).max(0.0)
        } else {
            (self.strikes.k2 - self.ys[j]).max(0.0)
        }
    }

    /// Constraint rows as `(name, coefficients, rhs)`, in solver order.
    fn row_entries(&self, v: usize, out: &mut Vec<(usize, f64)>) {
        let (n, m) = (self.xs.len(), self.ys.len());
        let (stopped, i, j) = self.split(v);
        out.push((i, 1.0));
        out.push((n + j, 1.0));
        let d = self.ys[j] - self.xs[i];
        if d != 0.0 {
            out.push((n + m + if stopped { i } else { n + i }, d));
        }
    }

    fn rhs_of(&self, r: usize) -> f64 {
        let (n, m) = (self.xs.len(), self.ys.len());
        if r < n {
            self.mu[r]
        } else if r < n + m {
            self.nu[r - n]
        } else {
            0.0
        }
    }

    /// CPLEX LP text: objective, constraints, bounds.
    pub fn to_lp_text(&self) -> String {
        use std::fmt::Write;
        let (n, m) = (self.xs.len(), self.ys.len());
        let name = |v: usize| {
            let (s, i, j) = self.split(v);
            format!("{}_{i}_{j}", if s { "q" } else { "r" })
        };
        let mut out = String::from("\\ relaxed primal: stop (q) or continue (r)\nMaximize\n obj:");
        for v in 0..self.variables() {
            let c = self.objective(v);
            if c != 0.0 {
                let _ = write!(out, " + {c:e} {}", name(v));
            }
        }
        out.push_str("\nSubject To\n");
        let mut rows: Vec<Vec<(usize, f64)>> = vec![vec![]; self.constraint_rows()];
        let mut buf = Vec::new();
        for v in 0..self.variables() {
            buf.clear();
            self.row_entries(v, &mut buf);
            for &(r, a) in &buf {
                rows[r].push((v, a));
            }
        }
        for (r, entries) in rows.iter().enumerate() {
            let label = if r < n {
                format!("row_{r}")
            } else if r < n + m {
                format!("col_{}", r - n)
            } else if r < 2 * n + m {
                format!("mart_q_{}", r - n - m)
            } else {
                format!("mart_r_{}", r - 2 * n - m)
            };
            let _ = write!(out, " {label}:");
            for &(v, a) in entries {
                let _ = write!(out, " + {a:e} {}", name(v));
            }
            let _ = writeln!(out, " = {:e}", self.rhs_of(r));
        }
        out.push_str("Bounds\n");
        for v in 0..self.variables() {
            let _ = writeln!(out, " {} >= 0", name(v));
        }
        out.push_str("End\n");
        out
    }
}

/// The solver minimizes, so costs are negated.
impl Columns for RelaxedPrimalLP {
    fn rows(&self) -> usize {
        self.constraint_rows()
    }
    fn cols(&self) -> usize {
        self.variables()
    }
    fn column(&self, j: usize, out: &mut Vec<(usize, f64)>) {
        self.row_entries(j, out);
    }
    fn cost(&self, j: usize) -> f64 {
        -self.objective(j)
    }
    fn rhs(&self, i: usize) -> f64 {
        self.rhs_of(i)
    }
    fn reduced_costs(&self, costs: &[f64], y: &[f64], out: &mut [f64]) {
        let (n, m) = (self.xs.len(), self.ys.len());
        for (block, mart) in [(0, n + m), (n * m, 2 * n + m)] {
            for (i, &x) in self.xs.iter().enumerate() {
                let (yi, ym) = (y[i], y[mart + i]);
                let base = block + i * m;
                for (j, &yj) in self.ys.iter().enumerate() {
                    out[base + j] = costs[base + j] - yi - y[n + j] - ym * (yj - x);
                }
            }
        }
    }
}

pub fn solve_lp(lp: &RelaxedPrimalLP) -> Result<LpSolution> {
    let iter_cap = 200 * lp.constraint_rows().max(10) + 10 * lp.variables();
    let res = simplex::solve(lp, iter_cap)?;
    let scale: f64 = lp.mu.iter().sum::<f64>().max(1.0);
    if res.infeasibility > 1e-9 * scale {
        return Err(Error::Infeasible(res.infeasibility));
    }
    if res.outcome == Outcome::Unbounded {
        return Err(Error::Unbounded);
    }
    let nm = lp.xs.len() * lp.ys.len();
    let mut residual = vec![0.0; lp.constraint_rows()];
    let mut buf = Vec::new();
    for (v, &x) in res.x.iter().enumerate() {
        if x != 0.0 {
            buf.clear();
            lp.row_entries(v, &mut buf);
            for &(r, a) in &buf {
                residual[r] += a * x;
            }
        }
    }
    let max_residual =
        residual.iter().enumerate().map(|(r, &v)| (v - lp.rhs_of(r)).abs()).fold(0.0f64, f64::max);
    if max_residual > 1e-8 * scale {
        return Err(Error::NumericalBreakdown(format!("constraint residual {max_residual:e}")));
    }
    let entries = (0..nm)
        .filter(|&v| res.x[v] != 0.0 || res.x[nm + v] != 0.0)
        .map(|v| (v / lp.ys.len(), v % lp.ys.len(), res.x[v], res.x[nm + v]))
        .collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value: -res.objective,
        entries,
        iterations: res.iterations,
        bland_engaged: res.bland_engaged,
        max_residual,
        min_reduced_cost: res.min_reduced_cost,
    })
}

pub fn oracle_price(mu: &Measure, nu: &Measure, k: StrikePair) -> Result<f64> {
    Ok(solve_lp(&build_lp(mu, nu, k)?)?.value)
}

/// The three numbers that must be ordered on one discrete pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub mu_atoms: usize,
    pub nu_cells: usize,
    /// Left-curtain plan with the continuous threshold.
    pub plan_value: f64,
    pub lp_value: f64,
    /// The continuous hedge priced on the discrete marginals.
    pub hedge_cost: f64,
}

impl Sandwich {
    /// Smallest of the two slacks `lp − plan` and `hedge − lp`.
    pub fn slack(&self) -> f64 {
        (self.lp_value - self.plan_value).min(self.hedge_cost - self.lp_value)
    }
}

/// `μ` in `n` equal-mass barycentres, `ν` in `m` equal-mass cells split to
/// their endpoints: `μ_d ≤cx μ ≤cx ν ≤cx ν_d`.
pub fn discretize_for_oracle(mu: &Measure, nu: &Measure, n: usize, m: usize) -> Result<(Measure, Measure)> {
    Ok((mu.quantile_barycentres(n)?, nu.quantile_endpoint_split(m)?))
}

/// Plan value, LP value and hedge cost on the `n × m` discretization.
pub fn sandwich(map: &LeftCurtainMap, hedge: &Superhedge, threshold: f64, n: usize, m: usize) -> Result<Sandwich> {
    let k = hedge.strikes;
    let (mu, nu) = discretize_for_oracle(map.mu(), map.nu(), n, m)?;
    let plan = TransportPlan::left_curtain(&mu, &nu)?;
    Ok(Sandwich {
        mu_atoms: n,
        nu_cells: m,
        plan_value: evaluate_under_plan(&plan, threshold, k),
        lp_value: oracle_price(&mu, &nu, k)?,
        hedge_cost: crate::hedging::hedge_cost(hedge, &mu, &nu),
    })
}
