//! Dense revised simplex for `min c·x` subject to `A x = b`, `x ≥ 0`, `b ≥ 0`.
//!
//! Columns are produced on demand by a callback, so the constraint matrix
//! is never stored. The basis inverse is kept dense, updated by elementary
//! row operations and rebuilt from scratch every `max(REFACTOR_EVERY, rows)`
//! pivots, which keeps the cubic rebuild at quadratic amortized cost.

use crate::error::{Error, Result};

const REFACTOR_EVERY: usize = 100;
const PIVOT_TOL: f64 = 1e-11;
/// Reduced-cost tolerance for optimality.
pub const OPT_TOL: f64 = 1e-9;

/// Sparse column access: `(row, value)` pairs of column `j`.
pub trait Columns: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn column(&self, j: usize, out: &mut Vec<(usize, f64)>);
    fn cost(&self, j: usize) -> f64;
    fn rhs(&self, i: usize) -> f64;

    /// `costs[j] − yᵀ a_j` for every structural column; override when
    /// columns have a closed form.
    fn reduced_costs(&self, costs: &[f64], y: &[f64], out: &mut [f64]) {
        let mut col = Vec::with_capacity(4);
        for (j, o) in out.iter_mut().enumerate() {
            col.clear();
            self.column(j, &mut col);
            *o = col.iter().fold(costs[j], |rc, &(r, v)| rc - y[r] * v);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Optimal,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub outcome: Outcome,
    /// Structural values, `cols()` long.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Value of the phase-one objective (sum of artificials).
    pub infeasibility: f64,
    pub iterations: usize,
    pub bland_engaged: bool,
    /// Most negative reduced cost at termination.
    pub min_reduced_cost: f64,
}

struct State<'a, C: Columns> {
    lp: &'a C,
    m: usize,
    /// Basic variable of each row; indices `≥ cols()` are artificials.
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    degenerate_run: usize,
    bland: bool,
    bland_engaged: bool,
}

impl<'a, C: Columns> State<'a, C> {
    fn new(lp: &'a C) -> Self {
        let m = lp.rows();
        let n = lp.cols();
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let mut is_basic = vec![false; n + m];
        for b in is_basic.iter_mut().skip(n) {
            *b = true;
        }
        State {
            lp,
            m,
            basis: (n..n + m).collect(),
            is_basic,
            binv,
            xb: (0..m).map(|i| lp.rhs(i)).collect(),
            iterations: 0,
            since_refactor: 0,
            degenerate_run: 0,
            bland: false,
            bland_engaged: false,
        }
    }

    fn column_of(&self, j: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        if j < self.lp.cols() {
            self.lp.column(j, out);
        } else {
            out.push((j - self.lp.cols(), 1.0));
        }
    }

    /// `B⁻¹ a_j` for a sparse column.
    fn ftran(&self, col: &[(usize, f64)]) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(r, v) in col {
            for (i, a) in alpha.iter_mut().enumerate() {
                *a += self.binv[i * m + r] * v;
            }
        }
        alpha
    }

    /// `c_Bᵀ B⁻¹`.
    fn duals(&self, costs: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = costs[b];
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, &r) in y.iter_mut().zip(row) {
                    *yk += cb * r;
                }
            }
        }
        y
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        // assemble B column by column, then invert by Gauss-Jordan
        let mut bmat = vec![0.0; m * m];
        let mut col = Vec::new();
        for (k, &b) in self.basis.iter().enumerate() {
            self.column_of(b, &mut col);
            for &(r, v) in &col {
                bmat[r * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&a, &b| bmat[a * m + c].abs().total_cmp(&bmat[b * m + c].abs()))
                .expect("nonempty range");
            let pv = bmat[p * m + c];
            if pv.abs() < 1e-14 {
                return Err(Error::NumericalBreakdown(format!("singular basis at column {c}")));
            }
            if p != c {
                for k in 0..m {
                    bmat.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let inv_pv = 1.0 / pv;
            for k in 0..m {
                bmat[c * m + k] *= inv_pv;
                inv[c * m + k] *= inv_pv;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = bmat[r * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        bmat[r * m + k] -= f * bmat[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        // rows of inv follow the basis order: B⁻¹ maps row r of A to basic slot
        self.binv = inv;
        self.xb = (0..m).map(|i| (0..m).map(|r| self.binv[i * m + r] * self.lp.rhs(r)).sum::<f64>()).collect();
        for v in &mut self.xb {
            if *v < 0.0 && *v > -1e-12 {
                *v = 0.0;
            }
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn pivot(&mut self, row: usize, entering: usize, alpha: &[f64]) {
        let m = self.m;
        let ap = alpha[row];
        // a leaving value slightly below zero (allowed by the Harris test)
        // must not turn into a backward step
        let theta = self.xb[row].max(0.0) / ap;
        for (i, (x, &a)) in self.xb.iter_mut().zip(alpha).enumerate() {
            if i != row {
                *x -= theta * a;
                if *x < 0.0 && *x > -1e-13 {
                    *x = 0.0;
                }
            }
        }
        self.xb[row] = theta;
        let (head, rest) = self.binv.split_at_mut(row * m);
        let (prow, tail) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v /= ap;
        }
        for (i, chunk) in head.chunks_mut(m).chain(tail.chunks_mut(m)).enumerate() {
            let i = if i < row { i } else { i + 1 };
            let f = alpha[i];
            if f != 0.0 {
                for (c, &p) in chunk.iter_mut().zip(prow.iter()) {
                    *c -= f * p;
                }
            }
        }
        self.is_basic[self.basis[row]] = false;
        self.is_basic[entering] = true;
        self.basis[row] = entering;
        self.iterations += 1;
        self.since_refactor += 1;
    }

    /// Textbook ratio test, ties broken by smallest basic index.
    fn ratio_bland(&self, alpha: &[f64], tol: f64) -> Option<(usize, f64)> {
        let mut leave: Option<(usize, f64)> = None;
        for (i, &a) in alpha.iter().enumerate() {
            if a > tol {
                let ratio = self.xb[i].max(0.0) / a;
                let better = match leave {
                    None => true,
                    Some((l, t)) => ratio < t - 1e-15 || (ratio <= t + 1e-15 && self.basis[i] < self.basis[l]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        leave
    }

    /// Two-pass Harris test: bound the step with a small feasibility slack,
    /// then take the largest pivot among rows within the bound.
    fn ratio_harris(&self, alpha: &[f64], tol: f64) -> Option<(usize, f64)> {
        const SLACK: f64 = 1e-11;
        let bound = alpha
            .iter()
            .zip(&self.xb)
            .filter(|(&a, _)| a > tol)
            .map(|(&a, &x)| (x.max(0.0) + SLACK) / a)
            .fold(f64::INFINITY, f64::min);
        if !bound.is_finite() {
            return None;
        }
        let mut leave: Option<(usize, f64)> = None;
        for (i, &a) in alpha.iter().enumerate() {
            if a > tol {
                let ratio = self.xb[i].max(0.0) / a;
                if ratio <= bound && leave.is_none_or(|(l, _)| a > alpha[l]) {
                    leave = Some((i, ratio));
                }
            }
        }
        leave
    }

    /// Run simplex iterations with `costs` (artificials included); only
    /// structural columns may enter.
    fn run(&mut self, costs: &[f64], max_iter: usize) -> Result<(Outcome, f64)> {
        let degenerate_cap = 5 * self.m;
        let mut col = Vec::new();
        let mut rc = vec![0.0; self.lp.cols()];
        let mut y = self.duals(costs);
        let mut best_obj: f64 = self.basis.iter().zip(&self.xb).map(|(&b, &v)| costs[b] * v).sum();
        loop {
            if self.since_refactor >= REFACTOR_EVERY.max(self.m) {
                self.refactor()?;
                y = self.duals(costs);
            }
            if self.iterations > max_iter {
                return Err(Error::NumericalBreakdown(format!("no convergence after {max_iter} pivots")));
            }
            self.lp.reduced_costs(costs, &y, &mut rc);
            let mut entering = None;
            let mut best = -OPT_TOL;
            let mut min_rc = 0.0f64;
            for (j, &rc) in rc.iter().enumerate() {
                if self.is_basic[j] {
                    continue;
                }
                min_rc = min_rc.min(rc);
                if rc < best {
                    entering = Some(j);
                    if self.bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(q) = entering else { return Ok((Outcome::Optimal, min_rc)) };
            self.column_of(q, &mut col);
            let alpha = self.ftran(&col);
            let amax = alpha.iter().fold(0.0f64, |a, &v| a.max(v));
            let tol = PIVOT_TOL.max(1e-9 * amax);
            let leave = if self.bland { self.ratio_bland(&alpha, tol) } else { self.ratio_harris(&alpha, tol) };
            let Some((row, _)) = leave else { return Ok((Outcome::Unbounded, min_rc)) };
            // a stall is judged against the best objective seen, since round-off
            // can make a cycle drift slightly up and down
            let obj: f64 = self.basis.iter().zip(&self.xb).map(|(&b, &v)| costs[b] * v).sum();
            if obj < best_obj - 1e-12 * (1.0 + best_obj.abs()) {
                best_obj = obj;
                self.degenerate_run = 0;
                self.bland = false;
            } else {
                self.degenerate_run += 1;
                if self.degenerate_run > degenerate_cap {
                    self.bland = true;
                    self.bland_engaged = true;
                }
            }
            // y' = y + (d_q / α_r) e_rᵀ B⁻¹, with the pre-pivot inverse
            let f = rc[q] / alpha[row];
            let m = self.m;
            for (yk, &b) in y.iter_mut().zip(&self.binv[row * m..(row + 1) * m]) {
                *yk += f * b;
            }
            self.pivot(row, q, &alpha);
        }
    }
}

/// Two-phase solve. Artificials left basic at zero after phase one sit on
/// redundant rows and are driven out where a structural column allows it.
pub fn solve<C: Columns>(lp: &C, max_iter: usize) -> Result<SimplexResult> {
    let n = lp.cols();
    let m = lp.rows();
    let mut st = State::new(lp);
    let phase1: Vec<f64> = (0..n + m).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
    st.run(&phase1, max_iter)?;
    st.refactor()?;
    let infeasibility: f64 = st.basis.iter().zip(&st.xb).filter(|(&b, _)| b >= n).map(|(_, &v)| v).sum();
    let scale: f64 = (0..m).map(|i| lp.rhs(i)).sum::<f64>().max(1.0);
    if infeasibility > 1e-9 * scale {
        return Ok(SimplexResult {
            outcome: Outcome::Optimal,
            x: vec![],
            objective: f64::NAN,
            infeasibility,
            iterations: st.iterations,
            bland_engaged: st.bland_engaged,
            min_reduced_cost: 0.0,
        });
    }
    // drive zero-level artificials out of the basis
    let mut col = Vec::new();
    for row in 0..m {
        if st.basis[row] < n {
            continue;
        }
        let mrow: Vec<f64> = st.binv[row * m..(row + 1) * m].to_vec();
        let found = (0..n).filter(|&j| !st.is_basic[j]).find(|&j| {
            col.clear();
            lp.column(j, &mut col);
            col.iter().map(|&(r, v)| mrow[r] * v).sum::<f64>().abs() > 1e-9
        });
        if let Some(j) = found {
            col.clear();
            lp.column(j, &mut col);
            let alpha = st.ftran(&col);
            st.xb[row] = 0.0;
            st.pivot(row, j, &alpha);
        }
    }
    st.refactor()?;
    st.degenerate_run = 0;
    st.bland = false;
    let phase2: Vec<f64> = (0..n + m).map(|j| if j >= n { 0.0 } else { lp.cost(j) }).collect();
    let (outcome, min_rc) = st.run(&phase2, max_iter)?;
    st.refactor()?;
    let mut x = vec![0.0; n];
    for (&b, &v) in st.basis.iter().zip(&st.xb) {
        if b < n {
            x[b] = v.max(0.0);
        }
    }
    let objective = (0..n).map(|j| lp.cost(j) * x[j]).sum();
    Ok(SimplexResult {
        outcome,
        x,
        objective,
        infeasibility,
        iterations: st.iterations,
        bland_engaged: st.bland_engaged,
        min_reduced_cost: min_rc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense test problem.
    struct Dense {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        c: Vec<f64>,
    }

    impl Columns for Dense {
        fn rows(&self) -> usize {
            self.a.len()
        }
        fn cols(&self) -> usize {
            self.c.len()
        }
        fn column(&self, j: usize, out: &mut Vec<(usize, f64)>) {
            out.extend(self.a.iter().enumerate().filter(|(_, r)| r[j] != 0.0).map(|(i, r)| (i, r[j])));
        }
        fn cost(&self, j: usize) -> f64 {
            self.c[j]
        }
        fn rhs(&self, i: usize) -> f64 {
            self.b[i]
        }
    }

    #[test]
    fn small_lp() {
        // min −x − y  s.t. x + y + s = 4, x + 3y + t = 6
        let lp = Dense {
            a: vec![vec![1.0, 1.0, 1.0, 0.0], vec![1.0, 3.0, 0.0, 1.0]],
            b: vec![4.0, 6.0],
            c: vec![-1.0, -2.0, 0.0, 0.0],
        };
        let r = solve(&lp, 100).unwrap();
        assert_eq!(r.outcome, Outcome::Optimal);
        // optimum at x = 3, y = 1
        assert!((r.objective + 5.0).abs() < 1e-12);
        assert!((r.x[0] - 3.0).abs() < 1e-12 && (r.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_row_and_unbounded() {
        // x + y = 1 twice; min −x
        let lp = Dense { a: vec![vec![1.0, 1.0], vec![1.0, 1.0]], b: vec![1.0, 1.0], c: vec![-1.0, 0.0] };
        let r = solve(&lp, 100).unwrap();
        assert!((r.objective + 1.0).abs() < 1e-12);
        // x − y = 0, min −x
        let lp = Dense { a: vec![vec![1.0, -1.0]], b: vec![0.0], c: vec![-1.0, 0.0] };
        assert_eq!(solve(&lp, 100).unwrap().outcome, Outcome::Unbounded);
    }

    #[test]
    fn infeasible() {
        // x + y = 1, x + y = 2
        let lp = Dense { a: vec![vec![1.0, 1.0], vec![1.0, 1.0]], b: vec![1.0, 2.0], c: vec![0.0, 0.0] };
        let r = solve(&lp, 100).unwrap();
        assert!(r.infeasibility > 0.5);
    }
}
