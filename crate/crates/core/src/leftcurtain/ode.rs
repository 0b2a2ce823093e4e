//! `(f, g)` by integrating the coupled equations
//!
//! ```text
//! f' = −(g − x)/(g − f) · ρ(x)/(η(f) − ρ(f)),   g' = (x − f)/(g − f) · ρ(x)/η(g)
//! ```
//!
//! from the start of the single excess interval, where `ρ` and `η` are the
//! densities of `μ` and `ν`. Both right-hand sides are `0/0` at the start,
//! so the first grid step is taken from the two-term expansion
//! `f ≈ e − aε`, `g ≈ e + bε` of the mass and mean balance.

use super::map::{BuildOptions, LeftCurtainMap};
use super::solver::{Solver, Triple};
use crate::error::{Error, Result};
use crate::measures::Measure;

/// Step control for the embedded Runge–Kutta pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub build: BuildOptions,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-9, atol: 1e-11, max_steps: 1_000_000, build: BuildOptions::default() }
    }
}

/// Integrate from `e_minus` across the support of `μ`. Abscissae at or
/// below `e_minus` stay on the diagonal.
pub fn build_by_ode(mu: &Measure, nu: &Measure, e_minus: f64, opts: OdeOptions) -> Result<LeftCurtainMap> {
    let solver = Solver::new(mu, nu)?;
    let (lmu, rmu) = solver.mu_support();
    let (lnu, rnu) = solver.nu_support();
    let rho = |x: f64| mu.density_at(x);
    let eta = |x: f64| nu.density_at(x);

    let (rho_l, rho_r) = (mu.density_left(e_minus), mu.density_at(e_minus));
    let (eta_l, eta_r) = (nu.density_left(e_minus), nu.density_at(e_minus));
    let delta = eta_l - rho_l;
    if !(delta > 0.0 && eta_r > 0.0 && rho_r > eta_r) {
        return Err(Error::DispersionViolated { f: e_minus, gap: delta.min(rho_r - eta_r) });
    }
    let (a, b) = start_coefficients(rho_r, eta_r, delta);

    let step = mu
        .points()
        .iter()
        .find(|&&p| p > e_minus)
        .map(|&p| p - e_minus)
        .unwrap_or((rmu - lmu) / 1000.0)
        .min((rmu - lmu) / 1000.0);
    let x0 = e_minus + step;

    let rhs = |x: f64, y: [f64; 2]| -> Result<[f64; 2]> {
        let (f, g) = (y[0], y[1]);
        let gap = eta(f) - rho(f);
        if gap <= 0.0 && f > lnu {
            return Err(Error::DispersionViolated { f, gap });
        }
        let r = rho(x);
        let w = g - f;
        let df = if gap > 0.0 { -(g - x) / w * r / gap } else { 0.0 };
        let dg = if eta(g) > 0.0 { (x - f) / w * r / eta(g) } else { 0.0 };
        Ok([df, dg])
    };

    let mut xs: Vec<f64> = default_samples(&solver, opts.build);
    xs.retain(|&x| x.is_finite());
    let mut out: Vec<Triple> = Vec::with_capacity(xs.len());
    let mut x = x0;
    let mut y = [e_minus - a * step, e_minus + b * step];
    let mut h = step;
    let mut steps = 0usize;
    for &target in &xs {
        if target <= e_minus || target > rmu {
            out.push(solver.solve(target));
            continue;
        }
        if target < x0 {
            let t = (target - e_minus) / step;
            out.push(triple(&solver, target, e_minus - a * step * t, e_minus + b * step * t));
            continue;
        }
        while x < target {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::NoConvergence { x, residual: h });
            }
            let hh = h.min(target - x);
            let (ynew, err) = dormand_prince(&rhs, x, y, hh)?;
            let scale = |i: usize| opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            let e = ((err[0] / scale(0)).powi(2) + (err[1] / scale(1)).powi(2)).sqrt() / 2f64.sqrt();
            if e <= 1.0 {
                x += hh;
                y = [ynew[0].clamp(lnu, x), ynew[1].clamp(x, rnu)];
                if x >= target - 1e-15 * target.abs().max(1.0) {
                    x = target;
                }
            }
            let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            h = (hh * factor).max(1e-14 * (rmu - lmu));
        }
        out.push(triple(&solver, target, y[0], y[1]));
    }
    Ok(LeftCurtainMap::from_samples(solver, out, opts.build))
}

/// `(a, b)` with `ρ_R = δ a + η_R b` (mass) and `ρ_R = η_R b² − δ a²` (mean),
/// solved for `b ∈ [1, ρ_R/η_R]` by bisection.
pub(crate) fn start_coefficients(rho_r: f64, eta_r: f64, delta: f64) -> (f64, f64) {
    let a_of = |b: f64| (rho_r - eta_r * b) / delta;
    let h = |b: f64| eta_r * b * b - delta * a_of(b).powi(2) - rho_r;
    let (mut lo, mut hi) = (1.0, rho_r / eta_r);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b = 0.5 * (lo + hi);
    (a_of(b), b)
}

fn triple(solver: &Solver, x: f64, f: f64, g: f64) -> Triple {
    Triple { x, f, g, slope: solver.table().slope_right(f), lambda_f: 0.0, lambda_g: 0.0 }
}

fn default_samples(solver: &Solver, opts: BuildOptions) -> Vec<f64> {
    let (lmu, rmu) = solver.mu_support();
    let n = opts.samples.max(2);
    let mut xs: Vec<f64> = (0..=n).map(|i| lmu + (rmu - lmu) * i as f64 / n as f64).collect();
    xs.extend(solver.mu().points().iter().copied().filter(|&p| p >= lmu && p <= rmu));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

type Rhs<'a> = dyn Fn(f64, [f64; 2]) -> Result<[f64; 2]> + 'a;

/// One Dormand–Prince 5(4) step: the fifth-order value and the difference
/// to the embedded fourth-order one.
fn dormand_prince(rhs: &Rhs<'_>, x: f64, y: [f64; 2], h: f64) -> Result<([f64; 2], [f64; 2])> {
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B4: [f64; 7] =
        [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];
    let mut k = [[0.0; 2]; 7];
    k[0] = rhs(x, y)?;
    for s in 0..6 {
        let mut ys = y;
        for (i, yi) in ys.iter_mut().enumerate() {
            *yi += h * (0..=s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
        }
        k[s + 1] = rhs(x + C[s] * h, ys)?;
    }
    // the last stage is evaluated at the fifth-order solution
    let mut y5 = y;
    let mut err = [0.0; 2];
    for i in 0..2 {
        y5[i] += h * (0..6).map(|j| A[5][j] * k[j][i]).sum::<f64>();
        let y4 = y[i] + h * (0..7).map(|j| B4[j] * k[j][i]).sum::<f64>();
        err[i] = y5[i] - y4;
    }
    Ok((y5, err))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_start_coefficients() {
        let (a, b) = start_coefficients(0.5, 0.25, 0.25);
        assert!((a - 0.5).abs() < 1e-14 && (b - 1.5).abs() < 1e-14);
    }
}
