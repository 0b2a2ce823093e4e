use serde::{Deserialize, Serialize};

use super::solver::{Solver, Triple};
use crate::error::Result;
use crate::exec::Exec;
use crate::measures::Measure;

/// One-sided values of `f` or `g` at a discontinuity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub x: f64,
    pub left: f64,
    pub right: f64,
}

/// `(f', x')`: an excursion of `g` returns to the diagonal at `x'`, and `μ`
/// and `ν` carry equal mass and mean on `(f', x')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegenPair {
    pub f_prime: f64,
    pub x_prime: f64,
}

/// Partial use of a `ν`-atom at a sampled abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomSplit {
    pub x: f64,
    pub lambda_f: f64,
    pub lambda_g: f64,
}

/// Sampling and localization settings for [`LeftCurtainMap::build_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Uniform samples across the support of `μ`, on top of its knots.
    pub samples: usize,
    /// Extra samples on each side outside the support of `μ`.
    pub extension_samples: usize,
    /// Most jumps localized by bisection; further candidates are reported
    /// as brackets only.
    pub jump_budget: usize,
    pub exec: Exec,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { samples: 1000, extension_samples: 4, jump_budget: 64, exec: Exec::default() }
    }
}

/// The left-curtain functions `(f, g)` of a pair `μ ≤cx ν`.
///
/// [`LeftCurtainMap::eval`] solves exactly at any abscissa. The sample tables
/// support the structural queries: diagonal segments, jumps of `f` and `g`,
/// regeneration pairs and atom splits.
#[derive(Debug, Clone)]
pub struct LeftCurtainMap {
    pub(crate) solver: Solver,
    samples: Vec<Triple>,
    diagonal: Vec<(f64, f64)>,
    regeneration: Vec<RegenPair>,
    f_jumps: Vec<Jump>,
    g_jumps: Vec<Jump>,
    unlocalized: Vec<(f64, f64)>,
}

/// Counts of violated structural properties over the sample table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub samples: usize,
    /// Adjacent samples with `g` decreasing.
    pub g_decreasing: usize,
    /// Samples with `f > x` or `g < x`.
    pub order: usize,
    /// Pairs `x < x'` with `f(x') ∈ (f(x), g(x))`.
    pub no_entry: usize,
    /// Samples with `g = x` but `f ≠ x`.
    pub diagonal: usize,
}

impl MonotonicityReport {
    pub fn is_clean(&self) -> bool {
        self.g_decreasing == 0 && self.order == 0 && self.no_entry == 0 && self.diagonal == 0
    }
}

impl LeftCurtainMap {
    pub fn build(mu: &Measure, nu: &Measure) -> Result<Self> {
        Self::build_with(mu, nu, BuildOptions::default())
    }

    pub fn build_with(mu: &Measure, nu: &Measure, opts: BuildOptions) -> Result<Self> {
        let solver = Solver::new(mu, nu)?;
        let xs = sample_points(&solver, opts);
        let samples = opts.exec.map(xs.len(), |i| solver.solve(xs[i]));
        Ok(Self::from_samples(solver, samples, opts))
    }

    /// Assemble a map from externally computed samples (used by the ODE
    /// construction); structure detection still uses exact solves.
    pub(crate) fn from_samples(solver: Solver, samples: Vec<Triple>, opts: BuildOptions) -> Self {
        let mut map = LeftCurtainMap {
            solver,
            samples,
            diagonal: vec![],
            regeneration: vec![],
            f_jumps: vec![],
            g_jumps: vec![],
            unlocalized: vec![],
        };
        map.detect_structure(opts);
        map
    }

    pub fn mu(&self) -> &Measure {
        self.solver.mu()
    }

    pub fn nu(&self) -> &Measure {
        self.solver.nu()
    }

    pub fn solver(&self) -> &Solver {
        &self.solver
    }

    /// `D(k)`.
    pub fn d(&self, k: f64) -> f64 {
        self.solver.d(k)
    }

    /// Exact solve at `x`.
    pub fn eval(&self, x: f64) -> Triple {
        self.solver.solve(x)
    }

    pub fn f(&self, x: f64) -> f64 {
        self.eval(x).f
    }

    pub fn g(&self, x: f64) -> f64 {
        self.eval(x).g
    }

    pub fn samples(&self) -> &[Triple] {
        &self.samples
    }

    pub fn diagonal_segments(&self) -> &[(f64, f64)] {
        &self.diagonal
    }

    pub fn regeneration_pairs(&self) -> &[RegenPair] {
        &self.regeneration
    }

    pub fn f_jumps(&self) -> &[Jump] {
        &self.f_jumps
    }

    pub fn g_jumps(&self) -> &[Jump] {
        &self.g_jumps
    }

    /// Jump candidates beyond the localization budget, as sample brackets.
    pub fn unlocalized_jumps(&self) -> &[(f64, f64)] {
        &self.unlocalized
    }

    pub fn atom_splits(&self) -> Vec<AtomSplit> {
        self.samples
            .iter()
            .filter(|t| t.lambda_f > 0.0 || t.lambda_g > 0.0)
            .map(|t| AtomSplit { x: t.x, lambda_f: t.lambda_f, lambda_g: t.lambda_g })
            .collect()
    }

    fn span(&self) -> f64 {
        let (l, r) = self.solver.nu_support();
        (r - l).max(f64::MIN_POSITIVE)
    }

    /// Largest mass and mean residuals over the sample table.
    pub fn residuals(&self) -> (f64, f64) {
        self.samples.iter().fold((0.0f64, 0.0f64), |(a, b), t| {
            let (m, e) = self.solver.residuals(t);
            (a.max(m.abs()), b.max(e.abs()))
        })
    }

    /// Structural checks over the sample table. Comparisons allow a slack of
    /// `1e-9` times the support width of `ν` for root-finding noise.
    pub fn monotonicity(&self) -> MonotonicityReport {
        let s = &self.samples;
        let tol = 1e-9 * self.span();
        let mut rep = MonotonicityReport { samples: s.len(), ..Default::default() };
        for w in s.windows(2) {
            if w[1].g < w[0].g - tol {
                rep.g_decreasing += 1;
            }
        }
        for t in s {
            if t.f > t.x || t.g < t.x {
                rep.order += 1;
            }
            if t.g == t.x && t.f != t.x {
                rep.diagonal += 1;
            }
        }
        for (i, a) in s.iter().enumerate() {
            if a.g - a.f <= 2.0 * tol {
                continue;
            }
            for b in &s[i + 1..] {
                if b.f > a.f + tol && b.f < a.g - tol {
                    rep.no_entry += 1;
                }
            }
        }
        rep
    }

    fn detect_structure(&mut self, opts: BuildOptions) {
        let span = self.span();
        let (lmu, rmu) = self.solver.mu_support();

        let mut diag: Vec<(f64, f64)> = Vec::new();
        let mut run: Option<(f64, f64)> = None;
        for t in &self.samples {
            if t.is_diagonal() {
                run = Some(match run {
                    Some((a, _)) => (a, t.x),
                    None => (t.x, t.x),
                });
            } else if let Some(r) = run.take() {
                diag.push(r);
            }
        }
        diag.extend(run);
        self.diagonal = diag.into_iter().filter(|(a, b)| b > a).collect();

        let solver = &self.solver;
        let transitions: Vec<(f64, f64)> = self
            .samples
            .windows(2)
            .filter(|w| !w[0].is_diagonal() && w[1].is_diagonal() && w[0].x >= lmu && w[1].x <= rmu)
            .map(|w| (w[0].x, w[1].x))
            .collect();
        let found = opts.exec.map(transitions.len(), |i| {
            let (mut lo, mut hi) = transitions[i];
            let mut f_lo = solver.solve(lo).f;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let t = solver.solve(mid);
                if t.is_diagonal() {
                    hi = mid;
                } else {
                    // f does not increase along an excursion; near x' the
                    // solve degenerates towards the diagonal, so keep the min
                    lo = mid;
                    f_lo = f_lo.min(t.f);
                }
            }
            RegenPair { f_prime: f_lo, x_prime: hi }
        });
        self.regeneration = found.into_iter().filter(|p| p.x_prime - p.f_prime > 1e-9 * span).collect();

        let nu_gaps = null_gaps(solver.nu());
        let table = solver.table();
        let peak = (0..table.cells()).map(|j| table.coefficients(j).2.abs()).fold(0.0f64, f64::max);
        let eps = 1e-9 * peak;
        let flat_inside = |lo: f64, hi: f64| {
            let z = table.knots();
            let start = z.partition_point(|&p| p < lo);
            (start..table.cells()).take_while(|&j| z[j + 1] <= hi).any(|j| table.coefficients(j).2 <= eps)
        };
        let tiny = 1e-12 * span;
        let mut f_cand = Vec::new();
        let mut g_cand = Vec::new();
        // the extension rule right of r_μ is discontinuous by construction
        let rmu_atom = solver.mu().atom_at(rmu) > 0.0;
        for w in self.samples.windows(2).filter(|w| w[1].x < rmu || (rmu_atom && w[1].x <= rmu)) {
            let (a, b) = (&w[0], &w[1]);
            if a.f - b.f > tiny && flat_inside(b.f, a.f) {
                f_cand.push((a.x, b.x));
            }
            if b.g - a.g > tiny && nu_gaps.iter().any(|&(u, v)| a.g <= u + tiny && v - tiny <= b.g) {
                g_cand.push((a.x, b.x));
            }
        }
        let budget = opts.jump_budget;
        for (cands, is_f) in [(f_cand, true), (g_cand, false)] {
            let keep = cands.len().min(budget);
            self.unlocalized.extend_from_slice(&cands[keep..]);
            let jumps = opts.exec.map(keep, |i| localize(solver, cands[i], is_f, span));
            let jumps = jumps.into_iter().flatten();
            if is_f {
                self.f_jumps.extend(jumps);
            } else {
                self.g_jumps.extend(jumps);
            }
        }
    }

    /// `x,f,g` rows of the sample table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,f,g\n");
        for t in &self.samples {
            out.push_str(&format!("{},{},{}\n", t.x, t.f, t.g));
        }
        out
    }

    /// Jumps, diagonal segments, regeneration pairs and atom splits.
    pub fn sidecar(&self) -> MapSidecar {
        let (mass, mean) = self.residuals();
        MapSidecar {
            f_jumps: self.f_jumps.clone(),
            g_jumps: self.g_jumps.clone(),
            unlocalized_jumps: self.unlocalized.clone(),
            diagonal_segments: self.diagonal.clone(),
            regeneration_pairs: self.regeneration.clone(),
            atom_splits: self.atom_splits(),
            mass_residual: mass,
            mean_residual: mean,
            monotonicity: self.monotonicity(),
        }
    }
}

/// JSON companion of the `x,f,g` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSidecar {
    pub f_jumps: Vec<Jump>,
    pub g_jumps: Vec<Jump>,
    pub unlocalized_jumps: Vec<(f64, f64)>,
    pub diagonal_segments: Vec<(f64, f64)>,
    pub regeneration_pairs: Vec<RegenPair>,
    pub atom_splits: Vec<AtomSplit>,
    pub mass_residual: f64,
    pub mean_residual: f64,
    pub monotonicity: MonotonicityReport,
}

/// Bisect towards the discontinuity inside `(a, b)`, keeping the half with
/// the larger change.
fn localize(solver: &Solver, (mut a, mut b): (f64, f64), is_f: bool, span: f64) -> Option<Jump> {
    let val = |t: &Triple| if is_f { -t.f } else { t.g };
    let mut ta = solver.solve(a);
    let mut tb = solver.solve(b);
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let tm = solver.solve(mid);
        if val(&tm) - val(&ta) >= val(&tb) - val(&tm) {
            b = mid;
            tb = tm;
        } else {
            a = mid;
            ta = tm;
        }
    }
    let (left, right) = if is_f { (ta.f, tb.f) } else { (ta.g, tb.g) };
    ((right - left).abs() > 1e-9 * span).then_some(Jump { x: 0.5 * (a + b), left, right })
}

/// Open intervals carrying no `ν` mass, between the extreme support points.
fn null_gaps(nu: &Measure) -> Vec<(f64, f64)> {
    let p = nu.points();
    let mut gaps: Vec<(f64, f64)> = Vec::new();
    let Some((l, r)) = nu.support() else { return gaps };
    for j in 0..p.len().saturating_sub(1) {
        if p[j] < l || p[j + 1] > r || nu.cells()[j] > 0.0 {
            continue;
        }
        match gaps.last_mut() {
            Some(last) if last.1 == p[j] && nu.atoms()[j] == 0.0 => last.1 = p[j + 1],
            _ => gaps.push((p[j], p[j + 1])),
        }
    }
    gaps
}

fn sample_points(solver: &Solver, opts: BuildOptions) -> Vec<f64> {
    let (lmu, rmu) = solver.mu_support();
    let (lnu, rnu) = solver.nu_support();
    let n = opts.samples.max(2);
    let mut xs: Vec<f64> = (0..=n).map(|i| lmu + (rmu - lmu) * i as f64 / n as f64).collect();
    xs.extend(solver.mu().points().iter().copied().filter(|&p| p >= lmu && p <= rmu));
    let e = opts.extension_samples;
    if lnu < lmu {
        xs.extend((0..e).map(|i| lnu + (lmu - lnu) * i as f64 / e as f64));
    }
    if rmu < rnu {
        xs.extend((1..=e).map(|i| rmu + (rnu - rmu) * i as f64 / e as f64));
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_map(n: usize) -> LeftCurtainMap {
        let mu = Measure::uniform(-1.0, 1.0, n).unwrap();
        let nu = Measure::uniform(-2.0, 2.0, 2 * n).unwrap();
        LeftCurtainMap::build(&mu, &nu).unwrap()
    }

    #[test]
    fn uniform_closed_form() {
        let map = uniform_map(1000);
        for t in map.samples() {
            let x = t.x;
            if (-1.0..=1.0).contains(&x) && x > -1.0 {
                assert!((t.f + (x + 3.0) / 2.0).abs() < 1e-9, "f({x}) = {}", t.f);
                assert!((t.g - (3.0 * x + 1.0) / 2.0).abs() < 1e-9, "g({x}) = {}", t.g);
            }
        }
        let t = map.eval(1.0 / 18.0);
        assert!((t.f + 55.0 / 36.0).abs() < 1e-12);
        assert!((t.g - 7.0 / 12.0).abs() < 1e-12);
        assert!(map.f_jumps().is_empty() && map.g_jumps().is_empty());
        assert!(map.regeneration_pairs().is_empty());
        assert!(map.monotonicity().is_clean());
        let (m, e) = map.residuals();
        assert!(m < 1e-12 && e < 1e-12, "{m} {e}");
    }

    #[test]
    fn extension_rules() {
        let map = uniform_map(100);
        let t = map.eval(1.5);
        assert_eq!((t.f, t.g), (-2.0, 2.0));
        assert!(map.eval(-1.5).is_diagonal());
        assert!(map.eval(2.5).is_diagonal());
        assert!(map.eval(-1.0).is_diagonal());
    }

    #[test]
    fn identical_laws_stay_put() {
        let mu = Measure::uniform(-1.0, 1.0, 50).unwrap();
        let map = LeftCurtainMap::build(&mu, &mu).unwrap();
        assert!(map.samples().iter().all(|t| t.is_diagonal()));
        assert!(map.f_jumps().is_empty());
    }
}
