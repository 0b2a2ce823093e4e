use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Measure, Piece};

/// `f` and `g` as piecewise-linear interpolants of a table. A repeated
/// abscissa encodes a jump: the first row is the left limit, the second the
/// right limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionTable {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl FunctionTable {
    pub fn new(x: Vec<f64>, f: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        let t = FunctionTable { x, f, g };
        t.validate()?;
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Append one row.
    pub fn push(&mut self, x: f64, f: f64, g: f64) {
        self.x.push(x);
        self.f.push(f);
        self.g.push(g);
    }

    /// Right-continuous evaluation; identity outside the table.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.x.len();
        if n == 0 || x < self.x[0] || x > self.x[n - 1] {
            return (x, x);
        }
        let i = self.x.partition_point(|&p| p <= x);
        if i == n {
            return (self.f[n - 1], self.g[n - 1]);
        }
        let j = i - 1;
        let t = (x - self.x[j]) / (self.x[i] - self.x[j]);
        (self.f[j] + t * (self.f[i] - self.f[j]), self.g[j] + t * (self.g[i] - self.g[j]))
    }

    /// Membership in the monotone class: `f ≤ x ≤ g`, `g` nondecreasing,
    /// `f = x` where `g = x`, and no later `f` inside an earlier `(f, g)`.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::MonotonicityViolated(m));
        let n = self.x.len();
        if self.f.len() != n || self.g.len() != n {
            return bad("columns differ in length".into());
        }
        if self.x.iter().chain(&self.f).chain(&self.g).any(|v| !v.is_finite()) {
            return bad("non-finite entry".into());
        }
        for i in 1..n {
            if self.x[i] < self.x[i - 1] {
                return bad(format!("abscissae decrease at row {i}"));
            }
            if i >= 2 && self.x[i] == self.x[i - 2] {
                return bad(format!("more than two rows share x = {}", self.x[i]));
            }
            if self.g[i] < self.g[i - 1] {
                return bad(format!("g decreases at x = {}", self.x[i]));
            }
        }
        let span = self
            .g
            .iter()
            .chain(&self.f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let tol = 1e-12 * (span.1 - span.0).max(1.0);
        for i in 0..n {
            let (x, f, g) = (self.x[i], self.f[i], self.g[i]);
            if f > x || g < x {
                return bad(format!("need f <= x <= g at x = {x}"));
            }
            if g == x && f != x {
                return bad(format!("f must equal x where g does, at x = {x}"));
            }
            for k in i + 1..n {
                if self.x[k] > x && self.f[k] > f + tol && self.f[k] < g - tol {
                    return bad(format!("f({}) = {} enters ({f}, {g}) of x = {x}", self.x[k], self.f[k]));
                }
            }
        }
        Ok(())
    }
}

/// `ν = ∫ μ(dx) χ_{f(x), x, g(x)}`.
///
/// On each stretch where `μ` has constant density and `f`, `g` are linear
/// the image is exact when the kernel weights are constant (the pieces are
/// then uniform); otherwise the stretch is integrated with Gauss–Legendre
/// nodes, each node contributing two atoms.
pub fn reverse_construct_nu(table: &FunctionTable, mu: &Measure) -> Result<Measure> {
    table.validate()?;
    if mu.max_atom().is_some() {
        let (at, mass) = mu.max_atom().unwrap();
        return Err(Error::AtomsInMu { at, mass });
    }
    let mut cuts: Vec<f64> = mu.points().to_vec();
    cuts.extend(&table.x);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut pieces = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let dens = mu.density_at(0.5 * (a + b));
        if dens <= 0.0 {
            continue;
        }
        let mass = dens * (b - a);
        let (fa, ga) = table.eval(a);
        let (fb, gb) = left_limit(table, b);
        let at = |t: f64| {
            let x = a + t * (b - a);
            (x, fa + t * (fb - fa), ga + t * (gb - ga))
        };
        let p_down = |(x, f, g): (f64, f64, f64)| if g > f { (g - x) / (g - f) } else { 1.0 };
        let diagonal = [0.0, 0.5, 1.0].iter().all(|&t| {
            let (x, f, g) = at(t);
            f == x && g == x
        });
        if diagonal || (fa == a && fb == b) {
            pieces.push(Piece::Cell { lo: a, hi: b, mass });
            continue;
        }
        let ps: Vec<f64> = [0.25, 0.5, 0.75].iter().map(|&t| p_down(at(t))).collect();
        if ps.iter().all(|p| (p - ps[1]).abs() <= 1e-12) {
            let pd = ps[1];
            push_image(&mut pieces, fb, fa, mass * pd);
            push_image(&mut pieces, ga, gb, mass * (1.0 - pd));
            continue;
        }
        for (t, wt) in gauss_legendre_composite(16) {
            let p = at(t);
            let m = mass * wt;
            let pd = p_down(p);
            let (x, f, g) = p;
            if g > f {
                pieces.push(Piece::Atom { at: f, mass: m * pd });
                pieces.push(Piece::Atom { at: g, mass: m * (1.0 - pd) });
            } else {
                pieces.push(Piece::Atom { at: x, mass: m });
            }
        }
    }
    Measure::from_pieces(&pieces)
}

fn push_image(pieces: &mut Vec<Piece>, lo: f64, hi: f64, mass: f64) {
    if mass <= 0.0 {
        return;
    }
    if hi > lo {
        pieces.push(Piece::Cell { lo, hi, mass });
    } else {
        pieces.push(Piece::Atom { at: lo, mass });
    }
}

fn left_limit(table: &FunctionTable, x: f64) -> (f64, f64) {
    let n = table.x.len();
    if n == 0 || x <= table.x[0] || x > table.x[n - 1] {
        return (x, x);
    }
    let i = table.x.partition_point(|&p| p < x);
    if table.x[i] == x {
        return (table.f[i], table.g[i]);
    }
    let j = i - 1;
    let t = (x - table.x[j]) / (table.x[i] - table.x[j]);
    (table.f[j] + t * (table.f[i] - table.f[j]), table.g[j] + t * (table.g[i] - table.g[j]))
}

/// 8-point Gauss–Legendre on `pieces` equal parts of `[0, 1]`; weights sum
/// to one.
fn gauss_legendre_composite(pieces: usize) -> Vec<(f64, f64)> {
    const NODES: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
    const WEIGHTS: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];
    let h = 1.0 / pieces as f64;
    let mut out = Vec::with_capacity(8 * pieces);
    for p in 0..pieces {
        let c = (p as f64 + 0.5) * h;
        for (n, w) in NODES.iter().zip(WEIGHTS) {
            out.push((c - 0.5 * h * n, 0.5 * h * w));
            out.push((c + 0.5 * h * n, 0.5 * h * w));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_mu() {
        let mu = Measure::uniform(-1.0, 1.0, 10).unwrap();
        let t = FunctionTable::new(vec![-1.0, 1.0], vec![-1.0, 1.0], vec![-1.0, 1.0]).unwrap();
        let nu = reverse_construct_nu(&t, &mu).unwrap();
        for i in 0..=20 {
            let k = -1.5 + 0.15 * i as f64;
            assert!((nu.put(k) - mu.put(k)).abs() < 1e-14);
        }
    }

    #[test]
    fn uniform_inverse() {
        let mu = Measure::uniform(-1.0, 1.0, 50).unwrap();
        let t = FunctionTable::new(vec![-1.0, 1.0], vec![-1.0, -2.0], vec![-1.0, 2.0]).unwrap();
        let nu = reverse_construct_nu(&t, &mu).unwrap();
        let u = Measure::uniform(-2.0, 2.0, 4).unwrap();
        for i in 0..=40 {
            let k = -2.0 + 0.1 * i as f64;
            assert!((nu.cdf(k) - u.cdf(k)).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn curved_kernel_conserves_mean() {
        let mu = Measure::uniform(0.0, 1.0, 4).unwrap();
        let t = FunctionTable::new(vec![0.0, 0.5, 1.0], vec![0.0, -0.2, -1.5], vec![0.0, 1.0, 1.2]).unwrap();
        let nu = reverse_construct_nu(&t, &mu).unwrap();
        assert!((nu.mass() - 1.0).abs() < 1e-13);
        assert!((nu.barycentre().unwrap() - 0.5).abs() < 1e-13);
    }

    #[test]
    fn rejects_entering_f() {
        let r = FunctionTable::new(vec![0.0, 1.0, 2.0], vec![0.0, -1.0, 0.5], vec![0.0, 2.0, 3.0]);
        assert!(matches!(r, Err(Error::MonotonicityViolated(_))));
    }
}
