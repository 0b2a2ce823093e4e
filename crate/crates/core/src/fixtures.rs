//! Reference pairs with known structure, used by tests, benches and the CLI.
//!
//! The templated fixtures start from `(f, g)` and a piecewise-uniform `μ`
//! and obtain `ν` by [`reverse_construct_nu`], so the left-curtain map of the
//! pair is known in advance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::leftcurtain::{reverse_construct_nu, FunctionTable};
use crate::measures::{Measure, Piece};

/// `μ = U[−1, 1]` on `n` cells and `ν = U[−2, 2]` on `2n` cells.
pub fn uniform_pair(n: usize) -> (Measure, Measure) {
    (
        Measure::uniform(-1.0, 1.0, n).expect("valid uniform law"),
        Measure::uniform(-2.0, 2.0, 2 * n).expect("valid uniform law"),
    )
}

/// `μ = {−1: ½, 1: ½}` and `ν = {−2: ¼, 0: ½, 2: ¼}`.
pub fn toy_pair() -> (Measure, Measure) {
    (
        Measure::from_pairs(&[(-1.0, 0.5), (1.0, 0.5)]).expect("valid"),
        Measure::from_pairs(&[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]).expect("valid"),
    )
}

/// `μ = ½U[−3,−1] + ½U[1,3]` and `ν = U[−4, 4]`: `D(0) = 0`, so the problem
/// splits at zero.
pub fn split_pair(n: usize) -> (Measure, Measure) {
    let half = (n / 2).max(1);
    let mut pieces = Vec::with_capacity(2 * half);
    for i in 0..half {
        let h = 2.0 / half as f64;
        let m = 0.5 / half as f64;
        pieces.push(Piece::Cell { lo: -3.0 + i as f64 * h, hi: -3.0 + (i + 1) as f64 * h, mass: m });
        pieces.push(Piece::Cell { lo: 1.0 + i as f64 * h, hi: 1.0 + (i + 1) as f64 * h, mass: m });
    }
    (Measure::from_pieces(&pieces).expect("valid"), Measure::uniform(-4.0, 4.0, 4 * n).expect("valid"))
}

/// A pair generated from explicit `(f, g)`.
#[derive(Debug, Clone)]
pub struct Template {
    pub table: FunctionTable,
    pub mu: Measure,
    pub nu: Measure,
    /// Regeneration pairs `(f', x')` of the generator.
    pub regeneration: Vec<(f64, f64)>,
    /// `(x'', f(x''−), f(x''+))` when the generator has an `f` jump.
    pub f_jump: Option<(f64, f64, f64)>,
    /// Excursion start points.
    pub excursions: Vec<f64>,
}

impl Template {
    /// `g(x'')` when there is an `f` jump.
    pub fn g_at_jump(&self) -> Option<f64> {
        self.f_jump.map(|(x, _, _)| self.table.eval(x).1)
    }
}

/// Builder for radial pieces: on `[a, b]`, `f` and `g` are the lines through
/// `(c, c)` matching the values at `a`.
struct Builder {
    table: FunctionTable,
    pieces: Vec<Piece>,
    x: f64,
    f: f64,
    g: f64,
}

impl Builder {
    fn new(x0: f64) -> Self {
        Builder { table: FunctionTable { x: vec![], f: vec![], g: vec![] }, pieces: vec![], x: x0, f: x0, g: x0 }
    }

    fn mass(&mut self, a: f64, b: f64, density: f64) {
        if b > a && density > 0.0 {
            self.pieces.push(Piece::Cell { lo: a, hi: b, mass: density * (b - a) });
        }
    }

    fn diagonal(&mut self, len: f64, density: f64) {
        let a = self.x;
        self.mass(a, a + len, density);
        self.table.push(a, a, a);
        self.x = a + len;
        self.table.push(self.x, self.x, self.x);
        self.f = self.x;
        self.g = self.x;
    }

    /// First piece of an excursion, centred at its start.
    fn open(&mut self, len: f64, alpha: f64, beta: f64, density: f64) {
        let e = self.x;
        self.table.push(e, e, e);
        self.mass(e, e + len, density);
        self.x = e + len;
        self.f = e - alpha * len;
        self.g = e + beta * len;
        self.table.push(self.x, self.f, self.g);
    }

    /// Continue radially about `c ∈ (f, x)` for `len`.
    fn radial(&mut self, c: f64, len: f64, density: f64) {
        let a = self.x;
        let alpha = (c - self.f) / (a - c);
        let beta = (self.g - c) / (a - c);
        self.mass(a, a + len, density);
        self.x = a + len;
        self.f = c - alpha * (self.x - c);
        self.g = c + beta * (self.x - c);
        self.table.push(self.x, self.f, self.g);
    }

    /// Length needed by a radial piece about `c` to bring `f` down to `target`.
    fn len_to(&self, c: f64, target: f64) -> f64 {
        let alpha = (c - self.f) / (self.x - c);
        (c - target) / alpha + c - self.x
    }

    /// Length needed by a radial piece about `c` to bring `g` up to `target`.
    fn len_to_g(&self, c: f64, target: f64) -> f64 {
        let beta = (self.g - c) / (self.x - c);
        (target - c) / beta + c - self.x
    }

    fn jump_f(&mut self, to: f64) {
        self.f = to;
        self.table.push(self.x, self.f, self.g);
    }

    fn skip(&mut self, to: f64) {
        self.x = to;
        self.f = to;
        self.g = to;
    }

    fn finish(self) -> Result<(FunctionTable, Measure)> {
        let table = FunctionTable::new(self.table.x, self.table.f, self.table.g)?;
        let mu = Measure::from_pieces(&self.pieces)?.normalized()?;
        Ok((table, mu))
    }
}

/// Two excursions with one downward jump of `f`.
///
/// Excursion one runs on `[0, 1]` with `g` reaching `x' = 2`; `μ` has no mass
/// on `(1, 2)`, the diagonal is `[2, 3]`, excursion two starts at `3`, `f`
/// reaches `x'` at `x'' = 3.5` and jumps to `f' = −1`.
pub fn single_jump() -> Result<Template> {
    let mut b = Builder::new(0.0);
    b.open(1.0, 1.0, 2.0, 0.3);
    let f_prime = b.f;
    let x_prime = b.g;
    b.skip(x_prime);
    b.diagonal(1.0, 0.3);
    let e2 = b.x;
    b.table.x.pop();
    b.table.f.pop();
    b.table.g.pop();
    b.open(0.5, 2.0, 3.0, 0.4);
    let x_dd = b.x;
    b.jump_f(f_prime);
    b.radial(1.5, 0.5, 0.4);
    let (table, mu) = b.finish()?;
    let nu = reverse_construct_nu(&table, &mu)?;
    Ok(Template {
        table,
        mu,
        nu,
        regeneration: vec![(f_prime, x_prime)],
        f_jump: Some((x_dd, x_prime, f_prime)),
        excursions: vec![0.0, e2],
    })
}

/// Random monotone template with `excursions ∈ {0, 1, 2}`; with two
/// excursions `jump` decides whether `f` of the second jumps over the first.
pub fn random_template(seed: u64, excursions: usize, jump: bool) -> Result<Template> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder::new(rng.gen_range(-1.0..1.0));
    let dens = |rng: &mut ChaCha8Rng| rng.gen_range(0.5..2.0);
    let mut regeneration = vec![];
    let mut f_jump = None;
    let mut starts = vec![];
    let lead = rng.gen_range(0.2..1.0);
    let d = dens(&mut rng);
    b.diagonal(lead, d);
    if excursions == 0 {
        let d = dens(&mut rng);
        b.diagonal(rng.gen_range(0.5..1.5), d);
        let (table, mu) = b.finish()?;
        let nu = reverse_construct_nu(&table, &mu)?;
        return Ok(Template { table, mu, nu, regeneration, f_jump, excursions: starts });
    }
    let excursion = |b: &mut Builder, rng: &mut ChaCha8Rng, pieces: usize| {
        let len = rng.gen_range(0.2..0.6);
        let (alpha, beta) = (rng.gen_range(0.4..2.0), rng.gen_range(1.3..3.0));
        let d = dens(rng);
        b.open(len, alpha, beta, d);
        for _ in 1..pieces {
            let c = b.f + rng.gen_range(0.2..0.8) * (b.x - b.f);
            let len = rng.gen_range(0.1..0.5);
            let d = dens(rng);
            b.radial(c, len, d);
        }
    };
    starts.push(b.x);
    let pieces = rng.gen_range(1..=3);
    excursion(&mut b, &mut rng, pieces);
    if excursions >= 2 {
        let (f_prime, x_prime) = (b.f, b.g);
        regeneration.push((f_prime, x_prime));
        b.skip(x_prime);
        let d = dens(&mut rng);
        b.diagonal(rng.gen_range(0.3..1.0), d);
        b.table.x.pop();
        b.table.f.pop();
        b.table.g.pop();
        starts.push(b.x);
        let e2 = b.x;
        let (alpha, beta) = (rng.gen_range(0.5..2.0), rng.gen_range(1.3..3.0));
        // distance at which f of the first piece would reach x'
        let to_jump = (e2 - x_prime) / alpha;
        let d2 = dens(&mut rng);
        if jump {
            b.open(to_jump, alpha, beta, d2);
            let x_dd = b.x;
            b.jump_f(f_prime);
            f_jump = Some((x_dd, x_prime, f_prime));
            for _ in 0..rng.gen_range(1..=2) {
                let c = b.f + rng.gen_range(0.2..0.8) * (b.x - b.f);
                let len = rng.gen_range(0.1..0.5);
                let d = dens(&mut rng);
                b.radial(c, len, d);
            }
        } else {
            b.open(rng.gen_range(0.2..0.9) * to_jump, alpha, beta, d2);
            if rng.gen_bool(0.5) {
                // a second piece that still stops short of x'
                let c = b.f + rng.gen_range(0.2..0.8) * (b.x - b.f);
                let room = b.len_to(c, x_prime);
                let len = rng.gen_range(0.2..0.8) * room;
                let d = dens(&mut rng);
                b.radial(c, len, d);
            }
        }
    }
    let _ = Builder::len_to_g;
    let (table, mu) = b.finish()?;
    let nu = reverse_construct_nu(&table, &mu)?;
    Ok(Template { table, mu, nu, regeneration, f_jump, excursions: starts })
}

/// The mixture used by the property suites: seeds cycle through 0, 1 and 2
/// excursions, with and without a jump.
pub fn suite_template(seed: u64) -> Result<Template> {
    match seed % 4 {
        0 => random_template(seed, 1, false),
        1 => random_template(seed, 2, true),
        2 => random_template(seed, 2, false),
        _ => random_template(seed, if seed % 8 == 3 { 0 } else { 1 }, false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{check_convex_order, irreducible_components};

    #[test]
    fn single_jump_shape() {
        let t = single_jump().unwrap();
        assert!((t.mu.mass() - 1.0).abs() < 1e-14);
        assert!(check_convex_order(&t.mu, &t.nu).holds());
        let s = irreducible_components(&t.mu, &t.nu).unwrap();
        assert_eq!(s.excess.len(), 2, "{:?}", s.excess);
        assert_eq!(t.f_jump, Some((3.5, 2.0, -1.0)));
        assert_eq!(t.g_at_jump(), Some(4.5));
    }

    #[test]
    fn random_templates_are_valid() {
        for seed in 0..40 {
            let t = suite_template(seed).unwrap();
            assert!(check_convex_order(&t.mu, &t.nu).holds(), "seed {seed}");
        }
    }

    #[test]
    fn split_pair_touches_zero() {
        let (mu, nu) = split_pair(100);
        assert!((nu.put(0.0) - mu.put(0.0)).abs() < 1e-14);
    }
}
