// `!(a < b)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, LogNormal, Normal};

use crate::error::{Error, Result};

/// Whether a measure is a pure grid of atoms, a piecewise-uniform density,
/// or a mixture of both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    AtomicGrid,
    DensitySampled,
    Mixed,
}

/// One building block of a [`Measure`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    /// Point mass `mass` at `at`.
    Atom { at: f64, mass: f64 },
    /// Mass spread uniformly over `(lo, hi)`.
    Cell { lo: f64, hi: f64, mass: f64 },
}

/// A finite measure on the line held as sorted knots carrying atoms, with
/// mass spread uniformly over each gap between consecutive knots.
///
/// The CDF is piecewise linear with jumps, so the put potential
/// `P(k) = ∫ (k - x)⁺ dη` is an exact piecewise quadratic. Pure atom grids
/// and piecewise-uniform densities are the two special cases.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    points: Vec<f64>,
    atoms: Vec<f64>,
    cells: Vec<f64>,
    kind: MeasureKind,
    below: Vec<f64>,
    put_at: Vec<f64>,
    mass: f64,
    moment: f64,
}

impl Measure {
    /// General constructor. `atoms.len() == points.len()` and
    /// `cells.len() == points.len() - 1` (empty when there are no points).
    pub fn new(points: Vec<f64>, atoms: Vec<f64>, cells: Vec<f64>) -> Result<Self> {
        let n = points.len();
        if atoms.len() != n {
            return Err(Error::InvalidMeasure(format!(
                "{} points but {} atom weights",
                n,
                atoms.len()
            )));
        }
        if cells.len() != n.saturating_sub(1) {
            return Err(Error::InvalidMeasure(format!(
                "{} points need {} cell masses, got {}",
                n,
                n.saturating_sub(1),
                cells.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite support point".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMeasure("points must be strictly increasing".into()));
        }
        if atoms.iter().chain(cells.iter()).any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidMeasure("weights must be finite and nonnegative".into()));
        }
        let has_atoms = atoms.iter().any(|&a| a > 0.0);
        let has_cells = cells.iter().any(|&c| c > 0.0);
        let kind = match (has_atoms, has_cells) {
            (_, false) => MeasureKind::AtomicGrid,
            (false, true) => MeasureKind::DensitySampled,
            (true, true) => MeasureKind::Mixed,
        };
        let mut below = vec![0.0; n];
        let mut put_at = vec![0.0; n];
        let mut moment = 0.0;
        for i in 0..n {
            moment += atoms[i] * points[i];
            if i + 1 < n {
                let h = points[i + 1] - points[i];
                let after = below[i] + atoms[i];
                below[i + 1] = after + cells[i];
                put_at[i + 1] = put_at[i] + after * h + 0.5 * cells[i] * h;
                moment += cells[i] * 0.5 * (points[i] + points[i + 1]);
            }
        }
        let mass = if n == 0 { 0.0 } else { below[n - 1] + atoms[n - 1] };
        Ok(Measure { points, atoms, cells, kind, below, put_at, mass, moment })
    }

    /// Grid of atoms.
    pub fn atomic(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = points.len();
        Self::new(points, weights, vec![0.0; n.saturating_sub(1)])
    }

    /// Piecewise-uniform density: `cells[i]` spread over `(points[i], points[i+1])`.
    pub fn density(points: Vec<f64>, cells: Vec<f64>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![0.0; n], cells)
    }

    /// The empty measure.
    pub fn zero() -> Self {
        Self::new(vec![], vec![], vec![]).expect("empty measure is valid")
    }

    /// Atoms given as unsorted `(point, weight)` pairs; coincident points merge.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let mut v: Vec<(f64, f64)> = pairs.to_vec();
        if v.iter().any(|(p, _)| !p.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite support point".into()));
        }
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut points: Vec<f64> = Vec::with_capacity(v.len());
        let mut weights: Vec<f64> = Vec::with_capacity(v.len());
        for (p, w) in v {
            if points.last() == Some(&p) {
                *weights.last_mut().unwrap() += w;
            } else {
                points.push(p);
                weights.push(w);
            }
        }
        Self::atomic(points, weights)
    }

    /// Sum of uniform cells and atoms, possibly overlapping. Knots are the
    /// union of all endpoints; overlapping densities add.
    pub fn from_pieces(pieces: &[Piece]) -> Result<Self> {
        let mut knots: Vec<f64> = Vec::with_capacity(2 * pieces.len());
        for p in pieces {
            match *p {
                Piece::Atom { at, mass } if mass > 0.0 => knots.push(at),
                Piece::Cell { lo, hi, mass } if mass > 0.0 => {
                    if !(lo < hi) {
                        return Err(Error::InvalidMeasure(format!("empty cell ({lo}, {hi})")));
                    }
                    knots.push(lo);
                    knots.push(hi);
                }
                _ => {}
            }
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite piece endpoint".into()));
        }
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let n = knots.len();
        let idx = |x: f64| knots.partition_point(|&k| k < x);
        let mut atoms = vec![0.0; n];
        let mut slope = vec![0.0; n + 1];
        for p in pieces {
            match *p {
                Piece::Atom { at, mass } if mass > 0.0 => atoms[idx(at)] += mass,
                Piece::Cell { lo, hi, mass } if mass > 0.0 => {
                    let dens = mass / (hi - lo);
                    slope[idx(lo)] += dens;
                    slope[idx(hi)] -= dens;
                }
                _ => {}
            }
        }
        let peak = slope.iter().fold(0.0f64, |m, s| m.max(*s));
        let mut cells = vec![0.0; n.saturating_sub(1)];
        let mut run = 0.0;
        for i in 0..n.saturating_sub(1) {
            run += slope[i];
            // the running sum leaves rounding residue in gaps between cells
            if run > 1e-12 * peak {
                cells[i] = run * (knots[i + 1] - knots[i]);
            }
        }
        Self::new(knots, atoms, cells)
    }

    /// `U[a, b]` on `n` equal cells.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a < b) || n == 0 {
            return Err(Error::InvalidMeasure(format!("bad uniform law [{a}, {b}] on {n} cells")));
        }
        let points: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        Self::density(points, vec![1.0 / n as f64; n])
    }

    /// Piecewise-uniform law with `n` equal-mass cells between quantiles of
    /// a continuous distribution, truncated at `tail` mass on each side.
    pub fn from_quantiles(quantile: impl Fn(f64) -> f64, n: usize, tail: f64) -> Result<Self> {
        if n == 0 || !(0.0..0.5).contains(&tail) {
            return Err(Error::InvalidMeasure(format!("bad discretization n={n}, tail={tail}")));
        }
        let points: Vec<f64> = (0..=n)
            .map(|i| quantile(tail + (1.0 - 2.0 * tail) * i as f64 / n as f64))
            .collect();
        Self::density(points, vec![1.0 / n as f64; n])
    }

    /// `N(mean, variance)` discretized by quantiles; the barycentre is
    /// re-centred on `mean` by translation.
    pub fn normal(mean: f64, variance: f64, n: usize, tail: f64) -> Result<Self> {
        let d = Normal::new(mean, variance.sqrt())
            .map_err(|e| Error::InvalidMeasure(format!("normal law: {e}")))?;
        Self::from_quantiles(|p| d.inverse_cdf(p), n, tail)?.recentred(mean)
    }

    /// Law of `exp(Z)` with `Z ~ N(m, s2)`, discretized by quantiles and
    /// re-centred on its exact mean `exp(m + s2/2)`.
    pub fn lognormal(m: f64, s2: f64, n: usize, tail: f64) -> Result<Self> {
        let d = LogNormal::new(m, s2.sqrt())
            .map_err(|e| Error::InvalidMeasure(format!("lognormal law: {e}")))?;
        Self::from_quantiles(|p| d.inverse_cdf(p), n, tail)?.recentred((m + 0.5 * s2).exp())
    }

    fn recentred(self, mean: f64) -> Result<Self> {
        let shift = mean - self.barycentre().unwrap_or(mean);
        self.shifted(shift)
    }

    /// Translate by `shift`.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        Self::new(
            self.points.iter().map(|p| p + shift).collect(),
            self.atoms.clone(),
            self.cells.clone(),
        )
    }

    /// Push forward by `x -> s x` with `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::InvalidMeasure(format!("scale must be positive, got {s}")));
        }
        Self::new(
            self.points.iter().map(|p| p * s).collect(),
            self.atoms.clone(),
            self.cells.clone(),
        )
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Atom weight at each knot.
    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    /// Mass of each gap between consecutive knots.
    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass == 0.0
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// First moment `∫ x dη`.
    pub fn moment(&self) -> f64 {
        self.moment
    }

    /// `None` for a zero-mass measure.
    pub fn barycentre(&self) -> Option<f64> {
        (self.mass > 0.0).then(|| self.moment / self.mass)
    }

    /// Largest atom as `(location, mass)`.
    pub fn max_atom(&self) -> Option<(f64, f64)> {
        self.points
            .iter()
            .zip(&self.atoms)
            .filter(|(_, &a)| a > 0.0)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(&p, &a)| (p, a))
    }

    /// Closed convex hull of the support, `(ℓ, r)`.
    pub fn support(&self) -> Option<(f64, f64)> {
        let n = self.points.len();
        let lo = (0..n).find(|&i| self.atoms[i] > 0.0 || (i + 1 < n && self.cells[i] > 0.0))?;
        let hi = (0..n)
            .rev()
            .find(|&i| self.atoms[i] > 0.0 || (i > 0 && self.cells[i - 1] > 0.0))?;
        Some((self.points[lo], self.points[hi]))
    }

    /// Pieces in increasing order; zero-mass pieces are skipped.
    pub fn pieces(&self) -> impl Iterator<Item = Piece> + '_ {
        let n = self.points.len();
        (0..n).flat_map(move |i| {
            let atom = (self.atoms[i] > 0.0).then(|| Piece::Atom { at: self.points[i], mass: self.atoms[i] });
            let cell = (i + 1 < n && self.cells[i] > 0.0).then(|| Piece::Cell {
                lo: self.points[i],
                hi: self.points[i + 1],
                mass: self.cells[i],
            });
            atom.into_iter().chain(cell)
        })
    }

    /// Index of the last knot `≤ k`, if any.
    fn floor_index(&self, k: f64) -> Option<usize> {
        self.points.partition_point(|&p| p <= k).checked_sub(1)
    }

    /// Put potential `P(k) = ∫ (k − x)⁺ dη(x)`.
    pub fn put(&self, k: f64) -> f64 {
        let Some(i) = self.floor_index(k) else { return 0.0 };
        let t = k - self.points[i];
        let after = self.below[i] + self.atoms[i];
        if i + 1 == self.points.len() {
            return self.put_at[i] + after * t;
        }
        let h = self.points[i + 1] - self.points[i];
        self.put_at[i] + after * t + 0.5 * self.cells[i] * t * t / h
    }

    /// Right-continuous CDF `η((−∞, k])`.
    pub fn cdf(&self, k: f64) -> f64 {
        let Some(i) = self.floor_index(k) else { return 0.0 };
        let after = self.below[i] + self.atoms[i];
        if i + 1 == self.points.len() {
            return after;
        }
        let h = self.points[i + 1] - self.points[i];
        after + self.cells[i] * (k - self.points[i]) / h
    }

    /// Left limit `η((−∞, k))`, the left derivative of [`Measure::put`].
    pub fn cdf_left(&self, k: f64) -> f64 {
        let Some(i) = self.points.partition_point(|&p| p < k).checked_sub(1) else {
            return 0.0;
        };
        let after = self.below[i] + self.atoms[i];
        if i + 1 == self.points.len() {
            return after;
        }
        let h = self.points[i + 1] - self.points[i];
        after + self.cells[i] * (k - self.points[i]) / h
    }

    /// Atom at exactly `k`.
    pub fn atom_at(&self, k: f64) -> f64 {
        match self.points.binary_search_by(|p| p.total_cmp(&k)) {
            Ok(i) => self.atoms[i],
            Err(_) => 0.0,
        }
    }

    /// Density of the continuous part at `k` (right-continuous).
    pub fn density_at(&self, k: f64) -> f64 {
        match self.floor_index(k) {
            Some(i) if i + 1 < self.points.len() => self.cells[i] / (self.points[i + 1] - self.points[i]),
            _ => 0.0,
        }
    }

    /// Density just left of `k`.
    pub fn density_left(&self, k: f64) -> f64 {
        match self.points.partition_point(|&p| p < k).checked_sub(1) {
            Some(i) if i + 1 < self.points.len() => self.cells[i] / (self.points[i + 1] - self.points[i]),
            _ => 0.0,
        }
    }

    /// `∫_{(−∞,k]} x dη`.
    pub fn moment_below(&self, k: f64) -> f64 {
        k * self.cdf(k) - self.put(k)
    }

    /// `∫_{(−∞,k)} x dη`.
    pub fn moment_below_left(&self, k: f64) -> f64 {
        k * self.cdf_left(k) - self.put(k)
    }

    /// Smallest `k` with `η((−∞, k]) ≥ q`; `None` when `q` exceeds the mass.
    pub fn quantile(&self, q: f64) -> Option<f64> {
        let n = self.points.len();
        if n == 0 || q > self.mass {
            return None;
        }
        let (mut lo, mut hi) = (0usize, n - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.below[mid] + self.atoms[mid] < q {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let i = lo;
        if i > 0 && self.below[i] >= q && self.cells[i - 1] > 0.0 {
            let start = self.below[i - 1] + self.atoms[i - 1];
            let h = self.points[i] - self.points[i - 1];
            let t = ((q - start) / self.cells[i - 1]).clamp(0.0, 1.0);
            return Some(self.points[i - 1] + t * h);
        }
        Some(self.points[i])
    }

    /// Logarithmic potential `U(k) = −∫ |k − x| dη(x)`.
    pub fn potential_u(&self, k: f64) -> f64 {
        -(2.0 * self.put(k) - (k * self.mass - self.moment))
    }

    /// Split `η` into its restriction to the open interval `(c, d)` and the
    /// remainder.
    pub fn restrict(&self, c: f64, d: f64) -> Result<(Measure, Measure)> {
        if !(c < d) {
            return Err(Error::InvalidMeasure(format!("restrict needs c < d, got ({c}, {d})")));
        }
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        for piece in self.pieces() {
            match piece {
                Piece::Atom { at, .. } => {
                    if c < at && at < d {
                        inside.push(piece)
                    } else {
                        outside.push(piece)
                    }
                }
                Piece::Cell { lo, hi, mass } => {
                    let dens = mass / (hi - lo);
                    let a = lo.max(c);
                    let b = hi.min(d);
                    if a < b {
                        inside.push(Piece::Cell { lo: a, hi: b, mass: dens * (b - a) });
                    }
                    if lo < a.min(hi) {
                        let e = a.min(hi);
                        outside.push(Piece::Cell { lo, hi: e, mass: dens * (e - lo) });
                    }
                    if b.max(lo) < hi {
                        let s = b.max(lo);
                        outside.push(Piece::Cell { lo: s, hi, mass: dens * (hi - s) });
                    }
                }
            }
        }
        Ok((Self::from_pieces(&inside)?, Self::from_pieces(&outside)?))
    }

    /// Collapse every cell onto its barycentre (a coarsening in convex order).
    pub fn collapse_cells(&self) -> Result<Measure> {
        let pairs: Vec<(f64, f64)> = self
            .pieces()
            .map(|p| match p {
                Piece::Atom { at, mass } => (at, mass),
                Piece::Cell { lo, hi, mass } => (0.5 * (lo + hi), mass),
            })
            .collect();
        Self::from_pairs(&pairs)
    }

    /// Move every cell's mass to its endpoints, half each (a dilation in
    /// convex order; potentials agree at the knots).
    pub fn split_cells(&self) -> Result<Measure> {
        let n = self.points.len();
        let mut w = self.atoms.clone();
        for i in 0..n.saturating_sub(1) {
            w[i] += 0.5 * self.cells[i];
            w[i + 1] += 0.5 * self.cells[i];
        }
        Self::atomic(self.points.clone(), w)
    }

    /// Convolution of an atomic measure with `U[−h/2, h/2]`. Applying the
    /// same `h` to two measures preserves convex order between them.
    pub fn smoothed(&self, h: f64) -> Result<Measure> {
        if !(h > 0.0) {
            return Err(Error::InvalidMeasure(format!("smoothing width must be positive, got {h}")));
        }
        if self.cells.iter().any(|&c| c > 0.0) {
            return Err(Error::InvalidMeasure("only atomic grids can be smoothed".into()));
        }
        let pieces: Vec<Piece> = self
            .pieces()
            .map(|p| match p {
                Piece::Atom { at, mass } => Piece::Cell { lo: at - 0.5 * h, hi: at + 0.5 * h, mass },
                cell => cell,
            })
            .collect();
        Self::from_pieces(&pieces)
    }

    /// `∫_0^q Q(t) dt` for the quantile function `Q`, via `q Q(q) − P(Q(q))`.
    pub fn quantile_integral(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return 0.0;
        }
        let q = q.min(self.mass);
        let k = self.quantile(q).unwrap_or_else(|| *self.points.last().unwrap());
        q * k - self.put(k)
    }

    /// `n` atoms of equal mass at the barycentres of consecutive quantile
    /// slices. The result is dominated by `self` in convex order.
    pub fn quantile_barycentres(&self, n: usize) -> Result<Measure> {
        if n == 0 || self.mass <= 0.0 {
            return Err(Error::InvalidMeasure("need a positive count and mass".into()));
        }
        let w = self.mass / n as f64;
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let (a, b) = (i as f64 * w, if i + 1 == n { self.mass } else { (i + 1) as f64 * w });
                ((self.quantile_integral(b) - self.quantile_integral(a)) / (b - a), b - a)
            })
            .collect();
        Self::from_pairs(&pairs)
    }

    /// Atoms on the `m + 1` quantile knots `Q(i/m)`: each slice between
    /// consecutive knots is split onto its endpoints keeping its mass and
    /// mean. The result dominates `self` in convex order.
    pub fn quantile_endpoint_split(&self, m: usize) -> Result<Measure> {
        if m == 0 || self.mass <= 0.0 {
            return Err(Error::InvalidMeasure("need a positive count and mass".into()));
        }
        let (l, r) = self.support().expect("positive mass");
        let w = self.mass / m as f64;
        let mut pairs = Vec::with_capacity(2 * m);
        for i in 0..m {
            let (qa, qb) = (i as f64 * w, if i + 1 == m { self.mass } else { (i + 1) as f64 * w });
            let a = if i == 0 { l } else { self.quantile(qa).unwrap_or(r) };
            let b = if i + 1 == m { r } else { self.quantile(qb).unwrap_or(r) };
            let mass = qb - qa;
            let mean = (self.quantile_integral(qb) - self.quantile_integral(qa)) / mass;
            if b > a {
                let t = ((mean - a) / (b - a)).clamp(0.0, 1.0);
                pairs.push((a, mass * (1.0 - t)));
                pairs.push((b, mass * t));
            } else {
                pairs.push((a, mass));
            }
        }
        Self::from_pairs(&pairs)
    }

    /// Rescale all weights so that the total mass is one.
    pub fn normalized(&self) -> Result<Measure> {
        if !(self.mass > 0.0) {
            return Err(Error::InvalidMeasure("cannot normalize a zero measure".into()));
        }
        let s = 1.0 / self.mass;
        Self::new(
            self.points.clone(),
            self.atoms.iter().map(|a| a * s).collect(),
            self.cells.iter().map(|c| c * s).collect(),
        )
    }
}
