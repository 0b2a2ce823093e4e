//! Monte Carlo paths drawn from a transport plan.
//!
//! Each chunk of paths owns its own ChaCha8 stream, so a fixed seed gives the
//! same samples whichever [`Exec`] strategy runs the chunks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hedging::{verify_pathwise_with, Superhedge, ViolationReport};
use crate::leftcurtain::TransportPlan;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub x: f64,
    pub y: f64,
    /// Stopped at the first date under the threshold rule.
    pub exercised: bool,
    pub payoff: f64,
    /// Portfolio value at the moment the option is exercised.
    pub hedge_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub samples: Vec<PathSample>,
    pub mean_payoff: f64,
    pub std_error: f64,
    pub violations: ViolationReport,
}

impl SimulationReport {
    /// `x,y,exercised,payoff,hedge_value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,exercised,payoff,hedge_value\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{},{},{}\n", s.x, s.y, u8::from(s.exercised), s.payoff, s.hedge_value));
        }
        out
    }

    /// Whether `price` lies within `k` standard errors of the sample mean.
    pub fn consistent_with(&self, price: f64, k: f64) -> bool {
        (self.mean_payoff - price).abs() <= k * self.std_error.max(f64::EPSILON)
    }
}

/// `n` independent draws of `(x, y)` from `plan`.
pub fn sample_pairs(plan: &TransportPlan, n: usize, seed: u64, exec: Exec) -> Result<Vec<(f64, f64)>> {
    if plan.entries.is_empty() {
        return Err(Error::InvalidMeasure("cannot sample from an empty plan".into()));
    }
    let mut cum = Vec::with_capacity(plan.entries.len());
    let mut acc = 0.0;
    for &(_, _, w) in &plan.entries {
        acc += w;
        cum.push(acc);
    }
    let chunks = n.div_ceil(CHUNK);
    let parts = exec.map(chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let len = CHUNK.min(n - c * CHUNK);
        (0..len)
            .map(|_| {
                let u = rng.gen::<f64>() * acc;
                let e = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
                let (i, j, _) = plan.entries[e];
                (plan.rows[i], plan.cols[j])
            })
            .collect::<Vec<_>>()
    });
    Ok(parts.into_iter().flatten().collect())
}

/// Simulate the threshold rule (exercise at the first date iff `x <
/// threshold`) against the hedge `h` on `n` paths drawn from `plan`.
pub fn simulate(
    plan: &TransportPlan,
    h: &Superhedge,
    threshold: f64,
    n: usize,
    seed: u64,
    exec: Exec,
) -> Result<SimulationReport> {
    let pairs = sample_pairs(plan, n, seed, exec)?;
    let k = h.strikes;
    let samples: Vec<PathSample> = pairs
        .iter()
        .map(|&(x, y)| {
            let exercised = x < threshold;
            let base = h.phi(x) + h.psi.eval(y);
            if exercised {
                PathSample { x, y, exercised, payoff: (k.k1 - x).max(0.0), hedge_value: base + h.theta1(x) * (y - x) }
            } else {
                PathSample { x, y, exercised, payoff: (k.k2 - y).max(0.0), hedge_value: base }
            }
        })
        .collect();
    let nf = samples.len() as f64;
    let mean_payoff = samples.iter().map(|s| s.payoff).sum::<f64>() / nf;
    let var = samples.iter().map(|s| (s.payoff - mean_payoff).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
    let violations = verify_pathwise_with(h, &pairs, exec);
    Ok(SimulationReport { samples, mean_payoff, std_error: (var / nf).sqrt(), violations })
}

/// Mean of `y − x` and its standard error in `buckets` equal-count bins of
/// sorted `x`: a martingale check on sampled pairs.
pub fn bucket_drift(pairs: &[(f64, f64)], buckets: usize) -> Vec<(f64, f64, f64)> {
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let size = sorted.len().div_ceil(buckets.max(1)).max(1);
    sorted
        .chunks(size)
        .map(|c| {
            let n = c.len() as f64;
            let xm = c.iter().map(|p| p.0).sum::<f64>() / n;
            let dm = c.iter().map(|p| p.1 - p.0).sum::<f64>() / n;
            let var = c.iter().map(|p| (p.1 - p.0 - dm).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            (xm, dm, (var / n).sqrt())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::uniform_pair;
    use crate::hedging::superhedge_for;
    use crate::leftcurtain::{to_transport_plan, LeftCurtainMap};
    use crate::measures::Measure;
    use crate::pricing::{price, StrikePair};

    #[test]
    fn same_samples_under_both_strategies() {
        let (mu, nu) = uniform_pair(200);
        let plan = to_transport_plan(&LeftCurtainMap::build(&mu, &nu).unwrap()).unwrap();
        let a = sample_pairs(&plan, 10_000, 7, Exec::Sequential).unwrap();
        let b = sample_pairs(&plan, 10_000, 7, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_pairs(&plan, 10_000, 8, Exec::Sequential).unwrap());
    }

    #[test]
    fn identity_plan_never_moves() {
        let mu = Measure::atomic(vec![-1.0, 0.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
        let pairs = sample_pairs(&TransportPlan::identity(&mu), 5000, 1, Exec::default()).unwrap();
        assert!(pairs.iter().all(|&(x, y)| x == y));
    }

    #[test]
    fn uniform_paths_match_the_price() {
        let (mu, nu) = uniform_pair(1000);
        let map = LeftCurtainMap::build(&mu, &nu).unwrap();
        let k = StrikePair::new(0.5, 0.25);
        let sol = price(&map, k).unwrap();
        let h = superhedge_for(&sol, &map, k).unwrap();
        let plan = to_transport_plan(&map).unwrap();
        let rep = simulate(&plan, &h, sol.threshold, 100_000, 42, Exec::default()).unwrap();
        assert_eq!(rep.violations.violations, 0);
        assert!(rep.consistent_with(sol.price, 3.0), "{} ± {} vs {}", rep.mean_payoff, rep.std_error, sol.price);
        assert!(rep.samples.iter().all(|s| s.hedge_value >= s.payoff - 1e-9));
        for (_, d, se) in bucket_drift(&rep.samples.iter().map(|s| (s.x, s.y)).collect::<Vec<_>>(), 10) {
            assert!(d.abs() <= 4.0 * se, "drift {d} se {se}");
        }
    }
}
