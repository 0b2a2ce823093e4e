use serde::{Deserialize, Serialize};

use super::convex::{check_convex_order, Verdict};
use super::measure::Measure;
use crate::error::{Error, Result};

/// European put prices for one maturity, quoted against undiscounted
/// strikes, together with the bank-account growth factor to that maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PutCurve {
    pub label: String,
    pub strikes: Vec<f64>,
    pub prices: Vec<f64>,
    pub discount: f64,
}

const CURVE_TOL: f64 = 1e-10;

impl PutCurve {
    pub fn new(label: impl Into<String>, strikes: Vec<f64>, prices: Vec<f64>, discount: f64) -> Result<Self> {
        let c = PutCurve { label: label.into(), strikes, prices, discount };
        c.validate()?;
        Ok(c)
    }

    /// Read a `strike,price` CSV body (header optional).
    pub fn from_csv_str(label: impl Into<String>, text: &str, discount: f64) -> Result<Self> {
        let mut strikes = Vec::new();
        let mut prices = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split(',').map(str::trim);
            let (Some(a), Some(b)) = (it.next(), it.next()) else {
                return Err(Error::NonConvexCurve(format!("line {}: expected `strike,price`", n + 1)));
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(k), Ok(p)) => {
                    strikes.push(k);
                    prices.push(p);
                }
                _ if n == 0 => continue,
                _ => return Err(Error::NonConvexCurve(format!("line {}: cannot parse `{line}`", n + 1))),
            }
        }
        Self::new(label, strikes, prices, discount)
    }

    /// Strikes in discounted units `k = K̃ / B̃`.
    pub fn discounted_strikes(&self) -> Vec<f64> {
        self.strikes.iter().map(|k| k / self.discount).collect()
    }

    /// Slopes of the linearly interpolated curve in discounted strike.
    fn slopes(&self) -> Vec<f64> {
        let k = self.discounted_strikes();
        (1..k.len())
            .map(|j| (self.prices[j] - self.prices[j - 1]) / (k[j] - k[j - 1]))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::NonConvexCurve(format!("{}: {m}", self.label)));
        if !(self.discount.is_finite() && self.discount > 0.0) {
            return bad(format!("discount factor must be positive, got {}", self.discount));
        }
        if self.strikes.len() != self.prices.len() {
            return bad("strikes and prices differ in length".into());
        }
        if self.strikes.len() < 2 {
            return bad("need at least two strikes".into());
        }
        if self.strikes.iter().chain(&self.prices).any(|v| !v.is_finite()) {
            return bad("non-finite entry".into());
        }
        if self.strikes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("strikes must be strictly increasing".into());
        }
        if self.prices.iter().any(|&p| p < -CURVE_TOL) {
            return bad("negative price".into());
        }
        if self.prices[0].abs() > CURVE_TOL {
            return bad(format!(
                "price at the lowest strike must vanish (got {}); extend the strike range",
                self.prices[0]
            ));
        }
        let s = self.slopes();
        if s.iter().any(|&v| v < -CURVE_TOL) {
            return bad("prices decrease in strike".into());
        }
        if s.iter().any(|&v| v > 1.0 + CURVE_TOL) {
            return bad("put slope exceeds one".into());
        }
        if s.windows(2).any(|w| w[1] - w[0] < -CURVE_TOL) {
            return bad("prices are not convex in strike".into());
        }
        Ok(())
    }

    /// Law read off the left derivative of the interpolated curve: an atom at
    /// each discounted strike equal to the slope increment there. Mass beyond
    /// the last quoted slope is placed on the last strike.
    pub fn to_measure(&self) -> Result<Measure> {
        let k = self.discounted_strikes();
        let s = self.slopes();
        let n = k.len();
        let mut w = vec![0.0; n];
        let mut prev = 0.0;
        for j in 0..n - 1 {
            let sj = s[j].clamp(prev, 1.0);
            w[j] = sj - prev;
            prev = sj;
        }
        w[n - 1] = 1.0 - prev;
        Measure::atomic(k, w)
    }
}

/// Laws `(μ, ν)` of the discounted asset at the two dates. Requires
/// `B̃₂ ≥ B̃₁ ≥ 1` and checks `μ ≤cx ν`.
pub fn measures_from_put_curves(c1: &PutCurve, c2: &PutCurve) -> Result<(Measure, Measure)> {
    if !(c1.discount >= 1.0 && c2.discount >= c1.discount) {
        return Err(Error::NonConvexCurve(format!(
            "discount factors must satisfy B2 >= B1 >= 1, got B1 = {}, B2 = {}",
            c1.discount, c2.discount
        )));
    }
    let mu = c1.to_measure()?;
    let nu = c2.to_measure()?;
    match check_convex_order(&mu, &nu) {
        Verdict::Holds { .. } => Ok((mu, nu)),
        v => Err(v.into_error().expect("failing verdict")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_law_is_a_point_mass() {
        let c = PutCurve::new("t1", vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 0.0, 1.0, 2.0], 1.0).unwrap();
        let m = c.to_measure().unwrap();
        assert_eq!(m.atoms(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn discounting_divides_strikes() {
        let c = PutCurve::new("t1", vec![1.0, 2.0], vec![0.0, 0.5], 1.25).unwrap();
        assert_eq!(c.discounted_strikes(), vec![0.8, 1.6]);
    }

    #[test]
    fn uniform_curve_recovers_cell_weights() {
        let strikes: Vec<f64> = (0..=100).map(|i| -1.0 + 0.02 * i as f64).collect();
        let prices: Vec<f64> = strikes.iter().map(|k| (k + 1.0) * (k + 1.0) / 4.0).collect();
        let c = PutCurve::new("t", strikes.clone(), prices.clone(), 1.0).unwrap();
        let m = c.to_measure().unwrap();
        for &w in &m.atoms()[1..100] {
            assert!((w - 0.01).abs() < 1e-12);
        }
        for (k, p) in strikes.iter().zip(&prices) {
            assert!((m.put(*k) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_concave_curve() {
        let r = PutCurve::new("t", vec![0.0, 1.0, 2.0], vec![0.0, 0.8, 1.0], 1.0);
        assert!(matches!(r, Err(Error::NonConvexCurve(_))));
    }

    #[test]
    fn csv_with_header() {
        let c = PutCurve::from_csv_str("t", "strike,price\n0,0\n1,0.5\n2,1.5\n", 1.0).unwrap();
        assert_eq!(c.strikes, vec![0.0, 1.0, 2.0]);
    }
}
