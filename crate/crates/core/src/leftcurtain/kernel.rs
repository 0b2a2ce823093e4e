use serde::{Deserialize, Serialize};

use super::map::LeftCurtainMap;
use super::solver::Triple;

/// The law `χ_{f,x,g}`: the first exit of Brownian motion from `(f, g)`
/// started at `x`. Degenerates to `δ_x` when `x` is an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPoint {
    pub down: f64,
    pub up: f64,
    /// Mass at `down`; `up` carries the rest.
    pub p_down: f64,
}

impl TwoPoint {
    pub fn dirac(x: f64) -> Self {
        TwoPoint { down: x, up: x, p_down: 1.0 }
    }

    pub fn from_triple(t: &Triple) -> Self {
        if (t.g - t.x) * (t.x - t.f) <= 0.0 {
            return Self::dirac(t.x);
        }
        TwoPoint { down: t.f, up: t.g, p_down: (t.g - t.x) / (t.g - t.f) }
    }

    pub fn p_up(&self) -> f64 {
        1.0 - self.p_down
    }

    pub fn is_dirac(&self) -> bool {
        self.p_down == 1.0 && self.down == self.up
    }

    pub fn mean(&self) -> f64 {
        self.p_down * self.down + self.p_up() * self.up
    }

    /// `E[h(Y)]`.
    pub fn expect(&self, h: impl Fn(f64) -> f64) -> f64 {
        if self.is_dirac() {
            return h(self.down);
        }
        self.p_down * h(self.down) + self.p_up() * h(self.up)
    }
}

pub fn coupling_kernel(map: &LeftCurtainMap, x: f64) -> TwoPoint {
    TwoPoint::from_triple(&map.eval(x))
}
