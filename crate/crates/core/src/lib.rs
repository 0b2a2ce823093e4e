//! Model-independent pricing of an American put that may be exercised at one
//! of two dates, given the laws of the discounted asset at both dates.
//!
//! The crate follows the pipeline
//!
//! 1. [`measures`]: marginal laws, put potentials, convex order.
//! 2. [`leftcurtain`]: the left-curtain martingale coupling `(f, g)` and its
//!    discrete transport plan.
//! 3. [`pricing`]: region classification, the critical triple and the
//!    highest model-based expected payoff.
//! 4. [`hedging`]: the matching cheapest superhedge and pathwise checks.
//! 5. [`oracle`]: a relaxed linear program on discrete marginals, solved by a
//!    dense simplex, used to bracket the price independently.
//!
//! ```
//! use robust_amput::measures::Measure;
//! use robust_amput::leftcurtain::LeftCurtainMap;
//! use robust_amput::pricing::{price, StrikePair};
//!
//! let mu = Measure::uniform(-1.0, 1.0, 1000).unwrap();
//! let nu = Measure::uniform(-2.0, 2.0, 2000).unwrap();
//! let map = LeftCurtainMap::build(&mu, &nu).unwrap();
//! let sol = price(&map, StrikePair::new(0.5, 0.25)).unwrap();
//! assert!((sol.price - 7785.0 / 10368.0).abs() < 1e-9);
//! ```

pub mod error;
pub mod exec;
pub mod fixtures;
pub mod hedging;
pub mod leftcurtain;
pub mod measures;
pub mod oracle;
pub mod pricing;
pub mod simulate;

pub use error::{Error, Result};
pub use exec::Exec;
