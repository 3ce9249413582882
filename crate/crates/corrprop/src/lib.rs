//! Online stochastic bipartite matching via correlated proposals.
//!
//! Offline nodes are known up front; online node `t` arrives with probability
//! `p_t` and must be matched or dropped on arrival. The crate provides:
//!
//! * [`instance`]: instance model, generators and JSON I/O.
//! * [`lp`]: the LP relaxation of the optimal online policy and a dense simplex.
//! * [`pivotal`]: linear-order pivotal sampling, sampled and enumerated.
//! * [`engine`]: the proposal algorithms, Monte Carlo simulation and exact evaluation.
//! * [`oracle`]: exact optimum-online dynamic programs and a prophet baseline.
//! * [`bounds`]: lower bounds on `E[min(1, X)]` for weighted Bernoulli sums.
//! * [`certify`]: Lipschitz grid certificates and analysis-inequality checks.
//!
//! All indices are 0-based in the API and 1-based in the JSON file format.

pub mod bounds;
pub mod certify;
pub mod engine;
pub mod error;
pub mod instance;
pub mod lp;
pub mod oracle;
pub mod pivotal;

pub use error::{Error, Result};

/// Values within this distance of an integer are treated as integral.
pub const INTEGRALITY_EPS: f64 = 1e-12;
