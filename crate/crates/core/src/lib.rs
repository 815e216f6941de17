//! Joint condition-based maintenance and spare-parts provisioning under
//! distributionally robust chance constraints.
//!
//! The pipeline runs, bottom to top:
//!
//! * [`degradation`]: two-phase exponential degradation signals with Brownian
//!   noise and first-passage failure detection.
//! * [`prognostics`]: prior fitting from training signals, conjugate updating on
//!   a partial signal, and Inverse-Gaussian remaining-life sampling.
//! * [`dro`]: closed-form worst-case parameters over a type-∞ Wasserstein ball
//!   and the exact Poisson-binomial CDF recursion.
//! * [`milp`]: a small solver-agnostic MILP layer with a HiGHS backend.
//! * [`model`]: the problem instance, the exact MILP reformulation, and an
//!   arithmetic solution verifier.
//! * [`baselines`]: SAA, robust, and sequential comparison pipelines.
//! * [`harness`]: rolling-horizon closed-loop simulation and KPIs.

pub mod baselines;
pub mod degradation;
pub mod dro;
pub mod error;
pub mod harness;
pub mod io;
pub mod milp;
pub mod model;
pub mod presets;
pub mod prognostics;
pub mod rng;

pub use error::{Error, Result};
