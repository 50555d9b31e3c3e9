//! Numerical laboratory for mean-field spin glasses.
//!
//! The crate is organized around three layers that cross-validate each other:
//!
//! * **Disorder ensembles** ([`sk`]): exact enumeration of the pair-coupling
//!   Hamiltonian at desk scale, quenched pressure estimates, superadditivity
//!   experiments, and the two classic ground-state heuristics.
//! * **Point processes** ([`rem`], [`cascade`]): the heavy-tailed Poisson
//!   process with power-law intensity, its quasi-stationarity under
//!   multiplicative increments, and the hierarchical cascade built from it.
//! * **Variational functional** ([`parisi`], [`rost`], [`variational`]): the
//!   recursive log-Gaussian solver for the order-parameter functional, cavity
//!   field estimators over random overlap structures, and derivative-free
//!   optimization over step order parameters.
//!
//! Shared vocabulary types (spin configurations, step order parameters,
//! interaction covariances) live in [`spins`], [`order_param`] and
//! [`covariance`]; [`gaussian`] provides correlated sampling and the
//! covariance-differentiation estimators everything else leans on.
//!
//! All randomness flows through [`rng::SeedSpec`], a counter-based splittable
//! seed tree: identical `(root seed, task index)` pairs give bit-identical
//! streams regardless of thread scheduling.

pub mod cascade;
pub mod covariance;
pub mod error;
pub mod gaussian;
pub mod linalg;
pub mod math;
pub mod order_param;
pub mod parisi;
pub mod quad;
pub mod rem;
pub mod rng;
pub mod rost;
pub mod sk;
pub mod spins;
pub mod stats;
pub mod superadd;
pub mod variational;

pub use error::{Error, Result};
pub use order_param::OrderParameter;
pub use rng::SeedSpec;
