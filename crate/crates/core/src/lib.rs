//! Symmetric multi-marginal optimal transport with pairwise costs, solved by
//! genetic column generation.
//!
//! The transport problem over `N` identical marginals on an ℓ-point grid is
//! written as a linear program over N-particle configurations ("columns").
//! There are `C(N+ℓ−1, N)` of them, so the solver only ever holds a pool of
//! at most `βℓ` configurations: [`gencol::run`] alternates between solving the
//! restricted LP ([`rmp`]) and growing the pool with mutated configurations
//! that price out against the current dual potential.
//!
//! ```
//! use gencol_core::{gencol::{run, GenColConfig}, state_space::Marginal};
//!
//! let cfg = GenColConfig::coulomb_1d(3, 9, 0.1, Marginal::uniform(9)).unwrap();
//! let result = run(&cfg).unwrap();
//! assert!(result.certificate.holds(1e-8));
//! ```
//!
//! [`oracles`] has exact references for testing: the full LP by enumeration,
//! the uniformly spaced solution of the homogeneous 1D problem, and brute-force
//! deciders for the clique/pricing reduction.

pub mod cost;
pub mod error;
pub mod experiment;
pub mod gencol;
pub mod io;
pub mod oracles;
pub mod rmp;
pub mod state_space;

pub use cost::{CostMatrix, PairDensity, PairPotential};
pub use error::{Error, Result};
pub use gencol::{GenColConfig, GenColResult, RunTrace, Termination};
pub use rmp::{Certificate, RestrictedProblem, RmpSolution};
pub use state_space::{Column, Grid, Marginal, MarginalKind};
