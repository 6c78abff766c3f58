//! Bayesian weighted stochastic block models for fully connected,
//! undirected weighted networks.
//!
//! The crate covers the whole path from a compositional abundance table to
//! community estimates:
//!
//! - [`preprocess`]: prevalence filter, MCLR transform, rank correlation and
//!   Fisher transform producing a [`WeightMatrix`].
//! - [`model`]: partitions, block statistics and the normal-inverse-gamma
//!   conjugate update.
//! - [`wsbm`] / [`wsibm`]: blocked Gibbs samplers for a fixed number of
//!   communities and for a truncated Dirichlet process.
//! - [`inference`]: MAP and co-clustering (PPM) point estimates, multi-chain
//!   consensus and block-mean credible intervals.
//! - [`evalsim`]: planted-partition simulation, ARI/NMI and a replication
//!   harness.

pub mod error;
pub mod evalsim;
pub mod fit;
mod gibbs;
pub mod inference;
pub mod io;
pub mod model;
pub mod preprocess;
pub mod sampling;
pub mod trace;
pub mod weights;
pub mod wsbm;
pub mod wsibm;

pub use error::{Error, Result};
pub use model::{BlockParameters, BlockStats, CommunityAssignment, NigPrior, PosteriorNig};
pub use trace::ChainTrace;
pub use weights::WeightMatrix;
