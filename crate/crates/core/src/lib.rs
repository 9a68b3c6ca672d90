//! Hierarchical Dirichlet process topic models under the Chinese restaurant
//! franchise representation.
//!
//! The crate fits an HDP mixture over documents by collapsed Gibbs sampling
//! (customer and table moves) combined with split-merge Metropolis-Hastings
//! proposals on the corpus-level partition of tables into topics. Everything
//! works in natural-log space; topic-word distributions are integrated out
//! against a symmetric Dirichlet prior.
//!
//! Module layout:
//! - [`corpus`]: document/vocabulary containers and LDA-C style I/O
//! - [`state`]: the seating state (words at tables, tables at topics) and its
//!   count bookkeeping
//! - [`marginals`]: collapsed topic-likelihood terms
//! - [`gibbs`]: per-word and per-table Gibbs kernels and sweep driver
//! - [`splitmerge`]: split-merge proposals via restricted sequential allocation
//! - [`hyper`]: auxiliary-variable resampling of the concentration parameters
//! - [`diagnostics`]: traces, mode comparison, held-out likelihood, and an
//!   exact enumerator for tiny problems
//! - [`synth`]: synthetic corpus generation with planted topic structure

pub mod corpus;
pub mod diagnostics;
pub mod gibbs;
pub mod hyper;
pub mod marginals;
pub mod splitmerge;
pub mod state;
pub mod synth;

use rand_chacha::ChaCha8Rng;

/// Standard reproducible generator used across the crate. All samplers take
/// `&mut impl Rng`, so callers may substitute their own.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}
