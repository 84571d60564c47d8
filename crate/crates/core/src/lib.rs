//! Central limit theorems for K-tuplewise independent summands built from
//! random vertex labels on graphs: distribution splitting, graph sequences,
//! exact and Monte Carlo samplers, the non-Gaussian limit law and the
//! verification tooling around them.

pub mod config;
pub mod dist;
pub mod exact;
pub mod graph;
pub mod limit;
pub mod mixture;
pub mod rng;
pub mod runner;
pub mod sampler;
pub mod verify;

pub use dist::{make_discrete, Distribution, Prob};
pub use graph::{complete_bipartite, Graph, GraphSeq};
pub use limit::LimitLaw;
pub use mixture::{split, MixturePair};
pub use rng::RngStream;
pub use sampler::Construction;
