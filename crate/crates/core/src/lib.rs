//! Search structures that use predicted query frequencies.
//!
//! The crate provides two learning-augmented structures and their classic
//! baselines:
//!
//! * [`skiplist::LearnedSkipList`]: items with a high predicted frequency are
//!   guaranteed a tall tower, everything else is promoted by fair coin flips.
//! * [`kdtree::KdTree`]: the upper tree splits on whichever axis best halves
//!   the predicted query mass; rarely queried points hang below it in small
//!   balanced subtrees.
//!
//! Around them sit the pieces needed to evaluate the structures: prediction
//! vectors and noise models ([`oracle`]), Zipf workloads and entropy references
//! ([`distributions`]), query traces and windowing ([`workload`]) and the
//! experiment runner that produces [`bench::BenchReport`]s.
//!
//! All randomness is driven by explicit `u64` seeds; the same inputs and seed
//! always produce the same structure and the same report.

pub mod bench;
pub mod distributions;
pub mod kdtree;
pub mod oracle;
pub mod rng;
pub mod skiplist;
pub mod workload;

pub use distributions::{entropy, huffman_expected_length, sample_queries, zipf_pmf, ZipfSpec};
pub use kdtree::{KdQueryResult, KdTree, WeightedPoint};
pub use oracle::{Contaminant, NoiseSpec, ProbabilityVector};
pub use skiplist::{LearnedSkipList, SearchResult};
pub use workload::{QueryTrace, WindowSpec};

/// Identifier of a key after interning. Keys compare by this id.
pub type Key = u64;
