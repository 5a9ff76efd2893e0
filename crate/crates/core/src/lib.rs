//! Binarized CP knowledge graph embeddings.
//!
//! Triples `(subject, relation, object)` are scored by a three-way
//! product of subject, object and relation embeddings. Real-valued CP and
//! DistMult models train with logistic loss and SGD; the binarized
//! variants keep every component at `±Δ`, learn through a straight-through
//! estimator and score with XNOR and popcount on packed bits.
//!
//! Start with the runnable programs under `examples/`.

pub mod binarize;
pub mod bits;
pub mod cluster;
pub mod dense;
pub mod error;
pub mod eval;
pub mod expressiveness;
pub mod io;
pub mod kg;
pub mod sweep;
pub mod vq;

pub use binarize::{freeze, quantize, BinaryFactors, Scale};
pub use bits::{BitMatrix, BitVector};
pub use dense::{train, DenseFactors, Matrix, ModelKind, TrainConfig, TrainOutcome};
pub use error::{Error, Result};
pub use eval::{evaluate_pr_auc, evaluate_ranking, RankReport, RankingOptions, Scorer};
pub use io::Model;
pub use kg::{augment_inverse, load_dataset, LoadOptions, Split, Triple, TripleStore, Vocab};
