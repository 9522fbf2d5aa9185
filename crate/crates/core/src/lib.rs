//! Normalization of free-form product attribute values ("surface forms")
//! to a fixed list of canonical forms per attribute.
//!
//! Two families of scorers are provided:
//!
//! * [`strsim`]: nine fuzzy string similarities (edit, sequence and
//!   n-gram token based), all scaled to `[0, 1]`.
//! * [`model`]: subword embeddings learned from raw product records with a
//!   twin network and a cosine triplet loss. Anchors are attribute values,
//!   positives are their own product titles, negatives are titles from the
//!   same category that do not mention the value ([`corpus`]).
//!
//! [`norm`] turns scores into a canonical form, OTHER, or an abstention, and
//! [`eval`] measures accuracy and accuracy–coverage on labeled data.
//!
//! ```
//! use attrnorm::corpus::CanonicalRegistry;
//! use attrnorm::norm::{normalize, Outcome, Scorer, Thresholds};
//! use attrnorm::strsim::Algorithm;
//!
//! let mut registry = CanonicalRegistry::new();
//! registry.insert("color", ["blue", "red"]).unwrap();
//!
//! let scorer = Scorer::string(Algorithm::NgramCosine);
//! let p = normalize(&scorer, "Light Blue", "color", &registry, Thresholds::single(0.3)).unwrap();
//! assert_eq!(p.outcome.label(), "blue");
//!
//! let p = normalize(&scorer, "5MP", "color", &registry, Thresholds::single(0.3)).unwrap();
//! assert_eq!(p.outcome, Outcome::Other);
//! ```

// Negated float comparisons are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod norm;
pub mod strsim;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
