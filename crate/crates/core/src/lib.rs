//! Earth mover's distance kernels for weighted point sets.
//!
//! The crate is organised bottom-up:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`multiset`] | weighted point sets and their set algebra |
//! | [`ground`] | ground distances, sinks, distance/kernel conversions |
//! | [`transport`] | exact EMD by min-cost flow, EMDHat, EMI, closed forms on the line and circle |
//! | [`transform`] | the Tanimoto-style definite-preserving transform, its nesting, the biotope transform |
//! | [`gram`] | Gram assembly, definiteness diagnostics, Shift and Krein corrections |
//! | [`svm`] | a dual C-SVM over precomputed kernels with one-vs-all multiclass |
//! | [`harness`] | datasets, synthetic data, pipelines and evaluation protocols |
//!
//! ```
//! use emdkern::{multiset::WeightedPointSet, ground::GroundDistance, transport};
//!
//! let a = WeightedPointSet::from_points(1, vec![vec![0.0], vec![1.0]], None).unwrap();
//! let b = WeightedPointSet::from_points(1, vec![vec![0.5], vec![1.5]], None).unwrap();
//! let plan = transport::emd(&a, &b, &GroundDistance::euclidean()).unwrap();
//! assert!((plan.cost - 1.0).abs() < 1e-12);
//! ```

pub mod error;
pub mod gram;
pub mod ground;
pub mod harness;
pub mod linalg;
pub mod matrix_io;
pub mod multiset;
pub mod svm;
pub mod transform;
pub mod transport;

pub use error::{Error, Result};
