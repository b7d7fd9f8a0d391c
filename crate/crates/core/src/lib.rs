//! Operator-chain selection and parameter tuning for contour segmentation.
//!
//! A set of processing phases (pre-processing, edge detection,
//! post-processing) is expanded into every possible operator chain. Each
//! chain's parameter space is tuned by a tabular Q-learning agent that
//! scores segmentation results against ground-truth edge maps, and the
//! chain with the best measured quality wins. An exhaustive search over
//! the same space serves as a correctness oracle.
//!
//! Module map:
//!
//! * [`imaging`]: image types and the five operators.
//! * [`metrics`]: ground-truth features, contour error measures, state features.
//! * [`qlearn`]: Q-table, policies, episodes and per-chain tuning.
//! * [`orchestration`]: chain/action enumeration, learned and exhaustive search.
//! * [`harness`]: configuration, PGM datasets, reports and the CLI.

pub mod error;
pub mod harness;
pub mod imaging;
pub mod metrics;
pub mod orchestration;
pub mod qlearn;

pub use error::{Error, Result};
