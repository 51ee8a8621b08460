//! Online learning to rank with linear attractiveness.
//!
//! The crate is organised around four layers:
//!
//! - [`linalg`] and [`design`]: pseudoinverse, least squares, G-optimal
//!   design (Frank–Wolfe with away steps), volumetric spanners and the
//!   per-phase exploration allocation.
//! - [`env`]: factored click-model environments (cascade, position-based,
//!   document-based, tabular), synthetic and MovieLens instance builders and
//!   an exhaustive audit of the examination assumptions.
//! - [`recurrank`]: the recursive ranker, its scheduler and a ground-truth
//!   failure monitor; [`baselines`] holds CascadeLinUCB and TopRank.
//! - [`harness`]: multi-seed experiments, regret traces, summaries and the
//!   config format used by the `recurrank` binary.
//!
//! Positions are 0-based throughout the API.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod design;
pub mod env;
mod error;
pub mod harness;
pub mod linalg;
pub mod ranker;
pub mod recurrank;

pub use error::{Error, Result};
pub use ranker::{ClickVector, Ranker, Ranking};
