//! Decomposition sampling.
//!
//! The sample space is covered by an ordered sequence of overlapping parts
//! (a *linked cover*). Each part is sampled independently, the relative mass
//! of every part is recovered from the draws that land in the overlaps, and
//! the per-part draws are merged into a single sample from the full target.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! file system, threads or wall clocks lives in the companion `dcs` crate.
//!
//! Parts and states are indexed from zero throughout.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cover;
pub mod diagnostics;
pub mod error;
pub mod expectation;
pub mod linalg;
pub mod merge;
pub mod pmmh;
pub mod proportion;
pub mod rng;
pub mod samplers;
pub mod special;
pub mod target;

pub use cover::{Cover, DiscreteCover, LinkedCover, Region};
pub use error::{Error, Result};
pub use expectation::{estimate_expectation, ExpectationEstimate, Integrand};
pub use merge::{merge, merge_weighted, merge_with_reuse, MergedSample};
pub use proportion::{estimate_proportions, estimate_proportions_unequal, ProportionEstimate};
pub use samplers::{subset_mh, subset_rejection, SubsetChainConfig, SubsetSample};
pub use target::Target;
