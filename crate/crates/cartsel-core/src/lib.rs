//! Variable selection for nonlinear regression and binary classification
//! built on CART.
//!
//! For every candidate subset `M` of the explanatory variables, a maximal
//! binary tree is grown on a learning sample, pruned into its nested
//! weakest-link subtree sequence, and the pair `(M, T)` is chosen by
//! minimizing an empirical contrast plus a penalty combining the number of
//! leaves `|T|` and the subset complexity `|M| (1 + log(p/|M|))`. Running the
//! selection over a grid of penalty constants `(alpha, beta)` yields a finite
//! family of estimators from which a final predictor is picked on a held-out
//! test sample.
//!
//! The crate is `no_std`-compatible (`alloc` required): disable the default
//! `std` feature and enable `libm`. IO, file formats and the command line
//! front end live in the companion `cartsel` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("cartsel-core needs either the `std` feature or the `libm` feature");

pub mod data;
pub mod harness;
pub mod importance;
pub mod prune;
pub mod selection;
pub mod tree;

mod fmath;
pub mod seeding;

pub use data::{Dataset, Framework, Method, SampleSplit};
pub use importance::{ImportanceReport, SubsetFamily, ViMode};
pub use prune::PrunedSequence;
pub use selection::{EstimatorFamily, PenaltySpec, SelectionResult};
pub use tree::{Split, Tree, VariableSubset};

/// Ordered map used throughout: deterministic iteration without hashing.
pub(crate) use alloc::collections::BTreeMap;

/// Maps an ordered collection in parallel when the `parallel` feature is on,
/// sequentially otherwise. Output order always matches input order, so the
/// result is independent of the worker count.
pub(crate) fn ordered_map<T, U, F>(items: alloc::vec::Vec<T>, f: F) -> alloc::vec::Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}
