//! IO, file formats and rendering for the CART variable-selection tool.
//! The algorithms live in `cartsel-core`; this crate adds CSV ingestion,
//! JSON/markdown emission and the command line front end.

pub mod io;
pub mod opts;
pub mod render;

pub use cartsel_core as core;
