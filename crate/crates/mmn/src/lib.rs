//! Abstractive summarization with multi-level memory networks, from
//! scratch: a deterministic tensor library with reverse-mode autodiff, the
//! dilated-convolution encoder/decoder with key-value memory attention, the
//! forum-post preprocessing pipeline, extractive-bias diagnostics, and a
//! label-smoothed training loop.
//!
//! The companion guide under `book/` walks through each subsystem; its code
//! snippets are compiled and run by the `mmn-book` crate's doc-tests.

pub mod analytics;
pub mod corpus;
pub mod model;
pub mod numerics;
pub mod profiles;
pub mod training;
pub mod verify;

pub use profiles::Preset;
