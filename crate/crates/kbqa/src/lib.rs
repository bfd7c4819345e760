//! Self-hosted FAQ knowledge-base service: file formats, the on-disk store,
//! the REST API, offline evaluation and the `kbqa` command line.
//!
//! The algorithms live in `kbqa-core`; this crate adds I/O and concurrency.

pub mod cli;
pub mod config;
pub mod eval;
pub mod io;
pub mod service;
pub mod store;
