//! File formats, experiment harness and CLI support for principal tensor
//! block-diagonalization. The numerics live in [`ptbd_core`].

pub mod experiment;
pub mod io;
pub mod parse;
pub mod report;

pub use ptbd_core as core;
