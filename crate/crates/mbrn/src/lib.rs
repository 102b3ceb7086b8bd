//! Everything around the `mbrn-core` kernels that needs an operating system:
//! parallel scoring drivers, HTTP clients for teachers and remote metrics,
//! on-disk formats, dataset builders, evaluation reports, and a local stub
//! service for exercising the pipeline end to end.

pub mod cache;
pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod formats;
pub mod fsio;
pub mod matrix;
pub mod remote;
pub mod scorer;
pub mod stub;
pub mod teacher;

pub use mbrn_core as core;
