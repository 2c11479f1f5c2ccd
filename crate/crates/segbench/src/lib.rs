//! File formats, HTTP backends and the command-line pipeline around
//! `segbench-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod http;
pub mod io;
pub mod pipeline;
pub mod store;
