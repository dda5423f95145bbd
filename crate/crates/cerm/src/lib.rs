//! Experiments, file formats and the command-line driver built on `cerm-core`.

pub mod commands;
pub mod config;
pub mod io;
pub mod model;
pub mod shapes;
