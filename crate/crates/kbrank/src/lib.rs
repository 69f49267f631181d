//! File formats, caching and the command-line front end for `kbrank-core`.

pub mod cache;
pub mod cli;
pub mod config;
pub mod formats;
pub mod methods;
pub mod models;
pub mod report;
pub mod tables;
pub mod workspace;
