//! File formats, generation clients and the command-line pipeline around
//! [`dived_core`].

pub mod cli;
pub mod client;
pub mod config;
pub mod io;
pub mod manifest;

pub use dived_core as core;
