//! Simulation harness for the wavenumber-domain holographic MIMO model:
//! experiment configs, runners, and artifact writers on top of the `hmimo`
//! library.

pub mod config;
pub mod plot;
pub mod runner;
