//! Parallel Monte Carlo ensembles, tau sweeps and the experiment runner
//! built on [`qhomog_core`].

pub mod commands;
pub mod config;
pub mod ensemble;
pub mod output;
pub mod sweep;

pub use qhomog_core as core;
