//! Command-line front end and remote-environment server.

pub mod commands;
pub mod config;
pub mod fsutil;
pub mod plot;
pub mod server;
