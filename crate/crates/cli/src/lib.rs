//! The `nspc` command-line tool: configuration loading and the subcommand
//! implementations behind the binary.

pub mod commands;
pub mod config;
