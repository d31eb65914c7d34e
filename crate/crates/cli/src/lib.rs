//! Command-line front end and HTTP session service for the group-testing
//! engine.

pub mod api;
pub mod commands;
pub mod config;
pub mod session;
pub mod store;
